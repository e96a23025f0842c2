"""Junction coupling: p-interval solve, equilibrium membership, Riemann fans.

The solver is checked against a from-scratch grid oracle built here: demands
and supplies as running grid maxima of the flux profiles, the coupling
interval as the sign change of the sampled balance gap.
"""

import math

import numpy as np
import pytest

from junctionflow import (
    ConsistencyError,
    JunctionSpec,
    custom_polynomial,
    dissipativity,
    is_germ_member,
    is_strict_germ_member,
    phi_in,
    phi_out,
    quadratic_lwr,
    riemann_solve,
    solve_junction,
    strict_witness,
    symmetric_quadratic,
    tabulated,
    total_flux,
)
from junctionflow.verify import germ_sampler, nonstrict_germ_sampler

RNG = np.random.default_rng(31415)

LWR11 = JunctionSpec(1, 1, (quadratic_lwr(), quadratic_lwr()))
SYMQ21 = JunctionSpec(2, 1, (symmetric_quadratic(1), symmetric_quadratic(2),
                             symmetric_quadratic(3)))
LWR23 = JunctionSpec(2, 3, (quadratic_lwr(), quadratic_lwr(1.5),
                            quadratic_lwr(), quadratic_lwr(0.75),
                            quadratic_lwr(1.25)))
MIXED32 = JunctionSpec(3, 2, (
    quadratic_lwr(1.2),
    custom_polynomial([0.0, 2.4, -1.8, -1.2, 0.6], 0.0, 1.0, 0.5),
    tabulated(np.linspace(0, 1, 257),
              np.sin(np.pi * np.linspace(0, 1, 257)) * 0.3),
    quadratic_lwr(0.8),
    quadratic_lwr(1.6),
))

ALL_SPECS = [LWR11, SYMQ21, LWR23, MIXED32]

WORKED_U = (-math.sqrt(0.5), 0.25, math.sqrt(1.0 / 6.0))
WORKED_G = np.array([0.5, 2.0, 2.5])
WORKED_P = (-math.sqrt(1.0 / 6.0), 0.0)


# ---------------------------------------------------------------------------
# grid oracle

def oracle_interval_and_fluxes(spec, u, n=200001):
    """Coupling interval and fluxes from running grid maxima, no kernels."""
    grid = np.linspace(spec.rho_min, spec.rho_max, n)
    profiles = [f.eval(grid) for f in spec.fluxes]
    # supply(p) = max f on [p, B]: reverse running max; demand(p): forward
    supplies = [np.maximum.accumulate(v[::-1])[::-1] for v in profiles]
    demands = [np.maximum.accumulate(v) for v in profiles]

    gap = np.zeros(n)
    for i in range(spec.m):
        d_i = demands[i][np.searchsorted(grid, u[i])]
        gap += np.minimum(d_i, supplies[i])
    for j in range(spec.m, spec.m + spec.n):
        s_j = supplies[j][np.searchsorted(grid, u[j])]
        gap -= np.minimum(demands[j], s_j)

    below = np.flatnonzero(gap <= 0)
    above = np.flatnonzero(gap >= 0)
    assert below.size and above.size, "oracle found no sign change"
    p_lo = grid[below[0]]
    p_hi = grid[above[-1]]
    mid_idx = (below[0] + above[-1]) // 2
    fluxes = np.empty(spec.m + spec.n)
    for i in range(spec.m):
        d_i = demands[i][np.searchsorted(grid, u[i])]
        fluxes[i] = min(d_i, supplies[i][mid_idx])
    for j in range(spec.m, spec.m + spec.n):
        s_j = supplies[j][np.searchsorted(grid, u[j])]
        fluxes[j] = min(demands[j][mid_idx], s_j)
    return (p_lo, p_hi), fluxes, grid[1] - grid[0]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=["1-1", "2-1", "2-3", "3-2mixed"])
def test_solver_matches_grid_oracle(spec):
    # states drawn on the oracle's own grid, so its running maxima are exact
    # at the data and only the p-resolution h remains as slack
    grid = np.linspace(spec.rho_min, spec.rho_max, 200001)
    for _ in range(20):
        u = grid[RNG.integers(0, grid.size, spec.m + spec.n)]
        sol = solve_junction(spec, u)
        (p_lo, p_hi), g_oracle, h = oracle_interval_and_fluxes(spec, u)
        # interval endpoints to oracle-grid resolution (gap is sum-Lipschitz)
        assert sol.p_min == pytest.approx(p_lo, abs=2 * h)
        assert sol.p_max == pytest.approx(p_hi, abs=2 * h)
        slack = spec.lipschitz_max * 2 * h + 1e-12
        assert np.abs(sol.fluxes - g_oracle).max() <= slack


@pytest.mark.parametrize("spec", ALL_SPECS, ids=["1-1", "2-1", "2-3", "3-2mixed"])
def test_solution_invariants(spec):
    span = spec.span
    for _ in range(50):
        u = spec.rho_min + span * RNG.random(spec.m + spec.n)
        sol = solve_junction(spec, u)
        assert sol.p_min <= sol.p_max
        assert spec.rho_min <= sol.p_min and sol.p_max <= spec.rho_max
        total_in = math.fsum(sol.fluxes[:spec.m].tolist())
        total_out = math.fsum(sol.fluxes[spec.m:].tolist())
        assert abs(total_in - total_out) <= 1e-12 * max(1.0, abs(total_in))
        assert sol.total == pytest.approx(total_in)
        for h, f in enumerate(spec.fluxes):
            assert -1e-13 <= sol.fluxes[h] <= f.flux_max * (1 + 1e-13)


def test_worked_junction_example():
    sol = solve_junction(SYMQ21, WORKED_U)
    assert np.abs(sol.fluxes - WORKED_G).max() <= 1e-10
    assert sol.p_min == pytest.approx(WORKED_P[0], abs=1e-7)
    assert sol.p_max == pytest.approx(WORKED_P[1], abs=1e-7)
    assert sol.total == pytest.approx(2.5, abs=1e-10)
    assert total_flux(SYMQ21, WORKED_U) == pytest.approx(2.5, abs=1e-10)


def test_phi_totals_agree_inside_interval():
    sol = solve_junction(SYMQ21, WORKED_U)
    p = 0.5 * (sol.p_min + sol.p_max)
    assert phi_in(SYMQ21, WORKED_U, p) == pytest.approx(sol.total, abs=1e-10)
    assert phi_out(SYMQ21, WORKED_U, p) == pytest.approx(sol.total, abs=1e-10)


def test_solver_rejects_bad_states():
    with pytest.raises(ValueError):
        solve_junction(LWR11, (0.2, 1.4))
    with pytest.raises(ValueError):
        solve_junction(LWR11, (0.2,))
    with pytest.raises(ValueError):
        solve_junction(LWR11, (0.2, 0.8), tol=-1.0)


def test_spec_construction_errors():
    with pytest.raises(ValueError):
        JunctionSpec(0, 1, (quadratic_lwr(),))
    with pytest.raises(ValueError):
        JunctionSpec(1, 1, (quadratic_lwr(),))
    with pytest.raises(ValueError):
        JunctionSpec(1, 1, (quadratic_lwr(), symmetric_quadratic()))


# ---------------------------------------------------------------------------
# equilibrium membership

def test_membership_known_cases():
    assert is_germ_member(LWR11, (0.2, 0.8), method="both")
    assert is_germ_member(LWR11, (0.3, 0.3), method="both")
    assert not is_germ_member(LWR11, (0.2, 0.3), method="both")
    assert not is_germ_member(LWR11, (0.8, 0.2), method="both")
    with pytest.raises(ValueError):
        is_germ_member(LWR11, (0.2, 0.8), method="magic")


def test_stationary_shock_is_strict():
    # both branches carry flux 0.16; any interior coupling value separates
    # the chords strictly
    w = strict_witness(LWR11, (0.2, 0.8))
    assert w is not None and 0.2 < w < 0.8
    assert is_strict_germ_member(LWR11, (0.2, 0.8))


def test_worked_traces_form_strict_equilibrium():
    rs = riemann_solve(SYMQ21, WORKED_U)
    k = rs.traces
    assert is_germ_member(SYMQ21, k, method="both")
    assert is_strict_germ_member(SYMQ21, k)
    assert not is_germ_member(SYMQ21, WORKED_U, method="both")


def test_membership_methods_agree_on_random_states():
    for spec in (LWR11, SYMQ21, LWR23):
        span = spec.span
        for _ in range(40):
            u = spec.rho_min + span * RNG.random(spec.m + spec.n)
            # "both" raises ConsistencyError if the two paths disagree
            is_germ_member(spec, u, method="both")
        for k in germ_sampler(spec, 10, seed=5):
            assert is_germ_member(spec, k, method="both")


def test_nonstrict_family_members_not_strict():
    for spec, k in nonstrict_germ_sampler(10, seed=11):
        assert is_germ_member(spec, k, method="both")
        assert not is_strict_germ_member(spec, k)


def test_sampled_equilibria_are_held_by_resolve():
    # solving again from an equilibrium reproduces its own flux values
    for spec in (LWR11, LWR23):
        for k in germ_sampler(spec, 20, seed=6):
            sol = solve_junction(spec, k)
            assert np.abs(sol.fluxes - spec.road_flux_values(k)).max() <= 1e-12


# ---------------------------------------------------------------------------
# pairwise dissipativity

def test_dissipativity_frozen_example():
    # q(0.2|0.5) - q(0.8|0.5) with f = r(1-r):
    # sign(0.2-0.5)(0.16-0.25) - sign(0.8-0.5)(0.16-0.25) = 0.09 + 0.09
    val = dissipativity(LWR11, (0.2, 0.8), (0.5, 0.5))
    assert val == pytest.approx(0.18, abs=1e-14)


def test_dissipativity_properties():
    for spec in (LWR11, SYMQ21, LWR23):
        ks = germ_sampler(spec, 15, seed=7)
        for k in ks:
            assert dissipativity(spec, k, k) == pytest.approx(0.0, abs=1e-14)
        vals = [dissipativity(spec, a, b) for a in ks for b in ks]
        assert min(vals) >= -1e-12
        sym = [abs(dissipativity(spec, a, b) - dissipativity(spec, b, a))
               for a in ks[:5] for b in ks[:5]]
        assert max(sym) <= 1e-13


# ---------------------------------------------------------------------------
# junction Riemann solutions

def test_riemann_traces_are_equilibria():
    for spec in ALL_SPECS:
        span = spec.span
        for _ in range(15):
            u0 = spec.rho_min + span * RNG.random(spec.m + spec.n)
            rs = riemann_solve(spec, u0)
            assert is_germ_member(spec, rs.traces, tol=1e-8)


def test_riemann_sample_limits():
    rs = riemann_solve(LWR11, (0.8, 0.2))
    assert rs.traces == pytest.approx([0.5, 0.5], abs=1e-7)
    t = 0.25
    # far field: data; at the junction: traces
    assert rs.sample(0, np.array([-10.0]) / t)[0] == pytest.approx(0.8)
    assert rs.sample(1, np.array([10.0]) / t)[0] == pytest.approx(0.2)
    assert rs.sample(0, np.array([0.0]))[0] == pytest.approx(rs.traces[0], abs=1e-7)
    assert rs.sample(1, np.array([0.0]))[0] == pytest.approx(rs.traces[1], abs=1e-7)


def test_riemann_rarefaction_profile_monotone():
    rs = riemann_solve(LWR11, (0.8, 0.2))
    xi = np.linspace(0.0, 3.0, 301)
    vals = rs.sample(1, xi)
    assert (np.diff(vals) <= 1e-12).all()          # decays toward 0.2
    assert vals[0] == pytest.approx(0.5, abs=1e-7)  # sonic value at the junction
    mid = rs.sample(1, np.array([0.2]))[0]          # inside the fan: f'(u) = xi
    assert 1.0 - 2.0 * mid == pytest.approx(0.2, abs=1e-10)


def test_riemann_shock_position():
    # (0.3, 0.6): junction passes demand 0.21; the outgoing road carries a
    # single shock at chord speed (f(0.6)-f(0.21->0.3 branch))/(0.6-0.3) = 0.1
    rs = riemann_solve(LWR11, (0.3, 0.6))
    assert rs.traces == pytest.approx([0.3, 0.3], abs=1e-12)
    t = 1.0
    ahead = rs.sample(1, np.array([0.11]) / t)[0]
    behind = rs.sample(1, np.array([0.09]) / t)[0]
    assert behind == pytest.approx(0.3, abs=1e-12)
    assert ahead == pytest.approx(0.6, abs=1e-12)


def test_riemann_on_equilibrium_is_constant():
    for spec in (LWR11, LWR23):
        for k in germ_sampler(spec, 10, seed=8):
            rs = riemann_solve(spec, k)
            assert rs.traces == pytest.approx(k, abs=1e-12)
            for h in range(spec.m + spec.n):
                xi = np.linspace(-2, 0, 64) if h < spec.m else np.linspace(0, 2, 64)
                assert rs.sample(h, xi) == pytest.approx(np.full(64, k[h]),
                                                         abs=1e-12)


def test_riemann_samples_stay_in_range():
    for spec in ALL_SPECS:
        span = spec.span
        for _ in range(10):
            u0 = spec.rho_min + span * RNG.random(spec.m + spec.n)
            rs = riemann_solve(spec, u0)
            for h in range(spec.m + spec.n):
                sgn = -1.0 if h < spec.m else 1.0
                xi = sgn * np.linspace(0.0, 4.0, 101) * spec.lipschitz_max
                vals = rs.sample(h, np.sort(xi))
                assert vals.min() >= spec.rho_min - 1e-12
                assert vals.max() <= spec.rho_max + 1e-12
