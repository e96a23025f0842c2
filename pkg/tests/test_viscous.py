"""Viscous layer: standing profiles, the parabolic marcher, data smoothing."""

import numpy as np
import pytest

from junctionflow import (
    ConfigError,
    JunctionSpec,
    NetworkMesh,
    PreconditionError,
    initial_smoothing,
    parabolic_step,
    parabolic_timestep,
    quadratic_lwr,
    road_profile,
    run_parabolic,
    stationary_profile,
    symmetric_quadratic,
)
from junctionflow.verify import nonstrict_germ_sampler
from junctionflow.viscous import ParabolicState

RNG = np.random.default_rng(1618)

LWR11 = JunctionSpec(1, 1, (quadratic_lwr(), quadratic_lwr()))


# ---------------------------------------------------------------------------
# single-road standing-wave profiles

def test_incoming_profile_relaxes_to_far_state():
    # start at the junction value 0.4, relax to 0.2 away from the junction
    dist, vals, residual, _ = road_profile(
        quadratic_lwr(), k_h=0.2, p=0.4, epsilon=0.01, window=0.5,
        incoming=True, n_samples=201)
    assert dist[0] == 0.0 and dist[-1] == 0.5
    assert vals[0] == pytest.approx(0.4, abs=1e-12)
    assert vals[-1] == pytest.approx(0.2, abs=1e-9)
    assert (np.diff(vals) <= 1e-12).all()
    assert residual <= 1e-8


def test_outgoing_profile_relaxes_upward():
    _, vals, residual, _ = road_profile(
        quadratic_lwr(), k_h=0.8, p=0.6, epsilon=0.01, window=0.5,
        incoming=False, n_samples=201)
    assert vals[0] == pytest.approx(0.6, abs=1e-12)
    assert vals[-1] == pytest.approx(0.8, abs=1e-9)
    assert (np.diff(vals) >= -1e-12).all()
    assert residual <= 1e-8


def test_constant_profile_when_states_coincide():
    _, vals, residual, _ = road_profile(quadratic_lwr(), k_h=0.3, p=0.3,
                                        epsilon=0.05, window=1.0)
    np.testing.assert_allclose(vals, np.full(vals.shape, 0.3), atol=1e-14)
    assert residual == 0.0


def test_boundary_layer_width_scales_with_epsilon():
    # distance to decay halfway shrinks proportionally to epsilon
    widths = []
    for eps in (0.04, 0.02, 0.01):
        _, vals, _, _ = road_profile(quadratic_lwr(), k_h=0.2, p=0.4,
                                     epsilon=eps, window=2.0, n_samples=4001)
        s = np.linspace(0, 2.0, 4001)
        widths.append(s[np.searchsorted(-vals, -0.3)])  # first value <= 0.3
    assert widths[0] / widths[1] == pytest.approx(2.0, rel=1e-2)
    assert widths[1] / widths[2] == pytest.approx(2.0, rel=1e-2)


# ---------------------------------------------------------------------------
# network stationary profiles

def test_stationary_profile_structure():
    prof = stationary_profile(LWR11, (0.2, 0.8), epsilon=0.02, window=1.0)
    assert prof.p == pytest.approx(0.5, abs=1e-9)
    assert max(prof.residuals) <= 1e-8
    x_in = np.linspace(-1.0, 0.0, 101)
    x_out = np.linspace(0.0, 1.0, 101)
    v_in = prof.evaluate(0, x_in)
    v_out = prof.evaluate(1, x_out)
    # junction value p on both sides, far fields k_h, monotone in between
    assert v_in[-1] == pytest.approx(0.5, abs=1e-12)
    assert v_out[0] == pytest.approx(0.5, abs=1e-12)
    assert v_in[0] == pytest.approx(0.2, abs=1e-9)
    assert v_out[-1] == pytest.approx(0.8, abs=1e-9)
    assert (np.diff(v_in) >= -1e-12).all()
    assert (np.diff(v_out) >= -1e-12).all()
    lo = min(0.2, 0.5) - 1e-12
    hi = max(0.8, 0.5) + 1e-12
    assert lo <= v_in.min() and v_in.max() <= hi
    assert lo <= v_out.min() and v_out.max() <= hi


def test_profile_scaling_identity():
    # rho^eps(x) = rho^1(x / eps) for the same equilibrium state
    ref = stationary_profile(LWR11, (0.2, 0.8), epsilon=1.0, window=50.0)
    eps = 0.02
    prof = stationary_profile(LWR11, (0.2, 0.8), epsilon=eps, window=1.0)
    xs = np.linspace(-1.0, 0.0, 57)
    gap = np.abs(prof.evaluate(0, xs) - ref.evaluate(0, xs / eps)).max()
    assert gap <= 1e-8
    xs = np.linspace(0.0, 1.0, 57)
    gap = np.abs(prof.evaluate(1, xs) - ref.evaluate(1, xs / eps)).max()
    assert gap <= 1e-8


def test_explicit_witness_override():
    prof = stationary_profile(LWR11, (0.2, 0.8), epsilon=0.02, window=1.0,
                              p=0.4)
    assert prof.p == 0.4
    assert prof.evaluate(0, np.array([0.0]))[0] == pytest.approx(0.4,
                                                                 abs=1e-12)
    with pytest.raises(PreconditionError):
        # margins fail between 0.8 and 0.9: f dips under f(0.2) past 0.8
        stationary_profile(LWR11, (0.2, 0.8), epsilon=0.02, window=1.0, p=0.9)
    with pytest.raises(ValueError):
        stationary_profile(LWR11, (0.2, 0.8), epsilon=0.02, window=1.0, p=1.5)


def test_profiles_require_strict_equilibrium():
    with pytest.raises(PreconditionError):
        stationary_profile(LWR11, (0.2, 0.3), epsilon=0.02, window=1.0)
    for spec, k in nonstrict_germ_sampler(10, seed=21):
        with pytest.raises(PreconditionError):
            stationary_profile(spec, k, epsilon=0.02, window=1.0)


# ---------------------------------------------------------------------------
# parabolic marching

def test_parabolic_timestep_bounds():
    mesh = NetworkMesh(LWR11, 0.01, np.array([50, 50]))
    eps = 0.02
    dt = parabolic_timestep(mesh, eps, safety=1.0)
    # never beyond either stated bound, nor the combined explicit bound
    assert dt <= 0.01 / 2.0 + 1e-18
    assert dt <= 0.01**2 / (4 * eps) + 1e-18
    assert dt <= 1.0 / (2.0 / 0.01 + 4 * eps / 0.01**2) * (1 + 1e-12)


def test_parabolic_step_guards_timestep():
    mesh = NetworkMesh(LWR11, 0.01, np.array([50, 50]))
    state = ParabolicState(0.02, mesh, (np.full(50, 0.3), np.full(50, 0.6)),
                           junction_value=None)
    limit = min(0.01 / 2.0, 0.01**2 / (4 * 0.02))
    with pytest.raises(ConfigError) as err:
        parabolic_step(state, 1.01 * limit)
    assert err.value.kind == "cfl"
    out = parabolic_step(state, 0.9 * limit)
    assert out.time == pytest.approx(0.9 * limit)


def test_parabolic_max_principle_and_mass():
    for spec in (LWR11, JunctionSpec(2, 1, (symmetric_quadratic(1),
                                            symmetric_quadratic(2),
                                            symmetric_quadratic(3)))):
        roads = spec.m + spec.n
        mesh = NetworkMesh(spec, 0.02, np.full(roads, 50))
        lo, hi = spec.rho_min, spec.rho_max
        init = [lo + (hi - lo) * RNG.random(50) for _ in range(roads)]
        traj = run_parabolic(mesh, 0.02, init, t_final=0.1)
        for st in traj.states:
            for v in st.values:
                assert v.min() >= lo - 1e-12
                assert v.max() <= hi + 1e-12
        # boundary_net logs net outflow, so adding the accumulated outflow
        # back should recover the initial mass
        defect = abs(traj.masses[-1] - traj.masses[0]
                     + float(np.sum(traj.dts * traj.boundary_net)))
        assert defect <= 1e-12


def test_parabolic_l1_contraction_interior():
    # identical far fields, different interiors: distance cannot grow while
    # the differences stay away from the outer ends
    mesh = NetworkMesh(LWR11, 0.02, np.array([50, 50]))
    a = [np.full(50, 0.45), np.full(50, 0.55)]
    b = [v.copy() for v in a]
    b[0][30:] = RNG.uniform(0.2, 0.8, 20)
    b[1][:20] = RNG.uniform(0.2, 0.8, 20)
    ta = run_parabolic(mesh, 0.02, a, t_final=0.05)
    tb = run_parabolic(mesh, 0.02, b, t_final=0.05)
    dists = [sum(mesh.dx * np.abs(sa.values[h] - sb.values[h]).sum()
                 for h in range(2))
             for sa, sb in zip(ta.states, tb.states)]
    assert (np.diff(dists) <= 1e-12).all()


def test_discrete_steady_state_tracks_profile():
    # the marched solution stays near the ODE profile, and the gap halves
    # with the mesh (first-order consistency at the junction closure)
    eps = 0.02
    drifts = []
    for n in (100, 200):
        mesh = NetworkMesh(LWR11, 1.0 / n, np.array([n, n]))
        prof = stationary_profile(LWR11, (0.2, 0.8), eps, window=1.0)
        init = [prof.evaluate(h, mesh.centers(h)) for h in range(2)]
        traj = run_parabolic(mesh, eps, init, t_final=0.05)
        drifts.append(max(np.abs(traj.final.values[h] - init[h]).max()
                          for h in range(2)))
    assert drifts[0] <= 3e-3
    assert drifts[1] <= 0.65 * drifts[0]


def test_parabolic_equilibrium_junction_value():
    # marched from the profile, the junction closure reproduces the witness
    eps = 0.02
    mesh = NetworkMesh(LWR11, 0.01, np.array([100, 100]))
    prof = stationary_profile(LWR11, (0.2, 0.8), eps, window=1.0)
    init = [prof.evaluate(h, mesh.centers(h)) for h in range(2)]
    traj = run_parabolic(mesh, eps, init, t_final=0.02)
    w = np.asarray(traj.junction_values)
    assert np.abs(w - 0.5).max() <= 1e-3


# ---------------------------------------------------------------------------
# initial-data smoothing

def test_smoothing_documented_example():
    # width 2 -> one pass of the 3-cell average with replicated edges
    u = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
    out = initial_smoothing(u, epsilon=0.2, dx=0.1)  # width round(eps/dx) = 2
    np.testing.assert_allclose(out, [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0],
                               rtol=1e-15)


def test_smoothing_preserves_mass_range_tv_l1():
    for _ in range(20):
        n = int(RNG.integers(5, 60))
        u = RNG.uniform(-1.0, 1.0, n)
        v = RNG.uniform(-1.0, 1.0, n)
        w = int(RNG.integers(1, 8))
        su = initial_smoothing(u, epsilon=1.0, width=w)
        sv = initial_smoothing(v, epsilon=1.0, width=w)
        assert su.sum() == pytest.approx(u.sum(), abs=1e-12)
        assert su.min() >= u.min() - 1e-13 and su.max() <= u.max() + 1e-13
        tv = lambda x: np.abs(np.diff(x)).sum()
        assert tv(su) <= tv(u) + 1e-12
        assert np.abs(su - sv).sum() <= np.abs(u - v).sum() + 1e-12


def test_smoothing_handles_sequences_and_defaults():
    data = [RNG.uniform(0, 1, 30), RNG.uniform(0, 1, 40)]
    out = initial_smoothing(data, epsilon=0.1, dx=0.02)
    assert isinstance(out, tuple) and len(out) == 2
    assert out[0].shape == (30,) and out[1].shape == (40,)
    with pytest.raises(ValueError):
        initial_smoothing(data[0], epsilon=0.1)  # needs dx or width
