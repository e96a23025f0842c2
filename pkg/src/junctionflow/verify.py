"""Verification harness for the network scheme.

The central object is a discrete two-solution audit: for trajectories u and
u-hat on the same mesh, the Crandall-Majda cell inequalities sum against a
nonnegative test weight into a quadratic form that must stay nonpositive.
The junction enters through the flux differences of the coupled solves at
the componentwise max and min states; its weight coefficient vanishes
identically because the test weight is flat across the junction, and the
coupled solves conserve total flux. On top of that sit an L1 contraction
check on shrinking windows, entropy residuals against equilibrium states,
grid-refinement studies against the exact similarity sampler, and seeded
samplers producing equilibrium states for ensemble tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, ConsistencyError, PreconditionError
from .fluxes import quadratic_lwr
from .junction import (JunctionSpec, is_germ_member, is_strict_germ_member,
                       riemann_solve, solve_junction)
from .scheme import NetworkMesh, RunConfig, Trajectory, run


# ---------------------------------------------------------------------------
# test weights

@dataclass(eq=False)
class TestFunction:
    """Nonnegative tensor-product weight xi(t, x) for the discrete audits.

    ``space_profile`` must be exactly constant on [-plateau, plateau] so the
    two junction-adjacent cell centers carry the same weight as the junction
    point itself; ``time_profile`` must vanish at t = 0, stay zero through
    the first time level, and vanish again at the final recorded time.
    """

    time_profile: Callable[[float], float]
    space_profile: Callable[[float], float]
    plateau: float

    def time_levels(self, times: np.ndarray) -> np.ndarray:
        return np.array([self.time_profile(float(t)) for t in times])

    def space_cells(self, mesh: NetworkMesh) -> list[np.ndarray]:
        out = []
        for h in range(mesh.spec.m + mesh.spec.n):
            centers = mesh.centers(h)
            out.append(np.array([self.space_profile(float(x))
                                 for x in centers]))
        return out


def bump_test_function(t_on: float, t_off: float, reach: float,
                       plateau: float) -> TestFunction:
    """Smooth bump in time on (t_on, t_off), times a space profile equal to
    1 on [-plateau, plateau] and falling smoothly to 0 at distance reach."""
    if not 0 <= t_on < t_off:
        raise ValueError("need 0 <= t_on < t_off")
    if not 0 < plateau < reach:
        raise ValueError("need 0 < plateau < reach")

    def time_profile(t: float) -> float:
        z = (2.0 * t - t_on - t_off) / (t_off - t_on)
        if abs(z) >= 1.0:
            return 0.0
        return math.exp(1.0 - 1.0 / (1.0 - z * z))

    def space_profile(x: float) -> float:
        r = abs(x)
        if r <= plateau:
            return 1.0
        if r >= reach:
            return 0.0
        z = (r - plateau) / (reach - plateau)
        return 1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)

    return TestFunction(time_profile, space_profile, plateau)


# ---------------------------------------------------------------------------
# discrete two-solution audit

@dataclass(frozen=True)
class KatoReport:
    """Outcome of a two-solution audit: the assembled quadratic form and the
    mass-scaled tolerance it must stay below."""

    value: float
    tolerance: float
    passed: bool


def _same_mesh(a: NetworkMesh, b: NetworkMesh) -> bool:
    return (a is b) or (a.spec is b.spec and a.dx == b.dx
                        and np.array_equal(a.cells_per_road, b.cells_per_road))


def _assemble_audit(mesh: NetworkMesh, values_a, values_b, times, dts,
                    xi: TestFunction) -> float:
    """The summed form: for each recorded step s >= 1,

        -dx * sum_cells |u - u_hat|^s * (xi^{s+1} - xi^s)
        -dt_s * sum_interfaces Q^s * (xi^{s+1}_right - xi^{s+1}_left)

    where Q is the Godunov (or coupled junction) flux at the componentwise
    max minus the one at the componentwise min, the weight beyond the outer
    ends is zero, and the weight at the junction point is the plateau value.
    """
    spec = mesh.spec
    dx = mesh.dx
    tv = xi.time_levels(times)
    xs = xi.space_cells(mesh)
    x0 = xi.space_profile(0.0)
    n_levels = len(times)
    if n_levels < 3:
        raise PreconditionError("audit needs at least two recorded steps")
    if tv[0] != 0.0 or tv[1] != 0.0 or tv[-1] != 0.0:
        raise PreconditionError(
            "time profile must vanish at t=0, at the first level, "
            "and at the final level")
    if xi.plateau < dx / 2 * (1 - 1e-12):
        raise PreconditionError(
            "space plateau must cover the junction-adjacent cell centers")
    for h in range(spec.m):
        if xs[h][-1] != x0:
            raise PreconditionError("space profile not flat at the junction")
    for h in range(spec.m, spec.m + spec.n):
        if xs[h][0] != x0:
            raise PreconditionError("space profile not flat at the junction")

    ustar_hi = np.empty(spec.m + spec.n)
    ustar_lo = np.empty(spec.m + spec.n)
    terms = []
    for s in range(1, n_levels - 1):
        dt_s = dts[s]
        va, vb = values_a[s], values_b[s]
        for h in range(spec.m):
            ustar_hi[h] = max(va[h][-1], vb[h][-1])
            ustar_lo[h] = min(va[h][-1], vb[h][-1])
        for h in range(spec.m, spec.m + spec.n):
            ustar_hi[h] = max(va[h][0], vb[h][0])
            ustar_lo[h] = min(va[h][0], vb[h][0])
        g_hi = solve_junction(spec, ustar_hi).fluxes
        g_lo = solve_junction(spec, ustar_lo).fluxes

        for h, flux in enumerate(spec.fluxes):
            a, b = va[h], vb[h]
            hi = np.maximum(a, b)
            lo = np.minimum(a, b)
            xi_s = tv[s] * xs[h]
            xi_s1 = tv[s + 1] * xs[h]
            terms.append(-dx * float(np.dot(np.abs(a - b), xi_s1 - xi_s)))
            q_inner = flux.godunov(hi[:-1], hi[1:]) - flux.godunov(lo[:-1],
                                                                  lo[1:])
            terms.append(-dt_s * float(np.dot(q_inner, np.diff(xi_s1))))
            q_outer = abs(flux.eval(hi[0 if h < spec.m else -1])
                          - flux.eval(lo[0 if h < spec.m else -1]))
            q_junction = g_hi[h] - g_lo[h]
            if h < spec.m:
                terms.append(-dt_s * q_outer * (xi_s1[0] - 0.0))
                terms.append(-dt_s * q_junction * (tv[s + 1] * x0 - xi_s1[-1]))
            else:
                terms.append(-dt_s * q_outer * (0.0 - xi_s1[-1]))
                terms.append(-dt_s * q_junction * (xi_s1[0] - tv[s + 1] * x0))
    return math.fsum(terms)


def _mass_scale(mesh: NetworkMesh) -> float:
    return mesh.dx * mesh.spec.span * float(np.sum(mesh.cells_per_road))


def kato_audit(traj_a: Trajectory, traj_b: Trajectory,
               xi: TestFunction) -> KatoReport:
    """Audit two trajectories against each other; the assembled form must be
    nonpositive up to 1e-10 of the mass scale dx * (B - A) * total cells."""
    mesh = traj_a.mesh
    if not _same_mesh(mesh, traj_b.mesh):
        raise ConfigError("trajectories live on different meshes")
    if not np.array_equal(traj_a.times, traj_b.times):
        raise ConfigError("trajectories have different time levels")
    if (len(traj_a.states) != len(traj_a.times)
            or len(traj_b.states) != len(traj_b.times)):
        raise ConfigError("audit needs all time levels recorded")
    value = _assemble_audit(mesh,
                            [st.values for st in traj_a.states],
                            [st.values for st in traj_b.states],
                            traj_a.times, traj_a.dts, xi)
    tol = 1e-10 * _mass_scale(mesh)
    return KatoReport(value, tol, value <= tol)


def adapted_entropy_residual(traj: Trajectory, k, xi: TestFunction) -> float:
    """Entropy residual of a trajectory against one equilibrium state k.

    Equals minus the two-solution audit value with the second trajectory
    frozen at k (an exact steady state of the scheme), so admissible output
    must keep it above -1e-10 times the mass scale.
    """
    mesh = traj.mesh
    spec = mesh.spec
    k = spec.candidate(k)
    if not is_germ_member(spec, k):
        raise PreconditionError(
            "comparison state must be an equilibrium of the junction")
    if len(traj.states) != len(traj.times):
        raise ConfigError("residual needs all time levels recorded")
    constant = tuple(np.full(int(c), k[h])
                     for h, c in enumerate(mesh.cells_per_road))
    values_b = [constant] * len(traj.states)
    value = _assemble_audit(mesh, [st.values for st in traj.states],
                            values_b, traj.times, traj.dts, xi)
    return -value


# ---------------------------------------------------------------------------
# L1 contraction on shrinking windows

@dataclass(frozen=True)
class ContractionReport:
    """Per-step L1 distances over windows shrinking by one cell per step."""

    distances: np.ndarray
    window_cells: np.ndarray
    tolerance: float
    passed: bool


def l1_contraction_check(traj_a: Trajectory, traj_b: Trajectory,
                         window: float) -> ContractionReport:
    """L1 distance near the junction must not grow while the window outruns
    the discrete domain of dependence (one cell per step)."""
    mesh = traj_a.mesh
    if not _same_mesh(mesh, traj_b.mesh):
        raise ConfigError("trajectories live on different meshes")
    if not np.array_equal(traj_a.times, traj_b.times):
        raise ConfigError("trajectories have different time levels")
    spec = mesh.spec
    k0 = int(math.floor(window / mesh.dx + 1e-9))
    if k0 < 1:
        raise ConfigError("window covers no cells", kind="range")
    if k0 > int(mesh.cells_per_road.min()):
        raise ConfigError("window larger than the truncated roads",
                          kind="range")
    n_steps = len(traj_a.states) - 1
    last = min(n_steps, k0 - 1)
    distances = np.empty(last + 1)
    windows = np.empty(last + 1, dtype=np.int64)
    for s in range(last + 1):
        cells = k0 - s
        va = traj_a.states[s].values
        vb = traj_b.states[s].values
        acc = 0.0
        for h in range(spec.m):
            acc += float(np.abs(va[h][-cells:] - vb[h][-cells:]).sum())
        for h in range(spec.m, spec.m + spec.n):
            acc += float(np.abs(va[h][:cells] - vb[h][:cells]).sum())
        distances[s] = mesh.dx * acc
        windows[s] = cells
    tol = 1e-12
    passed = bool(np.all(np.diff(distances) <= tol))
    return ContractionReport(distances, windows, tol, passed)


# ---------------------------------------------------------------------------
# convergence studies

@dataclass(eq=False)
class RiemannProblem:
    """Constant-per-road initial data with a known similarity solution."""

    spec: JunctionSpec
    initial: np.ndarray
    t_final: float
    road_length: float = 1.0
    cfl: float = 0.9

    def __post_init__(self):
        self.initial = self.spec.candidate(self.initial)
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")

    def exact_cells(self, mesh: NetworkMesh) -> tuple[np.ndarray, ...]:
        """Similarity solution sampled at cell centers at t_final."""
        rs = riemann_solve(self.spec, self.initial)
        out = []
        for h in range(self.spec.m + self.spec.n):
            out.append(rs.sample(h, mesh.centers(h) / self.t_final))
        return tuple(out)


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows of (dx, L1 error, observed order); order is reported only."""

    rows: tuple[tuple[float, float, float], ...]
    decreasing: bool


def _final_values(problem: RiemannProblem, dx: float,
                  cells: int) -> tuple[NetworkMesh, tuple]:
    mesh = NetworkMesh(problem.spec, dx,
                       np.full(problem.spec.m + problem.spec.n, cells))
    config = RunConfig(mesh, problem.cfl, problem.t_final)
    traj = run(config, problem.initial, keep_states=False)
    return mesh, traj.final.values


def convergence_study(problem: RiemannProblem, dx_list,
                      reference: str = "exact",
                      fine_dx: float | None = None) -> ConvergenceReport:
    """L1 errors at t_final on a ladder of meshes (given coarse to fine).

    ``reference`` picks the comparison: "exact" samples the similarity
    solution; "fine" block-averages one extra run on a mesh of width
    fine_dx (default: a quarter of the finest requested dx), which must
    divide every requested dx.
    """
    dx_list = [float(d) for d in dx_list]
    if reference not in ("exact", "fine"):
        raise ValueError("reference must be 'exact' or 'fine'")
    ref_values = None
    fine_cells = None
    if reference == "fine":
        if fine_dx is None:
            fine_dx = min(dx_list) / 4.0
        fine_cells = int(round(problem.road_length / fine_dx))
        _, ref_values = _final_values(problem, fine_dx, fine_cells)

    rows = []
    prev = None
    for dx in dx_list:
        cells = int(round(problem.road_length / dx))
        if abs(cells * dx - problem.road_length) > 1e-9 * problem.road_length:
            raise ValueError(f"dx={dx} does not tile the road length")
        mesh, values = _final_values(problem, dx, cells)
        err_parts = []
        if reference == "exact":
            exact = problem.exact_cells(mesh)
            for h in range(problem.spec.m + problem.spec.n):
                err_parts.append(dx * float(np.abs(values[h]
                                                   - exact[h]).sum()))
        else:
            ratio = int(round(dx / fine_dx))
            if abs(ratio * fine_dx - dx) > 1e-12:
                raise ValueError("fine_dx must divide every dx")
            for h in range(problem.spec.m + problem.spec.n):
                blocks = ref_values[h].reshape(cells, ratio).mean(axis=1)
                err_parts.append(dx * float(np.abs(values[h] - blocks).sum()))
        err = math.fsum(err_parts)
        if prev is None:
            order = math.nan
        else:
            pdx, perr = prev
            order = (math.log(perr / err) / math.log(pdx / dx)
                     if err > 0 and perr > 0 else math.nan)
        rows.append((dx, err, order))
        prev = (dx, err)
    errs = [r[1] for r in rows]
    decreasing = all(errs[i + 1] <= errs[i] + 1e-12
                     for i in range(len(errs) - 1))
    return ConvergenceReport(tuple(rows), decreasing)


# ---------------------------------------------------------------------------
# samplers

def germ_sampler(spec: JunctionSpec, count: int, seed: int,
                 strict_only: bool = False) -> list[np.ndarray]:
    """Seeded equilibrium states: random constant data pushed through the
    similarity solver; the traces it leaves at the junction are equilibria."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    span = spec.span
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 100 * count:
            raise ConsistencyError("sampler starved; spec admits too few "
                                   "strict equilibria")
        u0 = spec.rho_min + span * rng.random(spec.m + spec.n)
        k = riemann_solve(spec, u0, tol=4e-15 * span).traces
        if strict_only and not is_strict_germ_member(spec, k):
            continue
        out.append(k)
    return out


def nonstrict_germ_sampler(count: int, seed: int) \
        -> list[tuple[JunctionSpec, np.ndarray]]:
    """Seeded family of equilibria that are members but never strict.

    Construction on a 2-in/1-out junction of quadratic fluxes: put the first
    incoming road at p on the falling branch (pinning the coupling value),
    the second at the equal-flux point 1-p on the rising branch (an exact
    flux tie at p), and let the outgoing road sit at its crest with the
    capacity to swallow both. The tie shows the chord inequality cannot be
    strict at the only admissible coupling value.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        p = 0.55 + 0.35 * rng.random()
        v3 = 8.0 * p * (1.0 - p)
        spec = JunctionSpec(2, 1, (quadratic_lwr(), quadratic_lwr(),
                                   quadratic_lwr(v=v3)))
        out.append((spec, np.array([p, 1.0 - p, 0.5])))
    return out
