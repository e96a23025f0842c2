"""Coupling algebra for a star-shaped junction of m incoming and n outgoing roads.

All roads share one density interval [A, B]. A junction state ("candidate") is
a plain 1-D float vector of length m+n: entries 0..m-1 are the incoming roads'
densities, entries m..m+n-1 the outgoing ones.

The central object is the coupling value p: the junction behaves like a
virtual middle state, sending min(demand_i(u_i), supply_i(p)) out of each
incoming road and min(demand_j(p), supply_j(u_j)) into each outgoing road.
The total incoming and outgoing fluxes agree exactly on a closed interval of
p values; ``solve_junction`` brackets that interval and reports the fluxes,
which do not depend on the choice of p inside it.

On top of the solver sit the equilibrium tests (``is_germ_member`` for
stationary junction states, ``is_strict_germ_member`` for those with strictly
one-sided flux geometry on every road), the entropy-dissipation pairing
``dissipativity``, and the exact self-similar Riemann solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConsistencyError
from .fluxes import Flux, conjugate

_HULL_GRID = 4097
_OLEINIK_SAMPLES = 512


@dataclass(eq=False)
class JunctionSpec:
    """Topology and per-road fluxes of one junction.

    ``fluxes`` lists the m incoming roads first, then the n outgoing ones.
    Packed parameter arrays for the numerical kernels are built once here and
    shared by every solver call.
    """

    m: int
    n: int
    fluxes: list[Flux]

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("need at least one incoming and one outgoing road")
        if len(self.fluxes) != self.m + self.n:
            raise ValueError(f"expected {self.m + self.n} fluxes, "
                             f"got {len(self.fluxes)}")
        lo = self.fluxes[0].rho_min
        hi = self.fluxes[0].rho_max
        for f in self.fluxes:
            if f.rho_min != lo or f.rho_max != hi:
                raise ValueError("all roads must share one density interval")
        self.rho_min = lo
        self.rho_max = hi
        width = max(len(f.params) for f in self.fluxes)
        self._codes = np.array([f.code for f in self.fluxes], dtype=np.int64)
        self._params = np.zeros((self.m + self.n, width))
        for h, f in enumerate(self.fluxes):
            self._params[h, :len(f.params)] = f.params
        self._crits = np.array([f.rho_crit for f in self.fluxes])
        self._fcrits = np.array([f.flux_max for f in self.fluxes])
        self.lipschitz_sum = float(sum(f.lipschitz for f in self.fluxes))
        self.lipschitz_max = float(max(f.lipschitz for f in self.fluxes))

    @property
    def span(self) -> float:
        return self.rho_max - self.rho_min

    @property
    def incoming(self) -> list[Flux]:
        return self.fluxes[:self.m]

    @property
    def outgoing(self) -> list[Flux]:
        return self.fluxes[self.m:]

    def candidate(self, u) -> np.ndarray:
        """Validate and normalize a junction state vector."""
        arr = np.ascontiguousarray(u, dtype=float)
        if arr.shape != (self.m + self.n,):
            raise ValueError(f"junction state must have shape "
                             f"({self.m + self.n},), got {arr.shape}")
        slack = 1e-12 * self.span
        if arr.min() < self.rho_min - slack or arr.max() > self.rho_max + slack:
            raise ValueError(f"junction state outside "
                             f"[{self.rho_min}, {self.rho_max}]")
        return arr

    def road_flux_values(self, u: np.ndarray) -> np.ndarray:
        """f_h(u_h) for every road."""
        return np.array([f.eval(u[h]) for h, f in enumerate(self.fluxes)])


@dataclass(frozen=True, eq=False)
class JunctionSolution:
    """Coupling interval [p_min, p_max], per-road fluxes, and their total."""

    p_min: float
    p_max: float
    fluxes: np.ndarray
    total: float


def phi_in(spec: JunctionSpec, u, p):
    """Total flux the incoming roads send when the junction sits at p."""
    u = spec.candidate(u)
    return sum(f.godunov(u[i], p) for i, f in enumerate(spec.incoming))


def phi_out(spec: JunctionSpec, u, p):
    """Total flux the outgoing roads absorb when the junction sits at p."""
    u = spec.candidate(u)
    return sum(f.godunov(p, u[spec.m + j]) for j, f in enumerate(spec.outgoing))


def solve_junction(spec: JunctionSpec, u, tol: float | None = None,
                   ftol: float | None = None) -> JunctionSolution:
    """Locate the coupling interval and evaluate the junction fluxes.

    ``tol`` bounds the error in the p-argument (default 1e-13 times the
    density span), ``ftol`` is the flux-residual acceptance level for the
    balance gap (default a few machine epsilons times the summed flux
    crests). The internal bisection is tightened beyond ``tol`` whenever
    needed so the returned fluxes balance to 1e-12 regardless.
    """
    u = spec.candidate(u)
    span = spec.span
    sl = spec.lipschitz_sum
    eps = np.finfo(float).eps
    # natural magnitude of the balance gap's terms: the summed flux crests
    fsc = float(np.abs(spec._fcrits).sum())
    if tol is None:
        tol = 1e-13 * span
    if tol <= 0:
        raise ValueError("tol must be positive")
    if ftol is None:
        # evaluating the gap rounds each crest-sized term at most twice, so
        # the true root set carries a deterministic offset below 2*eps*fsc;
        # accepting at 8*eps*fsc keeps genuine roots while inflating a
        # tangentially-degenerate interval end by only ~sqrt(4*eps*fsc)
        ftol = 8 * eps * fsc

    # bisection resolution: never coarser than requested, and always fine
    # enough that the residual slope sl * xtol stays below the balance budget
    floor = 4 * eps * max(abs(spec.rho_min), abs(spec.rho_max), span)
    xtol = max(min(tol, 0.4e-12 / max(sl, 1e-300)), floor)
    # acceptance level for the balance gap: capped so the 1e-12 balance
    # invariant holds, floored so rounding noise cannot defeat the bracket
    fzero = max(min(ftol, 0.4e-12), 4 * eps * fsc)

    p_min, p_max = kernels.p_interval(
        spec._codes, spec._params, spec._crits, spec._fcrits, spec.m, u,
        spec.rho_min, spec.rho_max, xtol, fzero, True)
    if math.isnan(p_min) or math.isnan(p_max):
        d_lo = kernels.balance_gap(spec._codes, spec._params, spec._crits,
                                   spec._fcrits, spec.m, u, spec.rho_min)
        d_hi = kernels.balance_gap(spec._codes, spec._params, spec._crits,
                                   spec._fcrits, spec.m, u, spec.rho_max)
        raise ConsistencyError(
            f"coupling bracket failed: gap(A)={d_lo:.3e}, gap(B)={d_hi:.3e}")
    if p_min > p_max:
        # the two independent bisections straddle a point root
        p_min = p_max = 0.5 * (p_min + p_max)

    # Evaluate the fluxes at the interval midpoint. For a stationary state
    # the midpoint sits strictly inside the identity interval, where every
    # demand/supply branch resolves away from its crossover and the fluxes
    # come out exact -- evaluating at an endpoint would leak the bisection
    # fuzz into the fluxes and make held equilibria drift. The gap is
    # monotone in p, so the midpoint's balance is bounded by the endpoints'.
    p_eval = p_min + 0.5 * (p_max - p_min)
    fluxes = np.empty(spec.m + spec.n)
    kernels.fill_junction_fluxes(spec._codes, spec._params, spec._crits,
                                 spec._fcrits, spec.m, u, p_eval, fluxes)
    total_in = math.fsum(fluxes[:spec.m].tolist())
    total_out = math.fsum(fluxes[spec.m:].tolist())
    if abs(total_in - total_out) > 1e-12 * max(1.0, abs(total_in)):
        raise ConsistencyError(
            f"junction fluxes do not balance: in={total_in!r} out={total_out!r}")
    return JunctionSolution(float(p_min), float(p_max), fluxes,
                            float(total_in))


def total_flux(spec: JunctionSpec, u, tol: float | None = None) -> float:
    """Total flux through the junction for the state u."""
    return solve_junction(spec, u, tol).total


# ---------------------------------------------------------------------------
# equilibrium (germ) membership

def is_germ_member(spec: JunctionSpec, k, tol: float = 1e-9,
                   method: str = "godunov") -> bool:
    """Is k a stationary junction state?

    ``method="godunov"`` checks that every junction flux matches the road's
    own flux value. ``method="oleinik"`` checks the one-sided chord
    inequalities at the left end of the coupling interval by dense sampling.
    ``method="both"`` runs both and raises ConsistencyError on disagreement.
    """
    if method not in ("godunov", "oleinik", "both"):
        raise ValueError(f"unknown method {method!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = spec.candidate(k)
    got_g = got_o = None
    if method in ("godunov", "both"):
        got_g = _member_by_fluxes(spec, k, tol)
    if method in ("oleinik", "both"):
        got_o = _member_by_chords(spec, k, tol)
    if method == "godunov":
        return got_g
    if method == "oleinik":
        return got_o
    if got_g != got_o:
        raise ConsistencyError(
            f"membership paths disagree on {k.tolist()}: "
            f"flux-identity={got_g}, chord-sampling={got_o}")
    return got_g


def _member_by_fluxes(spec: JunctionSpec, k: np.ndarray, tol: float) -> bool:
    sol = solve_junction(spec, k)
    gap = np.abs(sol.fluxes - spec.road_flux_values(k))
    return bool(gap.max() <= tol)


def _member_by_chords(spec: JunctionSpec, k: np.ndarray, tol: float) -> bool:
    fk = spec.road_flux_values(k)
    balance = math.fsum(fk[:spec.m].tolist()) - math.fsum(fk[spec.m:].tolist())
    if abs(balance) > tol:
        return False
    p = solve_junction(spec, k).p_min
    for h, flux in enumerate(spec.fluxes):
        kh = float(k[h])
        if p == kh:
            continue
        s = np.linspace(min(kh, p), max(kh, p), _OLEINIK_SAMPLES + 1)
        dv = flux.eval(s) - fk[h]
        orient = np.sign(p - kh) if h < spec.m else np.sign(kh - p)
        if (orient * dv).min() < -tol:
            return False
    return True


def strict_witness(spec: JunctionSpec, k, tol: float = 1e-9) -> float | None:
    """A coupling value certifying strict equilibrium, or None.

    A witness p makes every road's chord inequality strict (margin > tol on a
    dense sample of the interval between k_h and p, excluding k_h itself).
    The search space is the coupling interval cut down by each road's
    analytic admissible window; the exact k_h values are always tried as
    candidates because a point-sized coupling interval is found by bisection
    only to within its argument tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = spec.candidate(k)
    sol = solve_junction(spec, k)
    if np.abs(sol.fluxes - spec.road_flux_values(k)).max() > tol:
        return None

    lo, hi = spec.rho_min, spec.rho_max
    for i, flux in enumerate(spec.incoming):
        ki = float(k[i])
        hi = min(hi, conjugate(flux, ki) if ki < flux.rho_crit else ki)
    for j, flux in enumerate(spec.outgoing):
        kj = float(k[spec.m + j])
        lo = max(lo, conjugate(flux, kj) if kj > flux.rho_crit else kj)
    plo = max(lo, sol.p_min)
    phi = min(hi, sol.p_max)

    candidates: list[float] = []
    if phi >= plo:
        candidates.append(0.5 * (plo + phi))
    candidates.extend(float(kh) for kh in k)
    candidates.extend((plo, phi, sol.p_min, sol.p_max))
    seen = set()
    for p in candidates:
        if p in seen or not spec.rho_min <= p <= spec.rho_max:
            continue
        seen.add(p)
        if _strict_margins_hold(spec, k, p, tol):
            return p
    return None


def is_strict_germ_member(spec: JunctionSpec, k, tol: float = 1e-9) -> bool:
    """True when some coupling value makes every chord inequality strict."""
    return strict_witness(spec, k, tol) is not None


def _strict_margins_hold(spec: JunctionSpec, k: np.ndarray, p: float,
                         tol: float) -> bool:
    # Strict margins on every road imply the flux identities, so a passing p
    # is a genuine witness even if it came from a sloppy candidate list.
    t = np.arange(1, _OLEINIK_SAMPLES + 1) / _OLEINIK_SAMPLES
    for h, flux in enumerate(spec.fluxes):
        kh = float(k[h])
        if p == kh:
            continue  # the punctured interval is empty
        s = kh + (p - kh) * t
        dv = flux.eval(s) - flux.eval(kh)
        orient = np.sign(p - kh) if h < spec.m else np.sign(kh - p)
        if (orient * dv).min() <= tol:
            return False
    return True


def dissipativity(spec: JunctionSpec, k1, k2) -> float:
    """Net entropy dissipation pairing of two junction states.

    Incoming roads contribute their entropy flux, outgoing roads subtract
    theirs; the result is nonnegative whenever both states are stationary.
    """
    k1 = spec.candidate(k1)
    k2 = spec.candidate(k2)
    terms = [f.entropy_flux(float(k1[h]), float(k2[h]))
             for h, f in enumerate(spec.fluxes)]
    return math.fsum(terms[:spec.m]) - math.fsum(terms[spec.m:])


# ---------------------------------------------------------------------------
# exact self-similar Riemann solver

@dataclass(frozen=True, eq=False)
class _Fan:
    """One road's wave fan: constant states separated by sorted wave speeds.

    ``rarefactions`` lists speed ranges where the state instead follows the
    inverse of f' (closed-form for the quadratic families). ``incoming`` fans
    live on x < 0 and break speed ties toward the junction-adjacent state.
    """

    states: np.ndarray
    speeds: np.ndarray
    rarefactions: tuple[tuple[float, float], ...]
    incoming: bool
    code: int
    params: np.ndarray


@dataclass(frozen=True, eq=False)
class RiemannSolution:
    """Junction Riemann solution: coupling data, road traces, wave fans."""

    solution: JunctionSolution
    traces: np.ndarray
    fans: tuple[_Fan, ...]

    def sample(self, road: int, xi):
        """Density on the given road along the ray x/t = xi."""
        fan = self.fans[road]
        scalar = np.ndim(xi) == 0
        x = np.atleast_1d(np.asarray(xi, dtype=float))
        side = "right" if fan.incoming else "left"
        out = fan.states[np.searchsorted(fan.speeds, x, side=side)]
        for lo, hi in fan.rarefactions:
            mask = (x >= lo) & (x <= hi)
            if mask.any():
                out[mask] = _rarefaction_value(fan.code, fan.params, x[mask])
        return float(out[0]) if scalar else out

    @property
    def sampler(self):
        return self.sample


def riemann_solve(spec: JunctionSpec, u0,
                  tol: float | None = None) -> RiemannSolution:
    """Solve the junction Riemann problem with constant initial road states.

    The junction traces are the argmin/argmax of each road's flux between the
    initial state and the coupling value, which makes every incoming wave
    nonpositive in speed and every outgoing wave nonnegative; each road then
    carries the classical self-similar fan between its initial state and its
    trace.
    """
    u0 = spec.candidate(u0)
    sol = solve_junction(spec, u0, tol)
    p = sol.p_min
    traces = np.empty(spec.m + spec.n)
    fans = []
    for h, flux in enumerate(spec.fluxes):
        uh = float(u0[h])
        incoming = h < spec.m
        g = _trace(flux, uh, p, incoming)
        traces[h] = g
        # incoming roads: far-field state on the left, trace at the junction;
        # outgoing roads: trace on the left, far-field state on the right
        left, right = (uh, g) if incoming else (g, uh)
        fans.append(_classical_fan(flux, left, right, incoming))
    return RiemannSolution(sol, traces, tuple(fans))


def _trace(flux: Flux, u0: float, p: float, incoming: bool) -> float:
    """Junction-side boundary value of one road's self-similar solution."""
    crit = flux.rho_crit
    if u0 == p:
        return u0
    if incoming:
        if u0 < p:
            # argmin of f on [u0, p]; ties keep the road's own state
            return u0 if flux.eval(u0) <= flux.eval(p) else p
        if p <= crit <= u0:
            return crit
        return u0 if u0 <= crit else p
    if u0 > p:
        # argmin of f on [p, u0]; ties keep the road's own state
        return u0 if flux.eval(u0) <= flux.eval(p) else p
    if u0 <= crit <= p:
        return crit
    return p if p <= crit else u0


def _rarefaction_value(code: int, params: np.ndarray, xi):
    # inverse of f' for the two closed-form (concave quadratic) families
    if code == kernels.FAMILY_LWR:
        return 0.5 * params[1] * (1.0 - xi / params[0])
    return -xi / (2.0 * params[0])


def _classical_fan(flux: Flux, left: float, right: float,
                   incoming: bool) -> _Fan:
    rars: tuple[tuple[float, float], ...] = ()
    if left == right:
        states = np.array([left])
        speeds = np.empty(0)
    elif flux.code in (kernels.FAMILY_LWR, kernels.FAMILY_SYM_QUAD):
        if left < right:
            # concave flux, rising data: one admissible shock at chord speed
            sigma = (flux.eval(right) - flux.eval(left)) / (right - left)
            states = np.array([left, right])
            speeds = np.array([sigma])
        else:
            lo = flux.derivative(left)
            hi = flux.derivative(right)
            mid = _rarefaction_value(flux.code, flux.params, 0.5 * (lo + hi))
            states = np.array([left, mid, right])
            speeds = np.array([lo, hi])
            rars = ((min(lo, 0.0) if incoming else max(lo, 0.0),
                     min(hi, 0.0) if incoming else max(hi, 0.0)),)
    else:
        states, speeds = _hull_fan(flux, left, right)
    # every wave provably sits on the road's own half-line; trim rounding noise
    speeds = np.minimum(speeds, 0.0) if incoming else np.maximum(speeds, 0.0)
    return _Fan(states, speeds, rars, incoming, flux.code, flux.params)


def _hull_fan(flux: Flux, left: float,
              right: float) -> tuple[np.ndarray, np.ndarray]:
    """Wave fan from the convex/concave envelope of f between the states.

    The envelope is taken on a dense grid; graph-hugging stretches come out
    as chains of short chords, which approximates rarefactions to grid
    resolution. Adequate for general bell-shaped fluxes where no closed-form
    inverse of f' exists.
    """
    lo, hi = (left, right) if left < right else (right, left)
    grid = np.linspace(lo, hi, _HULL_GRID)
    grid[0], grid[-1] = lo, hi
    vals = np.asarray(flux.eval(grid))
    idx = _hull_indices(grid, vals, lower=left < right)
    states, ys = grid[idx], vals[idx]
    if left > right:
        states, ys = states[::-1], ys[::-1]
    speeds = np.diff(ys) / np.diff(states)
    return np.ascontiguousarray(states), speeds


def _hull_indices(xs: np.ndarray, ys: np.ndarray, lower: bool) -> np.ndarray:
    # monotone chain; lower hull keeps chord slopes strictly increasing,
    # upper hull strictly decreasing
    idx = [0]
    for i in range(1, xs.shape[0]):
        while len(idx) >= 2:
            a, b = idx[-2], idx[-1]
            lhs = (ys[b] - ys[a]) * (xs[i] - xs[b])
            rhs = (ys[i] - ys[b]) * (xs[b] - xs[a])
            if (lhs >= rhs) if lower else (lhs <= rhs):
                idx.pop()
            else:
                break
        idx.append(i)
    return np.array(idx)
