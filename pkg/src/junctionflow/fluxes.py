"""Bell-shaped scalar flux functions and the two-point Godunov machinery.

A flux is admissible when it vanishes at both endpoints of its density
interval, has a single interior maximizer, and is strictly monotone on each
side of it. Constructors validate the shape (exactly for the quadratic
families, by dense sampling for polynomial data, at node level for tabulated
data) and precompute the critical density, the crest value, and a Lipschitz
bound on f'.

Piecewise-linear (tabulated) fluxes have f' constant on panels; they are
accepted but flagged via ``satisfies_nld=False`` since some trace-level theory
assumes a nowhere-linear flux. The discrete algorithms only need the bell
shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

_SHAPE_SAMPLES = 4097
_FAMILIES = ("quadratic-lwr", "symmetric-quadratic", "custom-polynomial",
             "tabulated")


@dataclass(frozen=True, eq=False)
class Flux:
    """One road's flux on the density interval [rho_min, rho_max].

    Attributes
    ----------
    family:
        One of ``quadratic-lwr``, ``symmetric-quadratic``,
        ``custom-polynomial``, ``tabulated``.
    params:
        Packed parameter vector in the kernel layout (see ``kernels``).
    rho_min, rho_max:
        Endpoints of the admissible density interval; f vanishes at both.
    rho_crit:
        The unique interior maximizer of f.
    lipschitz:
        Upper bound on |f'| over the interval.
    flux_max:
        f(rho_crit), the crest value.
    satisfies_nld:
        False when f' is constant on some subinterval (tabulated fluxes).
    code:
        Integer family code used by the kernels.
    """

    family: str
    params: np.ndarray
    rho_min: float
    rho_max: float
    rho_crit: float
    lipschitz: float
    flux_max: float
    satisfies_nld: bool
    code: int

    # -- helpers ------------------------------------------------------------

    @property
    def span(self) -> float:
        return self.rho_max - self.rho_min

    def _check_range(self, *values) -> None:
        slack = 1e-12 * self.span
        for v in values:
            arr = np.asarray(v, dtype=float)
            if arr.size and (arr.min() < self.rho_min - slack
                             or arr.max() > self.rho_max + slack):
                raise ValueError(
                    f"density outside [{self.rho_min}, {self.rho_max}]")

    def _raw(self, rho: np.ndarray) -> np.ndarray:
        return kernels.flux_array(self.code, self.params, rho)

    # -- evaluation ---------------------------------------------------------

    def eval(self, rho):
        """f(rho); scalar in, scalar out; arrays are mapped elementwise."""
        self._check_range(rho)
        if np.ndim(rho) == 0:
            return kernels.flux_scalar(self.code, self.params, float(rho))
        return self._raw(np.asarray(rho, dtype=float))

    def __call__(self, rho):
        return self.eval(rho)

    def derivative(self, rho):
        """f'(rho); for tabulated fluxes, the slope of the containing panel."""
        self._check_range(rho)
        scalar = np.ndim(rho) == 0
        x = np.asarray(rho, dtype=float)
        if self.code == kernels.FAMILY_LWR:
            v, rmax = self.params
            out = v * (1.0 - 2.0 * x / rmax)
        elif self.code == kernels.FAMILY_SYM_QUAD:
            out = -2.0 * self.params[0] * x
        elif self.code == kernels.FAMILY_POLY:
            c = self.params
            d = c[1:] * np.arange(1, c.shape[0])
            out = np.full_like(x, d[-1]) if d.size else np.zeros_like(x)
            for t in range(d.shape[0] - 2, -1, -1):
                out = out * x + d[t]
        else:
            n = int(self.params[0])
            xs = self.params[1:1 + n]
            ys = self.params[1 + n:1 + 2 * n]
            idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, n - 2)
            out = (ys[idx + 1] - ys[idx]) / (xs[idx + 1] - xs[idx])
        return float(out) if scalar else out

    # -- Godunov machinery ----------------------------------------------------

    def demand(self, a):
        """Maximal flux the upstream state a can send: f(a) left of the crest,
        the crest value beyond it."""
        self._check_range(a)
        if np.ndim(a) == 0:
            return kernels.demand_scalar(self.code, self.params, self.rho_crit,
                                         self.flux_max, float(a))
        return kernels.demand_array(self.code, self.params, self.rho_crit,
                                    self.flux_max, np.asarray(a, dtype=float))

    def supply(self, b):
        """Maximal flux the downstream state b can absorb."""
        self._check_range(b)
        if np.ndim(b) == 0:
            return kernels.supply_scalar(self.code, self.params, self.rho_crit,
                                         self.flux_max, float(b))
        return kernels.supply_array(self.code, self.params, self.rho_crit,
                                    self.flux_max, np.asarray(b, dtype=float))

    def godunov(self, a, b):
        """Two-point Godunov flux: min of f on [a,b] when a <= b, max of f on
        [b,a] when a >= b; equals min(demand(a), supply(b)) for bell-shaped f."""
        self._check_range(a, b)
        if np.ndim(a) == 0 and np.ndim(b) == 0:
            return kernels.godunov_scalar(self.code, self.params,
                                          self.rho_crit, self.flux_max,
                                          float(a), float(b))
        a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=float),
                                           np.asarray(b, dtype=float))
        return kernels.godunov_array(self.code, self.params, self.rho_crit,
                                     self.flux_max, a_arr, b_arr)

    def entropy_flux(self, u, k):
        """Kruzhkov entropy flux sign(u-k)*(f(u)-f(k)), with sign(0)=0."""
        self._check_range(u, k)
        scalar = np.ndim(u) == 0 and np.ndim(k) == 0
        u_arr, k_arr = np.broadcast_arrays(np.asarray(u, dtype=float),
                                           np.asarray(k, dtype=float))
        out = np.sign(u_arr - k_arr) * (self._raw(u_arr) - self._raw(k_arr))
        return float(out) if scalar else out


# ---------------------------------------------------------------------------
# constructors

def quadratic_lwr(v: float = 1.0, rho_max: float = 1.0) -> Flux:
    """f(rho) = v * rho * (1 - rho/rho_max) on [0, rho_max]."""
    if v <= 0 or rho_max <= 0:
        raise ValueError("quadratic-lwr needs v > 0 and rho_max > 0")
    params = np.array([v, rho_max], dtype=float)
    crit = 0.5 * rho_max
    crest = kernels.flux_scalar(kernels.FAMILY_LWR, params, crit)
    return Flux("quadratic-lwr", params, 0.0, float(rho_max), crit,
                float(v), crest, True, kernels.FAMILY_LWR)


def symmetric_quadratic(h: float = 1.0) -> Flux:
    """f(rho) = h * (1 - rho^2) on [-1, 1]; crest h at rho = 0."""
    if h <= 0:
        raise ValueError("symmetric-quadratic needs h > 0")
    params = np.array([h], dtype=float)
    return Flux("symmetric-quadratic", params, -1.0, 1.0, 0.0,
                2.0 * float(h), float(h), True, kernels.FAMILY_SYM_QUAD)


def custom_polynomial(coeffs, rho_min: float, rho_max: float,
                      rho_crit: float) -> Flux:
    """Polynomial flux with ascending coefficients and a user-supplied crest.

    The bell shape (zero endpoints, strict unimodality around rho_crit) is
    verified by dense sampling; violations raise ValueError.
    """
    params = np.asarray(coeffs, dtype=float)
    if params.ndim != 1 or params.size < 3:
        raise ValueError("polynomial flux needs at least 3 coefficients")
    if not rho_min < rho_crit < rho_max:
        raise ValueError("rho_crit must lie strictly inside (rho_min, rho_max)")
    crest = kernels.flux_scalar(kernels.FAMILY_POLY, params, float(rho_crit))
    _sampled_shape_check(
        lambda x: kernels.flux_array(kernels.FAMILY_POLY, params, x),
        float(rho_min), float(rho_max), float(rho_crit), crest)

    # exact Lipschitz bound: |f'| attains its max at an endpoint or where f''=0
    deriv = params[1:] * np.arange(1, params.size)
    cand = [rho_min, rho_max]
    if deriv.size >= 2:
        dd_roots = np.polynomial.polynomial.polyroots(
            deriv[1:] * np.arange(1, deriv.size))
        cand.extend(r.real for r in dd_roots
                    if abs(r.imag) < 1e-12 and rho_min < r.real < rho_max)
    lip = max(abs(float(np.polynomial.polynomial.polyval(x, deriv)))
              for x in cand)
    return Flux("custom-polynomial", params, float(rho_min), float(rho_max),
                float(rho_crit), lip, crest, True, kernels.FAMILY_POLY)


def tabulated(xs, ys) -> Flux:
    """Piecewise-linear flux through the nodes (xs, ys).

    Nodes must be strictly increasing in x, vanish at both ends, and rise
    strictly to a unique interior maximum then fall strictly. Sets
    ``satisfies_nld=False`` (f' is piecewise constant).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 3:
        raise ValueError("tabulated flux needs >= 3 matching nodes")
    if not np.all(np.diff(xs) > 0):
        raise ValueError("tabulated nodes must be strictly increasing in x")
    imax = int(np.argmax(ys))
    crest = float(ys[imax])
    if crest <= 0:
        raise ValueError("tabulated flux must be positive at its crest")
    if abs(ys[0]) > 1e-12 * crest or abs(ys[-1]) > 1e-12 * crest:
        raise ValueError("tabulated flux must vanish at both endpoints")
    if imax == 0 or imax == xs.size - 1:
        raise ValueError("tabulated crest must be interior")
    if not (np.all(np.diff(ys[:imax + 1]) > 0)
            and np.all(np.diff(ys[imax:]) < 0)):
        raise ValueError("tabulated flux must be strictly unimodal "
                         "(no plateaus)")
    params = np.concatenate(([float(xs.size)], xs, ys))
    lip = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
    return Flux("tabulated", params, float(xs[0]), float(xs[-1]),
                float(xs[imax]), lip, crest, False, kernels.FAMILY_TABLE)


def _sampled_shape_check(evaluate, lo: float, hi: float, crit: float,
                         crest: float) -> None:
    """Reject fluxes that are not bell-shaped, including crest plateaus."""
    grid = np.linspace(lo, hi, _SHAPE_SAMPLES)
    vals = evaluate(grid)
    scale = max(abs(crest), 1e-300)
    if abs(vals[0]) > 1e-12 * scale or abs(vals[-1]) > 1e-12 * scale:
        raise ValueError("flux must vanish at both interval endpoints")
    if crest <= 0:
        raise ValueError("flux crest value must be positive")
    imax = int(np.argmax(vals))
    step = (hi - lo) / (_SHAPE_SAMPLES - 1)
    if abs(grid[imax] - crit) > 1.5 * step:
        raise ValueError("sampled maximizer disagrees with rho_crit")
    d = np.diff(vals)
    left, right = d[:imax], d[imax:]
    # strict monotonicity away from the crest; the two samples straddling the
    # crest may tie at float resolution
    if not (np.all(left >= 0) and np.all(right <= 0)
            and np.all(left[:-2] > 0) and np.all(right[2:] < 0)):
        raise ValueError("flux must rise strictly then fall strictly "
                         "(plateaus are rejected)")
    interior = vals[1:-1]
    if interior.size and interior.min() < -1e-12 * scale:
        raise ValueError("flux must be nonnegative on its interval")


# ---------------------------------------------------------------------------
# inverse lookups on the two monotone branches

def branch_point(flux: Flux, y: float, branch: str) -> float:
    """Density where f equals y on the requested branch.

    branch is "rising" (left of the crest) or "falling" (right of it).
    Located by bisection to float resolution.
    """
    if not -1e-12 * max(flux.flux_max, 1.0) <= y <= flux.flux_max * (1 + 1e-12):
        raise ValueError("flux value outside [0, flux_max]")
    y = min(max(y, 0.0), flux.flux_max)
    if y == flux.flux_max:
        # the crest itself; bisection would only find the edge of the float
        # plateau sqrt(ulp) away
        return flux.rho_crit
    if branch == "rising":
        a, b = flux.rho_min, flux.rho_crit
        below = lambda s: flux.eval(s) <= y
    elif branch == "falling":
        a, b = flux.rho_crit, flux.rho_max
        below = lambda s: flux.eval(s) >= y
    else:
        raise ValueError("branch must be 'rising' or 'falling'")
    # invariant: predicate true at a, false at b (weakly); bisect to ~ulp
    tol = 4.0 * np.finfo(float).eps * max(abs(flux.rho_min), abs(flux.rho_max),
                                          flux.span)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if below(mid):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def conjugate(flux: Flux, rho: float) -> float:
    """The density on the opposite branch with the same flux value."""
    flux._check_range(rho)
    y = flux.eval(float(rho))
    if rho <= flux.rho_crit:
        return branch_point(flux, y, "falling")
    return branch_point(flux, y, "rising")
