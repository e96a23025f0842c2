"""Low-level numerical kernels with numba acceleration and a pure-numpy fallback.

The solver's hot paths are (a) Godunov flux sweeps over whole roads and
(b) scalar bisections for the junction coupling values. Each kernel exists in
two functionally identical flavours. Scalar kernels are written once and
wrapped with numba's ``@njit`` when it is active, so both flavours execute the
same IEEE-754 operation sequence. Array sweeps have a vectorized numpy twin
assembled from the same per-element expressions, which keeps the two paths
bitwise identical.

The fallback engages when the environment variable ``JUNCTIONFLOW_NO_NUMBA``
is set to anything but ``"0"``, or when numba is not importable.
``NUMBA_ENABLED`` records the active mode.

Flux families are passed around as an integer code plus a packed float
parameter vector:

====================  ====  =======================================
family                code  params
====================  ====  =======================================
LWR quadratic          0    [v, rho_max];  f = v*x*(1 - x/rho_max)
symmetric quadratic    1    [h];           f = h*(1 - x*x) on [-1,1]
polynomial             2    [c0, c1, ...]  ascending coefficients
tabulated              3    [n, x_1..x_n, y_1..y_n]  piecewise linear
====================  ====  =======================================

Packed 2D parameter arrays may be zero-padded on the right; the padding is
harmless for every family (Horner over leading zero coefficients is exact,
and the tabulated reader takes its length from ``params[0]``).
"""

from __future__ import annotations

import os

import numpy as np

FAMILY_LWR = 0
FAMILY_SYM_QUAD = 1
FAMILY_POLY = 2
FAMILY_TABLE = 3

_flag = os.environ.get("JUNCTIONFLOW_NO_NUMBA", "").strip()
if _flag in ("", "0"):
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # numba missing: silently fall back
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _jit(fn):
    return _njit(cache=True)(fn) if NUMBA_ENABLED else fn


# ---------------------------------------------------------------------------
# scalar flux evaluation (single source, conditionally jitted)

def _flux_scalar_impl(code, par, x):
    if code == 0:  # LWR
        return par[0] * x * (1.0 - x / par[1])
    if code == 1:  # symmetric quadratic
        return par[0] * (1.0 - x * x)
    if code == 2:  # polynomial, Horner from the top coefficient down
        acc = par[par.shape[0] - 1]
        for t in range(par.shape[0] - 2, -1, -1):
            acc = acc * x + par[t]
        return acc
    # tabulated: panel search (greatest node <= x, clamped to the last panel)
    n = int(par[0])
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if par[1 + mid] <= x:
            lo = mid
        else:
            hi = mid
    x0 = par[1 + lo]
    y0 = par[1 + n + lo]
    return y0 + (x - x0) * ((par[2 + n + lo] - y0) / (par[2 + lo] - x0))


flux_scalar = _jit(_flux_scalar_impl)


def _demand_scalar_impl(code, par, crit, fcrit, a):
    if a <= crit:
        return flux_scalar(code, par, a)
    return fcrit


demand_scalar = _jit(_demand_scalar_impl)


def _supply_scalar_impl(code, par, crit, fcrit, b):
    if b >= crit:
        return flux_scalar(code, par, b)
    return fcrit


supply_scalar = _jit(_supply_scalar_impl)


def _godunov_scalar_impl(code, par, crit, fcrit, a, b):
    d = demand_scalar(code, par, crit, fcrit, a)
    s = supply_scalar(code, par, crit, fcrit, b)
    return d if d <= s else s


godunov_scalar = _jit(_godunov_scalar_impl)


# ---------------------------------------------------------------------------
# vectorized numpy twins (same per-element expressions as the scalar kernels)

def flux_array(code: int, par: np.ndarray, x: np.ndarray) -> np.ndarray:
    if code == FAMILY_LWR:
        return par[0] * x * (1.0 - x / par[1])
    if code == FAMILY_SYM_QUAD:
        return par[0] * (1.0 - x * x)
    if code == FAMILY_POLY:
        acc = np.full_like(x, par[-1])
        for t in range(par.shape[0] - 2, -1, -1):
            acc = acc * x + par[t]
        return acc
    n = int(par[0])
    xs = par[1:1 + n]
    ys = par[1 + n:1 + 2 * n]
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, n - 2)
    x0 = xs[idx]
    y0 = ys[idx]
    return y0 + (x - x0) * ((ys[idx + 1] - y0) / (xs[idx + 1] - x0))


def demand_array(code, par, crit, fcrit, a):
    return np.where(a <= crit, flux_array(code, par, a), fcrit)


def supply_array(code, par, crit, fcrit, b):
    return np.where(b >= crit, flux_array(code, par, b), fcrit)


def godunov_array(code, par, crit, fcrit, a, b):
    return np.minimum(demand_array(code, par, crit, fcrit, a),
                      supply_array(code, par, crit, fcrit, b))


# ---------------------------------------------------------------------------
# interface flux sweep along one road

if NUMBA_ENABLED:

    @_njit(cache=True)
    def interface_fluxes(code, par, crit, fcrit, u_ext, out):
        """Godunov flux at all interfaces of a road; u_ext includes ghost cells."""
        for k in range(out.shape[0]):
            out[k] = godunov_scalar(code, par, crit, fcrit, u_ext[k], u_ext[k + 1])

else:

    def interface_fluxes(code, par, crit, fcrit, u_ext, out):
        """Godunov flux at all interfaces of a road; u_ext includes ghost cells."""
        d = demand_array(code, par, crit, fcrit, u_ext[:-1])
        s = supply_array(code, par, crit, fcrit, u_ext[1:])
        np.minimum(d, s, out=out)


# ---------------------------------------------------------------------------
# junction balance gap and p-interval solve

def _balance_gap_impl(codes, params, crits, fcrits, m, ustar, p):
    total = 0.0
    for i in range(m):
        total += godunov_scalar(codes[i], params[i], crits[i], fcrits[i],
                                ustar[i], p)
    for j in range(m, ustar.shape[0]):
        total -= godunov_scalar(codes[j], params[j], crits[j], fcrits[j],
                                p, ustar[j])
    return total


balance_gap = _jit(_balance_gap_impl)


def _fill_junction_fluxes_impl(codes, params, crits, fcrits, m, ustar, p, out):
    for i in range(m):
        out[i] = godunov_scalar(codes[i], params[i], crits[i], fcrits[i],
                                ustar[i], p)
    for j in range(m, ustar.shape[0]):
        out[j] = godunov_scalar(codes[j], params[j], crits[j], fcrits[j],
                                p, ustar[j])


fill_junction_fluxes = _jit(_fill_junction_fluxes_impl)


def _p_interval_impl(codes, params, crits, fcrits, m, ustar, lo, hi,
                     xtol, fzero, want_max):
    # The gap D(p) = phi_in(p) - phi_out(p) is continuous and non-increasing,
    # so its root set is a closed interval. Each endpoint is located by
    # predicate bisection (p_min: leftmost p with D <= fzero; p_max: rightmost
    # with D >= -fzero) with a clipped false-position trial folded in on
    # alternate rounds. Returns (nan, nan) when the bracket assumptions fail.
    d_lo = balance_gap(codes, params, crits, fcrits, m, ustar, lo)
    d_hi = balance_gap(codes, params, crits, fcrits, m, ustar, hi)
    if d_lo < -fzero or d_hi > fzero:
        return np.nan, np.nan

    if d_lo <= fzero:
        p_min = lo
    else:
        a = lo
        fa = d_lo
        b = hi
        fb = d_hi
        it = 0
        while b - a > xtol and it < 200:
            t = a + 0.5 * (b - a)
            if (it & 1) == 1 and fb < fa:
                u = a + (fzero - fa) * (b - a) / (fb - fa)
                w = 0.125 * (b - a)
                if a + w <= u and u <= b - w:
                    t = u
            if t <= a or t >= b:
                break
            ft = balance_gap(codes, params, crits, fcrits, m, ustar, t)
            if ft <= fzero:
                b = t
                fb = ft
            else:
                a = t
                fa = ft
            it += 1
        p_min = b

    if not want_max:
        return p_min, p_min

    if d_hi >= -fzero:
        p_max = hi
    else:
        a = lo
        fa = d_lo
        b = hi
        fb = d_hi
        it = 0
        while b - a > xtol and it < 200:
            t = a + 0.5 * (b - a)
            if (it & 1) == 1 and fb < fa:
                u = a + (-fzero - fa) * (b - a) / (fb - fa)
                w = 0.125 * (b - a)
                if a + w <= u and u <= b - w:
                    t = u
            if t <= a or t >= b:
                break
            ft = balance_gap(codes, params, crits, fcrits, m, ustar, t)
            if ft >= -fzero:
                a = t
                fa = ft
            else:
                b = t
                fb = ft
            it += 1
        p_max = a
    return p_min, p_max


p_interval = _jit(_p_interval_impl)


# ---------------------------------------------------------------------------
# viscous junction coupling: single value w balancing convective+diffusive flux

def _visc_gap_impl(codes, params, m, ustar, eps2dx, w):
    total = 0.0
    for i in range(m):
        total += flux_scalar(codes[i], params[i], w) - eps2dx * (w - ustar[i])
    for j in range(m, ustar.shape[0]):
        total -= flux_scalar(codes[j], params[j], w) - eps2dx * (ustar[j] - w)
    return total


visc_gap = _jit(_visc_gap_impl)


def _solve_visc_w_impl(codes, params, m, ustar, eps2dx, lo, hi, xtol, ftol):
    # R(lo) >= 0 >= R(hi) up to float noise in the endpoint flux values;
    # bisection on the sign keeps a guaranteed bracket. Returns nan when the
    # endpoint signs are genuinely wrong (beyond ftol), which cannot happen
    # for in-range states.
    ra = visc_gap(codes, params, m, ustar, eps2dx, lo)
    if ra <= 0.0:
        if ra < -ftol:
            return np.nan
        return lo
    rb = visc_gap(codes, params, m, ustar, eps2dx, hi)
    if rb >= 0.0:
        if rb > ftol:
            return np.nan
        return hi
    a = lo
    b = hi
    it = 0
    while b - a > xtol and it < 200:
        t = a + 0.5 * (b - a)
        if t <= a or t >= b:
            break
        if visc_gap(codes, params, m, ustar, eps2dx, t) >= 0.0:
            a = t
        else:
            b = t
        it += 1
    return a + 0.5 * (b - a)


solve_visc_w = _jit(_solve_visc_w_impl)
