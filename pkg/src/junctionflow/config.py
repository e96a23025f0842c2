"""Line-oriented configuration format for network experiments.

A config is a sequence of sections. Each ``[road]`` header opens one road
(declared incoming roads first, then outgoing); ``[run]`` and ``[viscous]``
each appear at most once. Inside a section every line is ``key = value``
with ``#`` comments. Example::

    [road]
    direction = in
    flux.family = quadratic-lwr
    flux.params = 1 1
    length = 1
    cells = 50
    initial = 0.3

    [road]
    direction = out
    flux.family = quadratic-lwr
    length = 1
    cells = 50
    initial.breakpoints = 0.5
    initial.values = 0.7 0.1

    [run]
    cfl = 0.9
    t_final = 0.25
    snapshots = 0.1 0.25
    outer_bc = absorbing

``initial`` accepts a bare number (constant data), ``constant <number>``,
or the breakpoints/values pair describing a piecewise-constant profile.
``outer_bc`` is ``absorbing`` or ``dirichlet v_1 ... v_k`` with one value
per road. All range and topology rules are enforced at parse time with
line-numbered diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fluxes import (Flux, custom_polynomial, quadratic_lwr,
                     symmetric_quadratic, tabulated)
from .junction import JunctionSpec
from .scheme import NetworkMesh, RunConfig

_ROAD_KEYS = {"direction", "flux.family", "flux.params", "flux.rho_min",
              "flux.rho_max", "flux.rho_crit", "flux.xs", "flux.ys",
              "length", "cells", "initial", "initial.breakpoints",
              "initial.values"}
_RUN_KEYS = {"cfl", "t_final", "snapshots", "outer_bc"}
_VISCOUS_KEYS = {"epsilon", "window"}


@dataclass(eq=False)
class RoadConfig:
    """One road of the network as declared in the config."""

    direction: str
    flux: Flux
    family: str
    length: float
    cells: int
    initial: object  # float constant or (breakpoints, values) pair
    line: int


@dataclass(eq=False)
class ConfigDocument:
    """Validated configuration: roads in declaration order (incoming first),
    run settings with defaults filled, and the optional viscous block."""

    roads: list[RoadConfig]
    cfl: float = 0.9
    t_final: float = 0.0
    snapshots: tuple[float, ...] = ()
    outer_bc: str = "absorbing"
    dirichlet_values: np.ndarray | None = None
    epsilon: float | None = None
    window: float | None = None

    @property
    def m(self) -> int:
        return sum(1 for r in self.roads if r.direction == "in")

    @property
    def n(self) -> int:
        return sum(1 for r in self.roads if r.direction == "out")


def _floats(text: str, line: int, key: str) -> list[float]:
    out = []
    for tok in text.split():
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigError(f"{key}: {tok!r} is not a number",
                              kind="syntax", line=line) from None
    return out


def _one_float(text: str, line: int, key: str) -> float:
    vals = _floats(text, line, key)
    if len(vals) != 1:
        raise ConfigError(f"{key} takes exactly one number",
                          kind="syntax", line=line)
    return vals[0]


def _road_flux(raw: dict[str, tuple[str, int]], line: int) -> tuple[Flux, str]:
    family_text, family_line = raw.get("flux.family",
                                       ("quadratic-lwr", line))
    family = family_text.strip()

    def floats_of(key, default=None):
        if key not in raw:
            return default
        text, ln = raw[key]
        return _floats(text, ln, key)

    def float_of(key):
        if key not in raw:
            return None
        text, ln = raw[key]
        return _one_float(text, ln, key)

    try:
        if family == "quadratic-lwr":
            params = floats_of("flux.params", [])
            if len(params) > 2:
                raise ConfigError("flux.params for quadratic-lwr is "
                                  "'v [rho_max]'", kind="range", line=line)
            v = params[0] if params else 1.0
            rmax = params[1] if len(params) > 1 else 1.0
            return quadratic_lwr(v=v, rho_max=rmax), family
        if family == "symmetric-quadratic":
            params = floats_of("flux.params", [])
            if len(params) > 1:
                raise ConfigError("flux.params for symmetric-quadratic "
                                  "is 'h'", kind="range", line=line)
            return symmetric_quadratic(params[0] if params else 1.0), family
        if family == "custom-polynomial":
            coeffs = floats_of("flux.params")
            lo, hi, crit = (float_of("flux.rho_min"),
                            float_of("flux.rho_max"),
                            float_of("flux.rho_crit"))
            if coeffs is None or lo is None or hi is None or crit is None:
                raise ConfigError(
                    "custom-polynomial needs flux.params, flux.rho_min, "
                    "flux.rho_max and flux.rho_crit", kind="range", line=line)
            return custom_polynomial(coeffs, lo, hi, crit), family
        if family == "tabulated":
            xs = floats_of("flux.xs")
            ys = floats_of("flux.ys")
            if xs is None or ys is None:
                raise ConfigError("tabulated needs flux.xs and flux.ys",
                                  kind="range", line=line)
            return tabulated(xs, ys), family
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), kind="range", line=line) from exc
    raise ConfigError(f"unknown flux family {family!r}",
                      kind="range", line=family_line)


def _road_initial(raw: dict[str, tuple[str, int]], flux: Flux, line: int):
    has_plain = "initial" in raw
    has_table = "initial.breakpoints" in raw or "initial.values" in raw
    if has_plain and has_table:
        raise ConfigError("give either initial or the breakpoints/values "
                          "pair, not both", kind="syntax", line=line)
    if has_plain:
        text, ln = raw["initial"]
        toks = text.split()
        if len(toks) == 2 and toks[0] == "constant":
            value = _one_float(toks[1], ln, "initial")
        else:
            value = _one_float(text, ln, "initial")
        _check_range(flux, [value], ln, "initial")
        return value
    if has_table:
        if "initial.breakpoints" not in raw or "initial.values" not in raw:
            raise ConfigError("initial.breakpoints and initial.values must "
                              "appear together", kind="syntax", line=line)
        bp_text, bp_line = raw["initial.breakpoints"]
        v_text, v_line = raw["initial.values"]
        bp = _floats(bp_text, bp_line, "initial.breakpoints")
        vals = _floats(v_text, v_line, "initial.values")
        if len(vals) != len(bp) + 1:
            raise ConfigError("initial.values needs one more entry than "
                              "initial.breakpoints", kind="range",
                              line=v_line)
        if len(bp) > 1 and np.any(np.diff(bp) <= 0):
            raise ConfigError("initial.breakpoints must be strictly "
                              "increasing", kind="range", line=bp_line)
        _check_range(flux, vals, v_line, "initial.values")
        return (np.asarray(bp), np.asarray(vals))
    raise ConfigError("road is missing initial data", kind="range", line=line)


def _check_range(flux: Flux, values, line: int, key: str) -> None:
    lo, hi = flux.rho_min, flux.rho_max
    for v in values:
        if not lo <= v <= hi:
            raise ConfigError(f"{key}: {v:g} outside the density interval "
                              f"[{lo:g}, {hi:g}]", kind="range", line=line)


def parse_config(text: str) -> ConfigDocument:
    """Parse and validate a config; raises ConfigError with a line number
    and a kind of syntax, unknown-key, range, or topology."""
    sections: list[tuple[str, int, dict[str, tuple[str, int]]]] = []
    current: dict[str, tuple[str, int]] | None = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header",
                                  kind="syntax", line=lineno)
            name = stripped[1:-1].strip()
            if name not in ("road", "run", "viscous"):
                raise ConfigError(f"unknown section [{name}]",
                                  kind="unknown-key", line=lineno)
            current = {}
            sections.append((name, lineno, current))
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'",
                              kind="syntax", line=lineno)
        if current is None:
            raise ConfigError("assignment before any section header",
                              kind="syntax", line=lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        section_name = sections[-1][0]
        allowed = {"road": _ROAD_KEYS, "run": _RUN_KEYS,
                   "viscous": _VISCOUS_KEYS}[section_name]
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section_name}]",
                              kind="unknown-key", line=lineno)
        if key in current:
            raise ConfigError(f"duplicate key {key!r}",
                              kind="syntax", line=lineno)
        current[key] = (value, lineno)

    roads: list[RoadConfig] = []
    doc = ConfigDocument(roads)
    seen = {"run": False, "viscous": False}
    for name, header_line, body in sections:
        if name == "road":
            roads.append(_parse_road(body, header_line))
        elif name == "run":
            if seen["run"]:
                raise ConfigError("duplicate [run] section",
                                  kind="syntax", line=header_line)
            seen["run"] = True
            _parse_run(doc, body, header_line)
        else:
            if seen["viscous"]:
                raise ConfigError("duplicate [viscous] section",
                                  kind="syntax", line=header_line)
            seen["viscous"] = True
            _parse_viscous(doc, body, header_line)

    _validate_topology(doc)
    return doc


def _parse_road(body: dict[str, tuple[str, int]], line: int) -> RoadConfig:
    if "direction" not in body:
        raise ConfigError("road needs a direction", kind="range", line=line)
    direction, dir_line = body["direction"]
    direction = direction.strip()
    if direction not in ("in", "out"):
        raise ConfigError("direction must be 'in' or 'out'",
                          kind="range", line=dir_line)
    flux, family = _road_flux(body, line)
    if "length" not in body or "cells" not in body:
        raise ConfigError("road needs length and cells",
                          kind="range", line=line)
    length = _one_float(*body["length"], key="length")
    cells_f = _one_float(*body["cells"], key="cells")
    cells = int(round(cells_f))
    if length <= 0:
        raise ConfigError("length must be positive", kind="range",
                          line=body["length"][1])
    if cells < 1 or cells != cells_f:
        raise ConfigError("cells must be a positive integer", kind="range",
                          line=body["cells"][1])
    initial = _road_initial(body, flux, line)
    return RoadConfig(direction, flux, family, length, cells, initial, line)


def _parse_run(doc: ConfigDocument, body: dict[str, tuple[str, int]],
               line: int) -> None:
    if "cfl" in body:
        doc.cfl = _one_float(*body["cfl"], key="cfl")
        if not 0 < doc.cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]", kind="range",
                              line=body["cfl"][1])
    if "t_final" in body:
        doc.t_final = _one_float(*body["t_final"], key="t_final")
        if doc.t_final < 0:
            raise ConfigError("t_final must be nonnegative", kind="range",
                              line=body["t_final"][1])
    if "snapshots" in body:
        text, ln = body["snapshots"]
        snaps = _floats(text, ln, "snapshots")
        if any(t < 0 for t in snaps):
            raise ConfigError("snapshots must be nonnegative", kind="range",
                              line=ln)
        doc.snapshots = tuple(snaps)
    if "outer_bc" in body:
        text, ln = body["outer_bc"]
        toks = text.split()
        if toks and toks[0] == "absorbing" and len(toks) == 1:
            doc.outer_bc = "absorbing"
        elif toks and toks[0] == "dirichlet" and len(toks) > 1:
            doc.outer_bc = "dirichlet"
            doc.dirichlet_values = np.array(
                _floats(" ".join(toks[1:]), ln, "outer_bc"))
        else:
            raise ConfigError("outer_bc is 'absorbing' or "
                              "'dirichlet v_1 ... v_k'", kind="range",
                              line=ln)


def _parse_viscous(doc: ConfigDocument, body: dict[str, tuple[str, int]],
                   line: int) -> None:
    if "epsilon" in body:
        doc.epsilon = _one_float(*body["epsilon"], key="epsilon")
        if doc.epsilon <= 0:
            raise ConfigError("epsilon must be positive", kind="range",
                              line=body["epsilon"][1])
    if "window" in body:
        doc.window = _one_float(*body["window"], key="window")
        if doc.window <= 0:
            raise ConfigError("window must be positive", kind="range",
                              line=body["window"][1])


def _validate_topology(doc: ConfigDocument) -> None:
    roads = doc.roads
    if len(roads) < 2:
        raise ConfigError("need at least two roads", kind="topology")
    m, n = doc.m, doc.n
    if m < 1 or n < 1:
        raise ConfigError("need at least one incoming and one outgoing road",
                          kind="topology")
    directions = [r.direction for r in roads]
    if directions != ["in"] * m + ["out"] * n:
        raise ConfigError("declare all incoming roads before outgoing ones",
                          kind="topology", line=roads[0].line)
    lo = roads[0].flux.rho_min
    hi = roads[0].flux.rho_max
    for r in roads[1:]:
        if r.flux.rho_min != lo or r.flux.rho_max != hi:
            raise ConfigError("all fluxes must share one density interval",
                              kind="topology", line=r.line)
    dx0 = roads[0].length / roads[0].cells
    for r in roads[1:]:
        dx = r.length / r.cells
        if abs(dx - dx0) > 1e-9 * dx0:
            raise ConfigError(
                f"cell width {dx:g} differs from the first road's {dx0:g}",
                kind="topology", line=r.line)
    if doc.dirichlet_values is not None:
        if doc.dirichlet_values.shape != (len(roads),):
            raise ConfigError("dirichlet needs one value per road",
                              kind="topology")
        for v in doc.dirichlet_values:
            if not lo <= v <= hi:
                raise ConfigError(f"dirichlet value {v:g} outside "
                                  f"[{lo:g}, {hi:g}]", kind="range")


def build_network(doc: ConfigDocument):
    """Materialize (spec, mesh, initial data, run config) from a document."""
    spec = JunctionSpec(doc.m, doc.n, tuple(r.flux for r in doc.roads))
    dx = doc.roads[0].length / doc.roads[0].cells
    mesh = NetworkMesh(spec, dx, np.array([r.cells for r in doc.roads]))
    initial = [r.initial for r in doc.roads]
    run_config = RunConfig(mesh, doc.cfl, doc.t_final, doc.outer_bc,
                           doc.dirichlet_values, doc.snapshots)
    return spec, mesh, initial, run_config
