#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Run with no arguments. The script re-executes itself twice — once with
``JUNCTIONFLOW_NO_NUMBA=1`` and once without — because the backend is chosen
at import time. Each worker times three hot paths and the parent prints a
side-by-side table with speedups:

* interface sweep: Godunov fluxes across all interfaces of one long road
* junction solve: bracketing the coupling-value interval and evaluating
  the junction fluxes for a 2-in/1-out network
* network step: full time steps of a five-road network

Timings are the best of several repeats; the first call of every path runs
untimed so jit compilation is not measured.
"""

import json
import os
import subprocess
import sys
import time

REPEATS = 5


def _best(fn, reps: int) -> float:
    """Best-of-REPEATS wall time for ``reps`` calls of fn, in seconds."""
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best / reps


def worker() -> None:
    import numpy as np

    from junctionflow import (JunctionSpec, NetworkMesh, RunConfig,
                              cfl_timestep, quadratic_lwr, run,
                              solve_junction, symmetric_quadratic)
    from junctionflow import kernels

    results = {"backend": "numba" if kernels.NUMBA_ENABLED else "numpy"}
    rng = np.random.default_rng(7)

    # --- interface sweep over one road of 100k cells -----------------------
    flux = quadratic_lwr()
    u_ext = rng.random(100_002)
    out = np.empty(100_001)

    def sweep():
        kernels.interface_fluxes(flux.code, flux.params, flux.rho_crit,
                                 flux.flux_max, u_ext, out)

    sweep()
    results["sweep_ms"] = _best(sweep, 20) * 1e3

    # --- junction solve (2-in/1-out, distinct peaks) ------------------------
    spec = JunctionSpec(2, 1, (symmetric_quadratic(1.0),
                               symmetric_quadratic(2.0),
                               symmetric_quadratic(3.0)))
    states = spec.rho_min + spec.span * rng.random((200, 3))

    def junction():
        for u in states:
            solve_junction(spec, u)

    junction()
    results["junction_us"] = _best(junction, 5) / len(states) * 1e6

    # --- full steps of a 2-in/3-out network ---------------------------------
    net = JunctionSpec(2, 3, (quadratic_lwr(), quadratic_lwr(v=1.5),
                              quadratic_lwr(), quadratic_lwr(v=0.75),
                              quadratic_lwr(v=1.25)))
    cells = 2000
    mesh = NetworkMesh(net, 1.0 / cells, np.full(5, cells))
    n_steps = 50
    config = RunConfig(mesh, 0.9, n_steps * cfl_timestep(mesh, 0.9))
    initial = [net.rho_min + net.span * rng.random(cells) for _ in range(5)]

    def steps():
        run(config, initial, keep_states=False)

    steps()
    results["step_ms"] = _best(steps, 1) / n_steps * 1e3

    print(json.dumps(results))


def main() -> None:
    if "--worker" in sys.argv:
        worker()
        return

    rows = {}
    for no_numba in ("1", ""):
        env = dict(os.environ)
        env["JUNCTIONFLOW_NO_NUMBA"] = no_numba
        proc = subprocess.run([sys.executable, os.path.abspath(__file__),
                               "--worker"],
                              capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(f"worker failed (JUNCTIONFLOW_NO_NUMBA={no_numba!r})")
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        rows[data.pop("backend")] = data

    if set(rows) != {"numpy", "numba"}:
        print("note: both workers reported the same backend "
              f"({', '.join(rows)}); is numba installed?")
        for name, data in rows.items():
            print(name, data)
        return

    labels = [("sweep_ms", "interface sweep, 100k cells", "ms"),
              ("junction_us", "junction solve, 2-in/1-out", "us"),
              ("step_ms", "network step, 5 x 2000 cells", "ms")]
    print(f"{'hot path':<30} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    print("-" * 67)
    for key, label, unit in labels:
        a, b = rows["numpy"][key], rows["numba"][key]
        print(f"{label:<30} {a:>9.3f} {unit} {b:>9.3f} {unit} "
              f"{a / b:>8.1f}x")


if __name__ == "__main__":
    main()
