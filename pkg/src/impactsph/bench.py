"""Micro-benchmark comparing the compiled and numpy pair kernels."""

from __future__ import annotations

import time

import numpy as np

from . import _pairs_py, backend, sph


def _workload(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    side = max(2, round(n ** (1.0 / 3.0)))
    dp = 1e-3
    pos = sph.lattice_block(dp, (side, side, side))
    pos += rng.normal(0.0, 0.05 * dp, pos.shape)
    n = len(pos)
    return {
        "pos": pos,
        "vel": rng.normal(0.0, 20.0, (n, 3)),
        "mass": np.full(n, 7850.0 * dp**3),
        "rho": np.full(n, 7850.0),
        "h": np.full(n, 1.2 * dp),
        "sigma": np.zeros((n, 3, 3)),
        "cs": np.full(n, 5172.0),
        "kind": np.zeros(n, dtype=np.uint8),
        "dp0": dp,
    }


def _time_lane(fns, w, pi, pj, repeat):
    Rart = sph.artificial_stress_tensors(w["sigma"], w["rho"], 0.3)
    best = {}
    for name, fn in fns.items():
        t = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            if name == "build_pairs":
                fn(w["pos"], w["h"])
            elif name == "strain_rates":
                fn(w["pos"], w["vel"], w["mass"], w["rho"], w["h"],
                   w["kind"], pi, pj)
            else:
                fn(w["pos"], w["vel"], w["mass"], w["rho"], w["h"],
                   w["sigma"], w["cs"], Rart, w["kind"], pi, pj, w["dp0"])
            t.append(time.perf_counter() - t0)
        best[name] = min(t)
    return best


def run_benchmark(n: int = 20000, repeat: int = 3) -> dict:
    """Times both lanes on the same synthetic cloud.

    Returns {n, n_pairs, numpy: {...}, compiled: {...} | None,
    speedup: {...} | None} with per-kernel best-of-`repeat` seconds.
    """
    w = _workload(n)
    pi, pj = _pairs_py.build_pairs(w["pos"], w["h"])
    lanes = {
        "numpy": {
            "build_pairs": _pairs_py.build_pairs,
            "strain_rates": _pairs_py.strain_rates,
            "momentum_energy_rates": _pairs_py.momentum_energy_rates,
        }
    }
    if backend.COMPILED_AVAILABLE:
        from . import _pairs as _pairs_c

        def _strain_c(pos, vel, mass, rho, h, kind, pi, pj):
            return _pairs_c.strain_rates(pos, vel, mass, rho, h, kind,
                                         pi.astype(np.int64),
                                         pj.astype(np.int64))

        def _mom_c(pos, vel, mass, rho, h, sigma, cs, Rart, kind, pi, pj, dp0):
            return _pairs_c.momentum_energy_rates(
                pos, vel, mass, rho, h, sigma, cs, Rart,
                pi.astype(np.int64), pj.astype(np.int64),
                dp0, 1.0, 1.0, 0.3, 4.0)

        lanes["compiled"] = {
            "build_pairs": lambda pos, h: _pairs_c.build_pairs(pos, h, 2.0),
            "strain_rates": _strain_c,
            "momentum_energy_rates": _mom_c,
        }
    out = {"n": len(w["pos"]), "n_pairs": len(pi)}
    for lane, fns in lanes.items():
        out[lane] = _time_lane(fns, w, pi, pj, repeat)
    if "compiled" in out:
        out["speedup"] = {k: out["numpy"][k] / out["compiled"][k]
                          for k in out["numpy"]}
    else:
        out["compiled"] = None
        out["speedup"] = None
    return out


def format_benchmark(result: dict) -> str:
    lines = [f"particles: {result['n']}   pairs: {result['n_pairs']}"]
    for lane in ("numpy", "compiled"):
        if result.get(lane):
            for k, v in result[lane].items():
                lines.append(f"{lane:>9} {k:<24} {v * 1e3:9.3f} ms")
    if result.get("speedup"):
        for k, v in result["speedup"].items():
            lines.append(f"{'speedup':>9} {k:<24} {v:9.2f} x")
    else:
        lines.append("compiled extension not available; numpy lane only")
    return "\n".join(lines)
