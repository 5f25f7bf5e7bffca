"""Backend selection for the hot pair kernels.

The compiled extension (Cython) is used when it imported cleanly and the
problem is 3D; otherwise the vectorized numpy implementation takes over.
Set IMPACTSPH_PURE=1 to force the pure-Python lane.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pairs_py

if os.environ.get("IMPACTSPH_PURE", "0") == "1":
    _pairs_c = None
else:
    try:
        from . import _pairs as _pairs_c
    except ImportError:
        _pairs_c = None

COMPILED_AVAILABLE = _pairs_c is not None


def active_backend(dim: int = 3) -> str:
    return "compiled" if (COMPILED_AVAILABLE and dim == 3) else "numpy"


def build_pairs(pos, h, support: float = 2.0):
    if COMPILED_AVAILABLE and pos.shape[1] == 3:
        return _pairs_c.build_pairs(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(h, dtype=np.float64),
            support,
        )
    return _pairs_py.build_pairs(pos, h, support)


def strain_rates(pos, vel, mass, rho, h, kind, pi, pj):
    if COMPILED_AVAILABLE and pos.shape[1] == 3 and len(pi):
        return _pairs_c.strain_rates(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(vel, dtype=np.float64),
            np.ascontiguousarray(mass, dtype=np.float64),
            np.ascontiguousarray(rho, dtype=np.float64),
            np.ascontiguousarray(h, dtype=np.float64),
            np.ascontiguousarray(kind, dtype=np.uint8),
            np.ascontiguousarray(pi, dtype=np.int64),
            np.ascontiguousarray(pj, dtype=np.int64),
        )
    return _pairs_py.strain_rates(pos, vel, mass, rho, h, kind, pi, pj)


def momentum_energy_rates(
    pos, vel, mass, rho, h, sigma, cs, Rart, kind, pi, pj, dp0,
    alpha=1.0, beta=1.0, eps_as=0.3, n_as=4.0,
):
    if COMPILED_AVAILABLE and pos.shape[1] == 3 and len(pi):
        n = len(pos)
        R = np.zeros((n, 3, 3)) if (Rart is None or eps_as <= 0.0) else Rart
        return _pairs_c.momentum_energy_rates(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(vel, dtype=np.float64),
            np.ascontiguousarray(mass, dtype=np.float64),
            np.ascontiguousarray(rho, dtype=np.float64),
            np.ascontiguousarray(h, dtype=np.float64),
            np.ascontiguousarray(sigma, dtype=np.float64),
            np.ascontiguousarray(cs, dtype=np.float64),
            np.ascontiguousarray(R, dtype=np.float64),
            np.ascontiguousarray(pi, dtype=np.int64),
            np.ascontiguousarray(pj, dtype=np.int64),
            float(dp0), float(alpha), float(beta),
            float(eps_as if Rart is not None else 0.0), float(n_as),
        )
    return _pairs_py.momentum_energy_rates(
        pos, vel, mass, rho, h, sigma, cs, Rart, kind, pi, pj, dp0,
        alpha=alpha, beta=beta, eps_as=eps_as, n_as=n_as,
    )
