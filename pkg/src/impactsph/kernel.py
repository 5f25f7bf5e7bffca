"""Cubic B-spline smoothing kernel.

The kernel is W(r, h) = kappa / h^dim * f(q), q = r/h, with compact
support q <= 2.  The normalization kappa is computed once per dimension
by numerical quadrature of the partition-of-unity condition and checked
against the closed forms 2/3, 10/(7 pi), 1/pi.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

SUPPORT = 2.0  # support radius in units of h

_CLOSED_FORM = {1: 2.0 / 3.0, 2: 10.0 / (7.0 * math.pi), 3: 1.0 / math.pi}
_KAPPA: dict[int, float] = {}


def shape(q):
    """Dimensionless kernel profile f(q); vectorized."""
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    inner = q <= 1.0
    mid = (q > 1.0) & (q <= 2.0)
    out = np.where(inner, 1.0 - 1.5 * q * q + 0.75 * q**3, out)
    out = np.where(mid, 0.25 * (2.0 - q) ** 3, out)
    return out


def shape_deriv(q):
    """df/dq; continuous across q = 1 and q = 2."""
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    inner = q <= 1.0
    mid = (q > 1.0) & (q <= 2.0)
    out = np.where(inner, -3.0 * q + 2.25 * q * q, out)
    out = np.where(mid, -0.75 * (2.0 - q) ** 2, out)
    return out


def normalization(dim: int) -> float:
    """kappa for the given dimension, from quadrature over the support."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
    if dim not in _KAPPA:
        if dim == 1:
            integral = 2.0 * quad(lambda q: shape(q), 0.0, SUPPORT)[0]
        elif dim == 2:
            integral = quad(lambda q: shape(q) * 2.0 * math.pi * q, 0.0, SUPPORT)[0]
        else:
            integral = quad(lambda q: shape(q) * 4.0 * math.pi * q * q, 0.0, SUPPORT)[0]
        kappa = 1.0 / integral
        if not math.isclose(kappa, _CLOSED_FORM[dim], rel_tol=1e-9):
            raise AssertionError(
                f"kernel normalization mismatch in {dim}D: {kappa} vs {_CLOSED_FORM[dim]}"
            )
        _KAPPA[dim] = kappa
    return _KAPPA[dim]


def kernel_value(r, h, dim: int = 3):
    """W(r, h) with units 1/m^dim."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0.0):
        raise ValueError("smoothing length must be positive")
    kappa = normalization(dim)
    q = np.asarray(r, dtype=float) / h
    return kappa / h**dim * shape(q)


def kernel_gradient(dx, h, dim: int = 3):
    """Gradient of W with respect to x_i, evaluated at x_i - x_j = dx.

    dx has shape (..., dim); returns the same shape.  Zero at r = 0
    (the kernel is even) and beyond the support.
    """
    dx = np.asarray(dx, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0.0):
        raise ValueError("smoothing length must be positive")
    kappa = normalization(dim)
    r = np.linalg.norm(dx, axis=-1)
    q = r / h
    # dW/dq * 1/h * dx/r; guard r = 0
    rsafe = np.where(r > 0.0, r, 1.0)
    scale = kappa / h ** (dim + 1) * shape_deriv(q) / rsafe
    scale = np.where(r > 0.0, scale, 0.0)
    return scale[..., None] * dx


def update_smoothing_length(h, div_v, dt, h0=None, lo: float = 0.8, hi: float = 1.3):
    """Advance dh/dt = h * div(v) / 3 exactly over one step.

    The exponential is the closed-form solution for constant divergence.
    Clamped to [lo*h0, hi*h0] when h0 is given to keep neighbor lists
    bounded.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0.0):
        raise ValueError("smoothing length must be positive")
    h_new = h * np.exp(np.asarray(div_v, dtype=float) * dt / 3.0)
    if h0 is not None:
        h0 = np.asarray(h0, dtype=float)
        h_new = np.clip(h_new, lo * h0, hi * h0)
    return h_new
