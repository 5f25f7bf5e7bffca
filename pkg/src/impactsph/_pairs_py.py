"""Pure-numpy implementation of the hot pair kernels.

Same call signatures as the compiled extension ``impactsph._pairs``;
:mod:`impactsph.backend` picks whichever is available.  Works for any
dimension (the compiled core is 3D only).

Particle kinds: 0 = real SPH, 1 = ghost (symmetry mirror),
2 = pseudo-particle standing in for an FE node.  Strain-type sums
(density rate, velocity gradient) only see kinds 0 and 1; the momentum
sum sees everything, with pairwise antisymmetric contributions so that
reaction forces on pseudo-particles come out for free.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from . import kernel


def build_pairs(pos: np.ndarray, h: np.ndarray, support: float = 2.0):
    """All pairs (i < j) with r_ij < support * (h_i + h_j)/2, sorted."""
    pos = np.ascontiguousarray(pos, dtype=float)
    h = np.asarray(h, dtype=float)
    if len(pos) < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    rmax = support * float(h.max())
    tree = cKDTree(pos)
    pairs = tree.query_pairs(rmax, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    r = np.linalg.norm(pos[i] - pos[j], axis=1)
    keep = r < support * 0.5 * (h[i] + h[j])
    i, j = i[keep], j[keep]
    order = np.lexsort((j, i))
    return i[order].astype(np.int64), j[order].astype(np.int64)


def pair_geometry(pos, h, pi, pj, dim):
    """Per-pair dx, r, hbar, W and grad_i W (antisymmetric in i<->j)."""
    dx = pos[pi] - pos[pj]
    r = np.linalg.norm(dx, axis=1)
    hbar = 0.5 * (h[pi] + h[pj])
    w = kernel.kernel_value(r, hbar, dim)
    gw = kernel.kernel_gradient(dx, hbar, dim)
    return dx, r, hbar, w, gw


def strain_rates(pos, vel, mass, rho, h, kind, pi, pj):
    """Continuity density rate and velocity gradient from SPH neighbors.

    Returns (drho, L) for every entry; callers discard ghost/pseudo rows.
    """
    n, dim = pos.shape
    drho = np.zeros(n)
    L = np.zeros((n, dim, dim))
    if len(pi) == 0:
        return drho, L
    dx, r, hbar, w, gw = pair_geometry(pos, h, pi, pj, dim)
    vij = vel[pi] - vel[pj]
    vdotgw = np.einsum("pd,pd->p", vij, gw)
    sph_i = kind[pi] <= 1
    sph_j = kind[pj] <= 1

    # d(rho_i)/dt += rho_i * m_j/rho_j * (v_i - v_j) . grad_i W
    np.add.at(drho, pi[sph_j], (rho[pi] * mass[pj] / rho[pj] * vdotgw)[sph_j])
    np.add.at(drho, pj[sph_i], (rho[pj] * mass[pi] / rho[pi] * vdotgw)[sph_i])

    # L_i += m_j/rho_i (v_j - v_i) x grad_i W; same outer product both ways
    outer = -vij[:, :, None] * gw[:, None, :]
    np.add.at(L, pi[sph_j], (mass[pj] / rho[pi])[sph_j, None, None] * outer[sph_j])
    np.add.at(L, pj[sph_i], (mass[pi] / rho[pj])[sph_i, None, None] * outer[sph_i])
    return drho, L


def momentum_energy_rates(
    pos, vel, mass, rho, h, sigma, cs, Rart, kind, pi, pj,
    dp0: float,
    alpha: float = 1.0,
    beta: float = 1.0,
    eps_as: float = 0.3,
    n_as: float = 4.0,
):
    """Acceleration and pairwise internal heating from the momentum sum.

    sigma is the full Cauchy stress (N,d,d), tension positive.  Rart is
    the per-point artificial stress tensor already divided by rho^2 (or
    None to disable).  Returns (acc, dedt, visc_signal): dedt is the
    specific internal-energy rate from stress power plus artificial
    viscosity, split half-and-half across each pair so that the total
    exactly balances the kinetic energy the pair forces remove;
    visc_signal is the per-point max viscous wave-speed estimate used by
    the CFL timestep.
    """
    n, dim = pos.shape
    acc = np.zeros((n, dim))
    dedt = np.zeros(n)
    vsig = np.zeros(n)
    if len(pi) == 0:
        return acc, dedt, vsig
    dx, r, hbar, w, gw = pair_geometry(pos, h, pi, pj, dim)
    vij = vel[pi] - vel[pj]
    vdotx = np.einsum("pd,pd->p", vij, dx)

    T = sigma[pi] / (rho[pi] ** 2)[:, None, None] + sigma[pj] / (rho[pj] ** 2)[:, None, None]

    # Monaghan artificial viscosity on approaching pairs
    phi = hbar * vdotx / (r * r + 0.01 * hbar * hbar)
    cbar = 0.5 * (cs[pi] + cs[pj])
    rhobar = 0.5 * (rho[pi] + rho[pj])
    Pi = np.where(vdotx < 0.0, (-alpha * cbar * phi + beta * phi * phi) / rhobar, 0.0)
    idx = np.arange(dim)
    T[:, idx, idx] -= Pi[:, None]

    # artificial stress against tension instability
    if Rart is not None and eps_as > 0.0:
        w0 = kernel.kernel_value(dp0, hbar, dim)
        f = np.where(w0 > 0.0, w / np.maximum(w0, 1e-300), 0.0)
        T += (f**n_as)[:, None, None] * (Rart[pi] + Rart[pj])

    base = np.einsum("pab,pb->pa", T, gw)
    np.add.at(acc, pi, mass[pj, None] * base)
    np.add.at(acc, pj, -mass[pi, None] * base)

    # force-consistent heating: each pair's internal-energy gain exactly
    # balances the kinetic energy its force removes
    heat = -0.5 * np.einsum("pd,pd->p", base, vij)
    np.add.at(dedt, pi, mass[pj] * heat)
    np.add.at(dedt, pj, mass[pi] * heat)

    visc = np.where(vdotx < 0.0, alpha * cbar + beta * np.abs(phi), 0.0)
    np.maximum.at(vsig, pi, visc)
    np.maximum.at(vsig, pj, visc)
    return acc, dedt, vsig
