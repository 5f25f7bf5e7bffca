"""SPH core: neighbor search, conservation rates, stabilization terms,
CFL timestep and leapfrog integration.

Everything operates on structure-of-arrays state.  The expensive pair
sums are delegated to :mod:`impactsph.backend`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend, kernel
from .materials import StressStateArray

KIND_REAL = 0
KIND_GHOST = 1
KIND_PSEUDO = 2


class NumericalError(RuntimeError):
    """Non-finite state or collapsing timestep."""


@dataclass
class SPHParams:
    """Stabilization and stepping knobs (scenario-configurable)."""

    alpha: float = 1.0          # artificial viscosity, linear
    beta: float = 1.0           # artificial viscosity, quadratic
    eps_as: float = 0.3         # artificial stress magnitude (0 disables)
    n_as: float = 4.0           # artificial stress kernel exponent
    cfl: float = 0.3
    h_factor: float = 1.2       # h0 = h_factor * particle spacing
    h_clamp: tuple = (0.8, 1.3)
    dt_floor: float = 1e-12
    density_floor: float = 0.5  # min rho/rho_ref before clamping
    threads: int = 1


@dataclass
class ParticleSystem:
    """SPH particle state; `dim` follows the position array."""

    pos: np.ndarray            # (N,dim)
    vel: np.ndarray            # (N,dim)
    mass: np.ndarray           # (N,)
    rho: np.ndarray            # (N,)
    h: np.ndarray              # (N,)
    sigma: np.ndarray          # (N,dim,dim) full Cauchy stress, tension +
    e: np.ndarray              # (N,) specific internal energy
    cs: np.ndarray             # (N,) sound speed
    dp0: float                 # initial lattice spacing
    h0: np.ndarray = None      # reference h for clamping
    rho_ref: np.ndarray = None # per-particle EOS reference density
    interface: np.ndarray = None  # tied-to-mesh flags
    state: StressStateArray = None  # 3D constitutive state (driver-owned)

    def __post_init__(self):
        n = len(self.mass)
        if self.h0 is None:
            self.h0 = self.h.copy()
        if self.rho_ref is None:
            self.rho_ref = self.rho.copy()
        if self.interface is None:
            self.interface = np.zeros(n, dtype=bool)

    @property
    def n(self) -> int:
        return len(self.mass)

    @property
    def dim(self) -> int:
        return self.pos.shape[1]


def lattice_block(spacing: float, shape: tuple, origin=None, dim: int = 3):
    """Cubic lattice of cell-centered points, shape = counts per axis."""
    axes = [(np.arange(c) + 0.5) * spacing for c in shape]
    grids = np.meshgrid(*axes, indexing="ij")
    pos = np.stack([g.ravel() for g in grids], axis=-1)
    if origin is not None:
        pos = pos + np.asarray(origin, dtype=float)
    return pos


def uniform_system(pos, spacing, rho0, cs0, h_factor=1.2, vel=None) -> ParticleSystem:
    """Particles on a lattice with uniform mass rho0 * spacing^dim."""
    pos = np.asarray(pos, dtype=float)
    n, dim = pos.shape
    return ParticleSystem(
        pos=pos.copy(),
        vel=np.zeros((n, dim)) if vel is None else np.array(vel, dtype=float),
        mass=np.full(n, rho0 * spacing**dim),
        rho=np.full(n, float(rho0)),
        h=np.full(n, h_factor * spacing),
        sigma=np.zeros((n, dim, dim)),
        e=np.zeros(n),
        cs=np.full(n, float(cs0)),
        dp0=float(spacing),
    )


# ---------------------------------------------------------------------------
# neighbors

@dataclass
class NeighborList:
    i: np.ndarray
    j: np.ndarray

    def __len__(self):
        return len(self.i)

    def count_for(self, idx: int) -> int:
        return int(np.sum(self.i == idx) + np.sum(self.j == idx))


def find_neighbors(pos, h, support: float = kernel.SUPPORT) -> NeighborList:
    """Exact pair list with r < support * (h_i + h_j)/2."""
    if not np.all(np.isfinite(pos)):
        raise NumericalError("non-finite particle positions in neighbor search")
    i, j = backend.build_pairs(np.asarray(pos, float), np.asarray(h, float), support)
    return NeighborList(i=i, j=j)


def brute_force_neighbors(pos, h, support: float = kernel.SUPPORT) -> NeighborList:
    """O(n^2) oracle for the grid/tree-accelerated search."""
    pos = np.asarray(pos, dtype=float)
    h = np.asarray(h, dtype=float)
    n = len(pos)
    ii, jj = np.triu_indices(n, k=1)
    r = np.linalg.norm(pos[ii] - pos[jj], axis=1)
    keep = r < support * 0.5 * (h[ii] + h[jj])
    ii, jj = ii[keep], jj[keep]
    order = np.lexsort((jj, ii))
    return NeighborList(i=ii[order].astype(np.int64), j=jj[order].astype(np.int64))


# ---------------------------------------------------------------------------
# ghost particles

@dataclass(frozen=True)
class GhostPlane:
    """Axis-aligned mirror plane, e.g. axis=0, coord=0.0 for the yz plane."""

    axis: int
    coord: float = 0.0


def reflect_tensor(sig, axis):
    """Mirror a stress tensor: normal-tangential shear components negate."""
    out = sig.copy()
    dim = sig.shape[-1]
    for k in range(dim):
        if k != axis:
            out[..., axis, k] *= -1.0
            out[..., k, axis] *= -1.0
    return out


def mirror_arrays(pos, vel, sigma, h, plane: GhostPlane, cutoff=None):
    """Mirror particles within cutoff (default 2h) of the plane.

    Returns (source_index, ghost_pos, ghost_vel, ghost_sigma).
    """
    d = np.abs(pos[:, plane.axis] - plane.coord)
    cut = 2.0 * h if cutoff is None else cutoff
    src = np.nonzero(d < cut)[0]
    gpos = pos[src].copy()
    gpos[:, plane.axis] = 2.0 * plane.coord - gpos[:, plane.axis]
    gvel = vel[src].copy()
    gvel[:, plane.axis] *= -1.0
    gsig = reflect_tensor(sigma[src], plane.axis)
    return src, gpos, gvel, gsig


def make_ghosts(ps: ParticleSystem, planes):
    """Ghost arrays for all symmetry planes, including corner ghosts.

    Mirrors are built sequentially so particles near two planes also get
    the doubly-mirrored corner image.  Ghosts are regenerated every step
    from their sources and never enter global conservation sums.
    """
    pos = [ps.pos]
    vel = [ps.vel]
    sig = [ps.sigma]
    mass = [ps.mass]
    rho = [ps.rho]
    h = [ps.h]
    e = [ps.e]
    cs = [ps.cs]
    for plane in planes:
        cat_pos = np.concatenate(pos)
        cat_h = np.concatenate(h)
        src, gpos, gvel, gsig = mirror_arrays(
            cat_pos, np.concatenate(vel), np.concatenate(sig), cat_h, plane
        )
        pos.append(gpos)
        vel.append(gvel)
        sig.append(gsig)
        for arrs, full in ((mass, np.concatenate(mass)), (rho, np.concatenate(rho)),
                           (h, cat_h), (e, np.concatenate(e)), (cs, np.concatenate(cs))):
            arrs.append(full[src])
    n_ghost = sum(len(p) for p in pos[1:])
    return {
        "pos": np.concatenate(pos[1:]) if n_ghost else np.empty((0, ps.dim)),
        "vel": np.concatenate(vel[1:]) if n_ghost else np.empty((0, ps.dim)),
        "sigma": np.concatenate(sig[1:]) if n_ghost else np.empty((0, ps.dim, ps.dim)),
        "mass": np.concatenate(mass[1:]) if n_ghost else np.empty(0),
        "rho": np.concatenate(rho[1:]) if n_ghost else np.empty(0),
        "h": np.concatenate(h[1:]) if n_ghost else np.empty(0),
        "e": np.concatenate(e[1:]) if n_ghost else np.empty(0),
        "cs": np.concatenate(cs[1:]) if n_ghost else np.empty(0),
    }


# ---------------------------------------------------------------------------
# direct density summation (t = 0 initialization)

def direct_density(pos, mass, h, dim=None, extra_pos=None, extra_mass=None, extra_h=None):
    """rho_i = sum_j m_j W_ij including self; ghosts may be appended."""
    pos = np.asarray(pos, dtype=float)
    if dim is None:
        dim = pos.shape[1]
    all_pos, all_mass, all_h = pos, np.asarray(mass, float), np.asarray(h, float)
    if extra_pos is not None and len(extra_pos):
        all_pos = np.concatenate([pos, extra_pos])
        all_mass = np.concatenate([all_mass, extra_mass])
        all_h = np.concatenate([all_h, extra_h])
    pairs = find_neighbors(all_pos, all_h)
    n = len(pos)
    rho = all_mass * kernel.kernel_value(0.0, all_h, dim)  # self term
    if len(pairs):
        r = np.linalg.norm(all_pos[pairs.i] - all_pos[pairs.j], axis=1)
        hbar = 0.5 * (all_h[pairs.i] + all_h[pairs.j])
        w = kernel.kernel_value(r, hbar, dim)
        np.add.at(rho, pairs.i, all_mass[pairs.j] * w)
        np.add.at(rho, pairs.j, all_mass[pairs.i] * w)
    return rho[:n]


# ---------------------------------------------------------------------------
# stabilization

def artificial_viscosity(dx, vij, hbar, cbar, rhobar, alpha=1.0, beta=1.0):
    """Monaghan Pi_ij for a single pair or arrays of pairs."""
    dx = np.asarray(dx, dtype=float)
    vij = np.asarray(vij, dtype=float)
    vdotx = np.sum(vij * dx, axis=-1)
    r2 = np.sum(dx * dx, axis=-1)
    phi = hbar * vdotx / (r2 + 0.01 * hbar * hbar)
    pi = (-alpha * cbar * phi + beta * phi * phi) / rhobar
    return np.where(vdotx < 0.0, pi, 0.0)


def artificial_stress_tensors(sigma, rho, eps_as: float = 0.3):
    """Per-particle artificial stress R_i (already divided by rho_i^2).

    Tensile principal components sigma_k > 0 contribute -eps*sigma_k/rho^2
    in the principal frame, rotated back.  Zero in pure compression.
    """
    sigma = np.asarray(sigma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(sigma)
    if eps_as <= 0.0 or len(sigma) == 0:
        return out
    # Gershgorin upper bound: skip particles that cannot be in tension
    dim = sigma.shape[-1]
    radii = np.sum(np.abs(sigma), axis=2) - np.abs(
        sigma[:, np.arange(dim), np.arange(dim)])
    upper = np.max(sigma[:, np.arange(dim), np.arange(dim)] + radii, axis=1)
    sel = np.nonzero(upper > 0.0)[0]
    if len(sel) == 0:
        return out
    lam, Q = np.linalg.eigh(sigma[sel])
    rbar = np.where(lam > 0.0, -eps_as * lam, 0.0) / (rho[sel] ** 2)[:, None]
    out[sel] = np.einsum("nik,nk,njk->nij", Q, rbar, Q)
    return out


# ---------------------------------------------------------------------------
# rate evaluation

def _chunk_pairs(pi, pj, threads):
    npair = len(pi)
    if threads <= 1 or npair < 4096:
        return [(pi, pj)]
    bounds = np.linspace(0, npair, threads + 1).astype(int)
    return [(pi[a:b], pj[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def evaluate_rates(
    pos, vel, mass, rho, h, sigma, cs, kind, params: SPHParams, dp0,
    pairs: NeighborList | None = None,
    Rart=None,
    want_strain=True,
):
    """All SPH rates in two pair passes.

    Returns dict with drho, L, acc, dedt_pair, vsig over the *combined*
    array (real + ghost + pseudo); the caller keeps the real rows.
    When `threads > 1` the pair list is split into fixed chunks whose
    partial sums are reduced in chunk order, so results match the
    single-threaded evaluation to roundoff-reordering only.
    """
    if pairs is None:
        pairs = find_neighbors(pos, h)
    chunks = _chunk_pairs(pairs.i, pairs.j, params.threads)

    def _strain(chunk):
        return backend.strain_rates(pos, vel, mass, rho, h, kind, chunk[0], chunk[1])

    def _mom(chunk):
        return backend.momentum_energy_rates(
            pos, vel, mass, rho, h, sigma, cs, Rart, kind, chunk[0], chunk[1],
            dp0, alpha=params.alpha, beta=params.beta,
            eps_as=params.eps_as, n_as=params.n_as,
        )

    if len(chunks) == 1:
        drho, L = _strain(chunks[0]) if want_strain else (None, None)
        acc, dedt, vsig = _mom(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            strain_parts = list(ex.map(_strain, chunks)) if want_strain else None
            mom_parts = list(ex.map(_mom, chunks))
        if want_strain:
            drho = sum(p[0] for p in strain_parts)
            L = sum(p[1] for p in strain_parts)
        else:
            drho = L = None
        acc = sum(p[0] for p in mom_parts)
        dedt = sum(p[1] for p in mom_parts)
        vsig = np.max([p[2] for p in mom_parts], axis=0)
    return {"pairs": pairs, "drho": drho, "L": L, "acc": acc,
            "dedt_pair": dedt, "vsig": vsig}


# ---------------------------------------------------------------------------
# timestep and integration

def stable_timestep(h, cs, vel, vsig=None, cfl=0.3, element_terms=None,
                    dt_floor=1e-12, step=None):
    """CFL timestep over particles and elements.

    dt = cfl * min( h/(c + |v| + 1.2*viscous), l_min/c ).
    """
    terms = []
    if len(np.atleast_1d(h)):
        speed = np.linalg.norm(vel, axis=-1) if np.ndim(vel) > 1 else np.abs(vel)
        visc = 0.0 if vsig is None else 1.2 * np.asarray(vsig)
        terms.append(np.min(np.asarray(h) / (np.asarray(cs) + speed + visc)))
    if element_terms is not None and len(np.atleast_1d(element_terms)):
        terms.append(float(np.min(element_terms)))
    if not terms:
        raise NumericalError("no particles or elements to set the timestep")
    dt = cfl * min(terms)
    if dt < dt_floor:
        where = f" at step {step}" if step is not None else ""
        raise NumericalError(f"timestep {dt:.3e}s fell below floor {dt_floor}{where} "
                             "(collapse detected)")
    return dt


class LeapfrogIntegrator:
    """Kick-drift stagger: v at half steps, x/rho/e/h at full steps.

    The first kick is a half step so velocities land on the stagger.
    """

    def __init__(self):
        self.started = False

    def kick(self, vel, acc, dt):
        factor = 0.5 if not self.started else 1.0
        self.started = True
        return vel + factor * dt * acc

    @staticmethod
    def drift(pos, vel, dt):
        return pos + dt * vel


def leapfrog_step(ps: ParticleSystem, acc, drho, dedt, divv, dt,
                  integrator: LeapfrogIntegrator, params: SPHParams,
                  movable=None):
    """Advance one step in place; raises on non-finite state."""
    if movable is None:
        movable = np.ones(ps.n, dtype=bool)
    ps.vel[movable] = integrator.kick(ps.vel[movable], acc[movable], dt)
    ps.pos[movable] = integrator.drift(ps.pos[movable], ps.vel[movable], dt)
    ps.rho += dt * drho
    np.clip(ps.rho, params.density_floor * ps.rho_ref, None, out=ps.rho)
    ps.e += dt * dedt
    # dedt was sampled at the pre-kick (staggered) velocity; re-center it
    # on the kick so the heating matches the kinetic energy the forces
    # actually removed, instead of creating O(dt^2) energy every step
    ps.e[movable] -= 0.5 * dt * dt * np.einsum(
        "id,id->i", acc[movable], acc[movable])
    ps.h = kernel.update_smoothing_length(
        ps.h, divv, dt, h0=ps.h0, lo=params.h_clamp[0], hi=params.h_clamp[1]
    )
    if not np.all(np.isfinite(ps.pos)) or not np.all(np.isfinite(ps.vel)):
        bad = np.nonzero(~np.isfinite(ps.pos).all(axis=1)
                         | ~np.isfinite(ps.vel).all(axis=1))[0]
        raise NumericalError(f"non-finite state at particle {bad[0]}")
    return ps
