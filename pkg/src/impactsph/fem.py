"""Explicit Lagrangian FEM for 8-node hexahedra.

One-point quadrature with Flanagan-Belytschko viscous hourglass control,
row-sum lumped mass, matrix-free internal forces and central-difference
time integration.  Element erosion (damage D >= 1) is only active in the
FEM-comparison mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import materials
from .materials import StressStateArray

_EYE3 = np.eye(3)

# natural coordinates of the 8 nodes: (-,-,-),(+,-,-),(+,+,-),(-,+,-), then z+
_XI = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

# dN_a/dxi at the element center
_DN0 = 0.125 * _XI.copy()

# hourglass base vectors (xi*eta, eta*zeta, xi*zeta, xi*eta*zeta per node)
_GAMMA = np.array([
    _XI[:, 0] * _XI[:, 1],
    _XI[:, 1] * _XI[:, 2],
    _XI[:, 0] * _XI[:, 2],
    _XI[:, 0] * _XI[:, 1] * _XI[:, 2],
])

# 2x2x2 Gauss points for exact trilinear volumes
_GP = np.array(np.meshgrid(*[[-1, 1]] * 3, indexing="ij")).reshape(3, -1).T / np.sqrt(3.0)

# dN_a/dxi_j at every Gauss point, shape (8 gp, 8 nodes, 3)
_DN_GP = np.empty((len(_GP), 8, 3))
for _g, _gp in enumerate(_GP):
    for _a in range(8):
        _xa = _XI[_a]
        _DN_GP[_g, _a, 0] = 0.125 * _xa[0] * (1 + _gp[1] * _xa[1]) * (1 + _gp[2] * _xa[2])
        _DN_GP[_g, _a, 1] = 0.125 * _xa[1] * (1 + _gp[0] * _xa[0]) * (1 + _gp[2] * _xa[2])
        _DN_GP[_g, _a, 2] = 0.125 * _xa[2] * (1 + _gp[0] * _xa[0]) * (1 + _gp[1] * _xa[1])
del _g, _gp, _a, _xa


class MeshError(ValueError):
    pass


@dataclass
class HexMesh:
    """Nodes + hex elements with per-element material state."""

    nodes: np.ndarray               # (n,3) current positions
    elems: np.ndarray               # (E,8) node indices
    card: object                    # material card
    state: StressStateArray = None
    active: np.ndarray = None       # (E,) erosion mask
    V0: np.ndarray = None           # (E,) initial volumes
    rho: np.ndarray = None          # (E,) current densities
    e_int: np.ndarray = None        # (E,) specific internal energy
    vel: np.ndarray = None          # (n,3)

    def __post_init__(self):
        ne = len(self.elems)
        if self.state is None:
            self.state = StressStateArray.zeros(
                ne, T_room=getattr(self.card, "T_room", 293.0)
            )
        if self.active is None:
            self.active = np.ones(ne, dtype=bool)
        if self.V0 is None:
            self.V0 = element_volumes(self.nodes[self.elems])
            if np.any(self.V0 <= 0.0):
                raise MeshError("zero or negative element volume in mesh")
        if self.rho is None:
            self.rho = np.full(ne, self.card.rho0)
        if self.e_int is None:
            self.e_int = np.zeros(ne)
        if self.vel is None:
            self.vel = np.zeros_like(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    def total_mass(self) -> float:
        return float(np.sum(self.card.rho0 * self.V0))

    def char_lengths(self) -> np.ndarray:
        """V^(1/3) per element, used for CFL and contact stiffness."""
        return element_volumes(self.nodes[self.elems]) ** (1.0 / 3.0)


def shape_values(xi_eta_zeta):
    """Trilinear shape functions at natural coordinates (..., 3)."""
    p = np.asarray(xi_eta_zeta, dtype=float)
    return 0.125 * np.prod(1.0 + p[..., None, :] * _XI, axis=-1)


def element_volumes(x_e: np.ndarray) -> np.ndarray:
    """Exact trilinear hex volume via 2x2x2 Gauss quadrature of det J."""
    J = np.einsum("eai,gaj->egij", x_e, _DN_GP)
    return np.linalg.det(J).sum(axis=1)


def centroid_gradients(x_e: np.ndarray):
    """(gradN (E,8,3), detJ (E,)) at the one-point quadrature location."""
    J = np.einsum("eai,aj->eij", x_e, _DN0)
    detJ = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    gradN = np.einsum("aj,eji->eai", _DN0, Jinv)
    return gradN, detJ


def lumped_mass(mesh: HexMesh) -> np.ndarray:
    """Row-sum lumping: each node gets rho*V_e/8 from attached elements."""
    if mesh.card.rho0 <= 0.0:
        raise MeshError("material density must be positive")
    vols = element_volumes(mesh.nodes[mesh.elems])
    if np.any(vols <= 0.0):
        raise MeshError("zero-volume element in lumped mass")
    m = np.zeros(mesh.n_nodes)
    np.add.at(m, mesh.elems.ravel(), np.repeat(mesh.card.rho0 * vols / 8.0, 8))
    return m


def velocity_gradients(x_e, v_e):
    gradN, detJ = centroid_gradients(x_e)
    L = np.einsum("eai,eaj->eij", v_e, gradN)
    return L, gradN, detJ


def internal_forces(
    mesh: HexMesh,
    dt: float,
    hourglass_coeff: float = 0.1,
    chi: float = 0.9,
    damage_active: bool = False,
    erode_on_inversion: bool = False,
):
    """Element stress update + nodal internal and hourglass forces.

    Returns (f_int (n,3), hourglass power [W], min detJ over active
    elements).  Mutates the element state (stress, density, energy,
    damage).  A negative Jacobian raises unless `erode_on_inversion`.
    """
    f = np.zeros_like(mesh.nodes)
    if not np.any(mesh.active):
        return f, 0.0, np.inf
    act = np.nonzero(mesh.active)[0]
    x_e = mesh.nodes[mesh.elems[act]]
    v_e = mesh.vel[mesh.elems[act]]
    L, gradN, detJ = velocity_gradients(x_e, v_e)
    vols = element_volumes(x_e)

    if np.any(detJ <= 0.0) or np.any(vols <= 0.0):
        bad = act[np.nonzero((detJ <= 0.0) | (vols <= 0.0))[0]]
        if erode_on_inversion:
            mesh.active[bad] = False
            mesh.state.failed[bad] = True
            return internal_forces(mesh, dt, hourglass_coeff, chi,
                                   damage_active, erode_on_inversion=False)
        raise MeshError(
            f"element {bad[0]} inverted; in coupled mode this signals an "
            "undersized SPH region (increase sph_radius)"
        )

    # Lagrangian density and stress update at the centroid
    mesh.rho[act] = mesh.card.rho0 * mesh.V0[act] / vols
    sub = StressStateArray(
        S=mesh.state.S[act], p=mesh.state.p[act],
        eps_p=mesh.state.eps_p[act], epsdot_p=mesh.state.epsdot_p[act],
        T=mesh.state.T[act], D=mesh.state.D[act],
        failed=mesh.state.failed[act],
    )
    materials.update_stress(sub, mesh.card, L, dt, rho=mesh.rho[act],
                            chi=chi, damage_active=damage_active, ids=act)
    for name in ("S", "p", "eps_p", "epsdot_p", "T", "D", "failed"):
        getattr(mesh.state, name)[act] = getattr(sub, name)
    sigma = sub.full_stress()
    mesh.e_int[act] += dt * np.einsum("eij,eij->e", sigma, L) / mesh.rho[act]

    # f_a = -V * sigma . gradN_a  (tension-positive sigma)
    fe = -vols[:, None, None] * np.einsum("eij,eaj->eai", sigma, gradN)

    # viscous hourglass resistance on the 4 non-affine modes
    hg_power = 0.0
    if hourglass_coeff > 0.0:
        proj = np.einsum("ka,eai->eki", _GAMMA, x_e)          # (E,4,3)
        gamma = _GAMMA[None, :, :] - np.einsum("eki,eai->eka", proj, gradN)
        q = np.einsum("eka,eai->eki", gamma, v_e)             # modal rates
        c = mesh.card.sound_speed
        coef = hourglass_coeff * mesh.rho[act] * vols ** (2.0 / 3.0) * c / 4.0
        fhg = -coef[:, None, None] * np.einsum("eka,eki->eai", gamma, q)
        hg_power = float(np.einsum("eai,eai->", fhg, v_e))
        fe = fe + fhg

    np.add.at(f, mesh.elems[act].ravel(), fe.reshape(-1, 3))
    return f, hg_power, float(np.min(detJ))


def hourglass_force(x_e, v_e, rho, vol, sound_speed, coeff=0.1):
    """Standalone hourglass force for a batch of elements (test surface)."""
    gradN, _ = centroid_gradients(x_e)
    proj = np.einsum("ka,eai->eki", _GAMMA, x_e)
    gamma = _GAMMA[None, :, :] - np.einsum("eki,eai->eka", proj, gradN)
    q = np.einsum("eka,eai->eki", gamma, v_e)
    coef = coeff * rho * vol ** (2.0 / 3.0) * sound_speed / 4.0
    return -np.asarray(coef)[:, None, None] * np.einsum("eka,eki->eai", gamma, q)


def central_difference_step(pos, vel, force, mass, dt, fixed_dofs=None,
                            half_kick: bool = False):
    """v += dt*f/m (optionally half), x += dt*v.  Mutates and returns."""
    if not np.all(np.isfinite(force)):
        bad = np.nonzero(~np.isfinite(force).all(axis=1))[0]
        raise MeshError(f"non-finite force at node {bad[0]}")
    factor = 0.5 if half_kick else 1.0
    vel += factor * dt * force / mass[:, None]
    if fixed_dofs is not None:
        vel[fixed_dofs] = 0.0
    pos += dt * vel
    return pos, vel


def erode_elements(mesh: HexMesh):
    """Deactivate elements whose damage reached 1; mass stays on nodes."""
    newly = mesh.active & (mesh.state.D >= 1.0)
    mesh.active &= ~newly
    return np.nonzero(newly)[0]


# ---------------------------------------------------------------------------
# structured block mesh helper (tests and simple bars)

def block_mesh(card, nx, ny, nz, lx, ly, lz, origin=(0.0, 0.0, 0.0)) -> HexMesh:
    """Regular nx x ny x nz hex block of extents (lx, ly, lz)."""
    xs = np.linspace(0, lx, nx + 1) + origin[0]
    ys = np.linspace(0, ly, ny + 1) + origin[1]
    zs = np.linspace(0, lz, nz + 1) + origin[2]
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    elems = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                elems.append([
                    nid(i, j, k), nid(i + 1, j, k),
                    nid(i + 1, j + 1, k), nid(i, j + 1, k),
                    nid(i, j, k + 1), nid(i + 1, j, k + 1),
                    nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1),
                ])
    return HexMesh(nodes=nodes, elems=np.array(elems, dtype=np.int64), card=card)
