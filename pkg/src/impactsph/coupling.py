"""SPH-FE interface: kinematic ties and pseudo-particles.

Interface particles are slaved to the FE faces they sit on (the target
annulus inner surface); their SPH forces go back to the face nodes with
bilinear weights, so the exchange is momentum-neutral by construction.
FE nodes near the interface additionally appear in the SPH momentum sum
as per-step pseudo-particles, restoring the truncated kernel support;
strain-type sums never see them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .fem import HexMesh


class CouplingError(ValueError):
    pass


@dataclass
class InterfaceTies:
    particle_idx: np.ndarray     # (M,)
    face_nodes: np.ndarray       # (M,4) node ids
    xi_eta: np.ndarray           # (M,2) in [0,1]^2
    weights: np.ndarray          # (M,4) bilinear, sum to 1


def bilinear_weights(xi_eta: np.ndarray) -> np.ndarray:
    """Weights for corners ordered (0,0),(1,0),(1,1),(0,1) on [0,1]^2."""
    u = np.asarray(xi_eta, dtype=float)[..., 0]
    v = np.asarray(xi_eta, dtype=float)[..., 1]
    return np.stack(
        [(1 - u) * (1 - v), u * (1 - v), u * v, (1 - u) * v], axis=-1
    )


def build_interface_ties(pos, interface_idx, face_of_particle, faces, nodes,
                         tol: float = 1e-9) -> InterfaceTies:
    """Ties from the geometry pairing; verifies the projection residual."""
    interface_idx = np.asarray(interface_idx, dtype=np.int64)
    fnodes = faces[np.asarray(face_of_particle, dtype=np.int64)]
    corners = nodes[fnodes]                       # (M,4,3)
    e_u = corners[:, 1] - corners[:, 0]
    e_v = corners[:, 3] - corners[:, 0]
    rel = pos[interface_idx] - corners[:, 0]
    u = np.einsum("md,md->m", rel, e_u) / np.einsum("md,md->m", e_u, e_u)
    v = np.einsum("md,md->m", rel, e_v) / np.einsum("md,md->m", e_v, e_v)
    if np.any(u < -1e-9) or np.any(u > 1 + 1e-9) or np.any(v < -1e-9) or np.any(v > 1 + 1e-9):
        bad = interface_idx[(u < -1e-9) | (u > 1 + 1e-9) | (v < -1e-9) | (v > 1 + 1e-9)]
        raise CouplingError(f"particle {bad[0]} projects outside its face")
    xi_eta = np.stack([np.clip(u, 0, 1), np.clip(v, 0, 1)], axis=-1)
    w = bilinear_weights(xi_eta)
    recon = np.einsum("mc,mcd->md", w, corners)
    resid = np.linalg.norm(recon - pos[interface_idx], axis=1)
    if np.any(resid > tol):
        worst = interface_idx[np.argmax(resid)]
        raise CouplingError(
            f"tie projection residual {resid.max():.3e} m at particle {worst} "
            f"exceeds {tol} (geometry mismatch)"
        )
    return InterfaceTies(
        particle_idx=interface_idx, face_nodes=fnodes, xi_eta=xi_eta, weights=w
    )


def slave_particles(ties: InterfaceTies, nodes, node_vel, pos, vel):
    """pos/vel of tied particles := bilinear interpolation of face nodes."""
    if len(ties.particle_idx) == 0:
        return
    pos[ties.particle_idx] = np.einsum("mc,mcd->md", ties.weights, nodes[ties.face_nodes])
    vel[ties.particle_idx] = np.einsum("mc,mcd->md", ties.weights, node_vel[ties.face_nodes])


def distribute_tie_forces(ties: InterfaceTies, particle_forces, node_force):
    """Action-reaction: each tied particle's force goes to its 4 nodes."""
    if len(ties.particle_idx) == 0:
        return
    contrib = ties.weights[:, :, None] * particle_forces[ties.particle_idx][:, None, :]
    np.add.at(node_force, ties.face_nodes.ravel(), contrib.reshape(-1, 3))


@dataclass
class PseudoSource:
    """Static topology for pseudo-particle generation."""

    node_idx: np.ndarray        # candidate FE nodes
    elem_of_node: np.ndarray    # adjacent element per node (nearest centroid)
    node_mass: np.ndarray       # lumped masses of the candidates


def build_pseudo_source(mesh: HexMesh, node_mass) -> PseudoSource:
    """Map every mesh node to its nearest attached element (deterministic)."""
    n = mesh.n_nodes
    centroids = mesh.nodes[mesh.elems].mean(axis=1)
    best = np.full(n, -1, dtype=np.int64)
    bestd = np.full(n, np.inf)
    for e, conn in enumerate(mesh.elems):
        d = np.linalg.norm(mesh.nodes[conn] - centroids[e], axis=1)
        closer = d < bestd[conn]
        best[conn[closer]] = e
        bestd[conn[closer]] = d[closer]
    return PseudoSource(
        node_idx=np.arange(n, dtype=np.int64),
        elem_of_node=best,
        node_mass=np.asarray(node_mass, dtype=float),
    )


def pseudo_particles(src: PseudoSource, mesh: HexMesh, sph_pos, sph_h,
                     h0: float, cs0: float):
    """Per-step pseudo-particle arrays for FE nodes within kernel range.

    Stress is the adjacent element's centroid stress; mass is the nodal
    lumped mass; h is the SPH reference smoothing length.
    """
    if len(sph_pos) == 0:
        return None
    cutoff = 2.0 * max(float(np.max(sph_h)), h0)
    tree = cKDTree(sph_pos)
    d, _ = tree.query(mesh.nodes[src.node_idx], k=1,
                      distance_upper_bound=cutoff)
    near = np.isfinite(d)
    if not np.any(near):
        return None
    nid = src.node_idx[near]
    eid = src.elem_of_node[near]
    sigma = mesh.state.full_stress()[eid]
    # eroded adjacent elements contribute no stress
    sigma[~mesh.active[eid]] = 0.0
    return {
        "node_idx": nid,
        "pos": mesh.nodes[nid].copy(),
        "vel": mesh.vel[nid].copy(),
        "mass": src.node_mass[nid].copy(),
        "rho": mesh.rho[eid].copy(),
        "h": np.full(len(nid), h0),
        "sigma": sigma,
        "e": np.zeros(len(nid)),
        "cs": np.full(len(nid), cs0),
    }
