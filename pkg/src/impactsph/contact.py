"""Penalty contact of target points against projectile surface facets.

The projectile exterior is triangulated once (topology is static); facet
positions refresh from the nodes each step.  Detection finds points
inside the facet slab; the deepest candidate facet wins per point.
Normal forces are linear penalty springs, tangential forces are Coulomb
friction with elastic regularization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .fem import HexMesh

# local node ids of the 6 hex faces, outward for the standard ordering
_FACES = np.array([
    [0, 3, 2, 1],   # z-
    [4, 5, 6, 7],   # z+
    [0, 1, 5, 4],   # y-
    [2, 3, 7, 6],   # y+
    [0, 4, 7, 3],   # x-
    [1, 2, 6, 5],   # x+
])


@dataclass
class ContactSurface:
    tris: np.ndarray          # (T,3) node ids
    elem_of_tri: np.ndarray   # parent element per triangle
    stiffness: np.ndarray     # (T,) penalty stiffness, N/m


def extract_surface_triangles(mesh: HexMesh, exclude_planes=(),
                              stiffness_scale: float = 0.1,
                              plane_tol: float = 1e-9) -> ContactSurface:
    """Boundary quads (faces used once), split into deterministic triangles.

    exclude_planes: iterable of (axis, coord) symmetry planes whose faces
    are interior in the full model and never contact anything.
    """
    quads = []
    owners = []
    for e, conn in enumerate(mesh.elems):
        for loc in _FACES:
            quads.append(conn[loc])
            owners.append(e)
    quads = np.array(quads, dtype=np.int64)
    owners = np.array(owners, dtype=np.int64)
    key = np.sort(quads, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    boundary = counts[inv] == 1
    quads, owners = quads[boundary], owners[boundary]

    if len(exclude_planes):
        keep = np.ones(len(quads), dtype=bool)
        for axis, coord in exclude_planes:
            on_plane = np.all(
                np.abs(mesh.nodes[quads][:, :, axis] - coord) < plane_tol, axis=1
            )
            keep &= ~on_plane
        quads, owners = quads[keep], owners[keep]

    tris = np.concatenate([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
    tri_owner = np.concatenate([owners, owners])

    # orient outward: normal away from the parent element centroid
    centroids = mesh.nodes[mesh.elems[tri_owner]].mean(axis=1)
    p = mesh.nodes[tris]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("td,td->t", nrm, p.mean(axis=1) - centroids) < 0.0
    tris[flip] = tris[flip][:, ::-1]

    # penalty stiffness 0.1 * K*A/l per facet from the parent element
    K = mesh.card.bulk_modulus
    vols = mesh.V0[tri_owner]
    p = mesh.nodes[tris]
    area = 0.5 * np.linalg.norm(
        np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1
    )
    l_char = vols ** (1.0 / 3.0)
    k = stiffness_scale * K * 2.0 * area / l_char  # 2A ~ parent quad area
    return ContactSurface(tris=tris, elem_of_tri=tri_owner, stiffness=k)


def _tri_geometry(node_pos, tris):
    a = node_pos[tris[:, 0]]
    b = node_pos[tris[:, 1]]
    c = node_pos[tris[:, 2]]
    nrm = np.cross(b - a, c - a)
    area2 = np.linalg.norm(nrm, axis=1)
    nhat = nrm / np.maximum(area2, 1e-300)[:, None]
    return a, b, c, nhat


def detect_contacts_brute(surface: ContactSurface, node_pos, points,
                          slab_depth: float, edge_tol: float = 1e-9):
    """All-pairs oracle.  Returns (point_idx, tri_idx, depth, normal, bary)."""
    a, b, c, nhat = _tri_geometry(node_pos, surface.tris)
    P = len(points)
    T = len(surface.tris)
    if P == 0 or T == 0:
        return _empty_contacts()
    rel = points[:, None, :] - a[None, :, :]
    dist = np.einsum("ptd,td->pt", rel, nhat)         # signed, + outside
    depth = -dist
    cand = (depth > 0.0) & (depth < slab_depth)
    pi, ti = np.nonzero(cand)
    if len(pi) == 0:
        return _empty_contacts()
    bary = _barycentric(points[pi] + depth[pi, ti][:, None] * nhat[ti],
                        a[ti], b[ti], c[ti])
    inside = np.all(bary >= -edge_tol, axis=1)
    pi, ti, bary = pi[inside], ti[inside], bary[inside]
    return _deepest_per_point(pi, ti, depth[pi, ti], nhat, bary)


def detect_contacts(surface: ContactSurface, node_pos, points,
                    slab_depth: float, edge_tol: float = 1e-9):
    """Tree-accelerated detection; exact same pairs as the brute oracle."""
    a, b, c, nhat = _tri_geometry(node_pos, surface.tris)
    if len(points) == 0 or len(surface.tris) == 0:
        return _empty_contacts()
    tp = node_pos[surface.tris]                        # (T,3,3)
    centroids = tp.mean(axis=1)
    # any point in a facet's slab lies within (circumdistance + slab)
    # of its centroid
    reach = np.linalg.norm(tp - centroids[:, None, :], axis=2).max(axis=1) \
        + slab_depth
    tree = cKDTree(points)
    hits = tree.query_ball_point(centroids, reach)
    counts = np.fromiter((len(hl) for hl in hits), dtype=np.int64,
                         count=len(hits))
    if counts.sum() == 0:
        return _empty_contacts()
    ti = np.repeat(np.arange(len(tp)), counts)
    pi = np.concatenate([np.asarray(hl, dtype=np.int64) for hl in hits
                         if len(hl)])

    rel = points[pi] - a[ti]
    depth = -np.einsum("pd,pd->p", rel, nhat[ti])
    cand = (depth > 0.0) & (depth < slab_depth)
    pi, ti, depth = pi[cand], ti[cand], depth[cand]
    if len(pi) == 0:
        return _empty_contacts()
    bary = _barycentric(points[pi] + depth[:, None] * nhat[ti],
                        a[ti], b[ti], c[ti])
    inside = np.all(bary >= -edge_tol, axis=1)
    pi, ti, depth, bary = pi[inside], ti[inside], depth[inside], bary[inside]
    return _deepest_per_point(pi, ti, depth, nhat, bary)


def _barycentric(p, a, b, c):
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = np.einsum("pd,pd->p", v0, v0)
    d01 = np.einsum("pd,pd->p", v0, v1)
    d11 = np.einsum("pd,pd->p", v1, v1)
    d20 = np.einsum("pd,pd->p", v2, v0)
    d21 = np.einsum("pd,pd->p", v2, v1)
    den = np.maximum(d00 * d11 - d01 * d01, 1e-300)
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return np.stack([1.0 - v - w, v, w], axis=-1)


def _empty_contacts():
    z = np.empty(0, dtype=np.int64)
    return z, z, np.empty(0), np.empty((0, 3)), np.empty((0, 3))


def _deepest_per_point(pi, ti, depth, nhat, bary):
    if len(pi) == 0:
        return _empty_contacts()
    # deepest facet wins; stable tie-break on triangle index
    order = np.lexsort((ti, -depth, pi))
    pi, ti, depth, bary = pi[order], ti[order], depth[order], bary[order]
    first = np.ones(len(pi), dtype=bool)
    first[1:] = pi[1:] != pi[:-1]
    pi, ti, depth, bary = pi[first], ti[first], depth[first], bary[first]
    return pi, ti, depth, nhat[ti].copy(), bary


def contact_forces(surface: ContactSurface, node_pos, node_vel,
                   points, point_vel, pairs, mu: float, dt: float,
                   point_mass=None, damping: float = 0.0):
    """Penalty + Coulomb forces for detected pairs.

    With `point_mass` and `damping` > 0, a normal dashpot at that
    fraction of critical damping removes the spurious energy an
    undamped penalty spring pumps into an explicit integration.
    Returns (f_points (P,3), f_nodes (n,3), friction_work (<= 0, J),
    damping_work (<= 0, J), max_depth,
    total_normal_force_on_points (3,)).
    """
    pi, ti, depth, nhat, bary = pairs
    f_points = np.zeros_like(points)
    f_nodes = np.zeros_like(node_pos)
    if len(pi) == 0:
        return f_points, f_nodes, 0.0, 0.0, 0.0, np.zeros(3)

    k = surface.stiffness[ti]
    fn_mag = k * depth

    # slip velocity relative to the facet, tangential part
    tv = node_vel[surface.tris[ti]]
    v_facet = np.einsum("pc,pcd->pd", bary, tv)
    v_rel = point_vel[pi] - v_facet
    vn_rel = np.einsum("pd,pd->p", v_rel, nhat)
    v_slip = v_rel - vn_rel[:, None] * nhat
    slip_mag = np.linalg.norm(v_slip, axis=1)

    damp_work = 0.0
    if damping > 0.0 and point_mass is not None:
        c = damping * 2.0 * np.sqrt(k * point_mass[pi])
        fn_damped = np.maximum(fn_mag - c * vn_rel, 0.0)  # no adhesion
        # work the damping term does on the points (negative: removed)
        damp_work = float(np.sum((fn_damped - fn_mag) * vn_rel) * dt)
        damp_work = min(damp_work, 0.0)
        fn_mag = fn_damped
    f_n = fn_mag[:, None] * nhat     # pushes the point outward

    f_t = np.zeros_like(f_n)
    fric_work = 0.0
    if mu > 0.0:
        ft_mag = np.minimum(mu * fn_mag, k * slip_mag * dt)
        active = slip_mag > 1e-12
        dirs = np.zeros_like(v_slip)
        dirs[active] = v_slip[active] / slip_mag[active, None]
        f_t = -ft_mag[:, None] * dirs
        fric_work = float(np.sum(np.einsum("pd,pd->p", f_t, v_slip)) * dt)

    f_pair = f_n + f_t
    np.add.at(f_points, pi, f_pair)
    reaction = -(bary[:, :, None] * f_pair[:, None, :])
    np.add.at(f_nodes, surface.tris[ti].ravel(), reaction.reshape(-1, 3))
    total_fn = f_n.sum(axis=0)
    return (f_points, f_nodes, fric_work, damp_work, float(depth.max()),
            total_fn)


def friction_force(f_n, nhat, v_slip, mu: float, k_t: float, dt: float):
    """Single-pair Coulomb force with elastic regularization (test surface)."""
    fn_mag = float(np.linalg.norm(f_n))
    slip_mag = float(np.linalg.norm(v_slip))
    if mu <= 0.0 or slip_mag == 0.0:
        return np.zeros(3)
    mag = min(mu * fn_mag, k_t * slip_mag * dt)
    return -mag * np.asarray(v_slip) / slip_mag
