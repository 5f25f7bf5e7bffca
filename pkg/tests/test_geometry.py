import math

import numpy as np
import pytest

from impactsph import fem, geometry
from impactsph.materials import BUILTIN_CARDS

ARNE = BUILTIN_CARDS["arne"]
WELDOX = BUILTIN_CARDS["weldox-460e"]


def _blunt(d=0.01, L=0.08):
    return geometry.ProjectileSpec("blunt", diameter=d, total_length=L)


# ---------------------------------------------------------------------------
# projectile specs and volumes

def test_blunt_cylinder_mass():
    spec = _blunt()
    mesh = geometry.build_projectile_mesh(spec, 2.0e-3, ARNE)
    full_mass = 4.0 * mesh.total_mass()          # quarter model
    expect = 7850.0 * math.pi * 0.005**2 * 0.08  # 49.32 g
    assert expect == pytest.approx(49.32e-3, rel=1e-3)
    assert full_mass == pytest.approx(expect, rel=0.02)


def test_conical_requires_nose_length():
    with pytest.raises(geometry.GeometryError):
        geometry.ProjectileSpec("conical", diameter=0.01, total_length=0.08,
                                nose_length=0.0)


def test_unknown_nose_shape_rejected():
    with pytest.raises(geometry.GeometryError):
        geometry.ProjectileSpec("hemispherical", diameter=0.01,
                                total_length=0.08)


def test_ogival_volume_matches_quadrature():
    spec = geometry.ProjectileSpec("ogival", diameter=0.01, total_length=0.08,
                                   nose_length=0.015, ogive_caliber_radius=3.0)
    mesh = geometry.build_projectile_mesh(spec, 1.0e-3, ARNE)
    vol_mesh = 4.0 * fem.element_volumes(mesh.nodes[mesh.elems]).sum()
    assert vol_mesh == pytest.approx(geometry.analytic_volume(spec), rel=0.02)


def test_conical_volume_matches_closed_form():
    spec = geometry.ProjectileSpec("conical", diameter=0.01, total_length=0.08,
                                   nose_length=0.02)
    R, L, Ln = 0.005, 0.08, 0.02
    closed = math.pi * R * R * (L - Ln) + math.pi * R * R * Ln / 3.0
    assert geometry.analytic_volume(spec) == pytest.approx(closed, rel=1e-6)
    mesh = geometry.build_projectile_mesh(spec, 1.0e-3, ARNE)
    vol_mesh = 4.0 * fem.element_volumes(mesh.nodes[mesh.elems]).sum()
    assert vol_mesh == pytest.approx(closed, rel=0.02)


# ---------------------------------------------------------------------------
# target lattice

def _target(dp=2.0e-3, r_sph=24.0e-3, r_out=100.0e-3, t=12.0e-3):
    return geometry.TargetSpec(thickness=t, sph_radius=r_sph,
                               outer_radius=r_out, particle_distance=dp)


def test_lattice_count_quarter_disc():
    pos, _ = geometry.target_lattice(_target())
    # pi*24^2/(4*2^2)*6 ~ 678 expected from area / cell-count estimate
    assert abs(len(pos) - 678) <= 0.05 * 678


def test_lattice_particle_mass():
    spec = geometry.TargetSpec(thickness=12e-3, sph_radius=24e-3,
                               outer_radius=100e-3, particle_distance=0.6e-3)
    mass = WELDOX.rho0 * spec.particle_distance**3
    assert mass == pytest.approx(1.6956e-6, rel=1e-4)


def test_lattice_inside_quarter_disc_and_plate():
    spec = _target()
    pos, touches = geometry.target_lattice(spec)
    r = np.hypot(pos[:, 0], pos[:, 1])
    assert np.all(r < spec.sph_radius)
    assert np.all((pos[:, 2] > 0.0) & (pos[:, 2] < spec.thickness))
    assert np.all(pos[:, 0] > 0.0) and np.all(pos[:, 1] > 0.0)
    assert 0 < np.count_nonzero(touches) < len(pos)


def test_pure_sph_mode_no_annulus():
    spec = geometry.TargetSpec(thickness=12e-3, sph_radius=100e-3,
                               outer_radius=100e-3, particle_distance=2e-3)
    assert spec.pure_sph
    pos, mass, annulus, (idx, _, _) = geometry.discretize_target(
        spec, {"xz", "yz"}, WELDOX)
    assert annulus is None
    assert len(idx) == 0
    assert len(pos) == len(mass)


def test_particle_budget_enforced():
    spec = geometry.TargetSpec(thickness=12e-3, sph_radius=24e-3,
                               outer_radius=100e-3, particle_distance=0.2e-3)
    with pytest.raises(geometry.ResourceError):
        geometry.target_lattice(spec, max_particles=10_000)


def test_target_spec_validation():
    with pytest.raises(geometry.GeometryError):
        geometry.TargetSpec(thickness=12e-3, sph_radius=0.0,
                            outer_radius=0.1, particle_distance=2e-3)
    with pytest.raises(geometry.GeometryError):
        geometry.TargetSpec(thickness=12e-3, sph_radius=0.2,
                            outer_radius=0.1, particle_distance=2e-3)
    with pytest.raises(geometry.GeometryError):
        # sph_radius must be a whole number of particle spacings
        geometry.TargetSpec(thickness=12e-3, sph_radius=24.7e-3,
                            outer_radius=0.1, particle_distance=2e-3)


# ---------------------------------------------------------------------------
# coupled discretization

def test_annulus_interface_pairing():
    spec = _target()
    pos, _, annulus, (idx, face_of, faces) = geometry.discretize_target(
        spec, {"xz", "yz"}, WELDOX)
    assert annulus is not None and annulus.n_elems > 0
    assert len(idx) == len(face_of) > 0
    assert faces.shape[1] == 4
    # every paired particle sits at the sph/annulus boundary radius band
    r = np.hypot(pos[idx, 0], pos[idx, 1])
    assert np.all(r > spec.sph_radius - 2 * spec.particle_distance)


def test_annulus_mass_positive_and_graded():
    spec = _target()
    annulus, faces = geometry.build_annulus_mesh(spec, WELDOX)
    vols = fem.element_volumes(annulus.nodes[annulus.elems])
    assert np.all(vols > 0.0)
    r = np.hypot(annulus.nodes[:, 0], annulus.nodes[:, 1])
    assert r.max() == pytest.approx(spec.outer_radius, rel=1e-9)


def test_ghost_planes_for_symmetry():
    planes = geometry.ghost_planes_for({"xz", "yz"})
    assert sorted(p.axis for p in planes) == [0, 1]
    assert geometry.ghost_planes_for(set()) == ()


def test_build_model_projectile_below_plate(tiny_scenario):
    model = geometry.build_model(tiny_scenario, tiny_scenario.cards())
    assert model.projectile.nodes[:, 2].max() < 0.0
    assert model.diagnostics["n_particles"] == len(model.particle_pos)
    assert model.diagnostics["projectile_mass_quarter"] == pytest.approx(
        49.32e-3 / 4.0, rel=0.02)
