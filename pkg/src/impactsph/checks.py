"""Self-verification suites, shared by the CLI `verify` command and tests.

Each check returns a dict {name, passed, detail}; run_all() collects
them.  These are quick sanity audits, not the full test suite.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend, fem, kernel, materials, sph
from .materials import BUILTIN_CARDS, StressStateArray


def _result(name, passed, detail=""):
    return {"name": name, "passed": bool(passed), "detail": detail}


def check_kernel_normalization() -> dict:
    """Volume integral of W equals 1 in 1D/2D/3D."""
    worst = 0.0
    for dim in (1, 2, 3):
        kappa = kernel.normalization(dim)
        closed = {1: 2.0 / 3.0, 2: 10.0 / (7.0 * math.pi), 3: 1.0 / math.pi}[dim]
        worst = max(worst, abs(kappa - closed) / closed)
    return _result("kernel normalization", worst < 1e-9,
                   f"max relative error {worst:.2e}")


def check_kernel_partition_of_unity() -> dict:
    """Sum of m_j/rho_j W_ij over a bulk lattice stays within 2% of 1."""
    dp = 1.0
    pos = sph.lattice_block(dp, (9, 9, 9))
    center = np.argmin(np.sum((pos - pos.mean(axis=0)) ** 2, axis=1))
    r = np.linalg.norm(pos - pos[center], axis=1)
    w = kernel.kernel_value(r, 1.2 * dp, 3)
    total = float(np.sum(w) * dp**3)
    return _result("kernel partition of unity", abs(total - 1.0) < 0.02,
                   f"lattice sum {total:.5f}")


def check_kernel_continuity() -> dict:
    """Profile and slope continuous across the piece boundaries."""
    eps = 1e-9
    gaps = [
        abs(kernel.shape(1.0 - eps) - kernel.shape(1.0 + eps)),
        abs(kernel.shape(2.0 - eps) - kernel.shape(2.0 + eps)),
        abs(kernel.shape_deriv(1.0 - eps) - kernel.shape_deriv(1.0 + eps)),
        abs(kernel.shape_deriv(2.0 - eps) - kernel.shape_deriv(2.0 + eps)),
    ]
    worst = max(gaps)
    return _result("kernel branch continuity", worst < 1e-8,
                   f"max jump {worst:.2e}")


def check_material_flow_stress() -> dict:
    """Reference flow-stress value for the bundled steel card."""
    card = BUILTIN_CARDS["weldox-460e"]
    got = float(materials.jc_flow_stress(card, 0.1, 1.0, card.T_room))
    want = card.A + card.B * 0.1**card.a
    ok = abs(got - want) < 1e-6 * want
    return _result("flow stress evaluation", ok, f"{got / 1e6:.2f} MPa")


def check_material_rotation_invariance() -> dict:
    """Pure spin leaves the stress invariants unchanged."""
    card = BUILTIN_CARDS["weldox-460e"]
    state = StressStateArray.zeros(1, T_room=card.T_room)
    state.S[0] = np.diag([2e8, -1e8, -1e8])
    mises0 = float(state.von_mises()[0])
    W = np.array([[[0.0, -500.0, 0.0], [500.0, 0.0, 0.0], [0.0, 0.0, 0.0]]])
    for _ in range(100):
        materials.update_stress(state, card, W, 1e-6,
                                rho=np.array([card.rho0]))
    drift = abs(float(state.von_mises()[0]) - mises0) / mises0
    return _result("stress rotation invariance", drift < 1e-7,
                   f"von Mises drift {drift:.2e}")


def check_fem_patch() -> dict:
    """Affine velocity field reproduces its gradient exactly."""
    card = BUILTIN_CARDS["arne"]
    mesh = fem.block_mesh(card, 2, 2, 2, 1.0, 1.0, 1.0)
    A = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 0.25], [0.0, 1.5, -0.5]])
    v = mesh.nodes @ A.T
    L, _, _ = fem.velocity_gradients(mesh.nodes[mesh.elems], v[mesh.elems])
    err = float(np.max(np.abs(L - A)))
    return _result("element patch consistency", err < 1e-9,
                   f"max gradient error {err:.2e}")


def check_fem_mass() -> dict:
    """Lumped nodal masses sum to the exact block mass."""
    card = BUILTIN_CARDS["arne"]
    mesh = fem.block_mesh(card, 3, 2, 4, 0.3, 0.2, 0.4)
    total = float(np.sum(fem.lumped_mass(mesh)))
    want = card.rho0 * 0.3 * 0.2 * 0.4
    return _result("lumped mass total", abs(total - want) < 1e-9 * want,
                   f"{total:.6f} kg vs {want:.6f} kg")


def check_fem_hourglass() -> dict:
    """Hourglass forces vanish for an affine velocity field."""
    card = BUILTIN_CARDS["arne"]
    mesh = fem.block_mesh(card, 2, 2, 2, 1.0, 1.0, 1.0)
    A = np.array([[0.1, 2.0, -1.0], [0.3, -0.7, 0.2], [1.1, 0.0, -0.4]])
    v = mesh.nodes @ A.T
    f = fem.hourglass_force(
        mesh.nodes[mesh.elems], v[mesh.elems],
        np.full(mesh.n_elems, card.rho0), mesh.V0, card.sound_speed,
    )
    worst = float(np.max(np.abs(f)))
    return _result("hourglass orthogonality", worst < 1e-6,
                   f"max spurious force {worst:.2e} N")


def check_momentum_conservation(steps: int = 100) -> dict:
    """Two colliding particle blocks conserve linear momentum."""
    card = BUILTIN_CARDS["weldox-460e"]
    dp = 1e-3
    a = sph.lattice_block(dp, (4, 4, 4))
    b = sph.lattice_block(dp, (4, 4, 4), origin=(0.0, 0.0, 4.5 * dp))
    pos = np.concatenate([a, b])
    ps = sph.uniform_system(pos, dp, card.rho0, card.sound_speed)
    ps.vel[len(a):, 2] = -50.0
    params = sph.SPHParams()
    state = StressStateArray.zeros(ps.n, T_room=card.T_room)
    integ = sph.LeapfrogIntegrator()
    p0 = np.sum(ps.mass[:, None] * ps.vel, axis=0)
    scale = float(np.sum(ps.mass * np.linalg.norm(ps.vel, axis=1))) or 1.0
    kind = np.zeros(ps.n, dtype=np.uint8)
    worst = 0.0
    for _ in range(steps):
        Rart = sph.artificial_stress_tensors(ps.sigma, ps.rho, params.eps_as)
        rates = sph.evaluate_rates(ps.pos, ps.vel, ps.mass, ps.rho, ps.h,
                                   ps.sigma, ps.cs, kind, params, ps.dp0,
                                   Rart=Rart)
        dt = sph.stable_timestep(ps.h, ps.cs, ps.vel, vsig=rates["vsig"])
        L = rates["L"]
        dedt = rates["dedt_pair"]
        sph.leapfrog_step(ps, rates["acc"], rates["drho"], dedt,
                          np.trace(L, axis1=1, axis2=2), dt, integ, params)
        materials.update_stress(state, card, L, dt, rho=ps.rho,
                                rho_ref=ps.rho_ref)
        ps.sigma = state.full_stress()
        p = np.sum(ps.mass[:, None] * ps.vel, axis=0)
        worst = max(worst, float(np.max(np.abs(p - p0))) / scale)
    return _result("pairwise momentum conservation", worst < 1e-10 * steps,
                   f"relative drift {worst:.2e} over {steps} steps")


def check_backend_agreement() -> dict:
    """Compiled and numpy pair kernels agree on a random cloud."""
    if not backend.COMPILED_AVAILABLE:
        return _result("backend agreement", True,
                       "compiled extension not built; numpy lane only")
    rng = np.random.default_rng(7)
    n = 400
    pos = rng.uniform(0.0, 5e-3, (n, 3))
    vel = rng.normal(0.0, 10.0, (n, 3))
    h = np.full(n, 0.6e-3)
    mass = np.full(n, 1e-6)
    rho = np.full(n, 7850.0)
    sigma = rng.normal(0.0, 1e7, (n, 3, 3))
    sigma = 0.5 * (sigma + np.transpose(sigma, (0, 2, 1)))
    cs = np.full(n, 5000.0)
    kind = np.zeros(n, dtype=np.uint8)
    from . import _pairs_py
    pi, pj = backend.build_pairs(pos, h)
    qi, qj = _pairs_py.build_pairs(pos, h)
    if not (np.array_equal(pi, qi) and np.array_equal(pj, qj)):
        return _result("backend agreement", False, "pair lists differ")
    Rart = sph.artificial_stress_tensors(sigma, rho, 0.3)
    a1 = backend.strain_rates(pos, vel, mass, rho, h, kind, pi, pj)
    a2 = _pairs_py.strain_rates(pos, vel, mass, rho, h, kind, pi, pj)
    b1 = backend.momentum_energy_rates(pos, vel, mass, rho, h, sigma, cs,
                                       Rart, kind, pi, pj, 0.5e-3)
    b2 = _pairs_py.momentum_energy_rates(pos, vel, mass, rho, h, sigma, cs,
                                         Rart, kind, pi, pj, 0.5e-3)
    errs = [np.max(np.abs(x - y) / (np.max(np.abs(y)) or 1.0))
            for x, y in list(zip(a1, a2)) + list(zip(b1, b2))]
    worst = float(max(errs))
    return _result("backend agreement", worst < 1e-10,
                   f"max relative deviation {worst:.2e}")


ALL_CHECKS = (
    check_kernel_normalization,
    check_kernel_partition_of_unity,
    check_kernel_continuity,
    check_material_flow_stress,
    check_material_rotation_invariance,
    check_fem_patch,
    check_fem_mass,
    check_fem_hourglass,
    check_momentum_conservation,
    check_backend_agreement,
)


def run_all() -> list:
    return [chk() for chk in ALL_CHECKS]
