"""Simulation driver: explicit time loop, histories, limit searches, sweeps.

The per-step sequence is: timestep -> ghosts/pseudo-particles -> SPH pair
sums -> contact -> FE internal forces -> tie force exchange -> integrate ->
material update -> slave tied particles.  Runs terminate at end_time, when
the projectile is clear of the target by two diameters, or when contact has
been absent long enough to measure a residual velocity.
"""

from __future__ import annotations

import csv
import math
import os
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import contact, coupling, fem, geometry, materials, sph
from .materials import StressStateArray
from .scenario import Scenario, ScenarioError, with_overrides

OUTCOMES = ("perforated", "embedded", "rebounded")

HISTORY_COLUMNS = (
    "time", "proj_velocity", "kinetic_energy", "internal_energy",
    "friction_dissipated", "hourglass_dissipated", "contact_force",
    "max_penetration", "n_particles", "n_active_elements",
)

SNAPSHOT_COLUMNS = (
    "id", "x", "y", "z", "vx", "vy", "vz", "rho", "sigma_eq", "eps_p",
    "T", "kind",
)


class DriverError(RuntimeError):
    pass


class BracketError(RuntimeError):
    """Ballistic-limit bracket could not be established."""


# ---------------------------------------------------------------------------
# history

@dataclass
class History:
    """Global time series; one row per recording interval."""

    rows: list = field(default_factory=list)
    terminated: str = ""        # separated | clear | end-time | wall-time

    def append(self, **values):
        if set(values) != set(HISTORY_COLUMNS):
            missing = set(HISTORY_COLUMNS) - set(values)
            raise DriverError(f"history row missing columns {sorted(missing)}")
        if self.rows and values["time"] <= self.rows[-1]["time"]:
            raise DriverError("history timestamps must strictly increase")
        self.rows.append(dict(values))

    def column(self, name) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def __len__(self):
        return len(self.rows)


def write_history(history: History, path):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_COLUMNS)
            for row in history.rows:
                w.writerow([_fmt(row[c]) for c in HISTORY_COLUMNS])
    except OSError as err:
        raise DriverError(f"cannot write history to {path}: {err}") from None


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def residual_velocity(history: History, samples: int = 20) -> float:
    """Mean projectile velocity over the last `samples` contact-free rows."""
    if len(history) < samples:
        raise DriverError(
            f"history has {len(history)} rows, need {samples} for a residual"
        )
    tail = history.rows[-samples:]
    if any(row["contact_force"] != 0.0 for row in tail):
        raise DriverError(
            "unterminated: contact force nonzero within the last "
            f"{samples} samples; no residual velocity"
        )
    return float(np.mean([row["proj_velocity"] for row in tail]))


# ---------------------------------------------------------------------------
# snapshots

def _node_field(mesh: fem.HexMesh, elem_values) -> np.ndarray:
    """Average an element quantity onto nodes (for snapshot output)."""
    out = np.zeros(mesh.n_nodes)
    cnt = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elems.ravel(), np.repeat(elem_values, 8))
    np.add.at(cnt, mesh.elems.ravel(), 1.0)
    return out / np.maximum(cnt, 1.0)


def write_snapshot(sim: "Simulation", path):
    """Point-cloud CSV of every particle and FE node (12 fixed columns)."""
    blocks = []
    if sim.ps is not None:
        st = sim.pstate
        blocks.append((sim.ps.pos, sim.ps.vel, sim.ps.rho, st.von_mises(),
                       st.eps_p, st.T, "sph"))
    for mesh in sim.meshes():
        blocks.append((
            mesh.nodes, mesh.vel, _node_field(mesh, mesh.rho),
            _node_field(mesh, mesh.state.von_mises()),
            _node_field(mesh, mesh.state.eps_p),
            _node_field(mesh, mesh.state.T), "fe-node",
        ))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SNAPSHOT_COLUMNS)
            pid = 0
            for pos, vel, rho, seq, epsp, T, kind in blocks:
                for k in range(len(pos)):
                    w.writerow([pid, _fmt(pos[k, 0]), _fmt(pos[k, 1]),
                                _fmt(pos[k, 2]), _fmt(vel[k, 0]),
                                _fmt(vel[k, 1]), _fmt(vel[k, 2]),
                                _fmt(rho[k]), _fmt(seq[k]), _fmt(epsp[k]),
                                _fmt(T[k]), kind])
                    pid += 1
    except OSError as err:
        raise DriverError(f"cannot write snapshot to {path}: {err}") from None


def read_snapshot(path) -> dict:
    """Re-read a snapshot CSV into arrays (round-trip checker)."""
    cols = {c: [] for c in SNAPSHOT_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != SNAPSHOT_COLUMNS:
            raise DriverError(f"unexpected snapshot header in {path}")
        for row in reader:
            for c in SNAPSHOT_COLUMNS:
                cols[c].append(row[c])
    out = {c: np.array(cols[c], dtype=float)
           for c in SNAPSHOT_COLUMNS if c not in ("id", "kind")}
    out["id"] = np.array(cols["id"], dtype=np.int64)
    out["kind"] = np.array(cols["kind"])
    return out


# ---------------------------------------------------------------------------
# simulation

class Simulation:
    """One scenario instance with mutable state and a step() method."""

    def __init__(self, scenario: Scenario, threads: int = 1,
                 out_dir: str | None = None):
        self.scn = scenario
        self.num = scenario.numerics
        self.out_dir = out_dir
        cards = scenario.cards()
        self.t_card = cards[scenario.target.material_id]
        self.p_card = cards[scenario.projectile.material_id]
        self.mode = self.num.mode
        self.params = sph.SPHParams(
            alpha=self.num.artificial_viscosity_alpha,
            beta=self.num.artificial_viscosity_beta,
            eps_as=self.num.artificial_stress_eps,
            n_as=self.num.artificial_stress_n,
            cfl=scenario.cfl,
            h_factor=self.num.h_factor,
            dt_floor=self.num.dt_floor,
            threads=threads,
        )
        self.time = 0.0
        self.step_count = 0
        self.max_depth_ever = 0.0
        self.friction_dissipated = 0.0
        self.hourglass_dissipated = 0.0
        self.contact_dissipated = 0.0
        self.ever_contact = False
        self._contact_force = 0.0
        self._last_depth = 0.0
        self._integrator = sph.LeapfrogIntegrator()
        self._fe_started = False

        if self.mode == "fem":
            self._build_fem_target(cards)
        else:
            self._build_coupled(cards)

        # projectile: rigid-ish FE body flying in +z
        self.proj = self.model_projectile
        self.proj_mass = fem.lumped_mass(self.proj)
        self.proj.vel[:, 2] = scenario.initial_velocity
        self.proj_fixed = self._symmetry_dofs(self.proj.nodes)
        self.surface = contact.extract_surface_triangles(
            self.proj, exclude_planes=self._plane_list(),
            stiffness_scale=self.num.contact_stiffness_scale,
        )
        self.slab = self.num.contact_thickness_factor \
            * scenario.target.particle_distance
        self._vsig = None if self.ps is None else np.zeros(self.ps.n)
        self.e0 = self.kinetic_energy()

    # -- construction ------------------------------------------------------

    def _plane_list(self):
        planes = geometry.ghost_planes_for(self.scn.symmetry_planes)
        return [(p.axis, p.coord) for p in planes]

    def _symmetry_dofs(self, nodes, clamp_radius=None, tol=1e-9):
        fixed = np.zeros((len(nodes), 3), dtype=bool)
        for p in geometry.ghost_planes_for(self.scn.symmetry_planes):
            fixed[np.abs(nodes[:, p.axis] - p.coord) < tol, p.axis] = True
        if clamp_radius is not None:
            r = np.hypot(nodes[:, 0], nodes[:, 1])
            fixed[r >= clamp_radius - tol, :] = True
        return fixed

    def _build_coupled(self, cards):
        scn = self.scn
        if self.mode == "sph" and not scn.target.pure_sph:
            raise ScenarioError(
                "mode 'sph' needs sph_radius = outer_radius "
                "(the whole target as particles)"
            )
        model = geometry.build_model(scn, cards,
                                     max_particles=self.num.max_particles)
        self.model = model
        self.model_projectile = model.projectile
        self.planes = model.ghost_planes
        dp = scn.target.particle_distance
        cs0 = self.t_card.sound_speed
        ps = sph.ParticleSystem(
            pos=model.particle_pos.copy(),
            vel=np.zeros_like(model.particle_pos),
            mass=model.particle_mass.copy(),
            rho=np.full(len(model.particle_pos), self.t_card.rho0),
            h=np.full(len(model.particle_pos), self.num.h_factor * dp),
            sigma=np.zeros((len(model.particle_pos), 3, 3)),
            e=np.zeros(len(model.particle_pos)),
            cs=np.full(len(model.particle_pos), cs0),
            dp0=dp,
        )
        # uniform reference density: p(t=0) = 0, and the momentum sum's
        # sigma/rho^2 weights stay consistent at free surfaces and at the
        # tied interface, where a summation start would sit far below
        # rho0 and overweight boundary stresses
        ps.interface[model.interface_idx] = True
        self.ps = ps
        self.pstate = StressStateArray.zeros(
            ps.n, T_room=getattr(self.t_card, "T_room", 293.0)
        )
        self.movable = ~ps.interface
        if self.mode == "sph":
            # no annulus: clamp an outer ring of particles instead
            r = np.hypot(ps.pos[:, 0], ps.pos[:, 1])
            self.movable &= r < scn.target.sph_radius - 1.5 * dp

        self.target_mesh = None
        self.annulus = model.annulus
        self.ties = None
        self.pseudo_src = None
        if self.annulus is not None:
            self.ann_mass = fem.lumped_mass(self.annulus)
            self.ann_fixed = self._symmetry_dofs(
                self.annulus.nodes, clamp_radius=scn.target.outer_radius
            )
            self.ties = coupling.build_interface_ties(
                ps.pos, model.interface_idx, model.face_of_particle,
                model.interface_faces, self.annulus.nodes,
            )
            self.pseudo_src = coupling.build_pseudo_source(
                self.annulus, self.ann_mass
            )

    def _build_fem_target(self, cards):
        """Target entirely as hexahedra with damage-driven erosion."""
        scn = self.scn
        dp = scn.target.particle_distance
        disc = geometry.ProjectileSpec(
            nose_shape="blunt",
            diameter=2.0 * scn.target.outer_radius,
            total_length=scn.target.thickness,
            material_id=scn.target.material_id,
        )
        res = min(2.0 * dp, scn.target.thickness / 2.0)
        mesh = geometry.build_projectile_mesh(disc, res, self.t_card)
        self.target_mesh = mesh
        self.target_mass = fem.lumped_mass(mesh)
        self.target_fixed = self._symmetry_dofs(
            mesh.nodes, clamp_radius=scn.target.outer_radius
        )
        self.ps = None
        self.pstate = None
        self.annulus = None
        self.ties = None
        self.pseudo_src = None
        self.planes = geometry.ghost_planes_for(scn.symmetry_planes)
        self.movable = None
        # the projectile still comes from the standard model builder
        resolution = min(scn.projectile.diameter / 4.0,
                         max(dp, scn.projectile.diameter / 10.0))
        proj = geometry.build_projectile_mesh(scn.projectile, resolution,
                                              self.p_card)
        standoff = 0.25 * dp
        proj.nodes[:, 2] -= proj.nodes[:, 2].max() + standoff
        self.model = None
        self.model_projectile = proj

    def meshes(self):
        out = []
        if self.annulus is not None:
            out.append(self.annulus)
        if self.target_mesh is not None:
            out.append(self.target_mesh)
        out.append(self.proj)
        return out

    # -- global measures ----------------------------------------------------

    def projectile_velocity(self) -> float:
        m = self.proj_mass
        return float(np.sum(m * self.proj.vel[:, 2]) / np.sum(m))

    def projectile_tip(self) -> float:
        return float(np.max(self.proj.nodes[:, 2]))

    def projectile_tail(self) -> float:
        return float(np.min(self.proj.nodes[:, 2]))

    def kinetic_energy(self) -> float:
        ke = 0.5 * np.sum(self.proj_mass
                          * np.sum(self.proj.vel**2, axis=1))
        if self.ps is not None:
            ke += 0.5 * np.sum(self.ps.mass * np.sum(self.ps.vel**2, axis=1))
        if self.annulus is not None:
            ke += 0.5 * np.sum(self.ann_mass
                               * np.sum(self.annulus.vel**2, axis=1))
        if self.target_mesh is not None:
            ke += 0.5 * np.sum(self.target_mass
                               * np.sum(self.target_mesh.vel**2, axis=1))
        return float(ke)

    def internal_energy(self) -> float:
        ie = 0.0
        if self.ps is not None:
            ie += float(np.sum(self.ps.mass * self.ps.e))
        for mesh in self.meshes():
            ie += float(np.sum(mesh.card.rho0 * mesh.V0 * mesh.e_int))
        return ie

    def energy_ledger(self) -> dict:
        """Closure of KE + IE + dissipation against the initial budget."""
        ke = self.kinetic_energy()
        ie = self.internal_energy()
        total = (ke + ie + self.friction_dissipated
                 + self.hourglass_dissipated + self.contact_dissipated)
        return {
            "kinetic": ke, "internal": ie,
            "friction": self.friction_dissipated,
            "hourglass": self.hourglass_dissipated,
            "contact": self.contact_dissipated,
            "initial": self.e0,
            "defect": total - self.e0,
        }

    def n_active_elements(self) -> int:
        return int(sum(np.count_nonzero(m.active) for m in self.meshes()))

    # -- stepping ------------------------------------------------------------

    def _timestep(self) -> float:
        elem = []
        for mesh in self.meshes():
            if np.any(mesh.active):
                lengths = mesh.char_lengths()[mesh.active]
                elem.append(lengths / mesh.card.sound_speed)
        elem_terms = np.concatenate(elem) if elem else None
        if self.ps is not None:
            return sph.stable_timestep(
                self.ps.h, self.ps.cs, self.ps.vel, vsig=self._vsig,
                cfl=self.scn.cfl, element_terms=elem_terms,
                dt_floor=self.num.dt_floor, step=self.step_count,
            )
        return sph.stable_timestep(
            np.empty(0), np.empty(0), np.empty((0, 3)),
            cfl=self.scn.cfl, element_terms=elem_terms,
            dt_floor=self.num.dt_floor, step=self.step_count,
        )

    def step(self) -> float:
        dt = self._timestep()
        if self.mode == "fem":
            self._step_fem(dt)
        else:
            self._step_coupled(dt)
        self.time += dt
        self.step_count += 1
        return dt

    def _fe_kick(self, mesh, mass, force, fixed, dt):
        factor = 0.5 if not self._fe_started else 1.0
        force = force.copy()
        force[fixed] = 0.0
        if not np.all(np.isfinite(force)):
            bad = np.nonzero(~np.isfinite(force).all(axis=1))[0]
            raise sph.NumericalError(
                f"non-finite nodal force at node {bad[0]} "
                f"(step {self.step_count})"
            )
        mesh.vel += factor * dt * force / mass[:, None]
        mesh.vel[fixed] = 0.0
        mesh.nodes += dt * mesh.vel

    def _step_coupled(self, dt):
        ps = self.ps
        num = self.num

        # pair sums over real + ghost + pseudo particles
        ghosts = sph.make_ghosts(ps, self.planes)
        pseudo = None
        if self.pseudo_src is not None:
            pseudo = coupling.pseudo_particles(
                self.pseudo_src, self.annulus, ps.pos, ps.h,
                h0=num.h_factor * ps.dp0, cs0=self.t_card.sound_speed,
            )
        parts = [(ps.pos, ps.vel, ps.mass, ps.rho, ps.h, ps.sigma, ps.e,
                  ps.cs, np.full(ps.n, sph.KIND_REAL, dtype=np.uint8))]
        ng = len(ghosts["mass"])
        if ng:
            parts.append((ghosts["pos"], ghosts["vel"], ghosts["mass"],
                          ghosts["rho"], ghosts["h"], ghosts["sigma"],
                          ghosts["e"], ghosts["cs"],
                          np.full(ng, sph.KIND_GHOST, dtype=np.uint8)))
        npseudo = 0
        if pseudo is not None:
            npseudo = len(pseudo["mass"])
            parts.append((pseudo["pos"], pseudo["vel"], pseudo["mass"],
                          pseudo["rho"], pseudo["h"], pseudo["sigma"],
                          pseudo["e"], pseudo["cs"],
                          np.full(npseudo, sph.KIND_PSEUDO, dtype=np.uint8)))
        pos, vel, mass, rho, h, sigma, e, cs, kind = (
            np.concatenate([p[k] for p in parts]) for k in range(9)
        )
        Rart = None
        if self.params.eps_as > 0.0:
            Rart = sph.artificial_stress_tensors(sigma, rho,
                                                 eps_as=self.params.eps_as)
        rates = sph.evaluate_rates(pos, vel, mass, rho, h, sigma, cs, kind,
                                   self.params, ps.dp0, Rart=Rart)
        n = ps.n
        acc = rates["acc"][:n]
        drho = rates["drho"][:n]
        L = rates["L"][:n]
        dedt = rates["dedt_pair"][:n]
        self._vsig = rates["vsig"][:n]

        # contact of target particles against the projectile surface
        cpairs = contact.detect_contacts(self.surface, self.proj.nodes,
                                         ps.pos, self.slab)
        f_pts, f_pnodes, fric_w, damp_w, depth, total_fn = \
            contact.contact_forces(
                self.surface, self.proj.nodes, self.proj.vel, ps.pos, ps.vel,
                cpairs, self.scn.friction_coefficient, dt,
                point_mass=ps.mass, damping=num.contact_damping,
            )
        in_contact = len(cpairs[0]) > 0
        self.ever_contact |= in_contact
        self._contact_force = float(np.linalg.norm(total_fn))
        self._last_depth = depth
        self.max_depth_ever = max(self.max_depth_ever, depth)
        self.friction_dissipated -= fric_w
        self.contact_dissipated -= damp_w
        acc = acc + f_pts / ps.mass[:, None]

        # FE side: internal + hourglass forces, tie and pseudo reactions
        f_proj, hgp, _ = fem.internal_forces(
            self.proj, dt, hourglass_coeff=num.hourglass_coefficient,
            chi=num.taylor_quinney,
        )
        self.hourglass_dissipated -= hgp * dt
        f_proj += f_pnodes
        if self.annulus is not None:
            f_ann, hgp_a, _ = fem.internal_forces(
                self.annulus, dt, hourglass_coeff=num.hourglass_coefficient,
                chi=num.taylor_quinney,
            )
            self.hourglass_dissipated -= hgp_a * dt
            coupling.distribute_tie_forces(
                self.ties, ps.mass[:, None] * acc, f_ann
            )
            if pseudo is not None:
                acc_ps = rates["acc"][n + ng:]
                np.add.at(f_ann, pseudo["node_idx"],
                          pseudo["mass"][:, None] * acc_ps)
            self._fe_kick(self.annulus, self.ann_mass, f_ann,
                          self.ann_fixed, dt)

        self._fe_kick(self.proj, self.proj_mass, f_proj, self.proj_fixed, dt)
        self._fe_started = True

        # particles: dedt already carries the force-consistent stress
        # power and viscous heating from the pair sum
        divv = np.trace(L, axis1=1, axis2=2)
        sph.leapfrog_step(ps, acc, drho, dedt, divv, dt, self._integrator,
                          self.params, movable=self.movable)
        materials.update_stress(
            self.pstate, self.t_card, L, dt, rho=ps.rho, e=ps.e,
            rho_ref=ps.rho_ref, chi=num.taylor_quinney, damage_active=True,
            tension_cutoff=num.tension_cutoff,
        )
        ps.sigma = self.pstate.full_stress()

        if self.ties is not None:
            coupling.slave_particles(self.ties, self.annulus.nodes,
                                     self.annulus.vel, ps.pos, ps.vel)

    def _step_fem(self, dt):
        num = self.num
        tgt = self.target_mesh

        # target surface nodes (attached to live elements) are penetrators
        live = np.zeros(tgt.n_nodes, dtype=bool)
        live[np.unique(tgt.elems[tgt.active])] = True
        pts = np.nonzero(live)[0]
        cpairs = contact.detect_contacts(self.surface, self.proj.nodes,
                                         tgt.nodes[pts], self.slab)
        f_pts, f_pnodes, fric_w, damp_w, depth, total_fn = \
            contact.contact_forces(
                self.surface, self.proj.nodes, self.proj.vel,
                tgt.nodes[pts], tgt.vel[pts], cpairs,
                self.scn.friction_coefficient, dt,
                point_mass=self.target_mass[pts],
                damping=num.contact_damping,
            )
        in_contact = len(cpairs[0]) > 0
        self.ever_contact |= in_contact
        self._contact_force = float(np.linalg.norm(total_fn))
        self._last_depth = depth
        self.max_depth_ever = max(self.max_depth_ever, depth)
        self.friction_dissipated -= fric_w
        self.contact_dissipated -= damp_w

        f_tgt, hgp_t, _ = fem.internal_forces(
            tgt, dt, hourglass_coeff=num.hourglass_coefficient,
            chi=num.taylor_quinney, damage_active=True,
            erode_on_inversion=True,
        )
        fem.erode_elements(tgt)
        self.hourglass_dissipated -= hgp_t * dt
        np.add.at(f_tgt, pts, f_pts)

        f_proj, hgp, _ = fem.internal_forces(
            self.proj, dt, hourglass_coeff=num.hourglass_coefficient,
            chi=num.taylor_quinney,
        )
        self.hourglass_dissipated -= hgp * dt
        f_proj += f_pnodes

        self._fe_kick(tgt, self.target_mass, f_tgt, self.target_fixed, dt)
        self._fe_kick(self.proj, self.proj_mass, f_proj, self.proj_fixed, dt)
        self._fe_started = True

    # -- run loop -------------------------------------------------------------

    def outcome(self) -> str:
        v = self.projectile_velocity()
        thickness = self.scn.target.thickness
        if v > 0.0 and self.projectile_tip() > thickness:
            return "perforated"
        if v < 0.0:
            return "rebounded"
        return "embedded"

    def record(self, history: History):
        history.append(
            time=self.time,
            proj_velocity=self.projectile_velocity(),
            kinetic_energy=self.kinetic_energy(),
            internal_energy=self.internal_energy(),
            friction_dissipated=self.friction_dissipated,
            hourglass_dissipated=self.hourglass_dissipated,
            contact_force=self._contact_force,
            max_penetration=self._last_depth,
            n_particles=0 if self.ps is None else self.ps.n,
            n_active_elements=self.n_active_elements(),
        )

    def run(self, max_wall_time: float | None = None,
            free_samples: int = 25) -> History:
        """Advance to a termination condition; returns the history."""
        scn = self.scn
        history = History()
        wall0 = _time.monotonic()
        next_record = 0.0
        next_snapshot = 0.0
        snap_index = 0
        rows_since_contact = 0
        clearance = scn.target.thickness + 2.0 * scn.projectile.diameter
        if self.out_dir is not None:
            os.makedirs(self.out_dir, exist_ok=True)

        while True:
            if self.time >= next_record:
                self.record(history)
                next_record = self.time + scn.output.history_every
                if self._contact_force == 0.0 and self.ever_contact:
                    rows_since_contact += 1
                else:
                    rows_since_contact = 0
                if rows_since_contact >= free_samples:
                    history.terminated = "separated"
                    break
            if self.out_dir is not None and self.time >= next_snapshot:
                write_snapshot(self, os.path.join(
                    self.out_dir, f"snapshot_{snap_index:04d}.csv"))
                snap_index += 1
                next_snapshot = self.time + scn.output.snapshot_every
            if self.projectile_tail() > clearance:
                history.terminated = "clear"
                break
            if self.time >= scn.end_time:
                history.terminated = "end-time"
                break
            if max_wall_time is not None \
                    and _time.monotonic() - wall0 > max_wall_time:
                history.terminated = "wall-time"
                break
            self.step()

        if not history.rows or history.rows[-1]["time"] < self.time:
            self.record(history)
        if self.out_dir is not None:
            write_history(history, os.path.join(self.out_dir, "history.csv"))
            write_snapshot(self, os.path.join(
                self.out_dir, f"snapshot_{snap_index:04d}.csv"))
        return history


def run_simulation(scenario: Scenario, threads: int = 1,
                   out_dir: str | None = None,
                   max_wall_time: float | None = None):
    """Build, run and report one scenario.

    Returns (history, simulation, report) where report carries the
    outcome and the residual velocity (<= 0 by convention for runs that
    do not perforate).
    """
    sim = Simulation(scenario, threads=threads, out_dir=out_dir)
    history = sim.run(max_wall_time=max_wall_time)
    outcome = sim.outcome()
    try:
        v_r = residual_velocity(history)
    except DriverError:
        v_r = min(sim.projectile_velocity(), 0.0)
    if outcome != "perforated":
        v_r = min(v_r, 0.0)
    report = {
        "outcome": outcome,
        "v_initial": scenario.initial_velocity,
        "v_residual": v_r,
        "terminated": history.terminated,
        "energy": sim.energy_ledger(),
        "max_penetration": sim.max_depth_ever,
        "steps": sim.step_count,
    }
    return history, sim, report


# ---------------------------------------------------------------------------
# ballistic limit and sweeps

@dataclass
class BallisticResult:
    thickness: float
    nose_shape: str
    runs: list                 # (v_initial, v_residual, outcome)
    v_bl: float
    bracket_width: float


def find_ballistic_limit(run_fn, v_lo: float, v_hi: float, tol: float,
                         thickness: float = 0.0,
                         nose_shape: str = "") -> BallisticResult:
    """Bisection on the perforation outcome of run_fn(v) -> (outcome, v_r).

    v_lo must not perforate and v_hi must; both are verified by running
    them first.  The returned estimate is the midpoint of the final
    bracket.
    """
    if not v_lo < v_hi:
        raise BracketError(f"need v_lo < v_hi, got [{v_lo}, {v_hi}]")
    if tol <= 0.0:
        raise BracketError("tolerance must be positive")
    runs = []

    def probe(v):
        outcome, v_r = run_fn(v)
        if outcome not in OUTCOMES:
            raise BracketError(f"run at {v} m/s gave unknown outcome {outcome!r}")
        runs.append((v, v_r, outcome))
        return outcome == "perforated"

    if probe(v_lo):
        raise BracketError(
            f"bracket violation: {v_lo} m/s already perforates; runs: {runs}"
        )
    if not probe(v_hi):
        raise BracketError(
            f"bracket violation: {v_hi} m/s does not perforate; runs: {runs}"
        )
    lo, hi = v_lo, v_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return BallisticResult(
        thickness=thickness, nose_shape=nose_shape, runs=runs,
        v_bl=0.5 * (lo + hi), bracket_width=hi - lo,
    )


def scenario_runner(scenario: Scenario, threads: int = 1,
                    max_wall_time: float | None = None):
    """run_fn(v) closure for find_ballistic_limit over a scenario."""

    def run_fn(v):
        scn = with_overrides(scenario, velocity=float(v))
        _, _, report = run_simulation(scn, threads=threads,
                                      max_wall_time=max_wall_time)
        return report["outcome"], report["v_residual"]

    return run_fn


def ballistic_limit(scenario: Scenario, v_lo: float, v_hi: float,
                    tol: float, threads: int = 1,
                    max_wall_time: float | None = None) -> BallisticResult:
    return find_ballistic_limit(
        scenario_runner(scenario, threads=threads,
                        max_wall_time=max_wall_time),
        v_lo, v_hi, tol,
        thickness=scenario.target.thickness,
        nose_shape=scenario.projectile.nose_shape,
    )


SWEEP_AXES = ("sph_radius", "particle_distance", "friction", "velocity",
              "thickness")


def run_sweep(scenario: Scenario, axis: str, values, threads: int = 1,
              out_dir: str | None = None,
              max_wall_time: float | None = None) -> list:
    """One run per value along the axis; failures recorded, not raised."""
    if axis not in SWEEP_AXES:
        raise DriverError(f"unknown sweep axis {axis!r}; options {SWEEP_AXES}")
    if not len(values):
        raise DriverError("sweep needs at least one value")
    rows = []
    for k, value in enumerate(values):
        scn = with_overrides(scenario, **{axis: float(value)})
        row = {"axis": axis, "value": float(value),
               "v_initial": scn.initial_velocity,
               "v_residual": math.nan, "outcome": "", "error": ""}
        sub_dir = None if out_dir is None else os.path.join(
            out_dir, f"{axis}_{k:02d}")
        try:
            _, _, report = run_simulation(scn, threads=threads,
                                          out_dir=sub_dir,
                                          max_wall_time=max_wall_time)
            row["v_residual"] = report["v_residual"]
            row["outcome"] = report["outcome"]
        except (sph.NumericalError, fem.MeshError,
                materials.MaterialError, geometry.ResourceError) as err:
            row["error"] = str(err)
        rows.append(row)
    return rows


def write_sweep(rows: list, path):
    cols = ("axis", "value", "v_initial", "v_residual", "outcome", "error")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in rows:
                w.writerow([row[c] if isinstance(row[c], str)
                            else _fmt(row[c]) for c in cols])
    except OSError as err:
        raise DriverError(f"cannot write sweep table to {path}: {err}") from None
