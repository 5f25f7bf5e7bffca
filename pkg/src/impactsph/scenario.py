"""Scenario files: line-oriented key = value text with sections.

Sections: [projectile], [target], [run], [output] and optional
[material.<name>] overrides.  Unit suffixes (mm|m, g|kg, ms|s, MPa|GPa,
m/s) are accepted and converted to SI at parse time.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace
from importlib import resources

from .geometry import GeometryError, ProjectileSpec, TargetSpec
from .materials import BUILTIN_CARDS, BilinearCard, JCCard
from .units import UnitError, parse_quantity


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class OutputControls:
    snapshot_every: float = 5e-6      # s of simulated time
    history_every: float = 1e-6
    out_dir: str = "out"


@dataclass(frozen=True)
class Numerics:
    """Solver knobs with literature-standard defaults."""

    artificial_viscosity_alpha: float = 1.0
    artificial_viscosity_beta: float = 1.0
    artificial_stress_eps: float = 0.3
    artificial_stress_n: float = 4.0
    hourglass_coefficient: float = 0.1
    contact_stiffness_scale: float = 0.1
    contact_thickness_factor: float = 0.75  # slab depth in particle spacings
    contact_damping: float = 0.2    # fraction of critical, normal dashpot
    taylor_quinney: float = 0.9
    tension_cutoff: float = 1e9     # Pa; spall-type pressure floor (particles)
    h_factor: float = 1.2
    dt_floor: float = 1e-12
    max_particles: int = 500_000
    mode: str = "sfm"                       # sfm | sph | fem


@dataclass(frozen=True)
class Scenario:
    name: str
    projectile: ProjectileSpec
    target: TargetSpec
    initial_velocity: float
    friction_coefficient: float = 0.0
    symmetry_planes: frozenset = frozenset({"xz", "yz"})
    end_time: float = 4e-4
    cfl: float = 0.3
    output: OutputControls = OutputControls()
    numerics: Numerics = Numerics()
    materials: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.initial_velocity <= 0.0:
            raise ScenarioError("initial_velocity must be > 0")
        if not 0.0 <= self.friction_coefficient <= 1.0:
            raise ScenarioError("friction_coefficient out of [0,1]")
        if not 0.0 < self.cfl < 1.0:
            raise ScenarioError("cfl out of (0,1)")
        bad = self.symmetry_planes - {"xz", "yz"}
        if bad:
            raise ScenarioError(f"unknown symmetry plane(s) {sorted(bad)}")

    def cards(self) -> dict:
        cards = dict(BUILTIN_CARDS)
        cards.update(self.materials)
        for mid in (self.projectile.material_id, self.target.material_id):
            if mid not in cards:
                raise ScenarioError(f"unknown material id {mid!r}")
        return cards


_DIMENSIONS = {
    "diameter": "length", "total_length": "length", "nose_length": "length",
    "thickness": "length", "sph_radius": "length", "outer_radius": "length",
    "particle_distance": "length", "initial_velocity": "speed",
    "end_time": "time", "snapshot_every": "time", "history_every": "time",
    "rho0": "density", "E": "pressure", "G": "pressure", "A": "pressure",
    "B": "pressure", "sigma_y": "pressure", "Et": "pressure",
    "Cp": "specific_heat", "T_melt": "temperature", "T_room": "temperature",
}


def _value(section, key, dim=None, default=None, cast=float):
    if key not in section:
        if default is None:
            raise ScenarioError(f"[{section.name}] missing required key {key!r}")
        return default
    raw = section[key]
    if cast is str:
        return raw.strip()
    try:
        return parse_quantity(raw, dim or _DIMENSIONS.get(key, "dimensionless"))
    except UnitError as err:
        raise ScenarioError(f"[{section.name}] {key}: {err}") from None


def _parse_material(name, section):
    kind = section.get("type", "johnson-cook").strip()
    common = dict(
        name=name,
        rho0=_value(section, "rho0"),
        E=_value(section, "E"),
        nu=_value(section, "nu"),
    )
    if kind == "bilinear":
        return BilinearCard(
            sigma_y=_value(section, "sigma_y"),
            Et=_value(section, "Et"),
            fail_strain=_value(section, "fail_strain", default=0.0),
            **common,
        )
    jc = dict(common)
    jc.update(
        G=_value(section, "G"),
        A=_value(section, "A"), B=_value(section, "B"),
        a=_value(section, "a"), C=_value(section, "C"), b=_value(section, "b"),
        Cp=_value(section, "Cp"),
        T_melt=_value(section, "T_melt"), T_room=_value(section, "T_room"),
    )
    for dk in ("D1", "D2", "D3", "D4", "D5"):
        jc[dk] = _value(section, dk, default=0.0)
    for ek, key in (("eos_c0", "eos_c0"), ("eos_s", "eos_s"),
                    ("eos_gamma0", "eos_gamma0")):
        if key in section:
            jc[ek] = _value(section, key)
    return JCCard(**jc)


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse scenario-file contents into a validated Scenario (SI units)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as err:
        raise ScenarioError(f"parse error: {err}") from None

    for required in ("projectile", "target", "run"):
        if required not in cp:
            raise ScenarioError(f"missing [{required}] section")

    p = cp["projectile"]
    try:
        projectile = ProjectileSpec(
            nose_shape=_value(p, "nose_shape", cast=str),
            diameter=_value(p, "diameter"),
            total_length=_value(p, "total_length"),
            nose_length=_value(p, "nose_length", default=0.0),
            ogive_caliber_radius=_value(p, "ogive_caliber_radius", default=0.0),
            material_id=_value(p, "material_id", cast=str, default="arne"),
        )
        t = cp["target"]
        target = TargetSpec(
            thickness=_value(t, "thickness"),
            sph_radius=_value(t, "sph_radius"),
            outer_radius=_value(t, "outer_radius"),
            particle_distance=_value(t, "particle_distance"),
            fe_grading=_value(t, "fe_grading", default=1.15),
            material_id=_value(t, "material_id", cast=str, default="weldox-460e"),
        )
    except GeometryError as err:
        raise ScenarioError(str(err)) from None

    r = cp["run"]
    sym = _value(r, "symmetry_planes", cast=str, default="xz, yz")
    planes = frozenset(s.strip() for s in sym.split(",") if s.strip())

    num = Numerics(
        artificial_viscosity_alpha=_value(r, "artificial_viscosity_alpha", default=1.0),
        artificial_viscosity_beta=_value(r, "artificial_viscosity_beta", default=1.0),
        artificial_stress_eps=_value(r, "artificial_stress_eps", default=0.3),
        artificial_stress_n=_value(r, "artificial_stress_n", default=4.0),
        hourglass_coefficient=_value(r, "hourglass_coefficient", default=0.1),
        contact_stiffness_scale=_value(r, "contact_stiffness_scale", default=0.1),
        contact_thickness_factor=_value(r, "contact_thickness_factor", default=0.75),
        contact_damping=_value(r, "contact_damping", default=0.2),
        taylor_quinney=_value(r, "taylor_quinney", default=0.9),
        tension_cutoff=_value(r, "tension_cutoff", "pressure", default=1e9),
        h_factor=_value(r, "h_factor", default=1.2),
        dt_floor=_value(r, "dt_floor", default=1e-12),
        max_particles=int(_value(r, "max_particles", default=500_000)),
        mode=_value(r, "mode", cast=str, default="sfm"),
    )
    if num.mode not in ("sfm", "sph", "fem"):
        raise ScenarioError(f"unknown mode {num.mode!r}")

    out = OutputControls()
    if "output" in cp:
        o = cp["output"]
        out = OutputControls(
            snapshot_every=_value(o, "snapshot_every", default=5e-6),
            history_every=_value(o, "history_every", default=1e-6),
            out_dir=_value(o, "out_dir", cast=str, default="out"),
        )

    mats = {}
    for sec in cp.sections():
        if sec.startswith("material."):
            mid = sec.split(".", 1)[1]
            mats[mid] = _parse_material(mid, cp[sec])

    return Scenario(
        name=name,
        projectile=projectile,
        target=target,
        initial_velocity=_value(r, "initial_velocity"),
        friction_coefficient=_value(r, "friction_coefficient", default=0.0),
        symmetry_planes=planes,
        end_time=_value(r, "end_time", default=4e-4),
        cfl=_value(r, "cfl", default=0.3),
        output=out,
        numerics=num,
        materials=mats,
    )


def bundled_names() -> list:
    root = resources.files("impactsph") / "data"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_scenario(name_or_path: str) -> Scenario:
    """Load a bundled scenario by name or any scenario file by path."""
    root = resources.files("impactsph") / "data"
    bundled = root / f"{name_or_path}.ini"
    if bundled.is_file():
        return parse_scenario(bundled.read_text(), name=name_or_path)
    try:
        with io.open(name_or_path, "r") as fh:
            text = fh.read()
    except OSError as err:
        raise ScenarioError(
            f"no bundled scenario or readable file {name_or_path!r}: {err}"
        ) from None
    return parse_scenario(text, name=name_or_path)


def with_overrides(scn: Scenario, velocity=None, friction=None,
                   particle_distance=None, sph_radius=None, thickness=None,
                   end_time=None, mode=None) -> Scenario:
    """CLI-style overrides on an existing scenario."""
    target = scn.target
    if particle_distance or sph_radius or thickness:
        target = TargetSpec(
            thickness=thickness or target.thickness,
            sph_radius=sph_radius or target.sph_radius,
            outer_radius=target.outer_radius,
            particle_distance=particle_distance or target.particle_distance,
            fe_grading=target.fe_grading,
            material_id=target.material_id,
        )
    kwargs = {"target": target}
    if velocity is not None:
        kwargs["initial_velocity"] = velocity
    if friction is not None:
        kwargs["friction_coefficient"] = friction
    if end_time is not None:
        kwargs["end_time"] = end_time
    if mode is not None:
        kwargs["numerics"] = replace(scn.numerics, mode=mode)
    return replace(scn, **kwargs)
