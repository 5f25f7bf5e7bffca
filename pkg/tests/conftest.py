import numpy as np
import pytest

from impactsph.scenario import parse_scenario


TINY_SCENARIO = """
[projectile]
nose_shape = blunt
diameter = 10 mm
total_length = 80 mm
material_id = arne

[target]
thickness = 12 mm
sph_radius = 24 mm
outer_radius = 100 mm
particle_distance = 2 mm
material_id = weldox-460e

[run]
initial_velocity = 300 m/s
friction_coefficient = 0.0
end_time = 0.4 ms
"""


@pytest.fixture
def tiny_scenario():
    return parse_scenario(TINY_SCENARIO, name="tiny")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
