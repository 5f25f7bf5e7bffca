import pytest
from hypothesis import given, strategies as st

from impactsph.units import UnitError, parse_quantity


def test_length_suffixes():
    assert parse_quantity("12 mm", "length") == 0.012
    assert parse_quantity("12mm", "length") == 0.012
    assert parse_quantity("0.012", "length") == 0.012
    assert parse_quantity("3 cm", "length") == 0.03
    assert parse_quantity("5 um", "length") == pytest.approx(5e-6)


def test_pressure_suffixes():
    assert parse_quantity("210 GPa", "pressure") == 210e9
    assert parse_quantity("499 MPa", "pressure") == 499e6
    assert parse_quantity("1 kPa", "pressure") == 1e3


def test_speed_and_time():
    assert parse_quantity("300 m/s", "speed") == 300.0
    assert parse_quantity("1 km/s", "speed") == 1000.0
    assert parse_quantity("1 mm/ms", "speed") == 1.0
    assert parse_quantity("40 us", "time") == pytest.approx(4e-5)


def test_density():
    assert parse_quantity("7.85 g/cm3", "density") == 7850.0


def test_bare_number_is_si():
    assert parse_quantity("42", "pressure") == 42.0


def test_garbage_rejected():
    with pytest.raises(UnitError):
        parse_quantity("twelve mm", "length")
    with pytest.raises(UnitError):
        parse_quantity("12 lightyears", "length")


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_mm_roundtrip(x):
    assert parse_quantity(f"{x!r} mm", "length") == pytest.approx(x * 1e-3)
