"""Unit-suffixed quantity parsing for scenario files.

All values are converted to SI (m, kg, s, Pa, K) at parse time.
"""

from __future__ import annotations

# multiplicative factors to SI, grouped by physical dimension
_FACTORS = {
    "length": {"m": 1.0, "mm": 1e-3, "cm": 1e-2, "um": 1e-6},
    "mass": {"kg": 1.0, "g": 1e-3},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "speed": {"m/s": 1.0, "km/s": 1e3, "mm/ms": 1.0},
    "density": {"kg/m3": 1.0, "g/cm3": 1e3},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "temperature": {"K": 1.0},
    "specific_heat": {"J/kgK": 1.0, "J/(kg*K)": 1.0},
    "dimensionless": {},
}


class UnitError(ValueError):
    pass


def parse_quantity(text: str, dimension: str = "dimensionless") -> float:
    """Parse '12 mm' / '12mm' / '0.012' into an SI float.

    A bare number is taken to be already in SI units.
    """
    text = text.strip()
    factors = _FACTORS[dimension]
    # longest suffix first so 'mm' wins over 'm'
    for unit in sorted(factors, key=len, reverse=True):
        if text.endswith(unit):
            num = text[: -len(unit)].strip()
            try:
                return float(num) * factors[unit]
            except ValueError:
                raise UnitError(f"cannot parse number in {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise UnitError(
            f"cannot parse {text!r} as a {dimension} quantity"
        ) from None
