"""Process-wide physical constants.

Only the reduced Planck constant is configurable. Objects capture the value at
construction time, so changing it later never mutates existing grids or states.
"""

_HBAR = 1.0


def get_hbar() -> float:
    return _HBAR


def set_hbar(value: float) -> None:
    global _HBAR
    value = float(value)
    if not value > 0:
        raise ValueError(f"hbar must be positive, got {value}")
    _HBAR = value
