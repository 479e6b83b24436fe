"""One-dimensional pointer wavefunctions on a periodic grid.

Coordinates are ``q_j = -L/2 + j*dq`` for ``j = 0..n-1`` and momenta are
``p_k = 2*pi*hbar*k/L`` for ``k = -n/2..n/2-1``. The discrete transform

    phi(p_k) = dq / sqrt(2 pi hbar) * sum_j psi(q_j) exp(-i p_k q_j / hbar)

is exactly unitary with respect to the weighted norms ``sum |psi|^2 dq`` and
``sum |phi|^2 dp``, so densities in either representation integrate to one.

Sampling reads the grid distribution as exact; there is no interpolation
between grid points, so sampled values carry an O(grid spacing)
discretization that is controlled by the choice of grid.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .config import get_hbar
from .errors import GridTooCoarse, GridTooSmall

COORDINATE = "coordinate"
MOMENTUM = "momentum"
NORM_TOL = 1e-10

SeedLike = Union[int, np.random.SeedSequence]


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child_seed(seed: SeedLike, index: int) -> np.random.SeedSequence:
    """Counter-based child stream: same entropy, ``index`` appended to the spawn key.

    Worker ``i`` of a parallel run always gets ``child_seed(root, i)``, so the
    streams are disjoint and independent of how work is scheduled.
    """
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(index),))


def seed_repr(seed: SeedLike):
    ss = as_seed_sequence(seed)
    if not ss.spawn_key:
        return int(ss.entropy)
    return {"entropy": int(ss.entropy), "spawn_key": [int(k) for k in ss.spawn_key]}


@dataclass(frozen=True)
class Grid:
    n: int = 1024
    length: float = 8.0
    hbar: float = field(default_factory=get_hbar)

    def __post_init__(self):
        if self.n < 64 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @classmethod
    def for_pointer(cls, sigma_q: float, n: int = 1024, hbar: float | None = None, span: float = 40.0) -> "Grid":
        """Grid of length ``span * sigma_q``.

        With the default span and size the coordinate window holds +-20 sigma_q
        and the momentum window +-160 sigma_p, so shifts by any eigenvalue much
        smaller than ~100 sigma_p stay far from the edges.
        """
        return cls(n=n, length=span * sigma_q, hbar=get_hbar() if hbar is None else hbar)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def dp(self) -> float:
        return 2 * np.pi * self.hbar / self.length

    @cached_property
    def q(self) -> np.ndarray:
        q = -0.5 * self.length + self.spacing * np.arange(self.n)
        q.flags.writeable = False
        return q

    @cached_property
    def p(self) -> np.ndarray:
        p = self.dp * np.arange(-self.n // 2, self.n // 2)
        p.flags.writeable = False
        return p

    def axis(self, representation: str) -> np.ndarray:
        return self.q if representation == COORDINATE else self.p

    def weight(self, representation: str) -> float:
        return self.spacing if representation == COORDINATE else self.dp


def q_to_p(values: np.ndarray, grid: Grid, axis: int = -1) -> np.ndarray:
    """Coordinate amplitudes to momentum amplitudes along ``axis``."""
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    phase = np.exp(-1j * grid.p * grid.q[0] / grid.hbar)
    out = np.fft.fftshift(np.fft.fft(values, axis=-1), axes=-1) * phase
    out *= grid.spacing / np.sqrt(2 * np.pi * grid.hbar)
    return np.moveaxis(out, -1, axis)


def p_to_q(values: np.ndarray, grid: Grid, axis: int = -1) -> np.ndarray:
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    phase = np.exp(1j * grid.p * grid.q[0] / grid.hbar)
    out = np.fft.ifft(np.fft.ifftshift(values * phase, axes=-1), axis=-1)
    out *= np.sqrt(2 * np.pi * grid.hbar) / grid.spacing
    return np.moveaxis(out, -1, axis)


@dataclass(frozen=True, eq=False)
class PointerState:
    grid: Grid
    amplitudes: np.ndarray
    representation: str = COORDINATE

    def __post_init__(self):
        if self.representation not in (COORDINATE, MOMENTUM):
            raise ValueError(f"unknown representation {self.representation!r}")
        amps = np.array(self.amplitudes, dtype=complex, copy=True)
        if amps.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} amplitudes, got shape {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2) * self.grid.weight(self.representation))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"pointer state has norm {norm!r}, expected 1")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, grid: Grid, amplitudes, representation: str = COORDINATE) -> "PointerState":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(amps) ** 2) * grid.weight(representation))
        if norm == 0:
            raise ValueError("cannot normalize a zero wavefunction")
        return cls(grid, amps / norm, representation)

    @property
    def axis(self) -> np.ndarray:
        return self.grid.axis(self.representation)

    def density(self) -> np.ndarray:
        """|psi|^2 as a density (integrates to one against the grid weight)."""
        return np.abs(self.amplitudes) ** 2

    def probabilities(self) -> np.ndarray:
        w = self.density() * self.grid.weight(self.representation)
        return w / w.sum()

    def norm(self) -> float:
        return float(np.sum(self.density()) * self.grid.weight(self.representation))

    def mean(self) -> float:
        return float(np.sum(self.axis * self.probabilities()))

    def std(self) -> float:
        probs = self.probabilities()
        mu = np.sum(self.axis * probs)
        return float(np.sqrt(np.sum((self.axis - mu) ** 2 * probs)))

    def in_coordinates(self) -> "PointerState":
        return self if self.representation == COORDINATE else to_coordinate(self)

    def in_momentum(self) -> "PointerState":
        return self if self.representation == MOMENTUM else to_momentum(self)


def to_momentum(ps: PointerState) -> PointerState:
    if ps.representation == MOMENTUM:
        return ps
    return PointerState.normalized(ps.grid, q_to_p(ps.amplitudes, ps.grid), MOMENTUM)


def to_coordinate(ps: PointerState) -> PointerState:
    if ps.representation == COORDINATE:
        return ps
    return PointerState.normalized(ps.grid, p_to_q(ps.amplitudes, ps.grid), COORDINATE)


def gaussian_pointer(grid: Grid, sigma_q: float, center: float = 0.0, momentum: float = 0.0) -> PointerState:
    """Gaussian with coordinate density of standard deviation ``sigma_q``.

    ``momentum`` adds a carrier ``exp(i*momentum*q/hbar)``; momentum-space std is
    ``hbar / (2 sigma_q)``.
    """
    if not 4 * sigma_q < grid.length / 2:
        raise GridTooSmall(f"sigma_q={sigma_q} needs L > 8 sigma_q, grid has L={grid.length}")
    if not sigma_q > 2 * grid.spacing:
        raise GridTooCoarse(f"sigma_q={sigma_q} is not resolved by spacing {grid.spacing:.3g}")
    q = grid.q
    amps = np.exp(-((q - center) ** 2) / (4 * sigma_q**2) + 1j * momentum * q / grid.hbar)
    return PointerState.normalized(grid, amps)


def sample(ps: PointerState, rng_seed: SeedLike, count: int) -> np.ndarray:
    """``count`` i.i.d. readouts from the grid distribution of the active representation."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(as_seed_sequence(rng_seed))
    return ps.axis[sample_indices(ps.probabilities(), rng, count)]


def sample_indices(probs: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(idx, len(probs) - 1)


def free_evolve(ps: PointerState, t: float, m: float) -> PointerState:
    """Free-particle evolution for time ``t``; returned in the input representation."""
    if not m > 0:
        raise ValueError("mass must be positive")
    grid = ps.grid
    phi = ps.in_momentum().amplitudes * np.exp(-1j * grid.p**2 * t / (2 * m * grid.hbar))
    out = PointerState.normalized(grid, phi, MOMENTUM)
    return out if ps.representation == MOMENTUM else to_coordinate(out)


def write_density_csv(ps: PointerState, target=None) -> str:
    """Write ``coordinate_or_momentum,density`` rows; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["coordinate_or_momentum", "density"])
    for x, d in zip(ps.axis, ps.density()):
        writer.writerow([repr(float(x)), repr(float(d))])
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
    return text
