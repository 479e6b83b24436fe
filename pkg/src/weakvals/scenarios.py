"""Two case studies built on the weak-value machinery.

Quantum Cheshire Cat
    A photon with a path qubit (L, R) and a polarization qubit (H, V), basis
    order |LH>, |LV>, |RH>, |RV>. The fixed pre/post pair below gives path
    projector weak values (1, 0) and polarization-times-path weak values (0, 1).
    The "angular momentum" operator is sigma_z on the polarization factor.

Operational (Wiseman) velocity
    A probe pointer is weakly coupled to the particle position, the particle
    evolves freely for ``tau``, and its position is then measured strongly.
    Binning trials by the strong result ``x_strong`` and averaging
    ``(x_strong - x_weak) / tau`` gives a velocity field, compared here with the
    standard guidance law ``v = (hbar/m) Im(psi'/psi)``. The guidance formula
    is an external oracle, not something this module derives.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import aav_protocol, qkernel
from .errors import EmptyBin
from .pointer import (
    COORDINATE,
    Grid,
    PointerState,
    SeedLike,
    child_seed,
    gaussian_pointer,
    p_to_q,
    q_to_p,
    sample_indices,
    seed_repr,
)
from .qkernel import Operator, StateVector
from .weakvalue import WeakValueResult, weak_value

DEFAULT_BINS = 21
MIN_OCCUPANCY = 100
DENSITY_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class CheshireSetup:
    pre: StateVector
    post: StateVector
    pi_left: Operator
    pi_right: Operator
    spin: Operator

    def __post_init__(self):
        if abs(qkernel.inner(self.post, self.pre)) == 0:
            raise ValueError("pre- and post-selected states are orthogonal")
        if np.max(np.abs((self.pi_left + self.pi_right).entries - np.eye(4))) > 1e-12:
            raise ValueError("path projectors must resolve the identity")

    def observables(self) -> dict[str, Operator]:
        return {
            "Pi_L": self.pi_left,
            "Pi_R": self.pi_right,
            "S_Pi_L": self.spin @ self.pi_left,
            "S_Pi_R": self.spin @ self.pi_right,
        }


def cheshire_setup() -> CheshireSetup:
    pre = StateVector(np.array([1, 1, 1, 1]) / 2)
    post = StateVector(np.array([1, 1, 1, -1]) / 2)
    left = qkernel.tensor(qkernel.PROJECTOR_0, Operator.identity(2))
    right = qkernel.tensor(qkernel.PROJECTOR_1, Operator.identity(2))
    spin = qkernel.tensor(Operator.identity(2), qkernel.SIGMA_Z)
    return CheshireSetup(pre, post, left, right, spin)


def cheshire_report(
    setup: CheshireSetup,
    sigma_q: float,
    attempts: Optional[int] = None,
    seed: SeedLike = 0,
    *,
    n_postselected: Optional[int] = None,
    threads: int | None = 1,
) -> dict[str, tuple[complex, WeakValueResult]]:
    """Exact and Monte Carlo (p-readout) weak values for the four Cheshire observables.

    Observable ``j`` (in the order of :meth:`CheshireSetup.observables`) runs
    on the child stream ``child_seed(seed, j)``.
    """
    out = {}
    for j, (label, op) in enumerate(setup.observables().items()):
        exact = weak_value(op, setup.pre, setup.post).value
        report = aav_protocol.run_protocol(
            op,
            setup.pre,
            setup.post,
            sigma_q,
            attempts,
            child_seed(seed, j),
            "p",
            n_postselected=n_postselected,
            threads=threads,
        )
        out[label] = (exact, report.estimate)
    return out


@dataclass(frozen=True, eq=False)
class VelocityField:
    bin_centers: np.ndarray
    velocities: np.ndarray  # NaN where a bin is absent
    counts: np.ndarray
    stderr: np.ndarray
    tau: float = float("nan")
    sigma_q: float = float("nan")
    seed: object = None
    meta: dict = field(default_factory=dict)

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.velocities)

    def velocity_at(self, index: int) -> float:
        if not self.present[index]:
            raise EmptyBin(f"bin {index} (center {self.bin_centers[index]:.4g}) has too few samples")
        return float(self.velocities[index])

    def rows(self):
        for c, v, n in zip(self.bin_centers, self.velocities, self.counts):
            yield float(c), (float(v) if math.isfinite(v) else None), int(n)

    def to_dict(self) -> dict:
        def clean(arr):
            return [float(x) if math.isfinite(x) else None for x in arr]

        return {
            "bin_centers": clean(self.bin_centers),
            "velocities": clean(self.velocities),
            "counts": [int(n) for n in self.counts],
            "stderr": clean(self.stderr),
            "tau": float(self.tau),
            "sigma_q": float(self.sigma_q),
            "seed": self.seed,
        }


def velocity_bins(psi: PointerState, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin edges spanning the mean +- 2 std of |psi|^2."""
    psi = psi.in_coordinates()
    mu, s = psi.mean(), psi.std()
    return np.linspace(mu - 2 * s, mu + 2 * s, bins + 1)


def _weak_then_strong(psi: PointerState, m: float, tau: float, sigma_q: float, probe_n: int):
    """Exact joint distribution of (x_strong, x_weak) on the grid.

    Returns ``(probs, x, p)`` with ``probs[j, k]`` the probability that the
    strong readout is ``x[j]`` and the probe momentum readout is ``p[k]``.
    """
    grid = psi.grid
    x, hbar = grid.q, grid.hbar
    probe_grid = Grid.for_pointer(sigma_q, n=probe_n, hbar=hbar)
    phi = gaussian_pointer(probe_grid, sigma_q).amplitudes
    # weak coupling exp(i q X / hbar) to the particle position
    joint = psi.amplitudes[:, None] * phi[None, :] * np.exp(1j * np.outer(x, probe_grid.q) / hbar)
    joint = q_to_p(joint, probe_grid, axis=1)
    # free evolution of the particle factor
    kin = np.exp(-1j * grid.p**2 * tau / (2 * m * hbar))
    joint = p_to_q(q_to_p(joint, grid, axis=0) * kin[:, None], grid, axis=0)
    probs = np.abs(joint) ** 2
    probs /= probs.sum()
    return probs, x, probe_grid.p


def _velocity_batch(index, seed, cdf_probs, x, p, edges, tau, size, conditional_p):
    rng = np.random.default_rng(child_seed(seed, index))
    flat = sample_indices(cdf_probs, rng, size)
    j, k = np.divmod(flat, len(p))
    x_strong = x[j]
    x_weak = conditional_p[j] if conditional_p is not None else p[k]
    which = np.digitize(x_strong, edges) - 1
    inside = (which >= 0) & (which < len(edges) - 1)
    which, d = which[inside], ((x_strong - x_weak) / tau)[inside]
    nbins = len(edges) - 1
    counts = np.bincount(which, minlength=nbins)
    s1 = [math.fsum(d[which == b]) for b in range(nbins)]
    s2 = [math.fsum(d[which == b] ** 2) for b in range(nbins)]
    return counts, s1, s2


def wiseman_velocity(
    psi: PointerState,
    m: float,
    tau: float,
    sigma_q: float,
    attempts: int,
    bins: int = DEFAULT_BINS,
    seed: SeedLike = 0,
    *,
    min_count: int = MIN_OCCUPANCY,
    estimator: str = "sampled",
    probe_n: int = 256,
    batch_size: int = 1 << 18,
    threads: int | None = 1,
) -> VelocityField:
    """Operational velocity field from weak-then-strong position measurements.

    Each trial samples ``(x_strong, x_weak)`` from the exact joint distribution
    of the strong position readout at time ``tau`` and the probe's momentum
    readout. Bins with fewer than ``min_count`` trials are reported as NaN.

    ``estimator="conditional"`` replaces each sampled ``x_weak`` by its exact
    conditional mean given ``x_strong`` (Rao-Blackwellization). The expected
    bin averages are unchanged, but the probe's readout noise, of standard
    deviation ``hbar / (2 sigma_q tau)`` in velocity units, no longer enters.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not m > 0:
        raise ValueError("mass must be positive")
    if estimator not in ("sampled", "conditional"):
        raise ValueError(f"unknown estimator {estimator!r}")
    psi = psi.in_coordinates()
    edges = velocity_bins(psi, bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    counts = np.zeros(bins, dtype=np.int64)
    s1 = np.zeros(bins)
    s2 = np.zeros(bins)

    if attempts > 0:
        probs, x, p = _weak_then_strong(psi, m, tau, sigma_q, probe_n)
        conditional_p = None
        if estimator == "conditional":
            row = probs.sum(axis=1)
            conditional_p = np.divide(probs @ p, row, out=np.zeros_like(row), where=row > 0)
        flat = probs.ravel()
        sizes = [batch_size] * (attempts // batch_size) + ([attempts % batch_size] if attempts % batch_size else [])
        jobs = [(i, seed, flat, x, p, edges, tau, n, conditional_p) for i, n in enumerate(sizes)]
        if threads and threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda job: _velocity_batch(*job), jobs))
        else:
            results = [_velocity_batch(*job) for job in jobs]
        counts = sum(r[0] for r in results)
        s1 = np.array([math.fsum(r[1][b] for r in results) for b in range(bins)])
        s2 = np.array([math.fsum(r[2][b] for r in results) for b in range(bins)])

    velocities = np.full(bins, np.nan)
    stderr = np.full(bins, np.nan)
    ok = counts >= max(min_count, 2)
    velocities[ok] = s1[ok] / counts[ok]
    var = np.maximum(s2[ok] - counts[ok] * velocities[ok] ** 2, 0.0) / (counts[ok] - 1)
    stderr[ok] = np.sqrt(var / counts[ok])
    return VelocityField(
        centers, velocities, np.asarray(counts), stderr, float(tau), float(sigma_q), seed_repr(seed),
        {"estimator": estimator, "attempts": int(attempts), "m": float(m)},
    )


def guidance_velocity_oracle(psi: PointerState, m: float, bins: int = DEFAULT_BINS) -> VelocityField:
    """``(hbar/m) Im(psi'/psi)`` by central differences, read at the bin centers.

    Bins whose nearest grid density is below 1e-8 of the peak are NaN.
    """
    psi = psi.in_coordinates()
    grid = psi.grid
    amps = psi.amplitudes
    dpsi = (np.roll(amps, -1) - np.roll(amps, 1)) / (2 * grid.spacing)
    density = np.abs(amps) ** 2
    keep = density >= DENSITY_FLOOR * density.max()
    ratio = np.divide(dpsi, amps, out=np.zeros_like(amps), where=keep)
    v = grid.hbar / m * ratio.imag

    edges = velocity_bins(psi, bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    velocities = np.interp(centers, grid.q, v)
    nearest = np.clip(np.searchsorted(grid.q, centers), 0, grid.n - 1)
    velocities[~keep[nearest]] = np.nan
    zeros = np.zeros(bins)
    return VelocityField(centers, velocities, zeros.astype(np.int64), zeros, meta={"estimator": "guidance"})


def central_bins(field: VelocityField, psi: PointerState, width: float = 1.0) -> np.ndarray:
    """Mask of present bins whose centers lie within ``width`` std of the packet mean."""
    psi = psi.in_coordinates()
    mu, s = psi.mean(), psi.std()
    return field.present & (np.abs(field.bin_centers - mu) <= width * s)


def mean_abs_deviation(field: VelocityField, oracle: VelocityField, mask: np.ndarray) -> float:
    mask = mask & field.present & oracle.present
    if not mask.any():
        return float("nan")
    return float(np.mean(np.abs(field.velocities[mask] - oracle.velocities[mask])))
