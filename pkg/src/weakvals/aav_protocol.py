"""Weak measurement with a Gaussian pointer followed by post-selection.

The system-pointer coupling ``exp(i q A / hbar)`` is applied exactly through the
spectral decomposition of ``A``: each eigencomponent ``a`` of the system state
multiplies the pointer wavefunction by ``exp(i q a / hbar)``, which translates
the pointer momentum by ``a``. No Taylor truncation is made, so the size of the
first-order approximation can be measured (see :func:`first_order_bias`).

Post-selection is projection onto the chosen system state followed by
renormalization; the observer is not modelled as a separate Hilbert factor.

Monte Carlo runs draw, per trial, a Bernoulli post-selection outcome and then
one pointer readout from the exact post-selected distribution. This is
statistically identical to sampling full joint outcomes and discarding
failures, and ``n_postselected`` is on average ``n_attempts * success_prob``.
Trials are processed in fixed-size batches, batch ``i`` seeded with
``child_seed(seed, i)``; batch sums are merged with ``math.fsum`` so the
result does not depend on the number of worker threads or completion order.
The two conjugate readouts (p and q) are separate runs; a single trial never
reads both.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import qkernel
from .errors import ZeroPostSelectionProbability
from .pointer import (
    COORDINATE,
    MOMENTUM,
    Grid,
    PointerState,
    SeedLike,
    child_seed,
    gaussian_pointer,
    q_to_p,
    sample_indices,
    seed_repr,
)
from .qkernel import StateVector
from .weakvalue import WeakValueResult, complex_pair, weak_value

MIN_SUCCESS_PROB = 1e-12
DEFAULT_BATCH = 65536


@dataclass(frozen=True, eq=False)
class JointState:
    """Amplitudes indexed by (system basis index, pointer grid point)."""

    grid: Grid
    amplitudes: np.ndarray
    representation: str = COORDINATE

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex, copy=True)
        if amps.ndim != 2 or amps.shape[1] != self.grid.n:
            raise ValueError(f"joint amplitudes must have shape (dim, {self.grid.n}), got {amps.shape}")
        norm = self.norm_of(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"joint state has norm {norm!r}, expected 1")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def norm_of(self, amps) -> float:
        return float(np.sum(np.abs(amps) ** 2) * self.grid.weight(self.representation))

    @property
    def sys_dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return self.norm_of(self.amplitudes)


def couple(sys: StateVector, A, ps: PointerState) -> JointState:
    """Apply ``exp(i q A / hbar)`` to ``sys (x) ps`` exactly."""
    if ps.representation != COORDINATE:
        raise ValueError("coupling needs the pointer in the coordinate representation")
    pvm = qkernel.spectral_decompose(A)
    if pvm.dim != sys.dim:
        raise qkernel.DimensionMismatch(f"observable dim {pvm.dim} != system dim {sys.dim}")
    q, hbar = ps.grid.q, ps.grid.hbar
    amps = np.zeros((sys.dim, ps.grid.n), dtype=complex)
    for a, proj in zip(pvm.eigenvalues, pvm.projectors):
        amps += np.outer(proj.apply(sys), np.exp(1j * q * a / hbar) * ps.amplitudes)
    return JointState(ps.grid, amps)


def post_select(js: JointState, post: StateVector) -> tuple[PointerState, float]:
    """Project the system factor onto ``post``; return the pointer and the success probability."""
    if post.dim != js.sys_dim:
        raise qkernel.DimensionMismatch(f"post-selection dim {post.dim} != system dim {js.sys_dim}")
    pointer_amps = post.coeffs.conj() @ js.amplitudes
    prob = float(np.sum(np.abs(pointer_amps) ** 2) * js.grid.weight(js.representation))
    if prob < MIN_SUCCESS_PROB:
        raise ZeroPostSelectionProbability(f"post-selection succeeds with probability {prob:.3e}")
    return PointerState.normalized(js.grid, pointer_amps, js.representation), prob


def predicted_means(aw: complex, sigma_q: float, hbar: float) -> tuple[float, float]:
    """First-order pointer means (<p>, <q>) after post-selection."""
    return aw.real, -2 * sigma_q**2 * aw.imag / hbar


def estimate_from_means(mean_p: float, mean_q: float, sigma_q: float, hbar: float) -> complex:
    """Invert :func:`predicted_means`."""
    return complex(mean_p, -hbar * mean_q / (2 * sigma_q**2))


def postselected_pointer(A, pre: StateVector, post: StateVector, sigma_q: float, grid: Grid | None = None):
    grid = Grid.for_pointer(sigma_q) if grid is None else grid
    js = couple(pre, A, gaussian_pointer(grid, sigma_q))
    return post_select(js, post)


@dataclass(frozen=True)
class ProtocolReport:
    exact_weak_value: complex
    estimate: WeakValueResult
    success_prob: float
    n_attempts: int
    n_postselected: int
    readout: str
    sigma_q: float
    hbar: float
    seed: object
    pointer_means: tuple  # (mean_p, mean_q) from samples; the unread one is None
    predicted_means: tuple  # (Re A_w, -2 sigma_q^2 Im A_w / hbar)
    exact_pointer_means: tuple  # (<p>, <q>) of the exact post-selected grid state

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "exact_weak_value": complex_pair(self.exact_weak_value),
            "estimate": self.estimate.to_dict(),
            "success_prob": float(self.success_prob),
            "n_attempts": int(self.n_attempts),
            "n_postselected": int(self.n_postselected),
            "readout": self.readout,
            "sigma_q": float(self.sigma_q),
            "hbar": float(self.hbar),
            "seed": self.seed,
            "pointer_means": [num(x) for x in self.pointer_means],
            "predicted_means": [num(x) for x in self.predicted_means],
            "exact_pointer_means": [num(x) for x in self.exact_pointer_means],
        }


def _run_batch(index, seed, probs, axis, shift, success_prob, attempts, successes):
    rng = np.random.default_rng(child_seed(seed, index))
    if successes is None:
        k = int(rng.binomial(attempts, success_prob))
    else:
        k = successes
        attempts = k + int(rng.negative_binomial(k, success_prob)) if k else 0
    x = axis[sample_indices(probs, rng, k)] - shift if k else np.empty(0)
    return attempts, k, math.fsum(x), math.fsum(x * x)


def run_protocol(
    A,
    pre: StateVector,
    post: StateVector,
    sigma_q: float,
    n_attempts: Optional[int] = None,
    seed: SeedLike = 0,
    readout: str = "p",
    *,
    n_postselected: Optional[int] = None,
    grid: Grid | None = None,
    batch_size: int = DEFAULT_BATCH,
    threads: int | None = 1,
) -> ProtocolReport:
    """Monte Carlo AAV protocol with a single readout variable.

    Give either ``n_attempts`` (trials run; the number kept is random) or
    ``n_postselected`` (trials are run until exactly that many survive
    post-selection; the number of attempts is then random).

    For ``readout="p"`` the estimate's real part is the mean pointer momentum;
    for ``readout="q"`` its imaginary part is ``-hbar <q> / (2 sigma_q^2)``. The
    component that was not read is NaN. Use :func:`combine_readouts` to merge a
    p-run and a q-run.
    """
    if readout not in ("p", "q"):
        raise ValueError(f"readout must be 'p' or 'q', got {readout!r}")
    if (n_attempts is None) == (n_postselected is None):
        raise ValueError("give exactly one of n_attempts and n_postselected")
    total = n_attempts if n_attempts is not None else n_postselected
    if total < 1:
        raise ValueError("need at least one trial")

    A = qkernel.as_operator(A)
    aw = weak_value(A, pre, post)
    grid = Grid.for_pointer(sigma_q) if grid is None else grid
    pointer, success_prob = postselected_pointer(A, pre, post, sigma_q, grid)
    hbar = grid.hbar
    momentum = pointer.in_momentum()
    exact_means = (momentum.mean(), pointer.mean())
    read_state = momentum if readout == "p" else pointer
    probs, axis = read_state.probabilities(), read_state.axis
    shift = exact_means[0] if readout == "p" else exact_means[1]

    sizes = [batch_size] * (total // batch_size)
    if total % batch_size:
        sizes.append(total % batch_size)
    jobs = []
    for i, size in enumerate(sizes):
        if n_attempts is not None:
            jobs.append((i, seed, probs, axis, shift, success_prob, size, None))
        else:
            jobs.append((i, seed, probs, axis, shift, success_prob, None, size))
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _run_batch(*job), jobs))
    else:
        results = [_run_batch(*job) for job in jobs]

    attempts = sum(r[0] for r in results)
    kept = sum(r[1] for r in results)
    s1 = math.fsum(r[2] for r in results)
    s2 = math.fsum(r[3] for r in results)
    if kept:
        dev = s1 / kept
        mean = shift + dev
        var = max(s2 - kept * dev * dev, 0.0) / (kept - 1) if kept > 1 else float("nan")
        sem = math.sqrt(var / kept) if kept > 1 else float("nan")
    else:
        mean = sem = float("nan")

    nan = float("nan")
    if readout == "p":
        value = complex(mean, nan)
        stderr_re, stderr_im = sem, None
        sampled_means = (mean, None)
    else:
        scale = hbar / (2 * sigma_q**2)
        value = complex(nan, -scale * mean)
        stderr_re, stderr_im = None, scale * sem
        sampled_means = (None, mean)
    estimate = WeakValueResult(value, aw.overlap, "monte-carlo", stderr_re, stderr_im)
    return ProtocolReport(
        exact_weak_value=aw.value,
        estimate=estimate,
        success_prob=success_prob,
        n_attempts=attempts,
        n_postselected=kept,
        readout=readout,
        sigma_q=float(sigma_q),
        hbar=hbar,
        seed=seed_repr(seed),
        pointer_means=sampled_means,
        predicted_means=predicted_means(aw.value, sigma_q, hbar),
        exact_pointer_means=exact_means,
    )


def combine_readouts(p_report: ProtocolReport, q_report: ProtocolReport) -> WeakValueResult:
    """Full complex estimate from a p-readout run and a q-readout run."""
    if p_report.readout != "p" or q_report.readout != "q":
        raise ValueError("expected one p-readout report and one q-readout report")
    return WeakValueResult(
        complex(p_report.estimate.value.real, q_report.estimate.value.imag),
        p_report.estimate.overlap,
        "monte-carlo",
        p_report.estimate.stderr_re,
        q_report.estimate.stderr_im,
    )


def first_order_bias(A, pre: StateVector, post: StateVector, sigma_q: float, grid: Grid | None = None) -> float:
    """|exact post-selected <p> - Re A_w|, computed on the grid without sampling."""
    aw = weak_value(A, pre, post).value
    pointer, _ = postselected_pointer(A, pre, post, sigma_q, grid)
    return abs(pointer.in_momentum().mean() - aw.real)


def multi_weak_values(
    observables: Sequence,
    pre: StateVector,
    post: StateVector,
    sigmas: Sequence[float],
    *,
    n: int = 256,
    hbar: float | None = None,
) -> list[WeakValueResult]:
    """Weak values of several observables read from one pointer each.

    Pointer ``alpha`` is coupled through ``exp(i q_alpha A_alpha / hbar)`` in
    list order, all on the same system, followed by a single post-selection.
    Each pointer's exact post-selected momentum and coordinate means are turned
    into a weak-value estimate via the first-order relations. The joint
    wavefunction lives on ``n ** len(observables)`` points, so keep the list
    short.
    """
    observables = [qkernel.as_operator(a) for a in observables]
    if len(observables) != len(sigmas):
        raise ValueError("need one pointer width per observable")
    if not observables:
        return []
    overlap = weak_value(observables[0], pre, post).overlap
    grids = [Grid.for_pointer(s, n=n, hbar=hbar) for s in sigmas]

    state = pre.coeffs  # shape (dim, n_1, ..., n_alpha) after alpha couplings
    for A, s, grid in zip(observables, sigmas, grids):
        pvm = qkernel.spectral_decompose(A)
        if pvm.dim != pre.dim:
            raise qkernel.DimensionMismatch(f"observable dim {pvm.dim} != system dim {pre.dim}")
        phi = gaussian_pointer(grid, s).amplitudes
        new = np.zeros(state.shape + (grid.n,), dtype=complex)
        for a, proj in zip(pvm.eigenvalues, pvm.projectors):
            branch = np.tensordot(proj.entries, state, axes=(1, 0))
            new += branch[..., None] * (np.exp(1j * grid.q * a / grid.hbar) * phi)
        state = new

    f = np.tensordot(post.coeffs.conj(), state, axes=(0, 0))
    weight = float(np.prod([g.spacing for g in grids]))
    prob = float(np.sum(np.abs(f) ** 2) * weight)
    if prob < MIN_SUCCESS_PROB:
        raise ZeroPostSelectionProbability(f"post-selection succeeds with probability {prob:.3e}")
    density_q = np.abs(f) ** 2
    density_q /= density_q.sum()

    results = []
    for alpha, (s, grid) in enumerate(zip(sigmas, grids)):
        others = tuple(i for i in range(f.ndim) if i != alpha)
        mean_q = float(np.sum(density_q.sum(axis=others) * grid.q))
        density_p = np.abs(q_to_p(f, grid, axis=alpha)) ** 2
        marginal_p = density_p.sum(axis=others)
        mean_p = float(np.sum(marginal_p * grid.p) / marginal_p.sum())
        value = estimate_from_means(mean_p, mean_q, s, grid.hbar)
        results.append(WeakValueResult(value, overlap, "pointer-exact"))
    return results
