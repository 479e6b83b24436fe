"""Classical post-selection demonstrations.

* Pendulums: a large ensemble with uniformly random amplitude, frequency and
  phase is culled to the members matching a target Fourier series. The
  subensemble reproduces the target waveform although every parameter
  marginal of the full ensemble stays uniform.
* Berkson: two independent binary conditions become negatively correlated once
  the sample is restricted to subjects with at least one of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateSample, TargetUnmatched
from .pointer import SeedLike, child_seed

TWO_PI = 2 * np.pi
WAVEFORM_SAMPLES = 512


@dataclass(frozen=True)
class Pendulum:
    amplitude: float
    frequency: float
    phase: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.frequency > 0:
            raise ValueError("frequency must be > 0")
        if not 0 <= self.phase < TWO_PI:
            raise ValueError("phase must lie in [0, 2*pi)")


@dataclass(frozen=True)
class Ranges:
    """Bounds of the uniform distributions the ensemble is drawn from."""

    amplitude: tuple = (0.25, 1.0)
    frequency: tuple = (0.75, 1.75)
    phase: tuple = (0.0, TWO_PI)


@dataclass(frozen=True)
class FourierTarget:
    """Target components as (frequency, amplitude, phase) triples plus match tolerances."""

    components: tuple
    amplitude_rtol: float = 0.02
    frequency_rtol: float = 0.02
    phase_atol: float = 0.1

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        if not comps:
            raise ValueError("target needs at least one component")
        freqs = [c[0] for c in comps]
        if len(set(freqs)) != len(freqs):
            raise ValueError("target frequencies must be distinct")
        object.__setattr__(self, "components", comps)

    @property
    def fundamental_period(self) -> float:
        return TWO_PI / min(c[0] for c in self.components)


# synthetic major triad, frequency ratios 4:5:6
DEFAULT_TARGET = FourierTarget(((1.0, 0.9, 0.5), (1.25, 0.8, 2.0), (1.5, 0.7, 4.0)))


def waveform(components, t: np.ndarray) -> np.ndarray:
    """Sum of ``a cos(w t + phi)`` over (w, a, phi) triples."""
    out = np.zeros_like(t, dtype=float)
    for w, a, phi in components:
        out += a * np.cos(w * t + phi)
    return out


def draw_pendulums(n: int, seed: SeedLike, ranges: Ranges = Ranges(), chunk: int = 1 << 18) -> np.ndarray:
    """``(n, 3)`` array of (amplitude, frequency, phase) columns.

    Generated in chunks; chunk ``i`` uses ``child_seed(seed, i)`` and chunks are
    concatenated by index.
    """
    parts = []
    for i, start in enumerate(range(0, n, chunk)):
        size = min(chunk, n - start)
        rng = np.random.default_rng(child_seed(seed, i))
        u = rng.random((size, 3))
        lo = np.array([ranges.amplitude[0], ranges.frequency[0], ranges.phase[0]])
        hi = np.array([ranges.amplitude[1], ranges.frequency[1], ranges.phase[1]])
        parts.append(lo + u * (hi - lo))
    return np.concatenate(parts) if parts else np.empty((0, 3))


def _phase_distance(a, b):
    d = np.mod(a - b, TWO_PI)
    return np.minimum(d, TWO_PI - d)


def match_scores(params: np.ndarray, target: FourierTarget) -> np.ndarray:
    """``(n, k)`` normalized distances; a pendulum matches component j when its score is <= 1."""
    amp, freq, phase = params[:, 0:1], params[:, 1:2], params[:, 2:3]
    comps = np.array(target.components)
    tw, ta, tp = comps[:, 0], comps[:, 1], comps[:, 2]
    da = np.abs(amp - ta) / (target.amplitude_rtol * ta)
    df = np.abs(freq - tw) / (target.frequency_rtol * tw)
    dp = _phase_distance(phase, tp) / target.phase_atol
    return np.maximum(np.maximum(da, df), dp)


def reconstruction_error(components, target: FourierTarget, samples: int = WAVEFORM_SAMPLES) -> float:
    """Relative L2 distance over one fundamental period of the target."""
    t = np.linspace(0.0, target.fundamental_period, samples, endpoint=False)
    ref = waveform(target.components, t)
    return float(np.linalg.norm(waveform(components, t) - ref) / np.linalg.norm(ref))


def pendulum_postselect(
    n: int,
    target: FourierTarget = DEFAULT_TARGET,
    seed: SeedLike = 0,
    ranges: Ranges = Ranges(),
) -> tuple[list[Pendulum], float]:
    """Post-select the pendulums matching ``target`` and rebuild its waveform.

    Returns every matching pendulum and the reconstruction error. Each target
    component is represented by the one matching pendulum whose partial
    waveform is closest to it in L2 over the fundamental period.
    """
    if n < 1:
        raise ValueError("need at least one pendulum")
    params = draw_pendulums(n, seed, ranges)
    scores = match_scores(params, target)
    matched = scores <= 1.0
    missing = [i for i in range(len(target.components)) if not matched[:, i].any()]
    if missing:
        raise TargetUnmatched(
            f"no pendulum within tolerance of target component(s) {missing}", unmatched=missing
        )
    subensemble = [Pendulum(*map(float, row)) for row in params[matched.any(axis=1)]]
    return subensemble, reconstruction_error(representatives(params, target, scores), target)


def representatives(params: np.ndarray, target: FourierTarget, scores: np.ndarray | None = None) -> list[tuple]:
    """One (frequency, amplitude, phase) per target component, nearest in waveform L2."""
    params = np.asarray(params, dtype=float).reshape(-1, 3)
    scores = match_scores(params, target) if scores is None else scores
    t = np.linspace(0.0, target.fundamental_period, WAVEFORM_SAMPLES, endpoint=False)
    chosen = []
    for j, comp in enumerate(target.components):
        cand = params[scores[:, j] <= 1.0]
        if not len(cand):
            raise TargetUnmatched(f"no pendulum within tolerance of target component {j}", unmatched=[j])
        partials = cand[:, 0:1] * np.cos(np.outer(cand[:, 1], t) + cand[:, 2:3])
        dist = np.linalg.norm(partials - waveform([comp], t), axis=1)
        a, w, phi = cand[np.argmin(dist)]
        chosen.append((float(w), float(a), float(phi)))
    return chosen


def marginal_uniformity(params: np.ndarray, ranges: Ranges = Ranges(), bins: int = 50) -> dict[str, float]:
    """Chi-square goodness-of-fit p-value of each parameter marginal against its uniform range."""
    out = {}
    for col, name in enumerate(("amplitude", "frequency", "phase")):
        lo, hi = getattr(ranges, name)
        counts, _ = np.histogram(params[:, col], bins=bins, range=(lo, hi))
        out[name] = float(stats.chisquare(counts).pvalue)
    return out


@dataclass(frozen=True)
class AdmitRule:
    """Base rates of the two conditions; admission is their logical OR."""

    rate_a: float = 0.2
    rate_b: float = 0.2


def _pearson(x: np.ndarray, y: np.ndarray, label: str) -> float:
    if x.std() == 0 or y.std() == 0:
        raise DegenerateSample(f"{label}: an indicator is constant, correlation undefined")
    return float(np.corrcoef(x, y)[0, 1])


def berkson_demo(n: int, rule: AdmitRule = AdmitRule(), seed: SeedLike = 0) -> tuple[float, float]:
    """Correlation of two independent indicators before and after OR-admission."""
    if n < 1000:
        raise ValueError("berkson_demo needs n >= 1000")
    rng = np.random.default_rng(child_seed(seed, 0))
    a = (rng.random(n) < rule.rate_a).astype(float)
    b = (rng.random(n) < rule.rate_b).astype(float)
    r_all = _pearson(a, b, "full population")
    admitted = (a > 0) | (b > 0)
    r_admitted = _pearson(a[admitted], b[admitted], "admitted subsample")
    return r_all, r_admitted
