"""Weak values between a pre-selected and a post-selected state.

Two independent routes are provided: the defining ratio
``<post|A|pre> / <post|pre>``, and an exact extraction from expectation values
of the positive "weak operators" ``E(z) = (1 + zA)|pre><pre|(1 + z*A)`` taken in
the post-selected state. The second route never divides matrix elements of
``A``; it only uses expectation values and the overlap probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qkernel
from .errors import OverlapTooSmall
from .qkernel import Operator, Pvm, StateVector

DEFAULT_EPS_OVERLAP = 1e-12

METHODS = ("direct", "weak-operator", "monte-carlo", "pointer-exact")


@dataclass(frozen=True)
class WeakValueResult:
    value: complex
    overlap: complex
    method: str
    stderr_re: Optional[float] = None
    stderr_im: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag

    def to_dict(self) -> dict:
        return {
            "value": complex_pair(self.value),
            "overlap": complex_pair(self.overlap),
            "method": self.method,
            "stderr_re": _finite_or_none(self.stderr_re),
            "stderr_im": _finite_or_none(self.stderr_im),
        }


def complex_pair(z: complex) -> list:
    z = complex(z)
    return [_finite_or_none(z.real), _finite_or_none(z.imag)]


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _checked_overlap(pre: StateVector, post: StateVector, eps: float) -> complex:
    overlap = qkernel.inner(post, pre)
    if abs(overlap) < eps:
        raise OverlapTooSmall(
            f"|<post|pre>| = {abs(overlap):.3e} is below {eps:.1e}; the weak value is undefined"
        )
    return overlap


def weak_value(A, pre: StateVector, post: StateVector, eps: float = DEFAULT_EPS_OVERLAP) -> WeakValueResult:
    A = qkernel.as_operator(A)
    qkernel.require_self_adjoint(A)
    overlap = _checked_overlap(pre, post, eps)
    numerator = complex(np.vdot(post.coeffs, A.apply(pre)))
    return WeakValueResult(numerator / overlap, overlap, "direct")


def weak_operator(A, psi: StateVector, z: complex) -> Operator:
    A = qkernel.as_operator(A)
    qkernel.require_self_adjoint(A)
    one = np.eye(A.dim)
    left = one + z * A.entries
    right = one + np.conj(z) * A.entries
    return Operator(left @ np.outer(psi.coeffs, psi.coeffs.conj()) @ right)


def extract_via_weak_operators(
    A, pre: StateVector, post: StateVector, eps: float = DEFAULT_EPS_OVERLAP
) -> WeakValueResult:
    """Weak value from the four expectations <E(1)>, <E(-1)>, <E(i)>, <E(-i)> in ``post``."""
    A = qkernel.as_operator(A)
    qkernel.require_self_adjoint(A)
    overlap = _checked_overlap(pre, post, eps)
    # |<post|pre>|^2 is itself an expectation value: that of |pre><pre| in post
    overlap_prob = qkernel.expectation(pre.projector(), post)
    if overlap_prob < eps**2:
        raise OverlapTooSmall(f"|<post|pre>|^2 = {overlap_prob:.3e} is below {eps**2:.1e}")

    def ev(z):
        return qkernel.expectation(weak_operator(A, pre, z), post)

    re = (ev(1) - ev(-1)) / (4 * overlap_prob)
    im = (ev(-1j) - ev(1j)) / (4 * overlap_prob)
    return WeakValueResult(complex(re, im), overlap, "weak-operator")


def flux_commutator_ops(A, psi: StateVector) -> tuple[Operator, Operator]:
    """The symmetrized product and the scaled commutator of ``A`` with ``|psi><psi|``.

    Their expectations in the post-selected state, divided by the overlap
    probability, are the real and imaginary parts of the weak value.
    """
    A = qkernel.as_operator(A)
    qkernel.require_self_adjoint(A)
    a = A.entries
    p = np.outer(psi.coeffs, psi.coeffs.conj())
    flux = 0.5 * (a @ p + p @ a)
    commutator = (a @ p - p @ a) / 2j
    return Operator(flux), Operator(commutator)


def projector_weak_values(
    pvm: Pvm, pre: StateVector, post: StateVector, eps: float = DEFAULT_EPS_OVERLAP
) -> list[complex]:
    overlap = _checked_overlap(pre, post, eps)
    return [complex(np.vdot(post.coeffs, p.apply(pre))) / overlap for p in pvm.projectors]
