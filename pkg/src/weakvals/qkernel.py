"""Finite-dimensional quantum kernel.

Dense complex state vectors, density matrices and operators, with the usual
composition (tensor product, partial trace) and measurement machinery (spectral
decomposition into a PVM, Born probabilities, expectation values, collapse).

All value types are immutable: their arrays are copied on construction and
flagged read-only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .errors import (
    BadFactorization,
    DimensionMismatch,
    InvalidDensityMatrix,
    InvalidPvm,
    NotNormalized,
    NotProjector,
    NotSelfAdjoint,
    ZeroProbabilityBranch,
)

NORM_TOL = 1e-12
SELF_ADJOINT_TOL = 1e-10
PROJECTOR_TOL = 1e-10
PSD_TOL = 1e-10
DEGENERACY_TOL = 1e-8
ZERO_PROB_TOL = 1e-12


def _frozen(array, ndim: int) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    if out.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {out.shape}")
    out.flags.writeable = False
    return out


def _hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm ket. The global phase is kept as given."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = _frozen(self.coeffs, 1)
        if coeffs.size == 0:
            raise ValueError("state vector must have positive dimension")
        norm2 = float(np.vdot(coeffs, coeffs).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NotNormalized(f"state vector has squared norm {norm2!r}, expected 1")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def normalized(cls, coeffs) -> "StateVector":
        v = np.asarray(coeffs, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise NotNormalized("cannot normalize the zero vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def projector(self) -> "Operator":
        return Operator(np.outer(self.coeffs, self.coeffs.conj()))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.coeffs, self.coeffs.conj()))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix.

    ``self_adjoint`` is computed from the entries, never trusted from the caller.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries, 2)
        if entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"operator must be square, got {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def self_adjoint(self) -> bool:
        return _hermiticity_residual(self.entries) <= SELF_ADJOINT_TOL

    @property
    def is_projector(self) -> bool:
        m = self.entries
        return self.self_adjoint and float(np.max(np.abs(m @ m - m))) <= PROJECTOR_TOL

    @property
    def H(self) -> "Operator":
        return Operator(self.entries.conj().T)

    @classmethod
    def identity(cls, dim: int) -> "Operator":
        return cls(np.eye(dim))

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.entries @ other.entries)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.entries - other.entries)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.entries * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def apply(self, state: StateVector) -> np.ndarray:
        """Return the (unnormalized) vector ``self |state>``."""
        _check_dims(self.dim, state.dim)
        return self.entries @ state.coeffs


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries, 2)
        if entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {entries.shape}")
        if _hermiticity_residual(entries) > SELF_ADJOINT_TOL:
            raise InvalidDensityMatrix("density matrix is not self-adjoint")
        tr = complex(np.trace(entries))
        if abs(tr - 1.0) > NORM_TOL:
            raise InvalidDensityMatrix(f"density matrix has trace {tr!r}, expected 1")
        evals = np.linalg.eigvalsh(entries)
        if evals[0] < -PSD_TOL:
            raise InvalidDensityMatrix(f"density matrix has eigenvalue {evals[0]!r} < 0")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


@dataclass(frozen=True, eq=False)
class Pvm:
    """Projection-valued measure: projectors paired with their real eigenvalues."""

    projectors: tuple
    eigenvalues: tuple

    def __post_init__(self):
        projectors = tuple(p if isinstance(p, Operator) else Operator(p) for p in self.projectors)
        eigenvalues = tuple(float(a) for a in self.eigenvalues)
        if not projectors:
            raise InvalidPvm("a PVM needs at least one projector")
        if len(projectors) != len(eigenvalues):
            raise InvalidPvm("projectors and eigenvalues differ in length")
        dim = projectors[0].dim
        total = np.zeros((dim, dim), dtype=complex)
        for i, p in enumerate(projectors):
            _check_dims(dim, p.dim)
            if not p.is_projector:
                raise InvalidPvm(f"element {i} is not a self-adjoint idempotent")
            for j in range(i + 1, len(projectors)):
                if np.max(np.abs(p.entries @ projectors[j].entries)) > PROJECTOR_TOL:
                    raise InvalidPvm(f"elements {i} and {j} are not mutually exclusive")
            total += p.entries
        if np.max(np.abs(total - np.eye(dim))) > PROJECTOR_TOL:
            raise InvalidPvm("projectors do not resolve the identity")
        object.__setattr__(self, "projectors", projectors)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def dim(self) -> int:
        return self.projectors[0].dim

    def __len__(self):
        return len(self.projectors)

    def reconstruct(self) -> Operator:
        return Operator(sum(a * p.entries for a, p in zip(self.eigenvalues, self.projectors)))

    @classmethod
    def from_basis(cls, vectors: Sequence, eigenvalues: Sequence[float] | None = None) -> "Pvm":
        """Rank-one PVM built from an orthonormal basis."""
        vecs = [v.coeffs if isinstance(v, StateVector) else np.asarray(v, dtype=complex) for v in vectors]
        if eigenvalues is None:
            eigenvalues = range(len(vecs))
        return cls(tuple(Operator(np.outer(v, v.conj())) for v in vecs), tuple(eigenvalues))


State = Union[StateVector, DensityMatrix]


def as_state(obj) -> State:
    if isinstance(obj, (StateVector, DensityMatrix)):
        return obj
    arr = np.asarray(obj, dtype=complex)
    return StateVector(arr) if arr.ndim == 1 else DensityMatrix(arr)


def as_operator(obj) -> Operator:
    return obj if isinstance(obj, Operator) else Operator(obj)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} != {b}")


def require_self_adjoint(op: Operator, name: str = "operator") -> None:
    residual = _hermiticity_residual(op.entries)
    if residual > SELF_ADJOINT_TOL:
        raise NotSelfAdjoint(f"{name} is not self-adjoint (max |A - A^dagger| = {residual:.3e})")


def inner(bra: StateVector, ket: StateVector) -> complex:
    """<bra|ket>, conjugate-linear in ``bra``."""
    _check_dims(bra.dim, ket.dim)
    return complex(np.vdot(bra.coeffs, ket.coeffs))


def tensor(a, b):
    """Kronecker product with the left factor outermost.

    Works for pairs of state vectors, operators or density matrices.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.coeffs, b.coeffs))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.entries, b.entries))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_all(*factors):
    return reduce(tensor, factors)


def partial_trace(rho, dims: Sequence[int], keep: int) -> DensityMatrix:
    """Reduced density matrix of factor ``keep`` of a composite system."""
    if isinstance(rho, StateVector):
        rho = rho.density_matrix()
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != rho.dim:
        raise BadFactorization(f"factor dims {dims} do not multiply to {rho.dim}")
    if not 0 <= keep < len(dims):
        raise BadFactorization(f"keep index {keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = rho.entries.reshape(dims + dims)
    # move the kept row/column axes to the front, then trace the rest pairwise
    rest = [i for i in range(n) if i != keep]
    t = np.transpose(t, [keep] + rest + [n + keep] + [n + i for i in rest])
    d_keep, d_rest = dims[keep], int(np.prod([dims[i] for i in rest]))
    t = t.reshape(d_keep, d_rest, d_keep, d_rest)
    return DensityMatrix(np.einsum("ajbj->ab", t))


def spectral_decompose(A) -> Pvm:
    """PVM of a self-adjoint operator; eigenvalues closer than 1e-8 are merged."""
    A = as_operator(A)
    require_self_adjoint(A)
    evals, evecs = np.linalg.eigh(A.entries)
    groups = [[0]]
    for i in range(1, len(evals)):
        if evals[i] - evals[groups[-1][-1]] < DEGENERACY_TOL:
            groups[-1].append(i)
        else:
            groups.append([i])
    projectors, eigenvalues = [], []
    for g in groups:
        v = evecs[:, g]
        projectors.append(Operator(v @ v.conj().T))
        eigenvalues.append(float(np.mean(evals[g])))
    return Pvm(tuple(projectors), tuple(eigenvalues))


def born_probability(P, state) -> float:
    """Probability tr(P rho) of the outcome whose eigenprojector is ``P``."""
    P = as_operator(P)
    if not P.is_projector:
        raise NotProjector("Born probability requires a self-adjoint idempotent")
    return _expect(P, as_state(state))


def _expect(A: Operator, state: State) -> float:
    _check_dims(A.dim, state.dim)
    if isinstance(state, StateVector):
        value = np.vdot(state.coeffs, A.entries @ state.coeffs)
    else:
        value = np.trace(A.entries @ state.entries)
    scale = max(1.0, float(np.max(np.abs(A.entries))) * A.dim)
    if abs(value.imag) > SELF_ADJOINT_TOL * scale:
        raise NotSelfAdjoint(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def expectation(A, state) -> float:
    A = as_operator(A)
    require_self_adjoint(A)
    return _expect(A, as_state(state))


def collapse(P, state):
    """Project ``state`` with ``P`` and renormalize."""
    P = as_operator(P)
    state = as_state(state)
    prob = born_probability(P, state)
    if prob <= ZERO_PROB_TOL:
        raise ZeroProbabilityBranch(f"outcome has probability {prob:.3e}")
    if isinstance(state, StateVector):
        v = P.entries @ state.coeffs
        return StateVector(v / np.linalg.norm(v))
    m = P.entries @ state.entries @ P.entries
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m / np.trace(m).real)


# standard single-qubit operators
SIGMA_X = Operator([[0, 1], [1, 0]])
SIGMA_Y = Operator([[0, -1j], [1j, 0]])
SIGMA_Z = Operator([[1, 0], [0, -1]])
PROJECTOR_0 = Operator([[1, 0], [0, 0]])
PROJECTOR_1 = Operator([[0, 0], [0, 1]])


def random_state(dim: int, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector.normalized(v)


def random_observable(dim: int, rng: np.random.Generator) -> Operator:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return Operator(0.5 * (m + m.conj().T))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m / np.trace(m).real)
