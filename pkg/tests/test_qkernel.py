import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakvals import qkernel
from weakvals.errors import (
    BadFactorization,
    DimensionMismatch,
    InvalidPvm,
    NotNormalized,
    NotProjector,
    NotSelfAdjoint,
    ZeroProbabilityBranch,
)
from weakvals.qkernel import (
    PROJECTOR_0,
    SIGMA_X,
    SIGMA_Z,
    DensityMatrix,
    Operator,
    Pvm,
    StateVector,
    born_probability,
    collapse,
    expectation,
    inner,
    partial_trace,
    random_density_matrix,
    random_observable,
    random_state,
    spectral_decompose,
    tensor,
)

dims = st.integers(min_value=2, max_value=8)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestTypes:
    def test_state_vector_rejects_unnormalized(self):
        with pytest.raises(NotNormalized):
            StateVector([1.0, 1.0])

    def test_values_are_read_only(self):
        v = StateVector.basis(2, 0)
        with pytest.raises(ValueError):
            v.coeffs[0] = 2

    def test_self_adjoint_flag_is_validated(self):
        assert SIGMA_X.self_adjoint
        assert not Operator([[0, 1], [0, 0]]).self_adjoint
        assert not Operator([[0, 1], [1 + 1e-9, 0]]).self_adjoint

    def test_density_matrix_checks(self):
        with pytest.raises(ValueError):
            DensityMatrix([[1, 0], [0, 1]])
        with pytest.raises(ValueError):
            DensityMatrix([[1.5, 0], [0, -0.5]])

    def test_pvm_rejects_incomplete_set(self):
        with pytest.raises(InvalidPvm):
            Pvm((PROJECTOR_0,), (1.0,))


class TestInner:
    def test_normalization(self, rng):
        psi = random_state(5, rng)
        assert inner(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthonormal_basis(self):
        assert inner(StateVector.basis(2, 0), StateVector.basis(2, 1)) == 0

    def test_worked_overlap(self, plus):
        post = StateVector.normalized([1, -2])
        # (1*1 + (-2)*1) / sqrt(2*5)
        assert inner(post, plus) == pytest.approx(-1 / np.sqrt(10), abs=1e-15)

    def test_conjugate_linear_in_bra(self, rng):
        a, b = random_state(3, rng), random_state(3, rng)
        phase = np.exp(0.7j)
        assert inner(StateVector(phase * a.coeffs), b) == pytest.approx(np.conj(phase) * inner(a, b))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            inner(StateVector.basis(2, 0), StateVector.basis(3, 0))


class TestTensor:
    def test_basis_product(self):
        v = tensor(StateVector.basis(2, 0), StateVector.basis(2, 0))
        np.testing.assert_array_equal(v.coeffs, [1, 0, 0, 0])

    def test_identity(self):
        out = tensor(Operator.identity(2), Operator.identity(3))
        np.testing.assert_array_equal(out.entries, np.eye(6))

    def test_sigma_z_on_first_factor(self):
        ket01 = tensor(StateVector.basis(2, 0), StateVector.basis(2, 1))
        op = tensor(SIGMA_Z, Operator.identity(2))
        # hand-built diag(1, 1, -1, -1) for left-outermost ordering
        oracle = np.diag([1, 1, -1, -1]) @ np.array([0, 1, 0, 0])
        np.testing.assert_allclose(op.apply(ket01), oracle)
        np.testing.assert_allclose(op.apply(ket01), ket01.coeffs)


def _ptrace_loops(rho, da, db, keep):
    out = np.zeros((da, da) if keep == 0 else (db, db), dtype=complex)
    for i, j, k in itertools.product(range(out.shape[0]), range(out.shape[0]), range(db if keep == 0 else da)):
        if keep == 0:
            out[i, j] += rho[i * db + k, j * db + k]
        else:
            out[i, j] += rho[k * db + i, k * db + j]
    return out


class TestPartialTrace:
    def test_product_state(self, rng):
        ra, rb = random_density_matrix(2, rng), random_density_matrix(3, rng)
        np.testing.assert_allclose(partial_trace(tensor(ra, rb), [2, 3], 0).entries, ra.entries, atol=1e-12)
        np.testing.assert_allclose(partial_trace(tensor(ra, rb), [2, 3], 1).entries, rb.entries, atol=1e-12)

    @pytest.mark.parametrize("keep", [0, 1])
    def test_bell_state_is_maximally_mixed(self, keep):
        bell = StateVector.normalized([1, 0, 0, 1])
        np.testing.assert_allclose(partial_trace(bell.density_matrix(), [2, 2], keep).entries, np.eye(2) / 2)

    def test_matches_loop_oracle(self, rng):
        rho = random_density_matrix(6, rng)
        for keep in (0, 1):
            np.testing.assert_allclose(
                partial_trace(rho, [2, 3], keep).entries, _ptrace_loops(rho.entries, 2, 3, keep), atol=1e-14
            )

    def test_three_factors(self, rng):
        ra, rb, rc = (random_density_matrix(d, rng) for d in (2, 3, 2))
        rho = qkernel.tensor_all(ra, rb, rc)
        np.testing.assert_allclose(partial_trace(rho, [2, 3, 2], 1).entries, rb.entries, atol=1e-12)

    @pytest.mark.parametrize("dims_, keep", [([2, 2], 2), ([2, 2], -1), ([2, 3], 0)])
    def test_bad_factorization(self, dims_, keep):
        rho = StateVector.normalized([1, 0, 0, 1]).density_matrix()
        with pytest.raises(BadFactorization):
            partial_trace(rho, dims_, keep)


class TestSpectral:
    def test_sigma_z(self):
        pvm = spectral_decompose(SIGMA_Z)
        assert sorted(pvm.eigenvalues) == [-1.0, 1.0]
        by_value = dict(zip(pvm.eigenvalues, pvm.projectors))
        np.testing.assert_allclose(by_value[1.0].entries, [[1, 0], [0, 0]], atol=1e-15)
        np.testing.assert_allclose(by_value[-1.0].entries, [[0, 0], [0, 1]], atol=1e-15)

    def test_identity_fully_degenerate(self):
        pvm = spectral_decompose(Operator.identity(3))
        assert len(pvm) == 1
        assert pvm.eigenvalues[0] == pytest.approx(1.0)
        np.testing.assert_allclose(pvm.projectors[0].entries, np.eye(3), atol=1e-12)

    def test_random_reconstruction(self, rng):
        A = random_observable(6, rng)
        assert np.max(np.abs(spectral_decompose(A).reconstruct().entries - A.entries)) < 1e-8

    def test_degenerate_block_merged(self, rng):
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        A = Operator(q @ np.diag([2.0, 2.0, -1.0, 5.0]) @ q.T)
        pvm = spectral_decompose(A)
        assert len(pvm) == 3
        ranks = {round(a): round(np.trace(p.entries).real) for a, p in zip(pvm.eigenvalues, pvm.projectors)}
        assert ranks == {2: 2, -1: 1, 5: 1}

    def test_rejects_non_self_adjoint(self):
        with pytest.raises(NotSelfAdjoint):
            spectral_decompose(Operator([[0, 1], [0, 0]]))


class TestBorn:
    def test_certain_outcome(self, zero):
        assert born_probability(PROJECTOR_0, zero) == 1.0

    def test_half(self, plus):
        assert born_probability(PROJECTOR_0, plus) == pytest.approx(0.5, abs=1e-15)

    def test_full_pvm_sums_to_one(self, rng):
        psi = random_state(5, rng)
        pvm = spectral_decompose(random_observable(5, rng))
        assert sum(born_probability(p, psi) for p in pvm.projectors) == pytest.approx(1.0, abs=1e-12)

    def test_density_matrix_input(self, rng):
        rho = random_density_matrix(4, rng)
        pvm = spectral_decompose(random_observable(4, rng))
        assert sum(born_probability(p, rho) for p in pvm.projectors) == pytest.approx(1.0, abs=1e-12)

    def test_not_projector(self, plus):
        with pytest.raises(NotProjector):
            born_probability(SIGMA_Z, plus)


class TestExpectation:
    def test_eigenstate(self, zero):
        assert expectation(SIGMA_Z, zero) == 1.0

    def test_plus_state(self, plus):
        assert expectation(SIGMA_Z, plus) == pytest.approx(0.0, abs=1e-15)

    def test_matches_spectral_sum(self, rng):
        A, psi = random_observable(5, rng), random_state(5, rng)
        pvm = spectral_decompose(A)
        oracle = sum(a * born_probability(p, psi) for a, p in zip(pvm.eigenvalues, pvm.projectors))
        assert expectation(A, psi) == pytest.approx(oracle, abs=1e-8)

    def test_mixed_state_trace_formula(self, rng):
        A, rho = random_observable(4, rng), random_density_matrix(4, rng)
        assert expectation(A, rho) == pytest.approx(np.trace(A.entries @ rho.entries).real, abs=1e-12)

    def test_rejects_non_self_adjoint(self, plus):
        with pytest.raises(NotSelfAdjoint):
            expectation(Operator([[0, 1], [0, 0]]), plus)


class TestCollapse:
    def test_projects_onto_outcome(self, plus):
        out = collapse(PROJECTOR_0, plus)
        np.testing.assert_allclose(out.coeffs, [1, 0], atol=1e-15)

    def test_idempotent(self, rng):
        psi = random_state(4, rng)
        P = spectral_decompose(random_observable(4, rng)).projectors[0]
        once = collapse(P, psi)
        np.testing.assert_allclose(collapse(P, once).coeffs, once.coeffs, atol=1e-12)

    def test_zero_probability_branch(self, zero):
        with pytest.raises(ZeroProbabilityBranch):
            collapse(qkernel.PROJECTOR_1, zero)

    def test_density_matrix(self, rng):
        rho = random_density_matrix(3, rng)
        P = StateVector.basis(3, 1).projector()
        out = collapse(P, rho)
        np.testing.assert_allclose(out.entries, P.entries, atol=1e-12)


class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(dim=dims, seed=seeds, theta=st.floats(0, 2 * np.pi))
    def test_phase_invariance(self, dim, seed, theta):
        rng = np.random.default_rng(seed)
        psi, A = random_state(dim, rng), random_observable(dim, rng)
        rotated = StateVector(np.exp(1j * theta) * psi.coeffs)
        assert abs(expectation(A, psi) - expectation(A, rotated)) < 1e-12 * max(1, np.abs(A.entries).max() * dim)
        for P in spectral_decompose(A).projectors:
            assert abs(born_probability(P, psi) - born_probability(P, rotated)) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(dim=dims, seed=seeds)
    def test_born_completeness(self, dim, seed):
        rng = np.random.default_rng(seed)
        psi, pvm = random_state(dim, rng), spectral_decompose(random_observable(dim, rng))
        assert abs(sum(born_probability(p, psi) for p in pvm.projectors) - 1) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(da=st.integers(2, 4), db=st.integers(2, 4), seed=seeds)
    def test_partial_trace_recovers_factors(self, da, db, seed):
        rng = np.random.default_rng(seed)
        ra, rb = random_density_matrix(da, rng), random_density_matrix(db, rng)
        rho = tensor(ra, rb)
        assert np.abs(partial_trace(rho, [da, db], 0).entries - ra.entries).max() < 1e-12
        assert np.abs(partial_trace(rho, [da, db], 1).entries - rb.entries).max() < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(dim=dims, seed=seeds)
    def test_spectral_reconstruction(self, dim, seed):
        A = random_observable(dim, np.random.default_rng(seed))
        assert np.abs(spectral_decompose(A).reconstruct().entries - A.entries).max() < 1e-8
