import numpy as np
import pytest

from weakvals import qkernel
from weakvals.errors import EmptyBin
from weakvals.pointer import Grid, PointerState, free_evolve, gaussian_pointer, sample
from weakvals.scenarios import (
    central_bins,
    cheshire_report,
    cheshire_setup,
    guidance_velocity_oracle,
    mean_abs_deviation,
    velocity_bins,
    wiseman_velocity,
)
from weakvals.weakvalue import projector_weak_values, weak_value

PACKET_GRID = Grid(n=1024, length=40.0, hbar=1.0)


def packet(k=1.0):
    return gaussian_pointer(PACKET_GRID, 1.0, momentum=k)


class TestCheshire:
    def test_exact_pattern(self):
        setup = cheshire_setup()
        got = [weak_value(op, setup.pre, setup.post).value for op in setup.observables().values()]
        np.testing.assert_allclose(got, [1, 0, 0, 1], atol=1e-12)

    def test_hand_ratios(self):
        # <post|pre> = (1+1+1-1)/4 = 1/2; <post|Pi_R|pre> = (1-1)/4 = 0; <post|S Pi_R|pre> = (1+1)/4
        setup = cheshire_setup()
        assert qkernel.inner(setup.post, setup.pre) == pytest.approx(0.5)

    def test_path_pvm_sums_to_one(self):
        setup = cheshire_setup()
        pvm = qkernel.Pvm((setup.pi_left, setup.pi_right), (0.0, 1.0))
        assert sum(projector_weak_values(pvm, setup.pre, setup.post)) == pytest.approx(1, abs=1e-12)

    def test_spin_path_products_self_adjoint(self):
        obs = cheshire_setup().observables()
        assert obs["S_Pi_L"].self_adjoint and obs["S_Pi_R"].self_adjoint
        spin, right = cheshire_setup().spin, cheshire_setup().pi_right
        assert np.abs((spin @ right - right @ spin).entries).max() == 0

    def test_report(self):
        report = cheshire_report(cheshire_setup(), 0.05, n_postselected=20_000, seed=8)
        assert list(report) == ["Pi_L", "Pi_R", "S_Pi_L", "S_Pi_R"]
        for exact, est in report.values():
            assert abs(est.value.real - exact.real) < 3 * est.stderr_re

    def test_report_deterministic(self):
        a = cheshire_report(cheshire_setup(), 0.05, 5000, seed=1)
        b = cheshire_report(cheshire_setup(), 0.05, 5000, seed=1)
        assert {k: v[1].to_dict() for k, v in a.items()} == {k: v[1].to_dict() for k, v in b.items()}


class TestOracle:
    def test_carrier_packet_constant(self):
        field = guidance_velocity_oracle(packet(1.0), 1.0)
        # hbar k / m, up to the O(dx^2) central-difference error
        np.testing.assert_allclose(field.velocities, 1.0, atol=1e-3)

    def test_mass_scaling(self):
        field = guidance_velocity_oracle(packet(2.0), 4.0)
        assert np.allclose(field.velocities, 0.5, atol=1e-3)

    def test_real_wavefunction(self):
        field = guidance_velocity_oracle(packet(0.0), 1.0)
        assert np.all(field.velocities == 0)

    def test_spreading_packet(self):
        # evolved Gaussian: v(x) = x t hbar^2 / (4 m^2 sigma^4 + hbar^2 t^2) for zero carrier, sigma = 1
        psi = free_evolve(packet(0.0), 1.0, 1.0)
        field = guidance_velocity_oracle(psi, 1.0)
        np.testing.assert_allclose(field.velocities, field.bin_centers / 5.0, atol=1e-3)

    def test_node_masked(self):
        q = PACKET_GRID.q
        amps = q * np.exp(-(q**2) / 4) * np.exp(1j * q)
        psi = PointerState.normalized(PACKET_GRID, amps)
        field = guidance_velocity_oracle(psi, 1.0, bins=21)
        assert np.all(np.isfinite(field.velocities[field.present]))
        far = np.zeros(PACKET_GRID.n, dtype=complex)
        far[:20] = 1
        empty = guidance_velocity_oracle(PointerState.normalized(PACKET_GRID, far), 1.0, bins=5)
        assert np.isfinite(empty.velocities).sum() <= 5


class TestWiseman:
    def test_bins_span_two_std(self):
        edges = velocity_bins(packet(), 21)
        assert edges[0] == pytest.approx(-2.0, abs=1e-9) and edges[-1] == pytest.approx(2.0, abs=1e-9)

    def test_zero_attempts(self):
        field = wiseman_velocity(packet(), 1.0, 0.05, 0.1, 0)
        assert not field.present.any()
        with pytest.raises(EmptyBin):
            field.velocity_at(10)

    def test_conditional_estimator_tracks_oracle(self):
        psi = packet()
        oracle = guidance_velocity_oracle(psi, 1.0)
        field = wiseman_velocity(psi, 1.0, 0.05, 0.1, 200_000, seed=2, estimator="conditional")
        mask = central_bins(field, psi)
        assert mask.sum() == 11
        assert mean_abs_deviation(field, oracle, mask) < 0.03

    def test_conditional_ladder_improves(self):
        psi = packet()
        oracle = guidance_velocity_oracle(psi, 1.0)
        devs = []
        for tau, s in ((0.1, 0.2), (0.05, 0.1), (0.025, 0.05)):
            field = wiseman_velocity(psi, 1.0, tau, s, 1_000_000, seed=0, estimator="conditional")
            devs.append(mean_abs_deviation(field, oracle, central_bins(field, psi)))
        assert devs[0] >= devs[1] >= devs[2]
        assert devs[2] < 0.01

    def test_sampled_estimator_is_unbiased_within_noise(self):
        psi = packet()
        field = wiseman_velocity(psi, 1.0, 0.1, 0.5, 400_000, seed=3)
        mask = central_bins(field, psi)
        z = (field.velocities[mask] - 1.0) / field.stderr[mask]
        # tau-induced bias is small compared with the readout noise at these settings
        assert np.abs(z).max() < 4.5

    def test_symmetric_packet_antisymmetric_field(self):
        psi = packet(0.0)
        field = wiseman_velocity(psi, 1.0, 0.05, 0.1, 400_000, seed=4, estimator="conditional")
        v, err = field.velocities, field.stderr
        ok = field.present & field.present[::-1]
        assert np.all(np.abs(v[ok] + v[::-1][ok]) < 5 * np.hypot(err[ok], err[::-1][ok]) + 1e-3)

    def test_deterministic_and_thread_independent(self):
        psi = packet()
        a = wiseman_velocity(psi, 1.0, 0.05, 0.1, 50_000, seed=7, batch_size=8192)
        b = wiseman_velocity(psi, 1.0, 0.05, 0.1, 50_000, seed=7, batch_size=8192, threads=3)
        assert a.to_dict() == b.to_dict()

    def test_weak_coupling_leaves_position_distribution(self):
        # without post-selection the strong readout marginal matches free evolution alone
        psi = packet()
        tau, s = 0.05, 0.1
        field = wiseman_velocity(psi, 1.0, tau, s, 200_000, seed=5, min_count=1)
        free = sample(free_evolve(psi, tau, 1.0), 5, 200_000)
        edges = velocity_bins(psi)
        expected, _ = np.histogram(free, bins=edges)
        diff = field.counts - expected
        assert np.all(np.abs(diff) < 5 * np.sqrt(2 * np.maximum(expected, 1)))

    def test_min_count(self):
        field = wiseman_velocity(packet(), 1.0, 0.05, 0.1, 2000, seed=1, min_count=150)
        assert np.all(field.present == (field.counts >= 150))

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            wiseman_velocity(packet(), 1.0, 0.0, 0.1, 10)
        with pytest.raises(ValueError):
            wiseman_velocity(packet(), -1.0, 0.1, 0.1, 10)
        with pytest.raises(ValueError):
            wiseman_velocity(packet(), 1.0, 0.1, 0.1, 10, estimator="other")

    def test_rows_and_dict(self):
        field = wiseman_velocity(packet(), 1.0, 0.05, 0.1, 1000, seed=1, min_count=10**6)
        rows = list(field.rows())
        assert len(rows) == 21 and all(v is None for _, v, _ in rows)
        assert field.to_dict()["velocities"] == [None] * 21
