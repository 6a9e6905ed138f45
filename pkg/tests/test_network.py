import math

import numpy as np
import pytest

import gossip_pca as gp
from gossip_pca.errors import MaxRoundsExceeded, NonFiniteValue, ValidationError
from gossip_pca.network import gossip_average_detailed


def _cfg(eps=1e-6, **kw):
    return gp.GossipAvgConfig(epsilon=eps, **kw)


class TestGossipAverage:
    def test_constant_values_zero_rounds(self):
        led = gp.ComplexityLedger()
        out, rounds = gossip_average_detailed(
            np.full(10, 3.25), _cfg(), np.random.default_rng(0), led
        )
        assert rounds == 0
        assert np.all(out == 3.25)
        assert led.overhead_reals_per_node == 0.0

    def test_two_nodes_one_round(self):
        out, rounds = gossip_average_detailed(
            np.array([0.0, 2.0]), _cfg(), np.random.default_rng(0), gp.ComplexityLedger()
        )
        assert rounds == 1
        assert np.all(out == 1.0)

    def test_sum_conserved(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(65) + 2.0  # odd n: one node idles per round
        total = vals.sum()
        out = gp.gossip_average(vals, _cfg(), rng, gp.ComplexityLedger())
        assert out.sum() == pytest.approx(total, rel=1e-9)

    def test_rounds_within_fitted_band(self, calibration):
        fix = calibration["gossip_rounds"]
        n, eps = fix["n"], fix["epsilon"]
        budget = math.log(n) * math.log(1.0 / eps)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            vals = rng.random(n)
            _, rounds = gossip_average_detailed(vals, _cfg(eps), rng, gp.ComplexityLedger())
            assert fix["c1"] * budget <= rounds <= fix["c2"] * budget

    def test_zero_values_converged_immediately(self):
        out, rounds = gossip_average_detailed(
            np.zeros(8), _cfg(), np.random.default_rng(0), gp.ComplexityLedger()
        )
        assert rounds == 0
        assert np.all(out == 0.0)

    def test_explicit_cap_respected(self):
        vals = np.random.default_rng(0).random(32)
        with pytest.raises(MaxRoundsExceeded):
            gp.gossip_average(vals, _cfg(1e-9, max_rounds=2), np.random.default_rng(1),
                              gp.ComplexityLedger())

    def test_epsilon_validation(self):
        with pytest.raises(ValidationError):
            gp.GossipAvgConfig(epsilon=0.0)
        with pytest.raises(ValidationError):
            gp.GossipAvgConfig(epsilon=1.5)

    def test_ledger_charges_participants(self):
        led = gp.ComplexityLedger()
        _, rounds = gossip_average_detailed(
            np.random.default_rng(2).random(64), _cfg(), np.random.default_rng(3), led
        )
        assert led.overhead_reals_per_node == pytest.approx(rounds)  # n even: all participate
        assert led.chi == 0.0


class TestDistributedNorm:
    def test_basis_vector(self):
        e1 = np.zeros(16)
        e1[0] = 1.0
        nrm = gp.distributed_norm(e1, _cfg(), np.random.default_rng(0), gp.ComplexityLedger())
        assert nrm == pytest.approx(1.0, rel=2e-6)

    def test_uniform_vector_exact(self):
        x = np.full(25, 1.0 / 5.0)
        nrm = gp.distributed_norm(x, _cfg(), np.random.default_rng(0), gp.ComplexityLedger())
        assert nrm == pytest.approx(1.0, rel=1e-12)

    def test_matches_exact_norm(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(128)
        nrm = gp.distributed_norm(x, _cfg(), rng, gp.ComplexityLedger())
        assert nrm == pytest.approx(np.linalg.norm(x), rel=2e-6)


class TestSpmvRound:
    def test_identity(self):
        m = gp.SymmetricMatrix.from_array(np.eye(8))
        s = gp.draw(m, gp.SparsifyScheme(n=8, d=8.0), np.random.default_rng(0))
        led = gp.ComplexityLedger()
        state = gp.NetworkState(values=np.arange(8.0))
        out = gp.spmv_round(state, s, led)
        assert np.array_equal(out.values, state.values)
        assert out.round == 1
        assert led.reals_sent_per_node == pytest.approx(1.0)
        assert led.mults_per_node == pytest.approx(1.0)

    def test_eigenvector_fixed_point(self, small_64):
        m, spec = small_64
        s = gp.draw(m, gp.SparsifyScheme(n=64, d=64.0), np.random.default_rng(0))
        out = gp.spmv_round(gp.NetworkState(values=spec.u), s, gp.ComplexityLedger())
        assert np.allclose(out.values, spec.lam * spec.u, atol=1e-10)

    def test_matches_dense_multiply(self):
        rng = np.random.default_rng(4)
        m = gp.make_synthetic(8, 0.5, rng, noise_edge=0.3)
        s = gp.draw(m, gp.SparsifyScheme(n=8, d=3.0), rng)
        x = rng.standard_normal(8)
        out = gp.spmv_round(gp.NetworkState(values=x), s, gp.ComplexityLedger())
        assert np.allclose(out.values, s.to_dense() @ x, atol=1e-12)

    def test_exhaustive_small_cases(self):
        # 100 random (matrix, scheme, vector) cases with n <= 16
        rng = np.random.default_rng(123)
        for _ in range(100):
            n = int(rng.integers(4, 17))
            a = rng.standard_normal((n, n))
            m = gp.SymmetricMatrix.from_array((a + a.T) / 2)
            d = float(rng.integers(1, n + 1))
            s = gp.draw(m, gp.SparsifyScheme(n=n, d=d), rng)
            x = rng.standard_normal(n)
            got = gp.spmv_round(gp.NetworkState(values=x), s, gp.ComplexityLedger()).values
            assert np.allclose(got, s.to_dense() @ x, atol=1e-12)

    def test_overflow_raises(self):
        m = gp.SymmetricMatrix.from_array(2.0 * np.eye(4))
        s = gp.draw(m, gp.SparsifyScheme(n=4, d=4.0), np.random.default_rng(0))
        state = gp.NetworkState(values=np.full(4, 1e308))
        with pytest.raises(NonFiniteValue):
            gp.spmv_round(state, s, gp.ComplexityLedger())

    def test_dimension_mismatch(self, small_64):
        m, _ = small_64
        s = gp.draw(m, gp.SparsifyScheme(n=64, d=8.0), np.random.default_rng(0))
        with pytest.raises(ValidationError):
            gp.spmv_round(gp.NetworkState(values=np.zeros(16)), s, gp.ComplexityLedger())


class TestComplexityLedger:
    def test_chi_tracks_spmv_budget(self, small_64):
        # chi/(t d) in [0.5, 2] for a full run
        m, spec = small_64
        led = gp.ComplexityLedger()
        t, d = 50, 16.0
        x0 = spec.u
        gp.gossip_pca(m, gp.SparsifyScheme(n=64, d=d), x0, t, _cfg(), np.random.default_rng(0), led)
        assert 0.5 * t * d <= led.chi <= 2.0 * t * d
        assert led.overhead_reals_per_node > 0.0  # norm traffic lands elsewhere

    def test_monotone(self):
        led = gp.ComplexityLedger()
        led.charge_spmv(100, 10)
        before = led.chi
        led.charge_spmv(100, 10)
        assert led.chi > before
        led.charge_gossip(10, 10, 3)
        assert led.overhead_reals_per_node == pytest.approx(3.0)
