import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulofdma import model
from ulofdma.examples import sec3d_instance
from ulofdma.model import (
    Allocation,
    ChannelSet,
    NetworkConfig,
    PowerMatrix,
    equal_split_powers,
    interference,
    network_throughput,
    validate,
)


def diag_allocation():
    """Both cells: user 1 on subcarrier 1, user 2 on subcarrier 2."""
    A = np.zeros((2, 2, 2), dtype=int)
    A[:, 0, 0] = 1
    A[:, 1, 1] = 1
    return Allocation(A)


def anti_diag_allocation():
    A = np.zeros((2, 2, 2), dtype=int)
    A[:, 0, 1] = 1
    A[:, 1, 0] = 1
    return Allocation(A)


def unit_powers(alloc):
    return PowerMatrix(alloc.A.astype(float))


def random_instance(rng, L=2, N=2, K=2):
    cfg = NetworkConfig(L=L, K=K, N=N, p_max=np.ones(K), noise_power=1.0)
    H = rng.uniform(0.1, 2.0, size=(L, N, K))
    G = rng.uniform(0.0, 1.0, size=(L, L, N, K))
    G[np.arange(L), np.arange(L)] = 0.0
    return cfg, ChannelSet(H, G)


class TestInterference:
    def test_reference_value(self):
        # single interferer at 1 W with gain 0.7
        _, ch = sec3d_instance()
        alloc = diag_allocation()
        powers = unit_powers(alloc)
        assert interference(alloc, powers, ch, n=0, l=0) == pytest.approx(0.7)

    def test_single_cell_is_zero(self):
        cfg = NetworkConfig(L=1, K=2, N=2)
        H = np.ones((1, 2, 2))
        ch = ChannelSet(H, np.zeros((1, 1, 2, 2)))
        A = np.zeros((1, 2, 2), dtype=int)
        A[0, :, 0] = 1
        alloc = Allocation(A)
        assert interference(alloc, equal_split_powers(alloc, cfg), ch, 0, 0) == 0.0

    def test_zero_powers(self):
        _, ch = sec3d_instance()
        alloc = diag_allocation()
        zero = PowerMatrix(np.zeros((2, 2, 2)))
        assert interference(alloc, zero, ch, 1, 1) == 0.0

    def test_index_out_of_range(self):
        _, ch = sec3d_instance()
        alloc = diag_allocation()
        with pytest.raises(IndexError):
            interference(alloc, unit_powers(alloc), ch, n=5, l=0)

    def test_linear_in_powers(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cfg, ch = random_instance(rng)
            alloc = diag_allocation()
            p = PowerMatrix(alloc.A * rng.uniform(0.1, 1.0, size=alloc.A.shape))
            c = rng.uniform(0.5, 2.0)
            scaled = PowerMatrix(p.P * c)
            i1 = interference(alloc, p, ch, 0, 0)
            i2 = interference(alloc, scaled, ch, 0, 0)
            assert i2 == pytest.approx(c * i1, rel=1e-12)


class TestNetworkThroughput:
    def test_reference_values(self):
        cfg, ch = sec3d_instance()
        alloc = diag_allocation()
        powers = unit_powers(alloc)
        assert network_throughput(alloc, powers, ch, cfg) == pytest.approx(1.1137, abs=5e-4)

        better = anti_diag_allocation()
        assert network_throughput(better, unit_powers(better), ch, cfg) == pytest.approx(
            1.5977, abs=5e-4)

    def test_no_interference_reference_value(self):
        cfg, ch = sec3d_instance()
        quiet = ChannelSet(ch.H, np.zeros_like(ch.G))
        alloc = diag_allocation()
        assert network_throughput(alloc, unit_powers(alloc), quiet, cfg) == pytest.approx(
            1.7655, abs=5e-4)

    def test_zero_powers_zero_rate(self):
        cfg, ch = sec3d_instance()
        alloc = diag_allocation()
        zero = PowerMatrix(np.zeros((2, 2, 2)))
        assert network_throughput(alloc, zero, ch, cfg) == 0.0

    def test_incomplete_allocation_rejected(self):
        cfg, ch = sec3d_instance()
        A = np.zeros((2, 2, 2), dtype=int)
        A[:, 0, 0] = 1  # second subcarrier left unassigned
        alloc = Allocation(A)
        with pytest.raises(ValueError):
            network_throughput(alloc, equal_split_powers(alloc, cfg), ch, cfg)

    def test_monotone_in_interfering_gains(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            cfg, ch = random_instance(rng)
            alloc = anti_diag_allocation()
            powers = equal_split_powers(alloc, cfg)
            base = network_throughput(alloc, powers, ch, cfg)
            G2 = ch.G.copy()
            l, j = (0, 1) if rng.random() < 0.5 else (1, 0)
            n, k = rng.integers(0, 2), rng.integers(0, 2)
            G2[l, j, n, k] += rng.uniform(0.1, 1.0)
            worse = network_throughput(alloc, powers, ChannelSet(ch.H, G2), cfg)
            assert worse <= base + 1e-12

    def test_zero_gains_decompose_into_single_cells(self):
        # with no cross gains the network value is the sum of the isolated
        # single-cell values, computed here from first principles
        rng = np.random.default_rng(13)
        for _ in range(10):
            cfg, ch = random_instance(rng)
            quiet = ChannelSet(ch.H, np.zeros_like(ch.G))
            alloc = diag_allocation()
            powers = equal_split_powers(alloc, cfg)
            got = network_throughput(alloc, powers, quiet, cfg)
            expect = 0.0
            for l in range(cfg.L):
                for n in range(cfg.N):
                    k = alloc.user_at(l, n)
                    expect += np.log2(1 + powers.P[l, n, k] * ch.H[l, n, k] / cfg.noise_power)
            assert got == pytest.approx(expect / cfg.L, rel=1e-12)


class TestValidate:
    def test_feasible_point_passes(self):
        cfg, _ = sec3d_instance()
        alloc = diag_allocation()
        report = validate(alloc, unit_powers(alloc), cfg)
        assert report.ok and not report.messages

    def test_row_sum_violation(self):
        cfg, _ = sec3d_instance()
        # Allocation construction itself rejects two users per subcarrier;
        # a missing assignment shows up through validate instead.
        with pytest.raises(ValueError):
            Allocation(np.array([[[1, 1], [0, 1]], [[1, 0], [0, 1]]]))
        A = np.zeros((2, 2, 2), dtype=int)
        A[:, 1, 1] = 1
        report = validate(Allocation(A), PowerMatrix(np.zeros((2, 2, 2))), cfg)
        assert not report.row_sum_ok and not report.ok

    def test_budget_violation(self):
        cfg, _ = sec3d_instance()
        alloc = diag_allocation()
        P = alloc.A * 1.5  # column sum 1.5 against budget 1
        report = validate(alloc, PowerMatrix(P), cfg)
        assert not report.budget_ok and not report.ok

    def test_budget_tolerance(self):
        cfg, _ = sec3d_instance()
        alloc = diag_allocation()
        P = alloc.A * (1.0 + 1e-10)
        assert validate(alloc, PowerMatrix(P), cfg).ok

    def test_stray_power_warns_only(self):
        cfg, _ = sec3d_instance()
        alloc = diag_allocation()
        P = np.full((2, 2, 2), 0.25)
        report = validate(alloc, PowerMatrix(P), cfg)
        assert report.ok and report.warnings

    def test_shape_mismatch(self):
        cfg, _ = sec3d_instance()
        bad = Allocation(np.zeros((2, 3, 2), dtype=int))
        with pytest.raises(ValueError):
            validate(bad, PowerMatrix(np.zeros((2, 3, 2))), cfg)


class TestTypes:
    @given(st.integers(max_value=0))
    def test_bad_counts_rejected(self, bad):
        with pytest.raises(ValueError):
            NetworkConfig(L=bad, K=1, N=1)

    def test_negative_gain_rejected(self):
        with pytest.raises(ValueError):
            ChannelSet(-np.ones((1, 1, 1)), np.zeros((1, 1, 1, 1)))

    def test_nonfinite_gain_rejected(self):
        H = np.ones((1, 1, 1))
        H[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            ChannelSet(H, np.zeros((1, 1, 1, 1)))

    def test_immutability(self):
        _, ch = sec3d_instance()
        with pytest.raises(ValueError):
            ch.H[0, 0, 0] = 2.0

    def test_equal_split(self):
        cfg = NetworkConfig(L=1, K=2, N=4, p_max=np.array([1.0, 2.0]))
        A = np.zeros((1, 4, 2), dtype=int)
        A[0, :3, 0] = 1
        A[0, 3, 1] = 1
        powers = equal_split_powers(Allocation(A), cfg)
        assert powers.P[0, :3, 0] == pytest.approx(1 / 3)
        assert powers.P[0, 3, 1] == pytest.approx(2.0)


class TestSerialization:
    def test_channel_round_trip(self):
        _, ch = sec3d_instance()
        again = model.channels_from_json(model.channels_to_json(ch))
        np.testing.assert_array_equal(again.H, ch.H)
        np.testing.assert_array_equal(again.G, ch.G)
        assert again.meta == ch.meta

    def test_allocation_round_trip(self):
        alloc = anti_diag_allocation()
        again = model.allocation_from_json(model.allocation_to_json(alloc))
        np.testing.assert_array_equal(again.A, alloc.A)

    def test_powers_round_trip(self):
        powers = PowerMatrix(np.arange(8, dtype=float).reshape(2, 2, 2))
        again = model.powers_from_json(model.powers_to_json(powers))
        np.testing.assert_array_equal(again.P, powers.P)

    def test_header_fields_present(self):
        _, ch = sec3d_instance()
        doc = json.loads(model.channels_to_json(ch))
        assert {"kind", "L", "K", "N", "units", "H", "G"} <= set(doc)

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            model.channels_from_json(json.dumps({"kind": "nonsense"}))
