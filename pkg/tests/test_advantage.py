"""Count formulas, crossover frontier, and memory-hardware figures."""

import dataclasses
import math

import numpy as np
import pytest

from qadvantage.advantage import (
    ANCHOR_CIRCUIT,
    OPTIMISTIC_QRAM,
    REALISTIC_QRAM,
    CostModel,
    DatasetParams,
    QramConfig,
    QuantumErrorParams,
    address_width,
    binary_search_count,
    classical_op_count,
    find_crossover,
    kp_tree_nodes,
    least_q_count,
    measure_params,
    mu_parameter,
    qram_estimate,
    quantum_query_count,
    spectral_norm_power,
    top_k_count,
)
from qadvantage.errors import ConfigError, DataError
from qadvantage.pca import fit_exact_pca, select_below_threshold, select_for_variance


def full_params(**overrides):
    base = dict(
        n=10_000,
        d=64,
        spectral_norm=50.0,
        frobenius_norm=400.0,
        mu=120.0,
        kappa=25.0,
        sigma_min=2.0,
        eta_norm=64.0,
        theta=20.0,
        theta_min=1.5,
        p_major=0.7,
        p_minor=0.1,
        k=8,
        q=5,
    )
    base.update(overrides)
    return DatasetParams(**base)


class TestMuParameter:
    def test_identity_hits_one_at_half(self):
        assert mu_parameter(np.eye(2)) == pytest.approx(1.0)
        assert mu_parameter(np.eye(7)) == pytest.approx(1.0)

    def test_bounded_by_frobenius(self):
        for seed in range(5):
            X = np.random.default_rng(seed).normal(size=(40, 12))
            assert mu_parameter(X) <= np.linalg.norm(X) * (1 + 1e-12)

    def test_denser_grid_changes_little(self):
        # a finer scan can only find a smaller minimum, and not by much
        for seed in range(4):
            X = np.random.default_rng(seed).normal(size=(60, 15))
            coarse = mu_parameter(X, grid_points=101)
            fine = mu_parameter(X, grid_points=1001)
            assert fine <= coarse + 1e-12
            assert fine >= coarse * 0.99

    def test_diagonal_case(self):
        assert mu_parameter(np.diag([3.0, 1.0])) == pytest.approx(3.0)

    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            mu_parameter(np.eye(2), grid_points=1)


class TestMeasureParams:
    def test_diagonal_spectrum(self):
        params = measure_params(np.diag([3.0, 1.0]))
        assert params.spectral_norm == pytest.approx(3.0, rel=1e-5)
        assert params.kappa == pytest.approx(3.0, rel=1e-5)
        assert params.sigma_min == pytest.approx(1.0)

    def test_power_method_matches_svd(self):
        for seed in range(4):
            X = np.random.default_rng(seed).normal(size=(80, 9))
            exact = np.linalg.svd(X, compute_uv=False)[0]
            assert spectral_norm_power(X) == pytest.approx(exact, rel=1e-5)

    def test_eta_norm_is_max_row_energy(self):
        X = np.array([[1.0, 2.0], [3.0, 0.0], [0.5, 0.5]])
        params = measure_params(X)
        assert params.eta_norm == pytest.approx(9.0)

    def test_selection_fields_forwarded(self):
        X = np.random.default_rng(3).normal(size=(300, 10))
        X = (X - X.mean(axis=0)) / X.std(axis=0)
        model = fit_exact_pca(X)
        major = select_for_variance(model, 0.6, "major")
        minor = select_below_threshold(model, model.singular_values[-3])
        params = measure_params(X, major, minor)
        assert params.k == major.count
        assert params.theta == pytest.approx(major.theta)
        assert params.p_major == pytest.approx(major.p)
        assert params.q == minor.count
        assert params.theta_min == pytest.approx(minor.theta_min)
        assert params.p_minor == pytest.approx(minor.p)

    def test_selection_mode_guards(self):
        X = np.random.default_rng(4).normal(size=(100, 6))
        model = fit_exact_pca(X)
        major = select_for_variance(model, 0.6, "major")
        minor = select_below_threshold(model, model.singular_values[-2])
        with pytest.raises(ConfigError):
            measure_params(X, minor)
        with pytest.raises(ConfigError):
            measure_params(X, major, minor_selection=major)

    def test_invariants_on_standardized_data(self):
        X = np.random.default_rng(5).normal(size=(500, 20))
        X = (X - X.mean(axis=0)) / X.std(axis=0)
        params = measure_params(X)
        assert params.mu <= params.frobenius_norm * (1 + 1e-9)
        assert params.spectral_norm <= params.frobenius_norm * (1 + 1e-9)
        assert params.kappa >= 1.0

    def test_input_validation(self):
        with pytest.raises(DataError):
            measure_params(np.array([[np.inf, 1.0]]))
        with pytest.raises(DataError):
            measure_params(np.zeros((4, 4)))
        with pytest.raises(DataError):
            measure_params(np.ones(5))

    def test_params_validation(self):
        with pytest.raises(DataError, match="Frobenius"):
            full_params(mu=500.0)
        with pytest.raises(DataError, match="condition number"):
            full_params(kappa=0.5)
        with pytest.raises(DataError):
            full_params(n=0)


class TestQuantumCount:
    errors = QuantumErrorParams(epsilon=1.0, delta=0.1, eta=0.1)

    def test_independent_of_n(self):
        params = full_params()
        bumped = dataclasses.replace(params, n=params.n * 1000)
        for variant in ("pcc_major_only", "pcc_major_minor", "recon"):
            cost = CostModel(variant)
            assert quantum_query_count(params, self.errors, cost) == pytest.approx(
                quantum_query_count(bumped, self.errors, cost)
            )

    def test_doubling_delta_quarters_top_k_term(self):
        params = full_params()
        cost = CostModel("pcc_major_only")
        loose = dataclasses.replace(self.errors, delta=0.2)
        assert top_k_count(params, loose, cost) == pytest.approx(
            top_k_count(params, self.errors, cost) / 4.0
        )

    def test_major_minor_adds_least_q_term(self):
        params = full_params()
        major = quantum_query_count(params, self.errors, CostModel("pcc_major_only"))
        both = quantum_query_count(params, self.errors, CostModel("pcc_major_minor"))
        tail = least_q_count(params, self.errors, CostModel("pcc_major_minor"))
        assert both == pytest.approx(major + tail)

    def test_recon_matches_major_only_shape(self):
        params = full_params()
        assert quantum_query_count(
            params, self.errors, CostModel("recon")
        ) == pytest.approx(quantum_query_count(params, self.errors, CostModel("pcc_major_only")))

    def test_binary_search_literal_formula(self):
        params = full_params()
        cost = CostModel("pcc_major_only")
        expected = 120.0 / (1.0 * 0.1) * math.log2(120.0)
        assert binary_search_count(params, self.errors, cost) == pytest.approx(expected)

    def test_top_k_literal_formula(self):
        params = full_params()
        cost = CostModel("pcc_major_only")
        expected = (
            64 * 8 * 50.0 * 120.0 / (20.0 * math.sqrt(0.7) * 1.0 * 0.1**2)
            * math.log2(8) * math.log2(64)
        )
        assert top_k_count(params, self.errors, cost) == pytest.approx(expected)

    def test_least_q_literal_formula(self):
        params = full_params()
        cost = CostModel("pcc_major_minor")
        expected = (1.5 / 2.0) * (120.0 / 1.0) * (5 * 64 / math.sqrt(0.1))
        assert least_q_count(params, self.errors, cost) == pytest.approx(expected)

    def test_qmeans_literal_formula_and_iterations(self):
        params = full_params()
        eta, delta, kappa, mu, k, d = 64.0, 0.1, 25.0, 120.0, 8, 64
        per_iter = (
            k * d * (eta / delta**2) * kappa * (mu + k * eta / delta)
            + k**2 * (eta**1.5 / delta**2) * kappa * mu
        )
        one = quantum_query_count(params, self.errors, CostModel("qmeans"))
        twenty = quantum_query_count(params, self.errors, CostModel("qmeans", iterations=20))
        assert one == pytest.approx(per_iter)
        assert twenty == pytest.approx(20 * per_iter)

    def test_missing_fields_rejected_per_variant(self):
        bare = full_params(theta=None, p_major=None, k=None)
        with pytest.raises(ConfigError, match="pcc_major_only"):
            quantum_query_count(bare, self.errors, CostModel("pcc_major_only"))
        no_minor = full_params(theta_min=None, p_minor=None, q=None)
        with pytest.raises(ConfigError, match="pcc_major_minor"):
            quantum_query_count(no_minor, self.errors, CostModel("pcc_major_minor"))
        with pytest.raises(ConfigError, match="qmeans"):
            quantum_query_count(full_params(k=None), self.errors, CostModel("qmeans"))

    def test_monotone_in_error_knobs(self):
        params = full_params()
        cost = CostModel("pcc_major_minor")
        base = quantum_query_count(params, self.errors, cost)
        for knob in ("epsilon", "delta", "eta"):
            looser = dataclasses.replace(self.errors, **{knob: getattr(self.errors, knob) * 2})
            assert quantum_query_count(params, looser, cost) <= base
        for knob, factor in (("theta", 2.0), ("p_major", 1.3), ("p_minor", 5.0)):
            easier = full_params(**{knob: getattr(params, knob) * factor})
            assert quantum_query_count(easier, self.errors, cost) <= base

    def test_monotone_in_size_knobs(self):
        params = full_params()
        cost = CostModel("pcc_major_minor")
        base = quantum_query_count(params, self.errors, cost)
        for knob in ("mu", "spectral_norm", "k", "q", "d"):
            bumped = full_params(**{knob: getattr(params, knob) * 2})
            assert quantum_query_count(bumped, self.errors, cost) >= base

    def test_polylog_toggle_and_constant_factor(self):
        params = full_params()
        with_logs = quantum_query_count(params, self.errors, CostModel("pcc_major_only"))
        without = quantum_query_count(
            params, self.errors, CostModel("pcc_major_only", include_polylog=False)
        )
        assert without < with_logs
        doubled = quantum_query_count(
            params, self.errors, CostModel("pcc_major_only", constant_factor=2.0)
        )
        assert doubled == pytest.approx(2 * with_logs)

    def test_cost_model_validation(self):
        with pytest.raises(ConfigError):
            CostModel("pcc")
        with pytest.raises(ConfigError):
            CostModel("recon", log_base=10)
        with pytest.raises(ConfigError):
            CostModel("recon", constant_factor=0.0)
        with pytest.raises(ConfigError):
            CostModel("qmeans", iterations=0)
        with pytest.raises(ConfigError):
            QuantumErrorParams(epsilon=-1.0)


class TestClassicalCount:
    def test_randomized_pca_reference_value(self):
        # 1e6 * 50 * 6 * log2(6), computed independently
        assert classical_op_count(1e6, 50, 6, "randomized_pca") == pytest.approx(
            775488750.2163469, rel=1e-9
        )

    def test_full_svd_small_case(self):
        assert classical_op_count(1e3, 10, 1, "full_svd") == pytest.approx(1e5)
        assert classical_op_count(5, 1000, 1, "full_svd") == pytest.approx(25 * 1000)

    def test_log_floor_for_single_component(self):
        assert classical_op_count(100, 10, 1, "randomized_pca") == pytest.approx(1000.0)

    def test_strictly_increasing_in_n(self):
        grid = [10, 100, 1000, 10_000]
        for variant in ("randomized_pca", "full_svd"):
            counts = [classical_op_count(n, 30, 4, variant) for n in grid]
            assert all(a < b for a, b in zip(counts, counts[1:]))

    def test_validation(self):
        with pytest.raises(ConfigError):
            classical_op_count(10, 10, 2, "exact_pca")
        with pytest.raises(ConfigError):
            classical_op_count(0, 10, 2, "full_svd")


class TestCrossover:
    errors = QuantumErrorParams(epsilon=1.0, delta=0.1, eta=0.1)

    def test_analytic_frontier_closed_form(self):
        params = full_params(k=6, d=50)
        cost = CostModel("pcc_major_only")
        report = find_crossover(
            params, self.errors, cost, n_grid=np.logspace(3, 9, 13), d_grid=[50]
        )
        quantum = quantum_query_count(dataclasses.replace(params, d=50), self.errors, cost)
        assert report.analytic_frontier[50.0] == pytest.approx(
            quantum / (50 * 6 * math.log2(6))
        )
        # the closed-form inversion at a round count
        assert 1e9 / (50 * 6 * math.log2(6)) == pytest.approx(1.29e6, rel=5e-3)

    def test_frontier_single_crossing_and_consistency(self):
        params = full_params()
        report = find_crossover(
            params,
            self.errors,
            CostModel("pcc_major_only"),
            n_grid=np.logspace(2, 10, 33),
            d_grid=[16, 64, 256],
        )
        assert report.single_crossing
        for cell in report.cells:
            boundary = report.frontier[cell.d]
            if boundary is None:
                assert not cell.advantage
            elif cell.n >= boundary:
                assert cell.advantage
            else:
                assert not cell.advantage

    def test_no_advantage_marker(self):
        params = full_params()
        report = find_crossover(
            params, self.errors, CostModel("pcc_major_only"), n_grid=[10, 100], d_grid=[8]
        )
        assert report.frontier[8.0] is None

    def test_major_minor_uses_full_svd(self):
        params = full_params()
        report = find_crossover(
            params,
            self.errors,
            CostModel("pcc_major_minor"),
            n_grid=[1e6],
            d_grid=[64],
        )
        assert report.classical_variant == "full_svd"
        cell = report.cells[0]
        assert cell.classical_count == pytest.approx(classical_op_count(1e6, 64, 8, "full_svd"))

    def test_growth_model_scales_quantum_count(self):
        params = full_params()
        cost = CostModel("pcc_major_only")
        fixed = find_crossover(
            params, self.errors, cost, n_grid=[params.n * 100], d_grid=[64]
        )
        grown = find_crossover(
            params, self.errors, cost, n_grid=[params.n * 100], d_grid=[64],
            growth_model="sqrt_n",
        )
        # mu * ||X|| picks up a factor of ~100 at 100x the sample count
        ratio = grown.cells[0].quantum_count / fixed.cells[0].quantum_count
        assert 80 < ratio < 130
        assert grown.growth_model == "sqrt_n"

    def test_validation(self):
        params = full_params()
        with pytest.raises(ConfigError):
            find_crossover(params, self.errors, CostModel("qmeans"), [10], [5])
        with pytest.raises(ConfigError):
            find_crossover(params, self.errors, CostModel("recon"), [], [5])
        with pytest.raises(ConfigError):
            find_crossover(params, self.errors, CostModel("recon"), [10], [-5])
        with pytest.raises(ConfigError):
            find_crossover(params, self.errors, CostModel("recon"), [10], [5], growth_model="cubic")


class TestQram:
    def test_address_width_published_case(self):
        assert address_width(10**7, 44) == 34

    def test_tree_size(self):
        cells = 10**7 * 44
        assert kp_tree_nodes(10**7, 44) == pytest.approx(cells * math.log2(cells))

    def test_published_operating_points(self):
        optimistic = qram_estimate(10**7, 44, OPTIMISTIC_QRAM)
        assert optimistic.address_width == 34
        assert optimistic.latency_ms == pytest.approx(1.07)
        assert optimistic.physical_qubits == pytest.approx(2.08e14)
        assert not optimistic.extrapolated
        realistic = qram_estimate(10**7, 44, REALISTIC_QRAM)
        assert realistic.latency_ms == pytest.approx(28.1)
        assert realistic.physical_qubits == pytest.approx(7.31e16)

    def test_anchor_circuit_metadata(self):
        report = qram_estimate(10**7, 44, OPTIMISTIC_QRAM).as_dict()
        assert report["anchor_t_count"] == pytest.approx(3.61e11)
        assert report["anchor_t_depth"] == pytest.approx(67.0)
        assert report["anchor_clifford_count"] == pytest.approx(9.28e11)
        assert report["anchor_logical_qubits"] == pytest.approx(1.37e11)
        assert report["anchor_width"] == 34
        assert ANCHOR_CIRCUIT["circuit_depth"] == pytest.approx(539.0)

    def test_off_anchor_width_requires_extrapolation(self):
        with pytest.raises(ConfigError, match="extrapolation"):
            qram_estimate(10**3, 10, OPTIMISTIC_QRAM)
        scaled = qram_estimate(10**3, 10, OPTIMISTIC_QRAM, allow_extrapolation=True)
        assert scaled.extrapolated
        width = address_width(10**3, 10)
        assert scaled.latency_ms == pytest.approx(1.07 * width / 34)
        assert scaled.physical_qubits == pytest.approx(2.08e14 * width / 34)

    def test_unknown_config_rejected(self):
        stranger = QramConfig(1e-4, 1e-3, 500.0, 1, "midway")
        with pytest.raises(ConfigError, match="coefficient table"):
            qram_estimate(10**7, 44, stranger)

    def test_word_size_guard(self):
        wide = QramConfig(1e-5, 1e-4, 200.0, word_size=32)
        with pytest.raises(ConfigError, match="word size"):
            qram_estimate(10**7, 44, wide)

    def test_tiny_address_space_rejected(self):
        with pytest.raises(DataError):
            address_width(1, 1)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            QramConfig(0.0, 1e-4, 200.0)
        with pytest.raises(ConfigError):
            QramConfig(1e-5, 1.5, 200.0)
        with pytest.raises(ConfigError):
            QramConfig(1e-5, 1e-4, 0.0)


class TestPublishedScale:
    """Order-of-magnitude agreement with the published DDoS-scale figures."""

    def test_classical_count_at_ddos_scale(self):
        assert classical_op_count(5e7, 50, 6, "randomized_pca") == pytest.approx(
            3.9e10, rel=0.01
        )

    def test_quantum_count_on_kddcup_like_params(self):
        # stand-in measurements in the published dataset's regime
        params = DatasetParams(
            n=50_000,
            d=44,
            spectral_norm=110.0,
            frobenius_norm=1483.0,
            mu=120.0,
            kappa=1e6,
            sigma_min=1.1e-4,
            eta_norm=200.0,
            theta=75.0,
            p_major=0.70,
            k=10,
        )
        errors = QuantumErrorParams(epsilon=1.0, delta=0.1, eta=0.1)
        quantum = quantum_query_count(params, errors, CostModel("pcc_major_only"))
        assert 1.3e8 / 3 < quantum < 1.3e8 * 3
        # roughly a two order of magnitude gap at DDoS scale
        classical = classical_op_count(5e7, 50, 6, "randomized_pca")
        assert 50 < classical / quantum < 1000
