"""
Tests para el módulo experiments
"""

import pytest

import ordinal_embedding_tool.core.experiments as experiments
from ordinal_embedding_tool.config.experiment import ExperimentConfig
from ordinal_embedding_tool.core.alignment import fit_similarity
from ordinal_embedding_tool.core.designs import DissimilarityOracle, QuadrupleDesign
from ordinal_embedding_tool.core.embedders import Embedding, EmbedReport
from ordinal_embedding_tool.core.experiments import (
    LEMMA_CHECKS,
    RateRecord,
    run_lemma_suite,
    run_rate_experiment,
)
from ordinal_embedding_tool.exceptions import ExperimentException, InapplicableException
from ordinal_embedding_tool.utils.seeds import rng_for

SAFE_LEMMAS = [
    "simplex",
    "trilateration",
    "near-sim",
    "diam-bound",
    "1nn-modulus",
    "inter-vol",
    "affine-close",
]


def _truth_embed(fail=lambda cset, seed: False):
    """Embedder falso: la verdad más ruido pequeño y determinista."""

    def embed(cset, dim, seed, embedder):
        truth = cset.oracle.cloud.points
        noise = 1e-3 * rng_for(seed).standard_normal(truth.shape)
        violations = 1 if fail(cset, seed) else 0
        return Embedding(truth + noise, {"embedder": "fake"}), EmbedReport(violations, 0, 0.0)

    return embed


@pytest.fixture()
def fake_embed(monkeypatch):
    monkeypatch.setattr(experiments, "_embed", _truth_embed())


def _config(**overrides):
    data = {"n_grid": [20, 40, 80], "trials": 2, "master_seed": 3}
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


class TestRateExperiment:
    """Tests para run_rate_experiment con un embedder falso"""

    def test_records_sorted_by_n_and_trial(self, fake_embed):
        result = run_rate_experiment(_config())
        assert [(r.n, r.trial) for r in result.records] == [
            (20, 0), (20, 1), (40, 0), (40, 1), (80, 0), (80, 1)
        ]
        assert result.kind == "quadruple"
        assert all(r.sup_error > 0 for r in result.records)

    def test_eps_non_increasing_on_nested_clouds(self, fake_embed):
        result = run_rate_experiment(_config())
        assert result.eps_monotone
        assert result.eps_increases == []
        assert result.summary()["eps_monotone"] is True
        for trial in range(2):
            series = [r.eps for r in result.records if r.trial == trial]
            assert all(b <= a for a, b in zip(series, series[1:]))

    def test_eps_increase_is_flagged(self, fake_embed, monkeypatch):
        """Test que un ε_n creciente marca el resultado como fallido"""
        monkeypatch.setattr(
            experiments, "hausdorff_density", lambda cloud, domain, resolution: 0.01 * cloud.n
        )
        result = run_rate_experiment(_config())
        assert not result.eps_monotone
        assert result.eps_increases == [(0, 40), (0, 80), (1, 40), (1, 80)]
        assert not result.passed
        assert result.summary()["eps_increases"] == [[0, 40], [0, 80], [1, 40], [1, 80]]

    def test_deterministic(self, fake_embed):
        first = run_rate_experiment(_config())
        second = run_rate_experiment(_config())
        assert [r.eps for r in first.records] == [r.eps for r in second.records]
        assert [r.sup_error for r in first.records] == [r.sup_error for r in second.records]

    def test_fit_and_medians(self, fake_embed):
        result = run_rate_experiment(_config())
        assert result.slope is not None and result.intercept is not None
        assert set(result.medians) == {20, 40, 80}
        assert result.medians[40]["successes"] == 2
        assert result.passed
        assert result.summary()["medians"]["80"]["successes"] == 2

    def test_local_predictor(self, fake_embed):
        result = run_rate_experiment(_config(design={"kind": "local", "radius": 0.8}))
        for record in result.records:
            assert record.parameter == pytest.approx(0.8)
            assert record.predictor == pytest.approx(record.eps / 0.64)

    def test_landmark_predictor(self, fake_embed):
        config = _config(design={"kind": "landmark_triple", "landmarks": 5}, embedder={"kind": "landmark"})
        result = run_rate_experiment(config)
        assert all(r.parameter == 5 for r in result.records)
        assert all(r.predictor >= r.eps for r in result.records)

    def test_excluded_records(self, monkeypatch):
        seen = []

        def first_at_40(cset, seed):
            if cset.n != 40 or seen:
                return False
            seen.append(seed)
            return True

        monkeypatch.setattr(experiments, "_embed", _truth_embed(first_at_40))
        result = run_rate_experiment(_config())
        flagged = [r for r in result.records if r.excluded]
        assert result.excluded == 1
        assert (flagged[0].n, flagged[0].trial, flagged[0].violations) == (40, 0, 1)
        assert result.medians[40]["successes"] == 1

    def test_no_successes_at_some_n(self, monkeypatch):
        monkeypatch.setattr(experiments, "_embed", _truth_embed(lambda cset, seed: cset.n == 40))
        with pytest.raises(ExperimentException):
            run_rate_experiment(_config())

    def test_single_sample_size_has_no_slope(self, fake_embed):
        result = run_rate_experiment(_config(n_grid=[30], slope_gate=0.5))
        assert result.slope is None
        assert result.gates == {"slope": None}
        assert result.passed

    def test_triple_design_not_slope_gated(self, fake_embed):
        result = run_rate_experiment(_config(design={"kind": "triple"}, slope_gate=5.0))
        assert not result.slope_gated
        assert "slope" not in result.gates

    def test_ratio_gate(self, fake_embed):
        result = run_rate_experiment(_config(ratio_gate=1e-9))
        assert result.gates["ratio"] is False
        assert not result.passed

    def test_csv_row_order(self):
        record = RateRecord(10, 0, 0.1, 0.1, None, 0.05, 0, 1.5, False)
        assert record.csv_row() == [10, 0, 0.1, 0.1, None, 0.05, 0, False]

    @pytest.mark.slow
    def test_real_rejection_run(self):
        config = _config(
            n_grid=[4, 5], trials=2, design={"kind": "triple"}, embedder={"kind": "rejection"}
        )
        result = run_rate_experiment(config)
        assert result.excluded == 0
        assert all(r.violations == 0 for r in result.records)


class TestLemmaSuite:
    """Tests para run_lemma_suite"""

    def test_certain_lemmas_pass(self):
        sizes = {
            "trilateration": 200,
            "near_sim": 80,
            "diam_bound": 80,
            "diam_bound_instances": 3,
            "one_nn_instances": 10,
            "inter_vol": 80,
            "affine_close": 50,
        }
        checks = run_lemma_suite(0, sizes=sizes, only=SAFE_LEMMAS)
        assert [c.name for c in checks] == [name for name, _ in LEMMA_CHECKS if name in SAFE_LEMMAS]
        for check in checks:
            assert check.status == "pass", (check.name, check.detail)

    def test_exact_embedding_is_not_a_similarity(self):
        """Test que el certificador usa un embedding exacto y no la verdad transformada"""
        rng = rng_for(4, "exact")
        cloud = experiments._disk_cloud(rng, 40)
        image, origin = experiments._exact_embedding(rng, cloud)
        assert QuadrupleDesign(DissimilarityOracle(cloud)).count_violations(image) == 0
        _, sup_error = fit_similarity(cloud.points, image)
        assert sup_error > 0
        assert origin.startswith(("refined", "perturbed"))

    def test_near_sim_reports_embedding_origin(self):
        checks = run_lemma_suite(2, sizes={"near_sim": 60}, only=["near-sim"])
        assert "embedding=" in checks[0].detail

    def test_missing_exact_embedding_is_inapplicable(self, monkeypatch):
        def give_up(rng, cloud):
            raise InapplicableException("No exact ordinal embedding found for the instance")

        monkeypatch.setattr(experiments, "_exact_embedding", give_up)
        checks = run_lemma_suite(0, only=["near-sim", "diam-bound"])
        assert [c.status for c in checks] == ["inapplicable", "inapplicable"]
        assert all(c.slack is None for c in checks)

    def test_one_nn_covers_many_instances(self):
        """Test que el certificador 1-NN recorre varias instancias e informa los fallos"""
        sizes = {"one_nn": 30, "one_nn_queries": 100, "one_nn_instances": 8}
        check = run_lemma_suite(3, sizes=sizes, only=["1nn-modulus"])[0]
        assert check.status == "pass"
        assert check.detail == "instances=8 failures=0"
        assert check.slack >= 0

    def test_collinear_injection_is_inapplicable(self):
        checks = run_lemma_suite(1, inject_collinear=True, only=["approx-simplex", "barycenter"])
        assert [c.status for c in checks] == ["inapplicable", "inapplicable"]
        assert all(c.slack is None and c.detail for c in checks)

    def test_reproducible(self):
        first = run_lemma_suite(5, only=["trilateration"], sizes={"trilateration": 50})
        second = run_lemma_suite(5, only=["trilateration"], sizes={"trilateration": 50})
        assert first[0].to_dict() == second[0].to_dict()

    @pytest.mark.slow
    def test_full_suite_runs(self):
        checks = run_lemma_suite(0)
        assert len(checks) == len(LEMMA_CHECKS)
        assert all(c.status in ("pass", "fail", "inapplicable") for c in checks)
