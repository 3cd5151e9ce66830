"""Tests for Integrated Gradients attributions and their export."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_batch, tiny_config, tiny_model
from handball_oracle.explain import (
    AttributionEntry,
    AttributionReport,
    RawAttribution,
    build_report,
    default_baseline,
    export_attributions,
    integrated_gradients,
    read_attributions,
)
from handball_oracle.features import COVARIATE_NAMES, FeatureVector, PlayerVocabulary
from handball_oracle.model import forward, init_model, train


def linear_model(seed=0, target_bias=50.0):
    """ReLU network kept in its linear region by large positive hidden biases."""
    model = tiny_model(seed=seed, activation="relu")
    for w, b in model.layers[:-1]:
        b[:] = target_bias
    return model


def effective_weights(model):
    w_eff = model.layers[0][0]
    for w, _ in model.layers[1:]:
        w_eff = w_eff @ w
    return w_eff


def sample(model, seed=0):
    batch = random_batch(model.config, 1, seed=seed, with_null=False)
    return FeatureVector(batch.covariates[0], batch.lineups[0])


def trained_tiny(seed=0):
    cfg = tiny_config(seed=seed, patience=None, max_epochs=30, batch_size=8, learning_rate=1e-2)
    data = random_batch(cfg, 40, seed=seed)
    return train(init_model(cfg), data, random_batch(cfg, 10, seed=seed + 1), cfg)[0]


class TestIntegratedGradients:
    @pytest.mark.parametrize("steps", [1, 3, 200])
    @pytest.mark.parametrize("target", ["home", "away"])
    def test_linear_exact(self, steps, target):
        model = linear_model()
        f = sample(model)
        k = 0 if target == "home" else 1
        w = effective_weights(model)[:, k]
        m = model.config.embedding_dim
        x_emb = model.embedding[f.lineup].ravel()
        expected_tokens = (w[: x_emb.size] * x_emb).reshape(-1, m).sum(axis=1)
        expected_cov = w[x_emb.size:] * f.covariates
        raw = integrated_gradients(model, f, target, steps)
        np.testing.assert_allclose(raw.lineup, expected_tokens, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(raw.covariates, expected_cov, rtol=1e-10, atol=1e-12)

    def test_constant_output(self):
        model = tiny_model()
        w, b = model.layers[-1]
        w[:] = 0.0
        raw = integrated_gradients(model, sample(model), "home", 50)
        assert not raw.lineup.any() and not raw.covariates.any()

    @pytest.mark.parametrize("seed", range(3))
    def test_completeness_trained(self, seed):
        model = trained_tiny(seed)
        for target in ("home", "away"):
            raw = integrated_gradients(model, sample(model, seed), target, 200)
            gap = raw.input_output - raw.baseline_output
            assert raw.residual < 1e-3 * max(1.0, abs(gap))
            assert raw.input_output == pytest.approx(forward(model, sample(model, seed))[["home", "away"].index(target)],
                                                     abs=1e-14)

    @pytest.mark.parametrize("seed", range(3))
    def test_residual_shrinks_with_steps(self, seed):
        model = trained_tiny(seed)
        f = sample(model, seed)
        res = [integrated_gradients(model, f, "home", s).residual for s in (50, 100, 200)]
        assert res[0] >= res[1] >= res[2]

    def test_null_sensitivity(self):
        model = trained_tiny()
        f = sample(model)
        f.lineup[1] = 0
        f.covariates[0] = 0.0
        raw = integrated_gradients(model, f, "home", 64)
        assert raw.covariates[0] == 0.0
        assert abs(raw.lineup[1]) <= 1e-12

    def test_implementation_invariance(self):
        model = tiny_model(seed=4, activation="relu")
        twin = model.copy()
        width = twin.layers[0][0].shape[1]
        twin.layers.insert(1, (np.eye(width), np.zeros(width)))
        f = sample(model, 4)
        np.testing.assert_allclose(forward(twin, f), forward(model, f), rtol=0, atol=1e-12)
        a = integrated_gradients(model, f, "home", 100)
        b = integrated_gradients(twin, f, "home", 100)
        np.testing.assert_allclose(b.lineup, a.lineup, rtol=0, atol=1e-8)
        np.testing.assert_allclose(b.covariates, a.covariates, rtol=0, atol=1e-8)

    def test_errors(self):
        model = tiny_model()
        f = sample(model)
        with pytest.raises(ValueError):
            integrated_gradients(model, f, steps=0)
        with pytest.raises(ValueError):
            integrated_gradients(model, f, target="draw")
        with pytest.raises(ValueError):
            integrated_gradients(model, f, baseline=FeatureVector(np.zeros(3), np.zeros(4, int)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 1000), st.integers(1, 40))
    def test_linear_completeness_any_steps(self, seed, steps):
        model = linear_model(seed % 5)
        raw = integrated_gradients(model, sample(model, seed), "away", steps)
        assert raw.residual < 1e-10


class TestBaseline:
    def test_definition(self):
        base = default_baseline()
        np.testing.assert_array_equal(base.lineup, np.zeros(32))
        np.testing.assert_array_equal(base.covariates, np.zeros(11))

    def test_baseline_output(self):
        model = trained_tiny()
        raw = integrated_gradients(model, sample(model), "home", 10)
        base = default_baseline(None, model.config.lineup_len, model.config.covariate_count)
        assert raw.baseline_output == forward(model, base)[0]


def full_raw(values=None, tokens=None):
    values = np.zeros(43) if values is None else np.asarray(values, dtype=float)
    tokens = np.zeros(32, dtype=np.int64) if tokens is None else np.asarray(tokens)
    return RawAttribution(values[:32], values[32:], 1.0, 1.0 - values.sum(), "home", 200, tokens)


class TestReport:
    vocab = PlayerVocabulary.from_dict({"players": [["Dika Mem", "", "France"], ["Igor Karacic", "", "Croatia"]]})
    roster = {"Dika Mem": {"position": "right back", "club": "Barcelona", "national_team": "France"},
              "Igor Karacic": {"position": "center back", "club": "Kielce", "national_team": "Croatia"}}

    def test_player_label(self):
        tokens = np.zeros(32, dtype=np.int64)
        tokens[16] = 1
        values = np.zeros(43)
        values[16] = 0.3127
        report = build_report(full_raw(values, tokens), self.vocab, self.roster, team="France")
        top = report.entries[0]
        assert top.label == "Dika Mem (right back, France)"
        assert report.team_explained == "France"

    def test_empty_slots(self):
        report = build_report(full_raw(), self.vocab)
        empties = [e for e in report.entries if e.kind == "empty"]
        assert len(empties) == 32 and len(report.entries) == 43
        assert {e.feature_name for e in empties} == {f"empty slot {k}" for k in range(1, 33)}
        assert [e.feature_name for e in report.entries if e.kind == "covariate"] == list(COVARIATE_NAMES)

    def test_ties_keep_slot_order(self):
        values = np.zeros(43)
        values[[5, 2, 40]] = 0.25
        report = build_report(full_raw(values), self.vocab)
        assert [e.index for e in report.entries[:3]] == [2, 5, 40]

    def test_sorted_descending(self):
        values = np.random.default_rng(0).normal(size=43)
        report = build_report(full_raw(values), self.vocab)
        got = [e.attribution for e in report.entries]
        assert got == sorted(got, reverse=True)

    def test_unknown_token(self):
        tokens = np.zeros(32, dtype=np.int64)
        tokens[0] = 9
        with pytest.raises(KeyError):
            build_report(full_raw(tokens=tokens), self.vocab)

    def test_wrong_count(self):
        raw = RawAttribution(np.zeros(4), np.zeros(2), 0.0, 0.0, "home", 1, np.zeros(4, dtype=np.int64))
        with pytest.raises(ValueError):
            build_report(raw, self.vocab)

    def test_completeness_flag(self):
        report = build_report(full_raw(np.full(43, 0.01)), self.vocab)
        assert report.residual < 1e-12 and report.check_completeness()


class TestExport:
    def report(self):
        values = np.linspace(-0.5, 0.5, 43)
        tokens = np.zeros(32, dtype=np.int64)
        tokens[0] = 2
        return build_report(full_raw(values, tokens), TestReport.vocab, TestReport.roster)

    def test_line_count(self, tmp_path):
        export_attributions(self.report(), tmp_path / "a.csv")
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert len(lines) == 44 and lines[0] == "x,y"

    def test_row_format(self, tmp_path):
        export_attributions(self.report(), tmp_path / "a.csv")
        assert "-0.5,Igor Karacic" in (tmp_path / "a.csv").read_text().splitlines()

    def test_round_trip(self, tmp_path):
        report = self.report()
        export_attributions(report, tmp_path / "a.csv")
        assert read_attributions(tmp_path / "a.csv") == [(e.attribution, e.feature_name) for e in report.entries]

    def test_names_with_commas_quoted(self, tmp_path):
        report = AttributionReport("m", "home", [AttributionEntry("Doe, John", 0.1, "player", 0)], 0.0, 0.1)
        export_attributions(report, tmp_path / "a.csv")
        assert read_attributions(tmp_path / "a.csv") == [(0.1, "Doe, John")]
