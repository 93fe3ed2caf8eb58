import itertools
from math import factorial

import numpy as np
import pytest

from survrisk.classify import ClassifierConfig, RiskModel
from survrisk.errors import ConfigError, DataError
from survrisk.explain import (
    clustered_survival_curves,
    global_importance,
    kernel_shap,
    load_importance_csv,
    prediction_function,
    ranking_agreement,
    shapley_kernel_weight,
)
from survrisk.forest import ForestParams, fit

from test_classify import column, lookup_forest
from test_forest import two_group_data


def factorial_shapley(f, x, background):
    """Subset-weighted Shapley definition, independent of the kernel path."""
    M = x.size
    cache = {}

    def v(members):
        if members not in cache:
            z = np.zeros(M, dtype=bool)
            z[list(members)] = True
            rows = np.where(z[None, :], x[None, :], background)
            cache[members] = float(np.mean(np.asarray(f(rows))))
        return cache[members]

    phi = np.zeros(M)
    for j in range(M):
        rest = [i for i in range(M) if i != j]
        for r in range(M):
            weight = factorial(r) * factorial(M - r - 1) / factorial(M)
            for subset in itertools.combinations(rest, r):
                phi[j] += weight * (v(tuple(sorted(subset + (j,)))) - v(subset))
    return phi


def test_indicator_feature_fixture():
    f = lambda X: np.asarray(X)[:, 0].astype(float)
    background = np.array([[0, 0], [1, 1]])
    attr = kernel_shap(f, np.array([1, 0]), background)
    assert attr.exact
    assert attr.base_value == pytest.approx(0.5)
    assert attr.phi == pytest.approx([0.5, 0.0], abs=1e-10)
    assert abs(attr.residual) <= 1e-10


def test_constant_function_gets_zero_phi():
    f = lambda X: np.full(np.asarray(X).shape[0], 0.7)
    background = np.array([[0, 1, 0], [1, 0, 1]])
    attr = kernel_shap(f, np.array([1, 1, 1]), background)
    assert attr.phi == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_single_feature_attribution():
    f = lambda X: np.asarray(X)[:, 0].astype(float) * 2.0
    attr = kernel_shap(f, np.array([1]), np.array([[0], [1]]))
    assert attr.phi == pytest.approx([1.0])
    assert abs(attr.residual) <= 1e-12


def test_symmetric_features_get_equal_phi():
    f = lambda X: np.asarray(X)[:, 0] + np.asarray(X)[:, 1] + 0.0
    background = np.array(list(itertools.product([0, 1], repeat=2)))
    attr = kernel_shap(f, np.array([1, 1]), background)
    assert attr.phi[0] == pytest.approx(attr.phi[1], abs=1e-6)
    assert attr.phi.sum() == pytest.approx(attr.f_x - attr.base_value, abs=1e-10)


def test_exact_matches_factorial_oracle_on_forest_surfaces(rng):
    for m in (2, 3, 5):
        n = 60
        X = rng.integers(0, 2, size=(n, m))
        times = (5 + 20 * X[:, 0] + rng.integers(0, 8, size=n)).astype(float)
        events = rng.integers(0, 2, size=n)
        events[:4] = 1
        forest = fit(X, times, events, (2,) * m, ForestParams(n_trees=12, seed=m))
        model = RiskModel(forest, ClassifierConfig(technique="sp"))
        f = prediction_function(model, "probability")
        background = rng.integers(0, 2, size=(12, m))
        x = rng.integers(0, 2, size=m)
        attr = kernel_shap(f, x, background)
        oracle = factorial_shapley(f, x, background)
        assert attr.exact
        assert attr.phi == pytest.approx(oracle, abs=1e-6)
        assert abs(attr.residual) <= 1e-6


def test_dummy_feature_gets_zero_phi(rng):
    n = 50
    X = rng.integers(0, 2, size=(n, 3))
    X[:, 2] = 0  # constant: no tree can split on it
    times = (5 + 30 * X[:, 0] + rng.integers(0, 5, size=n)).astype(float)
    events = np.ones(n, dtype=np.int64)
    forest = fit(X, times, events, (2, 2, 2), ForestParams(n_trees=10, seed=2))
    model = RiskModel(forest, ClassifierConfig(technique="sp"))
    f = prediction_function(model, "probability")
    background = rng.integers(0, 2, size=(10, 3))
    attr = kernel_shap(f, np.array([1, 0, 1]), background)
    assert attr.phi[2] == pytest.approx(0.0, abs=1e-10)


def test_sampled_mode_converges_with_budget(rng):
    m = 10
    n = 80
    X = rng.integers(0, 2, size=(n, m))
    times = (5 + 15 * X[:, 0] + 10 * X[:, 1] + rng.integers(0, 6, size=n)).astype(float)
    events = rng.integers(0, 2, size=n)
    events[:5] = 1
    forest = fit(X, times, events, (2,) * m, ForestParams(n_trees=10, seed=5))
    model = RiskModel(forest, ClassifierConfig(technique="sp"))
    f = prediction_function(model, "probability")
    background = rng.integers(0, 2, size=(10, m))
    x = rng.integers(0, 2, size=m)
    exact_phi = kernel_shap(f, x, background, mode="exact").phi

    def mean_error(budget):
        errors = []
        for seed in range(8):
            attr = kernel_shap(f, x, background, budget=budget, seed=seed, mode="sampled")
            errors.append(np.mean(np.abs(attr.phi - exact_phi)))
        return np.mean(errors)

    errors = [mean_error(b) for b in (64, 256, 1022)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 1e-10  # budget covers the full coalition space


def test_kernel_weights_sum_consistency():
    m = 6
    total = sum(
        shapley_kernel_weight(m, s) * len(list(itertools.combinations(range(m), s)))
        for s in range(1, m)
    )
    harmonic = sum(1.0 / (s * (m - s)) * (m - 1) for s in range(1, m))
    assert total == pytest.approx(harmonic)


def test_background_required():
    f = lambda X: np.zeros(np.asarray(X).shape[0])
    with pytest.raises(DataError):
        kernel_shap(f, np.array([1, 0]), np.empty((0, 2), dtype=int))


class TestPredictionFunction:
    def test_sp_binary_and_probability(self):
        forest = lookup_forest([0.0], surv_at_h=[0.45])
        model = RiskModel(forest, ClassifierConfig(technique="sp"))
        x = np.zeros((1, 1), dtype=np.int64)
        assert prediction_function(model, "binary")(x)[0] == 1.0
        assert prediction_function(model, "probability")(x)[0] == pytest.approx(0.55)

    def test_rs_probability_is_normalized(self):
        forest = lookup_forest([3.0])
        model = RiskModel(forest, ClassifierConfig(technique="rs", rs_threshold=1.0))
        x = np.zeros((1, 1), dtype=np.int64)
        assert prediction_function(model, "probability")(x)[0] == pytest.approx(0.75)

    def test_unknown_mode_rejected(self):
        forest = lookup_forest([0.0], surv_at_h=[1.0])
        model = RiskModel(forest, ClassifierConfig(technique="sp"))
        with pytest.raises(ConfigError):
            prediction_function(model, "logit")


class TestImportance:
    def make_attr(self, phi):
        from survrisk.explain import Attribution

        return Attribution(base_value=0.0, phi=np.asarray(phi, dtype=float), f_x=0.0, exact=True)

    def test_single_attribution_sorted(self):
        ranking = global_importance([self.make_attr([0.1, -0.9, 0.4])], ["a", "b", "c"])
        assert ranking == [("b", 0.9), ("c", pytest.approx(0.4)), ("a", pytest.approx(0.1))]

    def test_all_zero(self):
        ranking = global_importance([self.make_attr([0.0, 0.0])])
        assert [v for _, v in ranking] == [0.0, 0.0]
        assert [n for n, _ in ranking] == ["f_0", "f_1"]  # tie broken by index

    def test_permutation_invariance(self):
        attrs = [self.make_attr([0.5, 0.2]), self.make_attr([-0.1, 0.8])]
        assert global_importance(attrs) == global_importance(list(reversed(attrs)))


class TestRankingAgreement:
    def ranked(self, names):
        return [(n, float(len(names) - i)) for i, n in enumerate(names)]

    def test_identical_rankings(self):
        a = self.ranked([f"f{i}" for i in range(25)])
        overlap, corr = ranking_agreement(a, list(a), k=20)
        assert overlap == 20
        assert corr == pytest.approx(1.0)

    def test_disjoint_top5(self):
        a = self.ranked(["a1", "a2", "a3", "a4", "a5"])
        b = self.ranked(["b1", "b2", "b3", "b4", "b5"])
        overlap, corr = ranking_agreement(a, b, k=5)
        assert overlap == 0

    def test_paper_style_agreement_stats(self):
        # 4 of top 5 shared, 18 of top 20 shared
        shared = [f"s{i}" for i in range(18)]
        a = self.ranked(shared[:4] + ["onlyA"] + shared[4:] + ["a19", "a20"])
        b = self.ranked(shared[:4] + ["onlyB"] + shared[4:] + ["b19", "b20"])
        overlap5, _ = ranking_agreement(a, b, k=5)
        overlap20, corr20 = ranking_agreement(a, b, k=20)
        assert overlap5 == 4
        assert overlap20 == 18
        assert corr20 > 0.5

    def test_external_csv_round_trip(self, tmp_path):
        path = tmp_path / "imp.csv"
        path.write_text("feature,importance\nf2,0.5\nf1,0.9\nf3,0.1\n")
        ranking = load_importance_csv(path)
        assert [n for n, _ in ranking] == ["f1", "f2", "f3"]


def test_clustered_curves_perfect_classifier(rng):
    X, times, events = two_group_data(rng, n=80)
    # censored normals late, diseased early: separable by feature 0
    times = np.where(X[:, 0] == 1, rng.integers(5, 31, size=80), rng.integers(400, 431, size=80))
    events = X[:, 0].astype(np.int64)
    forest = fit(X, times.astype(float), events, (2,) * X.shape[1],
                 ForestParams(n_trees=15, seed=8))
    model = RiskModel(forest, ClassifierConfig(technique="sp"))
    curves = clustered_survival_curves(model, X, events)
    assert set(curves) == {(0, 0), (1, 1)}
    for curve in curves.values():
        assert np.all(np.diff(curve.values) <= 1e-12)
        assert np.all((curve.values >= -1e-12) & (curve.values <= 1 + 1e-12))
