import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from anthem_analysis.analysis import (build_correlation_report, choose_k, cluster_agreement, correlation_matrix,
                                      elbow_k, kmeans_fit, pearson, qualitative_labels, select_k, silhouette_score,
                                      spearman, standardize, z_label)
from anthem_analysis.errors import ClusteringError, JoinError, UndefinedCorrelationError
from anthem_analysis.features import FEATURE_COLUMNS
from anthem_analysis.indices import HIGHER_IS_BETTER, HIGHER_IS_WORSE, IndexTable, join_corpus_indices


def blobs(centers, per_blob=10, spread=0.5, seed=0):
    rng = np.random.default_rng(seed)
    return np.vstack([rng.normal(c, spread, size=(per_blob, len(c))) for c in centers])


def planted_dataset(direction=HIGHER_IS_WORSE):
    """Eight countries; the high-score half has tempo z = +0.8 and the low half -0.8."""
    countries = [f"c{i}" for i in range(1, 9)]
    rng = np.random.default_rng(5)
    features = pd.DataFrame(rng.normal(size=(8, len(FEATURE_COLUMNS))), columns=list(FEATURE_COLUMNS))
    features["tempo_bpm"] = [-1.4, -0.2, -1.4, -0.2, 0.2, 1.4, 0.2, 1.4]
    features["time_signature_changes"] = 0
    features.insert(0, "country", countries)
    scores = IndexTable("peace", direction, {c: (float(i + 1), None) for i, c in enumerate(countries)})
    return join_corpus_indices(features, [scores])


# ---------------------
# Standardisation
# ---------------------
def test_standardize_column():
    z = standardize(np.array([[1.0], [2.0], [3.0]])).values[:, 0]
    assert z == pytest.approx([-1.224744871, 0.0, 1.224744871], abs=1e-9)


def test_standardize_constant_column_flagged():
    result = standardize(pd.DataFrame({"a": [5.0, 5.0, 5.0], "b": [1.0, 2.0, 4.0]}))
    assert list(result.values[:, 0]) == [0.0, 0.0, 0.0]
    assert list(result.constant_columns) == [True, False]
    assert result.columns == ["a", "b"]


def test_standardize_is_idempotent_on_z_scores():
    once = standardize(blobs([(0, 0), (5, 5)])).values
    twice = standardize(once).values
    assert np.abs(twice - once).max() < 1e-9


def test_standardize_inverse():
    raw = blobs([(0, 0, 0), (3, 9, 1)])
    result = standardize(raw)
    assert np.allclose(result.inverse(result.values), raw)


@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 6))
def test_standardized_columns_have_zero_mean_unit_sd(seed, rows, columns):
    rng = np.random.default_rng(seed)
    raw = rng.normal(rng.uniform(-100, 100), rng.uniform(0.1, 50), size=(rows, columns))
    z = standardize(raw).values
    assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(z.std(axis=0) - 1) < 1e-9)


def test_standardize_needs_two_rows():
    with pytest.raises(ClusteringError):
        standardize(np.array([[1.0, 2.0]]))


# ---------------------
# K-means
# ---------------------
FOUR_POINTS = np.array([[0, 0], [0, 1], [10, 10], [10, 11]], dtype=float)


@pytest.mark.parametrize("seed", range(10))
def test_kmeans_separates_two_blobs(seed):
    labels = kmeans_fit(FOUR_POINTS, 2, seed).assignments
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert labels[0] != labels[2]


def test_kmeans_single_cluster_closed_form():
    model = kmeans_fit(FOUR_POINTS, 1, seed=3)
    assert np.allclose(model.centroids[0], FOUR_POINTS.mean(axis=0))
    assert model.inertia == pytest.approx(((FOUR_POINTS - FOUR_POINTS.mean(axis=0)) ** 2).sum())
    assert set(model.assignments) == {0}


def test_kmeans_is_deterministic():
    data = blobs([(0, 0), (4, 4), (8, 0)], seed=2)
    a, b = kmeans_fit(data, 3, seed=11), kmeans_fit(data, 3, seed=11)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.centroids, b.centroids)
    assert a.inertia_history == b.inertia_history


@pytest.mark.parametrize("k", [0, 5])
def test_kmeans_rejects_bad_k(k):
    with pytest.raises(ClusteringError):
        kmeans_fit(FOUR_POINTS, k, seed=0)


def test_kmeans_with_duplicate_points_keeps_k_clusters():
    data = np.array([[0.0], [0.0], [0.0], [1.0]])
    model = kmeans_fit(data, 2, seed=0)
    assert model.centroids.shape == (2, 1)
    assert model.converged


@given(st.integers(0, 10_000), st.integers(5, 30), st.integers(1, 5))
def test_kmeans_inertia_non_increasing_and_fixpoint(seed, rows, k):
    points = np.random.default_rng(seed).normal(size=(rows, 3))
    model = kmeans_fit(points, k, seed)
    history = model.inertia_history
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(history, history[1:]))
    assert model.inertia >= 0
    if model.converged:
        distances = ((points[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(distances.argmin(axis=1), model.assignments)


def test_scaling_a_raw_column_keeps_assignments():
    raw = blobs([(0, 0), (3, 30), (6, 0)], seed=4)
    scaled = raw.copy()
    scaled[:, 1] *= 1000.0
    a = kmeans_fit(standardize(raw), 3, seed=9).assignments
    b = kmeans_fit(standardize(scaled), 3, seed=9).assignments
    assert np.array_equal(a, b)


# ---------------------
# Silhouette and model selection
# ---------------------
def test_silhouette_two_tight_pairs():
    points = np.array([0.0, 0.2, 10.0, 10.2])
    expected = np.mean([1 - 0.2 / 10.1, 1 - 0.2 / 9.9, 1 - 0.2 / 9.9, 1 - 0.2 / 10.1])
    assert silhouette_score(points, [0, 0, 1, 1]) == pytest.approx(expected, abs=1e-12)
    assert silhouette_score(points, [0, 0, 1, 1]) == pytest.approx(0.979998, abs=1e-6)


def test_silhouette_singletons_are_zero():
    assert silhouette_score(np.array([[1.0, 1.0], [1.0, 1.0]]), [0, 1]) == 0.0


def test_silhouette_interleaved_duplicates():
    assert silhouette_score(np.array([0.0, 0.0, 1.0, 1.0]), [0, 1, 0, 1]) == pytest.approx(-0.5)


def test_silhouette_needs_two_clusters():
    with pytest.raises(ClusteringError):
        silhouette_score(FOUR_POINTS, [0, 0, 0, 0])


@given(st.integers(0, 10_000), st.integers(3, 25), st.integers(2, 4))
def test_silhouette_in_range(seed, rows, k):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, size=rows)
    labels[:2] = [0, 1]
    value = silhouette_score(rng.normal(size=(rows, 2)), labels)
    assert -1.0 <= value <= 1.0


@pytest.mark.parametrize("inertias, expected", [
    ({1: 100, 2: 20, 3: 18, 4: 17}, 2),
    ({1: 40, 2: 30, 3: 20, 4: 10}, 2),
    ({1: 50, 2: 40, 3: 10, 4: 9}, 3),
])
def test_elbow_k(inertias, expected):
    assert elbow_k(inertias) == expected


def test_elbow_needs_consecutive_ks():
    with pytest.raises(ClusteringError):
        elbow_k({1: 10.0, 3: 5.0, 4: 4.0})


def test_choose_k_tie_goes_to_smaller():
    assert choose_k({2: 0.70, 3: 0.72, 4: 0.72}) == 3
    assert choose_k({2: None, 3: 0.1, 4: 0.05}) == 3
    with pytest.raises(ClusteringError):
        choose_k({2: None})


@pytest.mark.parametrize("seed", range(20))
def test_select_k_finds_three_planted_blobs(seed):
    data = blobs([(0, 0), (20, 0), (0, 20)], seed=seed)
    k, diagnostics, models = select_k(data, k_max=8, seed=seed)
    assert k == 3
    planted = np.repeat([0, 1, 2], 10)
    assert cluster_agreement(models[3].assignments, planted).adjusted_rand == pytest.approx(1.0)
    assert sorted(models) == list(range(1, 9))
    assert diagnostics.silhouette[3] == max(s for s in diagnostics.silhouette.values() if s is not None)


def test_select_k_two_blobs_elbow_agrees():
    data = blobs([(0, 0), (30, 30)], seed=1)
    k, diagnostics, _ = select_k(data, k_max=6, seed=1)
    assert k == 2
    assert diagnostics.elbow_k == 2
    as_dict = diagnostics.to_dict()
    assert as_dict["chosen_k"] == 2
    assert set(as_dict["silhouette"]) == {"2", "3", "4", "5", "6"}
    assert set(as_dict["inertia"]) == {"1", "2", "3", "4", "5", "6"}


def test_select_k_is_deterministic_across_workers():
    data = blobs([(0, 0), (6, 6), (12, 0)], seed=8)
    single = select_k(data, k_max=6, seed=21, n_jobs=1)
    threaded = select_k(data, k_max=6, seed=21, n_jobs=2)
    assert single[0] == threaded[0]
    assert single[1].to_dict() == threaded[1].to_dict()


@pytest.mark.parametrize("k_max", [2, 50])
def test_select_k_rejects_bad_k_max(k_max):
    with pytest.raises(ClusteringError):
        select_k(blobs([(0, 0)]), k_max=k_max, seed=0)


# ---------------------
# Correlation
# ---------------------
def test_pearson_examples():
    x = np.array([1.0, 4.0, 2.0, 8.0])
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(5 / math.sqrt(2 * 114 / 9))
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(0.99340, abs=1e-5)


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [1, 10, 100, 1000]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [10, 20, 15]) == pytest.approx(0.5)
    assert spearman([1, 1, 2], [3, 5, 9]) == pytest.approx(pearson([1.5, 1.5, 3], [1, 2, 3]))


def test_correlations_match_scipy_with_ties():
    x = [3, 1, 3, 2, 5, 5, 5, 0]
    y = [0.5, 0.1, 0.9, 0.4, 0.2, 2.0, 0.2, -1.0]
    assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0])
    assert spearman(x, y) == pytest.approx(stats.spearmanr(x, y)[0])
    assert spearman(x, y) == pytest.approx(pearson(stats.rankdata(x), stats.rankdata(y)))


@pytest.mark.parametrize("func", [pearson, spearman])
def test_constant_input_is_undefined(func):
    with pytest.raises(UndefinedCorrelationError):
        func([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError):
        func([1, 2], [1, 2])


@given(st.integers(0, 10_000), st.integers(3, 30), st.floats(0.5, 4), st.floats(-10, 10))
def test_correlation_symmetry_and_affine_invariance(seed, n, scale, shift):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(size=n)
    for func in (pearson, spearman):
        r = func(x, y)
        assert -1.0 <= r <= 1.0
        assert abs(func(y, x) - r) < 1e-12
        assert abs(func(scale * x + shift, y) - r) < 1e-12
    assert spearman(x ** 3 + x, np.exp(y)) == spearman(x, y)


def test_correlation_matrix_marks_constant_feature_undefined():
    joined = planted_dataset()
    matrix, undefined = correlation_matrix(joined, "pearson")
    assert list(matrix.index) == list(FEATURE_COLUMNS)
    assert list(matrix.columns) == ["peace"]
    assert ("time_signature_changes", "peace") in undefined
    assert math.isnan(matrix.loc["time_signature_changes", "peace"])
    assert matrix.drop(index="time_signature_changes").notna().all().all()


# ---------------------
# Cluster agreement
# ---------------------
def test_agreement_identical_partitions():
    agreement = cluster_agreement([0, 0, 1, 1], [0, 0, 1, 1])
    assert agreement.adjusted_rand == pytest.approx(1.0)
    assert agreement.cramers_v == pytest.approx(1.0)


def test_agreement_crossed_partitions():
    agreement = cluster_agreement([0, 0, 1, 1], [0, 1, 0, 1])
    assert agreement.adjusted_rand == pytest.approx(-0.5)
    assert agreement.cramers_v == pytest.approx(0.0)
    assert agreement.contingency.to_numpy().tolist() == [[1, 1], [1, 1]]


def test_agreement_one_sided_single_label():
    agreement = cluster_agreement([0, 0, 1, 1], [0, 0, 0, 0])
    assert agreement.adjusted_rand == pytest.approx(0.0)
    assert agreement.cramers_v == 0.0


def test_agreement_to_dict():
    as_dict = cluster_agreement([0, 1, 1], [1, 0, 0]).to_dict()
    assert as_dict["contingency"]["counts"] == [[0, 1], [2, 0]]
    assert as_dict["adjusted_rand_index"] == pytest.approx(1.0)


@given(st.lists(st.integers(0, 3), min_size=2, max_size=30), st.permutations([0, 1, 2, 3]))
def test_ari_symmetric_and_label_permutation_invariant(labels, permutation):
    other = list(reversed(labels))
    relabelled = [permutation[x] for x in labels]
    a = cluster_agreement(labels, other)
    assert a.adjusted_rand == pytest.approx(cluster_agreement(other, labels).adjusted_rand)
    assert cluster_agreement(labels, relabelled).adjusted_rand == pytest.approx(1.0)
    assert -1.0 <= a.adjusted_rand <= 1.0
    assert 0.0 <= a.cramers_v <= 1.0


def test_agreement_length_mismatch():
    with pytest.raises(ClusteringError):
        cluster_agreement([0, 1], [0, 1, 1])


# ---------------------
# Qualitative labels
# ---------------------
@pytest.mark.parametrize("z, label", [
    (1.3, "Very High"), (1.0, "Very High"), (0.5, "High"), (0.2, "Slightly High"), (0.15, "Slightly High"),
    (0.1, "Average"), (-0.1, "Average"), (-0.15, "Slightly Low"), (-0.6, "Low"), (-1.3, "Very Low"),
])
def test_z_label(z, label):
    assert z_label(z) == label


def test_planted_group_shift_is_labelled():
    table = qualitative_labels(planted_dataset(), "peace")
    assert table.group_means.loc["tempo_bpm", "High"] == pytest.approx(0.8)
    assert table.labels.loc["tempo_bpm", "High"] == "High"
    assert table.labels.loc["tempo_bpm", "Low"] == "Low"
    assert table.labels.loc["time_signature_changes", "High"] == "Average"
    assert (table.low_count, table.high_count) == (4, 4)
    assert table.favourable_group == "Low"


def test_favourable_group_follows_direction():
    assert qualitative_labels(planted_dataset(HIGHER_IS_BETTER), "peace").favourable_group == "High"


def test_qualitative_to_dict():
    as_dict = qualitative_labels(planted_dataset(), "peace").to_dict()
    assert as_dict["group_sizes"] == {"Low": 4, "High": 4}
    assert [row["feature"] for row in as_dict["rows"]] == list(FEATURE_COLUMNS)
    assert as_dict["thresholds"]["High"] == 0.5


def test_qualitative_needs_four_countries():
    features = pd.DataFrame(np.arange(3 * len(FEATURE_COLUMNS), dtype=float).reshape(3, -1),
                            columns=list(FEATURE_COLUMNS))
    features.insert(0, "country", ["a", "b", "c"])
    joined = join_corpus_indices(features, [IndexTable("small", HIGHER_IS_BETTER, {"a": (1.0, None),
                                                                                  "b": (2.0, None),
                                                                                  "c": (3.0, None)})])
    with pytest.raises(JoinError, match="needs >= 4"):
        qualitative_labels(joined, "small")
    report = build_correlation_report(joined, None, {})
    assert "small" in report.skipped
    assert report.qualitative == {}


def test_report_collects_agreement_per_index():
    joined = planted_dataset()
    anthem = pd.Series([0, 0, 0, 0, 1, 1, 1, 1], index=joined.countries)
    index = pd.Series([0, 0, 0, 0, 1, 1, 1, 1], index=joined.countries)
    report = build_correlation_report(joined, anthem, {"peace": index})
    assert report.cluster_agreement["peace"].adjusted_rand == pytest.approx(1.0)
    assert report.pearson.loc["tempo_bpm", "peace"] == pytest.approx(pearson(
        [-1.4, -0.2, -1.4, -0.2, 0.2, 1.4, 0.2, 1.4], range(1, 9)))
    assert ("time_signature_changes", "peace") in report.undefined
    assert set(report.qualitative) == {"peace"}
