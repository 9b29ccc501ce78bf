#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Clustering and correlation analysis
-----------------------------------
- z-score standardisation (population sd) before any distance computation
- seeded K-means: k-means++ seeding, Lloyd iterations, empty-cluster repair
- model selection: silhouette decides k, the elbow is reported alongside
- Pearson / Spearman feature x index matrices
- agreement between anthem clusters and index clusters (contingency, ARI, Cramér's V)
- qualitative Low/High tables from a median split of each index
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import chi2_contingency, pearsonr, spearmanr
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import adjusted_rand_score, silhouette_samples
from sklearn.preprocessing import StandardScaler

from .errors import ClusteringError, JoinError, UndefinedCorrelationError
from .features import FEATURE_COLUMNS
from .indices import HIGHER_IS_WORSE, JoinedDataset

logger = logging.getLogger(__name__)

MAX_ITER = 300

# (lower bound, label), checked top-down on the group-mean z-score
LABEL_BANDS = (
    (1.0, "Very High"),
    (0.5, "High"),
    (0.15, "Slightly High"),
)
AVERAGE_BAND = 0.15


# ---------------------
# Standardisation
# ---------------------
@dataclass
class StandardizedMatrix:
    values: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    constant_columns: np.ndarray
    columns: List[str] = field(default_factory=list)
    rows: List[str] = field(default_factory=list)

    def inverse(self, values: np.ndarray) -> np.ndarray:
        scale = np.where(self.constant_columns, 1.0, self.column_sds)
        return values * scale + self.column_means


def standardize(matrix: Union[pd.DataFrame, np.ndarray]) -> StandardizedMatrix:
    """z = (x - mean) / population sd per column; constant columns become zeros."""
    if isinstance(matrix, pd.DataFrame):
        columns, rows = [str(c) for c in matrix.columns], [str(r) for r in matrix.index]
        data = matrix.to_numpy(dtype=float)
    else:
        data = np.asarray(matrix, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        columns, rows = [], []
    if data.shape[0] < 2:
        raise ClusteringError("standardisation needs at least 2 rows")

    scaler = StandardScaler()
    values = scaler.fit_transform(data)
    constant = scaler.var_ == 0
    if constant.any():
        flagged = [columns[i] if columns else str(i) for i in np.flatnonzero(constant)]
        logger.warning(f"Constant columns standardised to zero: {flagged}")
    values[:, constant] = 0.0
    return StandardizedMatrix(values, scaler.mean_, np.sqrt(scaler.var_), constant, columns, rows)


# ---------------------
# K-means
# ---------------------
@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    iterations: int
    inertia_history: List[float] = field(default_factory=list)
    converged: bool = True


def _as_array(data) -> np.ndarray:
    if isinstance(data, StandardizedMatrix):
        return data.values
    if isinstance(data, pd.DataFrame):
        return data.to_numpy(dtype=float)
    array = np.asarray(data, dtype=float)
    return array.reshape(-1, 1) if array.ndim == 1 else array


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _update_centroids(points, labels, centroids, distances) -> np.ndarray:
    updated = centroids.copy()
    point_costs = distances[np.arange(len(points)), labels].copy()
    for cluster in range(len(centroids)):
        members = labels == cluster
        if members.any():
            updated[cluster] = points[members].mean(axis=0)
        else:
            # empty cluster: reseed at the point farthest from its own centroid
            farthest = int(np.argmax(point_costs))
            updated[cluster] = points[farthest]
            point_costs[farthest] = -1.0
            logger.debug(f"Empty cluster {cluster} reseeded at row {farthest}")
    return updated


def kmeans_fit(data, k: int, seed: int, max_iter: int = MAX_ITER) -> ClusterModel:
    """Seeded K-means (k-means++ init, Lloyd iterations until a fixpoint).

    Ties in the assignment step go to the lowest cluster id. Identical
    (data, k, seed) always yields an identical model.
    """
    points = _as_array(data)
    n = len(points)
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    if k > n:
        raise ClusteringError(f"k={k} exceeds the number of rows ({n})")

    centroids, _ = kmeans_plusplus(points, n_clusters=k, random_state=seed)
    labels: Optional[np.ndarray] = None
    history: List[float] = []
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        distances = _squared_distances(points, centroids)
        new_labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        centroids = _update_centroids(points, labels, centroids, distances)

    if not converged:
        logger.warning(f"K-means k={k} seed={seed} stopped after {max_iter} iterations without a fixpoint")
        distances = _squared_distances(points, centroids)
        labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(n), labels].sum()))

    return ClusterModel(k=k, centroids=centroids, assignments=labels.astype(int), inertia=history[-1],
                        seed=seed, iterations=iterations, inertia_history=history, converged=converged)


def silhouette_score(data, assignments: Sequence[int]) -> float:
    """Mean Euclidean silhouette; singleton clusters contribute 0."""
    points = _as_array(data)
    labels = np.asarray(assignments)
    if len(labels) != len(points):
        raise ClusteringError("assignments and data differ in length")
    distinct = np.unique(labels)
    if len(distinct) < 2:
        raise ClusteringError("silhouette needs at least 2 clusters")
    if len(distinct) == len(points):
        return 0.0
    return float(np.mean(silhouette_samples(points, labels, metric="euclidean")))


def elbow_k(inertias: Mapping[int, float]) -> int:
    """k at the largest second difference of the inertia curve (ties: smaller k)."""
    ks = sorted(inertias)
    if ks != list(range(1, len(ks) + 1)) or len(ks) < 3:
        raise ClusteringError(f"elbow needs inertias for consecutive k = 1..k_max (k_max >= 3), got {ks}")
    best_k, best = None, -math.inf
    for k in ks[1:-1]:
        curvature = inertias[k - 1] - 2 * inertias[k] + inertias[k + 1]
        if curvature > best:
            best_k, best = k, curvature
    return best_k


def choose_k(silhouettes: Mapping[int, Optional[float]]) -> int:
    """Highest silhouette wins, ties go to the smaller k; undefined entries never win."""
    defined = {k: s for k, s in silhouettes.items() if s is not None}
    if not defined:
        raise ClusteringError("no k in [2, k_max] produced a valid partition")
    best = max(defined.values())
    return min(k for k, s in defined.items() if s == best)


@dataclass
class SelectionDiagnostics:
    k: int
    elbow_k: int
    seed: int
    inertia: Dict[int, float]
    silhouette: Dict[int, Optional[float]]

    def to_dict(self) -> dict:
        return {
            "chosen_k": self.k,
            "elbow_k": self.elbow_k,
            "seed": self.seed,
            "inertia": {str(k): v for k, v in self.inertia.items()},
            "silhouette": {str(k): v for k, v in self.silhouette.items()},
        }


def select_k(data, k_max: int, seed: int, n_jobs: int = 1,
             max_iter: int = MAX_ITER) -> Tuple[int, SelectionDiagnostics, Dict[int, ClusterModel]]:
    """Fit k = 1..k_max, choose k in [2, k_max] by silhouette (ties: smaller k)."""
    points = _as_array(data)
    if k_max < 3:
        raise ClusteringError(f"k_max must be >= 3, got {k_max}")
    if k_max > len(points):
        raise ClusteringError(f"k_max={k_max} exceeds the number of rows ({len(points)})")

    fitted = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(kmeans_fit)(points, k, seed, max_iter) for k in range(1, k_max + 1))
    models = {model.k: model for model in fitted}

    silhouettes: Dict[int, Optional[float]] = {}
    for k in range(2, k_max + 1):
        labels = models[k].assignments
        if len(np.unique(labels)) < 2:
            silhouettes[k] = None
            logger.warning(f"k={k}: fewer than 2 non-empty clusters, silhouette undefined")
        else:
            silhouettes[k] = silhouette_score(points, labels)

    chosen = choose_k(silhouettes)
    best = silhouettes[chosen]

    inertias = {k: m.inertia for k, m in models.items()}
    diagnostics = SelectionDiagnostics(k=chosen, elbow_k=elbow_k(inertias), seed=seed,
                                       inertia=inertias, silhouette=silhouettes)
    logger.info(f"Selected k={chosen} (silhouette {best:.3f}); elbow suggests k={diagnostics.elbow_k}")
    return chosen, diagnostics, models


# ---------------------
# Correlation
# ---------------------
def _paired(x, y) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise UndefinedCorrelationError("correlation inputs must be 1-D and equal length")
    if len(x) < 3:
        raise UndefinedCorrelationError("correlation needs at least 3 pairs")
    return x, y


def _clipped(r) -> float:
    return min(1.0, max(-1.0, float(r)))


def pearson(x, y) -> float:
    x, y = _paired(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant input")
    return _clipped(pearsonr(x, y)[0])


def spearman(x, y) -> float:
    """Rank correlation; ties get mid-ranks."""
    x, y = _paired(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant input")
    return _clipped(spearmanr(x, y)[0])


def correlation_matrix(joined: JoinedDataset, method: str = "pearson") -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
    """Feature x index matrix; undefined cells are NaN and listed separately."""
    func = {"pearson": pearson, "spearman": spearman}[method]
    matrix = pd.DataFrame(index=list(FEATURE_COLUMNS), columns=joined.index_names, dtype=float)
    undefined: List[Tuple[str, str]] = []
    for index_name in joined.index_names:
        features, scores = joined.view(index_name)
        for feature in FEATURE_COLUMNS:
            try:
                matrix.loc[feature, index_name] = func(features[feature].to_numpy(), scores.to_numpy())
            except UndefinedCorrelationError as e:
                logger.warning(f"{method} {feature} x {index_name}: {e}")
                undefined.append((feature, index_name))
    return matrix, undefined


# ---------------------
# Cluster agreement
# ---------------------
@dataclass
class ClusterAgreement:
    contingency: pd.DataFrame
    adjusted_rand: float
    cramers_v: float

    def to_dict(self) -> dict:
        return {
            "adjusted_rand_index": self.adjusted_rand,
            "cramers_v": self.cramers_v,
            "contingency": {
                "rows": [str(r) for r in self.contingency.index],
                "columns": [str(c) for c in self.contingency.columns],
                "counts": self.contingency.to_numpy().tolist(),
            },
        }


def cluster_agreement(a: Sequence[int], b: Sequence[int]) -> ClusterAgreement:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ClusteringError(f"assignment lengths differ ({len(a)} vs {len(b)})")

    contingency = pd.crosstab(pd.Series(a, name="anthem"), pd.Series(b, name="index"))
    ari = float(adjusted_rand_score(a, b))
    if min(contingency.shape) < 2:
        cramers_v = 0.0
    else:
        chi2 = chi2_contingency(contingency.to_numpy(), correction=False)[0]
        cramers_v = math.sqrt(chi2 / (len(a) * (min(contingency.shape) - 1)))
        cramers_v = min(1.0, max(0.0, cramers_v))
    return ClusterAgreement(contingency, ari, cramers_v)


# ---------------------
# Qualitative tables
# ---------------------
def z_label(z: float) -> str:
    for bound, label in LABEL_BANDS:
        if z >= bound:
            return label
    if z > -AVERAGE_BAND:
        return "Average"
    for bound, label in LABEL_BANDS:
        if z <= -bound:
            return label.replace("High", "Low")
    return "Slightly Low"


@dataclass
class QualitativeTable:
    index_name: str
    direction: str
    favourable_group: str
    low_count: int
    high_count: int
    group_means: pd.DataFrame      # feature x {Low, High}, standardized units
    labels: pd.DataFrame           # feature x {Low, High}

    def to_dict(self) -> dict:
        return {
            "index": self.index_name,
            "direction": self.direction,
            "favourable_group": self.favourable_group,
            "group_sizes": {"Low": self.low_count, "High": self.high_count},
            "thresholds": {"Very High": 1.0, "High": 0.5, "Slightly High": 0.15,
                           "Average": "(-0.15, 0.15)", "mirrored": "negative bands"},
            "rows": [
                {"feature": feature, "low": self.labels.loc[feature, "Low"],
                 "high": self.labels.loc[feature, "High"],
                 "low_mean_z": float(self.group_means.loc[feature, "Low"]),
                 "high_mean_z": float(self.group_means.loc[feature, "High"])}
                for feature in self.labels.index
            ],
        }


def qualitative_labels(joined: JoinedDataset, index_name: str) -> QualitativeTable:
    """Median-split countries on one index and label each feature's group-mean z-score."""
    if index_name not in joined.index_scores:
        raise JoinError(f"index {index_name!r} not in the joined dataset")
    features, scores = joined.view(index_name)
    if len(scores) < 4:
        raise JoinError(f"index {index_name!r}: qualitative table needs >= 4 countries, has {len(scores)}")

    z = pd.DataFrame(standardize(features).values, index=features.index, columns=features.columns)
    high = scores > scores.median()
    if not high.any() or high.all():
        raise JoinError(f"index {index_name!r}: degenerate median split")

    means = pd.DataFrame({"Low": z[~high.to_numpy()].mean(), "High": z[high.to_numpy()].mean()})
    labels = means.apply(lambda column: column.map(z_label))
    direction = joined.directions[index_name]
    return QualitativeTable(
        index_name=index_name,
        direction=direction,
        favourable_group="Low" if direction == HIGHER_IS_WORSE else "High",
        low_count=int((~high).sum()),
        high_count=int(high.sum()),
        group_means=means,
        labels=labels,
    )


# ---------------------
# Report assembly
# ---------------------
@dataclass
class CorrelationReport:
    pearson: pd.DataFrame
    spearman: pd.DataFrame
    cluster_agreement: Dict[str, ClusterAgreement]
    qualitative: Dict[str, QualitativeTable]
    undefined: List[Tuple[str, str]] = field(default_factory=list)
    skipped: Dict[str, str] = field(default_factory=dict)


def build_correlation_report(joined: JoinedDataset, anthem_clusters: Optional[pd.Series],
                             index_clusters: Dict[str, pd.Series]) -> CorrelationReport:
    """Correlations, cluster agreement and qualitative tables for every joined index.

    Clusters are Series indexed by country. Indices too small for a median
    split are left out of the qualitative tables and listed in `skipped`.
    """
    pearson_matrix, undefined = correlation_matrix(joined, "pearson")
    spearman_matrix, _ = correlation_matrix(joined, "spearman")

    agreement = {}
    if anthem_clusters is not None:
        for index_name, labels in index_clusters.items():
            agreement[index_name] = cluster_agreement(anthem_clusters.loc[labels.index].to_numpy(),
                                                      labels.to_numpy())

    qualitative, skipped = {}, {}
    for name in joined.index_names:
        try:
            qualitative[name] = qualitative_labels(joined, name)
        except JoinError as e:
            logger.warning(f"Qualitative table skipped: {e}")
            skipped[name] = str(e)
    return CorrelationReport(pearson_matrix, spearman_matrix, agreement, qualitative, undefined, skipped)
