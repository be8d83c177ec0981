"""Splits, Accuracy@K, frequency predictors and the difference/accuracy experiments."""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .applicability import ApplicabilityResult
from .dimensions import CANONICAL_PAIRS, ContextKind, FeaturePair, ViewKind, canonical_position
from .exceptions import InvalidConfig, LengthMismatch
from .features import FeatureMatrix, UserFeatureSet
from .ingestion import CONTEXTS, CheckIn, HomeLocation, ViewSpec, user_sort_key

logger = logging.getLogger(__name__)

CHRONOLOGICAL = 'chronological'
DECILE = 'decile'
ABSOLUTE = 'absolute'
RQ1_GRIDS = (DECILE, ABSOLUTE)
# [0,10) [10,20) ... [90,100) [100,inf)
ABSOLUTE_EDGES = tuple(range(10, 101, 10))
MAX_DECILES = 10


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    validation: float = 0.1
    test: float = 0.1
    policy: str = CHRONOLOGICAL

    def __post_init__(self):
        fractions = [Fraction(str(value)) for value in (self.train, self.validation, self.test)]
        if any(value < 0 for value in fractions) or sum(fractions) != 1:
            raise InvalidConfig(f'split fractions must be non-negative and sum to 1, got {self.as_string()}')
        if self.policy != CHRONOLOGICAL:
            raise InvalidConfig(f'unsupported split policy {self.policy!r}')

    @classmethod
    def from_string(cls, value: str) -> 'SplitSpec':
        parts = [part.strip() for part in value.split(',')]
        if len(parts) != 3:
            raise InvalidConfig(f'split needs three comma-separated fractions, got {value!r}')
        try:
            return cls(*(float(part) for part in parts))
        except ValueError:
            raise InvalidConfig(f'split fractions must be numbers, got {value!r}') from None

    def as_string(self) -> str:
        return f'{self.train},{self.validation},{self.test}'

    def cut_points(self, n: int) -> tuple[int, int]:
        """Floor cuts at train and train+validation; train keeps at least one record."""
        train = Fraction(str(self.train))
        first = math.floor(train * n)
        second = math.floor((train + Fraction(str(self.validation))) * n)
        if n and first == 0:
            first = 1
        return first, max(first, second)


@dataclass
class DatasetSplits:
    train: dict[str, tuple[CheckIn, ...]]
    validation: dict[str, tuple[CheckIn, ...]]
    test: dict[str, tuple[CheckIn, ...]]

    def sizes(self) -> tuple[int, int, int]:
        return tuple(sum(len(records) for records in part.values())
                     for part in (self.train, self.validation, self.test))


def split_dataset(grouped: Mapping[str, Sequence[CheckIn]], spec: SplitSpec = SplitSpec()) -> DatasetSplits:
    """Per user, cut the chronologically sorted records into train/validation/test."""
    splits = DatasetSplits({}, {}, {})
    without_test = 0
    for user in sorted(grouped, key=user_sort_key):
        records = tuple(sorted(grouped[user], key=lambda c: (c.timestamp, c.line_number)))
        first, second = spec.cut_points(len(records))
        splits.train[user] = records[:first]
        splits.validation[user] = records[first:second]
        splits.test[user] = records[second:]
        if not splits.test[user]:
            without_test += 1
    if without_test:
        logger.warning('%d users have too few records for a test split', without_test)
    return splits


@dataclass(frozen=True)
class EvalQuery:
    user_id: str
    time_bucket: int
    distance_bucket: int
    label: int

    def context_bucket(self, kind: ContextKind) -> int:
        return self.time_bucket if kind == ContextKind.TIME else self.distance_bucket


def build_queries(grouped: Mapping[str, Sequence[CheckIn]], homes: Mapping[str, HomeLocation],
                  view: ViewSpec) -> list[EvalQuery]:
    """One query per check-in with a label in the view, users in id order."""
    time_context = CONTEXTS[ContextKind.TIME]
    distance_context = CONTEXTS[ContextKind.DISTANCE]
    queries = []
    for user in sorted(grouped, key=user_sort_key):
        home = homes.get(user)
        for checkin in grouped[user]:
            label = view.label_index(checkin)
            if label is None:
                continue
            queries.append(EvalQuery(
                user,
                time_context.bucket(checkin, home),
                distance_context.bucket(checkin, home),
                label,
            ))
    return queries


def accuracy_at_k(predictions: Sequence[Sequence[int]], queries: Sequence[EvalQuery], k: int) -> float | None:
    """Fraction of queries whose label is in the first k predictions; None without queries."""
    if len(predictions) != len(queries):
        raise LengthMismatch(f'{len(predictions)} prediction lists for {len(queries)} queries')
    if k < 1:
        raise LengthMismatch(f'K must be positive, got {k}')
    if not queries:
        return None
    hits = 0
    for ranked, query in zip(predictions, queries):
        if len(ranked) < k:
            raise LengthMismatch(f'prediction list of length {len(ranked)} is shorter than K={k}')
        hits += query.label in ranked[:k]
    return hits / len(queries)


def _rank(*keys: np.ndarray) -> np.ndarray:
    """Label indices by descending keys (first key most significant), ties by index."""
    index = np.arange(len(keys[0]))
    return np.lexsort((index,) + tuple(-np.asarray(key, dtype=np.float64) for key in reversed(keys)))


class RankingPredictor:
    n_labels: int

    def rank(self, query: EvalQuery) -> np.ndarray:
        raise NotImplementedError

    def predict(self, queries: Sequence[EvalQuery], k: int | None = None) -> list[list[int]]:
        k = self.n_labels if k is None else k
        return [self.rank(query)[:k].tolist() for query in queries]


class MostPopular(RankingPredictor):
    """Same ranking for everyone: global train-split popularity."""

    def __init__(self, counts: np.ndarray):
        self.counts = np.asarray(counts, dtype=np.int64)
        self.n_labels = len(self.counts)
        self._ranking = _rank(self.counts)

    @classmethod
    def fit(cls, train: Mapping[str, Sequence[CheckIn]], view: ViewSpec) -> 'MostPopular':
        counts = np.zeros(view.cardinality, dtype=np.int64)
        for checkins in train.values():
            for checkin in checkins:
                label = view.label_index(checkin)
                if label is not None:
                    counts[label] += 1
        return cls(counts)

    def rank(self, query: EvalQuery) -> np.ndarray:
        return self._ranking


class FrequencyBaseline(RankingPredictor):
    """Per-user counts in the (time, distance) cell, then user marginal, then global."""

    def __init__(self, cells: dict[str, np.ndarray], n_labels: int):
        self.cells = cells
        self.n_labels = n_labels
        self.marginals = {user: table.sum(axis=(0, 1)) for user, table in cells.items()}
        self.global_counts = sum(self.marginals.values(), np.zeros(n_labels, dtype=np.int64))
        self._empty = np.zeros(n_labels, dtype=np.int64)

    @classmethod
    def fit(cls, train: Mapping[str, Sequence[CheckIn]], homes: Mapping[str, HomeLocation],
            view: ViewSpec) -> 'FrequencyBaseline':
        time_context = CONTEXTS[ContextKind.TIME]
        distance_context = CONTEXTS[ContextKind.DISTANCE]
        cells = {}
        for user, checkins in train.items():
            table = np.zeros((time_context.cardinality, distance_context.cardinality, view.cardinality),
                             dtype=np.int64)
            home = homes.get(user)
            for checkin in checkins:
                label = view.label_index(checkin)
                if label is None:
                    continue
                table[time_context.bucket(checkin, home), distance_context.bucket(checkin, home), label] += 1
            cells[user] = table
        return cls(cells, view.cardinality)

    def rank(self, query: EvalQuery) -> np.ndarray:
        table = self.cells.get(query.user_id)
        if table is None:
            return _rank(self._empty, self._empty, self.global_counts)
        cell = table[query.time_bucket, query.distance_bucket]
        return _rank(cell, self.marginals[query.user_id], self.global_counts)


def project_counts(counts: np.ndarray, source: ViewKind, target: ViewKind, leaf_to_root: Sequence[int],
                   n_roots: int) -> np.ndarray:
    """Map counts over one view's labels onto the other view.

    Leaf to root sums each root's leaves; root to leaf gives every leaf its
    root's count.
    """
    counts = np.asarray(counts)
    if source == target:
        return counts
    leaf_to_root = np.asarray(leaf_to_root, dtype=np.int64)
    if source == ViewKind.LEAF:
        return np.bincount(leaf_to_root, weights=counts, minlength=n_roots)
    return counts[..., leaf_to_root]


class PairFrequencyPredictor(RankingPredictor):
    """Ranks target labels from one feature model's train matrices alone."""

    def __init__(self, pair: FeaturePair, matrices: Mapping[str, FeatureMatrix], target: ViewKind,
                 leaf_to_root: Sequence[int], n_roots: int):
        self.pair = pair
        self.target = target
        self._project = lambda counts: project_counts(counts, pair.view, target, leaf_to_root, n_roots)
        self.n_labels = n_roots if target == ViewKind.ROOT else len(leaf_to_root)
        self.matrices = dict(matrices)
        self.marginals = {user: self._project(m.counts.sum(axis=0)) for user, m in self.matrices.items()}
        self.global_counts = sum(self.marginals.values(), np.zeros(self.n_labels))
        self._empty = np.zeros(self.n_labels)

    @classmethod
    def from_feature_sets(cls, pair: FeaturePair, feature_sets: Mapping[str, UserFeatureSet],
                          target: ViewKind, leaf_to_root: Sequence[int], n_roots: int):
        matrices = {user: ufs[pair] for user, ufs in feature_sets.items() if pair in ufs.matrices}
        return cls(pair, matrices, target, leaf_to_root, n_roots)

    def rank(self, query: EvalQuery) -> np.ndarray:
        matrix = self.matrices.get(query.user_id)
        if matrix is None:
            return _rank(self._empty, self._empty, self.global_counts)
        row = self._project(matrix.counts[query.context_bucket(self.pair.context)])
        return _rank(row, self.marginals[query.user_id], self.global_counts)


class PartitionedPredictor(RankingPredictor):
    """Every user is served by the predictor of their assigned feature model."""

    def __init__(self, predictors: Mapping[FeaturePair, PairFrequencyPredictor],
                 assignments: Mapping[str, FeaturePair]):
        self.predictors = dict(predictors)
        self.assignments = dict(assignments)
        self.fallback = min(self.predictors, key=canonical_position)
        self.n_labels = self.predictors[self.fallback].n_labels

    def rank(self, query: EvalQuery) -> np.ndarray:
        pair = self.assignments.get(query.user_id, self.fallback)
        return self.predictors.get(pair, self.predictors[self.fallback]).rank(query)


def build_pair_predictors(feature_sets: Mapping[str, UserFeatureSet], pairs: Sequence[FeaturePair],
                          target: ViewKind, leaf_to_root: Sequence[int],
                          n_roots: int) -> dict[FeaturePair, PairFrequencyPredictor]:
    return {
        pair: PairFrequencyPredictor.from_feature_sets(pair, feature_sets, target, leaf_to_root, n_roots)
        for pair in sorted(pairs, key=canonical_position)
    }


@dataclass(frozen=True)
class Rq1Row:
    pair: str
    bucket: int
    lower: float
    upper: float | None
    users: int
    queries: int
    accuracy: float | None


@dataclass(frozen=True)
class Rq1TrendRow:
    pair: str
    buckets: int
    spearman_rho: float | None


@dataclass(frozen=True)
class Rq2Row:
    cohort: str
    users: int
    queries: int
    time_root: float | None
    time_leaf: float | None
    distance_root: float | None
    distance_leaf: float | None
    partitioned: float | None


@dataclass(frozen=True)
class TopKRow:
    method: str
    k: int
    queries: int
    accuracy: float | None


def _queries_by_user(queries: Sequence[EvalQuery]) -> dict[str, list[EvalQuery]]:
    by_user = {}
    for query in queries:
        by_user.setdefault(query.user_id, []).append(query)
    return by_user


def _decile_buckets(differences: Mapping[str, float]) -> list[tuple[list[str], float, float | None]]:
    ordered = sorted(differences, key=lambda user: (differences[user], user_sort_key(user)))
    if not ordered:
        return []
    buckets = []
    for chunk in np.array_split(np.arange(len(ordered)), min(MAX_DECILES, len(ordered))):
        users = [ordered[i] for i in chunk]
        buckets.append((users, differences[users[0]], differences[users[-1]]))
    return buckets


def _absolute_buckets(differences: Mapping[str, float]) -> list[tuple[list[str], float, float | None]]:
    lowers = (0,) + ABSOLUTE_EDGES
    uppers = ABSOLUTE_EDGES + (None,)
    members = [[] for _ in lowers]
    for user in sorted(differences, key=user_sort_key):
        position = int(np.searchsorted(ABSOLUTE_EDGES, differences[user], side='right'))
        members[position].append(user)
    return [(users, float(lower), None if upper is None else float(upper))
            for users, lower, upper in zip(members, lowers, uppers)]


def run_rq1(queries: Sequence[EvalQuery], predictors: Mapping[FeaturePair, RankingPredictor],
            applicability: ApplicabilityResult, grid: str = DECILE) -> tuple[list[Rq1Row], list[Rq1TrendRow]]:
    """Accuracy@1 of each feature model per difference-value bucket.

    Decile buckets split the users ranked by difference into ten near-equal
    groups (fewer when there are fewer users); the absolute grid uses fixed
    steps of 10.
    """
    if grid not in RQ1_GRIDS:
        raise InvalidConfig(f'unknown RQ1 grid {grid!r}')
    by_user = _queries_by_user(queries)
    rows, trends = [], []
    for pair, predictor in predictors.items():
        differences = {a.user_id: a.records[pair].sum_diff for a in applicability.assignments if pair in a.records}
        buckets = _decile_buckets(differences) if grid == DECILE else _absolute_buckets(differences)
        accuracies = []
        for index, (users, lower, upper) in enumerate(buckets, start=1):
            bucket_queries = [query for user in users for query in by_user.get(user, ())]
            accuracy = accuracy_at_k(predictor.predict(bucket_queries, 1), bucket_queries, 1)
            rows.append(Rq1Row(pair.key, index, lower, upper, len(users), len(bucket_queries), accuracy))
            if accuracy is not None:
                accuracies.append((index, accuracy))
        trends.append(Rq1TrendRow(pair.key, len(accuracies), _spearman(accuracies)))
    return rows, trends


def _spearman(points: Sequence[tuple[int, float]]) -> float | None:
    if len(points) < 2:
        return None
    order, accuracy = zip(*points)
    if len(set(accuracy)) == 1:
        return None
    rho = stats.spearmanr(order, accuracy).statistic
    return None if math.isnan(rho) else float(rho)


def run_rq2(queries: Sequence[EvalQuery], predictors: Mapping[FeaturePair, PairFrequencyPredictor],
            applicability: ApplicabilityResult) -> list[Rq2Row]:
    """Each feature model over all users against applicability-partitioned prediction.

    The first row covers every user; one more row per feature model covers the
    users assigned to it. Models outside the analysis report None.
    """
    assigned = {a.user_id: a.assigned_pair for a in applicability.assignments}
    partitioned = PartitionedPredictor(predictors, assigned)
    cohorts = [('all', None)] + [(pair.key, pair) for pair in CANONICAL_PAIRS if pair in predictors]

    rows = []
    for name, pair in cohorts:
        members = {user for user, target in assigned.items() if pair is None or target == pair}
        cohort_queries = [query for query in queries if pair is None or query.user_id in members]
        scores = {
            candidate: accuracy_at_k(predictors[candidate].predict(cohort_queries, 1), cohort_queries, 1)
            if candidate in predictors else None
            for candidate in CANONICAL_PAIRS
        }
        rows.append(Rq2Row(
            cohort=name,
            users=len(members),
            queries=len(cohort_queries),
            time_root=scores[CANONICAL_PAIRS[0]],
            time_leaf=scores[CANONICAL_PAIRS[1]],
            distance_root=scores[CANONICAL_PAIRS[2]],
            distance_leaf=scores[CANONICAL_PAIRS[3]],
            partitioned=accuracy_at_k(partitioned.predict(cohort_queries, 1), cohort_queries, 1),
        ))
    return rows


def topk_summary(rankings: Mapping[str, Sequence[Sequence[int]]], queries: Sequence[EvalQuery],
                 ks: Sequence[int], n_labels: int | None = None) -> list[TopKRow]:
    """Accuracy@K of every method's ranked lists at every K.

    With `n_labels` given, a K above the label count is scored as K = n_labels;
    the row still reports the requested K.
    """
    return [
        TopKRow(method, k, len(queries), accuracy_at_k(ranked, queries, min(k, n_labels or k)))
        for method, ranked in rankings.items() for k in ks
    ]
