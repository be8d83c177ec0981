"""Entropy, information gain and gain ratio of view labels partitioned by a
context dimension, and the influence screening over all (context, view) pairs.

Logarithms are base 2. The gain ratio divides by the unpartitioned entropy
Entropy(S), not by C4.5 split information.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .dimensions import ContextKind, FeaturePair, ViewKind
from .exceptions import EmptyDataset, EmptySample, ZeroEntropy
from .ingestion import CheckIn, ContextSpec, HomeLocation, ViewSpec

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.1


@dataclass(frozen=True, slots=True)
class LabeledSample:
    view_label_index: int
    context_value_index: int


@dataclass(frozen=True)
class InfluenceResult:
    context: ContextKind
    view: ViewKind
    entropy: float
    gain: float
    gain_ratio: float
    selected: bool

    @property
    def pair(self) -> FeaturePair:
        return FeaturePair(self.context, self.view)


def _entropy_of_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def entropy(labels: Iterable[Hashable]) -> float:
    counts = np.fromiter(Counter(labels).values(), dtype=np.int64)
    if counts.size == 0:
        raise EmptySample('entropy of an empty sample')
    return _entropy_of_counts(counts)


def _contingency(samples: Sequence[LabeledSample], context: ContextSpec) -> np.ndarray:
    """Counts with context values on rows and view labels on columns."""
    if not samples:
        raise EmptySample('no samples to partition')
    rows = np.fromiter((s.context_value_index for s in samples), dtype=np.int64, count=len(samples))
    cols = np.fromiter((s.view_label_index for s in samples), dtype=np.int64, count=len(samples))
    if rows.min() < 0 or rows.max() >= context.cardinality:
        raise ValueError(f'context index outside [0, {context.cardinality})')
    if cols.min() < 0:
        raise ValueError('negative view label index')
    width = int(cols.max()) + 1
    flat = np.bincount(rows * width + cols, minlength=context.cardinality * width)
    return flat.reshape(context.cardinality, width)


def _gain_from_table(table: np.ndarray) -> tuple[float, float]:
    total = table.sum()
    base = _entropy_of_counts(table.sum(axis=0))
    remainder = 0.0
    for row in table:
        size = row.sum()
        if size:
            remainder += (size / total) * _entropy_of_counts(row)
    # clamp rounding noise so that 0 <= gain <= entropy holds
    return base, float(min(max(base - remainder, 0.0), base))


def information_gain(samples: Sequence[LabeledSample], context: ContextSpec) -> float:
    _, gain = _gain_from_table(_contingency(samples, context))
    return gain


def gain_ratio(samples: Sequence[LabeledSample], context: ContextSpec) -> float:
    base, gain = _gain_from_table(_contingency(samples, context))
    if base <= 0.0:
        raise ZeroEntropy('view labels carry no entropy')
    return gain / base


def _contingency_for(context: ContextSpec, view: ViewSpec, dataset, homes) -> np.ndarray:
    table = np.zeros((context.cardinality, view.cardinality), dtype=np.int64)
    for user, checkins in dataset.items():
        home = homes.get(user)
        for checkin in checkins:
            label = view.label_index(checkin)
            if label is None:
                continue
            table[context.bucket(checkin, home), label] += 1
    return table


def influence_analysis(dataset: Mapping[str, Sequence[CheckIn]], homes: Mapping[str, HomeLocation],
                       contexts: Sequence[ContextSpec], views: Sequence[ViewSpec],
                       delta: float = DEFAULT_DELTA) -> list[InfluenceResult]:
    """Score every (context, view) pair over the pooled check-ins of all users.

    Results are ordered context-major, view-minor. Pairs whose view labels have
    zero entropy are reported with gain_ratio 0 and never selected.
    """
    if delta < 0:
        raise ValueError('delta must be non-negative')
    if not any(dataset.values()):
        raise EmptyDataset('influence analysis needs at least one check-in')

    tables = {
        (context.kind, view.kind): _contingency_for(context, view, dataset, homes)
        for context in contexts for view in views
    }
    # Entropy(V^j) is the same for every context; compute it once per view
    view_entropy = {
        view.kind: _entropy_of_counts(tables[(contexts[0].kind, view.kind)].sum(axis=0))
        for view in views
    }

    results = []
    for context in contexts:
        for view in views:
            table = tables[(context.kind, view.kind)]
            base = view_entropy[view.kind]
            if base <= 0.0:
                results.append(InfluenceResult(context.kind, view.kind, 0.0, 0.0, 0.0, False))
                continue
            _, gain = _gain_from_table(table)
            ratio = gain / base
            results.append(InfluenceResult(context.kind, view.kind, base, gain, ratio, ratio > delta))
            logger.info('influence %s -> %s: entropy=%.6f gain=%.6f ratio=%.6f%s',
                        context.kind.value, view.kind.value, base, gain, ratio,
                        ' (selected)' if ratio > delta else '')
    return results


def selected_pairs(results: Iterable[InfluenceResult]) -> list[FeaturePair]:
    return [result.pair for result in results if result.selected]
