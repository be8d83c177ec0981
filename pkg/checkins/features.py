"""Per-user context x view count matrices and the user feature set."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dimensions import CANONICAL_PAIRS, ContextKind, FeaturePair, ViewKind
from .ingestion import CONTEXTS, CategoryHierarchy, CheckIn, ContextSpec, HomeLocation, ViewSpec, user_sort_key

logger = logging.getLogger(__name__)

MATRIX_HEADER = 'user_id,context,view,rows,cols'


@dataclass(frozen=True)
class FeatureMatrix:
    user_id: str
    context: ContextKind
    view: ViewKind
    counts: np.ndarray

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def pair(self) -> FeaturePair:
        return FeaturePair(self.context, self.view)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.user_id, self.pair) == (other.user_id, other.pair) and np.array_equal(self.counts, other.counts)

    __hash__ = None


@dataclass(frozen=True)
class UserFeatureSet:
    user_id: str
    matrices: dict[FeaturePair, FeatureMatrix]

    def __getitem__(self, pair: FeaturePair) -> FeatureMatrix:
        return self.matrices[pair]

    @property
    def pairs(self) -> tuple[FeaturePair, ...]:
        return tuple(self.matrices)


@dataclass(frozen=True)
class FeatureSpace:
    """The contexts and views in scope, keyed so pairs resolve to specs."""
    contexts: Mapping[ContextKind, ContextSpec]
    views: Mapping[ViewKind, ViewSpec]
    pairs: tuple[FeaturePair, ...]

    @classmethod
    def from_hierarchy(cls, hierarchy: CategoryHierarchy,
                       pairs: Sequence[FeaturePair] = CANONICAL_PAIRS) -> 'FeatureSpace':
        pairs = tuple(pairs)
        return cls(
            contexts={kind: CONTEXTS[kind] for kind in dict.fromkeys(pair.context for pair in pairs)},
            views={kind: hierarchy.view_spec(kind) for kind in dict.fromkeys(pair.view for pair in pairs)},
            pairs=pairs,
        )

    def specs(self, pair: FeaturePair) -> tuple[ContextSpec, ViewSpec]:
        return self.contexts[pair.context], self.views[pair.view]

    def shape(self, pair: FeaturePair) -> tuple[int, int]:
        context, view = self.specs(pair)
        return context.cardinality, view.cardinality

    def spec_pairs(self) -> list[tuple[ContextSpec, ViewSpec]]:
        return [self.specs(pair) for pair in self.pairs]

    def needs_home(self) -> bool:
        return ContextKind.DISTANCE in self.contexts


def build_ucvf(user_id: str, checkins: Iterable[CheckIn], context: ContextSpec, view: ViewSpec,
               home: HomeLocation | None = None) -> FeatureMatrix:
    """Count the user's check-ins per (context bucket, view label) cell.

    Records whose category has no view label are left out.
    """
    rows, cols = [], []
    for checkin in checkins:
        label = view.label_index(checkin)
        if label is None:
            continue
        rows.append(context.bucket(checkin, home))
        cols.append(label)

    size = context.cardinality * view.cardinality
    if rows:
        flat = np.bincount(np.asarray(rows) * view.cardinality + np.asarray(cols), minlength=size)
    else:
        flat = np.zeros(size, dtype=np.int64)
    counts = flat.astype(np.int64).reshape(context.cardinality, view.cardinality)
    return FeatureMatrix(user_id, context.kind, view.kind, counts)


def build_ufs_for_user(user_id: str, checkins: Sequence[CheckIn],
                       specs: Sequence[tuple[ContextSpec, ViewSpec]],
                       home: HomeLocation | None = None) -> UserFeatureSet:
    matrices = {}
    for context, view in specs:
        matrix = build_ucvf(user_id, checkins, context, view, home)
        matrices[matrix.pair] = matrix
    return UserFeatureSet(user_id, matrices)


def build_feature_sets(grouped: Mapping[str, Sequence[CheckIn]], homes: Mapping[str, HomeLocation],
                       space: FeatureSpace) -> dict[str, UserFeatureSet]:
    specs = space.spec_pairs()
    feature_sets = {
        user: build_ufs_for_user(user, checkins, specs, homes.get(user))
        for user, checkins in grouped.items()
    }
    logger.info('built %d feature sets over %d pairs', len(feature_sets), len(specs))
    return feature_sets


def normalize_matrix(matrix: FeatureMatrix | np.ndarray) -> np.ndarray:
    counts = matrix.counts if isinstance(matrix, FeatureMatrix) else np.asarray(matrix)
    total = counts.sum()
    if total <= 0:
        return np.zeros(counts.shape, dtype=np.float64)
    return counts.astype(np.float64) / total


def write_matrices(path, matrices: Iterable[FeatureMatrix]):
    """One line per user: user_id,context,view,rows,cols then row-major counts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(matrices, key=lambda m: user_sort_key(m.user_id))
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(MATRIX_HEADER + '\n')
        for matrix in ordered:
            rows, cols = matrix.shape
            values = ','.join(str(int(value)) for value in matrix.counts.ravel())
            handle.write(f'{matrix.user_id},{matrix.context.value},{matrix.view.value},{rows},{cols},{values}\n')


def read_matrices(path) -> dict[str, FeatureMatrix]:
    matrices = {}
    with open(path, encoding='utf-8') as handle:
        header = handle.readline().strip()
        if header != MATRIX_HEADER:
            raise ValueError(f'{path}: unexpected header {header!r}')
        for line in handle:
            if not line.strip():
                continue
            user_id, context, view, rows, cols, *values = line.rstrip('\n').split(',')
            counts = np.array(values, dtype=np.int64).reshape(int(rows), int(cols))
            matrices[user_id] = FeatureMatrix(user_id, ContextKind(context), ViewKind(view), counts)
    return matrices
