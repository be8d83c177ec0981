"""Difference-value ranking that assigns every user to the feature model whose
matrices vary least from one time unit (month or ISO week) to the next."""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dimensions import CANONICAL_PAIRS, FeaturePair, canonical_position
from .exceptions import MissingRecord, NoData
from .features import FeatureMatrix, FeatureSpace, build_ucvf, normalize_matrix
from .ingestion import CheckIn, HomeLocation, user_sort_key

logger = logging.getLogger(__name__)

MONTH = 'month'
WEEK = 'week'
TIME_UNITS = (MONTH, WEEK)


def _period_key(checkin: CheckIn, unit: str) -> tuple[int, int]:
    if unit == MONTH:
        return checkin.timestamp.year, checkin.timestamp.month
    iso = checkin.timestamp.isocalendar()
    return iso.year, iso.week


def split_by_month(checkins: Sequence[CheckIn], unit: str = MONTH) -> dict[tuple[int, int], list[CheckIn]]:
    """Group records by calendar (year, month), or by ISO (year, week)."""
    if unit not in TIME_UNITS:
        raise ValueError(f'unknown time unit {unit!r}')
    if not checkins:
        raise NoData('no records to split into periods')
    groups = defaultdict(list)
    for checkin in checkins:
        groups[_period_key(checkin, unit)].append(checkin)
    return dict(sorted(groups.items()))


@dataclass(frozen=True)
class MonthlyMatrices:
    user_id: str
    pair: FeaturePair
    matrices: dict[tuple[int, int], FeatureMatrix]


@dataclass(frozen=True)
class DifferenceRecord:
    user_id: str
    pair: FeaturePair
    sum_diff: float
    rank: int = 0


@dataclass(frozen=True)
class ApplicabilityAssignment:
    user_id: str
    assigned_pair: FeaturePair
    records: dict[FeaturePair, DifferenceRecord]
    single_period: bool = False


@dataclass
class ApplicabilityResult:
    assignments: list[ApplicabilityAssignment]
    pairs: tuple[FeaturePair, ...]

    def counts(self) -> dict[FeaturePair, int]:
        tally = Counter(a.assigned_pair for a in self.assignments)
        return {pair: tally.get(pair, 0) for pair in self.pairs}

    @property
    def single_period_users(self) -> int:
        return sum(1 for a in self.assignments if a.single_period)

    def by_user(self) -> dict[str, ApplicabilityAssignment]:
        return {a.user_id: a for a in self.assignments}


def build_monthly(user_id: str, periods: Mapping[tuple[int, int], Sequence[CheckIn]], space: FeatureSpace,
                  pair: FeaturePair, home: HomeLocation | None = None) -> MonthlyMatrices:
    context, view = space.specs(pair)
    return MonthlyMatrices(
        user_id, pair,
        {period: build_ucvf(user_id, records, context, view, home) for period, records in periods.items()},
    )


def difference_value(monthly: MonthlyMatrices, normalize: bool = False) -> float:
    """Sum over periods of the elementwise L1 distance to the mean period matrix."""
    if len(monthly.matrices) <= 1:
        return 0.0
    if normalize:
        stack = np.stack([normalize_matrix(m) for m in monthly.matrices.values()])
    else:
        stack = np.stack([m.counts for m in monthly.matrices.values()]).astype(np.float64)
    mean = stack.mean(axis=0)
    return float(np.abs(stack - mean).sum())


def rank_users(pair: FeaturePair, sums: Mapping[str, float]) -> list[DifferenceRecord]:
    """Ascending by difference, ties by user id; rank is the 1-based position."""
    ordered = sorted(sums.items(), key=lambda item: (item[1], user_sort_key(item[0])))
    return [DifferenceRecord(user, pair, value, rank) for rank, (user, value) in enumerate(ordered, start=1)]


def assign_users(records: Iterable[DifferenceRecord],
                 pairs: Sequence[FeaturePair] = CANONICAL_PAIRS,
                 single_period: Iterable[str] = ()) -> list[ApplicabilityAssignment]:
    """Assign each user to the pair holding their smallest rank.

    Ties across pairs go to the earliest pair in canonical order, so every
    user lands in exactly one pair.
    """
    per_user = defaultdict(dict)
    for record in records:
        per_user[record.user_id][record.pair] = record
    single_period = set(single_period)

    order = sorted(pairs, key=canonical_position)
    assignments = []
    for user in sorted(per_user, key=user_sort_key):
        user_records = per_user[user]
        missing = [pair.key for pair in order if pair not in user_records]
        if missing:
            raise MissingRecord(f'user {user} has no difference record for {", ".join(missing)}')
        best = min(order, key=lambda pair: (user_records[pair].rank, canonical_position(pair)))
        assignments.append(ApplicabilityAssignment(
            user, best, {pair: user_records[pair] for pair in order}, user in single_period,
        ))
    return assignments


def analyze_applicability(grouped: Mapping[str, Sequence[CheckIn]], homes: Mapping[str, HomeLocation],
                          space: FeatureSpace, unit: str = MONTH,
                          normalize: bool = False) -> ApplicabilityResult:
    sums = {pair: {} for pair in space.pairs}
    single_period = []
    for user, checkins in grouped.items():
        if not checkins:
            continue
        periods = split_by_month(checkins, unit)
        if len(periods) == 1:
            single_period.append(user)
        for pair in space.pairs:
            monthly = build_monthly(user, periods, space, pair, homes.get(user))
            sums[pair][user] = difference_value(monthly, normalize)

    records = [record for pair in space.pairs for record in rank_users(pair, sums[pair])]
    assignments = assign_users(records, space.pairs, single_period)
    result = ApplicabilityResult(assignments, tuple(sorted(space.pairs, key=canonical_position)))

    if single_period:
        logger.warning('%d users have a single %s of data; their assignment is uninformative',
                       len(single_period), unit)
    logger.info('applicability: %s', ', '.join(f'{pair.key}={count}' for pair, count in result.counts().items()))
    return result
