"""Seeded synthetic check-in cohorts with planted regularity.

Every user belongs to a group that is regular in one (context, view) pair.
Root-view groups repeat a small routine of (context value, root) cells;
leaf-view groups repeat a spread routine of (context value, leaf) cells.
Attributes outside the planted pair are redrawn for every check-in, and with
probability `noise` a check-in is replaced by a fully random one. Months carry
equal volumes so raw-count differences reflect regularity only.
"""
import calendar
import hashlib
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from .dimensions import CANONICAL_PAIRS, ContextKind, FeaturePair, ViewKind
from .exceptions import InvalidSpec
from .geo import destination_point
from .ingestion import (
    DISTANCE_BAND_LABELS, NIGHT_HOURS, TIME_BUCKETS, CategoryHierarchy, CheckIn, HomeLocation,
    format_checkin_line, group_by_user,
)

logger = logging.getLogger(__name__)

ROOT_LABELS = (
    'Arts & Entertainment', 'College & University', 'Food', 'Outdoors & Recreation',
    'Professional & Other Places', 'Residence', 'Shop & Service', 'Travel & Transport', 'Event',
)
LEAF_COUNT = 65
HOME_ROOT = 'Residence'

# (low, high) venue distances from home in km, one range per distance band
BAND_DISTANCES_KM = ((0.2, 0.8), (2.0, 8.0), (12.0, 28.0), (35.0, 60.0))
VENUES_PER_BAND = 3
# homes are scattered around this point
CITY_CENTER = (40.7306, -73.9866)
CITY_RADIUS_KM = 15.0

CHECKINS_FILE = 'checkins.tsv'
CATEGORIES_FILE = 'categories.csv'
LABELS_FILE = 'category_labels.csv'
GROUPS_FILE = 'groups.csv'


def _category_id(label: str) -> str:
    return hashlib.sha1(label.encode('utf-8')).hexdigest()[:24]


def synthetic_hierarchy() -> CategoryHierarchy:
    """Nine roots and 65 leaves, leaf i under root i mod 9."""
    leaf_to_root, leaf_names = {}, {}
    per_root = {root: 0 for root in ROOT_LABELS}
    for index in range(LEAF_COUNT):
        root = ROOT_LABELS[index % len(ROOT_LABELS)]
        label = f'{root} {per_root[root]:02d}'
        per_root[root] += 1
        leaf_to_root[_category_id(label)] = root
        leaf_names[_category_id(label)] = label
    return CategoryHierarchy.from_mappings(leaf_to_root, leaf_names, canonical=True)


@dataclass(frozen=True)
class GroupProfile:
    pair: FeaturePair
    noise: float
    size: int


@dataclass(frozen=True)
class SynthSpec:
    groups: tuple[GroupProfile, ...]
    months: int
    seed: int
    checkins_per_month: int = 60
    anchors_per_month: int = 3
    root_routine_cells: int = 4
    # None spreads the leaf routine over one distinct cell per slot
    leaf_routine_cells: int | None = None
    start: tuple[int, int] = (2012, 4)

    @classmethod
    def balanced(cls, users: int, months: int, noise: float, seed: int,
                 pairs=CANONICAL_PAIRS, **options) -> 'SynthSpec':
        """Split `users` as evenly as possible over one group per pair."""
        base, extra = divmod(users, len(pairs))
        groups = tuple(GroupProfile(pair, noise, base + (index < extra)) for index, pair in enumerate(pairs))
        return cls(groups=groups, months=months, seed=seed, **options)

    @property
    def user_count(self) -> int:
        return sum(group.size for group in self.groups)

    @property
    def routine_slots(self) -> int:
        return self.checkins_per_month - self.anchors_per_month

    def validate(self):
        if not self.groups or self.user_count <= 0:
            raise InvalidSpec('a synthetic cohort needs at least one user')
        if self.months < 1:
            raise InvalidSpec('months must be at least 1')
        if self.anchors_per_month < 1 or self.routine_slots < 1:
            raise InvalidSpec('each month needs at least one anchor and one routine check-in')
        if not 1 <= self.start[1] <= 12:
            raise InvalidSpec(f'invalid start month {self.start[1]}')
        for group in self.groups:
            if group.size < 0:
                raise InvalidSpec(f'negative group size for {group.pair}')
            if not 0.0 <= group.noise <= 1.0:
                raise InvalidSpec(f'noise {group.noise} outside [0, 1]')
        if self.root_routine_cells < 1 or self.root_routine_cells > len(DISTANCE_BAND_LABELS):
            raise InvalidSpec(f'root routines need 1 to {len(DISTANCE_BAND_LABELS)} cells')
        if self.leaf_routine_cells is not None and self.leaf_routine_cells < 1:
            raise InvalidSpec('leaf routines need at least one cell')
        return self


@dataclass
class SyntheticDataset:
    spec: SynthSpec
    hierarchy: CategoryHierarchy
    grouped: dict[str, tuple[CheckIn, ...]]
    groups: dict[str, GroupProfile]
    homes: dict[str, HomeLocation]

    @property
    def checkin_count(self) -> int:
        return sum(len(records) for records in self.grouped.values())

    def planted_pairs(self) -> dict[str, FeaturePair]:
        return {user: group.pair for user, group in self.groups.items()}


@dataclass(frozen=True)
class _Slot:
    hour: int | None
    band: int | None
    root: int | None
    leaf: int | None


class _UserGenerator:
    """Draws one user's venues, routine and check-ins from a shared generator."""

    def __init__(self, user_id: str, group: GroupProfile, spec: SynthSpec, catalog, rng: np.random.Generator):
        self.user_id = user_id
        self.group = group
        self.spec = spec
        self.rng = rng
        self.leaf_labels, self.leaf_ids, self.leaves_by_root, self.home_leaf = catalog

        bearing, radius = rng.uniform(0, 360), CITY_RADIUS_KM * np.sqrt(rng.uniform())
        self.home = destination_point(CITY_CENTER, float(bearing), float(radius))
        self.venues = [
            [destination_point(self.home, float(rng.uniform(0, 360)), float(rng.uniform(low, high)))
             for _ in range(VENUES_PER_BAND)]
            for low, high in BAND_DISTANCES_KM
        ]
        self.anchor_hour = int(rng.choice(list(NIGHT_HOURS)))
        self.routine = self._routine()

    def _routine(self) -> list[_Slot]:
        rng = self.rng
        pair = self.group.pair
        slots = self.spec.routine_slots
        n_roots = len(ROOT_LABELS)
        hours = [hour for hour in range(TIME_BUCKETS) if hour != self.anchor_hour]
        bands = list(range(len(DISTANCE_BAND_LABELS)))
        contexts = hours if pair.context == ContextKind.TIME else bands

        if pair.view == ViewKind.ROOT:
            size = self.spec.root_routine_cells
            values = rng.choice(contexts, size=min(size, len(contexts)), replace=False)
            cells = [(int(value), int(rng.integers(n_roots))) for value in values]
        else:
            size = self.spec.leaf_routine_cells or slots
            if pair.context == ContextKind.TIME:
                # distinct (hour, root) cells so the leaf routine stays spread when aggregated
                grid = [(hour, root) for hour in hours for root in range(n_roots)]
                picks = rng.choice(len(grid), size=min(size, len(grid)), replace=False)
                cells = [(grid[p][0], int(rng.choice(self.leaves_by_root[grid[p][1]]))) for p in picks]
            else:
                grid = [(band, leaf) for band in bands for leaf in range(LEAF_COUNT)]
                picks = rng.choice(len(grid), size=min(size, len(grid)), replace=False)
                cells = [grid[p] for p in picks]

        routine = []
        for index in range(slots):
            value, label = cells[index % len(cells)]
            time_slot = pair.context == ContextKind.TIME
            root_slot = pair.view == ViewKind.ROOT
            routine.append(_Slot(
                hour=value if time_slot else None,
                band=None if time_slot else value,
                root=label if root_slot else None,
                leaf=None if root_slot else label,
            ))
        return routine

    def _leaf_for(self, slot: _Slot) -> int:
        if slot.leaf is not None:
            return slot.leaf
        if slot.root is not None:
            return int(self.rng.choice(self.leaves_by_root[slot.root]))
        return int(self.rng.integers(LEAF_COUNT))

    def _checkin(self, when: datetime, band: int | None, venue: int, leaf: int) -> CheckIn:
        if band is None:
            coordinates, place = self.home, 'home'
        else:
            coordinates, place = self.venues[band][venue], f'{band}.{venue}'
        label = self.leaf_labels[leaf]
        poi = hashlib.sha1(f'{self.user_id}|{place}|{label}'.encode('utf-8')).hexdigest()[:24]
        return CheckIn(
            user_id=self.user_id,
            poi_id=poi,
            category_id=self.leaf_ids[leaf],
            category_name=label,
            latitude=coordinates[0],
            longitude=coordinates[1],
            timestamp=when,
            root_category=label.rsplit(' ', 1)[0],
        )

    def _when(self, year: int, month: int, hour: int) -> datetime:
        days = calendar.monthrange(year, month)[1]
        day = int(self.rng.integers(1, days + 1))
        minute, second = (int(value) for value in self.rng.integers(0, 60, size=2))
        return datetime(year, month, day, hour, minute, second)

    def month(self, year: int, month: int) -> list[CheckIn]:
        rng = self.rng
        records = [
            self._checkin(self._when(year, month, self.anchor_hour), None, 0, self.home_leaf)
            for _ in range(self.spec.anchors_per_month)
        ]
        noisy = rng.random(len(self.routine)) < self.group.noise
        for slot, replaced in zip(self.routine, noisy):
            if replaced:
                slot = _Slot(None, None, None, None)
            hour = slot.hour if slot.hour is not None else int(rng.integers(TIME_BUCKETS))
            band = slot.band if slot.band is not None else int(rng.integers(len(DISTANCE_BAND_LABELS)))
            venue = int(rng.integers(VENUES_PER_BAND))
            records.append(self._checkin(self._when(year, month, hour), band, venue, self._leaf_for(slot)))
        return records


def _catalog(hierarchy: CategoryHierarchy):
    by_label = {name: leaf for leaf, name in hierarchy.leaf_names.items()}
    leaf_labels = list(hierarchy.leaf_labels)
    leaf_ids = [by_label[label] for label in leaf_labels]
    roots = [ROOT_LABELS.index(hierarchy.leaf_to_root[leaf]) for leaf in leaf_ids]
    leaves_by_root = [[leaf for leaf, root in enumerate(roots) if root == index] for index in range(len(ROOT_LABELS))]
    home_leaf = leaves_by_root[ROOT_LABELS.index(HOME_ROOT)][0]
    return leaf_labels, leaf_ids, leaves_by_root, home_leaf


def _months(start: tuple[int, int], count: int):
    year, month = start
    for _ in range(count):
        yield year, month
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)


def generate_synthetic(spec: SynthSpec) -> SyntheticDataset:
    """Deterministic cohort for a given spec and seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    hierarchy = synthetic_hierarchy()
    catalog = _catalog(hierarchy)

    memberships = [group for group in spec.groups for _ in range(group.size)]
    user_ids = [str(index) for index in rng.permutation(len(memberships)) + 1]

    records, groups, homes = [], {}, {}
    for user_id, group in zip(user_ids, memberships):
        generator = _UserGenerator(user_id, group, spec, catalog, rng)
        groups[user_id] = group
        homes[user_id] = HomeLocation(user_id, generator.home[0], generator.home[1], 0)
        for year, month in _months(spec.start, spec.months):
            records.extend(generator.month(year, month))

    grouped = group_by_user(records)
    logger.info('generated %d check-ins for %d users over %d months', len(records), len(grouped), spec.months)
    return SyntheticDataset(spec, hierarchy, grouped, dict(sorted(groups.items(), key=lambda i: int(i[0]))), homes)


def write_synthetic(dataset: SyntheticDataset, directory) -> dict[str, Path]:
    """Write the check-in file, the two hierarchy files and the ground-truth groups."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / name for name in (CHECKINS_FILE, CATEGORIES_FILE, LABELS_FILE, GROUPS_FILE)}

    with open(paths[CHECKINS_FILE], 'w', encoding='utf-8', newline='\n') as handle:
        for checkins in dataset.grouped.values():
            for checkin in checkins:
                handle.write(format_checkin_line(checkin) + '\n')

    hierarchy = dataset.hierarchy
    leaves = sorted(hierarchy.leaf_to_root, key=lambda leaf: hierarchy.leaf_names[leaf])
    pd.DataFrame({'leaf_id': leaves, 'root_label': [hierarchy.leaf_to_root[leaf] for leaf in leaves]}) \
        .to_csv(paths[CATEGORIES_FILE], index=False, lineterminator='\n')
    pd.DataFrame({'leaf_id': leaves, 'leaf_label': [hierarchy.leaf_names[leaf] for leaf in leaves]}) \
        .to_csv(paths[LABELS_FILE], index=False, lineterminator='\n')
    pd.DataFrame(
        [(user, group.pair.key, group.noise) for user, group in dataset.groups.items()],
        columns=['user_id', 'pair', 'noise'],
    ).to_csv(paths[GROUPS_FILE], index=False, lineterminator='\n')
    return paths


def read_groups(path) -> dict[str, FeaturePair]:
    frame = pd.read_csv(path, dtype={'user_id': str, 'pair': str})
    return {row.user_id: FeaturePair.from_key(row.pair) for row in frame.itertuples(index=False)}
