"""Parsing of LBSN check-in files, category hierarchy, home estimation and
the discrete context/view index spaces built on top of them."""
import logging
import math
import re
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import pandas as pd

from .dimensions import ContextKind, ViewKind
from .exceptions import (
    DatasetIOError, InvalidCoordinate, InvalidDate, LineError, MalformedLine, MissingHome, NoData, UnknownCategory,
)
from .geo import grid_cell, haversine_km

logger = logging.getLogger(__name__)

WEEKDAYS = ('Mon', 'Tue', 'Wed', 'Thu', 'Fri', 'Sat', 'Sun')
MONTHS = ('Jan', 'Feb', 'Mar', 'Apr', 'May', 'Jun', 'Jul', 'Aug', 'Sep', 'Oct', 'Nov', 'Dec')

# column order of the tab-separated check-in files
CHECKIN_SCHEMA = (
    'user_id', 'poi_id', 'category_id', 'category_name', 'latitude', 'longitude',
    'weekday', 'year', 'month', 'day', 'time',
)

TIME_BUCKETS = 24
NIGHT_HOURS = range(0, 6)
DISTANCE_BAND_EDGES_KM = (1.0, 10.0, 30.0)
DISTANCE_BAND_LABELS = ('<1km', '1-10km', '10-30km', '>=30km')

CANONICAL_ROOTS = 9
CANONICAL_LEAVES = 65

MAX_REPORTED_ERRORS = 20

_TIME_RE = re.compile(r'^(\d{1,2}):(\d{2}):(\d{2})$')


def user_sort_key(user_id: str):
    """Numeric ids sort numerically and before any non-numeric id."""
    if user_id.isdigit():
        return (0, int(user_id), user_id)
    return (1, 0, user_id)


@dataclass(frozen=True, slots=True)
class CheckIn:
    user_id: str
    poi_id: str
    category_id: str
    category_name: str
    latitude: float
    longitude: float
    timestamp: datetime
    root_category: str | None = None
    line_number: int = 0

    @property
    def weekday(self) -> str:
        return WEEKDAYS[self.timestamp.weekday()]

    @property
    def coordinates(self) -> tuple[float, float]:
        return self.latitude, self.longitude


@dataclass(frozen=True)
class HomeLocation:
    user_id: str
    latitude: float
    longitude: float
    support_count: int

    @property
    def coordinates(self) -> tuple[float, float]:
        return self.latitude, self.longitude


@dataclass(frozen=True)
class ContextSpec:
    kind: ContextKind
    labels: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.labels)

    def bucket(self, checkin: CheckIn, home: HomeLocation | None = None) -> int:
        if self.kind == ContextKind.TIME:
            return bucketize_time(checkin)
        if home is None:
            raise MissingHome(f'user {checkin.user_id} has no home location for the distance context')
        return bucketize_distance(home, checkin)


TIME_CONTEXT = ContextSpec(ContextKind.TIME, tuple(f'{hour:02d}h' for hour in range(TIME_BUCKETS)))
DISTANCE_CONTEXT = ContextSpec(ContextKind.DISTANCE, DISTANCE_BAND_LABELS)
CONTEXTS = {ContextKind.TIME: TIME_CONTEXT, ContextKind.DISTANCE: DISTANCE_CONTEXT}


@dataclass(frozen=True)
class ViewSpec:
    kind: ViewKind
    labels: tuple[str, ...]
    # category id -> index into labels
    category_index: Mapping[str, int] = field(repr=False)

    @property
    def cardinality(self) -> int:
        return len(self.labels)

    def label_index(self, checkin: CheckIn) -> int | None:
        return self.category_index.get(checkin.category_id)


@dataclass(frozen=True)
class CategoryHierarchy:
    leaf_to_root: Mapping[str, str]
    leaf_names: Mapping[str, str]
    root_labels: tuple[str, ...]
    leaf_labels: tuple[str, ...]

    @classmethod
    def from_mappings(cls, leaf_to_root: Mapping[str, str], leaf_names: Mapping[str, str],
                      canonical: bool = False) -> 'CategoryHierarchy':
        missing = sorted(set(leaf_to_root) - set(leaf_names))
        if missing:
            raise ValueError(f'leaf ids without a label: {", ".join(missing[:5])}')
        names = [leaf_names[leaf] for leaf in leaf_to_root]
        duplicates = sorted(name for name, count in Counter(names).items() if count > 1)
        if duplicates:
            raise ValueError(f'duplicate leaf labels: {", ".join(duplicates[:5])}')

        hierarchy = cls(
            leaf_to_root=dict(leaf_to_root),
            leaf_names={leaf: leaf_names[leaf] for leaf in leaf_to_root},
            root_labels=tuple(sorted(set(leaf_to_root.values()))),
            leaf_labels=tuple(sorted(names)),
        )
        if canonical:
            hierarchy.check_canonical()
        return hierarchy

    def check_canonical(self):
        if len(self.root_labels) != CANONICAL_ROOTS or len(self.leaf_labels) != CANONICAL_LEAVES:
            raise ValueError(
                f'expected {CANONICAL_ROOTS} root and {CANONICAL_LEAVES} leaf categories, '
                f'got {len(self.root_labels)} and {len(self.leaf_labels)}'
            )

    def root_of(self, category_id: str) -> str | None:
        return self.leaf_to_root.get(category_id)

    def view_spec(self, kind: ViewKind) -> ViewSpec:
        if kind == ViewKind.ROOT:
            position = {label: index for index, label in enumerate(self.root_labels)}
            index = {leaf: position[root] for leaf, root in self.leaf_to_root.items()}
            return ViewSpec(kind, self.root_labels, index)
        position = {label: index for index, label in enumerate(self.leaf_labels)}
        index = {leaf: position[name] for leaf, name in self.leaf_names.items()}
        return ViewSpec(kind, self.leaf_labels, index)

    def leaf_to_root_indices(self) -> list[int]:
        """Root index for every leaf index, in leaf label order."""
        root_position = {label: index for index, label in enumerate(self.root_labels)}
        by_name = {name: leaf for leaf, name in self.leaf_names.items()}
        return [root_position[self.leaf_to_root[by_name[name]]] for name in self.leaf_labels]


def _read_two_columns(path: Path, header: tuple[str, str]) -> dict[str, str]:
    try:
        frame = pd.read_csv(path, header=None, names=list(header), dtype=str,
                            keep_default_na=False, encoding='utf-8', skipinitialspace=True)
    except OSError as exc:
        raise DatasetIOError(f'cannot read {path}: {exc}') from exc
    frame = frame.apply(lambda column: column.str.strip())
    if len(frame) and tuple(frame.iloc[0]) == header:
        frame = frame.iloc[1:]
    return dict(zip(frame[header[0]], frame[header[1]]))


def load_hierarchy(categories_path, labels_path, canonical: bool = True) -> CategoryHierarchy:
    """Read `leaf_id,root_label` and `leaf_id,leaf_label` files."""
    leaf_to_root = _read_two_columns(Path(categories_path), ('leaf_id', 'root_label'))
    leaf_names = _read_two_columns(Path(labels_path), ('leaf_id', 'leaf_label'))
    try:
        return CategoryHierarchy.from_mappings(leaf_to_root, leaf_names, canonical=canonical)
    except ValueError as exc:
        raise DatasetIOError(f'invalid category hierarchy: {exc}') from exc


def _parse_coordinate(raw: str, field_name: str, limit: float, line_number: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise InvalidCoordinate(line_number, field_name, f'not a number: {raw!r}') from None
    if not math.isfinite(value) or not -limit <= value <= limit:
        raise InvalidCoordinate(line_number, field_name, f'{value} outside [-{limit}, {limit}]')
    return value


def _parse_month(raw: str, line_number: int) -> int:
    if raw.isdigit():
        month = int(raw)
        if 1 <= month <= 12:
            return month
    elif raw[:3].title() in MONTHS:
        return MONTHS.index(raw[:3].title()) + 1
    raise InvalidDate(line_number, 'month', f'unknown month {raw!r}')


def _parse_timestamp(values: Mapping[str, str], line_number: int) -> datetime:
    if not values['year'].isdigit():
        raise InvalidDate(line_number, 'year', f'not a year: {values["year"]!r}')
    if not values['day'].isdigit():
        raise InvalidDate(line_number, 'day', f'not a day: {values["day"]!r}')
    match = _TIME_RE.match(values['time'])
    if match is None:
        raise InvalidDate(line_number, 'time', f'expected HH:MM:SS, got {values["time"]!r}')

    month = _parse_month(values['month'], line_number)
    hour, minute, second = (int(part) for part in match.groups())
    try:
        timestamp = datetime(int(values['year']), month, int(values['day']), hour, minute, second)
    except ValueError as exc:
        raise InvalidDate(line_number, 'date', str(exc)) from None

    weekday = values['weekday'][:3].title()
    if weekday != WEEKDAYS[timestamp.weekday()]:
        raise InvalidDate(
            line_number, 'weekday',
            f'{values["weekday"]!r} does not match {timestamp:%Y-%m-%d} ({WEEKDAYS[timestamp.weekday()]})',
        )
    return timestamp


def parse_checkin_line(line: str, schema: Sequence[str] = CHECKIN_SCHEMA, line_number: int = 1) -> CheckIn:
    """Parse one tab-separated check-in line."""
    parts = line.rstrip('\r\n').split('\t')
    if len(parts) != len(schema):
        raise MalformedLine(line_number, None, f'expected {len(schema)} fields, got {len(parts)}')
    values = dict(zip(schema, (part.strip() for part in parts)))

    for name in ('user_id', 'poi_id', 'category_id'):
        if not values[name]:
            raise MalformedLine(line_number, name, 'empty value')

    return CheckIn(
        user_id=values['user_id'],
        poi_id=values['poi_id'],
        category_id=values['category_id'],
        category_name=values['category_name'],
        latitude=_parse_coordinate(values['latitude'], 'latitude', 90.0, line_number),
        longitude=_parse_coordinate(values['longitude'], 'longitude', 180.0, line_number),
        timestamp=_parse_timestamp(values, line_number),
        line_number=line_number,
    )


def format_checkin_line(checkin: CheckIn, schema: Sequence[str] = CHECKIN_SCHEMA) -> str:
    """Inverse of parse_checkin_line for the semantic fields."""
    ts = checkin.timestamp
    values = {
        'user_id': checkin.user_id,
        'poi_id': checkin.poi_id,
        'category_id': checkin.category_id,
        'category_name': checkin.category_name,
        'latitude': repr(checkin.latitude),
        'longitude': repr(checkin.longitude),
        'weekday': checkin.weekday,
        'year': str(ts.year),
        'month': MONTHS[ts.month - 1],
        'day': f'{ts.day:02d}',
        'time': f'{ts.hour:02d}:{ts.minute:02d}:{ts.second:02d}',
    }
    return '\t'.join(values[name] for name in schema)


def _is_header(line: str, schema: Sequence[str]) -> bool:
    parts = [part.strip() for part in line.split('\t')]
    if 'year' not in schema or len(parts) != len(schema):
        return False
    return not parts[list(schema).index('year')].isdigit()


@dataclass
class IngestSummary:
    users: int = 0
    pois: int = 0
    checkins: int = 0
    skipped_lines: int = 0
    unknown_categories: dict[str, int] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def unknown_records(self) -> int:
        return sum(self.unknown_categories.values())


@dataclass
class LoadedDataset:
    grouped: dict[str, tuple[CheckIn, ...]]
    summary: IngestSummary


def chronological(checkins):
    return sorted(checkins, key=lambda c: (c.timestamp, c.line_number))


def group_by_user(checkins) -> dict[str, tuple[CheckIn, ...]]:
    """Group records by user; users in id order, records in time order."""
    buckets = defaultdict(list)
    for checkin in checkins:
        buckets[checkin.user_id].append(checkin)
    return {user: tuple(chronological(buckets[user])) for user in sorted(buckets, key=user_sort_key)}


def load_dataset(path, hierarchy: CategoryHierarchy, schema: Sequence[str] = CHECKIN_SCHEMA) -> LoadedDataset:
    """Read a check-in file, attach root categories and group records by user.

    Malformed lines and records with unknown category ids are skipped and
    counted in the summary instead of aborting the load.
    """
    summary = IngestSummary()
    unknown = Counter()
    records = []

    try:
        with open(path, encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                if line_number == 1 and _is_header(line, schema):
                    continue
                try:
                    checkin = parse_checkin_line(line, schema, line_number)
                except LineError as exc:
                    summary.skipped_lines += 1
                    if len(summary.errors) < MAX_REPORTED_ERRORS:
                        summary.errors.append(str(exc))
                    continue
                root = hierarchy.root_of(checkin.category_id)
                if root is None:
                    unknown[checkin.category_id] += 1
                    if len(summary.errors) < MAX_REPORTED_ERRORS:
                        summary.errors.append(str(UnknownCategory(checkin.category_id, line_number)))
                    continue
                records.append(replace(checkin, root_category=root))
    except OSError as exc:
        raise DatasetIOError(f'cannot read {path}: {exc}') from exc

    grouped = group_by_user(records)
    summary.users = len(grouped)
    summary.pois = len({checkin.poi_id for checkin in records})
    summary.checkins = len(records)
    summary.unknown_categories = dict(sorted(unknown.items()))

    if summary.skipped_lines or unknown:
        logger.warning('%s: skipped %d malformed lines and %d records with %d unknown categories',
                       path, summary.skipped_lines, sum(unknown.values()), len(unknown))
    logger.info('%s: %d users, %d POIs, %d check-ins', path, summary.users, summary.pois, summary.checkins)
    return LoadedDataset(grouped, summary)


def estimate_home(checkins: Sequence[CheckIn]) -> HomeLocation:
    """Centroid of the most populated 0.001 degree cell of night-time check-ins.

    Falls back to all check-ins when none fall in the night window; ties go
    to the smallest cell key.
    """
    if not checkins:
        raise NoData('cannot estimate a home without check-ins')

    night = [c for c in checkins if c.timestamp.hour in NIGHT_HOURS]
    candidates = night or list(checkins)

    cells = defaultdict(list)
    for checkin in candidates:
        cells[grid_cell(checkin.latitude, checkin.longitude)].append(checkin)
    best = min(cells, key=lambda key: (-len(cells[key]), key))
    points = cells[best]

    return HomeLocation(
        user_id=checkins[0].user_id,
        latitude=math.fsum(c.latitude for c in points) / len(points),
        longitude=math.fsum(c.longitude for c in points) / len(points),
        support_count=len(points),
    )


def estimate_homes(grouped: Mapping[str, Sequence[CheckIn]]) -> dict[str, HomeLocation]:
    return {user: estimate_home(checkins) for user, checkins in grouped.items() if checkins}


def bucketize_time(checkin: CheckIn) -> int:
    return checkin.timestamp.hour


def distance_band(distance_km: float) -> int:
    # half-open bands [0,1) [1,10) [10,30) [30,inf)
    return bisect_right(DISTANCE_BAND_EDGES_KM, distance_km)


def bucketize_distance(home: HomeLocation, checkin: CheckIn) -> int:
    return distance_band(haversine_km(home.coordinates, checkin.coordinates))
