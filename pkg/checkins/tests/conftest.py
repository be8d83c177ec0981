from datetime import datetime

import pytest

from checkins.ingestion import CategoryHierarchy, CheckIn, HomeLocation, estimate_homes
from checkins.synthetic import SynthSpec, generate_synthetic, write_synthetic

HOME = (40.7500, -73.9900)


def make_checkin(user='1', when=datetime(2012, 4, 2, 9, 0, 0), category='c1', lat=HOME[0], lon=HOME[1],
                 poi='p1', name=None, root=None, line_number=0):
    return CheckIn(
        user_id=user,
        poi_id=poi,
        category_id=category,
        category_name=name or f'name-{category}',
        latitude=lat,
        longitude=lon,
        timestamp=when,
        root_category=root,
        line_number=line_number,
    )


@pytest.fixture
def small_hierarchy():
    # two roots (Food, Shop) over three leaves
    return CategoryHierarchy.from_mappings(
        {'c1': 'Food', 'c2': 'Food', 'c3': 'Shop'},
        {'c1': 'Cafe', 'c2': 'Diner', 'c3': 'Bookstore'},
    )


@pytest.fixture
def home():
    return HomeLocation('1', HOME[0], HOME[1], 3)


@pytest.fixture
def synthetic_cohort():
    spec = SynthSpec.balanced(users=40, months=4, noise=0.1, seed=11)
    return generate_synthetic(spec)


@pytest.fixture
def synthetic_homes(synthetic_cohort):
    return estimate_homes(synthetic_cohort.grouped)


@pytest.fixture
def synthetic_files(tmp_path):
    spec = SynthSpec.balanced(users=24, months=3, noise=0.1, seed=5)
    return write_synthetic(generate_synthetic(spec), tmp_path / 'synthetic')
