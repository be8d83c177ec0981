"""Names of the context dimensions, analyst views and their pairings."""
from typing import NamedTuple

from django.db import models


class ContextKind(models.TextChoices):
    TIME = 'time', 'Time of day'
    DISTANCE = 'distance', 'Distance from home'


class ViewKind(models.TextChoices):
    ROOT = 'root', 'Root category'
    LEAF = 'leaf', 'Leaf category'


class FeaturePair(NamedTuple):
    context: ContextKind
    view: ViewKind

    @property
    def key(self) -> str:
        return f'{self.context.value}_{self.view.value}'

    @property
    def short(self) -> str:
        # tr, tc, dr, dc as used in the assignment report columns
        return self.context.value[0] + ('r' if self.view == ViewKind.ROOT else 'c')

    @classmethod
    def from_key(cls, key: str) -> 'FeaturePair':
        context, _, view = key.partition('_')
        return cls(ContextKind(context), ViewKind(view))

    def __str__(self):
        return self.key


# canonical order, also the cross-pair tie-break order for applicability
CANONICAL_PAIRS = (
    FeaturePair(ContextKind.TIME, ViewKind.ROOT),
    FeaturePair(ContextKind.TIME, ViewKind.LEAF),
    FeaturePair(ContextKind.DISTANCE, ViewKind.ROOT),
    FeaturePair(ContextKind.DISTANCE, ViewKind.LEAF),
)

CONTEXT_ORDER = (ContextKind.TIME, ContextKind.DISTANCE)
VIEW_ORDER = (ViewKind.ROOT, ViewKind.LEAF)


def canonical_position(pair: FeaturePair) -> int:
    return CANONICAL_PAIRS.index(pair)
