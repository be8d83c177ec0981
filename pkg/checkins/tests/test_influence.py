import math
from collections import Counter
from datetime import datetime

import numpy as np
import pytest

from checkins.dimensions import ContextKind, FeaturePair, ViewKind
from checkins.exceptions import EmptyDataset, EmptySample, ZeroEntropy
from checkins.influence import LabeledSample, entropy, gain_ratio, influence_analysis, information_gain, selected_pairs
from checkins.ingestion import CONTEXTS, ContextSpec
from checkins.tests.conftest import HOME, make_checkin


def direct_entropy(labels):
    total = len(labels)
    return -sum((count / total) * math.log2(count / total) for count in Counter(labels).values())


def direct_gain(samples):
    labels = [s.view_label_index for s in samples]
    remainder = 0.0
    for value in {s.context_value_index for s in samples}:
        part = [s.view_label_index for s in samples if s.context_value_index == value]
        remainder += len(part) / len(samples) * direct_entropy(part)
    return direct_entropy(labels) - remainder


class TestEntropy:

    def test_uniform_labels(self):
        assert entropy(['a', 'b', 'c', 'd']) == pytest.approx(2.0)

    def test_single_label_has_zero_entropy(self):
        assert entropy(['a', 'a', 'a']) == 0.0

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            entropy([])


class TestGain:

    def test_worked_example(self):
        print(f"\n{'='*60}")
        print("[TEST] Gain ratio - worked example")
        print(f"{'='*60}")
        # labels A A B B; context 0 holds A A B, context 1 holds B
        samples = [LabeledSample(0, 0), LabeledSample(0, 0), LabeledSample(1, 0), LabeledSample(1, 1)]
        context = CONTEXTS[ContextKind.DISTANCE]

        gain = information_gain(samples, context)
        ratio = gain_ratio(samples, context)
        print(f"[RESULT] gain={gain:.6f} ratio={ratio:.6f}")

        expected = 1 - 0.75 * direct_entropy(['A', 'A', 'B'])
        assert gain == pytest.approx(0.311278, abs=1e-6)
        assert gain == pytest.approx(expected, abs=1e-12)
        assert ratio == pytest.approx(gain, abs=1e-12), 'view entropy is exactly 1 bit here'
        print("[SUCCESS] worked value reproduced")

    def test_matches_direct_summation_on_random_samples(self):
        rng = np.random.default_rng(2024)
        context = ContextSpec(ContextKind.DISTANCE, ('a', 'b', 'c', 'd'))
        for _ in range(1000):
            size = int(rng.integers(1, 51))
            labels = rng.integers(0, int(rng.integers(1, 6)), size=size)
            values = rng.integers(0, int(rng.integers(1, 5)), size=size)
            samples = [LabeledSample(int(label), int(value)) for label, value in zip(labels, values)]

            expected = direct_gain(samples)
            assert information_gain(samples, context) == pytest.approx(expected, abs=1e-12)
            base = direct_entropy([s.view_label_index for s in samples])
            if base > 0:
                assert gain_ratio(samples, context) == pytest.approx(expected / base, abs=1e-12)

    def test_gain_is_bounded_by_entropy(self):
        rng = np.random.default_rng(3)
        context = CONTEXTS[ContextKind.TIME]
        samples = [LabeledSample(int(label), int(hour))
                   for label, hour in zip(rng.integers(0, 9, 300), rng.integers(0, 24, 300))]
        gain = information_gain(samples, context)
        assert 0.0 <= gain <= direct_entropy([s.view_label_index for s in samples]) + 1e-12

    def test_independent_context_has_no_gain(self):
        samples = [LabeledSample(label, value) for label in range(3) for value in range(4)]
        assert information_gain(samples, CONTEXTS[ContextKind.DISTANCE]) == pytest.approx(0.0, abs=1e-12)

    def test_zero_entropy_view(self):
        samples = [LabeledSample(2, 0), LabeledSample(2, 1)]
        with pytest.raises(ZeroEntropy):
            gain_ratio(samples, CONTEXTS[ContextKind.DISTANCE])
        assert information_gain(samples, CONTEXTS[ContextKind.DISTANCE]) == 0.0

    def test_merging_context_values_never_adds_gain(self):
        rng = np.random.default_rng(11)
        context = CONTEXTS[ContextKind.TIME]
        for _ in range(20):
            hours = rng.integers(0, 24, 200)
            labels = (hours // 6 + rng.integers(0, 3, 200)) % 5
            samples = [LabeledSample(int(label), int(hour)) for label, hour in zip(labels, hours)]
            kept, folded = rng.choice(24, size=2, replace=False)
            merged = [LabeledSample(s.view_label_index, int(kept) if s.context_value_index == folded
                                    else s.context_value_index) for s in samples]

            assert information_gain(merged, context) <= information_gain(samples, context) + 1e-12

    def test_empty_partition_input(self):
        with pytest.raises(EmptySample):
            information_gain([], CONTEXTS[ContextKind.TIME])


class TestInfluenceAnalysis:

    @pytest.fixture
    def dataset(self):
        # time of day fully decides the category; everything happens at home
        morning = [make_checkin(when=datetime(2012, 4, day, 9, 0, 0), category='c1') for day in range(2, 7)]
        evening = [make_checkin(when=datetime(2012, 4, day, 20, 0, 0), category='c3') for day in range(2, 7)]
        return {'1': tuple(morning + evening)}

    def test_scores_and_selection(self, dataset, home, small_hierarchy):
        contexts = [CONTEXTS[ContextKind.TIME], CONTEXTS[ContextKind.DISTANCE]]
        views = [small_hierarchy.view_spec(ViewKind.ROOT), small_hierarchy.view_spec(ViewKind.LEAF)]

        results = influence_analysis(dataset, {'1': home}, contexts, views, delta=0.1)

        assert [r.pair.key for r in results] == ['time_root', 'time_leaf', 'distance_root', 'distance_leaf'], \
            'results should be context-major, view-minor'
        by_pair = {r.pair: r for r in results}
        time_root = by_pair[FeaturePair(ContextKind.TIME, ViewKind.ROOT)]
        assert time_root.entropy == pytest.approx(1.0)
        assert time_root.gain_ratio == pytest.approx(1.0)
        assert time_root.selected
        assert by_pair[FeaturePair(ContextKind.DISTANCE, ViewKind.ROOT)].gain_ratio == pytest.approx(0.0, abs=1e-12)
        assert selected_pairs(results) == [FeaturePair(ContextKind.TIME, ViewKind.ROOT),
                                           FeaturePair(ContextKind.TIME, ViewKind.LEAF)]

    def test_delta_threshold_is_strict(self, dataset, home, small_hierarchy):
        contexts = [CONTEXTS[ContextKind.TIME]]
        views = [small_hierarchy.view_spec(ViewKind.ROOT)]
        results = influence_analysis(dataset, {'1': home}, contexts, views, delta=1.0)
        assert not results[0].selected, 'a ratio equal to delta is not above it'

    def test_selection_shrinks_as_delta_grows(self, home, small_hierarchy):
        rng = np.random.default_rng(5)
        records = []
        for index in range(300):
            hour = int(rng.integers(0, 24))
            category = ('c1', 'c2', 'c3')[(hour // 8 + int(rng.integers(0, 2))) % 3]
            records.append(make_checkin(when=datetime(2012, 4, 2 + index % 20, hour, 0, 0), category=category,
                                        lat=HOME[0] + float(rng.uniform(-0.2, 0.2))))
        contexts = [CONTEXTS[ContextKind.TIME], CONTEXTS[ContextKind.DISTANCE]]
        views = [small_hierarchy.view_spec(ViewKind.ROOT), small_hierarchy.view_spec(ViewKind.LEAF)]

        chosen = [set(selected_pairs(influence_analysis({'1': tuple(records)}, {'1': home}, contexts, views, delta)))
                  for delta in np.linspace(0.0, 1.0, 21)]

        assert chosen[0], 'some pair carries information at delta 0'
        for looser, stricter in zip(chosen, chosen[1:]):
            assert stricter <= looser, 'raising delta must never add a pair'
        assert not chosen[-1]

    def test_negative_delta(self, dataset, home, small_hierarchy):
        with pytest.raises(ValueError):
            influence_analysis(dataset, {'1': home}, [CONTEXTS[ContextKind.TIME]],
                               [small_hierarchy.view_spec(ViewKind.ROOT)], delta=-0.1)

    def test_empty_dataset(self, small_hierarchy):
        with pytest.raises(EmptyDataset):
            influence_analysis({'1': ()}, {}, [CONTEXTS[ContextKind.TIME]],
                               [small_hierarchy.view_spec(ViewKind.ROOT)])
