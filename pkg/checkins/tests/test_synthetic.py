import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from checkins.applicability import analyze_applicability
from checkins.dimensions import CANONICAL_PAIRS, ContextKind, ViewKind
from checkins.evaluation import (
    FrequencyBaseline, build_pair_predictors, build_queries, run_rq1, run_rq2, split_dataset, topk_summary,
)
from checkins.exceptions import InvalidSpec
from checkins.features import FeatureSpace, build_feature_sets
from checkins.geo import haversine_km
from checkins.ingestion import CONTEXTS, estimate_homes, load_dataset, load_hierarchy
from checkins.synthetic import (
    CATEGORIES_FILE, CHECKINS_FILE, GROUPS_FILE, LABELS_FILE, GroupProfile, SynthSpec, generate_synthetic,
    read_groups, synthetic_hierarchy,
)
from checkins.unified_model import ModelConfig, build_examples, predict_topk_batch, train

TR, TC, DR, DC = CANONICAL_PAIRS


def held_out_experiment(dataset):
    """Applicability on the train split, queries from the test split, root target."""
    hierarchy = dataset.hierarchy
    splits = split_dataset(dataset.grouped)
    homes = estimate_homes(splits.train)
    space = FeatureSpace.from_hierarchy(hierarchy)
    applicability = analyze_applicability(splits.train, homes, space)
    feature_sets = build_feature_sets(splits.train, homes, space)
    predictors = build_pair_predictors(feature_sets, CANONICAL_PAIRS, ViewKind.ROOT,
                                       hierarchy.leaf_to_root_indices(), len(hierarchy.root_labels))
    queries = build_queries(splits.test, homes, hierarchy.view_spec(ViewKind.ROOT))
    return applicability, predictors, queries


class TestSpec:

    def test_balanced_groups(self):
        spec = SynthSpec.balanced(users=10, months=2, noise=0.2, seed=1)
        assert [group.size for group in spec.groups] == [3, 3, 2, 2]
        assert [group.pair for group in spec.groups] == list(CANONICAL_PAIRS)
        assert spec.user_count == 10
        assert spec.routine_slots == 57

    @pytest.mark.parametrize('options', [{'months': 0}, {'anchors_per_month': 0}, {'root_routine_cells': 5},
                                         {'checkins_per_month': 3}, {'start': (2012, 13)}])
    def test_invalid_spec(self, options):
        spec = replace(SynthSpec.balanced(users=4, months=2, noise=0.1, seed=1), **options)
        with pytest.raises(InvalidSpec):
            generate_synthetic(spec)

    def test_noise_outside_unit_interval(self):
        with pytest.raises(InvalidSpec):
            generate_synthetic(SynthSpec.balanced(users=4, months=2, noise=1.5, seed=1))

    def test_canonical_hierarchy(self):
        hierarchy = synthetic_hierarchy()
        assert (len(hierarchy.root_labels), len(hierarchy.leaf_labels)) == (9, 65)


class TestGeneration:

    def test_same_seed_same_cohort(self):
        spec = SynthSpec.balanced(users=8, months=2, noise=0.3, seed=21)
        first, second = generate_synthetic(spec), generate_synthetic(spec)
        assert first.grouped == second.grouped, 'generation should be deterministic for a fixed seed'
        assert first.grouped != generate_synthetic(replace(spec, seed=22)).grouped

    def test_volumes(self, synthetic_cohort):
        spec = synthetic_cohort.spec
        assert len(synthetic_cohort.grouped) == spec.user_count
        assert synthetic_cohort.checkin_count == spec.user_count * spec.months * spec.checkins_per_month
        assert sorted(synthetic_cohort.grouped, key=int) == [str(i) for i in range(1, spec.user_count + 1)]

    def test_home_is_recovered(self, synthetic_cohort, synthetic_homes):
        for user, planted in synthetic_cohort.homes.items():
            distance = haversine_km(planted.coordinates, synthetic_homes[user].coordinates)
            assert distance < 0.01, f'home of user {user} should be the anchor location'

    def test_noise_free_time_leaf_users_repeat_every_month(self):
        spec = SynthSpec(groups=(GroupProfile(TC, 0.0, 5),), months=3, seed=4)
        dataset = generate_synthetic(spec)
        space = FeatureSpace.from_hierarchy(dataset.hierarchy)

        result = analyze_applicability(dataset.grouped, estimate_homes(dataset.grouped), space)

        for assignment in result.assignments:
            assert assignment.records[TC].sum_diff == 0.0
            assert assignment.records[TR].sum_diff == 0.0, 'root counts aggregate identical leaf counts'
            assert assignment.records[DC].sum_diff > 0.0, 'distance is redrawn for every check-in'

    def test_files_load_back_through_ingestion(self, synthetic_files):
        print(f"\n{'='*60}")
        print("[TEST] Synthetic - written files load back through ingestion")
        print(f"{'='*60}")
        assert set(synthetic_files) == {CHECKINS_FILE, CATEGORIES_FILE, LABELS_FILE, GROUPS_FILE}

        hierarchy = load_hierarchy(synthetic_files[CATEGORIES_FILE], synthetic_files[LABELS_FILE])
        loaded = load_dataset(synthetic_files[CHECKINS_FILE], hierarchy)
        regenerated = generate_synthetic(SynthSpec.balanced(users=24, months=3, noise=0.1, seed=5))
        print(f"[SUMMARY] users={loaded.summary.users} checkins={loaded.summary.checkins}")

        assert loaded.summary.skipped_lines == 0 and loaded.summary.unknown_records == 0
        assert loaded.summary.checkins == regenerated.checkin_count
        for user, records in regenerated.grouped.items():
            assert [replace(c, line_number=0) for c in loaded.grouped[user]] == list(records), \
                f'records of user {user} should survive the file round trip'
        groups = read_groups(synthetic_files[GROUPS_FILE])
        assert groups == regenerated.planted_pairs()
        print("[SUCCESS] synthetic files are valid pipeline input")


class TestPlantedStructure:

    @pytest.mark.parametrize('seed', [1, 2, 3, 4, 5])
    def test_groups_are_assigned_to_their_planted_pair(self, seed):
        print(f"\n{'='*60}")
        print(f"[TEST] Planted regularity recovery (seed {seed})")
        print(f"{'='*60}")
        dataset = generate_synthetic(SynthSpec.balanced(users=400, months=6, noise=0.1, seed=seed))
        space = FeatureSpace.from_hierarchy(dataset.hierarchy)

        result = analyze_applicability(dataset.grouped, estimate_homes(dataset.grouped), space)

        planted = dataset.planted_pairs()
        for pair in CANONICAL_PAIRS:
            members = [a for a in result.assignments if planted[a.user_id] == pair]
            recovered = sum(a.assigned_pair == pair for a in members) / len(members)
            print(f"[RECOVERY] {pair.key}: {recovered:.3f} of {len(members)} users")
            assert recovered >= 0.9, f'{pair.key} group should be recovered for at least 90% of its users'
        print("[SUCCESS] every group recovered")

    def test_accuracy_falls_as_the_difference_grows(self):
        groups = tuple(GroupProfile(TR, noise / 10, 20) for noise in range(10))
        dataset = generate_synthetic(SynthSpec(groups=groups, months=6, seed=8))
        applicability, predictors, queries = held_out_experiment(dataset)

        _, trends = run_rq1(queries, {TR: predictors[TR]}, applicability)

        [trend] = trends
        print(f"\n[TREND] {trend.pair}: buckets={trend.buckets} rho={trend.spearman_rho}")
        assert trend.buckets == 10
        assert trend.spearman_rho <= -0.8, 'accuracy should fall across difference deciles'

    def test_partitioned_prediction_beats_every_single_pair(self):
        dataset = generate_synthetic(SynthSpec.balanced(users=100, months=6, noise=0.1, seed=13))
        applicability, predictors, queries = held_out_experiment(dataset)

        overall = run_rq2(queries, predictors, applicability)[0]

        print(f"\n[RQ2] {overall}")
        assert overall.cohort == 'all'
        for single in (overall.time_root, overall.time_leaf, overall.distance_root, overall.distance_leaf):
            assert overall.partitioned >= single, 'partitioned prediction should not lose to any single pair'

    def test_pure_noise_spreads_users_evenly(self):
        pooled = np.zeros(len(CANONICAL_PAIRS), dtype=np.int64)
        significant = 0
        for seed in range(1, 31):
            dataset = generate_synthetic(SynthSpec.balanced(users=40, months=6, noise=1.0, seed=seed))
            space = FeatureSpace.from_hierarchy(dataset.hierarchy)
            counts = analyze_applicability(dataset.grouped, estimate_homes(dataset.grouped), space).counts()
            per_pair = np.array([counts.get(pair, 0) for pair in CANONICAL_PAIRS])
            pooled += per_pair
            significant += stats.chisquare(per_pair).pvalue < 0.01

        pvalue = stats.chisquare(pooled).pvalue
        print(f"\n[NOISE] pooled {pooled.tolist()} p={pvalue:.3f}, {significant} of 30 seeds significant")
        assert pvalue > 0.01, 'without planted structure no pair should attract more users'
        assert significant <= 2


class TestUnifiedModelAcceptance:

    def test_beats_the_frequency_baseline_within_five_minutes(self):
        print(f"\n{'='*60}")
        print("[TEST] Unified model vs frequency baseline, 200 users")
        print(f"{'='*60}")
        dataset = generate_synthetic(SynthSpec.balanced(users=200, months=6, noise=0.1, seed=7))
        hierarchy = dataset.hierarchy
        splits = split_dataset(dataset.grouped)
        homes = estimate_homes(splits.train)
        space = FeatureSpace.from_hierarchy(hierarchy)
        view = hierarchy.view_spec(ViewKind.ROOT)
        feature_sets = build_feature_sets(splits.train, homes, space)
        assigned = {a.user_id: a.assigned_pair for a in analyze_applicability(splits.train, homes, space).assignments}
        # default network and schedule with the context read-out switched on
        config = ModelConfig.for_shapes(
            {pair: space.shape(pair) for pair in CANONICAL_PAIRS},
            n_classes=view.cardinality,
            context_sizes={kind: CONTEXTS[kind].cardinality for kind in ContextKind},
            context_readout=True,
        )
        examples = build_examples(build_queries(splits.train, homes, view), feature_sets, assigned, config)
        validation = build_examples(build_queries(splits.validation, homes, view), feature_sets, assigned, config)

        started = time.perf_counter()
        result = train(config, examples, seed=7, validation=validation)
        elapsed = time.perf_counter() - started

        queries = build_queries(splits.test, homes, view)
        rankings = {
            'unified_model': predict_topk_batch(result.params, build_examples(queries, feature_sets, assigned, config),
                                                view.cardinality, config),
            'frequency_baseline': FrequencyBaseline.fit(splits.train, homes, view).predict(queries),
        }
        accuracy = {(row.method, row.k): row.accuracy
                    for row in topk_summary(rankings, queries, (1, 5, 10), view.cardinality)}
        print(f"[RESULT] {config.epochs} epochs in {elapsed:.1f}s, best epoch {result.best_epoch}")
        for (method, k), value in sorted(accuracy.items()):
            print(f"[ACCURACY] {method} @{k}: {value:.4f}")

        assert elapsed < 300, 'training should finish in under five minutes'
        assert accuracy['unified_model', 1] >= accuracy['frequency_baseline', 1]
        assert accuracy['unified_model', 1] <= accuracy['unified_model', 5] <= accuracy['unified_model', 10]
        print("[SUCCESS] model at least matches the baseline")
