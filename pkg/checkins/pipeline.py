"""Stage orchestration: ingest, influence, features, applicability, train, evaluate.

Ingested check-ins live in the database; every later stage writes files under
the run's output directory plus a manifest in `manifests/<stage>.json`. A stage
refuses to run until the artifacts of the stages it depends on exist.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from django.db import transaction

from . import reports
from .applicability import ApplicabilityAssignment, ApplicabilityResult, DifferenceRecord, analyze_applicability
from .config import RunConfig
from .dimensions import CANONICAL_PAIRS, ContextKind, FeaturePair, canonical_position
from .evaluation import (
    FrequencyBaseline, MostPopular, PartitionedPredictor, build_pair_predictors, build_queries, run_rq1, run_rq2,
    split_dataset, topk_summary,
)
from .exceptions import ConfigError, MissingArtifact, NoData, PipelineError, StageError
from .features import FeatureSpace, UserFeatureSet, build_feature_sets, read_matrices, write_matrices
from .filters import CheckInFilter
from .influence import influence_analysis, selected_pairs
from .ingestion import CONTEXTS, estimate_homes, group_by_user, load_dataset, load_hierarchy
from .models import CheckInRecord, Dataset, StageRun, UserHome
from .unified_model import (
    ModelConfig, build_examples, load_checkpoint, predict_topk_batch, save_checkpoint, train,
)

logger = logging.getLogger(__name__)

STAGES = ('ingest', 'influence', 'features', 'applicability', 'train', 'evaluate')
REQUIRES = {
    'ingest': (),
    'influence': ('ingest',),
    'features': ('ingest',),
    'applicability': ('features',),
    'train': ('applicability', 'features'),
    'evaluate': ('train',),
}
SPLITS = ('train', 'validation', 'test')
FEATURES_DIR = 'features'
CHECKPOINT_FILE = 'model.ckpt'
BULK_BATCH = 2000

METHOD_MODEL = 'unified_model'
METHOD_FREQUENCY = 'frequency_baseline'
METHOD_POPULAR = 'most_popular'
METHOD_PARTITIONED = 'applicability_partitioned'


def order_stages(stages: Iterable[str]) -> list[str]:
    stages = list(dict.fromkeys(stages))
    unknown = [stage for stage in stages if stage not in STAGES]
    if unknown:
        raise ConfigError({'stages': [f'unknown stage {name!r}' for name in unknown]})
    return [stage for stage in STAGES if stage in stages]


@dataclass
class StageOutcome:
    stage: str
    manifest: Path
    outputs: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


class Pipeline:
    def __init__(self, config: RunConfig, notify: Callable[[str, str], None] | None = None):
        self.config = config
        self.out_dir = config.output_path
        self.notify = notify or (lambda stage, message: None)
        self._hierarchy = None
        self._records = None

    # shared inputs

    @property
    def hierarchy(self):
        if self._hierarchy is None:
            if not self.config.categories or not self.config.category_labels:
                raise ConfigError({'categories': ['category hierarchy files are required']})
            self._hierarchy = load_hierarchy(self.config.categories, self.config.category_labels,
                                             canonical=self.config.canonical_hierarchy)
        return self._hierarchy

    def dataset(self) -> Dataset:
        try:
            return Dataset.objects.get(name=self.config.dataset_name)
        except Dataset.DoesNotExist:
            raise MissingArtifact('ingest', 'ingest', f'database dataset {self.config.dataset_name!r}') from None

    def records(self):
        """(grouped check-ins, homes) of the filtered dataset."""
        if self._records is None:
            dataset = self.dataset()
            data = {}
            if self.config.user_ids:
                data['user_id'] = ','.join(self.config.user_ids)
            if self.config.since:
                data['checked_at__gte'] = self.config.since.isoformat(sep=' ')
            if self.config.until:
                data['checked_at__lte'] = self.config.until.isoformat(sep=' ')
            selected = CheckInFilter(data, queryset=CheckInRecord.objects.filter(dataset=dataset))
            if not selected.is_valid():
                raise ConfigError(dict(selected.errors))
            grouped = group_by_user(record.to_checkin() for record in selected.qs.iterator())
            if not grouped:
                raise NoData(f'no check-ins selected from dataset {dataset.name!r}')
            homes = {home.user_id: home.to_home() for home in UserHome.objects.filter(dataset=dataset)}
            self._records = (grouped, homes)
        return self._records

    def splits(self):
        grouped, _ = self.records()
        return split_dataset(grouped, self.config.split_spec)

    def pairs(self) -> tuple[FeaturePair, ...]:
        if not self.config.enforce_selection:
            return CANONICAL_PAIRS
        _, rows = reports.read_table(self._require_table('influence', 'influence'))
        selected = tuple(sorted(
            (FeaturePair.from_key(f"{row['context']}_{row['view']}") for row in rows if row['selected']),
            key=canonical_position,
        ))
        if not selected:
            raise ConfigError({'enforce_selection': ['influence analysis selected no (context, view) pair']})
        return selected

    def feature_space(self) -> FeatureSpace:
        return FeatureSpace.from_hierarchy(self.hierarchy, self.pairs())

    def homes_for(self, space: FeatureSpace, stage: str) -> dict:
        grouped, homes = self.records()
        if space.needs_home():
            missing = [user for user in grouped if user not in homes]
            if missing:
                raise MissingArtifact(stage, 'ingest', f'home locations of {len(missing)} users')
        return homes

    def _dataset_hash(self) -> str:
        return self.dataset().content_hash

    def _require(self, stage: str):
        for requirement in REQUIRES[stage]:
            path = reports.manifest_path(self.out_dir, requirement)
            if not path.exists():
                raise MissingArtifact(stage, requirement, path)
        if stage == 'features' and self.config.enforce_selection:
            self._require_table(stage, 'influence')

    def _require_table(self, stage: str, name: str) -> Path:
        path = reports.table_path(self.out_dir, name)
        if not path.exists():
            raise MissingArtifact(stage, reports.TABLES[name].stage, path)
        return path

    def _emit(self, rows, name: str) -> Path:
        return reports.emit_report(rows, reports.TABLES[name], self.out_dir, self.config.report_format)

    # running

    def run(self, stages: Iterable[str]) -> list[StageOutcome]:
        outcomes = []
        for stage in order_stages(stages):
            self._require(stage)
            self.notify(stage, f'running {stage}')
            try:
                outcome = getattr(self, f'run_{stage}')()
            except (ConfigError, MissingArtifact):
                self._record(stage, 'failed', message='configuration or dependency error')
                raise
            except (PipelineError, OSError, ValueError) as exc:
                self._record(stage, 'failed', message=str(exc))
                logger.error('stage %s failed: %s', stage, exc)
                raise StageError(stage, exc) from exc
            self._record(stage, 'succeeded', manifest=outcome.manifest)
            for path in outcome.outputs:
                self.notify(stage, f'wrote {path}')
            outcomes.append(outcome)
        return outcomes

    def _record(self, stage: str, status: str, manifest: Path | None = None, message: str = ''):
        StageRun.objects.create(
            dataset=Dataset.objects.filter(name=self.config.dataset_name).first(),
            stage=stage,
            status=status,
            out_dir=str(self.out_dir),
            config_hash=self.config.config_hash(),
            seed=self.config.seed,
            manifest_path=str(manifest or ''),
            message=message,
        )

    def _finish(self, stage: str, outputs: list[Path], dataset_hash: str | None = None, **summary) -> StageOutcome:
        manifest = reports.write_manifest(self.out_dir, stage, dataset_hash or self._dataset_hash(), self.config)
        return StageOutcome(stage, manifest, outputs, summary)

    # stages

    def run_ingest(self) -> StageOutcome:
        config = self.config
        if not config.dataset:
            raise ConfigError({'dataset': ['a dataset file is required for ingest']})
        hierarchy = self.hierarchy
        loaded = load_dataset(config.dataset, hierarchy)
        summary = loaded.summary
        dataset_hash = reports.file_sha256(config.dataset, config.categories, config.category_labels)
        # estimated from the train split only
        homes = estimate_homes(split_dataset(loaded.grouped, config.split_spec).train)

        with transaction.atomic():
            Dataset.objects.filter(name=config.dataset_name).delete()
            dataset = Dataset.objects.create(
                name=config.dataset_name,
                source_path=str(config.dataset),
                content_hash=dataset_hash,
                users=summary.users,
                pois=summary.pois,
                checkins=summary.checkins,
                skipped_lines=summary.skipped_lines,
                unknown_records=summary.unknown_records,
            )
            CheckInRecord.objects.bulk_create(
                (CheckInRecord.from_checkin(dataset, checkin)
                 for checkins in loaded.grouped.values() for checkin in checkins),
                batch_size=BULK_BATCH,
            )
            UserHome.objects.bulk_create(
                [UserHome(dataset=dataset, user_id=home.user_id, latitude=home.latitude,
                          longitude=home.longitude, support_count=home.support_count)
                 for home in homes.values()],
                batch_size=BULK_BATCH,
            )
        self._records = None

        for error in summary.errors:
            self.notify('ingest', f'skipped {error}')
        row = {
            'dataset': config.dataset_name,
            'users': summary.users,
            'pois': summary.pois,
            'checkins': summary.checkins,
            'skipped_lines': summary.skipped_lines,
            'unknown_records': summary.unknown_records,
            'unknown_category_ids': len(summary.unknown_categories),
        }
        unknown = [{'category_id': key, 'records': count} for key, count in summary.unknown_categories.items()]
        outputs = [self._emit([row], 'ingest_summary'), self._emit(unknown, 'ingest_unknown_categories')]
        return self._finish('ingest', outputs, dataset_hash, **row)

    def run_influence(self) -> StageOutcome:
        grouped, homes = self.records()
        hierarchy = self.hierarchy
        views = [hierarchy.view_spec(kind) for kind in dict.fromkeys(pair.view for pair in CANONICAL_PAIRS)]
        contexts = [CONTEXTS[kind] for kind in dict.fromkeys(pair.context for pair in CANONICAL_PAIRS)]
        results = influence_analysis(grouped, homes, contexts, views, self.config.delta)
        rows = [
            {'context': r.context.value, 'view': r.view.value, 'entropy': r.entropy, 'gain': r.gain,
             'gain_ratio': r.gain_ratio, 'selected': r.selected}
            for r in results
        ]
        selected = [pair.key for pair in selected_pairs(results)]
        return self._finish('influence', [self._emit(rows, 'influence')], selected=selected)

    def run_features(self) -> StageOutcome:
        space = self.feature_space()
        homes = self.homes_for(space, 'features')
        splits = self.splits()
        outputs = []
        for name in SPLITS:
            feature_sets = build_feature_sets(getattr(splits, name), homes, space)
            for pair in space.pairs:
                path = self.out_dir / FEATURES_DIR / name / f'{pair.key}.csv'
                write_matrices(path, (ufs[pair] for ufs in feature_sets.values()))
                outputs.append(path)
        train, validation, test = splits.sizes()
        return self._finish('features', outputs, train=train, validation=validation, test=test)

    def run_applicability(self) -> StageOutcome:
        space = self.feature_space()
        homes = self.homes_for(space, 'applicability')
        result = analyze_applicability(self.splits().train, homes, space, self.config.time_unit,
                                       self.config.normalize_monthly)
        counts = result.counts()
        rows = []
        for assignment in result.assignments:
            row = {'user_id': assignment.user_id, 'assigned_pair': assignment.assigned_pair.key,
                   'single_period': assignment.single_period}
            for pair in CANONICAL_PAIRS:
                record = assignment.records.get(pair)
                row[f'sum_{pair.short}'] = record.sum_diff if record else None
                row[f'rank_{pair.short}'] = record.rank if record else None
            rows.append(row)
        summary = {'users': len(result.assignments), 'single_period_users': result.single_period_users}
        for pair in CANONICAL_PAIRS:
            summary[pair.key] = counts.get(pair)
        outputs = [self._emit(rows, 'applicability'), self._emit([summary], 'applicability_summary')]
        return self._finish('applicability', outputs, **summary)

    def load_feature_sets(self, split: str, pairs, stage: str = 'train') -> dict[str, UserFeatureSet]:
        matrices = {}
        for pair in pairs:
            path = self.out_dir / FEATURES_DIR / split / f'{pair.key}.csv'
            if not path.exists():
                raise MissingArtifact(stage, 'features', path)
            for user, matrix in read_matrices(path).items():
                matrices.setdefault(user, {})[pair] = matrix
        return {user: UserFeatureSet(user, by_pair) for user, by_pair in matrices.items()}

    def load_applicability(self, pairs, stage: str = 'train') -> ApplicabilityResult:
        _, rows = reports.read_table(self._require_table(stage, 'applicability'))
        assignments = []
        for row in rows:
            records = {
                pair: DifferenceRecord(row['user_id'], pair, float(row[f'sum_{pair.short}']),
                                       int(row[f'rank_{pair.short}']))
                for pair in pairs if row.get(f'rank_{pair.short}') is not None
            }
            assignments.append(ApplicabilityAssignment(
                row['user_id'], FeaturePair.from_key(row['assigned_pair']), records, bool(row['single_period']),
            ))
        return ApplicabilityResult(assignments, tuple(pairs))

    def model_config(self, pairs) -> ModelConfig:
        space = self.feature_space()
        target = self.config.target
        return ModelConfig.for_shapes(
            {pair: space.shape(pair) for pair in pairs},
            n_classes=self.hierarchy.view_spec(target).cardinality,
            context_sizes={kind: CONTEXTS[kind].cardinality for kind in ContextKind},
            target_view=target,
            conv_filters=self.config.conv_filters,
            hidden_width=self.config.hidden_width,
            learning_rate=self.config.learning_rate,
            batch_size=self.config.batch_size,
            epochs=self.config.epochs,
            applicability_mode=self.config.applicability_mode,
            context_readout=self.config.context_readout,
        )

    def run_train(self) -> StageOutcome:
        pairs = self.pairs()
        model_config = self.model_config(pairs)
        _, homes = self.records()
        splits = self.splits()
        view = self.hierarchy.view_spec(self.config.target)
        feature_sets = self.load_feature_sets('train', pairs)
        assigned = {a.user_id: a.assigned_pair for a in self.load_applicability(pairs).assignments}

        examples = build_examples(build_queries(splits.train, homes, view), feature_sets, assigned, model_config)
        validation = build_examples(build_queries(splits.validation, homes, view), feature_sets, assigned,
                                    model_config)
        result = train(model_config, examples, self.config.seed, validation)

        checkpoint = self.out_dir / CHECKPOINT_FILE
        save_checkpoint(checkpoint, result.params, model_config, self.config.seed, result.best_epoch)
        log = self._emit(result.history, 'training_log')
        return self._finish('train', [checkpoint, log], examples=len(examples),
                            validation=len(validation), best_epoch=result.best_epoch)

    def run_evaluate(self) -> StageOutcome:
        checkpoint_path = self.out_dir / CHECKPOINT_FILE
        if not checkpoint_path.exists():
            raise MissingArtifact('evaluate', 'train', checkpoint_path)
        checkpoint = load_checkpoint(checkpoint_path)
        model_config = checkpoint.config
        pairs = tuple(channel.pair for channel in model_config.channels)
        target = model_config.target_view

        _, homes = self.records()
        splits = self.splits()
        hierarchy = self.hierarchy
        view = hierarchy.view_spec(target)
        feature_sets = self.load_feature_sets('train', pairs, 'evaluate')
        applicability = self.load_applicability(pairs, 'evaluate')
        assigned = {a.user_id: a.assigned_pair for a in applicability.assignments}
        queries = build_queries(splits.test, homes, view)

        predictors = build_pair_predictors(feature_sets, pairs, target, hierarchy.leaf_to_root_indices(),
                                           len(hierarchy.root_labels))
        rq1_rows, rq1_trend = run_rq1(queries, predictors, applicability, self.config.rq1_grid)
        rq2_rows = run_rq2(queries, predictors, applicability)

        n_labels = view.cardinality
        examples = build_examples(queries, feature_sets, assigned, model_config)
        rankings = {
            METHOD_MODEL: predict_topk_batch(checkpoint.params, examples, n_labels, model_config),
            METHOD_FREQUENCY: FrequencyBaseline.fit(splits.train, homes, view).predict(queries),
            METHOD_POPULAR: MostPopular.fit(splits.train, view).predict(queries),
            METHOD_PARTITIONED: PartitionedPredictor(predictors, assigned).predict(queries),
        }
        topk = topk_summary(rankings, queries, self.config.ks, n_labels)

        outputs = [
            self._emit(rq1_rows, 'rq1'),
            self._emit(rq1_trend, 'rq1_trend'),
            self._emit(rq2_rows, 'rq2'),
            self._emit(topk, 'topk'),
        ]
        top1 = {row.method: row.accuracy for row in topk if row.k == min(self.config.ks)}
        return self._finish('evaluate', outputs, queries=len(queries), top1=top1)


def summarize_assignments(out_dir) -> dict | None:
    """Users per assigned pair from a finished applicability stage, if any."""
    for fmt in (reports.CSV, reports.JSON):
        path = reports.table_path(out_dir, 'applicability_summary', fmt)
        if path.exists():
            _, rows = reports.read_table(path)
            return rows[0] if rows else None
    return None


