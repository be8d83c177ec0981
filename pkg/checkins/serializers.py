import math
from pathlib import Path

from rest_framework import serializers

from .applicability import TIME_UNITS
from .dimensions import ViewKind
from .evaluation import RQ1_GRIDS, SplitSpec
from .exceptions import InvalidConfig
from .unified_model import APPLICABILITY_MODES

REPORT_FORMATS = ('csv', 'json')


# floats rendered with 6 significant digits, NaN/inf become null
class SignificantFloatField(serializers.FloatField):
    def __init__(self, **kwargs):
        kwargs.setdefault('allow_null', True)
        super().__init__(**kwargs)

    def to_representation(self, value):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f'{value:.6g}')


# validates the merged run configuration (defaults, config file, command-line flags)
class RunConfigSerializer(serializers.Serializer):
    dataset = serializers.CharField(allow_blank=True)
    categories = serializers.CharField(allow_blank=True)
    category_labels = serializers.CharField(allow_blank=True)
    dataset_name = serializers.CharField(allow_blank=True, max_length=100)
    out_dir = serializers.CharField()
    seed = serializers.IntegerField(min_value=0)
    delta = serializers.FloatField(min_value=0.0)
    enforce_selection = serializers.BooleanField()
    normalize_monthly = serializers.BooleanField()
    time_unit = serializers.ChoiceField(choices=TIME_UNITS)
    split = serializers.CharField()
    target_view = serializers.ChoiceField(choices=ViewKind.values)
    k = serializers.CharField()
    rq1_grid = serializers.ChoiceField(choices=RQ1_GRIDS)
    applicability_mode = serializers.ChoiceField(choices=APPLICABILITY_MODES)
    context_readout = serializers.BooleanField()
    conv_filters = serializers.IntegerField(min_value=1)
    hidden_width = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField(min_value=1e-12)
    batch_size = serializers.IntegerField(min_value=1)
    epochs = serializers.IntegerField(min_value=0)
    since = serializers.DateTimeField(allow_null=True, required=False, input_formats=['iso-8601', '%Y-%m-%d'])
    until = serializers.DateTimeField(allow_null=True, required=False, input_formats=['iso-8601', '%Y-%m-%d'])
    users = serializers.CharField(allow_blank=True)
    report_format = serializers.ChoiceField(choices=REPORT_FORMATS)
    canonical_hierarchy = serializers.BooleanField()

    def validate_split(self, value):
        try:
            return SplitSpec.from_string(value).as_string()
        except InvalidConfig as exc:
            raise serializers.ValidationError(str(exc))

    def validate_k(self, value):
        try:
            ks = sorted({int(part) for part in value.split(',') if part.strip()})
        except ValueError:
            raise serializers.ValidationError('K values must be integers separated by commas.')
        if not ks or ks[0] < 1:
            raise serializers.ValidationError('At least one K >= 1 is required.')
        return ','.join(str(k) for k in ks)

    def validate_users(self, value):
        return ','.join(part.strip() for part in value.split(',') if part.strip())

    def validate(self, data):
        errors = {}
        for key in ('dataset', 'categories', 'category_labels'):
            if data[key] and not Path(data[key]).is_file():
                errors[key] = [f'File not found: {data[key]}']
        since, until = data.get('since'), data.get('until')
        if since and until and since > until:
            errors['until'] = ['until must not be earlier than since.']
        if errors:
            raise serializers.ValidationError(errors)
        if not data['dataset_name']:
            data['dataset_name'] = Path(data['dataset']).stem if data['dataset'] else 'default'
        return data


# ingest stage counts, one row per dataset
class IngestSummarySerializer(serializers.Serializer):
    dataset = serializers.CharField()
    users = serializers.IntegerField()
    pois = serializers.IntegerField()
    checkins = serializers.IntegerField()
    skipped_lines = serializers.IntegerField()
    unknown_records = serializers.IntegerField()
    unknown_category_ids = serializers.IntegerField()


# records dropped at ingest because their category id is not in the hierarchy
class UnknownCategorySerializer(serializers.Serializer):
    category_id = serializers.CharField()
    records = serializers.IntegerField()


class InfluenceRowSerializer(serializers.Serializer):
    context = serializers.CharField()
    view = serializers.CharField()
    entropy = SignificantFloatField()
    gain = SignificantFloatField()
    gain_ratio = SignificantFloatField()
    selected = serializers.BooleanField()


# per-user difference sums and ranks, missing pairs stay null
class AssignmentRowSerializer(serializers.Serializer):
    user_id = serializers.CharField()
    sum_tr = SignificantFloatField()
    sum_tc = SignificantFloatField()
    sum_dr = SignificantFloatField()
    sum_dc = SignificantFloatField()
    rank_tr = serializers.IntegerField(allow_null=True)
    rank_tc = serializers.IntegerField(allow_null=True)
    rank_dr = serializers.IntegerField(allow_null=True)
    rank_dc = serializers.IntegerField(allow_null=True)
    assigned_pair = serializers.CharField()
    single_period = serializers.BooleanField()


# users per assigned pair, pairs outside the analysis stay null
class AssignmentSummarySerializer(serializers.Serializer):
    users = serializers.IntegerField()
    time_root = serializers.IntegerField(allow_null=True)
    time_leaf = serializers.IntegerField(allow_null=True)
    distance_root = serializers.IntegerField(allow_null=True)
    distance_leaf = serializers.IntegerField(allow_null=True)
    single_period_users = serializers.IntegerField()


class TrainingLogSerializer(serializers.Serializer):
    epoch = serializers.IntegerField()
    train_loss = SignificantFloatField()
    val_loss = SignificantFloatField()
    val_top1 = SignificantFloatField()


class Rq1RowSerializer(serializers.Serializer):
    pair = serializers.CharField()
    bucket = serializers.IntegerField()
    lower = SignificantFloatField()
    upper = SignificantFloatField()
    users = serializers.IntegerField()
    queries = serializers.IntegerField()
    accuracy = SignificantFloatField()


class Rq1TrendSerializer(serializers.Serializer):
    pair = serializers.CharField()
    buckets = serializers.IntegerField()
    spearman_rho = SignificantFloatField()


class Rq2RowSerializer(serializers.Serializer):
    cohort = serializers.CharField()
    users = serializers.IntegerField()
    queries = serializers.IntegerField()
    time_root = SignificantFloatField()
    time_leaf = SignificantFloatField()
    distance_root = SignificantFloatField()
    distance_leaf = SignificantFloatField()
    partitioned = SignificantFloatField()


class TopKRowSerializer(serializers.Serializer):
    method = serializers.CharField()
    k = serializers.IntegerField()
    queries = serializers.IntegerField()
    accuracy = SignificantFloatField()
