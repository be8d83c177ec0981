"""Run configuration: settings defaults, a flat `key = value` file, then flags."""
import hashlib
import json
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Mapping

from django.conf import settings

from .dimensions import ViewKind
from .evaluation import SplitSpec
from .exceptions import ConfigError
from .serializers import RunConfigSerializer


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    categories: str
    category_labels: str
    dataset_name: str
    out_dir: str
    seed: int
    delta: float
    enforce_selection: bool
    normalize_monthly: bool
    time_unit: str
    split: str
    target_view: str
    k: str
    rq1_grid: str
    applicability_mode: str
    context_readout: bool
    conv_filters: int
    hidden_width: int
    learning_rate: float
    batch_size: int
    epochs: int
    since: datetime | None
    until: datetime | None
    users: str
    report_format: str
    canonical_hierarchy: bool

    @property
    def split_spec(self) -> SplitSpec:
        return SplitSpec.from_string(self.split)

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(int(part) for part in self.k.split(','))

    @property
    def user_ids(self) -> list[str]:
        return [part for part in self.users.split(',') if part]

    @property
    def target(self) -> ViewKind:
        return ViewKind(self.target_view)

    @property
    def output_path(self) -> Path:
        return Path(self.out_dir)

    def manifest_config(self) -> dict:
        """Effective configuration for manifests: sorted keys, no output directory."""
        data = asdict(self)
        data.pop('out_dir')
        for key in ('since', 'until'):
            if data[key] is not None:
                data[key] = data[key].isoformat(sep=' ')
        return dict(sorted(data.items()))

    def config_hash(self) -> str:
        canonical = json.dumps(self.manifest_config(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def read_config_file(path) -> dict[str, str]:
    """Parse `key = value` lines; blank lines and `#` comments are ignored."""
    known = set(settings.LBSN_PIPELINE)
    values = {}
    try:
        lines = Path(path).read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise ConfigError(f'cannot read config file {path}: {exc}') from exc

    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f'{path}:{number}: expected key = value, got {raw.strip()!r}')
        if key not in known:
            raise ConfigError({key: [f'unknown configuration key ({path}:{number})']})
        values[key] = value.strip()
    return values


def load_config(config_path=None, overrides: Mapping | None = None) -> RunConfig:
    merged = dict(settings.LBSN_PIPELINE)
    if config_path:
        merged.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in merged:
            raise ConfigError({key: ['unknown configuration key']})
        merged[key] = value

    # empty strings from a config file mean "not set" for the optional window
    for key in ('since', 'until'):
        if merged.get(key) == '':
            merged[key] = None

    serializer = RunConfigSerializer(data=merged)
    if not serializer.is_valid():
        raise ConfigError({key: [str(error) for error in errors] for key, errors in serializer.errors.items()})
    return RunConfig(**serializer.validated_data)
