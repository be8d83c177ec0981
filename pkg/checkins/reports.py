"""Report tables and run manifests.

Tables are declared as serializers so column order is stable. CSV files open
with a `# manifest: <path>` comment line; JSON files wrap the rows as
{"manifest": <path>, "rows": [...]}. Empty results give header-only files.
"""
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import pandas as pd
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from . import __version__
from . import serializers as report_serializers
from .exceptions import DatasetIOError

logger = logging.getLogger(__name__)

CSV = 'csv'
JSON = 'json'
MANIFEST_DIR = 'manifests'
MANIFEST_PREFIX = '# manifest: '


@dataclass(frozen=True)
class ReportTable:
    name: str
    stage: str
    serializer: type

    @property
    def columns(self) -> list[str]:
        return list(self.serializer().fields)


TABLES = {
    table.name: table for table in (
        ReportTable('ingest_summary', 'ingest', report_serializers.IngestSummarySerializer),
        ReportTable('ingest_unknown_categories', 'ingest', report_serializers.UnknownCategorySerializer),
        ReportTable('influence', 'influence', report_serializers.InfluenceRowSerializer),
        ReportTable('applicability', 'applicability', report_serializers.AssignmentRowSerializer),
        ReportTable('applicability_summary', 'applicability', report_serializers.AssignmentSummarySerializer),
        ReportTable('training_log', 'train', report_serializers.TrainingLogSerializer),
        ReportTable('rq1', 'evaluate', report_serializers.Rq1RowSerializer),
        ReportTable('rq1_trend', 'evaluate', report_serializers.Rq1TrendSerializer),
        ReportTable('rq2', 'evaluate', report_serializers.Rq2RowSerializer),
        ReportTable('topk', 'evaluate', report_serializers.TopKRowSerializer),
    )
}

# identifiers that must stay strings when a CSV table is read back
STRING_COLUMNS = ('user_id', 'category_id', 'dataset', 'pair', 'cohort', 'method', 'context', 'view',
                  'assigned_pair')


def render_json(data, indent: int | None = 2) -> bytes:
    return JSONRenderer().render(data, renderer_context={'indent': indent})


def file_sha256(*paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        with open(path, 'rb') as handle:
            for block in iter(lambda: handle.read(1 << 20), b''):
                digest.update(block)
    return digest.hexdigest()


def manifest_path(out_dir, stage: str) -> Path:
    return Path(out_dir) / MANIFEST_DIR / f'{stage}.json'


def write_manifest(out_dir, stage: str, dataset_hash: str, config) -> Path:
    """Everything needed to trace a stage's outputs back to its inputs."""
    path = manifest_path(out_dir, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        'config': config.manifest_config(),
        'config_hash': config.config_hash(),
        'dataset_hash': dataset_hash,
        'seed': config.seed,
        'stage': stage,
        'version': f'checkins-{__version__}',
    }
    path.write_bytes(render_json(manifest) + b'\n')
    return path


def parse_json(path):
    with open(path, 'rb') as handle:
        return JSONParser().parse(handle)


def read_manifest(path) -> dict:
    return parse_json(path)


def table_path(out_dir, name: str, fmt: str = CSV) -> Path:
    return Path(out_dir) / f'{name}.{fmt}'


def emit_report(rows, table: ReportTable, out_dir, fmt: str = CSV) -> Path:
    """Serialize rows through the table's serializer and write them in `fmt`."""
    if fmt not in (CSV, JSON):
        raise ValueError(f'unknown report format {fmt!r}')
    data = [dict(row) for row in table.serializer(rows, many=True).data]
    return _write_table(data, table, out_dir, fmt)


def _write_table(data: list[dict], table: ReportTable, out_dir, fmt: str) -> Path:
    path = table_path(out_dir, table.name, fmt)
    reference = f'{MANIFEST_DIR}/{table.stage}.json'
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == JSON:
            path.write_bytes(render_json({'manifest': reference, 'rows': data}) + b'\n')
        else:
            frame = pd.DataFrame(data, columns=table.columns)
            with open(path, 'w', encoding='utf-8', newline='\n') as handle:
                handle.write(f'{MANIFEST_PREFIX}{reference}\n')
                frame.to_csv(handle, index=False, lineterminator='\n')
    except OSError as exc:
        raise DatasetIOError(f'cannot write report {path}: {exc}') from exc
    logger.debug('wrote %s (%d rows)', path, len(data))
    return path


def _python_value(value):
    if value is None or (isinstance(value, float) and value != value):
        return None
    return value.item() if hasattr(value, 'item') else value


def read_table(path) -> tuple[str | None, list[dict]]:
    """Read a CSV or JSON report back as (manifest reference, rows)."""
    path = Path(path)
    if path.suffix == f'.{JSON}':
        document = parse_json(path)
        return document.get('manifest'), document.get('rows', [])

    with open(path, encoding='utf-8') as handle:
        first = handle.readline()
        reference = None
        if first.startswith(MANIFEST_PREFIX):
            reference = first[len(MANIFEST_PREFIX):].strip()
        else:
            handle.seek(0)
        header = handle.readline()
        columns = header.rstrip('\n').split(',')
        handle.seek(0)
        if reference is not None:
            handle.readline()
        dtypes = {column: str for column in columns if column in STRING_COLUMNS}
        frame = pd.read_csv(handle, dtype=dtypes, keep_default_na=True)
    rows = [
        {column: _python_value(value) for column, value in record.items()}
        for record in frame.astype(object).to_dict('records')
    ]
    return reference, rows


def convert_reports(out_dir, fmt: str) -> list[Path]:
    """Re-emit every table found in out_dir in the requested format."""
    other = JSON if fmt == CSV else CSV
    written = []
    for table in TABLES.values():
        sources = [table_path(out_dir, table.name, source) for source in (other, fmt)]
        existing = [path for path in sources if path.exists()]
        if not existing:
            continue
        _, rows = read_table(existing[0])
        written.append(emit_report(rows, table, out_dir, fmt))
    return written
