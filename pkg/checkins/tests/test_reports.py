import pytest

from checkins.config import load_config
from checkins.exceptions import DatasetIOError
from checkins.reports import (
    CSV, JSON, TABLES, convert_reports, emit_report, file_sha256, read_manifest, read_table, write_manifest,
)

TOPK = TABLES['topk']


@pytest.fixture
def topk_rows():
    return [
        {'method': 'unified_model', 'k': 1, 'queries': 10, 'accuracy': 0.5},
        {'method': 'most_popular', 'k': 1, 'queries': 10, 'accuracy': 0.25},
    ]


class TestEmitReport:

    def test_csv_opens_with_the_manifest_line(self, tmp_path, topk_rows):
        path = emit_report(topk_rows, TOPK, tmp_path)

        lines = path.read_text().splitlines()
        assert path.name == 'topk.csv'
        assert lines[0] == '# manifest: manifests/evaluate.json'
        assert lines[1] == 'method,k,queries,accuracy', 'columns follow the table declaration'
        assert lines[2] == 'unified_model,1,10,0.5'

    def test_floats_keep_six_significant_digits(self, tmp_path):
        rows = [{'method': 'unified_model', 'k': 5, 'queries': 3, 'accuracy': 0.123456789}]
        path = emit_report(rows, TOPK, tmp_path)
        assert path.read_text().splitlines()[2] == 'unified_model,5,3,0.123457'

    def test_empty_result_writes_only_the_header(self, tmp_path):
        path = emit_report([], TOPK, tmp_path)
        assert path.read_text() == '# manifest: manifests/evaluate.json\nmethod,k,queries,accuracy\n'

    def test_nan_becomes_null(self, tmp_path):
        rows = [{'method': 'most_popular', 'k': 1, 'queries': 0, 'accuracy': float('nan')}]
        path = emit_report(rows, TOPK, tmp_path, JSON)

        reference, loaded = read_table(path)

        assert reference == 'manifests/evaluate.json'
        assert loaded[0]['accuracy'] is None
        assert b'"accuracy": null' in path.read_bytes()

    def test_csv_and_json_carry_the_same_rows(self, tmp_path, topk_rows):
        _, from_csv = read_table(emit_report(topk_rows, TOPK, tmp_path, CSV))
        _, from_json = read_table(emit_report(topk_rows, TOPK, tmp_path, JSON))
        assert from_csv == from_json == topk_rows

    def test_identifiers_stay_strings(self, tmp_path):
        rows = [{'category_id': '0042', 'records': 3}]
        _, loaded = read_table(emit_report(rows, TABLES['ingest_unknown_categories'], tmp_path))
        assert loaded == [{'category_id': '0042', 'records': 3}], 'leading zeros must survive a CSV read'

    def test_unknown_format(self, tmp_path, topk_rows):
        with pytest.raises(ValueError):
            emit_report(topk_rows, TOPK, tmp_path, 'xlsx')

    def test_unwritable_directory(self, tmp_path, topk_rows):
        blocker = tmp_path / 'blocker'
        blocker.write_text('')
        with pytest.raises(DatasetIOError):
            emit_report(topk_rows, TOPK, blocker)


class TestConvertReports:

    def test_csv_tables_are_re_emitted_as_json(self, tmp_path, topk_rows):
        emit_report(topk_rows, TOPK, tmp_path)

        written = convert_reports(tmp_path, JSON)

        assert [path.name for path in written] == ['topk.json']
        reference, rows = read_table(written[0])
        assert reference == 'manifests/evaluate.json'
        assert rows == topk_rows

    def test_nothing_to_convert(self, tmp_path):
        assert convert_reports(tmp_path, CSV) == []


class TestManifest:

    def test_keys_and_stage(self, tmp_path):
        config = load_config(overrides={'out_dir': str(tmp_path)})

        path = write_manifest(tmp_path, 'ingest', 'abc123', config)
        manifest = read_manifest(path)

        assert path == tmp_path / 'manifests' / 'ingest.json'
        assert sorted(manifest) == ['config', 'config_hash', 'dataset_hash', 'seed', 'stage', 'version']
        assert manifest['stage'] == 'ingest' and manifest['dataset_hash'] == 'abc123'
        assert manifest['config_hash'] == config.config_hash()
        assert 'out_dir' not in manifest['config'], 'manifests must not depend on where the run was written'

    def test_same_configuration_same_bytes(self, tmp_path):
        first = write_manifest(tmp_path / 'a', 'train', 'h', load_config(overrides={'out_dir': 'runs/a'}))
        second = write_manifest(tmp_path / 'b', 'train', 'h', load_config(overrides={'out_dir': 'runs/b'}))
        assert first.read_bytes() == second.read_bytes()

    def test_file_hash_covers_every_file(self, tmp_path):
        one, two = tmp_path / 'one.txt', tmp_path / 'two.txt'
        one.write_text('a')
        two.write_text('b')
        assert file_sha256(one, two) != file_sha256(one)
        assert file_sha256(one, two) == file_sha256(one, two)
