import pytest

from checkins.config import load_config, read_config_file
from checkins.dimensions import ViewKind
from checkins.evaluation import SplitSpec
from checkins.exceptions import ConfigError


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'run.conf'
    path.write_text(
        '# weekly analysis with a stricter threshold\n'
        'delta = 0.25\n'
        'time_unit = week\n'
        '\n'
        'seed = 3   # fixed\n'
        'k = 10,1,5,5\n'
    )
    return path


class TestLoadConfig:

    def test_defaults_come_from_settings(self, settings):
        config = load_config()
        assert config.seed == settings.LBSN_PIPELINE['seed']
        assert config.split_spec == SplitSpec()
        assert config.target == ViewKind.ROOT
        assert config.dataset_name == 'default', 'without a dataset the name falls back to default'

    def test_file_overrides_defaults_and_flags_override_the_file(self, config_file):
        config = load_config(config_file, {'seed': 9, 'delta': None})

        assert config.seed == 9, 'command-line values win over the file'
        assert config.delta == 0.25, 'unset flags keep the file value'
        assert config.time_unit == 'week'
        assert config.k == '1,5,10', 'K values are sorted and de-duplicated'
        assert config.ks == (1, 5, 10)

    def test_dataset_name_defaults_to_the_file_stem(self, tmp_path):
        dataset = tmp_path / 'dataset_1.tsv'
        dataset.write_text('')
        assert load_config(overrides={'dataset': str(dataset)}).dataset_name == 'dataset_1'

    def test_users_and_window(self):
        config = load_config(overrides={'users': ' 3, 1 ,', 'since': '2012-04-01', 'until': '2012-06-30'})
        assert config.user_ids == ['3', '1']
        assert config.since.month == 4 and config.until.day == 30

    def test_reports_every_bad_field(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config(overrides={'split': '0.5,0.5,0.5', 'k': '0', 'epochs': -1})
        assert set(excinfo.value.errors) == {'split', 'k', 'epochs'}

    def test_missing_dataset_file(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_config(overrides={'dataset': str(tmp_path / 'absent.tsv')})
        assert 'dataset' in excinfo.value.errors

    def test_window_order(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config(overrides={'since': '2012-06-01', 'until': '2012-04-01'})
        assert 'until' in excinfo.value.errors

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            load_config(overrides={'colour': 'blue'})

    def test_choices_are_enforced(self):
        with pytest.raises(ConfigError) as excinfo:
            load_config(overrides={'target_view': 'branch', 'time_unit': 'day'})
        assert set(excinfo.value.errors) == {'target_view', 'time_unit'}


class TestConfigFile:

    def test_comments_and_blank_lines(self, config_file):
        assert read_config_file(config_file) == {'delta': '0.25', 'time_unit': 'week', 'seed': '3', 'k': '10,1,5,5'}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'run.conf'
        path.write_text('learning_rat = 0.1\n')
        with pytest.raises(ConfigError) as excinfo:
            read_config_file(path)
        assert 'learning_rat' in excinfo.value.errors

    def test_line_without_value(self, tmp_path):
        path = tmp_path / 'run.conf'
        path.write_text('epochs\n')
        with pytest.raises(ConfigError):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / 'absent.conf')


class TestManifestConfig:

    def test_hash_ignores_the_output_directory(self):
        first = load_config(overrides={'out_dir': 'runs/a'})
        second = load_config(overrides={'out_dir': 'runs/b'})
        assert first.config_hash() == second.config_hash()
        assert 'out_dir' not in first.manifest_config()
        assert list(first.manifest_config()) == sorted(first.manifest_config())

    def test_hash_follows_the_seed(self):
        assert load_config(overrides={'seed': 1}).config_hash() != load_config(overrides={'seed': 2}).config_hash()
