import pytest

from fedbias.config import ExperimentConfig, load_config, parse_config
from fedbias.exceptions import ConfigurationError
from fedbias.federation import Mode
from fedbias.nn import HeadMode, OptimizerKind

_BASE = {
    "data.num_classes": "2",
    "data.num_groups": "2",
    "data.feature_dim": "3",
    "data.samples_per_group": "50",
}

MINIMAL = "".join(f"{key} = {value}\n" for key, value in _BASE.items())


def cfg(text=None, **extra) -> ExperimentConfig:
    if text is not None:
        return parse_config(text)
    entries = dict(_BASE)
    for key, value in extra.items():
        entries[key.replace("__", ".")] = value
    return parse_config("".join(f"{k} = {v}\n" for k, v in entries.items()))


class TestParsing:
    def test_defaults(self):
        c = cfg()
        assert c.rounds == 30
        assert c.num_clients == 5
        assert c.local_epochs == 3
        assert c.batch_size == 128
        assert c.learning_rate == 1e-4
        assert c.weight_decay == 3e-4
        assert c.optimizer_kind is OptimizerKind.ADAM
        assert c.modes == (Mode.DBFED,)
        assert c.master_seed == 0
        assert c.eval_every == 1
        assert c.test_fraction == 0.2
        assert c.hidden_widths == (16,)
        assert c.bias_strength == 0.0
        assert c.parallel_clients is False
        assert c.output_path is None

    def test_comments_and_blank_lines_ignored(self):
        c = parse_config(
            "# leading comment\n\ndata.num_classes = 3\n"
            "data.num_groups = 2\ndata.feature_dim = 4\ndata.samples_per_group = 10\n"
        )
        assert c.num_classes == 3

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigurationError, match=r"line 5.*data\.num_classses"):
            cfg(MINIMAL + "data.num_classses = 2\n")

    def test_duplicate_key_reports_line(self):
        with pytest.raises(ConfigurationError, match=r"line 5.*duplicate"):
            cfg(MINIMAL + "data.num_classes = 4\n")

    def test_malformed_line_reports_line(self):
        with pytest.raises(ConfigurationError, match=r"line 2"):
            parse_config("data.num_classes = 2\nno equals sign here\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(ConfigurationError, match=r"line 1"):
            parse_config("data.num_classes = two\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigurationError, match=r"data\.num_groups"):
            parse_config("data.num_classes = 2\n")

    def test_synthetic_requires_shape_keys(self):
        with pytest.raises(ConfigurationError, match=r"feature_dim"):
            parse_config(
                "data.num_classes = 2\ndata.num_groups = 2\ndata.samples_per_group = 10\n"
            )

    def test_csv_source_requires_path(self):
        with pytest.raises(ConfigurationError, match=r"csv_path"):
            parse_config("data.source = csv\ndata.num_classes = 2\ndata.num_groups = 2\n")

    def test_unknown_source_rejected(self):
        with pytest.raises(ConfigurationError, match=r"data\.source"):
            cfg(data__source="sql")

    def test_hidden_widths_variants(self):
        assert cfg(model__hidden="32,16").hidden_widths == (32, 16)
        assert cfg(model__hidden="8").hidden_widths == (8,)
        assert cfg(model__hidden="none").hidden_widths == ()
        with pytest.raises(ConfigurationError):
            cfg(model__hidden="16,-4")

    def test_modes_parsing(self):
        c = cfg(run__modes="fedavg,local,dbfed")
        assert c.modes == (Mode.FEDAVG_PLAIN, Mode.LOCAL_ONLY, Mode.DBFED)
        with pytest.raises(ConfigurationError):
            cfg(run__modes="fedavg,secure")
        with pytest.raises(ConfigurationError, match=r"repeat"):
            cfg(run__modes="dbfed,dbfed")

    def test_bool_parsing(self):
        assert cfg(federation__parallel_clients="true").parallel_clients is True
        assert cfg(federation__parallel_clients="false").parallel_clients is False
        with pytest.raises(ConfigurationError):
            cfg(federation__parallel_clients="yes please")

    def test_fraction_bounds(self):
        with pytest.raises(ConfigurationError):
            cfg(data__test_fraction="0.0")
        with pytest.raises(ConfigurationError):
            cfg(data__test_fraction="1.0")

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.cfg")

    def test_load_config_round_trip(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(MINIMAL, encoding="utf-8")
        assert load_config(path).num_classes == 2


class TestDerivedObjects:
    def test_with_overrides(self):
        c = cfg()
        assert c.with_master_seed(42).master_seed == 42
        assert c.with_modes((Mode.LOCAL_ONLY,)).modes == (Mode.LOCAL_ONLY,)
        # Originals untouched.
        assert c.master_seed == 0

    def test_classifier_spec_head_tracks_mode(self):
        c = cfg()
        assert c.classifier_spec(Mode.DBFED, 3).head_mode is HeadMode.DOMAIN_INDEPENDENT
        assert c.classifier_spec(Mode.FEDAVG_PLAIN, 3).head_mode is HeadMode.PLAIN
        assert c.classifier_spec(Mode.DBFED, 3).input_dim == 3

    def test_federation_config_carries_settings(self):
        fc = cfg(federation__rounds="4", federation__clients="2").federation_config(Mode.DBFED)
        assert fc.rounds == 4
        assert fc.num_clients == 2
        assert fc.mode is Mode.DBFED

    def test_synthetic_seed_tracks_master_seed(self):
        a = cfg().synthetic_spec()
        b = cfg(run__master_seed="1").synthetic_spec()
        assert a.seed != b.seed
        assert a.seed == cfg().synthetic_spec().seed

    def test_synthetic_spec_unavailable_for_csv(self, tmp_path):
        c = cfg(
            "data.source = csv\ndata.num_classes = 2\ndata.num_groups = 2\n"
            f"data.csv_path = {tmp_path / 'x.csv'}\n"
        )
        with pytest.raises(ConfigurationError):
            c.synthetic_spec()

    def test_split_and_partition_sizes(self):
        c = cfg(federation__clients="4")
        parts, test = c.split_and_partition(c.load_dataset())
        # 2 groups x 50 samples, 20% test.
        assert len(test) == 20
        assert sorted(len(p) for p in parts) == [20, 20, 20, 20]

    def test_split_rejects_empty_test(self):
        c = cfg(data__samples_per_group="1", data__test_fraction="0.05")
        with pytest.raises(ConfigurationError, match=r"test split"):
            c.split_and_partition(c.load_dataset())
