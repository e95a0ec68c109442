import numpy as np
import pytest

from cycinv import backend, cli, config, evaluate
from cycinv import train as train_mod


class TestConfigFormat:
    def test_empty_text_gives_defaults(self):
        cfg = config.parse_config("")
        assert cfg == config.TrainConfig()

    def test_parse_serialize_parse_fixed_point(self):
        text = "lambda_g1 = 2.5\nepochs = 3  # short run\n\nbatch_size = 16\n"
        cfg = config.parse_config(text)
        again = config.parse_config(config.serialize_config(cfg))
        assert cfg == again
        assert config.serialize_config(cfg) == config.serialize_config(again)

    def test_unknown_key_reports_line(self):
        with pytest.raises(config.ConfigError) as err:
            config.parse_config("epochs = 3\nlamda_g1 = 1.0\n")
        assert "lamda_g1" in str(err.value)
        assert "line 2" in str(err.value)

    def test_duplicate_key_rejected(self):
        with pytest.raises(config.ConfigError):
            config.parse_config("epochs = 3\nepochs = 4\n")

    def test_bad_value_type(self):
        with pytest.raises(config.ConfigError):
            config.parse_config("epochs = soon\n")
        with pytest.raises(config.ConfigError):
            config.parse_config("enable_z_cycle = yes\n")

    def test_validation(self):
        with pytest.raises(config.ConfigError):
            config.parse_config("lambda_g1 = -1\n")
        with pytest.raises(config.ConfigError):
            config.parse_config("train_fraction = 1.5\n")


TINY_CONFIG = """\
side = 8
n_classes = 4
latent_dim = 3
batch_size = 8
epochs = 1
train_fraction = 0.75
"""


@pytest.fixture(scope="module")
def tiny_setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data_path = root / "shapes.cycd"
    assert cli.main(["gen-data", "--out", str(data_path), "--n", "64",
                     "--classes", "4", "--side", "8", "--seed", "3"]) == 0
    cfg_path = root / "run.cfg"
    cfg_path.write_text(TINY_CONFIG)
    run_dir = root / "run"
    assert cli.main(["train", "--config", str(cfg_path), "--data", str(data_path),
                     "--out", str(run_dir)]) == 0
    return root, cfg_path, data_path, run_dir


class TestGenData:
    def test_balanced_output(self, tmp_path):
        out = tmp_path / "d.cycd"
        assert cli.main(["gen-data", "--out", str(out), "--n", "400",
                         "--classes", "4", "--side", "8", "--seed", "1"]) == 0
        from cycinv import data as data_mod

        ds = data_mod.load_dataset(out)
        assert all(int((ds.labels == c).sum()) == 100 for c in range(4))

    def test_repeat_invocation_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.cycd", tmp_path / "b.cycd"
        argv = ["gen-data", "--n", "16", "--classes", "4", "--side", "8", "--seed", "7"]
        assert cli.main(argv + ["--out", str(a)]) == 0
        assert cli.main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_indivisible_n_exits_2(self, tmp_path):
        code = cli.main(["gen-data", "--out", str(tmp_path / "x.cycd"),
                         "--n", "401", "--classes", "4", "--side", "8"])
        assert code == 2


class TestTrain:
    def test_run_directory_contents(self, tiny_setup):
        _, cfg_path, _, run_dir = tiny_setup
        assert (run_dir / "config.cfg").read_text() == cfg_path.read_text()
        assert (run_dir / "config.effective.cfg").exists()
        assert (run_dir / "checkpoint.cycc").exists()
        lines = (run_dir / "metrics.csv").read_text().splitlines()
        assert lines[0] == train_mod.CSV_HEADER

    def test_two_runs_identical_checkpoints(self, tiny_setup, tmp_path):
        _, cfg_path, data_path, run_dir = tiny_setup
        other = tmp_path / "run2"
        assert cli.main(["train", "--config", str(cfg_path), "--data", str(data_path),
                         "--out", str(other)]) == 0
        assert (other / "checkpoint.cycc").read_bytes() == (run_dir / "checkpoint.cycc").read_bytes()

    def test_ablation_fw_zeroes_backward_columns(self, tiny_setup, tmp_path):
        _, cfg_path, data_path, _ = tiny_setup
        out = tmp_path / "fw"
        assert cli.main(["train", "--config", str(cfg_path), "--data", str(data_path),
                         "--out", str(out), "--ablation", "fw"]) == 0
        rows = (out / "metrics.csv").read_text().splitlines()[1:]
        for row in rows:
            cells = row.split(",")
            assert cells[-1] == "0" and cells[-2] == "0"

    def test_unknown_config_key_exits_2(self, tiny_setup, tmp_path, capsys):
        root, _, data_path, _ = tiny_setup
        bad = tmp_path / "bad.cfg"
        bad.write_text("lamda_g1 = 1.0\n")
        code = cli.main(["train", "--config", str(bad), "--data", str(data_path),
                         "--out", str(tmp_path / "r")])
        assert code == 2
        err = capsys.readouterr().err
        assert "lamda_g1" in err and "line 1" in err

    def test_missing_config_exits_1(self, tiny_setup, tmp_path):
        _, _, data_path, _ = tiny_setup
        code = cli.main(["train", "--config", str(tmp_path / "none.cfg"),
                         "--data", str(data_path), "--out", str(tmp_path / "r")])
        assert code == 1


class TestEval:
    def test_reports_written_and_deterministic(self, tiny_setup, monkeypatch):
        _, _, _, run_dir = tiny_setup
        monkeypatch.setattr(evaluate, "PROBE_EPOCHS", 2)
        assert cli.main(["eval", "--run", str(run_dir), "--which", "both"]) == 0
        probes1 = (run_dir / "probes_report.csv").read_bytes()
        gls1 = (run_dir / "gls_report.csv").read_bytes()
        assert cli.main(["eval", "--run", str(run_dir), "--which", "both"]) == 0
        assert (run_dir / "probes_report.csv").read_bytes() == probes1
        assert (run_dir / "gls_report.csv").read_bytes() == gls1
        text = (run_dir / "probes_report.csv").read_text()
        assert text.splitlines()[0] == "factor,kind,role,metric,value,std,baseline"
        assert ",25" in text  # chance baseline for the specified factor

    def test_missing_run_exits_1(self, tmp_path):
        assert cli.main(["eval", "--run", str(tmp_path / "nope"), "--which", "probes"]) == 1


class TestSynth:
    def test_interpolation_grid(self, tiny_setup, tmp_path):
        _, _, _, run_dir = tiny_setup
        out = tmp_path / "interp.pgm"
        assert cli.main(["synth", "--run", str(run_dir), "--interpolate", "0", "1", "0", "2",
                         "--steps", "2", "--out", str(out)]) == 0
        img = evaluate.read_pgm(out)
        assert img.shape == (17, 17)  # 2x2 grid of 8x8 cells with separators

    def test_prior_grid(self, tiny_setup, tmp_path):
        _, _, _, run_dir = tiny_setup
        out = tmp_path / "prior.pgm"
        assert cli.main(["synth", "--run", str(run_dir), "--prior", "--class", "1",
                         "--n", "16", "--out", str(out)]) == 0
        assert out.read_bytes().startswith(b"P5\n35 35\n255\n")

    def test_index_out_of_range_exits_2(self, tiny_setup, tmp_path):
        _, _, _, run_dir = tiny_setup
        code = cli.main(["synth", "--run", str(run_dir), "--interpolate", "0", "999", "0", "1",
                         "--steps", "2", "--out", str(tmp_path / "x.pgm")])
        assert code == 2

    def test_negative_class_exits_2(self, tiny_setup, tmp_path):
        _, _, _, run_dir = tiny_setup
        code = cli.main(["synth", "--run", str(run_dir), "--prior", "--class", "-3",
                         "--n", "4", "--out", str(tmp_path / "x.pgm")])
        assert code == 2


class TestSelfcheck:
    def test_passes_and_lists_ops(self, capsys):
        assert cli.main(["selfcheck"]) == 0
        out = capsys.readouterr().out
        for name in ("grad.matmul.left", "grad.softmax_cross_entropy", "grad.mse",
                     "oracle.discriminator_loss", "oracle.backward_cycle_loss"):
            assert name in out
        assert "FAIL" not in out

    def test_injected_derivative_bug_is_caught(self, monkeypatch, capsys):
        real = backend.kernels.sigmoid_bwd

        def flipped(y, g):
            return -real(y, g)

        monkeypatch.setattr(backend.kernels, "sigmoid_bwd", flipped)
        assert cli.main(["selfcheck"]) != 0
        assert "FAIL" in capsys.readouterr().out


class TestUsage:
    def test_no_command_exits_2(self):
        assert cli.main([]) == 2

    def test_unknown_command_exits_2(self):
        assert cli.main(["transmogrify"]) == 2
