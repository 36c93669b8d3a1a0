import json
import math
import subprocess
import sys

import numpy as np
import pytest

from funcar.arh import SamplePath
from funcar.cli import main
from funcar.config import KEYS, ExperimentConfig, build_model, load_config, parse_config
from funcar.errors import ConfigError

CONFIG = """\
# small complete-regime experiment
basis.dimension = 6
model.lambda_decay = 2.0     # R0 eigenvalues j^-2
model.mu_decay = 3.0
experiment.n_grid = 32, 64, 128
experiment.replications = 2
report.p_norms = 2, inf
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG)
    return path


class TestConfig:
    def test_parse(self, cfg_file):
        cfg = load_config(cfg_file, env={})
        assert cfg.dimension == 6 and cfg.n_grid == (32, 64, 128)
        assert cfg.p_norms == (2.0, math.inf)
        assert cfg.alpha_rule == "tuned" and cfg.regime == "complete"

    def test_defaults_cover_every_key(self):
        cfg = ExperimentConfig.from_mapping(parse_config(""))
        assert cfg == ExperimentConfig()
        assert set(parse_config("")) == set(KEYS)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("model.lamda_decay = 2")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("basis.dimension = 3\nbasis.dimension = 4")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_config("basis.dimension = 3\nnot a key value line")

    @pytest.mark.parametrize("text", [
        "experiment.n_grid = 64, 32",
        "experiment.n_grid = 2, 8, 16",
        "experiment.replications = 0",
        "report.p_norms = 3",
        "basis.dimension = three",
        "observation.regime = dense",
        "alpha.rule = fixed\nalpha.value = -1",
    ])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping(parse_config(text))

    def test_sparse_tuning_needs_smooth_space(self):
        with pytest.raises(ConfigError, match="sobolev_order"):
            ExperimentConfig(regime="sparse", sobolev_order=1.0)

    def test_seed_env_override(self, cfg_file):
        assert load_config(cfg_file, env={"FUNCAR_SEED": "41"}).base_seed == 41

    def test_matrix_model(self, tmp_path):
        rho = np.array([[0.5, 0.1], [0.0, 0.3]])
        np.savetxt(tmp_path / "rho.csv", rho, delimiter=",")
        np.savetxt(tmp_path / "noise.csv", np.eye(2), delimiter=",")
        (tmp_path / "m.cfg").write_text(
            "basis.dimension = 2\nmodel.kind = matrix\nmodel.rho_file = rho.csv\nmodel.noise_file = noise.csv\n")
        model = build_model(load_config(tmp_path / "m.cfg", env={}))
        np.testing.assert_array_equal(model.rho.coords, rho)

    def test_rotated_diagonal_model(self):
        model = build_model(ExperimentConfig(dimension=5, rotation_seed=3))
        lam = np.sort(np.linalg.eigvalsh(model.r0.coords))[::-1]
        np.testing.assert_allclose(lam, np.arange(1, 6) ** -2.0, atol=1e-12)

    def test_non_stationary_model_is_config_error(self):
        with pytest.raises(ConfigError):
            build_model(ExperimentConfig(dimension=3, mu_scale=1.5))


class TestCli:
    def test_simulate_and_estimate(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "path.csv"
        assert main(["simulate", "--config", str(cfg_file), "--n", "200", "--seed", "3", "--out", str(out)]) == 0
        path = SamplePath.from_csv(out)
        assert path.n == 200 and path.basis.dimension == 6
        est = tmp_path / "est.json"
        assert main(["estimate", "--path", str(out), "--config", str(cfg_file), "--alpha", "0.1",
                     "--p", "2", "--p", "inf", "--truth", "--out", str(est)]) == 0
        data = json.loads(est.read_text())
        assert data["alpha"] == 0.1 and data["regime"] == "complete"
        assert np.asarray(data["rho_hat"]).shape == (6, 6)
        assert set(data["errors_sq"]) == {"2", "inf"}

    def test_estimate_default_alpha_is_tuned(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "path.csv"
        main(["simulate", "--config", str(cfg_file), "--n", "256", "--out", str(out)])
        assert main(["estimate", "--path", str(out)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["alpha"] == pytest.approx(256 ** -0.25)

    def test_estimate_sparse(self, tmp_path, capsys):
        from funcar.arh import simulate
        from funcar.estimators import sparse_observe

        model = build_model(ExperimentConfig(dimension=5, sobolev_order=2))
        design = sparse_observe(simulate(model, 30, seed=0), 12, 0.05, seed=0)
        design.to_csv(tmp_path / "d.csv")
        assert main(["estimate", "--sparse", str(tmp_path / "d.csv"), "--dimension", "5",
                     "--sobolev-order", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["regime"] == "sparse" and data["m"] == 12
        assert data["meta"]["sigma2_hat"] > 0

    def test_rates(self, cfg_file, tmp_path):
        out = tmp_path / "rates"
        assert main(["rates", "--config", str(cfg_file), "--out", str(out)]) == 0
        lines = (out / "rates.csv").read_text().splitlines()
        assert lines[0] == "n,rep,p,alpha,err_rho_sq,err_r0_sq,err_r1_sq"
        assert len(lines) == 1 + 3 * 2 * 2
        assert json.loads((out / "rates.json").read_text())["config"]["dimension"] == 6

    def test_check_source(self, cfg_file, capsys):
        assert main(["check-source", "--config", str(cfg_file), "--p", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["satisfied"] and data["w_norm"] == pytest.approx(
            0.8 * math.sqrt(sum(j ** -2.0 for j in range(1, 7))), rel=1e-8)

    def test_check_source_budget(self, cfg_file, capsys):
        assert main(["check-source", "--config", str(cfg_file), "--p", "inf", "--budget", "0.5"]) == 0
        assert not json.loads(capsys.readouterr().out)["satisfied"]

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("no.such.key = 1\n")
        assert main(["rates", "--config", str(bad)]) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_missing_input_exit_code(self, tmp_path, capsys):
        assert main(["estimate", "--path", str(tmp_path / "missing.csv")]) == 1

    def test_numerical_failure_exit_code(self, cfg_file, monkeypatch, capsys):
        import funcar.cli as cli
        from funcar.errors import NumericalError

        def fail(*a, **k):
            raise NumericalError("synthetic breakdown")

        monkeypatch.setattr(cli, "run_rate_experiment", fail)
        assert main(["rates", "--config", str(cfg_file)]) == 2

    def test_module_entry_point(self, cfg_file, tmp_path):
        out = tmp_path / "p.csv"
        res = subprocess.run([sys.executable, "-m", "funcar", "simulate", "--config", str(cfg_file),
                              "--n", "5", "--out", str(out)], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        assert len(out.read_text().splitlines()) == 6
