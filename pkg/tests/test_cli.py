import json

import numpy as np
import pytest

from ppselect.cli import main
from ppselect.geometry import Window
from ppselect.harness import WINDOW_PRESETS, make_fields
from ppselect.io import read_csv, read_pattern, write_raster


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def sim_inputs(tmp_path_factory):
    """A small simulated pattern plus raster files for the fit commands."""
    root = tmp_path_factory.mktemp("cli")
    pattern = root / "pattern.csv"
    code = main(["simulate", "--domain", "small", "--p", "4",
                 "--seed", "3", "--out", str(pattern)])
    assert code == 0
    fields = make_fields(WINDOW_PRESETS["small"], 3)
    rasters = {}
    for name, field in fields.items():
        path = root / f"{name}.txt"
        write_raster(field, path)
        rasters[name] = path
    return pattern, rasters


def fit_args(pattern, rasters, *extra):
    argv = ["fit", "--pattern", str(pattern)]
    for name, path in rasters.items():
        argv += ["--covariate", f"{name}={path}"]
    argv += list(extra)
    return argv


class TestSimulate:
    def test_reproducible_output(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, out, _ = run_cli(capsys, "simulate", "--domain", "small",
                                   "--p", "4", "--seed", "9",
                                   "--out", str(path))
            assert code == 0
            assert "wrote" in out
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_pattern(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(capsys, "simulate", "--domain", "small", "--p", "4",
                "--seed", "1", "--out", str(a))
        run_cli(capsys, "simulate", "--domain", "small", "--p", "4",
                "--seed", "2", "--out", str(b))
        assert a.read_bytes() != b.read_bytes()

    def test_pattern_file_is_loadable_and_in_window(self, tmp_path, capsys):
        out = tmp_path / "p.csv"
        run_cli(capsys, "simulate", "--window", "0,10,0,5", "--mu", "40",
                "--p", "3", "--out", str(out))
        pat = read_pattern(out)
        assert pat.window == Window(0, 10, 0, 5)
        assert pat.n > 0

    def test_thomas_accepts_cluster_arguments(self, tmp_path, capsys):
        out = tmp_path / "p.csv"
        code, _, _ = run_cli(capsys, "simulate", "--process", "thomas",
                             "--domain", "small", "--p", "4",
                             "--gamma", "10", "--seed", "5",
                             "--out", str(out))
        assert code == 0
        assert read_pattern(out).n > 0


class TestFit:
    def test_mle_to_stdout_with_json_diagnostics(self, sim_inputs, capsys):
        pattern, rasters = sim_inputs
        code, out, err = run_cli(capsys, *fit_args(pattern, rasters,
                                                   "--method", "mle"))
        assert code == 0
        header = out.splitlines()[0].split(",")
        assert header == ["column", "beta", "beta_original", "selected"]
        diag = json.loads(err.strip().splitlines()[-1])
        assert diag["method"] == "MLE"
        assert diag["kkt_residual"] < 1e-6

    def test_zero_lambda_al_matches_mle(self, sim_inputs, capsys):
        pattern, rasters = sim_inputs

        def coefficients(*extra):
            code, out, _ = run_cli(capsys,
                                   *fit_args(pattern, rasters, *extra))
            assert code == 0
            rows = out.strip().splitlines()[1:]
            return {r.split(",")[0]: float(r.split(",")[1]) for r in rows}

        ref = coefficients("--method", "mle")
        al = coefficients("--method", "al", "--lam", "0")
        for name in ref:
            assert al[name] == pytest.approx(ref[name], abs=1e-6)

    def test_bic_tuned_fit_writes_files(self, sim_inputs, tmp_path, capsys):
        pattern, rasters = sim_inputs
        prefix = tmp_path / "fit"
        code, out, _ = run_cli(capsys, *fit_args(
            pattern, rasters, "--method", "al", "--out", str(prefix)))
        assert code == 0
        table = read_csv(f"{prefix}_coefficients.csv")
        assert "selected_lambda" in out
        assert set(table["selected"]) <= {"0", "1"}

    def test_both_methods_write_separate_files(self, sim_inputs, tmp_path,
                                               capsys):
        pattern, rasters = sim_inputs
        prefix = tmp_path / "fit"
        code, _, _ = run_cli(capsys, *fit_args(
            pattern, rasters, "--method", "both", "--lam", "0.05",
            "--out", str(prefix)))
        assert code == 0
        al = read_csv(f"{prefix}_al_coefficients.csv")
        alds = read_csv(f"{prefix}_alds_coefficients.csv")
        assert al["column"] == alds["column"]

    def test_interaction_column(self, sim_inputs, capsys):
        pattern, rasters = sim_inputs
        code, out, _ = run_cli(capsys, *fit_args(
            pattern, rasters, "--interaction", "c01:c02",
            "--method", "mle"))
        assert code == 0
        assert "c01:c02" in out


class TestPath:
    def test_path_table_schema(self, sim_inputs, tmp_path, capsys):
        pattern, rasters = sim_inputs
        out_file = tmp_path / "path.csv"
        code, _, _ = run_cli(capsys, "path", "--pattern", str(pattern),
                             "--covariate",
                             f"c01={rasters['c01']}",
                             "--covariate",
                             f"c02={rasters['c02']}",
                             "--grid", "12:1e-3",
                             "--method", "al", "--out", str(out_file))
        assert code == 0
        table = read_csv(out_file)
        assert len(table["lambda"]) == 12
        assert sum(int(v) for v in table["selected"]) == 1
        assert "beta_intercept" in table
        lams = [float(v) for v in table["lambda"]]
        assert lams == sorted(lams, reverse=True)


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("bench") / "study.cfg"
    path.write_text(
        "process = poisson\nwindow = 0,250,0,125\nmu = 120\n"
        "p = 4\nreplicates = 2\nseed = 21\n"
    )
    return path


class TestBenchmark:
    def test_outputs_and_determinism(self, config_file, tmp_path, capsys):
        pre1, pre2 = tmp_path / "one", tmp_path / "two"
        for prefix in (pre1, pre2):
            code, out, _ = run_cli(capsys, "benchmark", "--config",
                                   str(config_file), "--out", str(prefix))
            assert code == 0
            assert "wrote" in out
        for suffix in ("_summary.csv", "_replicates.csv"):
            assert (tmp_path / f"one{suffix}").read_bytes() == \
                (tmp_path / f"two{suffix}").read_bytes()
        assert (tmp_path / "one_timing.csv").exists()

    def test_worker_override_keeps_results(self, config_file, tmp_path,
                                           capsys):
        pre1, pre2 = tmp_path / "w1", tmp_path / "w2"
        run_cli(capsys, "benchmark", "--config", str(config_file),
                "--out", str(pre1), "--workers", "1")
        run_cli(capsys, "benchmark", "--config", str(config_file),
                "--out", str(pre2), "--workers", "2")
        for suffix in ("_summary.csv", "_replicates.csv"):
            assert (tmp_path / f"w1{suffix}").read_bytes() == \
                (tmp_path / f"w2{suffix}").read_bytes()


class TestErrors:
    def test_missing_pattern_file_is_reported(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "fit", "--pattern",
                               str(tmp_path / "absent.csv"),
                               "--covariate", "v=nowhere.txt")
        assert code == 1
        assert err.startswith("error:")

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["fit"])          # --pattern is required
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_covariate_syntax(self, sim_inputs, capsys):
        pattern, _ = sim_inputs
        code, _, err = run_cli(capsys, "fit", "--pattern", str(pattern),
                               "--covariate", "oops")
        assert code == 1
        assert "NAME=RASTER" in err
