import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from photolyase_onset import ReactionParams, ps_pseudo_first_order
from photolyase_onset.cli import RunConfig, main
from photolyase_onset.formats import ConfigError, DataFormatError, parse_config, read_measurements


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


class TestConfig:
    def test_comments_and_blanks(self):
        assert parse_config("# hi\n\np0 = 1e-12  # trailing\nk=2e6\n") == {"p0": "1e-12", "k": "2e6"}

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="'bogus'"):
            RunConfig.from_text("simulate", "bogus=1\n")

    def test_foreign_key_ignored(self):
        cfg = RunConfig.from_text("simulate", "counts_per_molar=1e18\n")
        assert "counts_per_molar" not in cfg.values

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="counts_per_molar"):
            RunConfig.from_text("assay", "")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="'k'"):
            RunConfig.from_text("simulate", "k=fast\n")

    def test_bad_choice(self):
        with pytest.raises(ConfigError, match="model"):
            RunConfig.from_text("simulate", "model=third\n")

    def test_seed_override(self):
        assert RunConfig.from_text("assay", "counts_per_molar=1\nseed=3\n", seed=9)["seed"] == 9


class TestSimulate:
    def test_paper_defaults(self, tmp_path):
        out = str(tmp_path / "traj.csv")
        assert main(["simulate", "--out", out]) == 0
        header, data = read_csv(out)
        assert header == ["t_s", "ps_molar"]
        assert len(data) == 101
        assert np.all(np.diff(data[:, 1]) > 0)
        assert data[-1, 1] == pytest.approx(1e-12, rel=0.04)  # 5 half-lives: 1 - 1/32
        assert data[-1, 1] < 1e-12

    def test_empty_grid(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.cfg", "n_points=0\n")
        assert main(["simulate", "--config", cfg]) == 2
        assert "n_points" in capsys.readouterr().err

    def test_models_agree(self, tmp_path):
        outs = {}
        for model in ("pseudo_first", "second_exact", "ode"):
            cfg = write(tmp_path, f"{model}.cfg", f"model={model}\n")
            outs[model] = str(tmp_path / f"{model}.csv")
            assert main(["simulate", "--config", cfg, "--out", outs[model]]) == 0
        _, pf = read_csv(outs["pseudo_first"])
        _, so = read_csv(outs["second_exact"])
        _, ode = read_csv(outs["ode"])
        assert np.max(np.abs(pf[1:, 1] - so[1:, 1]) / so[1:, 1]) <= 0.01
        assert np.max(np.abs(ode[1:, 1] - so[1:, 1]) / so[1:, 1]) <= 1e-7

    def test_seventeen_digits(self, tmp_path):
        out = str(tmp_path / "t.csv")
        main(["simulate", "--out", out])
        line = open(out).read().splitlines()[5]
        assert all(len(cell.split("e")[0].replace(".", "")) == 17 for cell in line.split(","))

    def test_invalid_param_names_key(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.cfg", "p0=-1\n")
        assert main(["simulate", "--config", cfg]) == 2
        assert "p0" in capsys.readouterr().err


class TestBudget:
    def test_paper_parameters(self, capsys):
        assert main(["budget"]) == 0
        out = capsys.readouterr().out
        values = kv(out)
        assert float(values["required_photons"]) == pytest.approx(1.74e15, rel=0.01)
        assert float(values["fraction_absorbed"]) == pytest.approx(2.3025e-4, rel=5e-3)
        assert float(values["absorbance"]) == pytest.approx(1e-4, rel=1e-15)
        assert "0.0230 %" in out

    def test_no_gamma(self, tmp_path, capsys):
        cfg = write(tmp_path, "b.cfg", "gamma_count=0\n")
        assert main(["budget", "--config", cfg]) == 0
        assert float(kv(capsys.readouterr().out)["conversion_fraction"]) == 0.0

    def test_invalid_yield(self, tmp_path):
        cfg = write(tmp_path, "b.cfg", "quantum_yield=0\n")
        assert main(["budget", "--config", cfg]) == 2


ASSAY_CFG = "k=2e6\nt0=100\ncounts_per_molar=1e18\nn_withdrawals=10\nhorizon_halflives=3\n"


class TestAssay:
    def test_deterministic_files(self, tmp_path):
        cfg = write(tmp_path, "a.cfg", ASSAY_CFG)
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["assay", "--config", cfg, "--seed", "12", "--out", a]) == 0
        assert main(["assay", "--config", cfg, "--seed", "12", "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()
        assert open(a).readline().strip() == "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar"

    def test_before_onset(self, tmp_path, capsys):
        cfg = write(tmp_path, "a.cfg", "t0=5000\ncounts_per_molar=1e18\nwithdrawal_times=100,2000,4999,5000\n")
        assert main(["assay", "--config", cfg]) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1:]
        assert [int(r[1]) for r in rows] == [0, 0, 0, 0]

    def test_near_analytic(self, tmp_path):
        cfg = write(tmp_path, "a.cfg", ASSAY_CFG)
        out = str(tmp_path / "a.csv")
        main(["assay", "--config", cfg, "--out", out])
        params = ReactionParams(1e-12, 1e-10, 2e6, 100.0)
        _, data = read_csv(out)
        for t, bound, unbound, ps in data:
            true = ps_pseudo_first_order(params, t)
            assert abs(ps - true) <= 0.05 * true
            # binomial sd of the bound fraction at ~1e6 total counts
            n = bound + unbound
            f = true / 1e-12
            assert abs(ps - true) <= 3 * 1e-12 * np.sqrt(f * (1 - f) / n) + 1e-12 * 3 / n

    def test_no_partial_output(self, tmp_path):
        out = tmp_path / "a.csv"
        cfg = write(tmp_path, "a.cfg", "counts_per_molar=-1\n")
        assert main(["assay", "--config", cfg, "--out", str(out)]) == 2
        assert not out.exists()
        assert list(tmp_path.glob(".tmp-*")) == []


class TestRetrodict:
    def make_data(self, tmp_path, cpm="1e18"):
        cfg = write(tmp_path, "a.cfg", ASSAY_CFG.replace("1e18", cpm))
        out = str(tmp_path / "data.csv")
        assert main(["assay", "--config", cfg, "--seed", "1", "--out", out]) == 0
        return out

    def test_round_trip(self, tmp_path, capsys):
        data = self.make_data(tmp_path, "1e20")
        cfg = write(tmp_path, "r.cfg", "n_resamples=200\nseed=3\n")
        assert main(["retrodict", "--config", cfg, "--input", data]) == 0
        values = kv(capsys.readouterr().out)
        t0 = float(values["t0_hat"])
        lo, hi = float(values["ci_t0_low"]), float(values["ci_t0_high"])
        assert lo <= 100.0 <= hi
        assert abs(t0 - 100) < 1.0
        assert values["ci_method"] == "bootstrap"

    def test_identical_reports(self, tmp_path):
        data = self.make_data(tmp_path)
        cfg = write(tmp_path, "r.cfg", "n_resamples=100\n")
        a, b = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
        main(["retrodict", "--config", cfg, "--input", data, "--out", a])
        main(["retrodict", "--config", cfg, "--input", data, "--out", b])
        assert open(a).read() == open(b).read()

    def test_second_order_estimator(self, tmp_path, capsys):
        data = self.make_data(tmp_path)
        cfg = write(tmp_path, "r.cfg", "estimator=second_order\ns0=1e-10\nn_resamples=0\n")
        assert main(["retrodict", "--config", cfg, "--input", data]) == 0
        values = kv(capsys.readouterr().out)
        assert float(values["k_hat"]) == pytest.approx(2e6, rel=0.02)

    def test_one_row(self, tmp_path):
        path = write(tmp_path, "d.csv",
                     "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n1e3,10,90,1e-13\n")
        assert main(["retrodict", "--input", path]) == 3

    def test_non_numeric_cell(self, tmp_path, capsys):
        path = write(tmp_path, "d.csv",
                     "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n1e3,10,90,1e-13\n2e3,x,80,2e-13\n")
        assert main(["retrodict", "--input", path]) == 3
        assert "line 3" in capsys.readouterr().err

    def test_parse_error_line_number(self):
        with pytest.raises(DataFormatError) as exc:
            read_measurements("gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n1,2,3\n", 1e-12)
        assert exc.value.line == 2

    def test_fit_failure_exit(self, tmp_path):
        rows = "".join(f"{t},1000,0,1e-12\n" for t in (1e5, 2e5, 3e5))
        path = write(tmp_path, "d.csv", "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n" + rows)
        assert main(["retrodict", "--input", path]) == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "photolyase_onset", "budget"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "required_photons=" in proc.stdout
