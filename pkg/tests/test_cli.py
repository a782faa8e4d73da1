import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from levy_isamp import EstimateReport, TiltSolution
from levy_isamp.cli import main, parse_grid
from levy_isamp.config import PRESETS, ConfigError, load_config, parse_config, preset

VANILLA = {
    "model": {"lambda": 1.0, "b": [-0.2], "sigma": [[0.04]]},
    "payoff": {"kind": "vanilla_put", "strike": 1.0, "maturity": 1.0},
    "mc": {"n_samples": 20000, "seed": 5},
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cfg_file(tmp_path):
    def write(data, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data) if not isinstance(data, str) else data)
        return str(p)
    return write


class TestConfig:
    def test_presets_parse(self):
        for name in PRESETS:
            cfg = parse_config(preset(name))
            assert cfg.n_samples == 100_000
        assert parse_config(preset("vg-basket")).model.dim == 3
        assert parse_config(preset("vg-asian")).grid_cells == 100

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("vg-4d")

    @pytest.mark.parametrize("mutate, field", [
        (lambda d: d["mc"].update(n_sample=3), "mc.n_sample"),
        (lambda d: d.update(extra={}), "extra"),
        (lambda d: d["model"].update(sigma=[[-0.04]]), "model.sigma"),
        (lambda d: d["model"].update(b=["x"]), "model.b[0]"),
        (lambda d: d["model"].pop("lambda"), "model.lambda"),
        (lambda d: d["payoff"].update(kind="call"), "payoff.kind"),
        (lambda d: d["payoff"].update(strike=-1), "payoff.strike"),
        (lambda d: d["mc"].update(seed=2**64), "mc.seed"),
        (lambda d: d["mc"].update(workers=0), "mc.workers"),
        (lambda d: d["payoff"].update(averaging_dates=10), "payoff.averaging_dates"),
    ])
    def test_field_errors(self, mutate, field):
        d = json.loads(json.dumps(VANILLA))
        mutate(d)
        with pytest.raises(ConfigError) as exc:
            parse_config(d)
        assert str(exc.value).startswith(field)

    def test_non_pd_message(self):
        d = json.loads(json.dumps(VANILLA))
        d["model"]["sigma"] = [[-0.04]]
        with pytest.raises(ConfigError, match="sigma not positive definite"):
            parse_config(d)

    def test_asian_grid_multiple(self):
        d = preset("vg-asian")
        d["mc"]["grid_cells"] = 150
        with pytest.raises(ConfigError, match="multiple"):
            parse_config(d)

    def test_json_error_has_line(self, cfg_file):
        path = cfg_file('{\n  "model": {\n    "lambda": 1,,\n  }\n}')
        with pytest.raises(ConfigError, match=r":3:"):
            load_config(path)

    def test_grid_spec(self):
        np.testing.assert_allclose(parse_grid("-1:0:0.25"), [-1, -0.75, -0.5, -0.25, 0])
        np.testing.assert_allclose(parse_grid("0:0:1"), [0])
        with pytest.raises(ConfigError):
            parse_grid("1:0:0.5")


class TestOptimize:
    def test_vanilla(self, capsys, cfg_file):
        code, out, _ = run(["optimize", "--config", cfg_file(VANILLA)], capsys)
        assert code == 0
        d = json.loads(out)
        assert d["theta_bar"] == pytest.approx(-2.06, abs=0.01)
        sol = TiltSolution.from_dict(d)
        assert sol.measure.variant == "dirac"

    def test_basket(self, capsys):
        code, out, _ = run(["optimize", "--preset", "vg-basket"], capsys)
        d = json.loads(out)
        assert code == 0 and len(d["theta_bar"]) == 3 and d["gradient_norm"] <= 1e-8

    def test_non_pd_sigma(self, capsys, cfg_file):
        d = json.loads(json.dumps(VANILLA))
        d["model"]["sigma"] = [[0.04, 0.05], [0.05, 0.04]]
        d["model"]["b"] = [-0.2, -0.2]
        d["payoff"]["kind"] = "basket_put"
        code, _, err = run(["optimize", "--config", cfg_file(d)], capsys)
        assert code == 2 and "sigma not positive definite" in err

    def test_solver_error_exit_3(self, capsys, cfg_file):
        d = json.loads(json.dumps(VANILLA))
        d["payoff"]["strike"] = 0.0
        code, _, err = run(["optimize", "--config", cfg_file(d)], capsys)
        assert code == 3 and "NoInteriorPoint" in err

    def test_csv(self, capsys):
        code, out, _ = run(["optimize", "--preset", "vg-asian", "--output", "csv"], capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and rows[0] == ["time", "weight_1"] and len(rows) == 101
        assert float(rows[-1][0]) == pytest.approx(1.0)

    def test_missing_config(self, capsys):
        code, _, err = run(["optimize", "--config", "/nonexistent.json"], capsys)
        assert code == 2

    def test_bad_argument(self, capsys):
        code, _, _ = run(["optimize", "--seed", "-3"], capsys)
        assert code == 2


class TestPrice:
    def test_tilt_none_bytes_identical(self, capsys, cfg_file):
        path = cfg_file(VANILLA)
        _, a, _ = run(["price", "--config", path, "--tilt", "none", "--seed", "17"], capsys)
        _, b, _ = run(["price", "--config", path, "--tilt", "none", "--seed", "17"], capsys)
        assert a == b
        rep = EstimateReport.from_dict(json.loads(a))
        assert rep.seed == 17 and rep.measure_used.is_zero

    def test_auto_unbiased(self, capsys):
        _, a, _ = run(["price", "--preset", "vg-1d", "--tilt", "auto", "--n-samples", "100000", "--seed", "1"],
                      capsys)
        _, b, _ = run(["price", "--preset", "vg-1d", "--tilt", "none", "--n-samples", "1000000", "--seed", "2"],
                      capsys)
        a, b = json.loads(a), json.loads(b)
        assert abs(a["estimate"] - b["estimate"]) <= 4 * math.hypot(a["std_error"], b["std_error"])

    def test_asian_report_has_grid_measure(self, capsys, cfg_file):
        d = preset("vg-asian")
        d["payoff"]["strike"] = 0.9
        d["payoff"]["averaging_dates"] = 20
        d["mc"].update(grid_cells=20, n_samples=5000)
        code, out, _ = run(["price", "--config", cfg_file(d)], capsys)
        m = json.loads(out)["measure_used"]
        assert code == 0 and m["type"] == "grid" and len(m["times"]) == 20

    def test_tilt_file(self, capsys, cfg_file, tmp_path):
        path = cfg_file(VANILLA)
        _, sol, _ = run(["optimize", "--config", path], capsys)
        tilt = tmp_path / "tilt.json"
        tilt.write_text(sol)
        _, a, _ = run(["price", "--config", path, "--tilt", str(tilt)], capsys)
        _, b, _ = run(["price", "--config", path, "--tilt", "auto"], capsys)
        assert a == b

    def test_tilt_file_dimension_mismatch(self, capsys, cfg_file, tmp_path):
        tilt = tmp_path / "tilt.json"
        tilt.write_text(json.dumps({"type": "dirac", "times": [1.0], "weights": [[-1, -1]], "horizon": 1.0}))
        code, _, _ = run(["price", "--config", cfg_file(VANILLA), "--tilt", str(tilt)], capsys)
        assert code == 2

    def test_csv(self, capsys):
        code, out, _ = run(["price", "--preset", "vg-1d", "--n-samples", "1000", "--output", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and rows[0]["n_samples"] == "1000"

    def test_timing_flag(self, capsys):
        _, out, _ = run(["price", "--preset", "vg-1d", "--n-samples", "1000", "--timing"], capsys)
        assert json.loads(out)["elapsed_seconds"] > 0

    def test_workers_env(self, capsys, monkeypatch):
        argv = ["price", "--preset", "vg-1d", "--n-samples", "30000"]
        _, a, _ = run(argv, capsys)
        monkeypatch.setenv("LEVY_ISAMP_WORKERS", "4")
        _, b, _ = run(argv, capsys)
        assert a == b
        monkeypatch.setenv("LEVY_ISAMP_WORKERS", "zero")
        code, _, _ = run(argv, capsys)
        assert code == 2


class TestSweep:
    def test_csv(self, capsys):
        code, out, _ = run(["sweep", "--preset", "vg-1d", "--grid=-3:-1:0.5", "--n-samples", "20000"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and [float(r["theta"]) for r in rows] == [-3, -2.5, -2, -1.5, -1]
        assert set(rows[0]) == {"theta", "variance", "stderr"}

    def test_single_point(self, capsys):
        code, out, _ = run(["sweep", "--preset", "vg-1d", "--grid", "0:0:1", "--n-samples", "5000"], capsys)
        assert code == 0 and len(out.strip().splitlines()) == 2

    def test_multi_asset(self, capsys):
        code, _, err = run(["sweep", "--preset", "vg-basket"], capsys)
        assert code == 2

    def test_inadmissible_point(self, capsys):
        code, _, err = run(["sweep", "--preset", "vg-1d", "--grid=-5:-4:1", "--n-samples", "100"], capsys)
        assert code == 3 and "DomainError" in err


class TestTable:
    def test_table1(self, capsys):
        code, out, _ = run(["table", "table1", "--n-samples", "20000", "--seed", "3"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 11
        k_rows = [r for r in rows if r["section"] == "K"]
        thetas = [float(r["theta_star"]) for r in k_rows]
        np.testing.assert_allclose(thetas, [-2.84, -2.56, -2.24, -1.88, -1.54, -1.25], atol=0.01)
        assert all(float(r["variance_ratio"]) > 1 for r in rows)

    def test_table2_layout(self, capsys):
        code, out, _ = run(["table", "table2", "--n-samples", "5000", "--output", "json"], capsys)
        recs = json.loads(out)
        assert code == 0 and [r["section"] for r in recs].count("K_T3") == 7 and len(recs) == 19


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "levy_isamp", "optimize", "--preset", "vg-1d"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["theta_bar"] == pytest.approx(-2.06, abs=0.01)
