import csv
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from lcbayes.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from lcbayes.core import MixtureLogDensity, log_norm_const, mixture_to_plf

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("LCBAYES_UPDATE_GOLDEN") == "1"

TINY_SAMPLER = {"iterations": 6, "grid_size": 4}
TINY = {
    "sample-prior": {"n": 50, "sample_prior": {"draws": 2, "grid_size": 5}},
    "fit": {"n": 20, "prior": {"truncation": 2}, "sampler": TINY_SAMPLER},
    "table1": {
        "prior": {"truncation": 2},
        "sampler": TINY_SAMPLER,
        "table1": {"n_values": [20, 30], "points": [1.0, 2.0], "replications": 2},
    },
    "mle": {"n": 10, "sampler": {"grid_size": 4}},
    "rate": {"prior": {"truncation": 2}, "sampler": TINY_SAMPLER, "rate": {"n_values": [10, 20, 40], "replications": 1}},
}
OUTPUTS = {
    "sample-prior": ["prior_draws.csv", "prior_draws.json"],
    "fit": ["fit_chain.csv", "fit_grid.csv", "fit_meta.json", "fit_band.csv", "fit_modes.csv"],
    "table1": ["table1.csv", "table1_meta.json"],
    "mle": ["mle.json", "mle_density.csv"],
    "rate": ["rate.csv", "rate_slope.csv"],
}


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, command, cfg, *extra, name="cfg.json"):
    out = tmp_path / "out"
    code = main([command, "--config", str(write_config(tmp_path / name, cfg)), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestGoldenFiles:
    @pytest.mark.parametrize("command", sorted(TINY))
    def test_outputs_match_golden(self, tmp_path, command):
        code, out = run(tmp_path, command, TINY[command], "--seed", "7")
        assert code == EXIT_OK
        for name in OUTPUTS[command]:
            text = (out / name).read_text()
            golden = GOLDEN / command / name
            if UPDATE:
                golden.parent.mkdir(parents=True, exist_ok=True)
                golden.write_text(text)
            assert text == golden.read_text(), f"{command}/{name} differs from the golden file"

    def test_approx_layout(self, tmp_path):
        code, out = run(tmp_path, "approx", {"truth": {"family": "laplace"}, "approx": {"n": 1000}})
        assert code == EXIT_OK
        report = json.loads((out / "approx.json").read_text())
        golden = GOLDEN / "approx" / "keys.json"
        if UPDATE:
            golden.parent.mkdir(parents=True, exist_ok=True)
            golden.write_text(json.dumps(sorted(report), indent=1) + "\n")
        assert sorted(report) == json.loads(golden.read_text())


class TestDeterminism:
    @pytest.mark.parametrize("command", ["sample-prior", "fit", "table1"])
    def test_byte_identical(self, tmp_path, command):
        first = tmp_path / "a"
        second = tmp_path / "b"
        first.mkdir()
        second.mkdir()
        _, o1 = run(first, command, TINY[command])
        _, o2 = run(second, command, TINY[command])
        for name in OUTPUTS[command]:
            assert (o1 / name).read_bytes() == (o2 / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        _, o1 = run(tmp_path, "sample-prior", TINY["sample-prior"], "--seed", "1")
        a = (o1 / "prior_draws.csv").read_bytes()
        _, o2 = run(tmp_path, "sample-prior", TINY["sample-prior"], "--seed", "2")
        assert (o2 / "prior_draws.csv").read_bytes() != a

    def test_table1_jobs_invariant(self, tmp_path):
        _, o1 = run(tmp_path, "table1", TINY["table1"])
        a = (o1 / "table1.csv").read_bytes()
        _, o2 = run(tmp_path, "table1", TINY["table1"], "--jobs", "2")
        assert (o2 / "table1.csv").read_bytes() == a


class TestSamplePrior:
    def test_draws_integrate_to_one(self, tmp_path):
        cfg = {"n": 100, "sample_prior": {"draws": 5, "grid_size": 8}}
        code, out = run(tmp_path, "sample-prior", cfg)
        assert code == EXIT_OK
        draws = json.loads((out / "prior_draws.json").read_text())["draws"]
        assert len(draws) == 5
        rows = read_csv(out / "prior_draws.csv")
        assert rows[0] == ["draw", "x", "density"]
        for d in draws:
            m = MixtureLogDensity(tuple(d["support"]), d["knots"], d["weights"], d["gamma1"], d["gamma2"])
            w = mixture_to_plf(m)
            assert w.is_concave()
            # density values in the CSV are exp(W - log Z), so they integrate to one
            x = np.array([float(r[1]) for r in rows[1:] if int(r[0]) == d["draw"]])
            f = np.array([float(r[2]) for r in rows[1:] if int(r[0]) == d["draw"]])
            np.testing.assert_allclose(f, np.exp(w(x) - log_norm_const(w)), rtol=1e-12)
            lz = log_norm_const(w)
            total = sum(
                integrate.quad(lambda t: math.exp(float(w(t)) - lz), lo, hi, epsabs=0.0, epsrel=1e-12)[0]
                for lo, hi in zip(w.breakpoints[:-1], w.breakpoints[1:])
            )
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_zero_draws(self, tmp_path):
        code, out = run(tmp_path, "sample-prior", {"sample_prior": {"draws": 0}})
        assert code == EXIT_OK
        assert (out / "prior_draws.csv").read_text() == "draw,x,density\n"


class TestFit:
    def test_fixed_mode_default_support(self, tmp_path):
        code, out = run(tmp_path, "fit", {**TINY["fit"], "n": 500}, "--mode", "fixed")
        assert code == EXIT_OK
        meta = json.loads((out / "fit_meta.json").read_text())
        half = 2.3 * math.log(500)
        assert meta["initial_support"] == pytest.approx([-half, half])
        assert meta["support_mode"] == "fixed"

    def test_fixed_mode_violation(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        data.write_text("x\n0.05\n0.5\n0.07\n")
        cfg = {**TINY["fit"], "data_path": str(data), "prior": {"truncation": 2, "support": {"kind": "fixed", "a": 0.0, "b": 0.1}}}
        code, _ = run(tmp_path, "fit", cfg)
        assert code == EXIT_DATA
        assert "0.5" in capsys.readouterr().err

    def test_band_columns(self, tmp_path):
        code, out = run(tmp_path, "fit", TINY["fit"], "--mode", "hierarchical")
        assert code == EXIT_OK
        rows = read_csv(out / "fit_band.csv")
        assert rows[0] == ["x", "mean", "lower", "upper", "truth"]
        for r in rows[1:]:
            x, mean, lo, hi, f0 = map(float, r)
            assert 0.0 <= lo <= hi
        modes = read_csv(out / "fit_modes.csv")
        assert modes[0] == ["left", "right", "count"]
        assert sum(int(r[2]) for r in modes[1:]) == 3

    def test_supplied_data_has_no_truth_column(self, tmp_path):
        data = tmp_path / "data.csv"
        data.write_text("0.1\n0.4\n0.9\n1.3\n")
        code, out = run(tmp_path, "fit", {**TINY["fit"], "data_path": str(data)})
        assert code == EXIT_OK
        assert read_csv(out / "fit_band.csv")[0] == ["x", "mean", "lower", "upper"]


class TestTable1:
    def test_single_replication_cells_binary(self, tmp_path):
        cfg = {**TINY["table1"], "table1": {"n_values": [20, 30, 40], "replications": 1}}
        code, out = run(tmp_path, "table1", cfg)
        assert code == EXIT_OK
        rows = read_csv(out / "table1.csv")
        assert rows[0] == ["n", "x=0.5", "x=1", "x=1.5", "x=2", "x=2.5", "x=3"]
        assert [r[0] for r in rows[1:]] == ["20", "30", "40"]
        assert all(float(c) in (0.0, 1.0) for r in rows[1:] for c in r[1:])


class TestMle:
    def test_two_points_uniform(self, tmp_path):
        data = tmp_path / "two.csv"
        data.write_text("0.3\n0.7\n")
        code, out = run(tmp_path, "mle", {"data_path": str(data), "sampler": {"grid_size": 5}})
        assert code == EXIT_OK
        res = json.loads((out / "mle.json").read_text())
        assert res["breakpoints"] == [0.3, 0.7]
        assert res["values"][0] == pytest.approx(res["values"][1], abs=1e-12)
        dens = [float(r[1]) for r in read_csv(out / "mle_density.csv")[1:]]
        np.testing.assert_allclose(dens, 2.5, atol=1e-8)


class TestApprox:
    def test_laplace_all_flags(self, tmp_path):
        code, out = run(tmp_path, "approx", {"truth": {"family": "laplace"}, "approx": {"n": 10_000}})
        assert code == EXIT_OK
        report = json.loads((out / "approx.json").read_text())
        assert len(report["properties"]) == 5
        assert all(report["properties"].values())


class TestExitCodes:
    def test_unknown_field(self, tmp_path, capsys):
        code, _ = run(tmp_path, "fit", {"iterations": 10})
        assert code == EXIT_CONFIG
        assert "field iterations" in capsys.readouterr().err

    def test_bad_value_names_field(self, tmp_path, capsys):
        code, _ = run(tmp_path, "fit", {"sampler": {"iterations": 10, "burn_in": 10}})
        assert code == EXIT_CONFIG
        assert "field sampler" in capsys.readouterr().err

    def test_malformed_json_reports_position(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "n": 10,\n  "seed": }\n')
        assert main(["fit", "--config", str(path)]) == EXIT_CONFIG
        assert "line 3 column" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["fit", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_schema_version(self, tmp_path):
        code, _ = run(tmp_path, "mle", {"schema_version": 2})
        assert code == EXIT_CONFIG

    def test_seed_range(self, tmp_path):
        assert main(["mle", "--seed", str(2**64), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_jobs_must_be_positive(self, tmp_path):
        assert main(["mle", "--jobs", "0", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_data_file(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        data.write_text("x\n0.1\nabc\n")
        code, _ = run(tmp_path, "mle", {"data_path": str(data)})
        assert code == EXIT_DATA
        assert "data.csv:3" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path):
        code, _ = run(tmp_path, "mle", {"data_path": str(tmp_path / "none.csv")})
        assert code == EXIT_DATA

    def test_no_partial_outputs_on_failure(self, tmp_path):
        data = tmp_path / "data.csv"
        data.write_text("1.0\n1.0\n")
        code, out = run(tmp_path, "fit", {**TINY["fit"], "data_path": str(data)})
        assert code == EXIT_DATA
        assert not out.exists() or not any(out.iterdir())
