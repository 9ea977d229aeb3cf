import csv
import json

import pytest

from spmimo.runner import experiments
from spmimo.runner.cli import main
from spmimo.runner.experiments import RATE_COLUMNS, run_experiment
from spmimo.runner.specfile import BUILTIN_SPECS, SpecError, apply_scale, load_spec, parse_spec
from spmimo.runner.validation import validate_suite


def _write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("text, line, field", [
    ("scenario: rate\nsweep: {var: M, from: 1, to: 5, step: 1}\nschemes: [rp_k, nope]\n", 3,
     "schemes"),
    ("scenario: rate\nsweep:\n  var: Q\n  values: [1]\n", 3, "sweep.var"),
    ("scenario: rate\n", None, "sweep"),
    ("scenario: smoke\nn_fading: 10\n", 2, "n_fading"),
    ("scenario: smoke\nsystem:\n  M: 4\n  K: 8\n  tau_c: 4\n", 2, "system"),
    ("scenario: smoke\nbogus: 1\n", 2, "bogus"),
    ("scenario: smoke\nschemes: [sp_estsub]\nmc_schemes: []\n", 3, "mc_schemes"),
])
def test_spec_errors_are_addressed(tmp_path, text, line, field):
    with pytest.raises(SpecError) as exc:
        load_spec(_write(tmp_path, text))
    assert exc.value.field == field
    assert exc.value.line == line
    assert field in str(exc.value)


def test_spec_syntax_error_has_line(tmp_path):
    with pytest.raises(SpecError) as exc:
        load_spec(_write(tmp_path, "scenario: smoke\nsystem: [\n"))
    assert exc.value.line is not None


def test_builtin_specs_parse():
    for name in BUILTIN_SPECS:
        spec = load_spec(name)
        assert spec.name == name
    fig2b = load_spec("fig2b")
    assert fig2b.sweep_values == tuple(range(50, 501, 50))
    assert fig2b.config_at(300).M == 300
    fig2e = load_spec("fig2e")
    assert fig2e.config_at(20).tau_p == 20 and fig2e.per_cell_sum
    d = load_spec("fig2d").config_at(0)
    assert d.rho == pytest.approx(d.sigma2)


def test_scale_presets():
    spec = apply_scale(load_spec("fig2b"), "full")
    assert (spec.n_networks, spec.n_av) == (500, 50.0)
    with pytest.raises(ValueError):
        apply_scale(spec, "huge")


def test_spec_hash_stable():
    assert load_spec("fig2b").spec_hash() == load_spec("fig2b").spec_hash()
    assert load_spec("fig2b").spec_hash() != load_spec("fig2c").spec_hash()


def _read(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# spmimo ")
    return list(csv.DictReader(lines[1:]))


def test_smoke_run(tmp_path):
    import time
    t0 = time.time()
    res = run_experiment(load_spec("smoke"), tmp_path)
    assert time.time() - t0 < 10
    assert res.ok
    out = tmp_path / "smoke"
    for name in ("rp_k", "rp_opt", "sp_nosub", "sp_estsub", "sp_perfsub"):
        rows = _read(out / f"{name}.csv")
        assert list(rows[0])[:len(RATE_COLUMNS)] == list(RATE_COLUMNS)
        r = rows[0]
        assert float(r["ci_low"]) <= float(r["mean_rate"]) <= float(r["ci_high"])
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 1 and man["spec_hash"] == load_spec("smoke").spec_hash()
    assert man["modes"]["sp_estsub"] == "mc" and man["modes"]["rp_opt"] == "closed_form"
    assert (out / "plot.gp").exists()


def test_byte_identical_rerun_and_threads(tmp_path):
    spec = parse_spec({"name": "det", "scenario": "rate", "n_networks": 3, "n_fading": 100,
                       "n_av": 5, "sweep": {"var": "M", "values": [8, 16]},
                       "system": {"M": 8, "K": 2, "tau_c": 16}})
    run_experiment(spec, tmp_path / "a")
    run_experiment(spec, tmp_path / "b", threads=2)
    for f in ("rp_k.csv", "sp_estsub.csv", "limits.csv"):
        assert (tmp_path / "a/det" / f).read_bytes() == (tmp_path / "b/det" / f).read_bytes()


def test_resume_from_checkpoint(tmp_path, monkeypatch):
    spec = parse_spec({"name": "res", "scenario": "smoke", "n_networks": 3, "n_fading": 100,
                       "n_av": 5, "system": {"M": 8, "K": 2, "tau_c": 16}})
    full = run_experiment(spec, tmp_path / "ref")
    real = experiments.evaluate_network
    calls = []

    def flaky(s, point, index):
        calls.append(index)
        if index == 2:
            raise RuntimeError("simulated crash")
        return real(s, point, index)

    monkeypatch.setattr(experiments, "evaluate_network", flaky)
    with pytest.raises(RuntimeError):
        run_experiment(spec, tmp_path / "run")
    monkeypatch.setattr(experiments, "evaluate_network",
                        lambda s, p, i: (calls.append(i), real(s, p, i))[1])
    calls.clear()
    res = run_experiment(spec, tmp_path / "run")
    assert calls == [2]                       # only the missing deployment is recomputed
    assert (tmp_path / "run/res/sp_nosub.csv").read_bytes() == \
        (tmp_path / "ref/res/sp_nosub.csv").read_bytes()
    assert res.ok and full.ok


def test_cdf_and_interference_outputs(tmp_path):
    base = {"n_networks": 2, "n_fading": 100, "n_av": 5, "system": {"M": 8, "K": 2, "tau_c": 16}}
    run_experiment(parse_spec({"name": "c", "scenario": "cdf", **base}), tmp_path)
    rows = _read(tmp_path / "c/cdf_rp_k.csv")
    assert float(rows[-1]["cdf"]) == 1.0
    assert [float(r["rate_bps"]) for r in rows] == sorted(float(r["rate_bps"]) for r in rows)
    run_experiment(parse_spec({"name": "i", "scenario": "interference",
                               "schemes": ["rp_k", "sp_nosub"], "mc_schemes": [], **base}),
                   tmp_path)
    rows = _read(tmp_path / "i/interference.csv")
    assert [r["scheme"] for r in rows] == ["rp_k", "sp_nosub"]
    assert (tmp_path / "i/interference.gp").exists()


def test_cli_run_sweep_and_errors(tmp_path, capsys):
    assert main(["run", "smoke", "--out", str(tmp_path), "--quiet", "--seed", "3"]) == 0
    man = json.loads((tmp_path / "smoke/manifest.json").read_text())
    assert man["seed"] == 3
    assert main(["sweep", "--var", "M", "--from", "8", "--to", "12", "--step", "4",
                 "--schemes", "rp_k", "sp_nosub", "--n-networks", "2", "--n-fading", "0",
                 "--out", str(tmp_path), "--quiet"]) == 0
    rows = _read(tmp_path / "sweep_M/rp_k.csv")
    assert [r["sweep_value"] for r in rows] == ["8", "12"]
    bad = _write(tmp_path, "scenario: rate\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "field 'sweep'" in capsys.readouterr().err


def test_validate_subset(tmp_path):
    rep = validate_suite(0, only=["lambert", "zeta_max", "rational_rp", "bound_oracle"])
    assert rep.passed and len(rep.checks) == 4
    path = tmp_path / "r.json"
    assert main(["validate", "--only", "lambert", "gamma_oracle", "--report", str(path),
                 "--quiet"]) == 0
    data = json.loads(path.read_text())
    assert data["passed"] and data["n_checks"] == 2
    assert {"observed", "expected", "tolerance"} <= set(data["checks"][0])
