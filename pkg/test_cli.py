"""Tests for spec parsing, the subcommands and the report files"""

import csv
import importlib
import json
import pkgutil
import re

import pytest

import modules
from modules.cli import load_report, main, verdicts
from modules.config import PRESETS, Numerics, get_preset
from modules.errors import SpecParseError, ValidationError
from modules.potential_spec import breakpoints, load_spec, parse_spec, prepare

FULL_PRECISION = re.compile(r"^-?\d\.\d{17}e[+-]\d{2,3}$")
FAST_NUMERICS = {"nodes": 800, "r_max": 30.0, "kernel_R": 10.0, "kernel_nodes": 200}


def write_spec(tmp_path, doc, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def baseline(**numerics):
    doc = get_preset("baseline-exponential")
    doc["numerics"] = dict(FAST_NUMERICS, **numerics)
    return doc


# ---------- spec parsing ----------

@pytest.mark.parametrize("epsilon", [0, 2, 0.5, True, "1"])
def test_epsilon_must_be_plus_or_minus_one(epsilon):
    doc = baseline()
    doc["epsilon"] = epsilon
    with pytest.raises(ValidationError, match="epsilon"):
        parse_spec(doc)


def test_missing_blocks_are_parse_errors():
    with pytest.raises(SpecParseError, match="formfactor"):
        parse_spec({"epsilon": 1})
    with pytest.raises(SpecParseError, match="epsilon"):
        parse_spec({"formfactor": {"family": "exponential"}})


def test_unknown_family_is_named_in_the_message():
    doc = baseline()
    doc["formfactor"]["family"] = "lorentzian"
    with pytest.raises(ValidationError, match="lorentzian"):
        parse_spec(doc)


def test_built_form_factor_needs_a_source():
    with pytest.raises(ValidationError, match="source"):
        parse_spec({"formfactor": {"family": "built_from_source"}, "epsilon": 1})


def test_bad_sources_and_potentials_are_rejected():
    doc = baseline()
    doc["source"] = {"deltas": [[-1.0, 1.0]]}
    with pytest.raises(ValidationError, match="weight > 0"):
        parse_spec(doc)

    doc = baseline()
    doc["local"] = {"family": "tabulated",
                    "params": {"radii": [0.5, 1.0, 2.0, 3.0], "values": [1.0, -0.5, 0.1, 0.0]}}
    with pytest.raises(ValidationError, match="non-negative"):
        prepare(parse_spec(doc))


def test_numerics_are_validated():
    with pytest.raises(ValidationError, match="unknown numerics"):
        parse_spec(baseline(wiggle=1))
    with pytest.raises(ValidationError, match="r_max"):
        parse_spec(baseline(r_max=-1.0))
    spec = parse_spec({**baseline(), "numerics": {"tolerances": {"quad_tolerance": 1e-8}}})
    assert spec.numerics.quad_tolerance == 1e-8
    assert spec.numerics.nodes == Numerics().nodes
    with pytest.raises(ValidationError, match="numerics.nodes"):
        parse_spec(baseline(nodes="many"))
    with pytest.raises(ValidationError, match="numerics.kernel_nodes"):
        parse_spec(baseline(kernel_nodes=200.5))


@pytest.mark.parametrize("rate,error", [("fast", SpecParseError), (True, SpecParseError),
                                        (-1.0, ValidationError), (0.0, ValidationError)])
def test_family_params_are_checked(rate, error):
    doc = baseline()
    doc["formfactor"]["params"]["rate"] = rate
    with pytest.raises(error, match="formfactor.exponential.rate"):
        parse_spec(doc)


def test_family_params_are_coerced_to_floats():
    doc = baseline()
    doc["formfactor"]["params"]["rate"] = "2.5"
    doc["local"] = {"family": "gaussian", "params": {"strength": 0, "width": "1"}}
    spec = parse_spec(doc)
    assert spec.formfactor["params"]["rate"] == 2.5
    assert spec.local["params"] == {"strength": 0.0, "width": 1.0}
    with pytest.raises(ValidationError, match="local.gaussian.strength"):
        parse_spec({**doc, "local": {"family": "gaussian", "params": {"strength": -0.5}}})


def test_invalid_json_is_a_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(SpecParseError, match="not valid JSON"):
        load_spec(path)


def test_kinks_become_grid_nodes():
    doc = {"formfactor": {"family": "tent", "params": {"strength": 1.0, "cutoff": 1.5}},
           "source": {"deltas": [{"weight": 1.0, "site": 2.5}]},
           "epsilon": 1, "numerics": FAST_NUMERICS}
    spec = parse_spec(doc)
    assert sorted(breakpoints(spec)) == [1.5, 2.5]
    problem = prepare(spec)
    assert 1.5 in problem.grid.nodes and 2.5 in problem.grid.nodes


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_parse(name):
    spec = parse_spec(get_preset(name))
    assert spec.epsilon in (1, -1)


# ---------- subcommands ----------

def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path / "out"), "--quiet"])


def test_certify_writes_a_versioned_report(tmp_path):
    spec = write_spec(tmp_path, baseline())
    assert run(tmp_path, "certify", "--spec", spec, "--theorem", "A") == 0
    report = load_report(tmp_path / "out" / "report.json")
    assert report["schema_version"] == 1
    assert report["spec"]["formfactor"]["family"] == "exponential"
    assert report["numerics"]["nodes"] == FAST_NUMERICS["nodes"]
    assert verdicts(report)["certificates"] == {"A": True}
    assert "certify" in report["timings"]


def test_reports_are_deterministic(tmp_path):
    spec = write_spec(tmp_path, baseline())
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["certify", "--spec", spec, "--out", str(first), "--quiet"]) == 0
    assert main(["certify", "--spec", spec, "--out", str(second), "--quiet"]) == 0
    assert verdicts(load_report(first / "report.json")) == verdicts(load_report(second / "report.json"))


def test_transform_series_use_full_precision(tmp_path):
    spec = write_spec(tmp_path, baseline())
    assert run(tmp_path, "transform", "--spec", spec, "--kind", "sine", "--k-max", "5") == 0
    with open(tmp_path / "out" / "momentum_series.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0]) == ["k", "U_tilde"]
    assert float(rows[0]["k"]) == 0.0
    assert float(rows[0]["U_tilde"]) == pytest.approx(1.0, rel=1e-6)
    assert all(FULL_PRECISION.match(row["U_tilde"]) for row in rows)


def test_structured_format_writes_only_the_report(tmp_path):
    spec = write_spec(tmp_path, baseline())
    assert run(tmp_path, "transform", "--spec", spec, "--format", "structured", "--k-max", "5") == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["report.json"]


def test_tolerance_overrides_reach_the_numerics(tmp_path):
    spec = write_spec(tmp_path, baseline())
    assert run(tmp_path, "certify", "--spec", spec, "--tolerance", "flag_tolerance=1e-7",
               "--seed", "3") == 0
    numerics = load_report(tmp_path / "out" / "report.json")["numerics"]
    assert numerics["flag_tolerance"] == 1e-7
    assert numerics["seed"] == 3


def test_spec_errors_exit_with_code_two(tmp_path):
    doc = baseline()
    doc["epsilon"] = 3
    spec = write_spec(tmp_path, doc)
    assert run(tmp_path, "certify", "--spec", spec) == 2
    assert run(tmp_path, "certify", "--spec", str(tmp_path / "missing.json")) == 2
    assert run(tmp_path, "solve-local", "--spec", write_spec(tmp_path, baseline(), "free.json")) == 2


@pytest.mark.parametrize("rate", ["fast", -1.0])
def test_bad_family_params_exit_with_code_two(tmp_path, rate):
    doc = baseline()
    doc["formfactor"]["params"]["rate"] = rate
    assert run(tmp_path, "certify", "--spec", write_spec(tmp_path, doc)) == 2


def test_numerical_errors_exit_with_code_three(tmp_path):
    spec = write_spec(tmp_path, baseline())
    assert run(tmp_path, "transform", "--spec", spec, "--kind", "hankel", "--nu", "0.0") == 3


def test_presets_subcommand(capsys):
    assert main(["presets"]) == 0
    assert main(["presets", "engineered-embedded"]) == 0
    printed = capsys.readouterr().out
    assert "baseline-exponential" in printed
    assert '"amplitude": "engineered"' in printed


def test_build_u_reports_the_residual(tmp_path):
    doc = {"source": {"smooth": {"family": "exponential", "params": {}}},
           "formfactor": {"family": "built_from_source"}, "epsilon": 1,
           "numerics": {"nodes": 2000}}
    spec = write_spec(tmp_path, doc)
    assert run(tmp_path, "build-u", "--spec", spec) == 0
    results = load_report(tmp_path / "out" / "report.json")["results"]
    assert results["residual"]["max_residual"] < 1e-6
    assert results["origin_value"] == pytest.approx(1.0, rel=1e-8)
    assert results["integrability_ledger"]["implemented"]["rU_L1_at_inf"]


@pytest.mark.slow
def test_detect_on_the_baseline_preset(tmp_path):
    assert run(tmp_path, "detect", "--preset", "baseline-exponential") == 0
    report = load_report(tmp_path / "out" / "report.json")
    found = verdicts(report)
    assert found["embedded_states"] == []
    assert found["certificates"] == {"A": True}
    with open(tmp_path / "out" / "radial_series.csv", newline="", encoding="utf-8") as handle:
        assert csv.DictReader(handle).fieldnames == ["r", "U", "W", "omega"]


@pytest.mark.slow
def test_detect_and_oracle_on_the_engineered_preset(tmp_path):
    assert run(tmp_path, "detect", "--preset", "engineered-embedded", "--oracle") == 0
    report = load_report(tmp_path / "out" / "report.json")
    found = verdicts(report)
    assert found["embedded_states"] == [pytest.approx(1.0, abs=1e-4)]
    assert found["oracle"] == ["confirmed"]


@pytest.mark.slow
def test_certify_B_on_the_manufactured_preset(tmp_path):
    assert run(tmp_path, "certify", "--preset", "theorem-b-manufactured", "--theorem", "B") == 0
    assert verdicts(load_report(tmp_path / "out" / "report.json"))["certificates"] == {"B": True}


@pytest.mark.parametrize("name", sorted(m.name for m in pkgutil.iter_modules(modules.__path__)))
def test_every_module_carries_the_license_header(name):
    doc = importlib.import_module(f"modules.{name}").__doc__
    assert doc is not None
    assert re.match(r"[\w &]+ Module - \S", doc.splitlines()[0])
    assert "GNU General Public License v3.0" in doc
