import json
import os

import numpy as np
import pytest

from riboflow import cli
from riboflow.errors import BadCapacity, ParseError, ValidationError
from riboflow.catalog import all_scenarios, bundled_names, bundled_path, load_bundled
from riboflow.scenario import (
    emit_scenario,
    initial_states,
    parse_scenario,
    parse_scenario_text,
    random_states_on_level,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def _raw(name):
    with open(bundled_path(name), encoding="utf-8") as fh:
        return json.load(fh)


def test_bundled_files_match_builders():
    built = all_scenarios()
    assert sorted(built) == bundled_names()
    for name, sc in built.items():
        loaded = load_bundled(name)
        assert scenario_to_dict(loaded) == scenario_to_dict(sc)
        again = parse_scenario_text(emit_scenario(loaded))
        assert scenario_to_dict(again) == scenario_to_dict(sc)
        with open(bundled_path(name), encoding="utf-8") as fh:
            assert fh.read() == emit_scenario(sc)


def test_ring_file_contents():
    sc = load_bundled("ring100_hill")
    assert sc.model.m == 100
    assert len(sc.model.transitions) == 800
    ks = {}
    for r in sc.rates:
        i, j = r.edge
        ks.setdefault((j - i) % 100, set()).add(r.k.nominal().value)
    assert ks == {d: {20.0 - 2 * (d - 1)} for d in range(1, 9)}
    assert {r.theta.l for r in sc.rates} == {350.0}
    assert list(sc.model.c[:50]) == [50.0] * 50 and list(sc.model.c[50:]) == [100.0] * 50
    n0 = initial_states(sc)[0]
    assert np.all(n0 > 0) and np.all(n0 < sc.model.c)


def test_unknown_edge_rejected():
    d = _raw("example2_nsc")
    d["rates"][0]["edge"] = [1, 2]
    with pytest.raises(ValidationError, match=r"\$\.rates"):
        scenario_from_dict(d)


def test_missing_rate_rejected():
    d = _raw("example2_nsc")
    del d["rates"][2]
    with pytest.raises(ValidationError):
        scenario_from_dict(d)


def test_bad_capacity_and_unknown_keys():
    d = _raw("example2_nsc")
    d["model"]["capacities"][1] = 0.0
    with pytest.raises(BadCapacity):
        scenario_from_dict(d)
    d = _raw("example2_nsc")
    d["solver"]["rtol"] = 1e-3
    with pytest.raises(ValidationError, match="rtol"):
        scenario_from_dict(d)
    d = _raw("example2_nsc")
    d["schema_version"] = 7
    with pytest.raises(ValidationError):
        scenario_from_dict(d)


def test_parse_error_position(tmp_path):
    text = '{\n  "name": "x",\n  "model": {,\n}'
    with pytest.raises(ParseError) as info:
        parse_scenario_text(text)
    assert info.value.line == 3
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(ParseError):
        parse_scenario(str(p))
    with pytest.raises(ParseError):
        parse_scenario(str(tmp_path / "missing.json"))


def test_random_states_on_level():
    rng = np.random.default_rng(3)
    c = np.array([5.0, 25.0, 50.0])
    for r in (0.0, 1.0, 40.0, 79.5, 80.0):
        for x in random_states_on_level(c, r, 20, rng):
            assert np.all(x >= 0) and np.all(x <= c)
            assert abs(x.sum() - r) < 1e-12 * max(1.0, r)
    d = _raw("triangle_massaction")
    d["initial"] = {"level": 81.0, "rule": "random", "count": 3, "seed": 1}
    with pytest.raises(ValidationError, match="level"):
        scenario_from_dict(d)


def test_analyze_manifest(tmp_path):
    rep = run_scenario(load_bundled("triangle_massaction"), str(tmp_path), analysis="analyze")
    m = json.loads((tmp_path / "manifest.json").read_text())
    res = m["results"]
    assert res["deficiency_rank"] == 1 and res["deficiency_cycles"] == 1
    assert res["complexes"] == 6 and res["linkage_classes"] == 3
    assert res["strongly_connected"] is True
    assert m["all_checks_passed"] and rep.passed
    assert "condensation.csv" in rep.artifacts


def test_analyze_not_strongly_connected(tmp_path):
    rep = run_scenario(load_bundled("example2_nsc"), str(tmp_path), analysis="analyze")
    res = rep.manifest["results"]
    assert res["strongly_connected"] is False
    assert "siphon_characterization" not in rep.manifest["checks"]
    assert res["deficiency_rank"] == res["deficiency_cycles"] == 0


def test_simulate_zero_horizon(tmp_path):
    sc = load_bundled("triangle_massaction")
    sc.solver = sc.solver.replace(t_end=0.0)
    sc.initial = type(sc.initial)(states=((1.0, 20.0, 19.0),))
    run_scenario(sc, str(tmp_path), analysis="simulate")
    assert (tmp_path / "trajectory_1.csv").read_text() == "t,n_1,n_2,n_3\n0,1,20,19\n"


def test_simulate_checks(tmp_path):
    sc = load_bundled("triangle_massaction")
    rep = run_scenario(sc, str(tmp_path), analysis="simulate")
    assert rep.passed
    assert {"conservation_drift", "reduced_vs_full", "persistence_margin"} <= set(rep.manifest["checks"])
    assert len([a for a in rep.artifacts if a.startswith("trajectory_full_")]) == 3


def test_equilibria_and_nsc(tmp_path):
    rep = run_scenario(load_bundled("example2_nsc"), str(tmp_path / "nsc"))
    assert rep.passed and "nsc_prediction_agrees" in rep.manifest["checks"]
    rep = run_scenario(load_bundled("triangle_massaction"), str(tmp_path / "tri"))
    assert rep.passed
    curve = np.loadtxt(tmp_path / "tri" / "equilibrium_curve.csv", delimiter=",", skiprows=1)
    assert curve.shape[0] == 50


def test_equilibria_rejects_time_varying():
    with pytest.raises(ValidationError):
        run_scenario(load_bundled("example13_perturbed"), "/tmp/unused_rf", analysis="equilibria")


def test_entrain_short(tmp_path):
    sc = load_bundled("example14_periodic")
    sc.options = {"n_periods": 12, "samples_per_period": 64}
    rep = run_scenario(sc, str(tmp_path))
    assert rep.manifest["results"]["period"] == pytest.approx(2 * np.pi)
    assert rep.manifest["checks"]["final_periodicity_residual"]["value"] < 1e-2


def test_deterministic_outputs(tmp_path):
    sc = load_bundled("triangle_rational_l10")
    run_scenario(sc, str(tmp_path / "a"), analysis="simulate")
    run_scenario(sc, str(tmp_path / "b"), analysis="simulate")
    for name in os.listdir(tmp_path / "a"):
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["analyze", "--scenario", bundled_path("triangle_massaction"), "--out", out]) == 0
    assert "PASS deficiency_rank_equals_chordless_cycles" in capsys.readouterr().out
    assert cli.main(["analyze", "--scenario", str(tmp_path / "nope.json"), "--out", out]) == 2
    bad = _raw("example2_nsc")
    bad["rates"][0]["edge"] = [1, 2]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    assert cli.main(["analyze", "--scenario", str(p), "--out", out]) == 3
    assert cli.main(["equilibria", "--scenario", bundled_path("example13_perturbed"), "--out", out]) == 3
    assert "ValidationError" in capsys.readouterr().err


def test_cli_numeric_failure_code(tmp_path, capsys):
    # loose abs_tol on a state that converges onto its capacity trips the box guard
    code = cli.main(["simulate", "--scenario", bundled_path("example2_nsc"), "--out", str(tmp_path), "--tol-rel", "1e-8", "--tol-abs", "1e-9"])
    assert code == 4
    assert "CapacityViolation" in capsys.readouterr().err


def test_cli_strict_flag(tmp_path, capsys):
    d = _raw("triangle_massaction")
    d["model"]["transitions"].append([1, 3])
    d["model"]["transitions"].append([3, 2])
    d["rates"].append({"edge": [1, 3], "k": {"kind": "constant", "value": 1.0}})
    d["rates"].append({"edge": [3, 2], "k": {"kind": "constant", "value": 1.0}})
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    out = str(tmp_path / "o")
    # triangle plus reversed chords: still one chordless cycle count per rank
    code = cli.main(["analyze", "--scenario", str(p), "--out", out, "--strict"])
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert code == (0 if m["all_checks_passed"] else 1)


def test_cli_tolerance_override(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["simulate", "--scenario", bundled_path("triangle_rational_l10"), "--out", str(out), "--tol-rel", "1e-9", "--tol-abs", "1e-8"])
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["tolerances"] == {"rel_tol": 1e-9, "abs_tol": 1e-8}
