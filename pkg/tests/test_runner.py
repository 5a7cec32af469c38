import csv
import json
import math

import pytest

from gbpnet.errors import EmptyGroup
from gbpnet.runner import (
    CsvSink,
    ExperimentPlan,
    JsonlSink,
    RunRecord,
    aggregate,
    build_model,
    derive_seeds,
    expand_plan,
    load_plan,
    records_to_csv,
    run_plan,
    run_settings,
)

FAST = {"damping": 0.5, "epsilon": 1e-12, "max_iters": 2000}


def villain_plan(**kw):
    base = dict(model="villain", grid={"beta": [0.3, 0.6]}, presets=["factor_graph_plaquettes"],
                seeds=[0], engine=FAST, fixed={"extents": [2, 2]})
    base.update(kw)
    return ExperimentPlan(**base)


def test_derived_seeds_are_stable_prefixes():
    a = derive_seeds(7, 5)
    assert a == derive_seeds(7, 5)
    assert a[:3] == derive_seeds(7, 3)
    assert len(set(a)) == 5 and a != derive_seeds(8, 5)


def test_plan_validation():
    with pytest.raises(ValueError):
        villain_plan(model="potts").validate()
    with pytest.raises(ValueError):
        villain_plan(presets=[]).validate()
    with pytest.raises(ValueError):
        villain_plan(grid={"beta": []}).validate()
    with pytest.raises(ValueError):
        villain_plan(seeds=[]).validate()
    with pytest.raises(ValueError):
        villain_plan(seeds=None, n_seeds=0).validate()


def test_expand_order_and_defaults(tmp_path):
    plan = villain_plan(presets=["simple_bp", "factor_graph_plaquettes"], seeds=None,
                        master_seed=3, n_seeds=2)
    settings = expand_plan(plan)
    assert len(settings) == 2 * 2 * 2
    assert [s["params"]["beta"] for s in settings[:4]] == [0.3] * 4
    assert [s["preset"] for s in settings[:4]] == ["simple_bp"] * 2 + ["factor_graph_plaquettes"] * 2
    assert settings[0]["seed"] == derive_seeds(3, 2)[0]
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan.to_dict()))
    assert expand_plan(load_plan(path)) == settings
    ice = expand_plan(ExperimentPlan("ice", {"lattice": ["square"]}, ["simple_bp"]))
    assert ice[0]["engine"]["init_noise"] == 0.0


def test_run_settings_records_oracle_errors():
    rec = run_settings(expand_plan(villain_plan(grid={"beta": [0.3]}))[0])
    assert rec.converged and not rec.failure
    assert set(rec.observables) >= {"f", "e", "s"}
    assert rec.errors["f"] < 1e-3
    assert rec.wall_time > 0


def test_failures_are_recorded_not_raised():
    rec = run_settings({"model": "villain", "params": {"beta": -1.0}, "preset": "simple_bp",
                        "seed": 0, "engine": FAST})
    assert rec.failure.startswith("ValueError") and not rec.converged
    rec = run_settings({"model": "random", "params": {"n": 3, "chi": 2}, "preset": "r9",
                        "seed": 0, "engine": FAST})
    assert rec.failure


def test_not_converged_is_not_a_failure():
    s = expand_plan(villain_plan(grid={"beta": [0.3]}, engine={"max_iters": 2}))[0]
    rec = run_settings(s)
    assert not rec.converged and rec.iterations == 2 and rec.failure == ""
    assert rec.observables == {}


def test_run_plan_is_deterministic_and_ordered(tmp_path):
    plan = villain_plan()
    csv_path, jsonl_path = tmp_path / "out.csv", tmp_path / "out.jsonl"
    recs = run_plan(plan, [CsvSink(csv_path), JsonlSink(jsonl_path)])
    again = run_plan(plan, workers=2)
    assert [r.index for r in again] == [0, 1]
    for a, b in zip(recs, again):
        assert a.observables == b.observables and a.iterations == b.iterations
    rows = list(csv.DictReader(open(csv_path)))
    assert [json.loads(r["set.params"])["beta"] for r in rows] == [0.3, 0.6]
    header = open(csv_path).readline().strip().split(",")
    assert header[0] == "index" and header[-3:] == ["failure", "version", "wall_time"]
    assert float(rows[0]["obs.f"]) == recs[0].observables["f"]
    lines = [json.loads(l) for l in open(jsonl_path)]
    assert len(lines) == 2 and lines[1]["obs.e"] == recs[1].observables["e"]


def test_csv_is_byte_identical_apart_from_wall_time():
    plan = villain_plan(grid={"beta": [0.4]})
    a, b = run_plan(plan), run_plan(plan)
    for r in a + b:
        r.wall_time = 0.0
    assert records_to_csv(a) == records_to_csv(b)


def _rec(i, beta, preset, converged, f=None, err=None):
    return RunRecord(i, {"params": {"beta": beta}, "preset": preset}, converged=converged,
                     observables={} if f is None else {"f": f},
                     errors={} if err is None else {"f": err})


def test_aggregate_statistics():
    recs = [_rec(0, 0.3, "a", True, 1.0, 0.1), _rec(1, 0.3, "a", False),
            _rec(2, 0.3, "a", True, 3.0, -0.4), _rec(3, 0.5, "a", True, 5.0, 0.0)]
    frac = {(r["beta"], r["preset"]): r["value"] for r in aggregate(recs, "fraction_converged")}
    assert frac == {(0.3, "a"): 2 / 3, (0.5, "a"): 1.0}
    mean = aggregate(recs, "mean", "f")
    assert mean[0]["value"] == 2.0 and mean[0]["n"] == 2
    assert aggregate(recs, "median", "f")[1]["value"] == 5.0
    assert aggregate(recs, "max_abs_error", "f")[0]["value"] == 0.4
    with pytest.raises(EmptyGroup):
        aggregate([], "mean", "f")
    with pytest.raises(EmptyGroup):
        aggregate([_rec(0, 0.3, "a", False)], "mean", "f")
    with pytest.raises(ValueError):
        aggregate(recs, "mode", "f")
    with pytest.raises(ValueError):
        aggregate(recs, "mean")


def test_build_model_dispatch():
    assert build_model("ice", {"lattice": "square", "extents": [4, 4]}).n_sites == 16
    assert build_model("aklt", {"a": 1.0}).n_sites == 18
    assert build_model("random", {"n": 3, "chi": 2, "seed": 1}).n_sites == 9
    with pytest.raises(ValueError):
        build_model("potts", {})


def test_ice_record_reports_entropy():
    plan = ExperimentPlan("ice", {"lattice": ["square"]}, ["r1_plaquettes"],
                          engine={"epsilon": 1e-14}, fixed={"extents": [4, 4]})
    rec = run_plan(plan)[0]
    assert rec.observables["exp_s0"] == pytest.approx(rec.oracle["exp_s0"], abs=1e-5)
    assert math.isclose(rec.observables["exp_s0"], math.exp(-rec.observables["f"]))
