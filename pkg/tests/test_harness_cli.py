import csv
import dataclasses
import io
import json

import numpy as np
import pytest

from onlineadvice import cli
from onlineadvice import covering
from onlineadvice.harness import CSV_COLUMNS, ExperimentPlan, generate_advice, run_sweep
from onlineadvice.model import CoveringInstance, SparseRow, dump_instance
from onlineadvice.objectives import LinearObjective

SINGLE = {"kind": "covering", "n": 1, "objective": {"kind": "linear", "costs": [1.0]}, "rows": [[{"j": 0, "a": 1.0}]]}


def single():
    return CoveringInstance(1, [SparseRow.from_pairs(0, [(0, 1.0)])], LinearObjective([1.0]))


def test_advice_modes():
    inst = single()
    assert np.allclose(generate_advice(inst, "optimal").vector, [1.0])
    assert np.array_equal(generate_advice(inst, "perturbed:0").vector, generate_advice(inst, "optimal").vector)
    zero = generate_advice(inst, "zero")
    assert zero.vector[0] == 0.0
    assert not covering.round_branch(inst.rows[0], zero.vector, 0.5, 1).advice_feasible
    with pytest.raises(ValueError):
        generate_advice(inst, "clairvoyant")


def sweep_rows(plan):
    buf = io.StringIO()
    run_sweep(plan, out=buf, jobs=1)
    return list(csv.DictReader(io.StringIO(buf.getvalue())))


def test_lambda_grid_single_round():
    plan = ExperimentPlan([{"inline": SINGLE}], lambdas=[0.5], solvers=["pdla"])
    rows = sweep_rows(plan)
    assert len(rows) == 3
    assert [float(r["lambda"]) for r in rows] == [0.0, 0.5, 1.0]
    assert float(rows[0]["consistency_ratio"]) == pytest.approx(1.0)
    assert float(rows[1]["consistency_ratio"]) <= 4.0
    assert rows[2]["consistency_ratio"] != ""
    assert all(r["certified_feasibility"] == "true" for r in rows)


def test_empty_instance_header_only():
    plan = ExperimentPlan([{"inline": {"kind": "covering", "n": 1, "objective": {"kind": "linear", "costs": [1.0]}, "rows": []}}])
    buf = io.StringIO()
    run_sweep(plan, out=buf, jobs=1)
    assert buf.getvalue() == ",".join(CSV_COLUMNS) + "\n"


def test_plan_rejects_unknown_fields():
    with pytest.raises(ValueError):
        ExperimentPlan.from_dict({"instances": [], "colour": "red"})


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_cli_solve_covering(tmp_path, capsys):
    inst = write(tmp_path, "one.json", dict(SINGLE, advice=[1.0], **{"lambda": 0.5}))
    trace = tmp_path / "trace.json"
    assert cli.main(["solve-covering", str(inst), "--strict", "--emit-trace", str(trace)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["certificates"]["feasibility"]["ok"] is True
    assert json.loads(trace.read_text())["rounds"]


def test_cli_reduce_and_solve_packing(tmp_path, capsys):
    src = write(tmp_path, "k.json", {"items": [{"v": 2, "w": 1}, {"v": 3, "w": 2}], "C": 2,
                                      "advice_fractions": [1, 0.5], "lambda": 0.5})
    inst = tmp_path / "kn.json"
    assert cli.main(["reduce", "knapsack", str(src), "-o", str(inst)]) == 0
    assert cli.main(["solve-packing", str(inst), "--subroutine", "greedy", "--strict"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["metrics"]["primal_objective"] >= 1.75
    assert cli.main(["oracle", "opt", str(inst), "--mode", "greedy"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(3.5)


def test_cli_custom_subroutine(tmp_path, capsys):
    src = write(tmp_path, "k.json", {"items": [{"v": 1, "w": 1}], "C": 1})
    inst = tmp_path / "kn.json"
    cli.main(["reduce", "knapsack", str(src), "-o", str(inst)])
    spec = "onlineadvice.packing:GreedySaturation"
    assert cli.main(["solve-packing", str(inst), "--subroutine", "custom", "--custom", spec, "--lambda", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["y"] == [1.0]


def test_cli_solve_lq(tmp_path, capsys):
    doc = {"kind": "lq_covering", "n": 1, "objective": {"kind": "lq_sum", "groups": [{"S": [0], "c": 1.0, "q": 1.0}]},
           "rows": [[{"j": 0, "a": 1.0}]]}
    assert cli.main(["solve-lq", str(write(tmp_path, "lq.json", doc)), "--lambda", "1", "--strict"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["y"][0] == pytest.approx(np.log(2), abs=1e-9)


@pytest.mark.parametrize("kind, doc", [
    ("benefit", {"capacities": [1.0], "jobs": [{"w": 1.0, "alternatives": [{"0": 1.0}]}]}),
    ("throughput", {"edges": [{"u": "a", "v": "b", "capacity": 1}], "requests": [{"s": "a", "t": "b"}]}),
    ("onum", {"requests": [{"path": ["a", "b"], "budget": 1.0, "utility": {"kind": "sqrt"}}]}),
    ("ooic", {"delta": 1.0, "rounds": [{"utility": {"kind": "linear", "scale": 2.0}}, {}]}),
    ("mixed", {"B": [[1, 0], [0, 1]], "q": 2, "rows": [[{"j": 0, "a": 1}, {"j": 1, "a": 1}]]}),
])
def test_cli_reduce_kinds(tmp_path, capsys, kind, doc):
    assert cli.main(["reduce", kind, str(write(tmp_path, f"{kind}.json", doc))]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rows"]


def test_cli_sweep_strict_passes(tmp_path, monkeypatch):
    monkeypatch.delenv("ONLINEADVICE_JOBS", raising=False)
    inst = write(tmp_path, "one.json", SINGLE)
    plan = write(tmp_path, "plan.json", {"instances": [{"path": inst.name}], "lambdas": [0.5]})
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--plan", str(plan), "--out", str(out), "--strict"]) == 0
    assert out.read_text().startswith("instance_id,")


def test_cli_sweep_strict_fails_on_corrupted_dual(tmp_path, monkeypatch):
    monkeypatch.delenv("ONLINEADVICE_JOBS", raising=False)
    real = covering.reconstruct_dual

    def corrupted(*args, **kwargs):
        dual = real(*args, **kwargs)
        return dataclasses.replace(dual, y=dual.y * 10.0)

    monkeypatch.setattr(covering, "reconstruct_dual", corrupted)
    inst = write(tmp_path, "one.json", SINGLE)
    plan = write(tmp_path, "plan.json", {"instances": [{"path": inst.name}], "lambdas": [0.5]})
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--plan", str(plan), "--out", str(out)]) == 0
    assert cli.main(["sweep", "--plan", str(plan), "--out", str(out), "--strict"]) == 1
    rows = list(csv.DictReader(out.open()))
    assert any(r["certified_duality"] == "false" for r in rows)


def test_cli_bad_input_exits_2(tmp_path):
    bad = write(tmp_path, "bad.json", {"kind": "mystery", "n": 1})
    assert cli.main(["oracle", "opt", str(bad)]) == 2


def test_instance_roundtrip(tmp_path):
    from onlineadvice.model import load_instance
    from onlineadvice.model import AdviceProfile
    p = tmp_path / "i.json"
    dump_instance(p, single(), AdviceProfile(np.array([1.0]), 0.25))
    inst, adv = load_instance(p)
    assert inst.n == 1 and adv.lam == 0.25 and np.array_equal(adv.vector, [1.0])
