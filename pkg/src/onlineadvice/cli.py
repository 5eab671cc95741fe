"""Command-line entry point: ``onlineadvice <command> ...``.

Commands print a JSON summary on stdout.  With ``--strict`` any failed
certificate makes the exit status 1.
"""
from __future__ import annotations

import argparse
import importlib
import json
import math
import sys
from pathlib import Path

import networkx as nx
import numpy as np

from . import applications as apps
from .covering import DualUnavailable, PdlaConfig, certify_pdla, run_pdla
from .harness import ExperimentPlan, any_failed, run_sweep
from .lq import certify_lq, run_lq
from .model import AdviceProfile, CoveringInstance, dump_instance, instance_to_dict, load_instance
from .objectives import LqSumObjective, Utility
from .oracles import offline_opt_covering, offline_opt_packing
from .packing import GreedySaturation, OfflineReplay, PackingSubroutine, certify_switching, run_switching


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _cert_doc(certs):
    return {k: {"ok": c.ok, "value": c.value, "bound": c.bound, "detail": c.detail} for k, c in certs.items()}


def _emit(doc, certs, strict):
    print(json.dumps(_jsonable(doc), indent=2))
    failed = [k for k, c in certs.items() if c.ok is False]
    if failed:
        print("certificate failures: " + ", ".join(failed), file=sys.stderr)
    return 1 if strict and failed else 0


def _advice(inst, embedded, lam, size):
    if embedded is None:
        return None, (1.0 if lam is None else lam)
    lam = embedded.lam if lam is None else lam
    if embedded.vector.size != size:
        raise SystemExit("advice length does not match the instance")
    return AdviceProfile(embedded.vector, lam), lam


def cmd_solve_covering(args):
    inst, embedded = load_instance(args.instance)
    if not isinstance(inst, CoveringInstance) or isinstance(inst.objective, LqSumObjective):
        raise SystemExit("solve-covering needs a covering instance with a monotone-gradient objective")
    advice, lam = _advice(inst, embedded, args.lam, inst.n)
    cfg = PdlaConfig(lam=lam, step_eta=args.step_eta, feas_tol=args.feas_tol, variant=args.variant, d=args.d,
                     homogeneous_delta=args.homogeneous_delta)
    res = run_pdla(inst, advice, cfg)
    certs = certify_pdla(inst, res, advice, cfg)
    if args.emit_trace:
        Path(args.emit_trace).write_text(json.dumps(_jsonable(res.trace.to_dict())) + "\n")
    doc = {"x": res.x, "metrics": res.metrics.as_dict(), "certificates": _cert_doc(certs)}
    if res.dual is not None:
        doc["dual"] = {"y": res.dual.y, "mu": res.dual.mu, "conjugate": res.dual.conjugate,
                       "objective": res.dual.objective, "delta": res.dual.delta}
    return _emit(doc, certs, args.strict)


def cmd_solve_lq(args):
    inst, embedded = load_instance(args.instance)
    if not isinstance(getattr(inst, "objective", None), LqSumObjective):
        raise SystemExit("solve-lq needs an lq_covering instance")
    advice, lam = _advice(inst, embedded, args.lam, inst.n)
    res = run_lq(inst, advice, lam, args.eps_grad, args.step_eta, args.feas_tol)
    certs = certify_lq(inst, res, advice, feas_tol=args.feas_tol)
    if args.emit_trace:
        Path(args.emit_trace).write_text(json.dumps(_jsonable(res.trace.to_dict())) + "\n")
    doc = {"x": res.x, "y": res.y, "mu": res.mu, "kappa": res.kappa, "d": res.d,
           "metrics": res.metrics.as_dict(), "certificates": _cert_doc(certs)}
    return _emit(doc, certs, args.strict)


def _load_custom(spec: str) -> PackingSubroutine:
    mod, _, name = spec.partition(":")
    if not name:
        raise SystemExit("--custom expects module:ClassName")
    cls = getattr(importlib.import_module(mod), name)
    return cls()


def cmd_solve_packing(args):
    inst, embedded = load_instance(args.instance)
    if isinstance(inst, CoveringInstance):
        raise SystemExit("solve-packing needs a packing instance")
    lam = args.lam if args.lam is not None else (embedded.lam if embedded is not None else 0.5)
    vec = embedded.vector if embedded is not None else np.zeros(inst.m)
    advice = AdviceProfile(vec, lam)
    opt = None
    if args.subroutine == "greedy":
        sub = GreedySaturation(args.threshold)
    elif args.subroutine == "offline-replay":
        opt = offline_opt_packing(inst)
        sub = OfflineReplay(opt.point, args.replay_scale, opt.value)
    else:
        if not args.custom:
            raise SystemExit("--subroutine custom needs --custom module:ClassName")
        sub = _load_custom(args.custom)
    res = run_switching(inst, sub, advice, args.beta)
    certs = certify_switching(inst, res, advice, sub, None if opt is None else opt.value)
    doc = {"y": res.y, "y_subroutine": res.y_sub, "discarded": sorted(res.state.discarded),
           "metrics": res.metrics.as_dict(), "certificates": _cert_doc(certs)}
    return _emit(doc, certs, args.strict)


def cmd_oracle(args):
    inst, _ = load_instance(args.instance)
    if isinstance(inst, CoveringInstance):
        if args.mode == "greedy":
            raise SystemExit("greedy mode is for packing instances")
        est = offline_opt_covering(inst, args.mode, args.resolution)
    else:
        if args.mode == "fw":
            raise SystemExit("fw mode is for covering instances")
        est = offline_opt_packing(inst, args.mode, args.resolution)
    print(json.dumps(_jsonable(est.to_dict()), indent=2))
    return 0


def _utility(doc):
    return Utility(**doc) if doc is not None else Utility()


def reduce_from_dict(kind: str, doc: dict):
    """Build (instance, advice or None) from a problem-specific document."""
    lam = doc.get("lambda", 0.5)
    advice = None
    if kind == "knapsack":
        items = [apps.KnapsackItem(it["v"], it["w"]) for it in doc["items"]]
        inst = apps.reduce_knapsack(items, doc["C"])
        if doc.get("advice_fractions") is not None:
            advice = apps.knapsack_advice(items, doc["advice_fractions"], lam)
    elif kind == "benefit":
        jobs = [apps.Job(j["w"], [{int(r): float(a) for r, a in alt.items()} for alt in j["alternatives"]])
                for j in doc["jobs"]]
        inst = apps.reduce_resource_benefit(jobs, doc["capacities"], doc.get("P"))
    elif kind == "throughput":
        g = nx.DiGraph() if doc.get("directed") else nx.Graph()
        for e in doc["edges"]:
            g.add_edge(e["u"], e["v"], capacity=float(e.get("capacity", 1.0)))
        reqs = [apps.FlowRequest(r["s"], r["t"]) for r in doc["requests"]]
        inst = apps.reduce_throughput(g, reqs, doc.get("path_cap", 16))
    elif kind == "onum":
        reqs = [apps.OnumRequest(r["path"], r["budget"], _utility(r.get("utility"))) for r in doc["requests"]]
        inst = apps.reduce_onum(reqs)
    elif kind == "ooic":
        rounds = [apps.RevenueRound(_utility(r.get("utility")), r.get("d_min"), r.get("d_max")) for r in doc["rounds"]]
        inst = apps.reduce_ooic(rounds, doc["delta"])
    elif kind == "mixed":
        rows = [[(e["j"], e["a"]) for e in r] for r in doc["rows"]]
        inst = apps.reduce_mixed_covering_packing(doc["B"], doc["q"], rows, doc.get("d_bound"))
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    if advice is None and doc.get("advice") is not None:
        advice = AdviceProfile(np.asarray(doc["advice"], dtype=float), lam)
    return inst, advice


def cmd_reduce(args):
    doc = json.loads(Path(args.input).read_text())
    inst, advice = reduce_from_dict(args.kind, doc)
    if args.output:
        dump_instance(args.output, inst, advice)
    else:
        print(json.dumps(instance_to_dict(inst, advice), indent=2))
    return 0


def cmd_sweep(args):
    plan = ExperimentPlan.load(args.plan)
    if args.timing:
        plan.timing = True
    rows = run_sweep(plan, out=args.out, jobs=args.jobs)
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    if args.strict and any_failed(rows):
        print("certificate failures present", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlineadvice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("solve-covering", help="run PDLA on a covering instance file")
    c.add_argument("instance")
    c.add_argument("--variant", choices=["standard", "homogeneous"], default="standard")
    c.add_argument("--homogeneous-delta", choices=["stated", "maximizer"], default="stated")
    c.add_argument("--lambda", dest="lam", type=float, default=None)
    c.add_argument("--step-eta", type=float, default=1e-3)
    c.add_argument("--feas-tol", type=float, default=1e-9)
    c.add_argument("--d", type=int, default=None, help="row-sparsity bound (default: declared or running max)")
    c.add_argument("--emit-trace", metavar="PATH")
    c.add_argument("--strict", action="store_true")
    c.set_defaults(func=cmd_solve_covering)

    q = sub.add_parser("solve-lq", help="run the l_q-sum solver on an lq_covering instance file")
    q.add_argument("instance")
    q.add_argument("--lambda", dest="lam", type=float, default=None)
    q.add_argument("--eps-grad", type=float, default=1e-12)
    q.add_argument("--step-eta", type=float, default=1e-3)
    q.add_argument("--feas-tol", type=float, default=1e-9)
    q.add_argument("--emit-trace", metavar="PATH")
    q.add_argument("--strict", action="store_true")
    q.set_defaults(func=cmd_solve_lq)

    k = sub.add_parser("solve-packing", help="run the switching algorithm on a packing instance file")
    k.add_argument("instance")
    k.add_argument("--subroutine", choices=["greedy", "offline-replay", "custom"], default="greedy")
    k.add_argument("--custom", metavar="MODULE:CLASS")
    k.add_argument("--lambda", dest="lam", type=float, default=None)
    k.add_argument("--beta", type=float, default=1.0)
    k.add_argument("--threshold", type=float, default=0.0)
    k.add_argument("--replay-scale", type=float, default=1.0)
    k.add_argument("--strict", action="store_true")
    k.set_defaults(func=cmd_solve_packing)

    o = sub.add_parser("oracle", help="offline ground truth")
    osub = o.add_subparsers(dest="oracle_command", required=True)
    opt = osub.add_parser("opt", help="offline OPT bracket")
    opt.add_argument("instance")
    opt.add_argument("--mode", choices=["auto", "grid", "enum", "greedy", "fw", "lp"], default="auto")
    opt.add_argument("--resolution", type=int, default=None)
    opt.set_defaults(func=cmd_oracle)

    r = sub.add_parser("reduce", help="turn a problem description into an instance file")
    r.add_argument("kind", choices=["knapsack", "benefit", "throughput", "onum", "ooic", "mixed"])
    r.add_argument("input")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("sweep", help="run an experiment plan and write CSV")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--strict", action="store_true")
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default from ONLINEADVICE_JOBS, else 1)")
    s.add_argument("--timing", action="store_true", help="fill wall_time_ms (makes output run-dependent)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DualUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
