"""Command-line harness: instance generation, mechanism runs, audits,
the counterexample gallery, batch sweeps and the exact oracle."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import audit as audit_mod
from . import mechanisms as mech
from .gallery import CASES, thm13_feasibility
from .generator import GeneratorSpec, generate
from .model import Instance, as_value, members, value_to_json
from .oracle import (
    BudgetExceeded,
    CertificateInfeasible,
    greedy_dual_certificate,
    optimal_welfare,
)
from .sweep import MECHANISMS, report_csv, report_json, run_mechanism, sweep


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=str)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _fmt_value(v) -> str:
    return str(value_to_json(Fraction(v))) if v is not None else ""


def _alloc_json(alloc) -> list:
    return [list(members(mask)) for mask in alloc]


def _cmd_generate(args) -> None:
    spec = GeneratorSpec(
        n=args.n,
        m=args.m,
        k=args.k,
        b=args.b,
        d_cap=args.d_cap,
        value_dist=args.dist,
        value_lo=args.value_lo,
        value_hi=args.value_hi,
        seed=args.seed,
        strict=args.strict,
    )
    _emit(generate(spec).to_json(), args.out)


def _mechanism_callable(name: str, args):
    """Allocation-returning callable for the auditor."""
    eps = Fraction(args.eps) if args.eps else mech.EPS_DEFAULT

    if name == "greedy":
        return lambda inst: mech.greedy(inst)[0]
    if name == "mpu":
        def run_mpu(inst: Instance):
            mu = Fraction(args.mu) if args.mu else (1 + eps) * inst.max_value
            return mech.mpu(inst, mu)[0]
        return run_mpu
    if name == "mpu-mod":
        return lambda inst: mech.mpu_modified(inst, eps)[0]
    if name == "mpu-mod-rand":
        coins = [bit == "1" for bit in (args.coins or "")]
        def run_rand(inst: Instance):
            cs = coins if coins else [True] * (inst.n - 1)
            return mech.mpu_modified_rand(inst, eps, cs)[0]
        return run_rand
    raise SystemExit(f"mechanism {name!r} is not auditable from the CLI")


def _cmd_run(args) -> None:
    instance = Instance.load(args.instance)
    name = args.mechanism
    eps = Fraction(args.eps) if args.eps else mech.EPS_DEFAULT

    try:
        opt, _ = optimal_welfare(instance)
    except BudgetExceeded:
        opt = None

    payload: dict = {"mechanism": name, "n": instance.n, "m": instance.m, "b": instance.b}

    if args.enumerate_coins and name in ("mpu-rand", "mpu-mod-rand", "composite"):
        if name == "composite":
            outcome = mech.composite_any_m(instance, eps)
            payload["expected_welfare"] = float(outcome.expected_welfare())
            payload["d_tilde"] = outcome.d_tilde
            payload["q_main"] = outcome.q_main
            payload["q_super"] = outcome.q_super
            payload["realizations"] = {
                "main": [
                    {"coins": list(r.coins), "welfare": _fmt_value(r.welfare)}
                    for r in outcome.main.realizations
                ],
                "super": [
                    {"coins": list(r.coins), "welfare": _fmt_value(r.welfare)}
                    for r in outcome.super_branch.realizations
                ],
            }
        else:
            realizations = mech.enumerate_mpu_modified_rand(instance, eps)
            q = mech.rounding_probability_mp(max(instance.d, 1), instance.b, instance.m)
            payload["q"] = float(q)
            payload["expected_welfare"] = float(realizations.expected_welfare(q))
            payload["realizations"] = [
                {
                    "coins": list(r.coins),
                    "allocation": _alloc_json(r.allocation),
                    "welfare": _fmt_value(r.welfare),
                }
                for r in realizations.realizations
            ]
        if opt is not None:
            payload["opt"] = _fmt_value(opt)
        _emit(payload, args.out)
        return

    mu = Fraction(args.mu) if args.mu else None
    value, cert_bound, flags = run_mechanism(
        name, instance, seed=args.seed, eps=eps, mu=mu, opt=opt
    )
    payload.update(
        {
            "welfare": _fmt_value(value),
            "welfare_float": float(value),
            "opt": _fmt_value(opt) if opt is not None else None,
            "cert_bound": _fmt_value(cert_bound) if cert_bound is not None else None,
            "checks": {k: bool(v) for k, v in flags.items()},
        }
    )
    _emit(payload, args.out)


def _cmd_audit(args) -> None:
    instance = Instance.load(args.instance)
    bidder = args.bidder
    others = tuple(d for i, d in enumerate(instance.declarations) if i != bidder)
    context = audit_mod.AuditContext(instance.universe, others, bidder)
    mechanism = _mechanism_callable(args.mechanism, args)

    with open(args.domain_spec) as fh:
        domain_obj = json.load(fh)
    domain_obj.setdefault("bidder", bidder)
    domain = audit_mod.domain_from_spec(domain_obj)

    payload: dict = {"check": args.check, "mode": args.mode, "domain_size": len(domain.declarations)}

    if args.check == "edges":
        graph = audit_mod.build_graph(mechanism, context, domain, args.mode)
        verdict = audit_mod.check_truthful_no_money(graph)
        payload["ok"] = verdict.ok
        if not verdict.ok:
            payload["witness"] = {"arc": verdict.arc, "weight": _fmt_value(verdict.weight)}
    elif args.check == "cycles":
        graph = audit_mod.build_graph(mechanism, context, domain, args.mode)
        verdict = audit_mod.check_money_implementable(graph)
        payload["ok"] = verdict.ok
        if not verdict.ok:
            payload["witness"] = {
                "cycle": list(verdict.cycle),
                "total": _fmt_value(verdict.total),
            }
    elif args.check == "kmono":
        verdict = audit_mod.check_k_monotone(mechanism, context, domain)
        payload["ok"] = verdict.ok
        if not verdict.ok:
            payload["witness"] = str(verdict.witness)
    elif args.check == "ksetmono":
        verdict = audit_mod.check_k_set_monotone(mechanism, context, domain)
        payload["ok"] = verdict.ok
        if not verdict.ok:
            payload["witness"] = str(verdict.witness)
    elif args.check == "thresholds":
        truth = instance.declarations[bidder]
        grid = [as_value(v) for v in domain_obj["grid"]]
        try:
            report = audit_mod.extract_thresholds(mechanism, context, truth, grid)
            payload["ok"] = True
            payload["brackets"] = [
                {"rank": r + 1, "bundle": list(members(mask)), "lo": _fmt_value(lo), "hi": _fmt_value(hi)}
                for r, (mask, (lo, hi)) in enumerate(zip(report.ranks, report.brackets))
            ]
        except audit_mod.NotMonotoneOnGrid as exc:
            payload["ok"] = False
            payload["witness"] = str(exc.witness)
    _emit(payload, args.out)


def _cmd_gallery(args) -> None:
    payload: dict = {"case": args.case}
    if args.case == "thm13" and args.rho is not None:
        result = thm13_feasibility(Fraction(args.rho))
        payload["feasibility"] = {
            "rho": _fmt_value(Fraction(args.rho)),
            "feasible": result["feasible"],
            "witness": [_fmt_value(x) for x in result["witness"]] if result["witness"] else None,
        }
    case = CASES[args.case](delta=Fraction(args.delta) if args.delta else Fraction(1, 10))
    report = case.verify()
    payload["facts"] = {
        key: {"expected": _json_fact(want), "actual": _json_fact(got), "ok": ok}
        for key, (want, got, ok) in report.items()
    }
    payload["ok"] = all(entry["ok"] for entry in payload["facts"].values())
    _emit(payload, args.out)


def _json_fact(value):
    if isinstance(value, Fraction):
        return _fmt_value(value)
    if isinstance(value, tuple):
        return [_json_fact(v) for v in value]
    return value


def _cmd_sweep(args) -> None:
    if args.spec_file:
        with open(args.spec_file) as fh:
            spec_objs = json.load(fh)
        specs = [GeneratorSpec(**obj) for obj in spec_objs]
    else:
        specs = [
            GeneratorSpec(
                n=args.n, m=args.m, k=args.k, b=args.b, seed=seed,
                value_lo=args.value_lo, value_hi=args.value_hi,
            )
            for seed in range(args.instances)
        ]
    names = args.mechanisms.split(",")
    report = sweep(
        names,
        specs,
        seeds=tuple(range(args.seeds)),
        workers=args.workers,
        repro_dir=args.repro_dir,
    )
    out = args.out or "sweep.csv"
    if out.endswith(".json"):
        report_json(report, out)
    else:
        report_csv(report, out)
    worst = {k: _fmt_value(v) for k, v in report.worst_ratio().items()}
    print(json.dumps({"rows": len(report.rows), "all_ok": report.all_ok(), "worst_ratio": worst, "out": out}))


def _cmd_oracle(args) -> None:
    instance = Instance.load(args.instance)
    value, alloc = optimal_welfare(instance, args.budget)
    payload = {
        "opt_value": _fmt_value(value),
        "opt_allocation": _alloc_json(alloc),
    }
    if instance.b == 1:
        galloc, trace = mech.greedy(instance)
        try:
            cert = greedy_dual_certificate(instance, galloc, trace)
            payload["certificate_bound"] = _fmt_value(cert.bound)
            payload["certificate_ok"] = cert.ok and value <= cert.bound
        except CertificateInfeasible:
            payload["certificate_bound"] = None
            payload["certificate_ok"] = False
    else:
        payload["certificate_bound"] = None
        payload["certificate_ok"] = None
    _emit(payload, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veriauction",
        description="Truthful combinatorial auctions without money under "
        "no-overbidding inspection: mechanisms, oracle, audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--d-cap", type=int, default=None)
    p.add_argument("--dist", choices=("uniform", "log_uniform"), default="uniform")
    p.add_argument("--value-lo", type=int, default=1)
    p.add_argument("--value-hi", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run one mechanism on an instance")
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps")
    p.add_argument("--mu")
    p.add_argument("--enumerate-coins", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("audit", help="audit a mechanism on a declaration domain")
    p.add_argument("--mechanism", default="greedy")
    p.add_argument("--instance", required=True)
    p.add_argument("--bidder", type=int, default=0)
    p.add_argument("--domain-spec", required=True)
    p.add_argument("--mode", choices=("verification", "complete"), default="verification")
    p.add_argument(
        "--check",
        choices=("edges", "cycles", "kmono", "ksetmono", "thresholds"),
        required=True,
    )
    p.add_argument("--eps")
    p.add_argument("--mu")
    p.add_argument("--coins")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("gallery", help="verify a counterexample family")
    p.add_argument("--case", choices=tuple(CASES), required=True)
    p.add_argument("--delta")
    p.add_argument("--rho")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gallery)

    p = sub.add_parser("sweep", help="batch mechanisms x instances with checks")
    p.add_argument("--mechanisms", default="greedy")
    p.add_argument("--spec-file")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--value-lo", type=int, default=1)
    p.add_argument("--value-hi", type=int, default=100)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repro-dir")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle", help="exact optimum and greedy certificate")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
