"""Batch experiment harness: mechanisms x instances with per-run
invariant checks and stable CSV/JSON reporting.

Each row records the run plus the outcome of every applicable check
(feasibility and exactness always; the two price-sum welfare bounds and
the constant-factor ratio bound for price-update runs; the dual
certificate for greedy).  A failing check serializes a minimal
reproduction file (instance JSON, mechanism, seed) next to the report.
Row assembly is sorted by (instance_id, mechanism, seed), so reports are
byte-stable regardless of worker scheduling.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import get_context
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mechanisms as mech
from .generator import GeneratorSpec, generate
from .model import Instance, is_feasible, value_to_json, welfare
from .oracle import BudgetExceeded, CertificateInfeasible, greedy_dual_certificate, optimal_welfare

CSV_COLUMNS = [
    "instance_id",
    "mechanism",
    "seed",
    "n",
    "m",
    "k",
    "b",
    "d",
    "welfare",
    "opt",
    "ratio",
    "cert_bound",
    "flags",
    "micros",
]

MECHANISMS = (
    "greedy",
    "mpu",
    "mpu-mod",
    "mpu-oversell",
    "mpu-rand",
    "mpu-mod-rand",
    "composite",
    "randexp",
    "randpoly",
)


@dataclass(frozen=True)
class SweepRow:
    instance_id: str
    mechanism: str
    seed: int
    n: int
    m: int
    k: int
    b: int
    d: int
    welfare: Fraction | None
    opt: Fraction | None
    ratio: Fraction | None
    cert_bound: Fraction | None
    flags: dict
    micros: int

    def ok(self) -> bool:
        return all(bool(v) for v in self.flags.values())


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)

    def worst_ratio(self) -> dict[str, Fraction]:
        worst: dict[str, Fraction] = {}
        for row in self.rows:
            if row.ratio is None:
                continue
            if row.mechanism not in worst or row.ratio > worst[row.mechanism]:
                worst[row.mechanism] = row.ratio
        return worst

    def all_ok(self) -> bool:
        return all(row.ok() for row in self.rows)


def _coins_for(instance: Instance, q: float, seed: int, count: int) -> list[bool]:
    rng = np.random.default_rng(np.random.PCG64(seed))
    return [bool(rng.random() < q) for _ in range(count)]


def _auto_mu(instance: Instance, eps: Fraction) -> Fraction:
    vmax = instance.max_value
    if vmax <= 0:
        raise mech.EmptyInstance("no positively valued demand")
    return (1 + eps) * vmax


def run_mechanism(
    name: str,
    instance: Instance,
    seed: int = 0,
    eps: Fraction = mech.EPS_DEFAULT,
    mu: Fraction | None = None,
    opt: Fraction | None = None,
) -> tuple[Fraction, Fraction | None, dict]:
    """One mechanism run; returns (welfare, cert_bound, flags)."""
    flags: dict = {}
    cert_bound = None

    if name == "greedy":
        alloc, trace = mech.greedy(instance)
        value = welfare(instance, alloc)
        flags["feasible_exact"] = is_feasible(instance, alloc)
        try:
            cert = greedy_dual_certificate(instance, alloc, trace)
            cert_bound = cert.bound
            flags["cert_ok"] = cert.ok
            if opt is not None:
                flags["cert_covers_opt"] = opt <= cert.bound
        except CertificateInfeasible:
            flags["cert_ok"] = False
    elif name in ("mpu", "mpu-mod", "mpu-oversell"):
        if name == "mpu-mod":
            alloc, trace = mech.mpu_modified(instance, eps)
        else:
            mu_val = mu if mu is not None else _auto_mu(instance, eps)
            runner = mech.mpu_oversell if name == "mpu-oversell" else mech.mpu
            alloc, trace = runner(instance, mu_val)
        value = trace.priced_value(instance)
        flags["prices_monotone"] = mech.price_monotone_ok(trace)
        if name == "mpu-oversell":
            flags["oversell_bound"] = mech.oversell_bound_ok(instance, trace)
        else:
            flags["feasible_exact"] = is_feasible(instance, alloc)
            if opt is not None:
                flags.update(mech.lemma3_checks(instance, trace, opt))
                flags["ratio_bound"] = mech.mpu_ratio_ok(instance, trace, opt)
    elif name == "mpu-rand":
        mu_val = mu if mu is not None else _auto_mu(instance, eps)
        q = mech.rounding_probability(max(instance.d, 1), instance.b, instance.m)
        coins = _coins_for(instance, q, seed, instance.n)
        alloc, trace = mech.mpu_rand(instance, mu_val, coins)
        value = welfare(instance, alloc)
        flags["feasible_exact"] = is_feasible(instance, alloc)
    elif name == "mpu-mod-rand":
        q = mech.rounding_probability(max(instance.d, 1), instance.b, instance.m)
        coins = _coins_for(instance, q, seed, instance.n - 1)
        alloc, trace = mech.mpu_modified_rand(instance, eps, coins)
        value = welfare(instance, alloc)
        flags["feasible_exact"] = is_feasible(instance, alloc)
    elif name == "composite":
        outcome = mech.composite_any_m(instance, eps)
        value = Fraction(str(float(outcome.expected_welfare())))
        flags["feasible_exact"] = all(
            is_feasible(instance, r.allocation)
            for r in outcome.main.realizations + outcome.super_branch.realizations
        )
    elif name == "randexp":
        dist = mech.rand_exp(instance)
        value = dist.expected_welfare(instance)
        flags["feasible_exact"] = all(is_feasible(instance, a) for _, a in dist.support)
        if opt is not None:
            flags["k_ratio"] = value * max(instance.k, 1) >= opt
    elif name == "randpoly":
        dist = mech.rand_poly(instance)
        value = dist.expected_welfare(instance)
        flags["feasible_exact"] = all(is_feasible(instance, a) for _, a in dist.support)
    else:
        raise ValueError(f"unknown mechanism {name!r}")

    return value, cert_bound, flags


def _run_job(job) -> SweepRow:
    spec, name, seed = job
    instance = generate(spec)
    instance_id = f"n{spec.n}m{spec.m}k{spec.k}b{spec.b}s{spec.seed}"
    opt = None
    flags: dict = {}
    try:
        opt, _ = optimal_welfare(instance)
    except BudgetExceeded:
        pass

    start = time.perf_counter()
    value = None
    cert_bound = None
    try:
        value, cert_bound, flags = run_mechanism(name, instance, seed=seed, opt=opt)
    except (mech.UnsupportedSupply, mech.EmptyInstance, BudgetExceeded) as exc:
        flags = {f"error:{type(exc).__name__}": False}
    micros = int((time.perf_counter() - start) * 1e6)

    ratio = None
    if opt is not None and value is not None:
        if value > 0:
            ratio = opt / value
        elif opt == 0:
            ratio = Fraction(1)
    return SweepRow(
        instance_id,
        name,
        seed,
        spec.n,
        spec.m,
        spec.k,
        spec.b,
        instance.d,
        value,
        opt,
        ratio,
        cert_bound,
        flags,
        micros,
    )


def sweep(
    mechanism_names: Sequence[str],
    specs: Sequence[GeneratorSpec],
    seeds: Sequence[int] = (0,),
    workers: int = 1,
    repro_dir: str | Path | None = None,
) -> SweepReport:
    """Run every mechanism on every generated instance and seed."""
    for name in mechanism_names:
        if name not in MECHANISMS:
            raise ValueError(f"unknown mechanism {name!r}")
    jobs = [(spec, name, seed) for spec in specs for name in mechanism_names for seed in seeds]
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            rows = pool.map(_run_job, jobs)
    else:
        rows = [_run_job(job) for job in jobs]
    spec_of = {
        (row.instance_id, row.mechanism, row.seed): job[0]
        for row, job in zip(rows, jobs)
    }
    rows.sort(key=lambda r: (r.instance_id, r.mechanism, r.seed))

    if repro_dir is not None:
        repro_dir = Path(repro_dir)
        repro_dir.mkdir(parents=True, exist_ok=True)
        for row in rows:
            if not row.ok():
                spec = spec_of[(row.instance_id, row.mechanism, row.seed)]
                payload = {
                    "instance": generate(spec).to_json(),
                    "generator_seed": spec.seed,
                    "mechanism": row.mechanism,
                    "coin_seed": row.seed,
                    "flags": {k: bool(v) for k, v in row.flags.items()},
                }
                path = repro_dir / f"repro_{row.instance_id}_{row.mechanism}_{row.seed}.json"
                with open(path, "w") as fh:
                    json.dump(payload, fh, indent=2)
    return SweepReport(rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return str(value_to_json(v))
    return str(v)


def report_csv(report: SweepReport, path: str | Path) -> None:
    """Fixed-column CSV; exact values serialized as p/q strings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            flags = ";".join(f"{k}={int(bool(v))}" for k, v in sorted(row.flags.items()))
            writer.writerow(
                [
                    row.instance_id,
                    row.mechanism,
                    row.seed,
                    row.n,
                    row.m,
                    row.k,
                    row.b,
                    row.d,
                    _fmt(row.welfare),
                    _fmt(row.opt),
                    _fmt(row.ratio),
                    _fmt(row.cert_bound),
                    flags,
                    row.micros,
                ]
            )


def report_json(report: SweepReport, path: str | Path) -> None:
    payload = []
    for row in report.rows:
        payload.append(
            {
                "instance_id": row.instance_id,
                "mechanism": row.mechanism,
                "seed": row.seed,
                "n": row.n,
                "m": row.m,
                "k": row.k,
                "b": row.b,
                "d": row.d,
                "welfare": _fmt(row.welfare),
                "opt": _fmt(row.opt),
                "ratio": _fmt(row.ratio),
                "cert_bound": _fmt(row.cert_bound),
                "flags": {k: bool(v) for k, v in row.flags.items()},
                "micros": row.micros,
            }
        )
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
