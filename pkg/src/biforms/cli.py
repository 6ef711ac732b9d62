"""Command line interface.

All subcommands emit a JSON record with schema "biforms/1"; complex
numbers serialise as {re, im}.  Exit codes: 0 success, 2 validation
error, 3 budget exceeded.
"""

import argparse
import dataclasses
import json
import math
import sys
import time
from fractions import Fraction

from . import counting as ct
from . import densities as dn
from . import expsums as es
from . import forms as fm
from . import geometry as gm
from . import workbench as wb
from .util import BudgetExceededError, ValidationError

SCHEMA = "biforms/1"


def _parse_number(tok):
    tok = tok.strip()
    if "/" in tok or ("." not in tok and "e" not in tok.lower()):
        return Fraction(tok)
    return float(tok)


def _parse_vector(text):
    return [_parse_number(t) for t in text.split(",") if t.strip()]


def _parse_schedule(text):
    """start:stop:step, or a comma list of P values."""
    if ":" in text:
        start, stop, step = (int(t) for t in text.split(":"))
        return list(range(start, stop + 1, step))
    return [int(t) for t in text.split(",") if t.strip()]


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)  # "inf" / "nan" rather than bare Infinity tokens
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Fraction):
        return {"num": str(obj.numerator), "den": str(obj.denominator)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v)
                for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return str(obj)


def _load_system(args):
    if not args.system:
        raise ValidationError("--system FILE is required")
    with open(args.system, encoding="utf-8") as fh:
        return fm.parse_system(fh.read())


def _load_boxes(args, system):
    if args.boxes:
        with open(args.boxes, encoding="utf-8") as fh:
            return fm.parse_boxes(fh.read(), system.n1, system.n2,
                                  unit_default=args.unit_box)
    if args.unit_box:
        return fm.BoxPair.unit(system.n1, system.n2)
    return fm.BoxPair.symmetric(system.n1, system.n2)


def _emit(args, record):
    record["schema"] = SCHEMA
    text = json.dumps(_jsonable(record), sort_keys=True, indent=2)
    print(text)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if getattr(args, "csv", None):
        _write_csv(args.csv, record)


def _write_csv(path, record):
    import csv
    rows = record.get("rows")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if isinstance(rows, list) and rows and isinstance(rows[0], dict):
            keys = sorted(rows[0])
            writer.writerow(keys)
            for row in rows:
                writer.writerow([row.get(k) for k in keys])
        else:
            flat = {k: v for k, v in _jsonable(record).items()
                    if not isinstance(v, (dict, list))}
            writer.writerow(sorted(flat))
            writer.writerow([flat[k] for k in sorted(flat)])


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", help="system definition file")
    common.add_argument("--boxes", help="box definition file")
    common.add_argument("--unit-box", action="store_true",
                        help="default omitted axes to [0,1]")
    common.add_argument("--json", help="write the JSON record here")
    common.add_argument("--csv", help="write a CSV mirror here")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--budget", type=float, default=1e9)
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="biforms",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    sp = add("count", help="exact N(P1,P2)")
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--method", default="auto",
                    choices=["auto", "brute", "linear"])

    sp = add("aux", help="auxiliary counter")
    sp.add_argument("--side", type=int, choices=[1, 2], required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--B", required=True)

    sp = add("mcount", help="linearised counter with dist-to-Z bound")
    sp.add_argument("--side", type=int, choices=[1, 2], required=True)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--bound", required=True)

    sp = add("kcell", help="dyadic singular-value cell count")
    sp.add_argument("--beta", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--E", required=True, help="comma list E1..E(k+1)")
    sp.add_argument("--B", type=float, required=True)

    sp = add("sum", help="exponential sum S(alpha)")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)

    sp = add("csum", help="normalised complete sum S_{a,q}")
    sp.add_argument("--a", required=True)
    sp.add_argument("--q", type=int, required=True)

    sp = add("sinf", help="oscillatory integral S_inf(gamma)")
    sp.add_argument("--gamma", required=True)
    sp.add_argument("--tol", type=float, default=1e-6)

    sp = add("arcs", help="major/minor arc classification")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--variant", default="standard",
                    choices=["standard", "primed"])

    sp = add("audit-weyl", help="Weyl inequality ratio report")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--eps", type=float, default=0.01)

    sp = add("audit-aux", help="auxiliary inequality audit")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--C-script", dest="c_script", type=float, required=True)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=0.01)

    sp = add("density-p", help="truncated p-adic density")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--method", default="auto",
                    choices=["auto", "residue-count", "hensel"])

    sp = add("series", help="truncated singular series")
    sp.add_argument("--Q", type=float, required=True)
    sp.add_argument("--variant", default="euler",
                    choices=["euler", "qseries"])

    sp = add("sintegral", help="truncated singular integral")
    sp.add_argument("--variant", default="slab",
                    choices=["slab", "gamma"])
    sp.add_argument("--gamma-max", type=float, default=30.0)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--P", type=float, default=32.0)
    sp.add_argument("--log2-samples", type=int, default=16)

    sp = add("sigma", help="sigma = series x integral")
    sp.add_argument("--p-max", type=int, default=100)
    sp.add_argument("--series-variant", default="euler",
                    choices=["euler", "qseries"])
    sp.add_argument("--integral-variant", default="slab",
                    choices=["slab", "gamma"])
    sp.add_argument("--slab-P", type=float, default=32.0)
    sp.add_argument("--log2-samples", type=int, default=16)

    sp = add("local-zeros", help="smooth local zero search")
    sp.add_argument("--primes", default="2,3,5,7,11,13")
    sp.add_argument("--depth", type=int, default=1)

    sp = add("invariants", help="pencil invariant report")
    sp.add_argument("--height", type=int, default=2)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--primes", default="101,103,107,109")

    sp = add("hypotheses", help="theorem hypothesis verdict table")
    sp.add_argument("--P1", type=float, required=True)
    sp.add_argument("--P2", type=float, required=True)
    sp.add_argument("--height", type=int, default=2)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--primes", default="101,103,107,109")

    sp = add("verify", help="asymptotic verification along a schedule")
    sp.add_argument("--schedule", required=True, help="start:stop:step")
    sp.add_argument("--lopsided-b", type=float, default=1.0,
                    help="P1 = P2^b along the schedule")
    sp.add_argument("--p-max", type=int, default=100)
    sp.add_argument("--log2-samples", type=int, default=16)
    sp.add_argument("--slab-P", type=float, default=32.0)

    sp = add("floor-check", help="trivial-solution floor check")
    sp.add_argument("--schedule", required=True)
    return p


def _dispatch(args):
    t0 = time.monotonic()
    budget = int(args.budget)
    system = _load_system(args)
    boxes = _load_boxes(args, system)
    cmd = args.command
    rec = {"op": cmd}

    if cmd == "count":
        res = ct.count_N(system, boxes, args.P1, args.P2, budget=budget,
                         threads=args.threads, method=args.method)
        rec.update(P1=args.P1, P2=args.P2, count=str(res.count),
                   enumerated=str(res.enumerated), method=res.method)
    elif cmd == "aux":
        from .util import open_sym_bound
        B = _parse_number(args.B)
        c = ct.count_aux(system, args.side, _parse_vector(args.beta),
                         B, budget=budget)
        a = open_sym_bound(B)
        if args.side == 1:
            dims = (system.d1 - 1) * system.n1 + system.d2 * system.n2
        else:
            dims = system.d1 * system.n1 + (system.d2 - 1) * system.n2
        rec.update(side=args.side, B=str(args.B), count=str(c),
                   enumerated=str((2 * a + 1) ** dims),
                   method="exact-enumeration")
    elif cmd == "mcount":
        from .util import open_sym_bound
        c = ct.count_M(system, args.side, _parse_vector(args.alpha),
                       args.P1, args.P2, _parse_number(args.bound),
                       budget=budget)
        a1, a2 = open_sym_bound(args.P1), open_sym_bound(args.P2)
        if args.side == 1:
            total = (2 * a1 + 1) ** ((system.d1 - 1) * system.n1) \
                * (2 * a2 + 1) ** (system.d2 * system.n2)
        else:
            total = (2 * a1 + 1) ** (system.d1 * system.n1) \
                * (2 * a2 + 1) ** ((system.d2 - 1) * system.n2)
        rec.update(side=args.side, P1=args.P1, P2=args.P2, count=str(c),
                   enumerated=str(total), method="exact-enumeration")
    elif cmd == "kcell":
        spec = ct.KCellSpec(args.k,
                            tuple(float(e) for e in args.E.split(",")),
                            args.B, fm.PencilWeights(
                                _parse_vector(args.beta)))
        c = ct.k_cell_count(system, spec, budget=budget)
        import math as _math
        rec.update(k=args.k, B=args.B, count=str(c),
                   enumerated=str((2 * _math.floor(args.B) + 1)
                                  ** system.n1),
                   method="singular-value-scan")
    elif cmd == "sum":
        val = es.weighted_sum(system, boxes, _parse_vector(args.alpha),
                              args.P1, args.P2, budget=budget)
        rec.update(P1=args.P1, P2=args.P2, value=val)
    elif cmd == "csum":
        val = es.complete_sum(system, [int(t) for t in args.a.split(",")],
                              args.q, budget=budget)
        rec.update(q=args.q, value=val)
    elif cmd == "sinf":
        res = es.oscillatory_integral(system, boxes,
                                      _parse_vector(args.gamma), args.tol)
        rec.update(value=res.value, error=res.error,
                   converged=res.converged, panels=res.panels)
    elif cmd == "arcs":
        params = es.ArcParams(args.delta, args.P1, args.P2,
                              system.d1, system.d2)
        mem = es.arc_classify(params, _parse_vector(args.alpha),
                              variant=args.variant)
        rec.update(kind=mem.kind, witness=mem.witness,
                   b=params.b, u=params.u, P=params.P)
    elif cmd == "audit-weyl":
        rep = es.audit_weyl(system, boxes, _parse_vector(args.alpha),
                            args.P1, args.P2, eps=args.eps, budget=budget)
        rec.update(dataclasses.asdict(rep))
    elif cmd == "audit-aux":
        rep = es.audit_aux_inequality(system, boxes,
                                      _parse_vector(args.alpha),
                                      _parse_vector(args.beta),
                                      args.P1, args.P2, args.c_script,
                                      C=args.C, eps=args.eps, budget=budget)
        rec.update(dataclasses.asdict(rep))
    elif cmd == "density-p":
        est = dn.padic_density(system, args.p, args.k, method=args.method,
                               budget=budget)
        rec.update(dataclasses.asdict(est))
    elif cmd == "series":
        est = dn.singular_series(system, args.Q, variant=args.variant,
                                 budget=budget)
        rec.update(value=est.value, error_bound=est.error_bound,
                   method=est.method, level=est.level)
    elif cmd == "sintegral":
        level = {"gamma_max": args.gamma_max, "tol": args.tol,
                 "P": args.P, "log2_samples": args.log2_samples}
        est = dn.singular_integral(system, boxes, variant=args.variant,
                                   level=level, seed=args.seed,
                                   budget=budget)
        rec.update(value=est.value, error_bound=est.error_bound,
                   method=est.method, level=est.level, seed=args.seed)
    elif cmd == "sigma":
        est = dn.sigma_factor(system, boxes, {
            "p_max": args.p_max, "series_variant": args.series_variant,
            "integral_variant": args.integral_variant,
            "slab_P": args.slab_P, "log2_samples": args.log2_samples,
            "seed": args.seed})
        rec.update(value=est.value, error_bound=est.error_bound,
                   level=est.level, seed=args.seed,
                   positivity=_jsonable(est.parts.get("positivity")))
    elif cmd == "local-zeros":
        primes = [int(t) for t in args.primes.split(",")]
        real = dn.smooth_real_zero(system, boxes, seed=args.seed)
        padic = {p: dataclasses.asdict(
            dn.smooth_padic_zero(system, p, args.depth)) for p in primes}
        rec.update(real=dataclasses.asdict(real), padic=_jsonable(padic),
                   seed=args.seed)
    elif cmd == "invariants":
        primes = tuple(int(t) for t in args.primes.split(","))
        rep = gm.compute_invariants(system, height=args.height,
                                    samples=args.samples, primes=primes,
                                    seed=args.seed)
        rec.update(dataclasses.asdict(rep))
    elif cmd == "hypotheses":
        primes = tuple(int(t) for t in args.primes.split(","))
        rep = gm.compute_invariants(system, height=args.height,
                                    samples=args.samples, primes=primes,
                                    seed=args.seed)
        rows = gm.hypothesis_report(system, args.P1, args.P2, rep)
        rec.update(invariants=dataclasses.asdict(rep), rows=rows)
    elif cmd == "verify":
        ps = _parse_schedule(args.schedule)
        schedule = [(float(p) ** args.lopsided_b, float(p)) for p in ps]
        plan = wb.ExperimentPlan(system, boxes, schedule, {
            "p_max": args.p_max, "log2_samples": args.log2_samples,
            "slab_P": args.slab_P, "seed": args.seed,
            "count_budget": budget})
        res = wb.run_asymptotic(plan)
        rec.update(sigma=res.sigma.value, sigma_error=res.sigma.error_bound,
                   delta=res.delta, delta_fitted=res.delta_fitted,
                   rows=[_jsonable(r) for r in res.rows])
    elif cmd == "floor-check":
        ps = _parse_schedule(args.schedule)
        rows = wb.run_lower_bound_check(system, boxes,
                                        [(float(p), float(p)) for p in ps],
                                        budget=budget)
        rec.update(rows=[_jsonable(r) for r in rows],
                   all_ok=all(r.ok for r in rows))
    else:  # pragma: no cover
        raise ValidationError(f"unknown subcommand {cmd}")

    rec["wall_ms"] = round(1000 * (time.monotonic() - t0), 3)
    return rec


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        rec = _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(args, rec)
    return 0


if __name__ == "__main__":
    sys.exit(main())
