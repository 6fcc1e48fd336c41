"""Command-line front end: generate instances, solve, verify, and run oracles.

Reports are JSON with rationals as "p/q" strings; the only floats are the
explicitly approximate NSW/rho-mean certificate fields.  Exit codes: 0 success,
2 bad parameters / incompatible instance / too large, 3 failed certificate or
verification mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

from ._num import format_number, parse_number, parse_rational
from .algorithms import (
    Certificate,
    SolveResult,
    certificates_for,
    envy_cycles,
    make_envy_free_from_bounded,
    nsw_pipeline_additive,
    nsw_pipeline_matroid,
    subadditive_baseline,
    welfare_target_additive,
    welfare_target_general,
)
from .envy import bounded_envy, is_ef1, is_envy_free, is_envy_freeable
from .model import (
    Allocation,
    FairDivisionError,
    Instance,
    InstanceFormatError,
    PaymentVector,
    load_instance,
    instance_to_json,
    social_welfare,
)
from .oracles import (
    brute_nsw_opt,
    brute_sw_opt,
    enumerate_envy_freeable,
    enumerate_envy_freeable_parallel,
    gen_bad_nsw,
    gen_constant_sum,
    gen_imposs,
    gen_random,
    gen_sqrt,
    gen_tightness,
    min_total_transfer,
    min_transfer_at_welfare,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILED = 3


def _cert_to_obj(cert: Certificate) -> dict:
    if cert.approx:
        lhs, rhs = float(cert.lhs), float(cert.rhs)
    else:
        lhs, rhs = format_number(cert.lhs), format_number(cert.rhs)
    return {
        "name": cert.name,
        "lhs": lhs,
        "rhs": rhs,
        "holds": bool(cert.holds),
        "approx": bool(cert.approx),
    }


def _params_to_obj(params: dict) -> dict:
    out = {}
    for key, val in params.items():
        if isinstance(val, Fraction):
            out[key] = format_number(val)
        elif isinstance(val, bool):
            out[key] = val
        elif isinstance(val, tuple) and key in ("base", "start"):
            out[key] = [str(b) for b in val]
        elif isinstance(val, tuple):
            out[key] = [format_number(v) for v in val]
        else:
            out[key] = format_number(val)
    return out


def _params_from_obj(obj: dict) -> dict:
    out = {}
    for key, val in obj.items():
        if key in ("base", "start"):
            out[key] = tuple(int(b) for b in val)
        elif key == "converted":
            out[key] = bool(val)
        elif key == "rhos":
            out[key] = tuple(parse_rational(v) for v in val)
        else:
            out[key] = parse_rational(val)
    return out


def result_to_obj(result: SolveResult) -> dict:
    report = result.report
    welfare = {
        "sw": format_number(report.sw),
        "nash_product": format_number(report.nash_product),
        "utilities": [format_number(u) for u in report.utilities],
        "rho": format_number(report.rho) if report.rho is not None else None,
        "rho_mean": report.rho_mean,
    }
    return {
        "algorithm": {"name": result.algorithm, **_params_to_obj(result.params)},
        "allocation": {"bundles": [str(b) for b in result.allocation.bundles]},
        "subsidies": [format_number(p) for p in result.subsidies.payments],
        "transfers": [format_number(p) for p in result.transfers.payments],
        "welfare": welfare,
    }


def run_report(inst: Instance, result: SolveResult, timing_ms: int) -> dict:
    return {
        "instance": {"agents": inst.n, "items": inst.m, "class": inst.declared_class},
        "result": result_to_obj(result),
        "certificates": [_cert_to_obj(c) for c in result.certificates],
        "timing_ms": timing_ms,
    }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _read_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return load_instance(fh.read())


def _read_allocation_arg(inst: Instance, spec: str) -> Allocation:
    if spec == "sw-opt":
        return brute_sw_opt(inst)
    if spec == "nsw-opt":
        return brute_nsw_opt(inst)
    try:
        masks = tuple(int(part) for part in spec.split(","))
    except ValueError:
        raise InstanceFormatError(
            "--alloc expects 'sw-opt', 'nsw-opt', or comma-separated bundle bitmasks"
        ) from None
    return Allocation(masks)


def _read_base_file(path: str) -> Allocation:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    bundles = obj.get("bundles") if isinstance(obj, dict) else None
    if bundles is None and isinstance(obj, dict):
        bundles = obj.get("result", {}).get("allocation", {}).get("bundles")
    if bundles is None:
        raise InstanceFormatError("base file needs a 'bundles' list")
    return Allocation(tuple(int(b) for b in bundles))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    name = args.generator
    if name == "bad-nsw":
        inst = gen_bad_nsw(parse_rational(args.eps))
    elif name == "tightness":
        inst = gen_tightness(args.n)
    elif name == "imposs":
        inst = gen_imposs(args.n, args.m, parse_rational(args.eps))
    elif name == "constant-sum":
        inst = gen_constant_sum(args.n, args.m)
    elif name == "sqrt":
        inst = gen_sqrt(args.m)
    elif name == "random":
        if args.seed is None:
            raise InstanceFormatError("gen random requires an explicit --seed")
        inst = gen_random(args.n, args.m, args.klass, args.seed)
    else:
        raise InstanceFormatError(f"unknown generator {name!r}")
    text = instance_to_json(inst)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(
        f"wrote {args.out}: n={inst.n} m={inst.m} class={inst.declared_class}"
        f" verified={inst.class_verified}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    alpha = parse_rational(args.alpha) if args.alpha else None
    rho = parse_rational(args.rho) if args.rho else None
    start = time.perf_counter()
    alg = args.alg
    if alg == "baseline":
        result = subadditive_baseline(inst, rhos=(rho,) if rho is not None else ())
    elif alg == "bounded":
        if args.base:
            base = _read_base_file(args.base)
        else:
            base = envy_cycles(inst, inst.full_mask, Allocation((0,) * inst.n))
        bound = bounded_envy(inst, base)
        result = make_envy_free_from_bounded(inst, base, bound)
    elif alg == "nsw":
        base = _read_base_file(args.base) if args.base else None
        result = nsw_pipeline_additive(
            inst, ef1_nsw_input=base, alpha=alpha if alpha is not None else Fraction(1)
        )
    elif alg == "nsw-matroid":
        result = nsw_pipeline_matroid(inst)
    elif alg == "alg1":
        if alpha is None:
            raise InstanceFormatError("alg1 requires --alpha")
        result = welfare_target_additive(inst, alpha)
    elif alg == "alg2":
        if alpha is None:
            raise InstanceFormatError("alg2 requires --alpha")
        result = welfare_target_general(inst, alpha)
    else:
        raise InstanceFormatError(f"unknown algorithm {alg!r}")
    timing_ms = int((time.perf_counter() - start) * 1000)
    report = run_report(inst, result, timing_ms)
    text = _dump(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    failing = [c for c in result.certificates if not c.holds]
    if failing:
        print(f"certificate failed: {failing[0].name}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _read_instance(args.instance)
    with open(args.result, "r", encoding="utf-8") as fh:
        stored = json.load(fh)
    try:
        res = stored["result"] if "result" in stored else stored
        bundles = tuple(int(b) for b in res["allocation"]["bundles"])
        transfer_vals = tuple(parse_number(p) for p in res["transfers"])
        algorithm = res["algorithm"]["name"]
        params = _params_from_obj(
            {k: v for k, v in res["algorithm"].items() if k != "name"}
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed result file: {exc}") from exc
    alloc = Allocation(bundles)
    outcome: dict = {"check": args.check, "ok": True}
    code = EXIT_OK

    def fail(witness):
        nonlocal code
        outcome["ok"] = False
        outcome["witness"] = witness
        code = EXIT_FAILED

    if args.check == "ef":
        try:
            transfers = PaymentVector(transfer_vals, "transfer")
        except FairDivisionError:
            transfers = None
            fail("transfers do not sum to zero")
        if transfers is not None:
            check = is_envy_free(inst, alloc, transfers)
            if not check.ok:
                fail(
                    {
                        "pair": list(check.worst_pair),
                        "violation": format_number(check.violation),
                    }
                )
    elif args.check == "efable":
        cert = is_envy_freeable(inst, alloc)
        if not cert.verdict:
            fail({"cycle": list(cert.cycle), "weight": format_number(cert.cycle_weight)})
    elif args.check == "ef1":
        if not is_ef1(inst, alloc):
            fail("allocation is not EF1")
    elif args.check == "bounds":
        try:
            transfers = PaymentVector(transfer_vals, "transfer")
        except FairDivisionError:
            transfers = None
            fail("transfers do not sum to zero")
        if transfers is not None:
            certs = certificates_for(inst, alloc, transfers, algorithm, params)
            outcome["certificates"] = [_cert_to_obj(c) for c in certs]
            bad = [c.name for c in certs if not c.holds]
            if bad:
                fail({"failed_certificates": bad})
    else:
        raise InstanceFormatError(f"unknown check {args.check!r}")
    print(_dump(outcome))
    return code


def cmd_oracle(args) -> int:
    inst = _read_instance(args.instance)
    workers = args.workers
    task = args.task
    out: dict = {"task": task}
    if task == "sw-opt":
        alloc = brute_sw_opt(inst, workers=workers)
        out["allocation"] = [str(b) for b in alloc.bundles]
        out["value"] = format_number(social_welfare(inst, alloc))
    elif task == "nsw-opt":
        alloc = brute_nsw_opt(inst, workers=workers)
        prod = Fraction(1)
        for a in range(inst.n):
            prod = prod * inst.value(a, alloc.bundles[a])
        out["allocation"] = [str(b) for b in alloc.bundles]
        out["nash_product"] = format_number(prod)
    elif task == "enum-efable":
        if workers > 1:
            allocs = enumerate_envy_freeable_parallel(inst, workers)
        else:
            allocs = list(enumerate_envy_freeable(inst))
        out["count"] = len(allocs)
        out["allocations"] = [[str(b) for b in a.bundles] for a in allocs]
    elif task == "min-transfer":
        alloc = _read_allocation_arg(inst, args.alloc or "nsw-opt")
        payments, total = min_total_transfer(inst, alloc)
        out["allocation"] = [str(b) for b in alloc.bundles]
        out["transfers"] = [format_number(p) for p in payments.payments]
        out["total"] = format_number(total)
    elif task == "min-transfer-at-welfare":
        if args.alpha is None:
            raise InstanceFormatError("min-transfer-at-welfare requires --alpha")
        val = min_transfer_at_welfare(inst, parse_rational(args.alpha), args.welfare)
        out["alpha"] = args.alpha
        out["welfare"] = args.welfare
        out["value"] = None if val is None else format_number(val)
    else:
        raise InstanceFormatError(f"unknown task {task!r}")
    print(_dump(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairtransfers",
        description="Envy-free allocation with transfer payments, exact arithmetic",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a paper-family instance")
    p_gen.add_argument("generator", choices=[
        "bad-nsw", "tightness", "imposs", "constant-sum", "sqrt", "random",
    ])
    p_gen.add_argument("--n", type=int, default=None)
    p_gen.add_argument("--m", type=int, default=None)
    p_gen.add_argument("--eps", type=str, default=None)
    p_gen.add_argument("--class", dest="klass", type=str, default="additive",
                       choices=["additive", "subadditive", "matroid_rank", "monotone"])
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("-o", "--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", help="run an algorithm and emit a report")
    p_solve.add_argument("-i", "--instance", required=True)
    p_solve.add_argument("--alg", required=True, choices=[
        "baseline", "bounded", "nsw", "nsw-matroid", "alg1", "alg2",
    ])
    p_solve.add_argument("--alpha", type=str, default=None)
    p_solve.add_argument("--rho", type=str, default=None)
    p_solve.add_argument("--base", type=str, default=None,
                         help="JSON file with a start allocation (bundles list)")
    p_solve.add_argument("-o", "--out", default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="re-verify a stored result from scratch")
    p_verify.add_argument("-i", "--instance", required=True)
    p_verify.add_argument("-r", "--result", required=True)
    p_verify.add_argument("--check", required=True,
                          choices=["ef", "efable", "ef1", "bounds"])
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser("oracle", help="run a brute-force oracle")
    p_oracle.add_argument("-i", "--instance", required=True)
    p_oracle.add_argument("--task", required=True, choices=[
        "sw-opt", "nsw-opt", "enum-efable", "min-transfer", "min-transfer-at-welfare",
    ])
    p_oracle.add_argument("--alpha", type=str, default=None)
    p_oracle.add_argument("--welfare", type=str, default="sw", choices=["sw", "nsw"])
    p_oracle.add_argument("--alloc", type=str, default=None,
                          help="'sw-opt', 'nsw-opt', or comma-separated bundle bitmasks")
    p_oracle.add_argument("--workers", type=int, default=1)
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FairDivisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
