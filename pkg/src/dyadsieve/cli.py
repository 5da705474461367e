"""Command-line frontend.

Subcommands: sequence, check, sieve, witness, dimension, oracle,
report.  Inputs come from a config file plus --section.key=value
overrides; all results go to files in the output directory, and every
report embeds the sha256 fingerprint of the resolved configuration.
Reports are byte-deterministic for a fixed config: exact quantities
are printed as "p/q" strings, decimals appear only as diagnostics,
and nothing time- or host-dependent is written.

Exit codes: 0 success, 1 condition violated (or an internal certified
bound failed), 2 witness search exhausted, 3 config/parameter error,
4 precision ceiling reached or verdict inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .config import RunConfig, load_config, parse_fraction, parse_int
from .dimension import (
    CONVERGENT,
    ChainGrowthData,
    EgglestonData,
    chain_data,
    dimension_lower_bound,
    series_terms,
)
from .enclosure import format_decimal
from .errors import (
    EXIT_CONDITION,
    EXIT_CONFIG,
    EXIT_EXHAUSTED,
    EXIT_OK,
    EXIT_PRECISION,
    BudgetExceeded,
    ConditionViolated,
    InternalBoundBreach,
    ParameterError,
    PrecisionError,
    SearchExhausted,
)
from .oracle import compare_with_sieve, exact_bad_set
from .schedule import (
    ConstantH,
    LogLagH,
    PowerLogDelta,
    Schedule,
    autotune_kappa,
    build_chain,
    check_conditions,
    preset_constant,
    preset_power_log,
    ShapedDelta,
    LaggedGrowthH,
)
from .sequences import growth_index_H, term
from .sieve import extract_witness, run_sieve_full, verify_certificate

# ---------------------------------------------------------------------------
# plumbing


def _write_json(out_dir: str, name: str, obj) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(obj, indent=2, sort_keys=True))
        f.write("\n")
    return path


def _write_csv(out_dir: str, name: str, header, rows) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


def _base_report(cfg: RunConfig, command: str) -> Dict:
    return {
        "command": command,
        "fingerprint": cfg.fingerprint(),
        "config": cfg.resolved(),
    }


def _require_N(cfg: RunConfig) -> int:
    n = cfg.int("run", "N")
    if n is None:
        raise ParameterError("missing required config key run.N")
    if n < 1:
        raise ParameterError("run.N must be >= 1")
    return n


def _build_schedule(cfg: RunConfig, spec, N: int) -> Tuple[Schedule, Dict]:
    """Schedule from config, plus any search/tune diagnostics."""
    preset = cfg.get("schedule", "preset")
    if preset is None:
        raise ParameterError("missing required config key schedule.preset")
    eta = cfg.fraction("schedule", "eta")
    if eta is None:
        raise ParameterError("missing required config key schedule.eta")
    extras: Dict = {}
    prec = cfg.precision

    if preset == "constant":
        delta = cfg.fraction("schedule", "delta")
        h_const = cfg.int("schedule", "h.const")
        if delta is None or h_const is None:
            raise ParameterError(
                "preset 'constant' needs schedule.delta and schedule.h.const"
            )
        return preset_constant(delta, h_const, eta), extras

    if preset == "custom-kappa":
        shape = cfg.get("schedule", "delta.shape", "sqrt-log")
        kappa = cfg.fraction("schedule", "kappa")
        if kappa is None:
            sched, tune = autotune_kappa(spec, eta, N, shape=shape, prec=prec)
            extras["tune"] = tune.to_json()
            return sched, extras
        delta = ShapedDelta(kappa, shape)
        h_const = cfg.int("schedule", "h.const")
        h = ConstantH(h_const) if h_const is not None else LaggedGrowthH(spec, delta, prec)
        return Schedule(h=h, delta=delta, eta=eta, name="shaped-kappa"), extras

    if preset in ("example-a", "power-log"):
        beta = cfg.fraction("schedule", "beta")
        gamma = cfg.fraction("schedule", "gamma")
        if beta is None or gamma is None:
            raise ParameterError(
                f"preset {preset!r} needs schedule.beta and schedule.gamma"
            )
        c1 = cfg.int("schedule", "c1")
        c2 = cfg.int("schedule", "c2")
        if c1 is not None and c2 is not None:
            sched = Schedule(
                h=LogLagH(beta, c1, c2),
                delta=PowerLogDelta(beta, eta, c1, c2),
                eta=eta,
                name="power-log",
            )
            return sched, extras
        n_probe = cfg.int("schedule", "n_probe") or min(N, 200)
        sched, rep = preset_power_log(spec, gamma, beta, eta, n_probe, prec)
        extras["search"] = {
            "n_probe": n_probe,
            "report": rep.to_json(),
            "c1": sched.h.c1,
            "c2": sched.h.c2,
        }
        return sched, extras

    raise ParameterError(
        f"schedule.preset must be constant, custom-kappa or example-a, got {preset!r}"
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_sequence(cfg: RunConfig) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    prec = cfg.precision
    report = _base_report(cfg, "sequence")
    rows = []
    for n in range(1, N + 1):
        t = term(spec, n, prec)
        if t.is_exact:
            rows.append({"n": n, "value": str(t.lo)})
        else:
            rows.append(
                {"n": n, "lo": format_decimal(t.lo, 20), "hi": format_decimal(t.hi, 20)}
            )
    report["terms"] = rows
    tau = cfg.fraction("run", "tau")
    if tau is not None:
        report["growth_index"] = [
            {"n": n, "value": growth_index_H(spec, n, tau)} for n in range(1, N + 1)
        ]
    report["kind"] = spec.describe()
    _write_json(cfg.out_dir, "report.json", report)
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    schedule, extras = _build_schedule(cfg, spec, N)
    rep = check_conditions(spec, schedule, N=N, mode=cfg.check_mode, prec=cfg.precision)
    report = _base_report(cfg, "check")
    report["conditions"] = rep.to_json()
    report["schedule"] = schedule.describe()
    report.update(extras)
    _write_json(cfg.out_dir, "report.json", report)
    if rep.all_pass:
        return EXIT_OK
    statuses = {v.status for v in rep.verdicts.values()}
    return EXIT_CONDITION if "fail" in statuses else EXIT_PRECISION


def cmd_sieve(cfg: RunConfig) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    schedule, extras = _build_schedule(cfg, spec, N)
    report = _base_report(cfg, "sieve")
    report.update(extras)
    try:
        trace = run_sieve_full(spec, schedule, N=N, prec=cfg.precision)
    except ConditionViolated as e:
        report["error"] = "condition-violated"
        report["message"] = str(e)
        if e.report is not None:
            report["conditions"] = e.report.to_json()
        _write_json(cfg.out_dir, "report.json", report)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONDITION
    _write_json(cfg.out_dir, "trace.json", trace.to_json())
    report["final_measure"] = str(trace.final_measure)
    report["final_bound"] = str(trace.final_bound)
    report["chain"] = list(trace.chain.nodes)
    report["checkpoints"] = [c.to_json() for c in trace.checkpoints]
    _write_json(cfg.out_dir, "report.json", report)
    return EXIT_OK


def cmd_witness(cfg: RunConfig) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    schedule, extras = _build_schedule(cfg, spec, N)
    report = _base_report(cfg, "witness")
    report.update(extras)
    try:
        cert = extract_witness(
            spec, schedule, N=N, pick_policy=cfg.pick, prec=cfg.precision
        )
    except ConditionViolated as e:
        report["error"] = "condition-violated"
        report["message"] = str(e)
        if e.report is not None:
            report["conditions"] = e.report.to_json()
        _write_json(cfg.out_dir, "report.json", report)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONDITION
    except SearchExhausted as e:
        report["error"] = "search-exhausted"
        report["message"] = str(e)
        _write_json(cfg.out_dir, "report.json", report)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EXHAUSTED
    _write_json(cfg.out_dir, "certificate.json", cert.to_json())
    margins = [m.margin_low for m in cert.margins]
    report["alpha"] = f"{cert.alpha_num}/2^{cert.alpha_bits}"
    report["binary"] = "0." + cert.binary()
    report["min_margin"] = str(min(margins)) if margins else None
    report["checked"] = cert.N
    _write_json(cfg.out_dir, "report.json", report)
    return EXIT_OK


def _dimension_source(cfg: RunConfig):
    src = cfg.get("dimension", "source", "chain")
    if src == "eggleston":
        sigma = cfg.fraction("dimension", "sigma")
        m = cfg.int("dimension", "m")
        stages = cfg.int("dimension", "stages", "12")
        if sigma is None or m is None:
            raise ParameterError(
                "dimension.source=eggleston needs dimension.sigma and dimension.m"
            )
        return EgglestonData.geometric(sigma, m, stages)
    if src == "chain":
        rho = cfg.fraction("dimension", "rho")
        if rho is not None:
            eta = cfg.fraction("dimension", "eta")
            first = cfg.fraction("dimension", "first", "1")
            stages = cfg.int("dimension", "stages", "12")
            if eta is None:
                raise ParameterError("dimension.rho needs dimension.eta")
            return ChainGrowthData.geometric(eta, first, rho, stages)
        spec = cfg.sequence_spec()
        N = _require_N(cfg)
        schedule, _ = _build_schedule(cfg, spec, N)
        chain = build_chain(schedule, N)
        return chain_data(spec, schedule, chain, cfg.precision)
    raise ParameterError(f"dimension.source must be eggleston or chain, got {src!r}")


def cmd_dimension(cfg: RunConfig, threads: int = 1) -> int:
    source = _dimension_source(cfg)
    prec = cfg.precision
    k_max = cfg.int("dimension", "k_max", "12")
    eps = cfg.fraction("dimension", "eps", str(Fraction(1, 1 << 10)))
    report = _base_report(cfg, "dimension")

    nu_text = cfg.get("dimension", "nu")
    series_report = None
    if nu_text is not None:
        nus = [parse_fraction(t, "dimension.nu") for t in nu_text.split(",") if t.strip()]
        workers = max(1, min(threads, len(nus)))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                reports = list(pool.map(lambda v: series_terms(source, v, k_max, prec), nus))
        else:
            reports = [series_terms(source, v, k_max, prec) for v in nus]
        report["series"] = [r.to_json() for r in reports]
        series_report = reports[0]

    dim = dimension_lower_bound(source, eps=eps, k_max=k_max, prec=prec)
    report["dimension"] = dim.to_json()
    if series_report is None and dim.nu_star > 0:
        series_report = series_terms(source, dim.nu_star, k_max, prec)
    if series_report is not None:
        _write_csv(
            cfg.out_dir,
            "series.csv",
            ["k", "term", "ratio", "partial_sum"],
            series_report.csv_rows(),
        )
        report["series_nu"] = str(series_report.nu)
    _write_json(cfg.out_dir, "report.json", report)
    inconclusive = dim.uncertain is not None or (
        series_report is not None and series_report.verdict not in (CONVERGENT,)
        and nu_text is not None
    )
    return EXIT_PRECISION if inconclusive else EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    schedule, extras = _build_schedule(cfg, spec, N)
    prec = cfg.precision

    def delta_fn(n: int):
        return schedule.delta_at(n, prec)

    bad = exact_bad_set(spec, delta_fn, N)
    report = _base_report(cfg, "oracle")
    report.update(extras)
    report["bad_set"] = bad.to_json()
    try:
        trace = run_sieve_full(spec, schedule, N=N, prec=prec)
        comparison = compare_with_sieve(
            bad, _final_survivors(spec, schedule, N, prec), spec, delta_fn, N
        )
        report["comparison"] = comparison.to_json()
        report["final_measure"] = str(trace.final_measure)
    except ConditionViolated as e:
        report["comparison"] = None
        report["note"] = f"sieve not run: {e}"
    _write_json(cfg.out_dir, "report.json", report)
    return EXIT_OK


def _final_survivors(spec, schedule, N, prec):
    """Survivor RunSet after all N steps (recomputed, full mode)."""
    from .runset import RunSet
    from .sieve import exclusion_cover, level

    radii = {n: schedule.delta_at(n, prec).hi for n in range(1, N + 1)}
    s = RunSet.full(level(term(spec, 1, prec), radii[1]))
    for n in range(1, N + 1):
        l = level(term(spec, n, prec), radii[n])
        s = s.refine(max(l, s.level))
        s = s.subtract(exclusion_cover(spec, n, radii[n], s.level, prec=prec))
    return s


def cmd_report(cfg: RunConfig, threads: int = 1) -> int:
    spec = cfg.sequence_spec()
    N = _require_N(cfg)
    schedule, extras = _build_schedule(cfg, spec, N)
    prec = cfg.precision
    report = _base_report(cfg, "report")
    report.update(extras)
    worst = EXIT_OK

    conditions = check_conditions(spec, schedule, N=N, mode=cfg.check_mode, prec=prec)
    report["conditions"] = conditions.to_json()
    if not conditions.all_pass:
        statuses = {v.status for v in conditions.verdicts.values()}
        worst = EXIT_CONDITION if "fail" in statuses else EXIT_PRECISION
        report["note"] = "schedule conditions did not pass; run sections skipped"
        _write_json(cfg.out_dir, "report.json", report)
        return worst

    if cfg.mode == "full":
        trace = run_sieve_full(spec, schedule, N=N, prec=prec)
        _write_json(cfg.out_dir, "trace.json", trace.to_json())
        report["sieve"] = {
            "final_measure": str(trace.final_measure),
            "final_bound": str(trace.final_bound),
            "chain": list(trace.chain.nodes),
        }
    else:
        try:
            cert = extract_witness(
                spec, schedule, N=N, pick_policy=cfg.pick, prec=prec
            )
            _write_json(cfg.out_dir, "certificate.json", cert.to_json())
            report["witness"] = {
                "alpha": f"{cert.alpha_num}/2^{cert.alpha_bits}",
                "min_margin": str(min(m.margin_low for m in cert.margins)),
            }
        except SearchExhausted as e:
            report["witness"] = {"error": "search-exhausted", "message": str(e)}
            worst = max(worst, EXIT_EXHAUSTED)

    if "dimension" in cfg.raw:
        dim = dimension_lower_bound(
            _dimension_source(cfg),
            eps=cfg.fraction("dimension", "eps", str(Fraction(1, 1 << 10))),
            k_max=cfg.int("dimension", "k_max", "12"),
            prec=prec,
        )
        report["dimension"] = dim.to_json()
        if dim.uncertain is not None:
            worst = max(worst, EXIT_PRECISION)

    _write_json(cfg.out_dir, "report.json", report)
    return worst


# ---------------------------------------------------------------------------
# argument handling


COMMANDS = {
    "sequence": cmd_sequence,
    "check": cmd_check,
    "sieve": cmd_sieve,
    "witness": cmd_witness,
    "dimension": cmd_dimension,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def _split_overrides(rest: List[str]) -> Dict[Tuple[str, str], str]:
    overrides: Dict[Tuple[str, str], str] = {}
    i = 0
    while i < len(rest):
        arg = rest[i]
        if not arg.startswith("--") or "." not in arg:
            raise ParameterError(f"unrecognized argument {arg!r}")
        body = arg[2:]
        if "=" in body:
            key_path, value = body.split("=", 1)
        else:
            if i + 1 >= len(rest):
                raise ParameterError(f"override {arg!r} is missing a value")
            key_path, value = body, rest[i + 1]
            i += 1
        section, _, key = key_path.partition(".")
        if not section or not key:
            raise ParameterError(f"override {arg!r} must look like --section.key=value")
        overrides[(section, key)] = value
        i += 1
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dyadsieve",
        description="Exact dyadic exclusion sieve: certificates, witnesses, "
        "dimension bounds.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--N", help="shorthand for --run.N")
    parser.add_argument("--out", help="shorthand for --output.dir")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker cap for batch series evaluations (dimension/report)",
    )
    args, rest = parser.parse_known_args(argv)

    try:
        overrides = _split_overrides(rest)
        if args.N is not None:
            parse_int(args.N, "--N")
            overrides[("run", "N")] = args.N
        if args.out is not None:
            overrides[("output", "dir")] = args.out
        cfg = load_config(args.config, overrides)
        handler = COMMANDS[args.command]
        if args.command in ("dimension", "report"):
            return handler(cfg, threads=max(1, args.threads))
        return handler(cfg)
    except (ParameterError, BudgetExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditionViolated as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONDITION
    except SearchExhausted as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except PrecisionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECISION
    except InternalBoundBreach as e:
        print(f"internal bound breach: {e}", file=sys.stderr)
        return EXIT_CONDITION


if __name__ == "__main__":
    sys.exit(main())
