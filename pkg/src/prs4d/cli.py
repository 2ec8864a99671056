"""Batch command-line front-end.

Every capability is exposed as a subcommand emitting CSV or JSON; any sweep
output can additionally be rendered to a figure with ``--plot``.  All
commands are deterministic given their flags (seeds default to a fixed
value).  Exit codes: 0 success, 2 argument error, 3 validation error,
4 model-domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import air, formats, link, optimize
from .constellation import (
    LabeledConstellation,
    distance_spectrum,
    dumps_constellation,
    gray_check,
    is_constant_modulus,
    normalize,
    project_2d,
    read_constellation,
    standardized_moment,
    write_constellation,
)
from .errors import ModelDomainError, ValidationError


def _parse_range(text: str) -> list[float]:
    """Parse 'start:stop:step' with inclusive endpoints."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from exc
    if step <= 0:
        raise argparse.ArgumentTypeError(f"step must be positive in {text!r}")
    if stop < start:
        raise argparse.ArgumentTypeError(f"stop < start in {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(n)]


def _parse_samples(text: str) -> int:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sample count {text!r}") from exc
    if v < 1 or v != int(v) and v > 1e18:
        raise argparse.ArgumentTypeError(f"bad sample count {text!r}")
    return int(v)


def _resolve_format(ref: str, es: float = 2.0) -> LabeledConstellation:
    if ref.endswith(".json") or "/" in ref:
        try:
            c = read_constellation(ref)
        except FileNotFoundError as exc:
            raise ValidationError(f"constellation file not found: {ref}") from exc
        return normalize(c, es)
    return formats.by_name(ref, es)


def _write_text(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(fieldnames: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        out = []
        for name in fieldnames:
            v = row.get(name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.12g}")
            else:
                out.append(str(v))
        writer.writerow(out)
    return buf.getvalue()


def _rows_text(fieldnames: list[str], rows: list[dict], fmt: str) -> str:
    """Sweep rows in the requested output format (csv default, json array)."""
    if fmt == "json":
        ordered = [{k: r.get(k) for k in fieldnames} for r in rows]
        return json.dumps(ordered, indent=2) + "\n"
    return _csv_text(fieldnames, rows)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    c = _resolve_format(args.format_ref, args.es)
    spec = distance_spectrum(c)
    proj1, counts1 = project_2d(c, 1)
    proj2, counts2 = project_2d(c, 2)
    try:
        p = formats.prs_params_from_points(c)
        prs_params = {"r": p.r, "theta_deg": p.theta_deg}
    except ValidationError:
        prs_params = None
    energies = c.energies
    report = {
        "name": c.name(),
        "m": c.m,
        "points": c.M,
        "es": c.mean_energy,
        "energy_min": float(energies.min()),
        "energy_max": float(energies.max()),
        "constant_modulus": is_constant_modulus(c, 1e-9),
        "mu4": standardized_moment(c, 4),
        "mu6": standardized_moment(c, 6),
        "gray_labeled": gray_check(c),
        "msed": spec.msed,
        "msed_pairs": spec.msed_count,
        "projection_points": {"pol1": int(len(counts1)), "pol2": int(len(counts2))},
        "prs_params": prs_params,
        "spectrum": [{"d2": e.d2, "count": e.count, "hd1_count": e.hd1_count}
                     for e in spec.entries],
    }
    if args.format == "csv":
        flat = {k: v for k, v in report.items()
                if not isinstance(v, (dict, list, type(None)))}
        if prs_params:
            flat["prs_r"] = prs_params["r"]
            flat["prs_theta_deg"] = prs_params["theta_deg"]
        text = _csv_text(list(flat), [flat])
    else:
        text = json.dumps(report, indent=2) + "\n"
    _write_text(text, args.out)
    if args.plot:
        from . import plots
        plots.plot_analysis(c, args.plot)
    return 0


def cmd_air(args) -> int:
    c = _resolve_format(args.format_ref)
    rows = air.sweep_air(c, args.snr, n=args.samples, seed=args.seed,
                         estimator=args.estimator)
    fields = ["snr_db", "mi", "mi_stderr", "gmi", "gmi_stderr", "samples", "seed"]
    _write_text(_rows_text(fields, rows, args.format), args.out)
    if args.plot:
        from . import plots
        plots.plot_air_sweep(rows, c.name(), args.plot)
    return 0


def cmd_prs_gen(args) -> int:
    c = formats.prs_from_params(formats.PrsParams(args.r, args.theta, args.es))
    if args.out:
        write_constellation(c, args.out)
    else:
        sys.stdout.write(dumps_constellation(c))
    return 0


def cmd_prs_sweep(args) -> int:
    res = optimize.prs_param_sweep(args.snr, args.r, args.theta,
                                   samples=args.samples, seed=args.seed,
                                   refine=not args.no_refine,
                                   refine_nodes=args.refine_nodes)
    rows = [{"r": r, "theta_deg": t, "gmi": g} for r, t, g in res.rows]
    _write_text(_rows_text(["r", "theta_deg", "gmi"], rows, args.format), args.out)
    summary = {"r_opt": res.r_opt, "theta_opt": res.theta_opt, "gmi_opt": res.gmi_opt}
    print(json.dumps(summary), file=sys.stderr)
    if args.plot:
        from . import plots
        plots.plot_prs_surface(res.rows, res.r_opt, res.theta_opt, args.plot)
    return 0


def cmd_prs_opt(args) -> int:
    rows = optimize.prs_opt_over_snr(args.snr, samples=args.samples,
                                     seed=args.seed,
                                     refine_nodes=args.refine_nodes)
    _write_text(_rows_text(["snr_db", "r_opt", "theta_opt", "gmi_opt"], rows,
                           args.format), args.out)
    if args.plot:
        from . import plots
        plots.plot_prs_opt(rows, args.plot)
    return 0


def cmd_optimize(args) -> int:
    init = _resolve_format(args.init)
    cfg = optimize.OptimizerConfig(
        snr_db=args.snr, poa_iters=args.poa_iters, bsa_passes=args.bsa_passes,
        outer_iters=args.outer_iters, seed=args.seed,
        symmetry_mode=("orthant-locked" if args.symmetry == "orthant" else "free"),
        surrogate_samples=args.surrogate_samples, final_samples=args.samples)
    trace = optimize.joint_optimize(init, cfg)
    if args.out:
        write_constellation(trace.constellation, args.out)
    else:
        sys.stdout.write(dumps_constellation(trace.constellation))
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(trace.as_jsonl())
    print(json.dumps({"objective": trace.objective, "gmi": trace.gmi.value,
                      "gmi_stderr": trace.gmi.stderr,
                      "accepted_moves": len(trace.records)}), file=sys.stderr)
    return 0


def _load_link(args) -> link.LinkSpec:
    spec = link.load_link_spec(args.link) if args.link else link.DEFAULT_LINK
    if getattr(args, "spans", None):
        spec = spec.with_spans(args.spans)
    return spec


def cmd_link_power(args) -> int:
    c = _resolve_format(args.format_ref)
    spec = _load_link(args)
    rows = []
    for p_dbm in args.power:
        p = link.dbm_to_watt(p_dbm)
        op = link.operating_point(spec, c, p)
        row = {"p_dbm": p_dbm, "snr_eff_db": op.snr_eff_db, "gmi": None}
        if args.gmi_samples:
            row["gmi"] = air.gmi_mc(c, air.AwgnSpec(op.snr_eff_db),
                                    args.gmi_samples, args.seed).value
        rows.append(row)
    _write_text(_rows_text(["p_dbm", "snr_eff_db", "gmi"], rows, args.format),
                args.out)
    p_opt, snr_opt = link.optimal_launch_power(spec, c)
    print(json.dumps({"p_opt_dbm": p_opt, "snr_eff_opt_db": snr_opt}), file=sys.stderr)
    if args.plot:
        from . import plots
        plots.plot_link_power(rows, c.name(), args.plot)
    return 0


def cmd_link_distance(args) -> int:
    c = _resolve_format(args.format_ref)
    spec = _load_link(args)
    rows = link.air_vs_distance(spec, c, args.distance, samples=args.samples,
                                seed=args.seed)
    reach = (link.reach_at_threshold(rows, args.reach_at)
             if args.reach_at is not None else None)
    _write_text(_rows_text(["distance_km", "p_opt_dbm", "snr_eff_db", "gmi"], rows,
                           args.format), args.out)
    if reach is not None:
        print(json.dumps({"threshold": args.reach_at, "reach_km": reach}),
              file=sys.stderr)
    if args.plot:
        from . import plots
        plots.plot_link_distance(rows, c.name(), args.plot)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prs4d",
        description="Design and analysis of constant-modulus 4D modulation formats.",
        epilog="Formats: " + ", ".join(formats.FORMAT_NAMES) +
               ", or a constellation JSON file path. "
               "PRS4D_THREADS sets the worker thread count (results are "
               "independent of it).")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, samples_default=air.DEFAULT_SAMPLES):
        p.add_argument("--samples", type=_parse_samples, default=samples_default,
                       help="Monte-Carlo sample count (accepts 1e6 notation)")
        p.add_argument("--seed", type=int, default=air.DEFAULT_SEED)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output encoding for sweep rows")

    p = sub.add_parser("analyze", help="structural report of a format")
    p.add_argument("format_ref", metavar="FORMAT")
    p.add_argument("--es", type=float, default=2.0, help="normalize to this energy")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="json report (default) or a flat csv summary")
    p.add_argument("--plot", help="render projections and distance histogram to a file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("air", help="rate-vs-SNR sweep (CSV)")
    p.add_argument("format_ref", metavar="FORMAT")
    p.add_argument("--snr", type=_parse_range, required=True, metavar="A:B:S")
    p.add_argument("--estimator", choices=("mi", "gmi", "both"), default="both")
    add_common(p)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_air)

    p = sub.add_parser("prs", help="ring-switching family tools")
    prs_sub = p.add_subparsers(dest="prs_command", required=True)

    g = prs_sub.add_parser("gen", help="emit the constellation for given (r, theta)")
    g.add_argument("--r", type=float, required=True)
    g.add_argument("--theta", type=float, required=True)
    g.add_argument("--es", type=float, default=2.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_prs_gen)

    g = prs_sub.add_parser("sweep", help="GMI surface over an (r, theta) grid")
    g.add_argument("--snr", type=float, required=True)
    g.add_argument("--r", type=_parse_range, required=True, metavar="A:B:S")
    g.add_argument("--theta", type=_parse_range, required=True, metavar="A:B:S")
    add_common(g, samples_default=100_000)
    g.add_argument("--refine-nodes", type=int, default=10,
                   help="quadrature nodes per dimension for the refinement stage")
    g.add_argument("--no-refine", action="store_true")
    g.add_argument("--plot")
    g.set_defaults(func=cmd_prs_sweep)

    g = prs_sub.add_parser("opt", help="optimal (r, theta) per SNR")
    g.add_argument("--snr", type=_parse_range, required=True, metavar="A:B:S")
    add_common(g, samples_default=100_000)
    g.add_argument("--refine-nodes", type=int, default=10,
                   help="quadrature nodes per dimension for the refinement stage")
    g.add_argument("--plot")
    g.set_defaults(func=cmd_prs_opt)

    p = sub.add_parser("optimize", help="joint coordinates-and-labeling optimization")
    p.add_argument("--init", required=True, help="format name or constellation file")
    p.add_argument("--snr", type=float, default=8.0)
    p.add_argument("--symmetry", choices=("orthant", "free"), default="orthant")
    p.add_argument("--poa-iters", type=int, default=20,
                   help="pair repositionings per outer round")
    p.add_argument("--bsa-passes", type=int, default=1)
    p.add_argument("--outer-iters", type=int, default=30)
    p.add_argument("--surrogate-samples", type=_parse_samples, default=0,
                   help="0 uses the closed-form objective")
    add_common(p)
    p.add_argument("--trace", help="write accepted moves as JSON lines")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("link", help="analytic multi-span link evaluation")
    link_sub = p.add_subparsers(dest="link_command", required=True)

    g = link_sub.add_parser("power", help="effective SNR over a launch-power sweep")
    g.add_argument("format_ref", metavar="FORMAT")
    g.add_argument("--link", help="link config JSON (default: shipped calibration)")
    g.add_argument("--power", type=_parse_range, default=_parse_range("-8:2:0.5"),
                   metavar="A:B:S",
                   help="launch power sweep in dBm (write --power=-8:2:0.5 "
                        "when the range starts with a negative number)")
    g.add_argument("--spans", type=int)
    g.add_argument("--gmi-samples", type=_parse_samples, default=0,
                   help="also estimate the rate at each power (0: skip)")
    g.add_argument("--seed", type=int, default=air.DEFAULT_SEED)
    g.add_argument("--out")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--plot")
    g.set_defaults(func=cmd_link_power)

    g = link_sub.add_parser("distance", help="rate vs distance at optimal power")
    g.add_argument("format_ref", metavar="FORMAT")
    g.add_argument("--link")
    g.add_argument("--distance", type=_parse_range, required=True, metavar="A:B:S",
                   help="distances in km (multiples of the span length)")
    g.add_argument("--reach-at", type=float,
                   help="also report the distance where the rate crosses this value")
    add_common(g, samples_default=200_000)
    g.add_argument("--plot")
    g.set_defaults(func=cmd_link_distance)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelDomainError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
