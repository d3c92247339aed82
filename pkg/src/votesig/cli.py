"""Command-line interface: ``votesig <subcommand> ...``.

Exit codes: 0 on success, 2 on validation errors (bad flags, files or
schemas), 3 when a result is infeasible or double precision is exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import io as vio
from ._quad import GL_ORDER
from .estimation import (CountsError, count_pmf, exact_prefix, nonident_pair, plugin_error_bound,
                         plugin_signature, prefix_to_increments, read_counts_csv, signed_prefix,
                         write_counts_csv)
from .laws import DEFAULT_R_GRID, FIGURE1_LAWS, LawValidationError, make_named, margin_mass_bound_holds
from .plurality import StateSpaceTooLarge, plurality_accuracy, plurality_accuracy_mc, plurality_endpoint
from .shape import (MarginCondition, PrecisionExhausted, bridge_bound, classify_shape, near_zero_bound,
                    oscillation_signs, signature_support_radius, variation_bound)
from .signature import SignatureError, curve, curve_direct, endpoint, moments, pushforward, recover_moments
from .simulate import SimConfig, mc_curve, simulate_counts

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3


def _meta(**extra):
    meta = {"tool": "votesig", "version": __version__, "quadrature_order": GL_ORDER}
    meta.update(extra)
    return meta


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out=None):
    _emit(json.dumps(obj, indent=2) + "\n", out)


# --- subcommands ---------------------------------------------------------------------------


def cmd_curve(args):
    law = vio.load_law(args.law)
    c = curve(law, args.n_max, r_grid_size=args.r_grid)
    _emit(vio.curve_csv(c.values), args.out)


def cmd_signature(args):
    law = vio.load_law(args.law)
    sig = pushforward(law, r_grid_size=args.r_grid)
    obj = vio.signature_to_json(sig)
    obj["meta"] = _meta(r_grid_size=args.r_grid, total_variation=sig.total_variation())
    _emit_json(obj, args.out)


def cmd_recover(args):
    c = vio.read_curve_csv(args.curve)
    if c.n_max < 1:
        raise vio.FormatError(f"{args.curve}: need at least rows n=0 and n=1")
    pre = recover_moments(c)
    _emit_json({"s": pre.s.tolist(), "increments": c.increments().tolist(),
                "meta": _meta(n_max=c.n_max)}, args.out)


def cmd_endpoint(args):
    obj = vio.load_law(args.law) if args.law else vio.load_signature(args.signature)
    _emit_json({"endpoint": endpoint(obj), "meta": _meta()}, args.out)


def cmd_bounds(args):
    law = vio.load_law(args.law)
    sig = pushforward(law, r_grid_size=args.r_grid)
    tv = sig.total_variation()
    result = {"kind": args.kind, "total_variation": tv}
    if args.kind == "variation":
        m = args.m if args.m is not None else args.n + 1
        sum_form, closed = variation_bound(min(tv, 1.0), args.n, m)
        actual = float(abs(np.diff(curve_direct(law, [args.n, m]))[0]))
        result.update(n=args.n, m=m, sum_form=sum_form, closed_form=closed, observed=actual,
                      holds=bool(actual <= sum_form + 1e-12))
    elif args.kind == "near-zero":
        a = args.a if args.a is not None else signature_support_radius(sig)
        if not 0 < a < 0.25:
            raise LawValidationError(f"support radius a={a} is not in (0, 1/4); pass --a or use a law away from q=1/2")
        if signature_support_radius(sig) > a + 1e-15:
            raise LawValidationError(f"signature support reaches r={signature_support_radius(sig)} > a={a}")
        bound = near_zero_bound(tv, a, args.n)
        actual = abs(endpoint(law) - float(curve_direct(law, [args.n])[0]))
        result.update(n=args.n, a=a, bound=bound, observed_to_endpoint=actual,
                      holds=bool(actual <= bound + 1e-12))
    else:
        if args.C is None or args.kappa is None or args.t0 is None:
            raise LawValidationError("bridge bounds need --C, --kappa and --t0")
        cond = MarginCondition(args.C, args.kappa, args.t0)
        if not margin_mass_bound_holds(law, cond.C, cond.kappa, cond.t0):
            raise LawValidationError(f"law violates the margin condition {cond}")
        bound = bridge_bound(cond, args.n)
        actual = abs(endpoint(law) - float(curve_direct(law, [args.n])[0]))
        result.update(n=args.n, C=cond.C, kappa=cond.kappa, t0=cond.t0, bound=bound,
                      observed_to_endpoint=actual, holds=bool(actual <= bound + 1e-12))
    result["meta"] = _meta(r_grid_size=args.r_grid)
    _emit_json(result, args.out)


def cmd_shape(args):
    sig = pushforward(vio.load_law(args.law), r_grid_size=args.r_grid)
    _emit_json({"shape": classify_shape(sig), "meta": _meta(r_grid_size=args.r_grid)}, args.out)


def cmd_oscillate(args):
    rows = oscillation_signs(args.j_max)
    _emit_json({"signs": [{"j": j, "k": k, "sign": s} for j, k, s in rows],
                "alternating": all(s == (-1) ** j for j, _, s in rows),
                "meta": _meta(j_max=args.j_max)}, args.out)


def cmd_estimate(args):
    sample = read_counts_csv(args.counts, args.depth)
    pre = signed_prefix(sample)
    obj = {"depth": args.depth, "n_examples": sample.n_examples, "s": pre.s.tolist(),
           "stderr": pre.stderr.tolist(), "covariance": pre.covariance.tolist(),
           "increments": [{"k": k, "value": v} for k, v in prefix_to_increments(pre)] if pre.s.size > 1 else []}
    if args.plugin:
        sig = plugin_signature(sample)
        obj["plugin"] = vio.signature_to_json(sig)
        obj["plugin_bound_phi_r"] = plugin_error_bound(0.25, 1.0, sample.n_examples, args.depth)
    obj["meta"] = _meta()
    _emit_json(obj, args.out)


def cmd_simulate(args):
    law = vio.load_law(args.law)
    cfg = SimConfig(args.seed, args.examples, args.depth, args.workers)
    if args.curve is not None:
        _emit(vio.mc_curve_csv(mc_curve(law, args.curve, cfg)), args.out)
        return
    sample = simulate_counts(law, cfg)
    if args.out:
        write_counts_csv(args.out, sample)
    else:
        write_counts_csv(sys.stdout, sample)


def cmd_nonident(args):
    law1, law2, k = nonident_pair(args.depth)
    p1, p2 = count_pmf(law1, args.depth), count_pmf(law2, args.depth)
    s1, s2 = moments(pushforward(law1), k), moments(pushforward(law2), k)
    _emit_json({
        "depth": args.depth, "law_1": vio.law_to_json(law1), "law_2": vio.law_to_json(law2),
        "count_pmf_1": p1.tolist(), "count_pmf_2": p2.tolist(),
        "max_count_pmf_difference": float(np.abs(p1 - p2).max()),
        "identified_prefix_1": exact_prefix(p1).tolist(), "identified_prefix_2": exact_prefix(p2).tolist(),
        "witness_k": k, "s_witness_1": float(s1[k]), "s_witness_2": float(s2[k]),
        "s_witness_difference": float(s1[k] - s2[k]),
        "meta": _meta(),
    }, args.out)


def cmd_plurality(args):
    try:
        p = [float(x) for x in args.p.split(",")]
    except ValueError:
        raise LawValidationError(f"--p must be comma-separated reals, got {args.p!r}") from None
    obj = {"p": p, "m": args.m, "endpoint": plurality_endpoint(p)}
    if args.mc:
        est, se = plurality_accuracy_mc(p, args.m, args.mc, args.seed)
        obj.update(accuracy=est, stderr=se, method="monte_carlo")
        obj["meta"] = _meta(seed=args.seed, reps=args.mc)
    else:
        obj.update(accuracy=plurality_accuracy(p, args.m), method="exact")
        obj["meta"] = _meta()
    _emit_json(obj, args.out)


def cmd_figure1(args):
    curves = {name: curve(make_named("figure1", name=name), args.n_max).values for name in FIGURE1_LAWS}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, vals in curves.items():
            _emit(vio.curve_csv(vals), os.path.join(args.out, name.replace(" ", "_") + ".csv"))
        return
    for name, vals in curves.items():
        sys.stdout.write(f"# {name}\n")
        sys.stdout.write(vio.curve_csv(vals))


# --- parser --------------------------------------------------------------------------------


def _positive_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {val}")
    return val


def _nonneg_int(text):
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {val}")
    return val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="votesig", description="Odd-budget majority voting curves and signed signatures.")
    ap.add_argument("--version", action="version", version=f"votesig {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", help="output file (default: stdout)")
        return p

    p = add("curve", cmd_curve, "voting curve V_0..V_N as CSV")
    p.add_argument("--law", required=True)
    p.add_argument("--n-max", type=_nonneg_int, required=True)
    p.add_argument("--r-grid", type=_positive_int, default=DEFAULT_R_GRID)

    p = add("signature", cmd_signature, "signed voting signature as JSON")
    p.add_argument("--law", required=True)
    p.add_argument("--r-grid", type=_positive_int, default=DEFAULT_R_GRID)

    p = add("recover", cmd_recover, "signed moments from a curve CSV")
    p.add_argument("--curve", required=True)

    p = add("endpoint", cmd_endpoint, "large-budget limit of the curve")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--law")
    g.add_argument("--signature")

    p = add("bounds", cmd_bounds, "variation, near-zero or bridge bounds, checked against the law")
    p.add_argument("--law", required=True)
    p.add_argument("--kind", choices=["variation", "near-zero", "bridge"], required=True)
    p.add_argument("--n", type=_nonneg_int, default=0)
    p.add_argument("--m", type=_positive_int)
    p.add_argument("--C", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--r-grid", type=_positive_int, default=DEFAULT_R_GRID)

    p = add("shape", cmd_shape, "monotone_up, monotone_down or mixed")
    p.add_argument("--law", required=True)
    p.add_argument("--r-grid", type=_positive_int, default=DEFAULT_R_GRID)

    p = add("oscillate", cmd_oscillate, "certified increment signs of the oscillating law")
    p.add_argument("--j-max", type=_positive_int, required=True)

    p = add("estimate", cmd_estimate, "signed-moment prefix from grouped counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--depth", type=_positive_int, required=True)
    p.add_argument("--plugin", action="store_true", help="also emit the plug-in signature")

    p = add("simulate", cmd_simulate, "synthetic grouped counts, or a Monte Carlo curve with --curve")
    p.add_argument("--law", required=True)
    p.add_argument("--depth", type=_positive_int, required=True)
    p.add_argument("--examples", type=_positive_int, required=True)
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.add_argument("--curve", type=_nonneg_int, metavar="N_MAX")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = add("nonident", cmd_nonident, "two laws with equal count laws but different signatures")
    p.add_argument("--depth", type=_positive_int, required=True)

    p = add("plurality", cmd_plurality, "multiclass plurality accuracy")
    p.add_argument("--p", required=True, help="comma-separated class probabilities, correct class first")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--mc", type=_positive_int, metavar="REPS")
    p.add_argument("--seed", type=_nonneg_int, default=0)

    p = add("figure1", cmd_figure1, "curves of the five gallery laws")
    p.add_argument("--n-max", type=_nonneg_int, default=30)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (PrecisionExhausted, StateSpaceTooLarge, ArithmeticError) as exc:
        print(f"votesig {args.command}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LawValidationError, SignatureError, CountsError, vio.FormatError, ValueError, OSError) as exc:
        print(f"votesig {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
