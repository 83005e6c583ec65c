"""Command-line front end.

Every computation is exposed as a subcommand writing machine-readable output
(JSON with an embedded manifest, or CSV with a sidecar manifest); --plot
additionally renders a matplotlib figure next to the output file.  stdout
carries machine output only; diagnostics go to stderr.

Exit codes: 0 success, 2 invalid flags or parameters, 3 tolerance not met,
4 ambiguous root count, 5 discarded-trial fraction above 5 percent.
"""

import argparse
import math
import os
import sys
import time

import numpy as np

from . import plots, report
from .errors import (HierlapError, PoleProximity, RecurrentRegime,
                     RootCountAmbiguous, ToleranceNotMet)
from .laplacian import (PowerLaw, TabulatedMultiplier, heat_kernel_certified,
                        heat_kernel_diag_certified, jump_constant, kappa,
                        lambda_of_rank)
from .lattice import distance
from .perturb import (Potential, finite_rank_roots, neg_count, neg_threshold,
                      rank_one_roots)
from .sparse import (SparseConfig, essential_spectrum_sparse,
                     fractional_moment_estimate, localization_diagnostics)

_DISCARD_LIMIT = 0.05


def _threads() -> int:
    raw = os.environ.get("HIERLAP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parse_multiplier(args):
    if getattr(args, "phi_table", None):
        with open(args.phi_table, encoding="utf-8") as fh:
            values = [float(line.split(",")[0]) for line in fh
                      if line.strip() and not line.startswith("#")]
        return TabulatedMultiplier(tuple(values))
    if getattr(args, "alpha", None) is None:
        raise ValueError("either --alpha or --phi-table is required")
    return PowerLaw(alpha=args.alpha)


def _parse_float_list(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_locations(text: str, p: int, limit: int):
    """Comma-separated integers, or geometric:BASE for a_i = BASE**i, i >= 1."""
    if text.startswith("geometric:"):
        base = int(text.split(":", 1)[1])
        if base < p:
            raise ValueError(f"geometric base must be at least p = {p}")
        locs, a = [], base
        while a < limit:
            locs.append(a)
            a *= base
        if not locs:
            raise ValueError(f"geometric base {base} produces no locations below {limit}")
        return locs
    locs = [int(tok) for tok in text.split(",") if tok.strip()]
    if not locs:
        raise ValueError("empty location list")
    return locs


def _parse_grid(text: str):
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise ValueError(f"malformed grid {text!r}, expected lo:hi:steps") from exc
    if steps < 1 or hi < lo:
        raise ValueError(f"malformed grid {text!r}")
    return np.linspace(lo, hi, steps)


def _parse_range(text: str):
    try:
        lo, hi = (float(tok) for tok in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"malformed range {text!r}, expected lo:hi") from exc
    return lo, hi


def _plot_path(args) -> str:
    if not args.out:
        raise ValueError("--plot requires --out")
    stem, _ = os.path.splitext(args.out)
    return stem + ".png"


def _emit_json(args, schema, subcommand, params, payload, seed=None, wall=0.0):
    doc = report.build_document(schema, subcommand, params, payload,
                                seed=seed, wall_time_s=wall)
    if args.out:
        report.write_document(args.out, doc)
    else:
        sys.stdout.write(doc)


def _entry_payload(entry) -> dict:
    return {
        "value": entry.value,
        "kind": entry.kind,
        "gap": entry.gap,
        "multiplicity": "infinite" if math.isinf(entry.multiplicity) else entry.multiplicity,
        "residual": entry.residual,
    }


def cmd_spectrum(args) -> int:
    spec = _parse_multiplier(args)
    sigmas = _parse_float_list(args.sigma)
    if any(s == 0.0 for s in sigmas):
        raise ValueError("sigma must be nonzero")
    if args.loc is not None:
        locs = _parse_locations(args.loc, args.p, limit=2**62)
    else:
        if len(sigmas) > 1:
            raise ValueError("--loc is required when more than one sigma is given")
        locs = [0]
    if len(locs) != len(sigmas):
        raise ValueError(f"{len(sigmas)} sigmas but {len(locs)} locations")

    t0 = time.perf_counter()
    if len(sigmas) == 1:
        result = rank_one_roots(sigmas[0], args.p, spec, k_max=args.gaps, tol=args.tol)
    else:
        pot = Potential(tuple(zip(locs, sigmas)))
        result = finite_rank_roots(pot, args.p, spec, k_max=args.gaps, tol=args.tol)
    wall = time.perf_counter() - t0

    params = {"p": args.p, "sigma": sigmas, "loc": locs, "gaps": args.gaps,
              "tol": args.tol, "multiplier": result.config["multiplier"]}
    payload = {"entries": [_entry_payload(e) for e in result.entries],
               "config": result.config}
    _emit_json(args, "spectrum-report/v1", "spectrum", params, payload, wall=wall)
    if args.csv:
        rows = [(e.value, e.kind, "" if e.gap is None else e.gap, e.residual)
                for e in result.entries]
        report.write_csv(args.csv, ("value", "kind", "gap", "residual"), rows,
                         "spectrum", params, wall_time_s=wall)
    if args.plot:
        plots.plot_spectrum(result, _plot_path(args))
    return 0


def cmd_phase_diagram(args) -> int:
    alphas = _parse_grid(args.alpha_grid)
    sigmas = _parse_grid(args.sigma_grid)
    if alphas[0] <= 0 or sigmas[0] <= 0:
        raise ValueError("phase-diagram grids must be strictly positive")
    t0 = time.perf_counter()
    rows = []
    grid = np.zeros((len(alphas), len(sigmas)), dtype=int)
    for i, alpha in enumerate(alphas):
        star = neg_threshold(args.p, alpha)
        for j, sigma in enumerate(sigmas):
            n = neg_count(alpha, sigma, args.p)
            grid[i, j] = n
            rows.append((alpha, sigma, n, star))
    wall = time.perf_counter() - t0
    params = {"p": args.p, "alpha_grid": args.alpha_grid, "sigma_grid": args.sigma_grid}
    report.write_csv(args.out, ("alpha", "sigma", "neg_count", "sigma_star"), rows,
                     "phase-diagram", params, wall_time_s=wall)
    if args.plot:
        plots.plot_phase_diagram(alphas, sigmas, grid, _plot_path(args))
    return 0


def cmd_heat_kernel(args) -> int:
    spec = _parse_multiplier(args)
    lo, hi, steps = args.t_grid.split(":")
    ts = np.geomspace(float(lo), float(hi), int(steps))
    if args.diag and args.pairs:
        raise ValueError("--diag and --pairs are mutually exclusive")
    if args.diag:
        pairs = [(0, 0)]
    elif args.pairs:
        pairs = []
        for tok in args.pairs.split(","):
            x, y = tok.split(":")
            pairs.append((int(x), int(y)))
    else:
        raise ValueError("either --diag or --pairs is required")

    is_power = isinstance(spec, PowerLaw)
    header = ["t", "x", "y", "value", "tail_bound"]
    if args.diag and is_power:
        header.append("func_eq_residual")
    t0 = time.perf_counter()
    rows = []
    for t in ts:
        for x, y in pairs:
            value, bound = heat_kernel_certified(float(t), x, y, args.p, spec, args.tol)
            row = [float(t), x, y, value, bound]
            if args.diag and is_power:
                kap = kappa(args.p, spec)
                lhs, _ = heat_kernel_diag_certified(float(t) / kap, args.p, spec, args.tol)
                rhs = value / args.p + (1.0 - 1.0 / args.p) * math.exp(-float(t) / kap)
                row.append(abs(lhs - rhs))
            rows.append(tuple(row))
    wall = time.perf_counter() - t0
    params = {"p": args.p, "t_grid": args.t_grid, "tol": args.tol,
              "pairs": [list(pr) for pr in pairs], "diag": bool(args.diag)}
    report.write_csv(args.out, header, rows, "heat-kernel", params, wall_time_s=wall)
    if args.plot:
        plots.plot_heat_kernel(rows, _plot_path(args))
    return 0


def _interval_payload(iv) -> dict:
    return {"gap": iv.gap, "lo": iv.lo, "hi": iv.hi, "lo_residual": iv.lo_residual,
            "hi_residual": iv.hi_residual, "clipped_at_zero": iv.clipped_at_zero}


def cmd_sparse_ess(args) -> int:
    spec = _parse_multiplier(args)
    lo, hi = _parse_range(args.range)
    locs = _parse_locations(args.locations, args.p, limit=2**62)
    cfg = SparseConfig(locations=tuple(locs), amplitude_range=(lo, hi))
    t0 = time.perf_counter()
    ess = essential_spectrum_sparse(cfg, args.p, spec, k_max=args.gaps, tol=args.tol)
    wall = time.perf_counter() - t0
    payload = {
        "inherited": list(ess.inherited),
        "intervals": [_interval_payload(iv) for iv in ess.intervals],
        "negative": _interval_payload(ess.negative) if ess.negative else None,
        "config": ess.config,
    }
    params = {"p": args.p, "range": args.range, "gaps": args.gaps, "tol": args.tol,
              "locations": locs}
    _emit_json(args, "sparse-ess/v1", "sparse-ess", params, payload, wall=wall)
    if args.plot:
        plots.plot_sparse_ess(ess, _plot_path(args))
    return 0


def cmd_localize(args) -> int:
    spec = _parse_multiplier(args)
    lo, hi = _parse_range(args.range)
    block = args.p**args.depth
    locs = _parse_locations(args.locations, args.p, limit=block)
    cfg = SparseConfig(locations=tuple(locs), amplitude_range=(lo, hi))

    t0 = time.perf_counter()
    ess1 = essential_spectrum_sparse(cfg, args.p, spec, k_max=1)
    gap_width = lambda_of_rank(args.p, spec, 1) - lambda_of_rank(args.p, spec, 2)
    tau = args.tau if args.tau is not None else 0.5 * (ess1.intervals[0].lo
                                                       + ess1.intervals[0].hi)
    eps = args.eps if args.eps is not None else 1e-3 * gap_width
    moment = fractional_moment_estimate(cfg, args.p, spec, s=args.s, tau=tau, eps=eps,
                                        y=args.y, trials=args.trials, seed=args.seed)
    loc_report = localization_diagnostics(cfg, args.p, spec, depth=args.depth,
                                          trials=args.trials, seed=args.seed,
                                          threads=_threads())
    wall = time.perf_counter() - t0

    discarded_fraction = moment.trials_discarded / args.trials
    dists = [distance(args.p, a, args.y) for a in cfg.locations]
    payload = {
        "moments": {
            "s": moment.s, "tau": moment.tau, "eps": moment.eps,
            "per_location": [
                {"location": a, "distance": d, "mean": m, "stderr": se}
                for (a, m, se), d in zip(moment.per_location, dists)
            ],
            "trials_effective": moment.trials_effective,
            "trials_discarded": moment.trials_discarded,
        },
        "decay": {
            "median_slope": loc_report.median_slope,
            "median_slope_ci95": list(loc_report.median_slope_ci95),
            "n_eigenvectors": int(len(loc_report.decay_slopes)),
            "ipr_median": float(np.median(loc_report.iprs)) if len(loc_report.iprs) else None,
            "outside_mass_fraction": loc_report.outside_mass_fraction,
            "windows": [list(w) for w in loc_report.windows],
            "note": "finite-volume decay statistics; absence of continuous "
                    "spectrum is not verifiable at finite depth",
        },
        "discarded_fraction": discarded_fraction,
        "config": loc_report.config,
    }
    params = {"p": args.p, "range": args.range, "locations": locs, "s": args.s,
              "tau": tau, "eps": eps, "trials": args.trials, "depth": args.depth,
              "y": args.y}
    _emit_json(args, "localize-report/v1", "localize", params, payload,
               seed=args.seed, wall=wall)
    if args.plot:
        plots.plot_localize(moment, dists, loc_report, _plot_path(args))
    if discarded_fraction > _DISCARD_LIMIT:
        print(f"discarded-trial fraction {discarded_fraction:.3f} exceeds "
              f"{_DISCARD_LIMIT}", file=sys.stderr)
        return 5
    return 0


def cmd_constants(args) -> int:
    p = args.p
    lines = []
    if args.z is not None:
        denom = 1.0 - p ** (-args.z)
        if abs(denom) < 1e-300:
            raise ValueError(f"gamma_p has a pole at z = {args.z}")
        gamma = (1.0 - p ** (args.z - 1.0)) / denom
        lines.append(f"gamma_p({report.fmt_float(args.z)}) = {report.fmt_float(gamma)}")
    if args.alpha is not None:
        a = args.alpha
        gamma_neg = (1.0 - p ** (-a - 1.0)) / (1.0 - p**a)
        lines.append(f"inv_gamma_p(-{report.fmt_float(a)}) = "
                     f"{report.fmt_float(1.0 / gamma_neg)}")
        lines.append(f"jump_constant = {report.fmt_float(jump_constant(p, a))}")
    if not lines:
        raise ValueError("provide --z and/or --alpha")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _add_multiplier_flags(sub):
    sub.add_argument("--alpha", type=float, default=None,
                     help="power-law multiplier exponent")
    sub.add_argument("--phi-table", default=None,
                     help="file with a decreasing eigenvalue table, one per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierlap")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("spectrum", help="perturbed point spectrum")
    sp.add_argument("--p", type=int, required=True)
    _add_multiplier_flags(sp)
    sp.add_argument("--sigma", required=True, help="comma-separated amplitudes")
    sp.add_argument("--loc", default=None, help="comma-separated locations or geometric:BASE")
    sp.add_argument("--gaps", type=int, default=3)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out", default=None)
    sp.add_argument("--csv", default=None)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_spectrum)

    pd = subs.add_parser("phase-diagram", help="bound-state count over an (alpha, sigma) grid")
    pd.add_argument("--p", type=int, required=True)
    pd.add_argument("--alpha-grid", required=True, help="lo:hi:steps")
    pd.add_argument("--sigma-grid", required=True, help="lo:hi:steps")
    pd.add_argument("--out", required=True)
    pd.add_argument("--plot", action="store_true")
    pd.set_defaults(func=cmd_phase_diagram)

    hk = subs.add_parser("heat-kernel", help="heat kernel values on a time grid")
    hk.add_argument("--p", type=int, required=True)
    _add_multiplier_flags(hk)
    hk.add_argument("--t-grid", required=True, help="lo:hi:steps, log-spaced")
    hk.add_argument("--pairs", default=None, help="x:y,x:y,...")
    hk.add_argument("--diag", action="store_true")
    hk.add_argument("--tol", type=float, default=1e-13)
    hk.add_argument("--out", required=True)
    hk.add_argument("--plot", action="store_true")
    hk.set_defaults(func=cmd_heat_kernel)

    se = subs.add_parser("sparse-ess", help="essential spectrum for sparse random bumps")
    se.add_argument("--p", type=int, required=True)
    _add_multiplier_flags(se)
    se.add_argument("--range", required=True, help="amplitude range lo:hi")
    se.add_argument("--gaps", type=int, default=3)
    se.add_argument("--tol", type=float, default=1e-10)
    se.add_argument("--locations", default="geometric:4", help="echoed into the config")
    se.add_argument("--out", default=None)
    se.add_argument("--plot", action="store_true")
    se.set_defaults(func=cmd_sparse_ess)

    lz = subs.add_parser("localize", help="fractional moments and eigenvector decay")
    lz.add_argument("--p", type=int, required=True)
    _add_multiplier_flags(lz)
    lz.add_argument("--locations", required=True)
    lz.add_argument("--range", required=True, help="amplitude range lo:hi")
    lz.add_argument("--s", type=float, default=0.3)
    lz.add_argument("--tau", type=float, default=None,
                    help="default: midpoint of the first-gap interval")
    lz.add_argument("--eps", type=float, default=None,
                    help="default: 1e-3 times the first gap width")
    lz.add_argument("--y", type=int, default=0)
    lz.add_argument("--trials", type=int, required=True)
    lz.add_argument("--seed", type=int, required=True)
    lz.add_argument("--depth", type=int, required=True)
    lz.add_argument("--out", default=None)
    lz.add_argument("--plot", action="store_true")
    lz.set_defaults(func=cmd_localize)

    ct = subs.add_parser("constants", help="normalization constants")
    ct.add_argument("--p", type=int, required=True)
    ct.add_argument("--z", type=float, default=None)
    ct.add_argument("--alpha", type=float, default=None)
    ct.set_defaults(func=cmd_constants)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToleranceNotMet as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RootCountAmbiguous as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError, RecurrentRegime, PoleProximity, HierlapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
