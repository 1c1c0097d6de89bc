"""Command line front end: ``dynfpca <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .basis import DEFAULT_NBASIS, center
from .dpca import (
    DEFAULT_EPSILON,
    DEFAULT_LMAX,
    dynamic_kl_reconstruct,
    dynamic_scores,
    eigendecompose,
    filter_coefficients,
    model_from_dict,
    model_to_dict,
    nmse,
    pv_dyn,
)
from .errors import DataError, InvalidArgumentError, NumericalError, PreconditionError
from .simgen import (
    PROTOCOLS,
    BenchmarkConfig,
    benchmark_csv,
    make_operator,
    noise_profile,
    parse_kind,
    run_benchmark,
    simulate_far1,
)
from .spca import static_fpca, static_reconstruct, static_scores
from .specden import DEFAULT_NTHETA, WEIGHTS, default_bandwidth, estimate_sdm

log = logging.getLogger("dynfpca")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _kappa(text):
    k = float(text)
    if not 0 < k < 1:
        raise argparse.ArgumentTypeError(f"kappa must satisfy 0 < kappa < 1 (stationarity), got {k}")
    return k


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _epsilon(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1), got {v}")
    return v


def _figdir(args):
    return Path(args.figures) if getattr(args, "figures", None) else None


def _load_centered(path, d=None):
    return center(io.read_series(path, d))


# -- simulate -------------------------------------------------------------


def cmd_simulate(args) -> int:
    proto = PROTOCOLS[args.protocol]
    op_seed, noise_seed = (int(v) for v in np.random.SeedSequence(args.seed).generate_state(2))
    op = make_operator(args.psi, args.d, args.kappa, op_seed, proto["psi2_variant"], proto["psi_as"])
    nv = noise_profile(proto["noise"], args.d, parse_kind(args.psi))
    series = simulate_far1(op, args.n, nv, args.burn_in, noise_seed)
    io.write_coeffs(args.out, series)
    log.info("wrote %d x %d coefficients to %s", series.n, series.d, args.out)
    if args.curves:
        io.write_curves(args.curves, series, np.linspace(0.0, 1.0, args.grid_size))
        log.info("wrote evaluated curves to %s", args.curves)
    return EXIT_OK


# -- fit ------------------------------------------------------------------


def _parse_ref(text, d):
    if text in (None, "", "constant"):
        return None
    ref = _floats(text)
    if len(ref) != d:
        raise UsageError(f"--ref needs {d} comma-separated coefficients, got {len(ref)}")
    return np.array(ref)


def fit_model(x, args):
    if args.p > x.d:
        raise UsageError(f"--p {args.p} exceeds the basis dimension d={x.d}")
    q = args.q if args.q is not None else default_bandwidth(x.n)
    if q >= x.n:
        raise UsageError(f"--q must be smaller than n={x.n}")
    sdm = estimate_sdm(x, q=q, weight=args.weight, n_theta=args.ntheta)
    eigen = eigendecompose(sdm, args.p, ref=_parse_ref(args.ref, x.d))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        model = filter_coefficients(
            eigen, args.epsilon, min(args.lmax, args.ntheta), basis=x.basis, truncation=args.truncation
        )
    for w in caught:
        log.warning("%s", w.message)
    return model, q


def cmd_fit(args) -> int:
    x = _load_centered(args.input, args.d)
    model, q = fit_model(x, args)
    obj = model_to_dict(model)
    obj["fit"] = {
        "q": q,
        "n_theta": args.ntheta,
        "weight": args.weight,
        "epsilon": args.epsilon,
        "l_max": args.lmax,
        "truncation": args.truncation,
        "n": x.n,
        "mean": x.mean.tolist(),
    }
    io.write_json(args.out, obj)

    smodel = static_fpca(x, args.p)
    total_static = float(np.trace(x.coeffs.T @ x.coeffs / x.n @ x.basis.gram))
    rows = []
    for m in range(model.p):
        rows.append(
            [
                m + 1,
                model.L,
                int(model.component_lags[m]),
                float(model.captured_mass[m]),
                pv_dyn(model.eigen, x, m + 1),
                float(smodel.eigenvalues[: m + 1].sum() / total_static),
                float(model.eigen.lambdas[m, 0]),
                float(model.eigen.gaps[m]),
            ]
        )
    report = args.report or str(Path(args.out).with_suffix("")) + "_report.csv"
    io.write_table(
        report,
        ["component", "L", "lag_m", "captured_mass", "pv_dyn", "pv_static", "lambda0", "min_gap"],
        rows,
    )
    print(f"n={x.n} d={x.d} q={q} n_theta={args.ntheta} L={model.L}" + (" (capped)" if model.lag_capped else ""))
    for r in rows:
        print(f"component {r[0]}: PV_dyn={r[4]:.4f} PV_static={r[5]:.4f} mass={r[3]:.4f} min_gap={r[7]:.3g}")
    figs = _figdir(args)
    if figs:
        from . import plotting

        plotting.plot_eigenvalues(model.eigen, figs / "eigenvalues.png")
        plotting.plot_filters(model, figs / "filters.png")
    return EXIT_OK


# -- transform / reconstruct / cusum -------------------------------------------


def _model_and_data(args):
    model = model_from_dict(io.read_json(args.model))
    x = _load_centered(args.input, model.basis.d)
    if not x.basis.same_as(model.basis):
        raise PreconditionError("data basis does not match the model basis")
    return model, x


def cmd_transform(args) -> int:
    model, x = _model_and_data(args)
    if args.kind == "static":
        smodel = static_fpca(x, model.p)
        scores = static_scores(x, smodel)
    else:
        scores = dynamic_scores(x, model)
    io.write_scores(args.out, scores)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    model, x = _model_and_data(args)
    p = model.p if args.p is None else args.p
    if not 1 <= p <= model.p:
        raise UsageError(f"--p must lie in 1..{model.p}")
    if args.scores:
        scores = io.read_scores(args.scores, "dynamic", model.L)
        if scores.n != x.n or scores.p < p:
            raise DataError(f"{args.scores}: scores do not match data/model dimensions")
    else:
        scores = dynamic_scores(x, model)
    dyn = dynamic_kl_reconstruct(scores, model, p)
    smodel = static_fpca(x, p)
    stat = static_reconstruct(static_scores(x, smodel), smodel, p)
    summary = {"p": p, "n": x.n, "L": model.L, "nmse_dynamic": nmse(x, dyn), "nmse_static": nmse(x, stat)}
    io.write_coeffs(args.out, dyn)
    io.write_json(args.summary or str(Path(args.out).with_suffix("")) + "_summary.json", summary)
    print(f"NMSE dynamic={summary['nmse_dynamic']:.6f} static={summary['nmse_static']:.6f} (p={p})")
    figs = _figdir(args)
    if figs:
        from . import plotting

        plotting.plot_reconstructions(x, stat, dyn, figs / "reconstruction.png")
    return EXIT_OK


def cmd_cusum(args) -> int:
    from .apps import cusum_dyn

    model, x = _model_and_data(args)
    scores = dynamic_scores(x, model)
    res = cusum_dyn(scores, model.lambda0())
    io.write_table(args.out, ["x", "T"], zip(res.x.tolist(), res.values.tolist()))
    summary = {
        "sup_stat": res.sup_stat,
        "sup_bridge_scale": res.bridge_sup,
        "lambdas0": res.lambdas0.tolist(),
        "n": x.n,
        "p": model.p,
    }
    io.write_json(args.summary or str(Path(args.out).with_suffix("")) + "_summary.json", summary)
    print(f"sup T = {res.sup_stat:.6f} (divided by (2 pi)^2: {res.bridge_sup:.6f})")
    figs = _figdir(args)
    if figs:
        from . import plotting

        plotting.plot_cusum(res, figs / "cusum.png")
    return EXIT_OK


# -- benchmark -------------------------------------------------------------


def cmd_benchmark(args) -> int:
    try:
        cfg = BenchmarkConfig.from_protocol(
            args.protocol,
            kinds=tuple(parse_kind(k) for k in args.kinds.split(",")),
            dims=tuple(_ints(args.dims)),
            kappas=tuple(_floats(args.kappas)),
            components=tuple(_ints(args.components)),
            n=args.n,
            reps=args.reps,
            q=args.q,
            n_theta=args.ntheta,
            epsilon=args.epsilon,
            l_max=args.lmax,
            seed=args.seed,
            truncation=args.truncation,
        )
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_benchmark(cfg, workers=args.workers)
    Path(args.out).write_text(benchmark_csv(rows))
    for r in rows:
        print(f"{r.kind} d={r.d} kappa={r.kappa:g} p={r.p} {r.method:8s} {r.mean_nmse:.3f} ({10 * r.sd_nmse:.2f})")
    figs = _figdir(args)
    if figs:
        from . import plotting

        plotting.plot_benchmark(rows, figs / "benchmark.png")
    return EXIT_OK


def _add_fit_args(p):
    p.add_argument("--p", type=_positive_int, default=3, help="number of dynamic components (default 3)")
    p.add_argument("--q", type=_positive_int, default=None, help="lag-window bandwidth (default floor(sqrt(n)))")
    p.add_argument("--ntheta", type=_positive_int, default=DEFAULT_NTHETA, help="frequency grid half-size")
    p.add_argument("--epsilon", type=_epsilon, default=DEFAULT_EPSILON, help="filter mass threshold")
    p.add_argument("--lmax", type=int, default=DEFAULT_LMAX, help="cap on the filter lag L")
    p.add_argument("--weight", choices=sorted(WEIGHTS), default="bartlett")
    p.add_argument("--truncation", choices=("joint", "per-component"), default="joint")
    p.add_argument("--ref", default=None, help="reference coefficients for phase alignment (comma list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynfpca", description="Dynamic functional PCA toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a functional AR(1) series")
    s.add_argument("--psi", default="1", help="operator family 1, 2 or 3")
    s.add_argument("--d", type=_positive_int, default=DEFAULT_NBASIS)
    s.add_argument("--kappa", type=_kappa, required=True)
    s.add_argument("--n", type=_positive_int, default=400)
    s.add_argument("--burn-in", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--protocol", choices=sorted(PROTOCOLS), default="calibrated")
    s.add_argument("--out", required=True, help="coefficient CSV")
    s.add_argument("--curves", default=None, help="optional CSV of curves evaluated on a grid")
    s.add_argument("--grid-size", type=_positive_int, default=101)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit dynamic FPCs to a curve or coefficient CSV")
    f.add_argument("--input", required=True)
    f.add_argument("--d", type=_positive_int, default=None, help="basis size when projecting raw curves")
    _add_fit_args(f)
    f.add_argument("--out", required=True, help="model JSON")
    f.add_argument("--report", default=None, help="report CSV (default <out>_report.csv)")
    f.add_argument("--figures", default=None, help="directory for PNG figures")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("transform", help="compute dynamic (or static) scores")
    t.add_argument("--input", required=True)
    t.add_argument("--model", required=True)
    t.add_argument("--kind", choices=("dynamic", "static"), default="dynamic")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("reconstruct", help="dynamic and static Karhunen-Loeve reconstructions")
    r.add_argument("--input", required=True)
    r.add_argument("--model", required=True)
    r.add_argument("--p", type=_positive_int, default=None)
    r.add_argument("--scores", default=None, help="dynamic scores CSV from 'transform'")
    r.add_argument("--out", required=True, help="reconstructed coefficient CSV")
    r.add_argument("--summary", default=None)
    r.add_argument("--figures", default=None)
    r.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("cusum", help="CUSUM functional of the dynamic scores")
    c.add_argument("--input", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--summary", default=None)
    c.add_argument("--figures", default=None)
    c.set_defaults(func=cmd_cusum)

    b = sub.add_parser("benchmark", help="Monte Carlo comparison of static and dynamic FPCA")
    b.add_argument("--kinds", default="1,2,3")
    b.add_argument("--dims", default="15")
    b.add_argument("--kappas", default="0.1,0.3,0.6,0.9")
    b.add_argument("--components", default="1,2,3,6")
    b.add_argument("--n", type=_positive_int, default=400)
    b.add_argument("--reps", type=_positive_int, default=50)
    b.add_argument("--q", type=_positive_int, default=None)
    b.add_argument("--ntheta", type=_positive_int, default=DEFAULT_NTHETA)
    b.add_argument("--epsilon", type=_epsilon, default=DEFAULT_EPSILON)
    b.add_argument("--lmax", type=int, default=DEFAULT_LMAX)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--protocol", choices=sorted(PROTOCOLS), default="calibrated")
    b.add_argument("--truncation", choices=("joint", "per-component"), default="joint")
    b.add_argument("--workers", type=_positive_int, default=None, help="worker processes (capped by DYNFPC_THREADS)")
    b.add_argument("--out", required=True)
    b.add_argument("--figures", default=None)
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError) as exc:
        parser.print_usage(sys.stderr)
        print(f"dynfpca {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, PreconditionError) as exc:
        print(f"dynfpca {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"dynfpca {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
