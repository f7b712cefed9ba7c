"""Command-line pipeline: ols, moran, gwr, mgwr, mediate, mediate-spatial, map, synth.

Every run writes ``manifest.json`` next to its outputs with the resolved
configuration, seed and library version. The manifest leaves out the
thread count and output directory so that reruns with different
``--threads`` are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .core_model import PLANAR, WGS84, Dataset, ModelSpec, Schema, load_dataset, standardize
from .errors import BadConfig, EmptySamples, GeomediateError
from .gwr import KernelSpec, gwr_fit, select_bandwidth
from .mediation import fit_global_mediation, fit_spatial_mediation, path_fit_indices
from .mgwr import MgwrConfig, mgwr_fit
from .regress import screen_predictors
from .spatial_weights import knn_weights, metric_for, morans_i
from .surfaces import export_csv, export_geojson, idw_interpolate, make_grid, render_svg_heatmap
from .synth import SynthConfig, config_from_dict, gen_synthetic

log = logging.getLogger("geomediate")

OUT_ENV = "GEOMEDIATE_OUT"
# not part of the numeric result, so kept out of the manifest
UNRECORDED = {"threads", "out", "config", "verbose", "func"}


class UsageError(Exception):
    pass


# -- formatting helpers ------------------------------------------------------

def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, rows, header=None):
    header = header or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(r.get(h, "")) for h in header])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def print_table(rows, columns, out=None):
    out = out or sys.stdout

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{v:.3f}" if abs(v) >= 1e-3 or v == 0 else f"{v:.2e}"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
              for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)), file=out)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=out)


# -- shared argument handling -----------------------------------------------

def _split(text):
    if text is None or isinstance(text, list):
        return text
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _add_common(p, data=True):
    p.add_argument("--config", help="flat JSON file of option values; flags override it")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1, help="worker cap for parallel loops")
    p.add_argument("-v", "--verbose", action="count", default=0)
    if data:
        p.add_argument("--in", dest="input", help="input CSV")
        p.add_argument("--u", default="u", help="easting / longitude column")
        p.add_argument("--v", default="v", help="northing / latitude column")
        p.add_argument("--id", default=None, help="row identifier column")
        p.add_argument("--coords", choices=[PLANAR, WGS84], default=PLANAR)
        p.add_argument("--predictors", help="comma-separated predictor columns (default: all)")
        p.add_argument("--mediator", default="SA")
        p.add_argument("--outcome", default="AC")
        p.add_argument("--raw", action="store_true", help="fit on raw units, not z-scores")
        p.add_argument("--jitter", action="store_true", help="jitter duplicate coordinates")


def _add_kernel(p):
    p.add_argument("--kernel", choices=["gaussian", "bisquare"], default="gaussian")
    p.add_argument("--criterion", choices=["aicc", "cv"], default="aicc")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--correction", action="store_true",
                   help="correct alpha for the effective number of parameters")


def build_parser():
    parser = argparse.ArgumentParser(prog="geomediate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"geomediate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ols", help="screening regressions with VIF")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_ols)

    p = sub.add_parser("moran", help="global Moran's I per variable")
    _add_common(p)
    p.add_argument("--variables", help="comma-separated columns (default: all variables)")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--format", choices=["csv", "pretty"], default="pretty")
    p.set_defaults(func=cmd_moran)

    p = sub.add_parser("gwr", help="single-bandwidth GWR")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--response", help="response column (default: outcome)")
    p.add_argument("--with-mediator", action="store_true", help="add the mediator as a term")
    p.add_argument("--fixed", action="store_true", help="fixed distance bandwidth")
    p.add_argument("--bandwidth", type=float, help="skip the search and use this bandwidth")
    p.set_defaults(func=cmd_gwr)

    p = sub.add_parser("mgwr", help="multiscale GWR by backfitting")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--response", help="response column (default: outcome)")
    p.add_argument("--with-mediator", action="store_true", help="add the mediator as a term")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--bandwidths", help="comma-separated pinned neighbour counts")
    p.add_argument("--freeze", action="store_true", help="select bandwidths in sweep 1 only")
    p.add_argument("--k", type=int, default=8, help="neighbours for the residual Moran's I")
    p.set_defaults(func=cmd_mgwr)

    p = sub.add_parser("mediate", help="global mediation with bootstrap CIs")
    _add_common(p)
    p.add_argument("--B", type=int, default=2000, help="bootstrap replicates")
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--direct-paths", help="predictors with a free direct path (default: all)")
    p.set_defaults(func=cmd_mediate)

    p = sub.add_parser("mediate-spatial", help="MGWR-based spatial mediation")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=200)
    p.set_defaults(func=cmd_mediate_spatial)

    p = sub.add_parser("map", help="interpolate a column of a point CSV to a raster")
    _add_common(p, data=False)
    p.add_argument("--in", dest="input", help="point CSV (e.g. spatial_effects.csv)")
    p.add_argument("--u", default="u")
    p.add_argument("--v", default="v")
    p.add_argument("--column", default="composed_total")
    p.add_argument("--predictor", help="keep rows whose 'predictor' column equals this")
    p.add_argument("--mask-column", help="boolean column; false rows are excluded")
    p.add_argument("--format", choices=["geojson", "svg", "csv"], default="geojson")
    p.add_argument("--ncols", type=int, default=100)
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--k-neighbors", type=int, default=12)
    p.add_argument("--mask-radius", type=float)
    p.add_argument("--title")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("synth", help="write a synthetic dataset and its true surfaces")
    _add_common(p, data=False)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--layout", choices=["uniform_random", "grid"], default="uniform_random")
    p.add_argument("--noise-sd", type=float, default=0.2)
    p.set_defaults(func=cmd_synth)
    return parser


def _subparser(parser, argv):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for tok in argv:
                if tok in action.choices:
                    return action.choices[tok]
    return None


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        sp = _subparser(parser, argv)
        known = {a.dest for a in sp._actions}
        extra = {k: v for k, v in cfg.items() if k not in known}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
        args.extra = extra
    else:
        args.extra = {}
    if args.command != "synth" and args.extra:
        sp = _subparser(parser, argv)
        sp.error(f"unknown config keys: {sorted(args.extra)}")
    return parser, args


def _out_dir(args):
    out = args.out or os.environ.get(OUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _resolved(args):
    out = {k: v for k, v in sorted(vars(args).items()) if k not in UNRECORDED}
    if not out.get("extra"):
        out.pop("extra", None)
    return out


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(args, out, outputs):
    write_json(os.path.join(out, "manifest.json"), {
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "config": _resolved(args),
        "outputs": {name: _sha256(os.path.join(out, name)) for name in outputs},
    })


def _dataset(args):
    if not args.input:
        raise UsageError("--in is required")
    schema = Schema(u=args.u, v=args.v, predictors=_split(args.predictors),
                    mediator=args.mediator, outcome=args.outcome, id=args.id,
                    coord_system=args.coords)
    data = load_dataset(args.input, schema, jitter=args.jitter, seed=args.seed)
    log.info("loaded %d rows, %d predictors from %s", data.n, data.p, args.input)
    return data


def _spec(data: Dataset, args):
    return ModelSpec(data.outcome_name, data.mediator_name, data.predictor_names)


def _maybe_standardize(data, args, out, outputs):
    if args.raw:
        return data
    data, scaling = standardize(data)
    scaling.to_json(os.path.join(out, "scaling.json"))
    outputs.append("scaling.json")
    return data


# -- subcommands -------------------------------------------------------------

def cmd_ols(args, out):
    outputs = []
    data = _maybe_standardize(_dataset(args), args, out, outputs)
    table = screen_predictors(data, alpha=args.alpha)
    rows = table.rows()
    write_csv(os.path.join(out, "ols.csv"), rows)
    outputs.append("ols.csv")
    print_table(rows, ["model", "term", "beta", "p", "vif", "F", "F_p", "R2"])
    print(f"kept: {', '.join(table.kept) or '-'}; dropped: {', '.join(table.dropped) or '-'}")
    return outputs


def cmd_moran(args, out):
    data = _dataset(args)
    names = _split(args.variables) or list(data.variable_names)
    w = knn_weights(data.coords, args.k, metric=metric_for(data.coord_system))
    rows = []
    for name in names:
        r = morans_i(data.column(name), w, permutations=args.permutations, seed=args.seed,
                     workers=args.threads)
        rows.append({"variable": name, "morans_i": r.i_value, "expected_i": r.expected_i,
                     "z": r.z, "p": r.p_value, "permutation_p": r.permutation_p,
                     "significant": r.significant()})
    write_csv(os.path.join(out, "moran.csv"), rows)
    cols = ["variable", "morans_i", "z", "p", "permutation_p", "significant"]
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_num(r[c]) for c in cols])
    else:
        print_table(rows, cols)
    return ["moran.csv"]


def _terms(data, args):
    response = args.response or data.outcome_name
    terms = list(data.predictor_names)
    if args.with_mediator and response != data.mediator_name:
        terms.append(data.mediator_name)
    return response, terms


def _coefficient_rows(data, names, beta, se, tvals):
    rows = []
    for i in range(data.n):
        row = {"id": data.ids[i], "u": data.coords[i, 0], "v": data.coords[i, 1]}
        for j, nm in enumerate(names):
            row[nm] = beta[i, j]
            row[f"se_{nm}"] = se[i, j]
            row[f"t_{nm}"] = tvals[i, j]
        rows.append(row)
    return rows


def cmd_gwr(args, out):
    outputs = []
    data = _maybe_standardize(_dataset(args), args, out, outputs)
    response, terms = _terms(data, args)
    y, X, names = data.design(response, terms)
    metric = metric_for(data.coord_system)
    trace = []
    if args.bandwidth is not None:
        kernel = KernelSpec(args.kernel, not args.fixed).with_bandwidth(args.bandwidth)
    else:
        kernel, trace = select_bandwidth(data.coords, y, X, args.kernel, args.criterion,
                                         adaptive=not args.fixed, metric=metric)
    fit = gwr_fit(data.coords, y, X, kernel, names, metric)
    write_csv(os.path.join(out, "gwr_coefficients.csv"),
              _coefficient_rows(data, names, fit.local_coefficients, fit.local_std_errors,
                                fit.pseudo_t))
    summary = {**fit.summary(), "response": response, "terms": names,
               "critical_t": fit.critical_t(args.alpha, args.correction),
               "search_trace": [[b, s] for b, s in trace]}
    write_json(os.path.join(out, "gwr_summary.json"), summary)
    print(f"bandwidth {kernel.bandwidth}  AICc {fit.aicc:.3f}  R2 {fit.r_squared:.3f}  "
          f"tr(S) {fit.hat_trace:.3f}")
    return outputs + ["gwr_coefficients.csv", "gwr_summary.json"]


def _mgwr_config(args, pinned=None):
    return MgwrConfig(kernel=args.kernel, criterion=args.criterion, tol=args.tol,
                      max_iter=args.max_iter, bandwidths=pinned,
                      freeze_bandwidths=getattr(args, "freeze", False))


def cmd_mgwr(args, out):
    outputs = []
    data = _maybe_standardize(_dataset(args), args, out, outputs)
    response, terms = _terms(data, args)
    y, X, names = data.design(response, terms)
    pinned = _split(args.bandwidths)
    pinned = tuple(int(b) for b in pinned) if pinned else None
    fit = mgwr_fit(data.coords, y, X, names, _mgwr_config(args, pinned),
                   metric_for(data.coord_system))
    w = knn_weights(data.coords, args.k, metric=metric_for(data.coord_system))
    mi = morans_i(fit.residuals, w)
    rows = [{"term": nm, "bandwidth": int(b), "enp": e}
            for nm, b, e in zip(names, fit.bandwidths, fit.per_term_enp)]
    model = {"response": response, "adj_r_squared": fit.adj_r_squared, "aicc": fit.aicc,
             "residual_morans_i": mi.i_value, "residual_z": mi.z, "residual_p": mi.p_value}
    write_csv(os.path.join(out, "mgwr_bandwidths.csv"),
              [{**r, **model} for r in rows])
    write_csv(os.path.join(out, "mgwr_coefficients.csv"),
              _coefficient_rows(data, names, fit.coefficient_surfaces, fit.std_errors,
                                fit.pseudo_t))
    write_json(os.path.join(out, "mgwr_trace.json"), {
        **fit.summary(), "soc_trace": fit.soc_trace, "bandwidth_trace": fit.bandwidth_trace,
        "init_bandwidth": fit.init_bandwidth,
        "critical_t": fit.critical_t(args.alpha, args.correction),
        "residual_moran": {"weights": f"knn({args.k}), row-standardized", **model}})
    print_table(rows, ["term", "bandwidth", "enp"])
    print(f"adj. R2 {fit.adj_r_squared:.3f}  AICc {fit.aicc:.3f}  residual Moran's I "
          f"{mi.i_value:.3f} (z {mi.z:.2f}, p {mi.p_value:.3f})  converged {fit.converged}")
    return outputs + ["mgwr_bandwidths.csv", "mgwr_coefficients.csv", "mgwr_trace.json"]


def cmd_mediate(args, out):
    outputs = []
    data = _dataset(args)
    spec = _spec(data, args)
    res = fit_global_mediation(data, spec, B=args.B, seed=args.seed, ci_level=args.ci_level,
                               alpha=args.alpha, standardize=not args.raw, workers=args.threads)
    if res.scaling is not None:
        res.scaling.to_json(os.path.join(out, "scaling.json"))
        outputs.append("scaling.json")
    fit_data = data if args.raw else standardize(data)[0]
    fi = path_fit_indices(fit_data, spec, direct_paths=_split(args.direct_paths))
    rows = res.report_rows(spec.mediator_name, spec.outcome_name)
    header = ["path", "beta", "se", "p", "direct", "indirect", "total", "ci_low", "ci_high",
              "classification"]
    write_csv(os.path.join(out, "mediation.csv"), rows, header)
    write_json(os.path.join(out, "fit_indices.json"), {
        "chi_square": fi.chi_square, "df": fi.df, "cmin_df": fi.cmin_df, "cfi": fi.cfi,
        "rmsea": fi.rmsea, "srmr": fi.srmr, "verdicts": fi.verdicts,
        "bootstrap": {"B": args.B, "seed": args.seed, "ci_level": args.ci_level,
                      "redraws": res.redraws}})
    print_table(rows, header)
    print(f"CFI {fi.cfi:.3f}  RMSEA {fi.rmsea:.3f}  SRMR {fi.srmr:.3f}  "
          f"CMIN/DF {fi.cmin_df:.3f}  acceptable: {fi.acceptable}")
    return outputs + ["mediation.csv", "fit_indices.json"]


def cmd_mediate_spatial(args, out):
    outputs = []
    data = _dataset(args)
    spec = _spec(data, args)
    fit = fit_spatial_mediation(data, spec, _mgwr_config(args), alpha=args.alpha,
                                correction=args.correction, standardize=not args.raw,
                                workers=args.threads)
    if fit.scaling is not None:
        fit.scaling.to_json(os.path.join(out, "scaling.json"))
        outputs.append("scaling.json")
    write_csv(os.path.join(out, "spatial_effects.csv"), fit.to_rows(list(data.ids)))
    models = {}
    for label, m in (("mediator", fit.mediator_model), ("outcome", fit.outcome_model),
                     ("total", fit.total_model)):
        models[label] = {**m.summary(), "critical_t": m.critical_t(args.alpha, args.correction)}
    write_json(os.path.join(out, "spatial_summary.json"),
               {"alpha": args.alpha, "correction": args.correction, "models": models,
                "max_abs_discrepancy": float(np.abs(fit.discrepancy).max())})
    for label, m in models.items():
        print(f"{label:9s} bandwidths {dict(zip(m['terms'], m['bandwidths']))}  "
              f"AICc {m['aicc']:.3f}")
    return outputs + ["spatial_effects.csv", "spatial_summary.json"]


def _truthy(text):
    return str(text).strip().lower() in {"1", "true", "yes"}


def cmd_map(args, out):
    if not args.input:
        raise UsageError("--in is required")
    with open(args.input, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if args.predictor:
        rows = [r for r in rows if r.get("predictor") == args.predictor]
    for key in (args.u, args.v, args.column, args.mask_column):
        if key and rows and key not in rows[0]:
            raise BadConfig(f"column {key!r} not in {args.input}", column=key)
    samples = []
    for r in rows:
        val = float(r[args.column]) if r[args.column] != "" else math.nan
        if args.mask_column and not _truthy(r[args.mask_column]):
            val = math.nan
        samples.append((float(r[args.u]), float(r[args.v]), val))
    samples = np.array(samples, dtype=float).reshape(-1, 3)
    if not len(samples):
        raise EmptySamples("no rows to map")
    grid = make_grid(samples[:, :2], args.ncols)
    raster = idw_interpolate(samples, grid, args.power, args.k_neighbors, args.mask_radius)
    name = {"geojson": "map.geojson", "svg": "map.svg", "csv": "map.csv"}[args.format]
    path = os.path.join(out, name)
    if args.format == "geojson":
        export_geojson(raster, path, {"column": args.column, "predictor": args.predictor})
    elif args.format == "svg":
        render_svg_heatmap(raster, path, title=args.title or args.column)
    else:
        export_csv(raster, path)
    print(f"{raster.nrows}x{raster.ncols} raster written to {path}")
    return [name]


def cmd_synth(args, out):
    raw = {"n": args.n, "p": args.p, "layout": args.layout, "seed": args.seed,
           "noise_sd": args.noise_sd}
    known = {f.name for f in dc_fields(SynthConfig)}
    unknown = set(args.extra) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    raw.update({k: v for k, v in args.extra.items() if k in known and k not in vars(args)})
    cfg = config_from_dict(raw)
    data, truth = gen_synthetic(cfg)
    data.to_csv(os.path.join(out, "synth.csv"))
    truth.to_json(os.path.join(out, "truth.json"))
    print(f"n={cfg.n} p={cfg.p} layout={cfg.layout} seed={cfg.seed}")
    return ["synth.csv", "truth.json"]


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        out = _out_dir(args)
        # BLAS stays single-threaded so reductions do not depend on --threads
        with threadpool_limits(limits=1):
            outputs = args.func(args, out)
        write_manifest(args, out, outputs)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeomediateError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "IoError", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
