"""Command line front end.

Every command writes into ``--out-dir`` and finishes with
``manifest.json``: configuration, arguments, input and output hashes,
seed and library versions. ``replay`` re-runs a manifest into a fresh
directory and compares output hashes.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

import argparse
import hashlib
import json
import math
import platform
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import correlation as corr
from . import fitter, model_dists, moments, pipeline, sampler, specfun
from .errors import ExistenceError, InputOutputError, ParamError, RMTError, ValidationError
from .timeseries_io import ReturnMatrix, RunConfig, load_returns, save_returns

MANIFEST = "manifest.json"


# ------------------------------------------------------------------ helpers

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Run:
    """Output directory plus the bookkeeping for its manifest."""

    def __init__(self, args, config):
        self.args = args
        self.config = config
        self.dir = Path(args.out_dir)
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputOutputError(f"cannot create output directory {self.dir}: {exc}") from exc
        self.outputs = []
        self.inputs = []
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def path(self, name):
        return self.dir / name

    def add_input(self, path):
        p = Path(path)
        self.inputs.append({"path": str(p), "sha256": _sha256(p)})

    def written(self, name):
        if name not in self.outputs:
            self.outputs.append(name)

    def text(self, name, text):
        try:
            self.path(name).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise InputOutputError(f"cannot write {self.path(name)}: {exc}") from exc
        self.written(name)

    def json(self, name, obj):
        self.text(name, _dump_json(obj))

    def columns(self, name, cols):
        corr.write_columns(self.path(name), cols)
        self.written(name)

    def matrix(self, name, values, labels=None):
        corr.write_matrix(self.path(name), values, labels)
        self.written(name)

    def manifest(self, status="ok", error=None):
        import numpy
        import scipy

        from . import kernels

        body = {
            "command": self.args.command,
            "argv": self.args.argv,
            "status": status,
            "error": error,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "rng": {"algorithm": sampler.SeededRng.algorithm, "seed": self.config.seed},
            "inputs": self.inputs,
            "outputs": [{"path": n, "sha256": _sha256(self.path(n))} for n in self.outputs],
            "versions": {"rmtcompound": __version__, "numpy": numpy.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version(),
                         "kernel_backend": kernels.BACKEND},
            "started": self.started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        try:
            self.path(MANIFEST).write_text(_dump_json(body), encoding="utf-8")
        except OSError as exc:
            raise InputOutputError(f"cannot write manifest: {exc}") from exc


def _load(run, args):
    if not args.input:
        raise ValidationError("--input is required")
    rm = load_returns(args.input, fmt=args.format, rows=run.config.rows)
    run.add_input(args.input)
    return rm


def _params(args, family=None, K=None):
    family = (family or args.family).upper()
    K = int(K if K is not None else args.K)
    l, L = args.l, args.L
    if args.l_rot is not None:
        l = args.l_rot + (K - 1) / 2
    if args.L_rot is not None:
        L = args.L_rot + (K - 1) / 2
    d = None
    if args.d_eigs:
        d = tuple(float(v) for v in args.d_eigs.split(","))
    return model_dists.ModelParams.from_family(family, K, args.N, l, L, m=args.m, M=args.M,
                                               d_eigs=d)


def _ints(text):
    return [int(v) for v in text.split(",")]


def _floats(text):
    return [float(v) for v in text.split(",")]


# ------------------------------------------------------------------ commands

def cmd_ingest(run, args):
    rm = _load(run, args)
    save_returns(rm, run.path("returns.csv"), rows="time")
    run.written("returns.csv")
    run.json("summary.json", {"K": rm.K, "T": rm.T, "labels": list(rm.labels),
                              "has_timestamps": rm.timestamps is not None})


def cmd_similarity(run, args):
    rm = _load(run, args)
    res = pipeline.similarity(rm, run.config)
    n = res["partition"].n_epochs
    run.columns("cos_to_average.csv", {"epoch": np.arange(n), "cos": res["cos_to_average"]})
    run.matrix("cosine_matrix.csv", res["matrix"], [str(i) for i in range(n)])
    e = res["hist_edges"]
    run.columns("cosine_histogram.csv", {"lo": e[:-1], "hi": e[1:], "count": res["hist_counts"]})


def _epoch_outputs(run, stage):
    rows = {"epoch": [], "l_rot": [], "l": [], "chi2": [], "at_bound": []}
    for i, f in enumerate(stage.fits):
        rows["epoch"].append(i)
        rows["l_rot"].append(f.params["l_rot"])
        rows["l"].append(f.params["l"])
        rows["chi2"].append(f.chi2)
        rows["at_bound"].append(";".join(f.at_bound) or "-")
    run.columns("epoch_table.csv", rows)
    run.json("epoch_fits.json", {"scale": stage.scale, "K": stage.K,
                                 "mean_l_rot": stage.l_rot_mean, "mean_l": stage.l_mean,
                                 "fits": [f.to_dict() for f in stage.fits]})
    if stage.fits:
        run.columns("epoch_overlay.csv",
                    pipeline.overlay(stage.histograms[0], pipeline.epoch_model(stage.l_rot_mean)))


def _long_outputs(run, stage, scale):
    fit = stage.fit
    run.json("long_fit.json", {**fit.to_dict(), "histogram": stage.histogram.to_dict(),
                               "l_rot": stage.l_rot})
    row = {"family": [stage.family], "scale": [scale], "N": [fit.params["N"]],
           "L_rot": [fit.params.get("L_rot", float("nan"))],
           "l_rot": [stage.l_rot if stage.l_rot is not None else float("nan")],
           "chi2": [fit.chi2]}
    run.columns("long_table.csv", row)
    run.columns("long_overlay.csv", pipeline.overlay(
        stage.histogram, pipeline.long_model(stage.family, fit.params, stage.l_rot)))


def cmd_fit_epochs(run, args):
    rm = _load(run, args)
    _epoch_outputs(run, pipeline.run_epoch_stage(rm, run.config))


def cmd_fit_long(run, args):
    rm = _load(run, args)
    family = run.config.family
    if family[0] == "A" and args.l_rot is None:
        raise ValidationError("--l-rot is required for epoch family A")
    stage = pipeline.run_long_stage(rm, run.config, l_rot=args.l_rot)
    _long_outputs(run, stage, run.config.scale)


def cmd_pipeline(run, args):
    rm = _load(run, args)
    family = run.config.family
    epochs = pipeline.run_epoch_stage(rm, run.config)
    _epoch_outputs(run, epochs)
    l_rot = epochs.l_rot_mean if family[0] == "A" else None
    stage = pipeline.run_long_stage(rm, run.config, l_rot=l_rot)
    _long_outputs(run, stage, run.config.scale)
    ref = pipeline.reference_rows()
    run.columns("reference_rows.csv", {k: [r[k] for r in ref] for k in ref[0]})


def cmd_ambiguity(run, args):
    rm = _load(run, args)
    if args.l_rot is None or args.N is None:
        raise ValidationError("--l-rot and --N are required")
    m = args.m if args.m is not None else 2 * args.l_rot - 3
    sample, _ = pipeline.long_aggregate(rm, run.config.kind)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        h = fitter.build_histogram(sample, run.config.scale, run.config.bins,
                                   run.config.quantile, run.config.clip)
        unreduced = fitter.fit_long_unreduced(h, args.l_rot, m, args.N,
                                              starts=max(8, run.config.starts))
        reduced = fitter.fit_long(h, "AA", l_rot=args.l_rot, starts=run.config.starts)
    starts = unreduced.starts
    run.columns("ambiguity_starts.csv", {
        "start_L_rot": [s.start["L_rot"] for s in starts], "start_M": [s.start["M"] for s in starts],
        "L_rot": [s.end["L_rot"] for s in starts], "M": [s.end["M"] for s in starts],
        "chi2": [s.chi2 for s in starts], "converged": [s.converged for s in starts]})
    report = {"unreduced": unreduced.to_dict(), "reduced": reduced.to_dict(),
              "reference": list(pipeline.REFERENCE_AMBIGUITY)}
    try:
        report["line"] = fitter.ambiguity_report(fitter.converged_starts(unreduced), args.N).to_dict()
    except RMTError as exc:
        report["line"] = {"error": str(exc)}
    run.json("ambiguity_report.json", report)


def _v_matrix(args, sd):
    if args.v_file:
        return np.atleast_2d(np.loadtxt(args.v_file, delimiter=",", ndmin=2))
    if args.rotate:
        idx = _ints(args.rotate)
        if len(idx) != 3:
            raise ValidationError("--rotate takes three eigenvector indices i,j,k")
        return model_dists.eigen_rotation_vectors(sd, idx, args.psi, args.phi)
    if args.split is not None:
        return model_dists.eigen_split_vectors(sd, args.split)
    if args.eigvec is not None:
        return sd.eigenvectors[:, [args.eigvec]]
    raise ValidationError("give one of --v-file, --rotate, --split, --eigvec")


def cmd_combine(run, args):
    rm = _load(run, args)
    if args.v_file:
        run.add_input(args.v_file)
    x = corr.standardize_rows(rm)
    sd = corr.eigendecompose(corr.sample_correlation(x, run.config.kind), clip=True)
    V = _v_matrix(args, sd)
    spec = model_dists.build_combination(V, sd)
    p = _params(args, K=rm.K)
    s = (V.T @ x.values).T
    run.matrix("ctilde.csv", spec.ctilde)
    cfg = run.config
    for i in range(spec.I):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            h = fitter.build_histogram(s[:, i], cfg.scale, cfg.bins, cfg.quantile, cfg.clip)
        lam = spec.ctilde[i, i]
        run.columns(f"univariate_s{i + 1}.csv", pipeline.overlay(
            h, lambda z, lam=lam: model_dists.long_rot_univariate_pdf(z, lam, p)))
    if spec.I == 2:
        run.columns("bivariate_grid.csv", bivariate_grid(s, spec, p, args.grid))


def bivariate_grid(s, spec, p, bins=41, quantile=1e-3):
    """Empirical 2-D histogram, model surface and their difference."""
    half = [float(np.max(np.abs(np.quantile(s[:, i], [quantile, 1 - quantile])))) for i in (0, 1)]
    counts, e1, e2 = np.histogram2d(s[:, 0], s[:, 1], bins=bins,
                                    range=[[-half[0], half[0]], [-half[1], half[1]]])
    area = np.outer(np.diff(e1), np.diff(e2))
    total = s.shape[0]
    dens = counts / (total * area)
    err = np.sqrt(counts * (1 - counts / total)) / (total * area)
    c1, c2 = 0.5 * (e1[1:] + e1[:-1]), 0.5 * (e2[1:] + e2[:-1])
    g1, g2 = np.meshgrid(c1, c2, indexing="ij")
    model = model_dists.comb_multivariate_pdf(np.stack([g1.ravel(), g2.ravel()], axis=1), spec, p)
    model = np.asarray(model).reshape(g1.shape)
    return {"s1": g1.ravel(), "s2": g2.ravel(), "empirical": dens.ravel(), "stderr": err.ravel(),
            "model": model.ravel(), "difference": (dens - model).ravel()}


def cmd_moments(run, args):
    p = _params(args)
    nus = _floats(args.nu)
    samples = None
    if args.input:
        rm = _load(run, args)
        samples = rm.values.T
        c = samples.T @ samples / samples.shape[0]
        sd = corr.eigendecompose(c, clip=True)
    rows = {"scope": [], "quantity": [], "nu": [], "analytic": [], "empirical": [],
            "stderr": [], "z": []}

    def add(scope, quantity, nu, fn, emp):
        rows["scope"].append(scope)
        rows["quantity"].append(quantity)
        rows["nu"].append(nu)
        try:
            a = fn()
            rows["analytic"].append(a)
        except ExistenceError:
            a = None
            rows["analytic"].append("n/a (existence)")
        if emp is None:
            rows["empirical"].append("-"), rows["stderr"].append("-"), rows["z"].append("-")
        else:
            rows["empirical"].append(emp.value)
            rows["stderr"].append(emp.stderr)
            rows["z"].append((emp.value - a) / emp.stderr if a is not None and emp.stderr > 0
                             else "-")

    for scope in ("epoch", "long"):
        for nu in nus:
            emp = moments.empirical_moment(samples, sd, nu) if samples is not None and scope == "long" else None
            fn = (lambda nu=nu, scope=scope:
                  moments.moment(moments.MomentSpec(nu, scope), p))
            add(scope, "moment", nu, fn, emp)
        emp = moments.empirical_ratio_q2(samples, sd) if samples is not None and scope == "long" else None
        add(scope, "Q2", 2.0, lambda scope=scope: moments.moment_ratio_q2(p, scope), emp)
    run.columns("moments.csv", rows)


def _sample_corr(args, K):
    if args.c_file:
        return np.loadtxt(args.c_file, delimiter=",", ndmin=2)
    if args.rho:
        C = np.full((K, K), args.rho)
        np.fill_diagonal(C, 1.0)
        return C
    return np.eye(K)


def cmd_sample(run, args):
    rng = sampler.SeededRng(run.config.seed)
    K = args.K
    if args.c_file:
        run.add_input(args.c_file)
    C = _sample_corr(args, K)
    meta = {"kind": args.kind, "rng": rng.describe(), "family": run.config.family}
    if args.kind == "market":
        n_ep, ep_len = args.n_epochs, args.epoch_len
        if args.regimes == 1:
            plan = sampler.RegimePlan.single(C, n_ep)
        else:
            half = K // 2
            A = sampler.block_correlation(K, [half, K - half], args.block_rho)
            B = sampler.block_correlation(K, [K], args.block_rho * 0.5)
            plan = sampler.RegimePlan.alternating([A, B], n_ep, args.span)
        p = _params(args) if (args.N is not None) else None
        rm = sampler.synth_market(n_ep, ep_len, K, plan, rng, p=p)
        meta.update({"n_epochs": n_ep, "epoch_len": ep_len, "regimes": args.regimes})
        if p is not None:
            meta["params"] = _param_dict(p)
    else:
        sd = corr.eigendecompose(C)
        p = _params(args)
        if args.kind == "compound":
            r = sampler.draw_compound(p, sd, args.n, rng)
        else:
            r = sampler.draw_epoch_amplitudes(sd, p, args.n, rng)
        rm = ReturnMatrix.from_array(r.T, prefix="x")
        meta["params"] = _param_dict(p)
    save_returns(rm, run.path("returns.csv"), rows="time")
    run.written("returns.csv")
    run.json("sample_meta.json", meta)


def _param_dict(p):
    return {"family": p.family, "K": p.K, "N": p.N, "l": p.l, "L": p.L, "m": p.m, "M": p.M,
            "l_rot": p.l_rot, "L_rot": p.L_rot, "d_eigs": p.d_eigs}


def cmd_pdf(run, args):
    p = _params(args)
    if args.x:
        x = np.array(_floats(args.x))
    else:
        x = np.linspace(args.x_min, args.x_max, args.points)
    if args.form == "epoch-univariate":
        y = model_dists.epoch_rot_univariate_pdf(x, args.lam, p)
    elif args.form == "long-univariate":
        y = model_dists.long_rot_univariate_pdf(x, args.lam, p)
    elif args.form == "radial":
        if np.any(x < 0):
            raise ValidationError("radial form takes Mahalanobis values q >= 0")
        dim = args.dim or p.K
        y = np.exp(model_dists.log_radial_density(x, dim, p, args.scope))
    else:
        raise ValidationError(f"unknown form {args.form!r}")
    run.columns("pdf.csv", {"x": x, "pdf": np.atleast_1d(y)})
    run.json("pdf_meta.json", {"form": args.form, "params": _param_dict(p), "lam": args.lam})


SPECFUN = dict(specfun.FUNCTIONS, log_bessel_k=specfun.log_bessel_k)


def cmd_specfun(run, args):
    fn = SPECFUN.get(args.function)
    if fn is None:
        raise ValidationError(f"unknown function {args.function!r}; choose from {sorted(SPECFUN)}")
    vals = _floats(args.args)
    out = {"function": args.function, "args": vals}
    try:
        out["value"] = float(fn(*vals))
    except TypeError as exc:
        raise ValidationError(f"{args.function}: {exc}") from exc
    run.json("specfun.json", out)
    print(repr(out["value"]))


def cmd_replay(args):
    src = Path(args.manifest)
    try:
        body = json.loads(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputOutputError(f"cannot read manifest {src}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {src} is not valid JSON: {exc}") from exc
    argv = list(body["argv"]) + ["--out-dir", args.out_dir]
    code = main(argv)
    if code != 0:
        return code
    new = json.loads((Path(args.out_dir) / MANIFEST).read_text(encoding="utf-8"))
    old_h = {o["path"]: o["sha256"] for o in body["outputs"]}
    new_h = {o["path"]: o["sha256"] for o in new["outputs"]}
    bad = sorted(k for k in old_h if old_h[k] != new_h.get(k))
    if bad:
        print("replay mismatch: " + ", ".join(bad), file=sys.stderr)
        return 3
    print(f"replay identical: {len(old_h)} outputs")
    return 0


COMMANDS = {
    "ingest": cmd_ingest, "similarity": cmd_similarity, "pipeline": cmd_pipeline,
    "fit-epochs": cmd_fit_epochs, "fit-long": cmd_fit_long, "ambiguity": cmd_ambiguity,
    "combine": cmd_combine, "moments": cmd_moments, "sample": cmd_sample, "pdf": cmd_pdf,
    "specfun": cmd_specfun,
}


# ------------------------------------------------------------------ parser

def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="key = value settings file")
    parser.add_argument("--seed", type=int, default=d(None))
    parser.add_argument("--out-dir", default=d(None))
    parser.add_argument("--scale", choices=("log", "lin"), default=d(None))
    parser.add_argument("--family", choices=("GG", "GA", "AG", "AA"), default=d(None))


def _param_flags(parser):
    g = parser.add_argument_group("model parameters")
    g.add_argument("--K", type=int, default=1)
    g.add_argument("--N", type=float, default=None)
    g.add_argument("--l", type=float, default=None)
    g.add_argument("--L", type=float, default=None)
    g.add_argument("--l-rot", dest="l_rot", type=float, default=None)
    g.add_argument("--L-rot", dest="L_rot", type=float, default=None)
    g.add_argument("--m", type=float, default=None)
    g.add_argument("--M", type=float, default=None)
    g.add_argument("--d-eigs", dest="d_eigs", default=None, help="comma separated")


def _input_flags(parser):
    parser.add_argument("--input", default=None)
    parser.add_argument("--format", choices=("csv", "tsv"), default=None)
    parser.add_argument("--rows", choices=("time", "variable"), default=None)
    parser.add_argument("--n-epochs", dest="n_epochs", type=int, default=None)
    parser.add_argument("--epoch-length", dest="epoch_length", type=int, default=None)
    parser.add_argument("--bins", type=int, default=None)
    parser.add_argument("--starts", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="rmtcompound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, inputs=True, params=False):
        sp = sub.add_parser(name, help=help_text)
        _global_flags(sp, suppress=True)
        if inputs:
            _input_flags(sp)
        if params:
            _param_flags(sp)
        return sp

    add("ingest", "validate a return file and write a normalized copy")
    add("similarity", "epoch cosine series, residual-cosine matrix and histogram")
    add("pipeline", "epoch fits, averaged tail parameter, long-interval fit")
    add("fit-epochs", "fit the aggregated epoch density for every epoch")
    add("fit-long", "fit the aggregated long-interval density", params=True)
    add("ambiguity", "unreduced (L_rot, M) multi-start fits and line analysis", params=True)
    sp = add("combine", "linear combinations: univariate and bivariate overlays", params=True)
    sp.add_argument("--v-file", default=None, help="K x I coefficient matrix (csv)")
    sp.add_argument("--rotate", default=None, help="eigenvector indices i,j,k")
    sp.add_argument("--psi", type=float, default=math.pi / 4)
    sp.add_argument("--phi", type=float, default=math.pi / 7)
    sp.add_argument("--split", type=int, default=None, help="eigenvector index to split")
    sp.add_argument("--eigvec", type=int, default=None, help="single eigenvector index")
    sp.add_argument("--grid", type=int, default=41)
    sp = add("moments", "analytic and empirical Mahalanobis moments", params=True)
    sp.add_argument("--nu", default="1,2", help="comma separated orders")
    sp = add("sample", "synthetic returns", inputs=False, params=True)
    sp.add_argument("--kind", choices=("compound", "epoch", "market"), default="compound")
    sp.add_argument("--n", type=int, default=10000)
    sp.add_argument("--c-file", default=None)
    sp.add_argument("--rho", type=float, default=None, help="equicorrelation of C")
    sp.add_argument("--n-epochs", dest="n_epochs", type=int, default=20)
    sp.add_argument("--epoch-len", dest="epoch_len", type=int, default=200)
    sp.add_argument("--regimes", type=int, choices=(1, 2), default=1)
    sp.add_argument("--span", type=int, default=5)
    sp.add_argument("--block-rho", dest="block_rho", type=float, default=0.6)
    sp = add("pdf", "evaluate a model density on a grid", inputs=False, params=True)
    sp.add_argument("--form", choices=("epoch-univariate", "long-univariate", "radial"),
                    default="long-univariate")
    sp.add_argument("--x", default=None, help="comma separated abscissae")
    sp.add_argument("--x-min", type=float, default=-5.0)
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--points", type=int, default=201)
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--scope", choices=("epoch", "long"), default="long")
    sp = add("specfun", "evaluate one special function", inputs=False)
    sp.add_argument("--function", required=True)
    sp.add_argument("--args", required=True, help="comma separated arguments")
    sp = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    sp.add_argument("manifest")
    sp.add_argument("--out-dir", required=True)
    return parser


def _config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    over = {"seed": args.seed, "scale": args.scale, "family": args.family}
    for key in ("rows", "bins", "starts"):
        over[key] = getattr(args, key, None)
    n_epochs = getattr(args, "n_epochs", None) if args.command != "sample" else None
    length = getattr(args, "epoch_length", None)
    if n_epochs is not None or length is not None:
        # a command-line epoch spec replaces the configured one entirely
        cfg = replace(cfg, n_epochs=n_epochs, epoch_length=length)
    return cfg.updated(**over)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            return cmd_replay(args)
        except RMTError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
    for name in ("config", "seed", "out_dir", "scale", "family"):
        if not hasattr(args, name):
            setattr(args, name, None)
    # arguments to store for replay: everything except the output directory
    args.argv = _strip_out_dir(argv)
    run = None
    try:
        config = _config(args)
        args.family = config.family
        if args.out_dir is None:
            args.out_dir = str(Path("rmt-runs") / f"{args.command}-{config.seed}")
        run = Run(args, config)
        COMMANDS[args.command](run, args)
        run.manifest()
        return 0
    except RMTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if run is not None:
            _partial(run, exc)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if run is not None:
            _partial(run, exc)
        return 4


def _partial(run, exc):
    try:
        run.manifest(status="failed", error=f"{type(exc).__name__}: {exc}")
    except RMTError:
        pass


def _strip_out_dir(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out-dir":
            skip = True
            continue
        if a.startswith("--out-dir="):
            continue
        out.append(a)
    return out


if __name__ == "__main__":
    sys.exit(main())
