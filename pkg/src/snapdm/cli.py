"""Command-line interface.

Subcommands: gen-tfim, gen-ising, gen-toy, embed, detect, observables,
pipeline.  Every run writes a ``run.json`` manifest (resolved config, input
digests, seed, duration, status) into the output directory, including on
error paths.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.

Progress goes to stderr; data files land under ``--out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data import MANIFEST_NAME, read_dataset, write_dataset
from .embedding import PipelineConfig, embed_vectors, preprocess_dataset
from .errors import DataError, NumericalError, SnapdmError, UsageError
from .generators import IsingConfig, TfimConfig, ising_sweep, tfim_sweep, toy_dataset
from .kernel import BandwidthPolicy, RankPolicy
from .observables import observable_sweep
from .plots import emit_plot, render_overview_png
from .transition import bootstrap_pc, cluster_gap_detect, detect_transition, fit_tanh
from .wavelet import WaveletConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _fmt_float(v) -> str:
    return repr(float(v))


def parse_range(spec: str):
    """"a:b:step" inclusive sweep, or a comma-separated list of values."""
    if ":" in spec:
        try:
            lo, hi, step = (float(x) for x in spec.split(":"))
        except ValueError:
            raise UsageError(f"bad range {spec!r}; expected a:b:step")
        if step <= 0 or hi < lo:
            raise UsageError(f"bad range {spec!r}; need a <= b and step > 0")
        count = int(round((hi - lo) / step)) + 1
        vals = [round(lo + k * step, 12) for k in range(count) if lo + k * step <= hi + 1e-9]
        return tuple(vals)
    try:
        return tuple(float(x) for x in spec.split(","))
    except ValueError:
        raise UsageError(f"bad value list {spec!r}")


def _add_common(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the timestamp comment from SVG output")


def _add_pipeline_flags(p):
    p.add_argument("--wavelet", choices=("on", "off"), default="on")
    p.add_argument("--wavelet-exponent", type=float, default=None,
                   help="detail-band weight exponent (default 1 + dim/2)")
    p.add_argument("--wavelet-levels", default="full",
                   help="decomposition depth, integer or 'full'")
    p.add_argument("--svd-tol", type=float, default=1e-3,
                   help="relative singular-value cutoff for covariance inversion")
    p.add_argument("--svd-max-rank", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None,
                   help="explicit kernel bandwidth (overrides policy)")
    p.add_argument("--epsilon-scale", type=float, default=4.0,
                   help="multiplier on the policy bandwidth")
    p.add_argument("--bandwidth", choices=("chain", "median"), default="chain",
                   help="bandwidth policy when --epsilon is not given")
    p.add_argument("--support-weight", type=float, default=0.5,
                   help="weight of the covariance support-mismatch term")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="density-normalization exponent in [0, 1]")
    p.add_argument("--time", type=int, default=3, help="diffusion time")
    p.add_argument("--dims", type=int, default=3, help="embedding dimensions")


def _pipeline_config(args) -> PipelineConfig:
    levels = args.wavelet_levels
    if levels != "full":
        try:
            levels = int(levels)
        except ValueError:
            raise UsageError(f"--wavelet-levels must be an integer or 'full', got {levels!r}")
    return PipelineConfig(
        wavelet=WaveletConfig(
            enabled=args.wavelet == "on",
            weight_exponent=args.wavelet_exponent,
            levels=levels,
        ),
        rank=RankPolicy(tol=args.svd_tol, max_rank=args.svd_max_rank),
        bandwidth=BandwidthPolicy(kind=args.bandwidth, scale=args.epsilon_scale,
                                  epsilon=args.epsilon),
        support_weight=args.support_weight,
        alpha=args.alpha,
        diffusion_time=args.time,
        dims=args.dims,
    )


def build_parser():
    ap = argparse.ArgumentParser(
        prog="snapdm",
        description="Phase-transition detection from snapshot ensembles via "
                    "distribution-aware diffusion maps.",
    )
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-tfim", help="generate transverse-field Ising chain snapshots")
    p.add_argument("--L", type=int, default=12, help="chain length")
    p.add_argument("--lambda", dest="lambdas", default="0.2:2.0:0.1",
                   help="coupling sweep a:b:step or comma list")
    p.add_argument("--shots", type=int, default=500)
    _add_common(p)

    p = sub.add_parser("gen-ising", help="generate 2D Ising Monte Carlo snapshots")
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--temp", default="1.5:3.2:0.1", help="temperature sweep a:b:step")
    p.add_argument("--shots", type=int, default=500)
    p.add_argument("--algo", choices=("metropolis", "wolff"), default="wolff")
    p.add_argument("--burn-in", type=int, default=1000, help="burn-in sweeps")
    p.add_argument("--decorr", type=int, default=2, help="sweeps between stored snapshots")
    p.add_argument("--no-fold", action="store_true",
                   help="keep the sampler's raw symmetry sector")
    _add_common(p)

    p = sub.add_parser("gen-toy", help="generate two-site toy ensembles")
    p.add_argument("--kind", choices=("anticorrelated", "uniform"), required=True)
    p.add_argument("--shots", type=int, default=500)
    p.add_argument("--replicas", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("embed", help="embed a dataset and write embedding.csv/.svg")
    p.add_argument("--in", dest="input", required=True, help="dataset directory")
    p.add_argument("--dump-matrices", action="store_true",
                   help="also write distances.csv and kernel.csv")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("detect", help="embed and extract the critical parameter")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=("tanh", "cluster", "both"), default="tanh")
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap replicates")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("observables", help="physical comparison curves per setting")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--brane", type=str, default=None, metavar="LxL",
                   help="region parity with an LxL centered window")
    p.add_argument("--edge", type=int, default=None,
                   help="imbalance cut column")
    p.add_argument("--nnparity", action="store_true",
                   help="nearest-neighbor parity correlations")
    _add_common(p)

    p = sub.add_parser("pipeline", help="embed + detect + observables in one run")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=("tanh", "cluster", "both"), default="both")
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--brane", type=str, default=None, metavar="LxL")
    p.add_argument("--edge", type=int, default=None)
    p.add_argument("--nnparity", action="store_true")
    _add_pipeline_flags(p)
    _add_common(p)
    return ap


def _input_digests(path) -> dict:
    root = Path(path)
    out = {}
    if root.is_dir():
        for f in sorted(root.iterdir()):
            if f.is_file():
                out[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    return out


def _write_run_manifest(outdir, payload):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "run.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_embedding_csv(emb, path):
    lines = ["# eigenvalues: " + " ".join(_fmt_float(v) for v in emb.eigenvalues)]
    header = ["parameter"] + [f"phi{k + 1}" for k in range(emb.dims)]
    lines.append(",".join(header))
    for i in range(emb.size):
        row = [_fmt_float(emb.parameters[i])]
        row += [_fmt_float(v) for v in emb.coordinates[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_matrix_csv(mat, parameters, path):
    lines = [",".join(["parameter"] + [_fmt_float(p) for p in parameters])]
    for i, p in enumerate(parameters):
        lines.append(",".join([_fmt_float(p)] + [_fmt_float(v) for v in mat[i]]))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_observables_csv(series_list, path):
    if not series_list:
        return
    params = series_list[0].parameters
    header = ["parameter"]
    for s in series_list:
        header += [s.name, s.name + "_stderr"]
    lines = [",".join(header)]
    for i, p in enumerate(params):
        row = [_fmt_float(p)]
        for s in series_list:
            row += [_fmt_float(s.values[i]), _fmt_float(s.stderr[i])]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _collect_observables(ds, args):
    series = []
    if getattr(args, "brane", None):
        size = args.brane.lower().split("x")[0]
        try:
            size = int(size)
        except ValueError:
            raise UsageError(f"--brane expects LxL, got {args.brane!r}")
        series.append(observable_sweep(ds, "brane", region_size=size))
    if getattr(args, "edge", None) is not None:
        series.append(observable_sweep(ds, "imbalance", edge_column=args.edge))
    if getattr(args, "nnparity", False):
        series.append(observable_sweep(ds, "nnparity"))
    return series


def _cmd_generate(args):
    if args.subcommand == "gen-tfim":
        cfg = TfimConfig(L=args.L, lambdas=parse_range(args.lambdas),
                         m=args.shots, seed=args.seed)
        ds = tfim_sweep(cfg)
        resolved = {"L": cfg.L, "lambdas": list(cfg.lambdas), "shots": cfg.m}
    elif args.subcommand == "gen-ising":
        cfg = IsingConfig(side=args.side, temperatures=parse_range(args.temp),
                          m=args.shots, burn_in=args.burn_in,
                          decorrelation=args.decorr, seed=args.seed,
                          algorithm=args.algo, fold_sector=not args.no_fold)
        ds = ising_sweep(cfg)
        resolved = {"side": cfg.side, "temperatures": list(cfg.temperatures),
                    "shots": cfg.m, "algorithm": cfg.algorithm,
                    "burn_in": cfg.burn_in, "decorrelation": cfg.decorrelation,
                    "fold_sector": cfg.fold_sector}
    else:
        ds = toy_dataset(args.kind, args.shots, args.seed, replicas=args.replicas)
        resolved = {"kind": args.kind, "shots": args.shots, "replicas": args.replicas}
    write_dataset(ds, args.out)
    print(f"wrote {len(ds.ensembles)} ensembles to {args.out}", file=sys.stderr)
    return resolved, {}


def _cmd_embed(args):
    ds = read_dataset(args.input)
    cfg = _pipeline_config(args)
    pre = preprocess_dataset(ds, cfg)
    emb, K = embed_vectors(pre, cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_embedding_csv(emb, outdir / "embedding.csv")
    emit_plot(emb.parameters, emb.coordinates[:, 0], outdir / "embedding.svg",
              xlabel=ds.parameter_name, ylabel="phi1",
              no_timestamp=args.no_timestamp)
    if args.dump_matrices:
        _write_matrix_csv(K.distances, K.parameters, outdir / "distances.csv")
        _write_matrix_csv(K.similarities, K.parameters, outdir / "kernel.csv")
    resolved = {"config": _config_dict(cfg), "bandwidth_used": K.bandwidth}
    return resolved, {"embedding": emb}


def _config_dict(cfg: PipelineConfig) -> dict:
    d = asdict(cfg)
    return d


def _cmd_detect(args, write_plot=True):
    ds = read_dataset(args.input)
    cfg = _pipeline_config(args)
    reports, emb = detect_transition(ds, cfg, method=args.method,
                                     n_boot=args.bootstrap, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    headline = "tanh" if "tanh" in reports else "cluster"
    payload = {name: rep.as_dict() for name, rep in reports.items()}
    payload["headline"] = headline
    with open(outdir / "transition.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    if write_plot:
        emit_plot(emb.parameters, emb.coordinates[:, 0], outdir / "transition.svg",
                  report=reports[headline], xlabel=ds.parameter_name, ylabel="phi1",
                  no_timestamp=args.no_timestamp)
    for name, rep in reports.items():
        print(f"{name}: p_c = {rep.p_c:.6g} +- {max(rep.p_c_stderr, rep.p_c_stderr_fit):.2g}",
              file=sys.stderr)
    resolved = {"config": _config_dict(cfg), "method": args.method,
                "bootstrap": args.bootstrap}
    return resolved, {"reports": reports, "embedding": emb, "dataset": ds}


def _cmd_observables(args):
    ds = read_dataset(args.input)
    series = _collect_observables(ds, args)
    if not series:
        raise UsageError("choose at least one of --brane/--edge/--nnparity")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_observables_csv(series, outdir / "observables.csv")
    resolved = {"observables": [s.name for s in series]}
    return resolved, {}


def _cmd_pipeline(args):
    t0 = time.monotonic()
    ds = read_dataset(args.input)
    cfg = _pipeline_config(args)
    reports, emb = detect_transition(ds, cfg, method=args.method,
                                     n_boot=args.bootstrap, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_embedding_csv(emb, outdir / "embedding.csv")
    headline = "tanh" if "tanh" in reports else "cluster"
    payload = {name: rep.as_dict() for name, rep in reports.items()}
    payload["headline"] = headline
    with open(outdir / "transition.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    series = _collect_observables(ds, args)
    if series:
        _write_observables_csv(series, outdir / "observables.csv")
    emit_plot(emb.parameters, emb.coordinates[:, 0], outdir / "embedding.svg",
              report=reports[headline], xlabel=ds.parameter_name, ylabel="phi1",
              no_timestamp=args.no_timestamp)
    render_overview_png(emb, outdir / "overview.png", reports=reports,
                        observables=series,
                        title=f"{ds.parameter_name} sweep ({ds.metadata.get('model', 'dataset')})")
    for name, rep in reports.items():
        print(f"{name}: p_c = {rep.p_c:.6g}", file=sys.stderr)
    print(f"pipeline finished in {time.monotonic() - t0:.1f}s", file=sys.stderr)
    resolved = {"config": _config_dict(cfg), "method": args.method,
                "bootstrap": args.bootstrap,
                "observables": [s.name for s in series]}
    return resolved, {}


_HANDLERS = {
    "gen-tfim": _cmd_generate,
    "gen-ising": _cmd_generate,
    "gen-toy": _cmd_generate,
    "embed": _cmd_embed,
    "detect": _cmd_detect,
    "observables": _cmd_observables,
    "pipeline": _cmd_pipeline,
}


def run(argv=None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 on --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    started = time.time()
    status, error = "ok", None
    resolved = {}
    try:
        resolved, _ = _HANDLERS[args.subcommand](args)
        code = EXIT_OK
    except UsageError as exc:
        status, error, code = "usage-error", str(exc), EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        status, error, code = "data-error", str(exc), EXIT_DATA
    except (NumericalError,) as exc:
        status, error, code = "numerical-error", str(exc), EXIT_NUMERICAL
    if error is not None:
        print(f"error: {error}", file=sys.stderr)
    manifest = {
        "subcommand": args.subcommand,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "resolved": _jsonable(resolved),
        "inputs": _input_digests(getattr(args, "input", "")) if getattr(args, "input", None) else {},
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "duration_s": round(time.time() - started, 3),
        "status": status,
        "error": error,
    }
    try:
        _write_run_manifest(args.out, manifest)
    except OSError as exc:  # pragma: no cover - unwritable output directory
        print(f"error: could not write run.json: {exc}", file=sys.stderr)
        code = max(code, EXIT_DATA)
    return code


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
