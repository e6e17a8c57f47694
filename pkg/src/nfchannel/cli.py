"""Command-line front end: ``nfchannel <command> --scene scene.json [options]``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure. Every output file carries a ``format_version`` field or header.
"""

import argparse
import logging
import os
import sys
import warnings

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

from . import io
from .correlation import CorrelationKernel, assemble_matrix, relative_error
from .dof import dof_report
from .estimators import (
    NFS_DEFAULTS,
    build_codebook,
    compact_eigen,
    estimate_ls,
    estimate_nfs,
    estimate_omp,
    estimate_subspace,
    isotropic_correlation,
    make_observation,
)
from .exceptions import (
    ConfigError,
    DegenerateGeometryError,
    InvalidArgumentError,
    NotPSDError,
    QuadratureError,
)
from .fitting import (
    PARAM_NAMES,
    FitProblem,
    initial_guess,
    quasi_newton_fit,
    ray_cluster_target,
    read_ray_table,
)
from .geometry import Scene
from .synthesis import GaussianFieldSampler, ChannelRealization, eigen_system, matrix_digest
from .wavenumber import classify_regime, detect_peaks, expected_spectrum, sample_spectrum

log = logging.getLogger("nfchannel")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SWEEP_METHODS = ("ls", "omp", "subspace", "subspace-weighted", "nfs")


class UsageError(ConfigError):
    pass


def _load_scene(args, require_scatterers=True):
    if not args.scene:
        raise UsageError("--scene is required for this command")
    if not os.path.isfile(args.scene):
        raise UsageError(f"scene file not found: {args.scene}")
    return Scene.from_json(args.scene, require_scatterers=require_scatterers)


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _scene_matrix(scene, mode="analytic", tol=1e-8, threads=None):
    kernel = CorrelationKernel(scene.clusters, scene.wave)
    return assemble_matrix(kernel, scene.array, mode=mode, tol=tol, n_jobs=threads)


def _write_matrix(args, R, stem):
    paths = []
    if args.format in ("csv", "both"):
        paths.append(_out(args, stem + ".csv"))
        io.write_matrix_csv(paths[-1], R)
    if args.format in ("bin", "both"):
        paths.append(_out(args, stem + ".bin"))
        io.write_matrix_binary(paths[-1], R)
    return paths


def cmd_correlate(args):
    scene = _load_scene(args)
    summary = {"dim": scene.array.size, "files": []}
    mats = {}
    modes = ("analytic", "oracle") if args.mode == "both" else (args.mode,)
    for mode in modes:
        R = _scene_matrix(scene, mode, args.tol, args.threads)
        try:
            R.check()
        except ValueError as exc:
            raise NotPSDError(str(exc)) from exc
        mats[mode] = R
        summary["files"] += [os.path.basename(p) for p in _write_matrix(args, R, f"correlation_{mode}")]
        summary[f"{mode}_digest"] = matrix_digest(R)
    if len(mats) == 2:
        summary["rel_error"] = relative_error(mats["analytic"], mats["oracle"])
    io.write_json(_out(args, "correlate.json"), summary)
    return summary


def cmd_sample(args):
    scene = _load_scene(args)
    R = _scene_matrix(scene)
    sampler = GaussianFieldSampler(method=args.method).fit(R)
    digest = matrix_digest(R)
    files = []
    for i in range(args.count):
        seed = args.seed + i
        h = sampler.sample(1, random_state=seed)[0]
        path = _out(args, f"realization_{i:04d}.csv")
        io.write_realization_csv(path, ChannelRealization(h, seed, digest))
        files.append(os.path.basename(path))
    summary = {"count": args.count, "method": args.method, "source": digest, "files": files}
    io.write_json(_out(args, "sample.json"), summary)
    return summary


def _spectrum(scene, args):
    R = _scene_matrix(scene)
    if args.source == "expected":
        return expected_spectrum(R, scene.array, scene.wave)
    h = GaussianFieldSampler().fit(R).sample(1, random_state=args.seed)[0]
    return sample_spectrum(h, scene.array, scene.wave)


def cmd_spectrum(args):
    scene = _load_scene(args)
    grid = _spectrum(scene, args)
    peaks = detect_peaks(grid, args.eta, neighbors=args.neighbors)
    io.write_spectrum_csv(_out(args, "spectrum.csv"), grid)
    summary = {"eta": args.eta, "n_peaks": len(peaks), "peaks": [list(p) for p in peaks]}
    io.write_json(_out(args, "peaks.json"), summary)
    return summary


def _dof(scene, args):
    R = _scene_matrix(scene)
    c = scene.clusters[args.cluster]
    rep = dof_report(R, c.radius, scene.array.aperture_radius, c.distance, scene.wave, args.threshold)
    io.write_eigen_csv(_out(args, "eigenvalues.csv"), eigen_system(R).eigenvalues, rep.eigen_fractions)
    return rep.to_dict()


def cmd_dof(args):
    scene = _load_scene(args)
    if not 0 <= args.cluster < len(scene.clusters):
        raise UsageError(f"--cluster must index one of {len(scene.clusters)} scatterers")
    out = _dof(scene, args)
    io.write_json(_out(args, "dof.json"), out)
    return out


def _classify(scene):
    r_m = scene.array.aperture_radius
    regimes = []
    for c in scene.clusters:
        regimes.append(classify_regime(c.radius, r_m, c.distance, scene.wave).to_dict())
    return {"regimes": regimes}


def cmd_classify(args):
    scene = _load_scene(args)
    out = _classify(scene)
    io.write_json(_out(args, "classify.json"), out)
    return out


def cmd_report(args):
    scene = _load_scene(args)
    if not 0 <= args.cluster < len(scene.clusters):
        raise UsageError(f"--cluster must index one of {len(scene.clusters)} scatterers")
    grid = _spectrum(scene, args)
    peaks = detect_peaks(grid, args.eta, neighbors=args.neighbors)
    io.write_spectrum_csv(_out(args, "spectrum.csv"), grid)
    io.write_json(_out(args, "peaks.json"), {"eta": args.eta, "n_peaks": len(peaks), "peaks": [list(p) for p in peaks]})
    io.write_json(_out(args, "dof.json"), _dof(scene, args))
    out = _classify(scene)
    io.write_json(_out(args, "classify.json"), out)
    return {"n_peaks": len(peaks), **out}


def parse_methods(text):
    """Parse ``"ls,omp:20,nfs"`` into ``[(name, L or None), ...]``."""
    methods = []
    for tok in (t.strip() for t in text.split(",") if t.strip()):
        name, _, arg = tok.partition(":")
        if name not in SWEEP_METHODS:
            raise UsageError(f"unknown method {name!r}; choose from {', '.join(SWEEP_METHODS)}")
        if name == "omp":
            try:
                L = int(arg) if arg else 20
            except ValueError as exc:
                raise UsageError(f"bad OMP support size in {tok!r}") from exc
            if L < 1:
                raise UsageError(f"OMP support size must be >= 1, got {L}")
            methods.append((name, L))
        else:
            if arg:
                raise UsageError(f"method {name!r} takes no argument")
            methods.append((name, None))
    if not methods:
        raise UsageError("no estimator methods given")
    return methods


def parse_floats(text, name):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{name} must be a comma-separated list of numbers") from exc
    if not vals:
        raise UsageError(f"{name} is empty")
    return vals


def trial_seed(seed, trial):
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def run_sweep(scene, methods, snr_db, trials, seed, eta=3.0, nfs_params=None, oversample=1):
    """Per-trial NMSE records for every (method, SNR, trial)."""
    R = _scene_matrix(scene).normalized()
    sampler = GaussianFieldSampler().fit(R)
    array, wave = scene.array, scene.wave
    basis = compact_eigen(isotropic_correlation(array, wave))
    codebooks = {}
    if any(m == "omp" for m, _ in methods):
        codebooks["omp"] = build_codebook(array, wave)
    records = []
    for t in range(trials):
        ts = trial_seed(seed, t)
        h = sampler.sample(1, random_state=ts)[0]
        for si, db in enumerate(snr_db):
            obs = make_observation(h, 10.0 ** (db / 10.0), np.random.default_rng([ts, si]))
            for name, L in methods:
                if name == "ls":
                    rep = estimate_ls(obs)
                elif name == "omp":
                    rep = estimate_omp(obs, codebooks["omp"], L)
                elif name == "subspace":
                    rep = estimate_subspace(obs, array, wave, weighted=False, basis=basis)
                elif name == "subspace-weighted":
                    rep = estimate_subspace(obs, array, wave, weighted=True, basis=basis)
                else:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        rep = estimate_nfs(obs, array, wave, eta, nfs_params, basis=basis, oversample=oversample)
                label = f"omp:{L}" if name == "omp" else name
                records.append({"method": label, "snr_db": db, "trial": t, "nmse": rep.nmse, "seed": ts})
    return records


def cmd_sweep(args):
    methods = parse_methods(args.methods)
    snr_db = parse_floats(args.snr_db, "--snr-db")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if not args.eta > 0:
        raise UsageError("--eta must be > 0")
    scene = _load_scene(args)
    nfs_params = {"d": args.nfs_d, "r": args.nfs_r, "a": args.nfs_a, "mu": None}
    records = run_sweep(scene, methods, snr_db, args.trials, args.seed, args.eta, nfs_params)
    io.write_sweep_csv(_out(args, "sweep.csv"), records)
    summary = io.sweep_summary(records)
    io.write_json(_out(args, "sweep_summary.json"), summary)
    return summary


def cmd_fit(args):
    scene = _load_scene(args, require_scatterers=args.target is None or args.init == "scene")
    if args.target is None:
        target = _scene_matrix(scene)
    elif args.target_kind == "rays":
        target = ray_cluster_target(read_ray_table(args.target), scene.array, scene.wave)
    else:
        target = io.read_matrix(args.target)
    n_clusters = args.clusters
    if args.init == "scene":
        if not scene.clusters:
            raise UsageError("--init scene needs scatterers in the scene")
        n_clusters = len(scene.clusters)
    problem = FitProblem(target, scene.array, scene.wave, n_clusters)
    x0 = problem.encode(scene.clusters) if args.init == "scene" else initial_guess(problem)
    x, trace = quasi_newton_fit(problem, x0, max_iter=args.max_iter, tol=args.tol)
    names = [f"c{i}_{p}" for i in range(n_clusters) for p in PARAM_NAMES]
    io.write_trace_csv(_out(args, "fit_trace.csv"), trace, names)
    fitted = Scene(scene.wave, scene.array, tuple(problem.decode(x))).to_dict()
    summary = {
        "loss": problem.loss(x),
        "initial_loss": problem.loss(x0),
        "iterations": len(trace.iterates) - 1,
        "converged": trace.converged,
        "curvature_skips": trace.curvature_skips,
        "message": trace.message,
        "scene": fitted,
    }
    io.write_json(_out(args, "fit.json"), summary)
    return summary


def _global_options(suppress):
    # subcommands repeat the flags with suppressed defaults so values given
    # before the subcommand survive
    parser = argparse.ArgumentParser(add_help=False)
    g = parser.add_argument_group("global options")

    def dflt(value):
        return argparse.SUPPRESS if suppress else value

    g.add_argument("--scene", default=dflt(None), help="scene JSON file")
    g.add_argument("--out", default=dflt("."), help="output directory (default: current)")
    g.add_argument("--seed", type=int, default=dflt(0), help="base random seed (default 0)")
    g.add_argument("--threads", type=int, default=dflt(None), help="cap on worker threads")
    g.add_argument("-v", "--verbose", action="store_true", default=dflt(False))
    return parser


def build_parser():
    p = argparse.ArgumentParser(
        prog="nfchannel", description=__doc__.splitlines()[0], parents=[_global_options(False)]
    )
    common = _global_options(True)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("correlate", parents=[common], help="assemble correlation matrices")
    c.add_argument("--mode", choices=("analytic", "oracle", "both"), default="analytic")
    c.add_argument("--tol", type=float, default=1e-8, help="quadrature tolerance (oracle)")
    c.add_argument("--format", choices=("csv", "bin", "both"), default="csv")
    c.set_defaults(func=cmd_correlate)

    s = sub.add_parser("sample", parents=[common], help="draw channel realizations")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--method", choices=("cholesky", "kl"), default="cholesky")
    s.set_defaults(func=cmd_sample)

    def spectrum_opts(q):
        q.add_argument("--source", choices=("expected", "sample"), default="expected")
        q.add_argument("--eta", type=float, default=3.0)
        q.add_argument("--neighbors", type=int, choices=(4, 8), default=8)

    sp = sub.add_parser("spectrum", parents=[common], help="wavenumber spectrum and peaks")
    spectrum_opts(sp)
    sp.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("dof", parents=[common], help="degrees-of-freedom report")
    d.add_argument("--threshold", type=float, default=0.99)
    d.add_argument("--cluster", type=int, default=0, help="scatterer whose r_s and d enter the bounds")
    d.set_defaults(func=cmd_dof)

    w = sub.add_parser("sweep", parents=[common], help="estimator NMSE sweep")
    w.add_argument("--methods", default="ls,omp:20,subspace,subspace-weighted,nfs", help="comma list; omp:L sets the support size")
    w.add_argument("--snr-db", default="0,5,10,15,20", help="comma list of SNR values in dB")
    w.add_argument("--trials", type=int, default=200, help="channel draws per SNR")
    w.add_argument("--eta", type=float, default=3.0, help="NFS peak threshold (multiple of the grid mean)")
    w.add_argument("--nfs-d", type=float, default=NFS_DEFAULTS["d"], help="NFS cluster distance (m)")
    w.add_argument("--nfs-r", type=float, default=NFS_DEFAULTS["r"], help="NFS cluster radius (m)")
    w.add_argument("--nfs-a", type=float, default=NFS_DEFAULTS["a"], help="NFS concentration")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", parents=[common], help="quasi-Newton cluster fit")
    f.add_argument("--target", help="target matrix (.csv/.bin) or ray table; default: the scene itself")
    f.add_argument("--target-kind", choices=("matrix", "rays"), default="matrix")
    f.add_argument("--clusters", type=int, default=3)
    f.add_argument("--init", choices=("peaks", "scene"), default="peaks")
    f.add_argument("--max-iter", type=int, default=200)
    f.add_argument("--tol", type=float, default=1e-6)
    f.set_defaults(func=cmd_fit)

    k = sub.add_parser("classify", parents=[common], help="near/far regime per scatterer")
    k.set_defaults(func=cmd_classify)

    r = sub.add_parser("report", parents=[common], help="spectrum, DoF and regime in one run")
    spectrum_opts(r)
    r.add_argument("--threshold", type=float, default=0.99)
    r.add_argument("--cluster", type=int, default=0)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=args.threads):
            summary = args.func(args)
    except (QuadratureError, NotPSDError, DegenerateGeometryError, linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InvalidArgumentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s", summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
