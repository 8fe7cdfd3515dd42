"""``spectre`` command line: detect, identify-target, estimate, gen, bench.

Exit status is 0 on success, 2 for bad flags or unreadable input and 3 when
the numerics fail (singular covariance, non-convergence, too few samples).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .detect import SpectreConfig, identify_target, spectre_adaptive, spectre_detect
from .errors import DataError, NumericError, ParameterError, SpectreError
from .io import read_mask, read_matrix, read_rmx, write_mask, write_rmx
from .linalg import ImplicitTMatrix, apply_implicit_T, dense_T
from .robust import FilterConfig, robust_gaussian
from .synth import SynthSpec, eval_removal, generate

logger = logging.getLogger("spectre")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_LABEL_FILE = re.compile(r"label_(\d+)\.rmx")


class _Timer:
    def __init__(self):
        self.laps = {}

    def lap(self, name, t0):
        self.laps[name] = round((time.perf_counter() - t0) * 1e3, 3)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dump_report(report: dict, path) -> str:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        p = Path(path)
        try:
            p.write_text(text)
        except OSError as exc:
            raise DataError(f"{p}: {exc.strerror or exc}") from exc
    return text


def _filter_config(args) -> FilterConfig:
    return FilterConfig(seed=args.seed)


def _spectre_config(args) -> SpectreConfig:
    return SpectreConfig(
        eps=args.eps,
        alpha=args.alpha,
        k=args.k,
        k_max=args.kmax,
        removal_multiplier=args.mult,
        seed=args.seed,
        split_svd=args.split_svd,
        filter=_filter_config(args),
    )


def _base_report(command, config, args):
    return {"command": command, "config": config, "timings_ms": None}


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def cmd_detect(args) -> int:
    tm = _Timer()
    t0 = time.perf_counter()
    X = read_matrix(args.input)
    mask = read_mask(args.mask, X.shape[0]) if args.mask else None
    tm.lap("read", t0)
    _clamp_kmax(args, *X.shape)
    cfg = _spectre_config(args)
    t0 = time.perf_counter()
    rep = spectre_detect(X, cfg.k, cfg) if cfg.k is not None else spectre_adaptive(X, cfg)
    tm.lap("detect", t0)
    config = {"input": str(args.input), "mask": None if args.mask is None else str(args.mask), **cfg.to_dict()}
    report = _base_report("detect", config, args)
    report.update(
        removed_indices=rep.removed,
        k_used=rep.k_used,
        mean_que=rep.mean_que,
        per_k=[[k, q] for k, q in rep.per_k_diagnostics],
        n=X.shape[0],
        d=X.shape[1],
    )
    if mask is not None:
        report["metrics"] = eval_removal(mask, rep.removed).to_dict()
    if args.timings:
        report["timings_ms"] = tm.laps
    dump_report(report, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# identify-target
# ---------------------------------------------------------------------------


def _load_label_dir(root) -> dict[int, np.ndarray]:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    files = {}
    for p in sorted(root.iterdir()):
        m = _LABEL_FILE.fullmatch(p.name)
        if m:
            label = int(m.group(1))
            if label in files:
                raise DataError(f"{root}: duplicate files for label {label}")
            files[label] = p
    if len(files) < 2:
        raise DataError(f"{root}: need label_<id>.rmx files for at least two labels, found {len(files)}")
    return {label: read_rmx(p) for label, p in sorted(files.items())}


def cmd_identify_target(args) -> int:
    tm = _Timer()
    t0 = time.perf_counter()
    data = _load_label_dir(args.inputs)
    tm.lap("read", t0)
    if args.parallel < 1:
        raise ParameterError("--parallel must be >= 1")
    _clamp_kmax(args, min(x.shape[0] for x in data.values()), min(x.shape[1] for x in data.values()))
    cfg = _spectre_config(args)
    t0 = time.perf_counter()
    tr = identify_target(data, cfg, parallel=args.parallel)
    tm.lap("identify", t0)
    best = tr.per_label[tr.label]
    chosen = best.reports[tr.k]
    config = {"inputs": str(args.inputs), "parallel": args.parallel, **cfg.to_dict()}
    report = _base_report("identify-target", config, args)
    report.update(
        label=tr.label,
        k_used=tr.k,
        mean_que=tr.q,
        removed_indices=chosen.removed,
        per_k=[[k, q] for k, q in best.diagnostics()],
        per_label=tr.table(),
    )
    if args.timings:
        report["timings_ms"] = tm.laps
    dump_report(report, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _rel_errors(mu, Sigma, mu_ref, Sigma_ref):
    from .linalg import inv_sqrt

    W = inv_sqrt(Sigma_ref)
    k = Sigma.shape[0]
    return {
        "cov_frobenius": float(np.linalg.norm(W @ Sigma @ W - np.eye(k))),
        "mean_mahalanobis": float(np.linalg.norm(W @ (mu - mu_ref))),
    }


def cmd_estimate(args) -> int:
    tm = _Timer()
    t0 = time.perf_counter()
    X = read_matrix(args.input)
    mask = read_mask(args.mask, X.shape[0]) if args.mask else None
    tm.lap("read", t0)
    if args.no_filter:
        eps = 0.0
    else:
        if args.eps is None:
            raise ParameterError("--eps is required unless --no-filter is given")
        if not 0 < args.eps < 0.33:
            raise ParameterError(f"--eps must lie in (0, 0.33), got {args.eps}")
        eps = args.eps
    fcfg = _filter_config(args)
    t0 = time.perf_counter()
    est = robust_gaussian(X, eps, fcfg)
    tm.lap("estimate", t0)
    naive_mu = X.mean(axis=0)
    naive_cov = np.cov(X.T, bias=True).reshape(X.shape[1], X.shape[1])
    config = {
        "input": str(args.input),
        "mask": None if args.mask is None else str(args.mask),
        "eps": eps,
        "no_filter": bool(args.no_filter),
        "seed": args.seed,
        "filter": fcfg.to_dict(),
    }
    report = _base_report("estimate", config, args)
    report.update(
        mean=est.mean,
        cov=est.cov,
        naive_mean=naive_mu,
        naive_cov=naive_cov,
        iterations={"covariance": est.iterations_cov, "mean": est.iterations_mean},
        removed={"covariance_pairs": est.removed_cov, "mean_rows": est.removed_mean, "total": est.removed_by_filter},
        n=X.shape[0],
        d=X.shape[1],
    )
    if mask is not None:
        clean = X[~mask]
        if clean.shape[0] < 2:
            raise ParameterError("mask leaves fewer than 2 clean rows")
        mu_ref = clean.mean(axis=0)
        cov_ref = np.cov(clean.T, bias=True).reshape(X.shape[1], X.shape[1])
        robust_err = _rel_errors(est.mean, est.cov, mu_ref, cov_ref)
        naive_err = _rel_errors(naive_mu, naive_cov, mu_ref, cov_ref)
        report["metrics"] = {"robust_error": robust_err, "naive_error": naive_err}
        print(
            f"cov error vs clean rows: robust {robust_err['cov_frobenius']:.6g}, naive {naive_err['cov_frobenius']:.6g}",
            file=sys.stderr,
        )
    if args.timings:
        report["timings_ms"] = tm.laps
    dump_report(report, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise DataError(f"{args.spec}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.spec}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParameterError(f"{args.spec}: spec must be a JSON object")
    spec = SynthSpec.from_dict(raw)
    ds = generate(spec)
    out = Path(args.outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{out}: {exc.strerror or exc}") from exc
    files = []
    for label in sorted(ds.data):
        write_rmx(out / f"label_{label}.rmx", ds.data[label])
        write_mask(out / f"mask_{label}.bin", ds.poison_mask[label])
        files += [f"label_{label}.rmx", f"mask_{label}.bin"]
    (out / "spec.json").write_text(spec.to_json() + "\n")
    files.append("spec.json")
    summary = {
        "command": "gen",
        "config": {"spec": spec.to_dict(), "outdir": str(out)},
        "files": files,
        "n_poison": spec.n_poison,
        "target_label": spec.target_label,
    }
    dump_report(summary, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _best_time(fn, reps):
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(k: int, m: int, reps: int, seed: int = 0) -> dict:
    """Time the implicit operator against building and applying the dense one."""
    if k < 1 or m < 1 or reps < 1:
        raise ParameterError("--k, --m and --reps must be positive")
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((k, m))
    v = rng.standard_normal(k * k)
    T = ImplicitTMatrix(Y)
    fast = apply_implicit_T(T, v)
    slow = dense_T(Y) @ v
    rel = float(np.linalg.norm(fast - slow) / max(np.linalg.norm(slow), 1e-300))
    if rel > 1e-9:
        raise NumericError(f"implicit and dense operators disagree (relative error {rel:.3g})")
    t_implicit = _best_time(lambda: apply_implicit_T(ImplicitTMatrix(Y), v), reps)
    t_dense = _best_time(lambda: dense_T(Y) @ v, reps)
    return {
        "k": k,
        "m": m,
        "reps": reps,
        "seed": seed,
        "backend": BACKEND,
        "relative_error": rel,
        "implicit_ms": t_implicit * 1e3,
        "dense_ms": t_dense * 1e3,
        "ratio": t_dense / t_implicit if t_implicit > 0 else math.inf,
    }


def cmd_bench(args) -> int:
    res = run_bench(args.k, args.m, args.reps, args.seed)
    report = {"command": "bench", "config": {"k": args.k, "m": args.m, "reps": args.reps, "seed": args.seed}, **res}
    dump_report(report, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_spectre_flags(p, k_flag=True):
    p.add_argument("--eps", type=float, required=True, help="assumed poison fraction, 0 < eps < 0.33")
    p.add_argument("--alpha", type=float, default=4.0, help="QUE exponent (default 4)")
    if k_flag:
        p.add_argument("--k", type=int, default=None, help="fixed projection dimension (skips the k sweep)")
    p.add_argument("--kmax", type=int, default=None, help="largest k in the sweep (default 64)")
    p.add_argument("--mult", type=float, default=1.5, help="removal budget multiplier (default 1.5)")
    p.add_argument("--split-svd", action="store_true", help="estimate the subspace from a random half of the rows")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-", help="report path ('-' for stdout)")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings (makes reports non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("detect", help="flag likely poisoned rows of one representation matrix")
    p.add_argument("--input", required=True, help=".rmx or header-free .csv matrix")
    p.add_argument("--mask", default=None, help="ground-truth poison mask for evaluation")
    _add_spectre_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("identify-target", help="find the label whose representations carry a signature")
    p.add_argument("--inputs", required=True, help="directory of label_<id>.rmx files")
    p.add_argument("--parallel", type=int, default=1, help="labels processed concurrently")
    _add_spectre_flags(p, k_flag=False)
    _add_common(p)
    p.set_defaults(func=cmd_identify_target, k=None)

    p = sub.add_parser("estimate", help="robust mean and covariance of a matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--no-filter", action="store_true", help="plain sample statistics (eps = 0)")
    p.add_argument("--mask", default=None, help="mask of corrupted rows; reports errors against the clean rows")
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gen", help="write a synthetic labeled dataset")
    p.add_argument("--spec", required=True, help="JSON file with SynthSpec fields")
    p.add_argument("--outdir", required=True)
    p.add_argument("--output", default="-", help="summary path ('-' for stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="time the implicit fourth-moment operator against the dense one")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def _clamp_kmax(args, n, d):
    """Default --kmax is 64, lowered to what the data support; an explicit value is kept."""
    if args.kmax is not None:
        return
    room = min(d, n // 2 - 1)
    args.kmax = max(1, min(64, room))
    if args.k is not None:
        args.kmax = max(args.kmax, args.k)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ParameterError, DataError) as exc:
        print(f"spectre {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpectreError as exc:
        print(f"spectre {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
