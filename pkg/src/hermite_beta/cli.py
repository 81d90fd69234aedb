"""Command-line entry point ``hbeta``.

Every run writes ``<command>_<n>_<beta>_<seed>.manifest`` to the output
directory: flat ``key = value`` lines echoing the resolved configuration.
``hbeta --config FILE`` re-runs it; flags given next to ``--config`` win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, experiments, phase, sturm
from .errors import DegenerateSampleError, HermiteBetaError, NumericalInconsistencyError, ParameterError
from .model import EnsembleParams, conjugate, sample_ensemble

OUT_ENV = "HBETA_OUT"
COMMANDS = ("sample", "count", "local-law", "index-clt", "global-law", "diagnose-moments",
            "phase-trace", "variance-slope")
# keys that are bookkeeping rather than run parameters
_NOT_IN_MANIFEST = {"config", "func"}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _real(text: str) -> float:
    """Float that also accepts ``inf``, ``+inf`` and ``-inf``."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if math.isnan(v):
        raise argparse.ArgumentTypeError("nan is not allowed")
    return v


def _finite(text: str) -> float:
    v = _real(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _tn(text: str):
    return None if text == "auto" else _finite(text)


def _ns(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}")


def _cut(text: str):
    return text if text in ("default", "margin") else int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1000)
    common.add_argument("--beta", type=_finite, default=2.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "."),
                        help=f"output directory (default: ${OUT_ENV} or .)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--config", help="key = value file; explicit flags override it")

    parser = argparse.ArgumentParser(prog="hbeta", description="Hermite beta ensemble simulation and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="dump one realization as index,a,b CSV")
    p.add_argument("--replica", type=int, default=0)

    p = sub.add_parser("count", parents=[common], help="eigenvalues in (lo, hi]")
    p.add_argument("--lo", type=_real, default=-math.inf)
    p.add_argument("--hi", type=_real, default=math.inf)
    p.add_argument("--engine", choices=experiments.ENGINES, default="sturm")
    p.add_argument("--x", type=_finite, default=0.0, help="frame location for the phase engine")
    p.add_argument("--replica", type=int, default=0)

    for name, helptext in (("local-law", "counts in windows of width tn/sqrt(n)"),
                           ("index-clt", "fluctuations of the number of eigenvalues above x sqrt(n)"),
                           ("global-law", "distance to the semicircle CDF")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--replicas", type=int, default=200 if name != "global-law" else 1)
        if name != "global-law":
            p.add_argument("--x", type=_finite, default=0.0)
            p.add_argument("--engine", choices=experiments.ENGINES, default="sturm")
        if name == "local-law":
            p.add_argument("--tn", type=_tn, default="auto", help="window scale, 'auto' = log n")

    p = sub.add_parser("diagnose-moments", parents=[common], help="single-step moment check")
    p.add_argument("--x", type=_finite, default=0.0)
    p.add_argument("--lam", type=_finite, default=0.0)
    p.add_argument("--l", default="0", help="integer, 'half' (n0/2) or 'cut' (margin cut - 1)")
    p.add_argument("--phi", type=_finite, default=1.3)
    p.add_argument("--samples", type=int, default=10 ** 6)

    p = sub.add_parser("phase-trace", parents=[common], help="forward phase trajectory as CSV")
    p.add_argument("--x", type=_finite, default=0.0)
    p.add_argument("--lam", type=_finite, default=0.0)
    p.add_argument("--cut", type=_cut, default="default")
    p.add_argument("--replica", type=int, default=0)

    p = sub.add_parser("variance-slope", parents=[common], help="slope of Var(index) against log n")
    p.add_argument("--ns", type=_ns, default="1000 10000 100000")
    p.add_argument("--replicas", type=int, default=4000)
    return parser


def _prepare_argv(argv: list[str]) -> tuple[list[str], dict]:
    """Pull ``--config`` out early so its values can become parser defaults."""
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
    cfg = read_config(cfg_path) if cfg_path else {}
    has_command = any(t in COMMANDS for t in argv if not t.startswith("-"))
    if not has_command and "command" in cfg:
        argv = [cfg["command"], *argv]
    cfg.pop("command", None)
    return argv, cfg


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv, cfg = _prepare_argv(argv)
    if cfg:
        # defaults for the chosen subparser come from the config file
        ns, _ = parser.parse_known_args(argv)
        subparser = parser._subparsers._group_actions[0].choices[ns.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def _resolved(args: argparse.Namespace, **extra) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in _NOT_IN_MANIFEST}
    d.update(extra)
    return d


def _manifest_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def write_manifest(outdir: Path, resolved: dict) -> Path:
    stem = f"{resolved['command']}_{resolved['n']}_{float(resolved['beta']):g}_{resolved['seed']}"
    path = outdir / f"{stem}.manifest"
    lines = [f"{k} = {_manifest_value(v)}" for k, v in resolved.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ParameterError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ParameterError(f"output directory {out} is not writable")
    return out


def _cmd_sample(args, params, out):
    m = sample_ensemble(params, params.rng(args.replica))
    path = m.to_csv(out / f"model_{params.n}_{params.beta:g}_{params.seed}.csv")
    print(path)
    return {}


def _cmd_count(args, params, out):
    m = sample_ensemble(params, params.rng(args.replica))
    glo, ghi = sturm.padded_bounds(m)
    lo = glo if args.lo == -math.inf else args.lo
    hi = ghi if args.hi == math.inf else args.hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterError("interval endpoints must be finite or the tokens inf/-inf")
    res = {}
    if args.engine in ("sturm", "both"):
        res["sturm"] = sturm.count_interval(m, lo, hi).count
    if args.engine in ("phase", "both"):
        frame = phase.SpectralFrame(args.x, params.n, params.beta)
        r = phase.count_interval_phase(conjugate(m), frame, frame.lambda_of(lo), frame.lambda_of(hi))
        res["phase"] = r.count
    if len(set(res.values())) > 1:
        raise NumericalInconsistencyError(f"engines disagree: {res}")
    N = next(iter(res.values()))
    print(N)
    (out / f"count_{params.n}_{params.beta:g}_{params.seed}.json").write_text(
        json.dumps({"lo": lo, "hi": hi, "count": N, "engines": res}, indent=2, sort_keys=True) + "\n")
    return {}


def _cmd_experiment(args, params, out):
    cfg = experiments.ExperimentConfig(
        params, x=getattr(args, "x", 0.0), tn=getattr(args, "tn", None), replicas=args.replicas,
        engine=getattr(args, "engine", "sturm"), threads=args.threads)
    run = {"local-law": experiments.run_local_law, "index-clt": experiments.run_index_clt,
           "global-law": experiments.run_global_law}[args.command]
    rep = run(cfg)
    js, cs = rep.write(out)
    print(json.dumps(experiments._jsonable({k: v for k, v in rep.summary().items() if k != "metadata"}), sort_keys=True))
    print(js)
    print(cs)
    return {"tn": cfg.resolved_tn} if args.command == "local-law" else {}


def _cmd_moments(args, params, out):
    frame = phase.SpectralFrame(args.x, params.n, params.beta)
    if args.l == "half":
        l = int(frame.n0 / 2)
    elif args.l == "cut":
        l = phase.margin_cut(frame) - 1
    else:
        try:
            l = int(args.l)
        except ValueError:
            raise ParameterError(f"--l must be an integer, 'half' or 'cut', got {args.l!r}")
    rep = asymptotics.moment_check(l, args.lam, args.phi, frame, args.samples, params.rng(0))
    path = out / f"diagnose-moments_{params.n}_{params.beta:g}_{params.seed}.json"
    path.write_text(rep.to_json(indent=2, sort_keys=True) + "\n")
    print(rep.to_json(sort_keys=True))
    return {"l": l}


def _cmd_trace(args, params, out):
    m = sample_ensemble(params, params.rng(args.replica))
    frame = phase.SpectralFrame(args.x, params.n, params.beta)
    L = {"default": phase.default_cut(frame), "margin": phase.margin_cut(frame)}.get(args.cut, args.cut)
    tr = phase.forward_phase(conjugate(m), frame, args.lam, L)
    path = tr.to_csv(out / f"phase-trace_{params.n}_{params.beta:g}_{params.seed}.csv")
    print(path)
    return {"cut": L}


def _cmd_slope(args, params, out):
    r = experiments.variance_slope(args.ns, params.beta, args.replicas, params.seed, args.threads)
    d = r.to_dict()
    d["predicted_slope"] = 1.0 / (math.pi ** 2 * params.beta)
    path = out / f"variance-slope_{params.n}_{params.beta:g}_{params.seed}.json"
    path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    print(json.dumps(d, sort_keys=True))
    return {}


_DISPATCH = {
    "sample": _cmd_sample, "count": _cmd_count, "local-law": _cmd_experiment,
    "index-clt": _cmd_experiment, "global-law": _cmd_experiment,
    "diagnose-moments": _cmd_moments, "phase-trace": _cmd_trace, "variance-slope": _cmd_slope,
}


def run(args: argparse.Namespace) -> int:
    if args.threads < 1:
        raise ParameterError("--threads must be >= 1")
    params = EnsembleParams(args.n, args.beta, args.seed)
    out = _outdir(args.out)
    extra = _DISPATCH[args.command](args, params, out)
    write_manifest(out, _resolved(args, **extra))
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ParameterError as exc:
        print(f"hbeta: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    np.seterr(over="ignore")
    try:
        return run(args)
    except (NumericalInconsistencyError, DegenerateSampleError) as exc:
        print(f"hbeta: numerical inconsistency: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, HermiteBetaError, ValueError) as exc:
        print(f"hbeta: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
