"""Monte Carlo experiments: global and local semicircle law, index fluctuations.

Replica ``r`` always draws from stream ``r`` of the base seed, and replicas
are processed in fixed-size batches whose results are folded in index order,
so reports do not depend on the number of worker threads.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DomainError, ParameterError
from .model import EnsembleParams, sample_batch
from .phase import (SpectralFrame, backward_phase_batch, conjugate_columns, default_cut,
                    forward_phase_batch, windings)
from .sturm import batch_count_below

ENGINES = ("sturm", "phase", "both")
# cap on n * replicas held in memory per batch
_BATCH_CELLS = 4_000_000


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    out = 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * math.pi) + np.arcsin(x / 2.0) / math.pi
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExperimentConfig:
    params: EnsembleParams
    x: float = 0.0
    tn: float | None = None
    replicas: int = 1
    engine: str = "sturm"
    threads: int = 1

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ParameterError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if isinstance(self.replicas, bool) or int(self.replicas) != self.replicas or self.replicas < 1:
            raise ParameterError(f"replicas must be a positive integer, got {self.replicas}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ParameterError(f"threads must be a positive integer, got {self.threads}")
        if self.tn is not None and not (self.tn > 0 and math.isfinite(self.tn)):
            raise ParameterError(f"tn must be a positive real, got {self.tn}")
        if not math.isfinite(self.x):
            raise ParameterError("x must be finite")

    @property
    def resolved_tn(self) -> float:
        return math.log(self.params.n) if self.tn is None else float(self.tn)

    def regime_warnings(self) -> list[str]:
        n, tn = self.params.n, self.resolved_tn
        out = []
        if tn <= math.sqrt(math.log(n)):
            out.append(f"tn = {tn:g} <= sqrt(log n) = {math.sqrt(math.log(n)):g}")
        if tn >= math.sqrt(n):
            out.append(f"tn = {tn:g} >= sqrt(n) = {math.sqrt(n):g}")
        return out

    def to_dict(self) -> dict:
        return {"n": self.params.n, "beta": self.params.beta, "seed": self.params.seed, "x": self.x,
                "tn": self.resolved_tn, "replicas": self.replicas, "engine": self.engine}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    per_replica: np.ndarray
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_distance: float
    metadata: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict)

    @property
    def stem(self) -> str:
        c = self.config
        return f"{self.experiment}_{c['n']}_{c['beta']:g}_{c['seed']}"

    def summary(self) -> dict:
        return {"experiment": self.experiment, "config": self.config, "mean": self.mean,
                "variance": self.variance, "skewness": self.skewness,
                "excess_kurtosis": self.excess_kurtosis, "ks_distance": self.ks_distance,
                "metadata": self.metadata}

    def write(self, outdir) -> tuple[Path, Path]:
        """Write ``<stem>.json`` (summary) and ``<stem>.csv`` (one row per replica)."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        js = outdir / f"{self.stem}.json"
        cs = outdir / f"{self.stem}.csv"
        js.write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n")
        cols = {"replica": np.arange(self.per_replica.size), **self.columns}
        names = list(cols)
        with cs.open("w") as fh:
            fh.write(",".join(names) + "\n")
            for i in range(self.per_replica.size):
                fh.write(",".join(_fmt(cols[k][i]) for k in names) + "\n")
        return js, cs


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _moments(v: np.ndarray) -> tuple[float, float, float, float]:
    v = np.asarray(v, dtype=float)
    mean = float(v.mean())
    var = float(v.var(ddof=1)) if v.size > 1 else 0.0
    if v.size > 2 and var > 0:
        return mean, var, float(stats.skew(v)), float(stats.kurtosis(v))
    return mean, var, math.nan, math.nan


def _batches(n: int, replicas: int, cells: int = _BATCH_CELLS) -> list[range]:
    size = max(1, min(replicas, cells // max(n, 1)))
    return [range(i, min(i + size, replicas)) for i in range(0, replicas, size)]


def _run_batches(fn, n: int, replicas: int, threads: int) -> list:
    batches = _batches(n, replicas)
    if threads == 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, batches))


# --------------------------------------------------------------------------
# Normality
# --------------------------------------------------------------------------

@dataclass
class NormalityReport:
    ks_distance: float
    skewness: float
    excess_kurtosis: float
    stderr: dict
    degenerate: bool
    size: int

    def to_dict(self) -> dict:
        return asdict(self)


def normality_suite(samples, n_boot: int = 200, seed: int = 0) -> NormalityReport:
    """KS distance to N(0,1) after standardizing, skewness and excess kurtosis, with bootstrap SEs."""
    v = np.asarray(samples, dtype=float).ravel()
    if v.size < 100:
        raise ParameterError(f"normality_suite needs >= 100 samples, got {v.size}")
    sd = v.std(ddof=1)
    if not sd > 0 or not np.isfinite(sd):
        nan = math.nan
        return NormalityReport(nan, nan, nan, {"ks_distance": nan, "skewness": nan, "excess_kurtosis": nan}, True, v.size)

    def stat3(x):
        z = (x - x.mean(axis=-1, keepdims=True)) / x.std(axis=-1, ddof=1, keepdims=True)
        zs = np.sort(z, axis=-1)
        m = zs.shape[-1]
        cdf = stats.norm.cdf(zs)
        ks = np.maximum((np.arange(1, m + 1) / m - cdf).max(axis=-1), (cdf - np.arange(m) / m).max(axis=-1))
        return ks, stats.skew(x, axis=-1), stats.kurtosis(x, axis=-1)

    ks, sk, ku = (float(t) for t in stat3(v))
    rng = np.random.default_rng(seed)
    se = {"ks_distance": math.nan, "skewness": math.nan, "excess_kurtosis": math.nan}
    if n_boot > 1:
        boot = [[], [], []]
        # chunk the resamples to bound memory
        step = max(1, 2_000_000 // v.size)
        for i in range(0, n_boot, step):
            idx = rng.integers(0, v.size, size=(min(step, n_boot - i), v.size))
            for acc, t in zip(boot, stat3(v[idx])):
                acc.extend(np.atleast_1d(t).tolist())
        se = {k: float(np.std(b, ddof=1)) for k, b in zip(se, boot)}
    return NormalityReport(ks, sk, ku, se, False, v.size)


# --------------------------------------------------------------------------
# Global law
# --------------------------------------------------------------------------

GLOBAL_GRID = np.linspace(-2.2, 2.2, 200)


def run_global_law(config: ExperimentConfig, grid=GLOBAL_GRID) -> ExperimentReport:
    """Sup-distance of the empirical CDF of ``lambda_i / sqrt(n)`` to the semicircle CDF."""
    p = config.params
    grid = np.asarray(grid, dtype=float)
    target = semicircle_cdf(grid)
    thresholds = grid * math.sqrt(p.n)

    def batch(rs):
        a, b = sample_batch(p, rs)
        t = np.broadcast_to(thresholds, (len(rs), grid.size))
        return batch_count_below(a, b, p.beta, t) / p.n

    cdf = np.concatenate(_run_batches(batch, p.n, config.replicas, config.threads))
    dist = np.abs(cdf - target).max(axis=1)
    mean, var, sk, ku = _moments(dist)
    return ExperimentReport("global-law", config.to_dict(), dist, mean, var, sk, ku, math.nan,
                            metadata={"grid": grid, "mean_cdf": cdf.mean(axis=0)},
                            columns={"sup_distance": dist})


# --------------------------------------------------------------------------
# Local law
# --------------------------------------------------------------------------

def _phase_counts(p: EnsembleParams, frame: SpectralFrame, a, b, lam_lo, lam_hi, L=None):
    X, W = conjugate_columns(a, b, p.beta)
    L = default_cut(frame) if L is None else L
    f = []
    for lam in (lam_lo, lam_hi):
        f.append(forward_phase_batch(X, W, frame, lam, L) - backward_phase_batch(X, W, frame, lam, L))
    return windings(f[0], f[1])


def run_local_law(config: ExperimentConfig) -> ExperimentReport:
    """``N(x sqrt(n), x sqrt(n) + tn / sqrt(n)] / tn`` per replica."""
    p, x = config.params, config.x
    if not -2.0 < x < 2.0:
        raise DomainError(f"x must lie in (-2, 2), got {x}")
    tn = config.resolved_tn
    for w in config.regime_warnings():
        warnings.warn(w, stacklevel=2)
    lo = x * math.sqrt(p.n)
    hi = lo + tn / math.sqrt(p.n)
    frame = SpectralFrame(x, p.n, p.beta)
    lam_hi = frame.lambda_of(hi)

    def batch(rs):
        a, b = sample_batch(p, rs)
        out = {}
        if config.engine in ("sturm", "both"):
            c = batch_count_below(a, b, p.beta, np.tile([lo, hi], (len(rs), 1)))
            out["sturm"] = c[:, 1] - c[:, 0]
        if config.engine in ("phase", "both"):
            out["phase"] = _phase_counts(p, frame, a, b, 0.0, lam_hi)
        return out

    parts = _run_batches(batch, p.n, config.replicas, config.threads)
    counts = {k: np.concatenate([d[k] for d in parts]) for k in parts[0]}
    primary = counts["sturm"] if "sturm" in counts else counts["phase"]
    stat = primary / tn
    mean, var, sk, ku = _moments(stat)
    target = semicircle_density(x)
    meta = {
        "rho_sc": target,
        "tn": tn,
        "regime_warnings": config.regime_warnings(),
        "exceed_fraction": {str(e): float(np.mean(np.abs(stat - target) > e)) for e in (0.05, 0.1, 0.2)},
    }
    cols = {"count": primary, "statistic": stat}
    if config.engine == "both":
        meta["engine_agreement"] = int(np.sum(counts["sturm"] == counts["phase"]))
        cols["count_phase"] = counts["phase"]
    return ExperimentReport("local-law", config.to_dict(), stat, mean, var, sk, ku, math.nan,
                            metadata=meta, columns=cols)


# --------------------------------------------------------------------------
# Index fluctuations
# --------------------------------------------------------------------------

def index_scale(n: int, beta: float) -> float:
    """Standardization ``(1/2 pi) sqrt(log n) sqrt(4/beta)``."""
    return math.sqrt(math.log(n)) * math.sqrt(4.0 / beta) / (2.0 * math.pi)


def predicted_index_variance(n: int, beta: float) -> float:
    return math.log(n) / (math.pi ** 2 * beta)


def index_phase_statistic(X, W, frame: SpectralFrame):
    """``(3 pi - f) / 2 pi`` and ``1 - floor(f / 2 pi)`` with ``f = phi_{n-1,0} - phi^odot_{n-1,0}`` at x = 0.

    The integer form equals the number of positive eigenvalues; the real form
    is within 1 of it.
    """
    if frame.x != 0:
        raise DomainError("the phase representation of the index is set up at x = 0 only")
    L = frame.n - 1
    f = forward_phase_batch(X, W, frame, 0.0, L) - backward_phase_batch(X, W, frame, 0.0, L)
    return (3.0 * math.pi - f) / (2.0 * math.pi), 1 - np.floor(f / (2.0 * math.pi)).astype(np.int64)


def run_index_clt(config: ExperimentConfig, n_boot: int = 200) -> ExperimentReport:
    """Number of eigenvalues above ``x sqrt(n)`` per replica (``x = 0``: the index)."""
    p, x = config.params, config.x
    if config.replicas < 100:
        raise ParameterError("index experiment needs >= 100 replicas")
    thr = x * math.sqrt(p.n)
    frame = SpectralFrame(x, p.n, p.beta) if config.engine != "sturm" else None

    def batch(rs):
        a, b = sample_batch(p, rs)
        out = {}
        if config.engine in ("sturm", "both"):
            out["sturm"] = p.n - batch_count_below(a, b, p.beta, np.full(len(rs), thr))
        if config.engine in ("phase", "both"):
            X, W = conjugate_columns(a, b, p.beta)
            out["phase_stat"], out["phase"] = index_phase_statistic(X, W, frame)
        return out

    parts = _run_batches(batch, p.n, config.replicas, config.threads)
    res = {k: np.concatenate([d[k] for d in parts]) for k in parts[0]}
    N = res["sturm"] if "sturm" in res else res["phase"]
    center = p.n / 2 if x == 0 else p.n * (1.0 - semicircle_cdf(x))
    z = (N - center) / index_scale(p.n, p.beta)
    mean, var, _, _ = _moments(N)
    norm = normality_suite(z, n_boot=n_boot, seed=p.seed)
    pred = predicted_index_variance(p.n, p.beta)
    meta = {
        "center": center,
        "scale": index_scale(p.n, p.beta),
        "predicted_variance": pred,
        "variance_ratio": var / pred,
        "mean_stderr": math.sqrt(var / N.size),
        "normality": norm.to_dict(),
    }
    cols = {"N": N, "z": z}
    if config.engine == "both":
        meta["engine_agreement"] = int(np.sum(res["sturm"] == res["phase"]))
        meta["max_abs_phase_gap"] = float(np.max(np.abs(res["sturm"] - res["phase_stat"])))
    if "phase_stat" in res:
        cols["N_phase"] = res["phase"]
        cols["phase_statistic"] = res["phase_stat"]
        ps = res["phase_stat"]
        meta["phase_statistic"] = {
            "variance": float(ps.var(ddof=1)),
            "variance_ratio": float(ps.var(ddof=1)) / pred,
            "normality": normality_suite((ps - center) / index_scale(p.n, p.beta), n_boot=n_boot, seed=p.seed).to_dict(),
        }
    return ExperimentReport("index-clt", config.to_dict(), N.astype(float), mean, var,
                            norm.skewness, norm.excess_kurtosis, norm.ks_distance,
                            metadata=meta, columns=cols)


@dataclass
class SlopeResult:
    slope: float
    stderr: float
    intercept: float
    ns: list
    variances: list
    variance_stderr: list
    residuals: list

    def to_dict(self) -> dict:
        return asdict(self)


def index_samples(n: int, beta: float, replicas: int, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Index ``N(0, inf)`` for replicas ``0..replicas-1`` by Sturm counting."""
    p = EnsembleParams(n, beta, seed)

    def batch(rs):
        a, b = sample_batch(p, rs)
        return p.n - batch_count_below(a, b, p.beta, np.zeros(len(rs)))

    return np.concatenate(_run_batches(batch, n, replicas, threads))


def variance_slope(ns, beta: float, replicas_per_n: int, seed: int = 0, threads: int = 1) -> SlopeResult:
    """Least-squares slope of ``Var N(0, inf)`` against ``log n``.

    The standard error propagates the sampling error of each variance
    through the linear fit.
    """
    ns = sorted({int(v) for v in ns})
    if len(ns) < 3 or ns[-1] < 100 * ns[0]:
        raise ParameterError("need >= 3 distinct n spanning >= 2 decades")
    var, se = [], []
    for n in ns:
        N = index_samples(n, beta, replicas_per_n, seed, threads).astype(float)
        m = N.size
        c = N - N.mean()
        s2 = c.var(ddof=1)
        mu4 = np.mean(c ** 4)
        var.append(float(s2))
        se.append(float(math.sqrt(max(mu4 - s2 * s2 * (m - 3) / (m - 1), 0.0) / m)))
    t = np.log(ns)
    tc = t - t.mean()
    w = tc / np.sum(tc * tc)
    slope = float(np.sum(w * var))
    intercept = float(np.mean(var) - slope * t.mean())
    stderr = float(math.sqrt(np.sum((w * np.array(se)) ** 2)))
    resid = (np.array(var) - (intercept + slope * t)).tolist()
    return SlopeResult(slope, stderr, intercept, ns, var, se, resid)
