"""Tridiagonal matrix model of the Hermite beta ensemble.

The n x n matrix ``H = T / sqrt(beta)`` has diagonal ``a_i ~ N(0, 2)`` and
off-diagonal ``b_i ~ chi_{(n-i-1) beta}``, all independent.  Its eigenvalues
have the Hermite beta joint law for every ``beta > 0``.

The similarity ``D^{-1} H D`` with a positive diagonal ``D`` turns ``H`` into a
matrix whose rows are independent; that form, described by the arrays
``(X, Y, s)``, drives the phase evolution in :mod:`hermite_beta.phase`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalInconsistencyError, ParameterError
from .streams import check_seed, replica_rng

_TINY = np.finfo(float).tiny


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# Gamma and chi sampling
# --------------------------------------------------------------------------

def sample_gamma(shape, rng: np.random.Generator, size=None):
    """Standard Gamma(shape, 1) variates by Marsaglia-Tsang squeeze/rejection.

    Shapes below 1 are boosted: draw ``G ~ Gamma(shape + 1)`` and return
    ``G * U**(1/shape)``, which has the Gamma(shape) law.  Works elementwise
    for array ``shape``; the random stream is consumed in a fixed order so the
    output is a deterministic function of the generator state.
    """
    alpha = np.asarray(shape, dtype=float)
    if size is not None:
        alpha = np.broadcast_to(alpha, size)
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        raise ParameterError("gamma shape must be finite and > 0")
    scalar = alpha.ndim == 0
    alpha = np.atleast_1d(alpha).ravel()

    boost = alpha < 1.0
    a = np.where(boost, alpha + 1.0, alpha)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        z = rng.standard_normal(todo.size)
        u = rng.random(todo.size)
        dd, cc = d[todo], c[todo]
        v = (1.0 + cc * z) ** 3
        pos = v > 0
        logv = np.log(np.where(pos, v, 1.0))
        accept = pos & (np.log1p(-u) < 0.5 * z * z + dd - dd * v + dd * logv)
        out[todo[accept]] = dd[accept] * v[accept]
        todo = todo[~accept]

    if boost.any():
        # log-space keeps very small shapes from rounding to exactly 0 too early
        u = 1.0 - rng.random(int(boost.sum()))
        out[boost] = np.exp(np.log(out[boost]) + np.log(u) / alpha[boost])
    np.maximum(out, _TINY, out=out)

    if scalar:
        return float(out[0])
    return out.reshape(np.shape(alpha) if size is None else size)


def sample_chi(df, rng: np.random.Generator, size=None):
    """Chi variates with (possibly non-integer) ``df > 0`` degrees of freedom."""
    df = np.asarray(df, dtype=float)
    if not np.all(np.isfinite(df)) or np.any(df <= 0):
        raise ParameterError("chi degrees of freedom must be finite and > 0")
    g = sample_gamma(df / 2.0, rng, size=size)
    return np.sqrt(2.0 * g) if np.ndim(g) else math.sqrt(2.0 * g)


# --------------------------------------------------------------------------
# Model types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleParams:
    n: int
    beta: float
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ParameterError(f"n must be an integer, got {self.n!r}")
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        beta = float(self.beta)
        if not math.isfinite(beta) or beta <= 0:
            raise ParameterError(f"beta must be a finite positive real, got {self.beta}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "seed", check_seed(self.seed))

    def rng(self, replica: int = 0) -> np.random.Generator:
        return replica_rng(self.seed, replica)

    def chi_df(self) -> np.ndarray:
        """Degrees of freedom ``(n - i - 1) beta`` of ``b_0 .. b_{n-2}``."""
        return (self.n - 1 - np.arange(self.n - 1)) * self.beta


@dataclass(frozen=True, eq=False)
class TridiagonalModel:
    """One realization of H; stores the raw samples ``a``, ``b`` and ``beta``."""

    a: np.ndarray
    b: np.ndarray
    beta: float

    def __post_init__(self):
        a, b = _frozen(self.a), _frozen(self.b)
        if a.ndim != 1 or b.ndim != 1 or a.size < 1 or b.size != a.size - 1:
            raise ParameterError("need len(a) = n >= 1 and len(b) = n - 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ParameterError("model entries must be finite")
        if np.any(b <= 0):
            raise ParameterError("off-diagonal samples must be > 0")
        beta = float(self.beta)
        if not math.isfinite(beta) or beta <= 0:
            raise ParameterError("beta must be a finite positive real")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def diagonal(self) -> np.ndarray:
        return self.a / math.sqrt(self.beta)

    @property
    def offdiagonal(self) -> np.ndarray:
        return self.b / math.sqrt(self.beta)

    def to_dense(self) -> np.ndarray:
        e = self.offdiagonal
        return np.diag(self.diagonal) + np.diag(e, 1) + np.diag(e, -1)

    def norm_inf(self) -> float:
        d, e = np.abs(self.diagonal), self.offdiagonal
        rows = d.copy()
        rows[:-1] += e
        rows[1:] += e
        return float(rows.max())

    def gershgorin(self) -> tuple[float, float]:
        d, e = self.diagonal, self.offdiagonal
        r = np.zeros_like(d)
        r[:-1] += e
        r[1:] += e
        return float((d - r).min()), float((d + r).max())

    def shifted(self, c: float) -> "TridiagonalModel":
        """Model whose spectrum is this one's translated by ``c``."""
        return TridiagonalModel(self.a + c * math.sqrt(self.beta), self.b, self.beta)

    def to_csv(self, path) -> Path:
        """Write the ``index,a,b`` dump; ``b`` is empty on the last row."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "a", "b"])
            for i in range(self.n):
                w.writerow([i, repr(float(self.a[i])), repr(float(self.b[i])) if i < self.n - 1 else ""])
        return path

    @classmethod
    def from_csv(cls, path, beta: float) -> "TridiagonalModel":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or list(rows[0]) != ["index", "a", "b"]:
            raise ParameterError(f"{path}: expected header index,a,b")
        a = [float(r["a"]) for r in rows]
        b = [float(r["b"]) for r in rows[:-1]]
        if rows[-1]["b"] not in ("", None):
            raise ParameterError(f"{path}: last row must have an empty b")
        return cls(np.array(a), np.array(b), beta)


@dataclass(frozen=True, eq=False)
class ConjugatedModel:
    """The arrays describing ``D^{-1} H D``.

    Row ``l`` of that matrix reads ``(s_l, X_l, s_l + Y_l)`` on the sub-,
    main and super-diagonal, with ``s_j = sqrt(n - j - 1/2)``.  ``w`` holds
    ``1 + Y_l / s_l = b_l^2 / (beta s_l s_{l+1})`` evaluated without the
    cancellation that forming it from ``Y`` suffers when ``b_l`` is tiny.
    """

    X: np.ndarray
    Y: np.ndarray
    s: np.ndarray
    d: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.w is None:
            object.__setattr__(self, "w", 1.0 + np.asarray(self.Y) / np.asarray(self.s)[:-1])
        for name in ("X", "Y", "s", "d", "w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.X.size

    @property
    def Y_ext(self) -> np.ndarray:
        """``Y`` padded with ``Y_{n-1} = 0``.

        The last row has no super-diagonal; any finite ``Y_{n-1} > -s_{n-1}``
        leaves the eigenvalue condition unchanged, and 0 is the neutral choice.
        """
        return np.append(self.Y, 0.0)

    @property
    def w_ext(self) -> np.ndarray:
        """``1 + Y_l / s_l`` for ``l = 0..n-1``, the last entry being 1."""
        return np.append(self.w, 1.0)

    def to_dense(self) -> np.ndarray:
        n = self.n
        m = np.diag(self.X)
        if n > 1:
            m += np.diag(self.s[:-1] + self.Y, 1)
            m += np.diag(self.s[1:], -1)
        return m


def s_values(n: int) -> np.ndarray:
    return np.sqrt(n - np.arange(n) - 0.5)


def sample_ensemble(params: EnsembleParams, rng: np.random.Generator | None = None) -> TridiagonalModel:
    """Draw one H; with ``rng=None`` uses the replica-0 stream of ``params.seed``."""
    if rng is None:
        rng = params.rng(0)
    a = rng.normal(0.0, math.sqrt(2.0), params.n)
    b = sample_chi(params.chi_df(), rng)
    return TridiagonalModel(a, b, params.beta)


def sample_batch(params: EnsembleParams, replicas) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(a, b)`` arrays of shape ``(R, n)``, ``(R, n-1)`` for the given replica indices.

    Row ``k`` equals ``sample_ensemble(params, params.rng(replicas[k]))``.
    """
    replicas = list(replicas)
    a = np.empty((len(replicas), params.n))
    b = np.empty((len(replicas), params.n - 1))
    df = params.chi_df()
    for k, r in enumerate(replicas):
        rng = params.rng(r)
        a[k] = rng.normal(0.0, math.sqrt(2.0), params.n)
        b[k] = sample_chi(df, rng)
    return a, b


def conjugate(model: TridiagonalModel) -> ConjugatedModel:
    n, beta = model.n, model.beta
    s = s_values(n)
    X = model.a / math.sqrt(beta)
    Y = model.b ** 2 / (beta * s[1:]) - s[:-1]
    # d_k = d_{k-1} b_{k-1} / (sqrt(beta) s_k), accumulated in log space
    logd = np.concatenate(([0.0], np.cumsum(np.log(model.b) - 0.5 * math.log(beta) - np.log(s[1:]))))
    w = model.b ** 2 / (beta * s[:-1] * s[1:])
    return ConjugatedModel(X=X, Y=Y, s=s, d=np.exp(logd), w=w)


# --------------------------------------------------------------------------
# Small-n oracle
# --------------------------------------------------------------------------

def _charpoly_sign(d: np.ndarray, e2: np.ndarray, t: float) -> float:
    """Sign of det(H - t I) from the three-term recurrence, rescaled against overflow."""
    p_prev, p = 1.0, d[0] - t
    for k in range(1, d.size):
        p_prev, p = p, (d[k] - t) * p - e2[k - 1] * p_prev
        big = max(abs(p), abs(p_prev))
        if big > 1e150 or (0 < big < 1e-150):
            p, p_prev = p / big, p_prev / big
    return math.copysign(1.0, p) if p != 0 else 0.0


def dense_eigenvalues(model: TridiagonalModel, tol: float = 1e-12) -> np.ndarray:
    """All eigenvalues of H, ascending, to absolute accuracy ``tol``.

    Bisection on the Sturm count brackets each eigenvalue.  Each bracket is
    then cross-checked: the characteristic polynomial, evaluated by its own
    three-term recurrence just outside the bracket, must change sign an odd
    number of times exactly when the Sturm count there is odd.
    Meant as an oracle for n up to a few thousand.

    Raises
    ------
    NumericalInconsistencyError
        If the Sturm count and the polynomial sign disagree.
    """
    from .sturm import bisect_all, count_below_many

    if not tol > 0:
        raise ParameterError("tol must be > 0")
    lo, hi, _, _ = bisect_all(model, tol)
    d = model.diagonal
    e2 = model.offdiagonal ** 2
    # probe outside the rounding fog of the recurrence, then compare the
    # parity of the sign change with the Sturm count between the probes
    margin = 8.0 * model.n * np.finfo(float).eps * max(model.norm_inf(), 1.0)
    p_lo = lo - np.maximum(hi - lo, margin)
    p_hi = hi + np.maximum(hi - lo, margin)
    inside = count_below_many(model, p_hi) - count_below_many(model, p_lo)
    for k in range(model.n):
        s_lo = _charpoly_sign(d, e2, p_lo[k])
        s_hi = _charpoly_sign(d, e2, p_hi[k])
        if s_lo == 0 or s_hi == 0:
            continue  # probe is itself a root to machine precision
        changed = s_lo != s_hi
        if inside[k] < 1 or changed != (inside[k] % 2 == 1):
            raise NumericalInconsistencyError(
                f"eigenvalue {k}: Sturm count finds {inside[k]} eigenvalue(s) in "
                f"[{p_lo[k]!r}, {p_hi[k]!r}] but the characteristic polynomial sign "
                f"{'changes' if changed else 'does not change'}"
            )
    return 0.5 * (lo + hi)
