"""Phase evolution: a winding-number engine for eigenvalue counting.

The eigenvalue equation of the conjugated matrix is a first-order recursion
for the ratios ``r_l`` (see :func:`ratio_chain`).  Sent to the unit circle by
the Cayley map, each step becomes a composition of rotations and affine maps
of the upper half plane, acting on boundary points.  Lifting those actions to
the real line gives angles ``phi`` whose windings count eigenvalues.

Conventions
-----------
* ``A(a, b)`` is the affine map ``z -> a (z + b)``.  Maps act on the right:
  ``phi * A1 * A2`` applies ``A1`` first, and ``A1.then(A2)`` is that word.
* The lift of an affine map fixes ``pi`` and keeps every angle inside its
  sheet ``(2 pi k - pi, 2 pi k + pi)``; rotations lift to exact shifts.
* In the frame centred at ``x sqrt(n)`` the target is
  ``Lambda(lam) = x sqrt(n) + lam / (2 sqrt(n0))`` with
  ``n0 = n (1 - x^2/4) - 1/2``.  Interval counts are half-open ``(lo, hi]``.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateSampleError, DomainError, ParameterError
from .model import ConjugatedModel
from .sturm import CountResult

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


# --------------------------------------------------------------------------
# Affine maps of the upper half plane
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """``z -> a (z + b)`` with ``a > 0``; fixes the boundary point at infinity."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ParameterError(f"affine map needs finite a > 0 and finite b, got ({self.a}, {self.b})")

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1.0, 0.0)

    def __call__(self, z):
        if z is None or (isinstance(z, float) and math.isinf(z)):
            return z
        return self.a * (z + self.b)

    def then(self, other: "AffineMap") -> "AffineMap":
        """The map applying ``self`` first and ``other`` second."""
        return AffineMap(self.a * other.a, self.b + other.b / self.a)

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.a, -self.a * self.b)


def cayley(z):
    """``U(z) = (i - z)/(i + z)``; ``None`` or ``inf`` stands for the point at infinity."""
    if z is None or (isinstance(z, (float, int)) and math.isinf(z)):
        return complex(-1.0, 0.0)
    z = complex(z)
    if z.imag < 0:
        raise DomainError(f"cayley map is defined on the closed upper half plane, got {z}")
    return (1j - z) / (1j + z)


def inverse_cayley(w):
    """Inverse of :func:`cayley`; returns ``math.inf`` for ``w = -1``."""
    w = complex(w)
    if w == -1:
        return math.inf
    return 1j * (1 - w) / (1 + w)


def _arg0(w: complex) -> float:
    t = cmath.phase(w)
    return t + TWO_PI if t < 0 else t


def _boundary_image(T: AffineMap, u: complex) -> complex:
    # -1 <-> infinity is fixed by every affine map; no division there
    if abs(u + 1) <= 4 * np.finfo(float).eps:
        return complex(-1.0, 0.0)
    z = inverse_cayley(u)
    return cayley(complex(T(z.real), 0.0))


def ash(T: AffineMap, v: complex, w: complex) -> float:
    """Angular shift of the boundary point ``w`` relative to ``v`` under ``T``.

    ``Arg(U(T(U^-1 w)) / U(T(U^-1 v))) - Arg(w / v)`` with both arguments in
    ``[0, 2 pi)``; the result lies in ``(-2 pi, 2 pi)``.
    """
    v, w = complex(v), complex(w)
    if v == w:
        return 0.0
    new = _boundary_image(T, w) / _boundary_image(T, v)
    return _arg0(new) - _arg0(w / v)


def lift_affine(phi, a, b=None):
    """Lifted action ``phi * A(a, b)``; vectorized over ``phi``, ``a``, ``b``.

    Accepts an :class:`AffineMap` as the second argument.  With
    ``phi = 2 pi k + 2 h``, ``|h| <= pi/2``, the boundary point is
    ``tan(h)`` and the result is ``2 pi k + 2 atan(a (tan h + b))``.
    """
    if isinstance(a, AffineMap):
        a, b = a.a, a.b
    if np.ndim(phi) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0:
        phi = float(phi)
        k = round(phi / TWO_PI)
        h = 0.5 * (phi - TWO_PI * k)
        if abs(h) == HALF_PI:
            return phi
        c = math.cos(h)
        return TWO_PI * k + 2.0 * math.atan2(a * (math.sin(h) + b * c), c)
    phi = np.asarray(phi, dtype=float)
    k = np.round(phi / TWO_PI)
    h = 0.5 * (phi - TWO_PI * k)
    c = np.cos(h)
    out = TWO_PI * k + 2.0 * np.arctan2(a * (np.sin(h) + b * c), c)
    return np.where(np.abs(h) == HALF_PI, phi, out)


def lift_rotation(phi, alpha):
    return phi + alpha


def _compose(a1, b1, a2, b2):
    return a1 * a2, b1 + b2 / a1


# --------------------------------------------------------------------------
# Frame quantities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralFrame:
    """Bulk location ``x`` for an ``n x n`` model at inverse temperature ``beta``."""

    x: float
    n: int
    beta: float = 2.0

    def __post_init__(self):
        x = float(self.x)
        if not -2.0 < x < 2.0:
            raise DomainError(f"x must lie in (-2, 2), got {self.x}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ParameterError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", float(self.beta))
        if self.n0 <= 0:
            raise DomainError(f"n0 = {self.n0} <= 0 for n = {self.n}, x = {x}")

    @property
    def n0(self) -> float:
        return self.n * (1.0 - self.x ** 2 / 4.0) - 0.5

    def Lambda(self, lam):
        """Spectral point ``x sqrt(n) + lam / (2 sqrt(n0))``."""
        out = self.x * math.sqrt(self.n) + np.asarray(lam, dtype=float) / (2.0 * math.sqrt(self.n0))
        return float(out) if out.ndim == 0 else out

    def lambda_of(self, Lam):
        """Inverse of :meth:`Lambda`."""
        out = (np.asarray(Lam, dtype=float) - self.x * math.sqrt(self.n)) * 2.0 * math.sqrt(self.n0)
        return float(out) if out.ndim == 0 else out

    def s(self, l):
        return np.sqrt(self.n - np.asarray(l, dtype=float) - 0.5)


def default_cut(frame: SpectralFrame) -> int:
    """Largest integer ``L < n0``; the map ``T_L`` degenerates at ``L = n0``."""
    return max(math.ceil(frame.n0) - 1, 0)


def margin_cut(frame: SpectralFrame) -> int:
    """Cut index ``floor(n (1 - x^2/4) - max((x^2 n)^(1/3), 1) / 2)``, capped below ``n0``."""
    n, x = frame.n, frame.x
    L = math.floor(n * (1 - x * x / 4) - max((x * x * n) ** (1 / 3), 1.0) / 2)
    return min(max(L, 0), default_cut(frame))


def _check_cut(frame: SpectralFrame, L: int) -> int:
    if isinstance(L, bool) or int(L) != L:
        raise ParameterError(f"cut index must be an integer, got {L!r}")
    L = int(L)
    if not 0 <= L < frame.n0:
        raise DomainError(f"cut index must satisfy 0 <= L < n0 = {frame.n0}, got {L}")
    if L > frame.n - 1:
        raise DomainError(f"cut index {L} exceeds n - 1")
    return L


def rho_parts(frame: SpectralFrame, ls) -> tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of ``rho_l`` for an array of ``l``.

    The real part carries the sign of ``x``; ``|rho_l| = 1``.
    """
    ls = np.asarray(ls, dtype=float)
    if np.any(ls > frame.n0) or np.any(ls < 0):
        raise DomainError(f"rho_l needs 0 <= l <= n0 = {frame.n0}")
    s = frame.s(ls)
    re = frame.x * math.sqrt(frame.n) / (2.0 * s)
    im = np.sqrt(np.maximum(frame.n0 - ls, 0.0)) / s
    return re, im


def rho(l: int, frame: SpectralFrame) -> complex:
    re, im = rho_parts(frame, l)
    return complex(float(re), float(im))


def eta_args(frame: SpectralFrame, L: int) -> np.ndarray:
    """``[eta_arg(0), ..., eta_arg(L)]``, the lifted arguments ``2 sum_{k<=l} Arg rho_k``."""
    re, im = rho_parts(frame, np.arange(L + 1))
    terms = 2.0 * np.arctan2(im, re)
    # compensated prefix sums: the angles grow like l pi and plain cumsum
    # loses ~sqrt(l) ulps
    out = np.empty_like(terms)
    total = comp = 0.0
    for i, t in enumerate(terms.tolist()):
        y = total + t
        comp += (total - y) + t if abs(total) >= abs(t) else (t - y) + total
        total = y
        out[i] = total + comp
    return out


def eta_arg(l: int, frame: SpectralFrame) -> float:
    """Lifted argument of ``rho_0^2 ... rho_l^2``; ``0`` for ``l = -1``."""
    if l < 0:
        return 0.0
    return float(eta_args(frame, l)[-1])


def T_map(l: int, frame: SpectralFrame) -> AffineMap:
    r = rho(l, frame)
    if r.imag <= 0:
        raise DomainError(f"T_l is degenerate at l = {l} (n0 = {frame.n0})")
    return AffineMap(1.0 / r.imag, -r.real)


def W_map(l: int, cm: ConjugatedModel) -> AffineMap:
    s = cm.s[l]
    den = cm.w_ext[l]
    if not den > 0:
        raise DegenerateSampleError(f"1 + Y_l/s_l = {den} <= 0 at l = {l}")
    return AffineMap(1.0 / den, -cm.X[l] / s)


def build_S(l: int, lam: float, cm: ConjugatedModel, frame: SpectralFrame) -> AffineMap:
    """``T_l^-1 L_{l,lam} W_l T_{l+1}`` as a single affine map."""
    if not 0 <= l < frame.n0:
        raise DomainError(f"build_S needs 0 <= l < n0 = {frame.n0}, got {l}")
    shift = AffineMap(1.0, lam / (2.0 * math.sqrt(frame.n0) * cm.s[l]))
    return T_map(l, frame).inverse().then(shift).then(W_map(l, cm)).then(T_map(l + 1, frame))


# --------------------------------------------------------------------------
# Forward and backward phases
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseTrajectory:
    """Forward angles ``phi_0..phi_L`` and, when computed, the backward angle at ``L``.

    ``phi_odot_hat`` holds the un-conjugated backward angles for ``l = L..n``.
    """

    frame: SpectralFrame
    lam: float
    L: int
    phi: np.ndarray
    phi_odot: float | None = None
    phi_odot_hat: np.ndarray | None = field(default=None)

    @property
    def delta_phi(self) -> np.ndarray:
        return np.diff(self.phi)

    def to_csv(self, path) -> Path:
        """Write ``l,phi,delta_phi,eta_arg``; ``delta_phi`` is ``phi_{l+1} - phi_l`` (empty at ``L``)."""
        path = Path(path)
        eta = eta_args(self.frame, self.L)
        d = self.delta_phi
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["l", "phi", "delta_phi", "eta_arg"])
            for l in range(self.L + 1):
                w.writerow([l, repr(float(self.phi[l])), repr(float(d[l])) if l < self.L else "", repr(float(eta[l]))])
        return path


def _step_maps(cm: ConjugatedModel, frame: SpectralFrame, lam, L: int):
    """Coefficients ``(a_l, b_l)`` of ``S_{l,lam}`` for ``l < L``, vectorized over ``l``."""
    re, im = rho_parts(frame, np.arange(L + 1))
    if np.any(im <= 0):
        raise DomainError(f"T_l is degenerate for some l <= {L} (n0 = {frame.n0})")
    s = cm.s[:L]
    den = cm.w_ext[:L]
    if np.any(den <= 0):
        raise DegenerateSampleError("1 + Y_l/s_l <= 0")
    wa, wb = 1.0 / den, -cm.X[:L] / s
    c = lam / (2.0 * math.sqrt(frame.n0) * s)
    # T_l^{-1} = A(Im rho_l, Re rho_l / Im rho_l)
    a, b = im[:L], re[:L] / im[:L]
    a, b = _compose(a, b, 1.0, c)
    a, b = _compose(a, b, wa, wb)
    a, b = _compose(a, b, 1.0 / im[1:], -re[1:])
    return a, b


def forward_phase(cm: ConjugatedModel, frame: SpectralFrame, lam: float, L: int | None = None) -> PhaseTrajectory:
    """Forward angles from ``phi_0 = pi``:
    ``phi_{l+1} = phi_l + ash(S_{l,lam}, -1, e^{i phi_l} conj(eta_l))``.
    """
    L = default_cut(frame) if L is None else _check_cut(frame, L)
    lam = float(lam)
    if not math.isfinite(lam):
        raise ParameterError("lambda must be finite")
    phi = np.empty(L + 1)
    phi[0] = math.pi
    if L:
        sa, sb = _step_maps(cm, frame, lam, L)
        eta = eta_args(frame, L - 1)
        p = math.pi
        for l in range(L):
            psi = p - eta[l]
            p = p + (lift_affine(psi, float(sa[l]), float(sb[l])) - psi)
            phi[l + 1] = p
    return PhaseTrajectory(frame, lam, L, phi)


def backward_hat(cm: ConjugatedModel, frame: SpectralFrame, lam: float, L: int, path: bool = False):
    """Un-conjugated backward angle at ``L``, from ``0`` at ``l = n``.

    Each step applies ``W_l^-1``, then ``A(1, -Lambda/s_l)``, then the
    rotation by ``-pi``.  With ``path=True`` returns the angles for ``l = L..n``.
    """
    n = cm.n
    Lam = frame.Lambda(lam)
    s = cm.s
    den = cm.w_ext
    if np.any(den[L:] <= 0):
        raise DegenerateSampleError("1 + Y_l/s_l <= 0")
    out = np.empty(n - L + 1) if path else None
    p = 0.0
    if path:
        out[-1] = 0.0
    for l in range(n - 1, L - 1, -1):
        d = den[l]
        # W_l^{-1} = A(1 + Y_l/s_l, X_l / (s_l (1 + Y_l/s_l)))
        p = lift_affine(p, d, cm.X[l] / (s[l] * d))
        p = lift_affine(p, 1.0, -Lam / s[l])
        p -= math.pi
        if path:
            out[l - L] = p
    return out if path else p


def hat_to_phase(phi_hat, L: int, frame: SpectralFrame):
    """Lift by ``T_L`` then rotate by ``eta_arg(L-1)``."""
    T = T_map(L, frame)
    return lift_affine(phi_hat, T.a, T.b) + eta_arg(L - 1, frame)


def unhat(phi, L: int, frame: SpectralFrame):
    """Inverse of :func:`hat_to_phase`."""
    L = _check_cut(frame, L)
    T = T_map(L, frame).inverse()
    return lift_affine(phi - eta_arg(L - 1, frame), T.a, T.b)


def backward_phase(cm: ConjugatedModel, frame: SpectralFrame, lam: float, L: int | None = None) -> float:
    L = default_cut(frame) if L is None else _check_cut(frame, L)
    return float(hat_to_phase(backward_hat(cm, frame, float(lam), L), L, frame))


def phase_difference(cm: ConjugatedModel, frame: SpectralFrame, lam: float, L: int | None = None) -> float:
    """``phi_{L,lam} - phi^odot_{L,lam}``; crosses ``2 pi Z`` exactly at eigenvalues."""
    L = default_cut(frame) if L is None else _check_cut(frame, L)
    return float(forward_phase(cm, frame, lam, L).phi[-1]) - backward_phase(cm, frame, lam, L)


def phase_trajectory(cm: ConjugatedModel, frame: SpectralFrame, lam: float, L: int | None = None) -> PhaseTrajectory:
    tr = forward_phase(cm, frame, lam, L)
    hat = backward_hat(cm, frame, tr.lam, tr.L, path=True)
    return PhaseTrajectory(frame, tr.lam, tr.L, tr.phi, float(hat_to_phase(hat[0], tr.L, frame)), hat)


def windings(f_lo, f_hi):
    """Number of points of ``2 pi Z`` in ``(f_lo, f_hi]``."""
    return np.floor(np.asarray(f_hi) / TWO_PI).astype(np.int64) - np.floor(np.asarray(f_lo) / TWO_PI).astype(np.int64)


def count_interval_phase(cm: ConjugatedModel, frame: SpectralFrame, lam: float, lam_prime: float,
                         L: int | None = None) -> CountResult:
    """Eigenvalues in ``(Lambda(lam), Lambda(lam_prime)]`` by winding count."""
    if not lam < lam_prime:
        raise ParameterError(f"need lam < lam_prime, got ({lam}, {lam_prime})")
    f1 = phase_difference(cm, frame, lam, L)
    f2 = phase_difference(cm, frame, lam_prime, L)
    return CountResult(float(frame.Lambda(lam)), float(frame.Lambda(lam_prime)), int(windings(f1, f2)))


def phase_at_infinity(L: int, n: int, x: float = 0.0) -> tuple[float, float]:
    """Limits of ``(phi_L, phi^odot_L)`` as ``lam -> +inf`` at ``x = 0``."""
    if x != 0:
        raise DomainError("closed forms at infinity are only available for x = 0")
    if not 0 <= L <= n - 0.5:
        raise DomainError(f"need 0 <= L <= n - 1/2, got L = {L}, n = {n}")
    return (L + 1) * math.pi, -2 * n * math.pi + 3 * L * math.pi


# --------------------------------------------------------------------------
# Ratio chain
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RatioChain:
    """Ratios ``r_0 .. r_n`` in projective form; ``values`` is NaN where ``is_inf``."""

    values: np.ndarray
    is_inf: np.ndarray

    def __len__(self):
        return self.values.size

    def cayley(self) -> np.ndarray:
        out = np.full(self.values.size, -1.0 + 0j)
        fin = ~self.is_inf
        z = self.values[fin]
        out[fin] = (1j - z) / (1j + z)
        return out


def ratio_chain(cm: ConjugatedModel, Lam: float) -> RatioChain:
    """``r_0 = inf``, ``r_{l+1} = (-1/r_l + (Lam - X_l)/s_l) / (1 + Y_l/s_l)``."""
    n = cm.n
    vals = np.full(n + 1, np.nan)
    inf = np.zeros(n + 1, dtype=bool)
    inf[0] = True
    w = cm.w_ext
    r, r_inf = 0.0, True
    for l in range(n):
        if r_inf:
            t = 0.0
        elif r == 0.0:
            vals[l + 1], inf[l + 1] = np.nan, True
            r_inf = True
            continue
        else:
            t = -1.0 / r
        r = (t + (Lam - cm.X[l]) / cm.s[l]) / w[l]
        r_inf = False
        vals[l + 1] = r
    return RatioChain(vals, inf)


# --------------------------------------------------------------------------
# Batched recursions over replicas
# --------------------------------------------------------------------------

def forward_phase_batch(X: np.ndarray, W: np.ndarray, frame: SpectralFrame, lam, L: int | None = None) -> np.ndarray:
    """``phi_{L,lam}`` for every replica.

    ``X`` and ``W`` are ``(n, R)`` arrays from :func:`conjugate_columns`;
    ``lam`` is a scalar or an ``(R,)`` array.
    """
    L = default_cut(frame) if L is None else _check_cut(frame, L)
    R = X.shape[1]
    phi = np.full(R, math.pi)
    if L == 0:
        return phi
    re, im = rho_parts(frame, np.arange(L + 1))
    eta = eta_args(frame, L - 1)
    s = frame.s(np.arange(frame.n))
    lam = np.asarray(lam, dtype=float)
    c_scale = 1.0 / (2.0 * math.sqrt(frame.n0))
    for l in range(L):
        den = W[l]
        if np.any(den <= 0):
            raise DegenerateSampleError(f"1 + Y_l/s_l <= 0 at l = {l}")
        a, b = im[l], re[l] / im[l] + lam * c_scale / (s[l] * im[l])
        a, b = _compose(a, b, 1.0 / den, -X[l] / s[l])
        a, b = _compose(a, b, 1.0 / im[l + 1], -re[l + 1])
        psi = phi - eta[l]
        phi = phi + (lift_affine(psi, a, b) - psi)
    return phi


def backward_phase_batch(X: np.ndarray, W: np.ndarray, frame: SpectralFrame, lam, L: int | None = None) -> np.ndarray:
    """``phi^odot_{L,lam}`` for every replica; array layout as in :func:`forward_phase_batch`."""
    L = default_cut(frame) if L is None else _check_cut(frame, L)
    n, R = X.shape
    s = frame.s(np.arange(n))
    Lam = frame.Lambda(np.asarray(lam, dtype=float))
    p = np.zeros(R)
    for l in range(n - 1, L - 1, -1):
        d = W[l]
        if np.any(d <= 0):
            raise DegenerateSampleError(f"1 + Y_l/s_l <= 0 at l = {l}")
        p = lift_affine(p, d, X[l] / (s[l] * d))
        p = lift_affine(p, 1.0, -Lam / s[l])
        p = p - math.pi
    return hat_to_phase(p, L, frame)


def conjugate_columns(a: np.ndarray, b: np.ndarray, beta: float):
    """``(X, W)`` as ``(n, R)`` arrays from raw ``(R, n)``, ``(R, n-1)`` samples.

    ``W[l] = 1 + Y_l / s_l``, with a last row of ones.
    """
    R, n = a.shape
    s = np.sqrt(n - np.arange(n) - 0.5)
    X = np.ascontiguousarray(a.T) / math.sqrt(beta)
    W = np.ones((n, R))
    W[:-1] = np.ascontiguousarray(b.T) ** 2 / (beta * (s[:-1] * s[1:])[:, None])
    return X, W
