"""Single-step asymptotics of the forward phase.

Given ``phi_{l,lam} = phi``, the increment ``dphi = phi_{l+1} - phi_l`` depends
only on the fresh pair ``(X_l, Y_l)``.  Its conditional moments expand as

    E[dphi]     = (b_l + osc1) / n0 + O((n0 - l)^-3/2)
    E[dphi^2]   = (a_l + osc2) / n0 + O((n0 - l)^-3/2)
    E[|dphi|^3] = O((n0 - l)^-3/2)

This module evaluates the right-hand sides and checks them by Monte Carlo.

Two readings of the drift exist for ``b_l`` and ``osc1``:

``"scaled"`` (default)
    ``osc1`` uses ``-n0 v``; the last term of ``b_l`` has ``n0 - l`` below.
``"unscaled"``
    ``osc1`` uses ``-v``; the last term of ``b_l`` has ``sqrt(n0 - l)`` below.

Sampled moments agree with ``"scaled"`` and reject ``"unscaled"`` once
``x != 0``.  The second-harmonic term of ``osc1`` enters as
``-Re(i w^2 q) / 4`` with ``w = e^{-i phi} eta_l`` (``harmonic_sign=-1``); the
opposite sign is available for comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateSampleError, DomainError, ParameterError
from .model import sample_chi
from .phase import SpectralFrame, _compose, eta_args, lift_affine, rho_parts, margin_cut

VARIANTS = ("scaled", "unscaled")
DEFAULT_VARIANT = "scaled"
HARMONIC_SIGN = -1

#: Slack constant on the ``(n0 - l)^-3/2`` remainder in the moment tolerance.
BAND_CONSTANT = 5.0
#: ``E|dphi|^3 (n0 - l)^{3/2} <= THIRD_MOMENT_C * (2/beta)^{3/2}``, fitted on a pilot at n = 1000.
THIRD_MOMENT_C = 45.0


def third_moment_constant(beta: float) -> float:
    return THIRD_MOMENT_C * (2.0 / beta) ** 1.5


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def _check_l(ls, frame: SpectralFrame):
    ls = np.asarray(ls)
    # rho_{l+1} enters the drift, so l + 1 <= n0 as well
    if np.any(ls < 0) or np.any(ls + 1 > frame.n0):
        raise DomainError(f"need 0 <= l and l + 1 <= n0 = {frame.n0}")
    return ls


@dataclass(frozen=True)
class DriftPieces:
    b: float
    a: float
    osc1: float
    osc2: float
    p: float
    q: complex
    v: complex


def _pieces(ls, lam, phi, frame: SpectralFrame, variant: str, harmonic_sign: int):
    """Arrays of (b, a, osc1, osc2, p, q, v) over ``ls``."""
    variant = _check_variant(variant)
    ls = _check_l(np.asarray(ls, dtype=np.int64), frame)
    n0, beta = frame.n0, frame.beta
    m = n0 - ls
    re0, im0 = rho_parts(frame, ls)
    re1, im1 = rho_parts(frame, ls + 1)
    r0 = re0 + 1j * im0
    r1 = re1 + 1j * im1
    Lmax = int(ls.max()) if ls.size else 0
    eta = eta_args(frame, Lmax)[ls]

    v = -lam / (2.0 * math.sqrt(n0) * np.sqrt(m)) + (r1 - r0) / im0
    q = 2.0 * n0 * (1.0 + r0 * r0) / (beta * m)
    p = 4.0 * n0 / (beta * m)
    omega = np.exp(1j * (eta - phi))

    if variant == "scaled":
        vv, third_den = n0 * v, m
    else:
        vv, third_den = v, np.sqrt(m)
    b = (math.sqrt(n0) * lam / (2.0 * np.sqrt(m))
         - n0 * (re1 - re0) / im0
         + n0 * (r0 * r0).imag / (2.0 * beta * third_den))
    a = 2.0 * n0 / (beta * m) + n0 * (3.0 + (r0 * r0).real) / (beta * m)
    osc1 = ((-vv - 0.5j * q) * omega).real + harmonic_sign * 0.25 * (1j * omega ** 2 * q).real
    osc2 = p * omega.real + (q * (omega + 0.5 * omega ** 2)).real
    return b, a, osc1, osc2, p, q, v


def drift_pieces(l: int, lam: float, phi: float, frame: SpectralFrame,
                 variant: str = DEFAULT_VARIANT, harmonic_sign: int = HARMONIC_SIGN) -> DriftPieces:
    out = _pieces(np.array([l]), lam, phi, frame, variant, harmonic_sign)
    b, a, o1, o2, p, q, v = (x[0] for x in out)
    return DriftPieces(float(b), float(a), float(o1), float(o2), float(p), complex(q), complex(v))


def drift_b(l: int, lam: float, frame: SpectralFrame, variant: str = DEFAULT_VARIANT) -> float:
    return drift_pieces(l, lam, 0.0, frame, variant).b


def diffusion_a(l: int, frame: SpectralFrame) -> float:
    return drift_pieces(l, 0.0, 0.0, frame).a


def osc_terms(l: int, lam: float, phi: float, frame: SpectralFrame,
              variant: str = DEFAULT_VARIANT, harmonic_sign: int = HARMONIC_SIGN) -> tuple[float, float]:
    d = drift_pieces(l, lam, phi, frame, variant, harmonic_sign)
    return d.osc1, d.osc2


@dataclass(frozen=True)
class StepMoments:
    l: int
    lam: float
    phi_value: float
    drift: float
    diffusion: float
    error_scale: float


def predicted_moments(l: int, lam: float, phi: float, frame: SpectralFrame,
                      variant: str = DEFAULT_VARIANT, harmonic_sign: int = HARMONIC_SIGN) -> StepMoments:
    d = drift_pieces(l, lam, phi, frame, variant, harmonic_sign)
    n0 = frame.n0
    return StepMoments(l, lam, phi, (d.b + d.osc1) / n0, (d.a + d.osc2) / n0, (n0 - l) ** -1.5)


# --------------------------------------------------------------------------
# Sampling one step
# --------------------------------------------------------------------------

def draw_step_inputs(l: int, frame: SpectralFrame, rng: np.random.Generator, size: int):
    """Fresh ``(X_l, Y_l, 1 + Y_l/s_l)`` samples for row ``l`` of the conjugated model."""
    n, beta = frame.n, frame.beta
    if not 0 <= l <= n - 2:
        raise DomainError(f"need 0 <= l <= n - 2, got {l}")
    s_l = math.sqrt(n - l - 0.5)
    s_next = math.sqrt(n - l - 1.5)
    X = rng.normal(0.0, math.sqrt(2.0), size) / math.sqrt(beta)
    b = sample_chi(np.full(size, (n - l - 1) * beta), rng)
    Y = b * b / (beta * s_next) - s_l
    return X, Y, b * b / (beta * s_l * s_next)


def step_sample(l: int, lam: float, phi: float, frame: SpectralFrame, rng: np.random.Generator | None = None,
                size: int = 1, X=None, Y=None) -> np.ndarray:
    """Increments ``dphi`` given ``phi_{l,lam} = phi``, one per fresh ``(X_l, Y_l)``.

    ``X`` and ``Y`` may be supplied instead of ``rng``.
    """
    _check_l(l, frame)
    s_l = math.sqrt(frame.n - l - 0.5)
    if X is None or Y is None:
        if rng is None:
            raise ParameterError("step_sample needs rng or explicit X, Y")
        X, _, den = draw_step_inputs(l, frame, rng, size)
    else:
        X = np.asarray(X, dtype=float)
        den = 1.0 + np.asarray(Y, dtype=float) / s_l
    re, im = rho_parts(frame, [l, l + 1])
    if im[1] <= 0:
        raise DomainError(f"T_(l+1) is degenerate at l = {l}")
    if np.any(den <= 0):
        raise DegenerateSampleError("1 + Y_l/s_l <= 0")
    a, b = im[0], (re[0] + lam / (2.0 * math.sqrt(frame.n0) * s_l)) / im[0]
    a, b = _compose(a, b, 1.0 / den, -X / s_l)
    a, b = _compose(a, b, 1.0 / im[1], -re[1])
    psi = phi - float(eta_args(frame, l)[-1])
    psi = math.remainder(psi, 2.0 * math.pi)
    return lift_affine(np.full(np.shape(a), psi), a, b) - psi


# --------------------------------------------------------------------------
# Moment check
# --------------------------------------------------------------------------

@dataclass
class MomentReport:
    """Predicted vs empirical conditional moments for one ``(l, lam, phi)`` cell."""

    l: int
    lam: float
    phi: float
    x: float
    n: int
    beta: float
    num_samples: int
    empirical: dict
    stderr: dict
    band: dict
    predicted: dict = field(default_factory=dict)
    passed_by_variant: dict = field(default_factory=dict)
    third_bound: float = 0.0
    third_pass: bool = False
    variant: str | None = None

    @property
    def passed(self) -> bool:
        return self.variant is not None and self.third_pass

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def moment_check(l: int, lam: float, phi: float, frame: SpectralFrame, num_samples: int,
                 rng: np.random.Generator, harmonic_sign: int = HARMONIC_SIGN,
                 third_c: float | None = None) -> MomentReport:
    """Compare sampled moments of ``dphi`` with both drift variants.

    A variant passes when mean and second moment both lie within
    ``3 * stderr + BAND_CONSTANT * (n0 - l)^-3/2``.  ``report.variant`` is the
    first passing variant in :data:`VARIANTS` order, or ``None``.
    """
    if num_samples < 10_000:
        raise ParameterError("moment_check needs at least 10^4 samples")
    d = step_sample(l, lam, phi, frame, rng, num_samples)
    m1, se1 = _mean_se(d)
    m2, se2 = _mean_se(d * d)
    m3, se3 = _mean_se(np.abs(d) ** 3)
    rem = (frame.n0 - l) ** -1.5
    tol1 = 3 * se1 + BAND_CONSTANT * rem
    tol2 = 3 * se2 + BAND_CONSTANT * rem
    C = third_moment_constant(frame.beta) if third_c is None else third_c
    rep = MomentReport(
        l=int(l), lam=float(lam), phi=float(phi), x=frame.x, n=frame.n, beta=frame.beta,
        num_samples=int(num_samples),
        empirical={"mean": m1, "second": m2, "third_abs": m3},
        stderr={"mean": se1, "second": se2, "third_abs": se3},
        band={"mean": tol1, "second": tol2},
        third_bound=C * rem, third_pass=bool(m3 <= C * rem),
    )
    for var in VARIANTS:
        p = predicted_moments(l, lam, phi, frame, var, harmonic_sign)
        rep.predicted[var] = {"mean": p.drift, "second": p.diffusion}
        rep.passed_by_variant[var] = bool(abs(m1 - p.drift) <= tol1 and abs(m2 - p.diffusion) <= tol2)
    rep.variant = next((v for v in VARIANTS if rep.passed_by_variant[v]), None)
    return rep


def consistent_variants(reports) -> list[str]:
    """Variants that pass in every report, in :data:`VARIANTS` order."""
    return [v for v in VARIANTS if all(r.passed_by_variant[v] for r in reports)]


# --------------------------------------------------------------------------
# Sums along the recursion
# --------------------------------------------------------------------------

def martingale_variance(n: float, beta: float) -> float:
    """Leading-order variance ``(4/beta) log n`` of the forward phase at ``l = n - 1``."""
    if n < 2:
        raise ParameterError("n must be >= 2")
    if not beta > 0:
        raise ParameterError("beta must be > 0")
    return 4.0 / beta * math.log(n)


def oscillation_partial_sums(frame: SpectralFrame, lam: float, phi: float, L: int | None = None,
                             variant: str = DEFAULT_VARIANT, harmonic_sign: int = HARMONIC_SIGN):
    """Cumulative sums ``(1/n0) sum_{k<=l} osc1_k`` and the same for ``osc2``, ``l < L``.

    ``L`` defaults to the margin cut.  Only ``phi`` at ``l = 0`` is fixed;
    the oscillation comes from ``eta_l``.
    """
    if L is None:
        L = margin_cut(frame)
    ls = np.arange(L)
    if L == 0:
        return np.zeros(0), np.zeros(0)
    _, _, o1, o2, *_ = _pieces(ls, lam, phi, frame, variant, harmonic_sign)
    return np.cumsum(o1) / frame.n0, np.cumsum(o2) / frame.n0


def drift_sum(n: int, t: float, x: float = 0.0) -> float:
    """``(1/n0) sum_{l<L} sqrt(n0) t / (2 sqrt(n0 - l))`` over the margin cut."""
    fr = SpectralFrame(x, n)
    L = margin_cut(fr)
    m = fr.n0 - np.arange(L)
    return float(np.sum(math.sqrt(fr.n0) * t / (2.0 * np.sqrt(m))) / fr.n0)


def diffusion_sum(n: int, beta: float, x: float = 0.0) -> float:
    """``(1/n0) sum_{l<L} a_l`` over the margin cut."""
    fr = SpectralFrame(x, n, beta)
    L = margin_cut(fr)
    _, a, *_ = _pieces(np.arange(L), 0.0, 0.0, fr, DEFAULT_VARIANT, HARMONIC_SIGN)
    return float(np.sum(a) / fr.n0)
