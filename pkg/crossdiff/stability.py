"""
Linear stability of the coexistence equilibrium E* of the rescaled macro3
system, with and without (cross-)diffusion.

The reaction Jacobian is taken by Richardson-refined central differences; the
closed-form entries are evaluated alongside and any disagreement is reported.
Perturbations proportional to cos(k x) grow like exp(lambda t) where lambda
solves the characteristic cubic of L0 - k^2 D.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum, unique
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from crossdiff.equilibria import Triple, equilibrium_report
from crossdiff.errors import NumericalError
from crossdiff.models import DimensionlessParams, macro3_dimless_reaction

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
ROOT_CHECK_RTOL = 1e-8
MISMATCH_RTOL = 1e-6
MISMATCH_ATOL = 1e-9
DEFAULT_SAMPLES = 1024
MIN_SAMPLES = 16
LOG_SAMPLES = 256
LOG_DEPTH = 1e-10

Invariants = Tuple[float, float, float]


@unique
class TuringClass(StrEnum):
    NO_TURING = "NoTuring"
    TURING = "Turing"
    BASE_UNSTABLE = "BaseUnstable"


@dataclass
class StabilityReport:
    a: np.ndarray
    a_printed: np.ndarray
    dmat: np.ndarray
    inv0: Invariants
    rh_stable: bool
    printed_mismatch: Optional[float]
    mismatched_entries: List[Tuple[int, int]] = field(default_factory=list)


@dataclass
class DispersionCurve:
    k2: np.ndarray
    Tk: np.ndarray
    I2k: np.ndarray
    hk: np.ndarray
    max_re_lambda: np.ndarray
    classification: TuringClass
    violations: int
    k2max: float


@dataclass(frozen=True)
class LedgerItem:
    name: str
    value: float
    passed: bool


def _reaction(p: DimensionlessParams):
    return lambda x: macro3_dimless_reaction(x, p)


def jacobian_at(p: DimensionlessParams, estar: Triple) -> np.ndarray:
    """Reaction Jacobian at estar by central differences, Richardson-refined once"""
    f = _reaction(p)
    x0 = np.asarray(estar, dtype=np.float64)
    jac = np.empty((3, 3))
    for j in range(3):
        h = FD_STEP * (1.0 + abs(x0[j]))

        def central(step: float) -> np.ndarray:
            e = np.zeros(3)
            e[j] = step
            return (f(x0 + e) - f(x0 - e)) / (2.0 * step)

        jac[:, j] = (4.0 * central(0.5 * h) - central(h)) / 3.0
    return jac


def printed_jacobian(p: DimensionlessParams, estar: Triple) -> np.ndarray:
    """Closed-form entries a_ij as commonly displayed for this system (w* = v*)"""
    u, v, _ = estar
    big = p.b + u + p.c * v
    return np.array([
        [1.0 - 2.0 * u - v * (p.b + p.c * v) / big ** 2, -u / big, p.c * u * v / big ** 2],
        [p.q * v * (p.b + p.c * v) / big ** 2,
         p.q * u / big - p.q * p.e * p.n * v / (p.n + v) ** 2 - p.q * p.d,
         # first term lacks the square that a13 carries; kept as displayed
         -p.c * p.q * u * v / big - p.e * p.q * v / (p.n + v)],
        [0.0, p.s, -p.s],
    ])


def diffusion_matrix(p: DimensionlessParams, estar: Triple) -> np.ndarray:
    u, v, _ = estar
    big = p.b + u + p.c * v
    nv = p.n + v
    return np.array([
        [p.D1, 0.0, 0.0],
        [(p.D2_2 - p.D2_1) / big ** 2 * (p.b + p.c * v) * v,
         (p.D2_1 * (p.b + p.c * v) + p.D2_2 * u) / big,
         (p.D2_1 - p.D2_2) / big ** 2 * p.c * u * v],
        [0.0, (p.D3_2 - p.D3_1) / nv ** 2 * p.n * v, (p.D3_1 * p.n + p.D3_2 * v) / nv],
    ])


def invariants3(m: np.ndarray):
    """Trace, sum of principal 2x2 minors, determinant (stacks allowed)"""
    m = np.asarray(m, dtype=np.float64)

    def e(i: int, j: int) -> np.ndarray:
        return m[..., i, j]

    trace = e(0, 0) + e(1, 1) + e(2, 2)
    minors = (e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0)
              + e(0, 0) * e(2, 2) - e(0, 2) * e(2, 0)
              + e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
    det = (e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
           - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
           + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)))
    if m.ndim == 2:
        return float(trace), float(minors), float(det)
    return trace, minors, det


def routh_hurwitz(inv: Invariants) -> bool:
    i1, i2, i3 = inv
    return bool(i1 < 0.0 and i3 < 0.0 and i1 * i2 - i3 < 0.0)


def _cubic(z, T, I2, h):
    return ((z - T) * z + I2) * z - h


def cubic_roots(T, I2, h) -> np.ndarray:
    """
    Roots of z^3 - T z^2 + I2 z - h by Cardano's formula in complex
    arithmetic, polished by Newton. Broadcasts; the roots sit on the last axis.
    """
    T, I2, h = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (T, I2, h)))
    shift = T / 3.0
    p = I2 - T * T / 3.0
    q = -2.0 * T ** 3 / 27.0 + T * I2 / 3.0 - h
    disc = np.sqrt((q * q / 4.0 + p ** 3 / 27.0).astype(np.complex128))
    plus, minus = -q / 2.0 + disc, -q / 2.0 - disc
    # larger branch avoids cancellation
    big = np.where(np.abs(plus) >= np.abs(minus), plus, minus)
    cube = big ** (1.0 / 3.0)
    omega = np.exp(2j * np.pi / 3.0)
    roots = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(3):
            ck = cube * omega ** k
            t = np.where(ck != 0.0, ck - p / (3.0 * ck), 0.0)
            roots.append(t + shift)
    z = np.stack(roots, axis=-1)

    Te, Ie, he = T[..., None], I2[..., None], h[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(3):
            slope = (3.0 * z - 2.0 * Te) * z + Ie
            step = np.where(slope != 0.0, _cubic(z, Te, Ie, he) / slope, 0.0)
            trial = z - step
            better = np.abs(_cubic(trial, Te, Ie, he)) < np.abs(_cubic(z, Te, Ie, he))
            z = np.where(better & np.isfinite(trial), trial, z)

    scale = 1.0 + np.abs(z) ** 3 + np.abs(Te) * np.abs(z) ** 2 + np.abs(Ie) * np.abs(z) + np.abs(he)
    residual = np.abs(_cubic(z, Te, Ie, he))
    if np.any(residual > ROOT_CHECK_RTOL * scale):
        logger.warning("cubic roots failed back-substitution (worst %.3g relative)",
                       float(np.max(residual / scale)))
    return z


def max_real_eigenvalue(inv: Invariants) -> float:
    """Largest real part among the roots of lambda^3 - T lambda^2 + I2 lambda - h"""
    T, I2, h = inv
    return float(np.max(cubic_roots(T, I2, h).real))


def stability_report(p: DimensionlessParams, estar: Triple) -> StabilityReport:
    a = jacobian_at(p, estar)
    a_printed = printed_jacobian(p, estar)
    inv0 = invariants3(a)
    diff = np.abs(a - a_printed)
    off = diff > MISMATCH_RTOL * np.abs(a_printed) + MISMATCH_ATOL
    entries = [(int(i), int(j)) for i, j in zip(*np.nonzero(off))]
    if entries:
        logger.info("displayed Jacobian differs from finite differences at %s", entries)
    return StabilityReport(
        a=a,
        a_printed=a_printed,
        dmat=diffusion_matrix(p, estar),
        inv0=inv0,
        rh_stable=routh_hurwitz(inv0),
        printed_mismatch=float(diff.max()),
        mismatched_entries=entries,
    )


def default_k2max(inv0: Invariants) -> float:
    return 1e4 * max(1.0, inv0[0] ** 2)


def _critical_points(k2: np.ndarray, values: np.ndarray, k2max: float) -> List[float]:
    poly = Polynomial.fit(k2, values, 3)
    found = []
    for r in poly.deriv().roots():
        if abs(r.imag) <= 1e-12 * max(1.0, abs(r.real)) and 0.0 < r.real < k2max:
            found.append(float(r.real))
    return found


def dispersion_scan(p: DimensionlessParams, estar: Triple, k2max: Optional[float] = None,
                    samples: int = DEFAULT_SAMPLES) -> DispersionCurve:
    """
    Sample the invariants of L0 - k^2 D on [0, k2max] and classify.

    Besides the uniform grid, a geometric grid reaching down to
    LOG_DEPTH * k2max and the critical points of the fitted cubics h(k^2) and
    T_k I2 - h are inserted, so narrow low-wavenumber windows are not
    stepped over.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    a = jacobian_at(p, estar)
    dmat = diffusion_matrix(p, estar)
    inv0 = invariants3(a)
    if k2max is None:
        k2max = default_k2max(inv0)
    if not k2max > 0.0:
        raise ValueError(f"k2max must be positive, got {k2max}")

    def sample(k2: np.ndarray):
        return invariants3(a[None, :, :] - k2[:, None, None] * dmat[None, :, :])

    k2 = np.linspace(0.0, k2max, samples)
    Tk, I2k, hk = sample(k2)
    extra = list(np.geomspace(LOG_DEPTH * k2max, k2max, LOG_SAMPLES)[:-1])
    extra += _critical_points(k2, hk, k2max) + _critical_points(k2, Tk * I2k - hk, k2max)
    if extra:
        k2 = np.unique(np.concatenate([k2, extra]))
        Tk, I2k, hk = sample(k2)

    max_re = np.max(cubic_roots(Tk, I2k, hk).real, axis=-1)
    violated = (Tk >= 0.0) | (hk >= 0.0) | (Tk * I2k - hk >= 0.0)
    if not routh_hurwitz(inv0):
        label = TuringClass.BASE_UNSTABLE
    elif np.any(violated):
        label = TuringClass.TURING
    else:
        label = TuringClass.NO_TURING
    return DispersionCurve(k2=k2, Tk=Tk, I2k=I2k, hk=hk, max_re_lambda=max_re,
                           classification=label, violations=int(np.count_nonzero(violated)),
                           k2max=float(k2max))


def sign_ledger(p: DimensionlessParams, estar: Triple) -> List[LedgerItem]:
    """The premises and grouped inequalities behind Turing non-occurrence"""
    if p.D2_2 > p.D2_1 or p.D3_2 > p.D3_1:
        logger.warning("handling predators diffuse faster than searching ones; ledger is informative only")
    a = jacobian_at(p, estar)
    dm = diffusion_matrix(p, estar)
    a12, a13, a21 = a[0, 1], a[0, 2], a[1, 0]
    l21, l32, l33 = dm[1, 0], dm[2, 1], dm[2, 2]
    s = p.s
    first = -l33 * l21 * a12 + l21 * l32 * a13
    second = l33 * a12 * a21 - a13 * l32 * a21
    third = -a13 * l21 * s - s * l21 * a12
    return [
        LedgerItem("l33 > |l32|", float(l33 - abs(l32)), bool(l33 > abs(l32))),
        LedgerItem("|a12| > a13", float(abs(a12) - a13), bool(abs(a12) > a13)),
        LedgerItem("-l33 l21 a12 + l21 l32 a13 < 0", float(first),
                   bool(first < 0.0 or (l21 == 0.0 and first == 0.0))),
        LedgerItem("l33 a12 a21 - a13 l32 a21 <= 0", float(second), bool(second <= 0.0)),
        LedgerItem("-a13 l21 s - s l21 a12 <= 0", float(third), bool(third <= 0.0)),
    ]


@dataclass
class TuringSample:
    params: DimensionlessParams
    estar: Triple
    curve: DispersionCurve
    ledger: List[LedgerItem]


@dataclass
class TuringSweep:
    samples: List[TuringSample]
    draws: int

    def counts(self) -> dict:
        out = {label.value: 0 for label in TuringClass}
        for s in self.samples:
            out[s.curve.classification.value] += 1
        return out


PARAM_NAMES: Sequence[str] = ("b", "n", "q", "s", "d", "e", "c", "D1", "D2_1", "D2_2", "D3_1", "D3_2")


def random_params(rng: np.random.Generator, low: float = 1e-2, high: float = 1e2) -> DimensionlessParams:
    """Log-uniform draw with handling predators diffusing slower than searching ones"""
    draw = dict(zip(PARAM_NAMES, np.exp(rng.uniform(np.log(low), np.log(high), len(PARAM_NAMES)))))
    for fast, slow in (("D2_1", "D2_2"), ("D3_1", "D3_2")):
        hi, lo = max(draw[fast], draw[slow]), min(draw[fast], draw[slow])
        draw[fast], draw[slow] = hi, lo
    return DimensionlessParams(**{k: float(v) for k, v in draw.items()})


def turing_sweep(rng: np.random.Generator, count: int = 200, max_draws: int = 100_000,
                 samples: int = DEFAULT_SAMPLES, low: float = 1e-2, high: float = 1e2) -> TuringSweep:
    """Collect `count` parameter sets with a certified, diffusion-free stable E*"""
    kept: List[TuringSample] = []
    draws = 0
    while len(kept) < count and draws < max_draws:
        draws += 1
        p = random_params(rng, low, high)
        try:
            estar = equilibrium_report(p).estar
            if estar is None:
                continue
            if not routh_hurwitz(invariants3(jacobian_at(p, estar))):
                continue
            curve = dispersion_scan(p, estar, samples=samples)
        except NumericalError as exc:
            logger.debug("draw %d skipped: %s", draws, exc)
            continue
        kept.append(TuringSample(params=p, estar=estar, curve=curve, ledger=sign_ledger(p, estar)))
    logger.info("turing sweep kept %d of %d draws", len(kept), draws)
    return TuringSweep(samples=kept, draws=draws)
