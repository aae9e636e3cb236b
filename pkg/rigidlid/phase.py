"""
Dispersion-phase analysis for abcd systems.

The linear frequency of an abcd system is g(sqrt(mu)|xi|)/sqrt(mu) with

    g(y) = y sqrt(P(y^2)),  P(u) = (1 - a u)(1 - c u) / ((1 + b u)(1 + d u)).

``classify`` extracts the tail behaviour g'(r) - ell ~ G r^(alpha + 1), the
positive zeros of g'' with their multiplicities, and the constants derived
from them. ``kernel_decay_probe`` measures the sup-norm decay in t of
band-limited dispersive kernels.
"""

import logging
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator
from scipy import fft as sfft
from scipy import optimize, stats

from .errors import DegeneratePhaseError, FitError, ResolutionError
from .models import AbcdParams, PhasePair
from .models.base import BaseModel
from .norms import refined_max
from .spectra import bump_profile, dyadic_symbol

logger = logging.getLogger(__name__)

SUM_ZERO_TOL = 1e-12
MULTIPLICITY_TOL = 1e-8
MULTIPLICITY_CAP = 3
SCAN_RANGE = (1e-4, 1e3)
SCAN_POINTS = 100_000
TAIL_TERMS = 8
EXCLUDED_ALPHA = (-2, -1)
ROLL_OFF = 0.9


class PhaseClassification(BaseModel):
    """Constants of the dispersion phase g that drive the convergence rates."""

    abcd: AbcdParams
    sum_zero: bool
    ell: float
    alpha: int = Field(..., ge=-6, le=1)
    gpp_zeros: List[Tuple[float, int]] = Field(default_factory=list)
    m_max: int = 0
    p: int
    p0: Literal[1, 2, 3]
    sigma: float
    sigma_2d: float
    tilde_sigma: Optional[float] = None
    gp_positive: bool
    gpp_positive: bool

    @property
    def beta(self) -> int:
        """Vanishing order of g'' at the origin: 1 when a+b+c+d != 0, 3 otherwise."""
        return 3 if self.sum_zero else 1

    @property
    def alpha_excluded(self) -> bool:
        return self.alpha in EXCLUDED_ALPHA

    def max_multiplicity_in(self, lo: float, hi: float) -> int:
        return max((m for r, m in self.gpp_zeros if lo <= r <= hi), default=0)

    def summary(self) -> dict:
        return {
            "abcd": list(self.abcd.coefficients),
            "sum_zero": self.sum_zero,
            "ell": self.ell,
            "alpha": self.alpha,
            "gpp_zeros": [[r, m] for r, m in self.gpp_zeros],
            "m_max": self.m_max,
            "p": self.p,
            "p0": self.p0,
            "sigma": self.sigma,
            "sigma_2d": self.sigma_2d,
            "tilde_sigma": self.tilde_sigma,
            "gp_positive": self.gp_positive,
            "gpp_positive": self.gpp_positive,
        }


class KernelProbeResult(BaseModel):
    """Sup-norms K(t) of a dispersive kernel and the fitted decay K ~ t^(-theta)."""

    band: str
    weight_exponent: float
    bessel_power: Optional[float] = None
    mu: float
    dim: int = 1
    times: List[float]
    sup_norms: List[float]
    theta: float
    theta_low: float
    theta_high: float
    predicted: Optional[float] = None
    note: str = ""

    @model_validator(mode="after")
    def _check_series(self) -> "KernelProbeResult":
        if len(self.times) != len(self.sup_norms):
            raise ValueError("times and sup_norms differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("probe times must be strictly increasing")
        if any(not v > 0 for v in self.sup_norms):
            raise ValueError("kernel sup-norms must be positive")
        return self


# ---------------------------------------------------------------------------
# closed-form derivatives


def phase_derivatives(abcd: AbcdParams, r) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    (g, g', g'', g''') at ``r``.

    Args:
        abcd: admissible coefficients
        r: nonnegative scalar or array

    Returns:
        four arrays shaped like ``r``
    """
    abcd.require_admissible()
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("phase derivatives are evaluated at r >= 0")
    g0, g1, g2, g3, _ = PhasePair(abcd=abcd).derivatives(r)
    return g0, g1, g2, g3


# ---------------------------------------------------------------------------
# tail expansion


def _tail_series(abcd: AbcdParams, terms: int = TAIL_TERMS) -> Tuple[int, np.ndarray]:
    """
    delta and s_k with g(y) = sum_k s_k y^(1 + delta - 2k) as y -> infinity.

    In w = 1/u every factor 1 - a u with a != 0 is (-a) u (1 - w/a), every
    1 + b u with b != 0 is b u (1 + w/b); P = C u^delta Q(w) and
    sqrt(C Q(w)) is expanded as a power series.
    """
    a, b, c, d = abcd.coefficients
    tops = [k for k in (a, c) if k != 0.0]
    bottoms = [k for k in (b, d) if k != 0.0]
    delta = len(tops) - len(bottoms)
    series = np.zeros(terms)
    series[0] = float(np.prod([-k for k in tops]) / np.prod(bottoms))
    for k in tops:
        series = np.polynomial.polynomial.polymul(series, [1.0, -1.0 / k])[:terms]
    for k in bottoms:
        inverse = (-1.0 / k) ** np.arange(terms)
        series = np.polynomial.polynomial.polymul(series, inverse)[:terms]
    root = np.zeros(terms)
    root[0] = np.sqrt(series[0])
    for n in range(1, terms):
        cross = sum(root[k] * root[n - k] for k in range(1, n))
        root[n] = (series[n] - cross) / (2.0 * root[0])
    return delta, root


def tail_exponents(abcd: AbcdParams) -> Tuple[float, int, float]:
    """
    (ell, alpha, Gamma) with g'(r) - ell ~ Gamma r^(alpha + 1) at infinity.

    ell is the constant term of the expansion of g' when the leading power is
    r^0 and 0 otherwise; alpha is clipped to [-6, 1].
    """
    delta, s = _tail_series(abcd)
    exponents = [delta - 2 * k for k in range(len(s))]
    coefs = [s[k] * (1 + delta - 2 * k) for k in range(len(s))]
    scale = max(abs(c) for c in coefs)
    significant = [(e, c) for e, c in zip(exponents, coefs) if abs(c) > SUM_ZERO_TOL * scale]
    ell = 0.0
    if significant and significant[0][0] == 0:
        ell = float(significant[0][1])
        significant = significant[1:]
    if not significant:
        return ell, -6, 0.0
    lead, gamma = significant[0]
    return ell, int(min(max(lead - 1, -6), 1)), float(gamma)


# ---------------------------------------------------------------------------
# zero finding


def _scan(scan_points: int) -> np.ndarray:
    return np.geomspace(SCAN_RANGE[0], SCAN_RANGE[1], int(scan_points))


def _local_scale(g: np.ndarray, r: np.ndarray, order: int) -> np.ndarray:
    return np.abs(g) / r**order


def _brent(f, lo: float, hi: float) -> float:
    return float(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def _zeros(pair: PhasePair, n: int, r: np.ndarray, samples: Tuple[np.ndarray, ...]) -> List[float]:
    """
    Positive zeros of g^(n) on the scan ``r``.

    Simple zeros come from sign changes refined by brentq. Touching zeros
    are local minima of |g^(n)| where g^(n+1) changes sign; they are located
    by brentq on g^(n+1) and kept when |g^(n)| is below MULTIPLICITY_TOL
    times the local scale |g|/r^n.
    """

    def f(x):
        return float(pair.derivatives(x)[n])

    def df(x):
        return float(pair.derivatives(x)[n + 1])

    values, slope = samples[n], samples[n + 1]
    scale = _local_scale(samples[0], r, n)
    roots = []
    sign = np.sign(values)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        roots.append(_brent(f, r[i], r[i + 1]))
    mag = np.abs(values)
    dsign = np.sign(slope)
    for i in np.flatnonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])) + 1:
        if sign[i - 1] * sign[i + 1] < 0 or mag[i] > 1e-3 * scale[i]:
            continue
        if dsign[i - 1] * dsign[i + 1] >= 0:
            continue
        root = _brent(df, r[i - 1], r[i + 1])
        if abs(f(root)) < MULTIPLICITY_TOL * _local_scale(pair.g(root), root, n):
            roots.append(root)
    return sorted(set(roots))


def _multiplicity(pair: PhasePair, r: float) -> int:
    g0, _, _, g3, g4 = pair.derivatives(r)
    m = 1
    for order, value in ((3, g3), (4, g4)):
        if abs(value) >= MULTIPLICITY_TOL * abs(g0) / r**order:
            return m
        m += 1
    return min(m, MULTIPLICITY_CAP)


def classify(abcd: AbcdParams, scan_points: int = SCAN_POINTS) -> PhaseClassification:
    """
    Classify the dispersion phase g of an admissible abcd system.

    Args:
        abcd: coefficients with b, d >= 0 and a, c <= 0
        scan_points: density of the log-spaced scan used to bracket zeros

    Returns:
        PhaseClassification with ell, alpha, zeros of g'' and p, p0, sigma

    Raises:
        InadmissibleParametersError: sign conditions fail
        DegeneratePhaseError: g is the identity (no dispersion)
    """
    abcd.require_admissible()
    if not abcd.nondegenerate:
        raise DegeneratePhaseError(f"abcd = {abcd.coefficients} gives g(y) = y, a non-dispersive phase")
    sum_zero = abs(abcd.total) < SUM_ZERO_TOL
    ell, alpha, gamma = tail_exponents(abcd)

    pair = PhasePair(abcd=abcd)
    r = _scan(scan_points)
    samples = pair.derivatives(r)

    gpp_roots = _zeros(pair, 2, r, samples)
    gpp_zeros = [(root, _multiplicity(pair, root)) for root in gpp_roots]
    m_max = max((m for _, m in gpp_zeros), default=0)

    gp_roots = _zeros(pair, 1, r, samples)
    tail_positive = ell > 0 if ell != 0 else gamma > 0
    gp_positive = not gp_roots and bool(np.all(samples[1] > 0)) and tail_positive
    if gp_positive:
        p0 = 1
    else:
        second = [pair.derivatives(x) for x in gp_roots]
        common = any(abs(g2) < MULTIPLICITY_TOL * abs(g0) / x**2 for x, (g0, _, g2, _, _) in zip(gp_roots, second))
        p0 = 3 if common else 2

    p = max(m_max + 2, 5) if sum_zero else max(m_max + 2, 3)
    sigma = (m_max + 4) / (2 * m_max + 4)
    sigma_2d = min(sigma, 0.8) if sum_zero else sigma
    if sum_zero:
        l = m_max + 2
        tilde_sigma = min(0.4, 1.0 / l) if l <= 4 else None
    else:
        tilde_sigma = 0.5 if m_max == 0 else None

    result = PhaseClassification(
        abcd=abcd,
        sum_zero=sum_zero,
        ell=ell,
        alpha=alpha,
        gpp_zeros=gpp_zeros,
        m_max=m_max,
        p=p,
        p0=p0,
        sigma=sigma,
        sigma_2d=sigma_2d,
        tilde_sigma=tilde_sigma,
        gp_positive=gp_positive,
        gpp_positive=not gpp_zeros,
    )
    if result.alpha_excluded:
        logger.warning("abcd = %s has tail exponent alpha = %d, outside the range of the high-frequency decay estimates", abcd.coefficients, alpha)
    logger.debug("classified %s: %s", abcd.coefficients, result.summary())
    return result


# ---------------------------------------------------------------------------
# kernel decay probes


def fit_decay(times: Sequence[float], sup_norms: Sequence[float]) -> Tuple[float, float, float]:
    """theta and its 95% band from a least-squares fit of log K against log t."""
    t = np.log(np.asarray(times, dtype=float))
    k = np.log(np.asarray(sup_norms, dtype=float))
    n = len(t)
    if n < 3:
        raise FitError("decay fit needs at least 3 probe times")
    slope, intercept = np.polyfit(t, k, 1)
    resid = k - (slope * t + intercept)
    spread = np.sum((t - t.mean()) ** 2)
    stderr = np.sqrt(np.sum(resid**2) / (n - 2) / spread)
    half = float(stats.t.ppf(0.975, n - 2) * stderr)
    theta = -float(slope)
    return theta, theta - half, theta + half


def _predicted(
    cls: Optional[PhaseClassification], band: str, s: float, dim: int, j: Optional[int], bessel: bool
) -> Tuple[Optional[float], str]:
    if cls is None:
        return 0.0, "non-dispersive phase"
    low = (s + 1) / (2 + cls.beta) if dim == 1 else (5 + cls.beta) / (2 * (2 + cls.beta))
    if band == "low":
        return low, ""
    if dim == 2:
        return None, "no predicted exponent for this band in 2D"
    if cls.alpha_excluded:
        return None, f"tail exponent alpha = {cls.alpha} is excluded from the high-frequency decay estimates"
    if band == "dyadic":
        lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
        return 1.0 / (cls.max_multiplicity_in(lo, hi) + 2), ""
    high = 1.0 / (cls.m_max + 2)
    if band == "high":
        return high, ""
    low_full = (0.0 + 1) / (2 + cls.beta) if bessel else low
    return min(low_full, high), ""


def kernel_decay_probe(
    abcd: AbcdParams,
    mu: float,
    band: Literal["low", "high", "full", "dyadic"] = "low",
    weight_exponent: float = 0.0,
    times: Optional[Sequence[float]] = None,
    j: Optional[int] = None,
    bessel_power: Optional[float] = None,
    n_modes: int = 4096,
    length: float = 1024.0,
    dim: Literal[1, 2] = 1,
) -> KernelProbeResult:
    """
    Measure K(t) = sup_x |F^-1(exp(i (t/sqrt(mu)) g(sqrt(mu) xi)) band(xi) weight(xi))|.

    Args:
        abcd: admissible coefficients; (0, 0, 0, 0) probes the wave phase g(r) = r
        mu: shallowness parameter
        band: low chi(sqrt(mu)|D|), high 1 - chi, full line, or dyadic block ``j``
        weight_exponent: s in the weight |xi|^s
        times: strictly increasing positive times
        j: dyadic block index, required for ``band="dyadic"``
        bessel_power: use (1 + mu |xi|^2)^bessel_power as weight instead of |xi|^s
        n_modes: grid modes per axis
        length: box length per axis
        dim: 1 or 2; in 2D the phase is radial

    Returns:
        KernelProbeResult with the fitted theta, its 95% band and the predicted exponent

    Raises:
        ResolutionError: the kernel travels farther than half the box
    """
    abcd.require_admissible()
    times = list(np.geomspace(20.0, 160.0, 6) if times is None else times)
    if min(times) <= 0:
        raise ValueError("probe times must be positive")
    if band == "dyadic" and j is None:
        raise ValueError("dyadic band needs a block index j")

    cls = classify(abcd) if abcd.nondegenerate else None
    pair = PhasePair(abcd=abcd)
    root = float(np.sqrt(mu))

    k = sfft.fftfreq(n_modes, d=1.0 / n_modes)
    xi_axis = (2.0 * np.pi / length) * k
    xis = np.meshgrid(*([xi_axis] * dim), indexing="ij")
    radius = np.sqrt(sum(x**2 for x in xis))
    signed = xis[0] if dim == 1 else radius
    xi_nyquist = np.pi * n_modes / length

    if band == "low":
        mask = bump_profile(root * radius)
    elif band == "dyadic":
        mask = dyadic_symbol(radius, j, root)
    else:
        mask = bump_profile(radius / (ROLL_OFF * xi_nyquist))
        if band == "high":
            mask = mask * (1.0 - bump_profile(root * radius))
    if bessel_power is not None:
        weight = (1.0 + mu * radius**2) ** bessel_power
    else:
        weight = radius**weight_exponent
    amplitude = mask * weight

    active = amplitude > 0
    if not active.any():
        raise ResolutionError("the probe band contains no grid modes")
    group = np.max(np.abs(pair.derivatives(root * radius[active])[1]))
    if max(times) * group >= 0.5 * length:
        raise ResolutionError(
            f"t_max * max|g'| = {max(times) * group:.1f} reaches half the box {0.5 * length:.1f}"
        )

    phase_values = pair.g(root * np.abs(signed)) * np.sign(signed) / root
    scale = (n_modes / length) ** dim
    sup_norms = []
    for t in times:
        kernel = sfft.ifftn(np.exp(1j * t * phase_values) * amplitude) * scale
        sup_norms.append(refined_max(np.abs(kernel)))

    theta, lo, hi = fit_decay(times, sup_norms)
    predicted, note = _predicted(cls, band, weight_exponent, dim, j, bessel_power is not None)
    logger.info("kernel probe band=%s s=%s: theta=%.3f [%.3f, %.3f], predicted %s", band, weight_exponent, theta, lo, hi, predicted)
    return KernelProbeResult(
        band=band,
        weight_exponent=float(weight_exponent),
        bessel_power=bessel_power,
        mu=float(mu),
        dim=dim,
        times=[float(t) for t in times],
        sup_norms=[float(v) for v in sup_norms],
        theta=theta,
        theta_low=lo,
        theta_high=hi,
        predicted=predicted,
        note=note,
    )
