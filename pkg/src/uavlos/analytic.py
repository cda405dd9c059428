"""Closed-form LOS probability chain for UAV-to-UAV links over a built-up patch.

The chain, evaluated for an endpoint-height pair over a patch described by
ItuParams:

1.  Single-building LOS probability P1: one building with Rayleigh(gamma)
    height sits at a uniform fractional position along the link; LOS holds
    when its height stays below the link height there.
2.  Expected crossed-building count E[N | l] = 2*sqrt(alpha*beta/pi)*l + alpha
    for horizontal distance l in kilometers.
3.  Distance-conditioned LOS probability P1 ** E[N | l] (independence
    approximation), plus an additive same-street shortcut probability P0.
4.  Average over the endpoint-distance distribution, either numerically
    against a distance density or in closed form against a Gaussian
    distance model.

All heights and gamma in meters.  Distances are kilometers where they feed
the building-count model and meters where they describe patch geometry;
each signature says which.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.special import erfc

from .scene import ItuParams

__all__ = [
    "HeightPair",
    "DistanceMoments",
    "q_function",
    "p_los_single",
    "expected_buildings",
    "p_los_at_distance",
    "same_street_probability",
    "corrected_p_los",
    "distance_pdf_poly",
    "distance_pdf_mass",
    "distance_moments",
    "distance_pdf_gauss",
    "average_p_los_numeric",
    "average_p_los_closed",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Below this the chain treats P1 as zero; log(P1) would overflow the
# closed form long before accuracy matters.
_P1_FLOOR = 1e-30

# Truncated-polynomial distance density integrates to this over (0, 1);
# kept as the exact antiderivative value pi - 8/3 + 1/2.
_POLY_MASS = math.pi - 8.0 / 3.0 + 0.5


@dataclass(frozen=True)
class HeightPair:
    """Endpoint heights of a link, meters."""

    h1: float
    h2: float

    def __post_init__(self) -> None:
        if self.h1 < 0.0 or self.h2 < 0.0:
            raise ValueError("heights must be nonnegative")

    @property
    def h_min(self) -> float:
        return min(self.h1, self.h2)

    @property
    def h_max(self) -> float:
        return max(self.h1, self.h2)

    @property
    def delta_h(self) -> float:
        return abs(self.h1 - self.h2)


@dataclass(frozen=True)
class DistanceMoments:
    """Mean and standard deviation of the endpoint distance, meters."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.mu <= 0.0 or self.sigma <= 0.0:
            raise ValueError("distance moments must be positive")


def _clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def q_function(x):
    """Gaussian tail probability Q(x) = P(Z > x) for standard normal Z."""
    return 0.5 * erfc(x / math.sqrt(2.0))


def p_los_single(hp: HeightPair, gamma: float) -> float:
    """LOS probability against one Rayleigh(gamma) building at uniform position.

    Equal heights reduce to the Rayleigh CDF at the common height; unequal
    heights average the CDF along the link, which collapses to a scaled
    difference of Q values at h_min/gamma and (h_min + delta_h)/gamma.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    dh = hp.delta_h
    if dh == 0.0:
        h = hp.h1
        return _clamp01(1.0 - math.exp(-h * h / (2.0 * gamma * gamma)))
    lo = hp.h_min / gamma
    hi = (hp.h_min + dh) / gamma
    val = 1.0 - (_SQRT_2PI * gamma / dh) * (q_function(lo) - q_function(hi))
    return _clamp01(val)


def expected_buildings(l: float, alpha: float, beta: float) -> float:
    """Expected number of crossed buildings for horizontal distance l in km.

    Linear in l with slope 2*sqrt(alpha*beta/pi); the intercept alpha
    accounts for an endpoint landing on a footprint.
    """
    if l < 0.0:
        raise ValueError("distance must be nonnegative")
    return 2.0 * math.sqrt(alpha * beta / math.pi) * l + alpha


def p_los_at_distance(l: float, hp: HeightPair, params: ItuParams) -> float:
    """LOS probability at horizontal distance l (km), buildings independent."""
    p1 = p_los_single(hp, params.gamma)
    n = expected_buildings(l, params.alpha, params.beta)
    return _clamp01(p1**n)


def same_street_probability(params: ItuParams) -> float:
    """Probability that both endpoints share an unobstructed street corridor.

    2*(1 - sqrt(alpha))^2 / ((1 - alpha) * sqrt(beta * S)) plus the additive
    correction d_correction, clamped to [0, 1].  S is the patch area in km2.
    """
    root_a = math.sqrt(params.alpha)
    bs = params.beta * params.patch_area_km2
    val = 2.0 * (1.0 - root_a) ** 2 / ((1.0 - params.alpha) * math.sqrt(bs))
    return _clamp01(val + params.d_correction)


def corrected_p_los(l: float, hp: HeightPair, params: ItuParams) -> float:
    """Distance-conditioned LOS probability with the same-street shortcut mixed in."""
    p0 = same_street_probability(params)
    return _clamp01(p0 + (1.0 - p0) * p_los_at_distance(l, hp, params))


def distance_pdf_poly(k: float) -> float:
    """Truncated polynomial density of the normalized endpoint distance k = l/A.

    2*pi*k - 8*k**2 + 2*k**3 on 0 < k < 1 and zero outside; the corner tail
    beyond k = 1 is dropped, so the mass over (0, 1) is about 0.9749.
    """
    if k <= 0.0 or k >= 1.0:
        return 0.0
    return 2.0 * math.pi * k - 8.0 * k * k + 2.0 * k**3


def distance_pdf_mass() -> float:
    """Mass of distance_pdf_poly over (0, 1), exactly pi - 8/3 + 1/2."""
    return _POLY_MASS


def distance_moments(mode: str, patch_side: float) -> DistanceMoments:
    """Distance moments for a square patch of side patch_side meters.

    mode "nominal" returns the standard rounded coefficients (0.52*A, 0.06*A)
    used by the Gaussian closed form. mode "derived" integrates the
    renormalized polynomial density instead, giving a mean near 0.507*A and
    a much wider spread near 0.234*A.
    """
    if patch_side <= 0.0:
        raise ValueError("patch_side must be positive")
    if mode == "nominal":
        return DistanceMoments(mu=0.52 * patch_side, sigma=0.06 * patch_side)
    if mode == "derived":
        mass = _POLY_MASS
        m1 = integrate.quad(lambda k: k * distance_pdf_poly(k), 0.0, 1.0)[0] / mass
        m2 = integrate.quad(lambda k: k * k * distance_pdf_poly(k), 0.0, 1.0)[0] / mass
        sigma = math.sqrt(m2 - m1 * m1)
        return DistanceMoments(mu=m1 * patch_side, sigma=sigma * patch_side)
    raise ValueError(f"unknown moments mode {mode!r}")


def distance_pdf_gauss(l: float, m: DistanceMoments) -> float:
    """Gaussian distance density at l meters, zero for l <= 0."""
    if l <= 0.0:
        return 0.0
    z = (l - m.mu) / m.sigma
    return math.exp(-0.5 * z * z) / (_SQRT_2PI * m.sigma)


def _resolve_moments(
    params: ItuParams, moment_mode: str, moments: DistanceMoments | None
) -> DistanceMoments:
    if moments is not None:
        return moments
    return distance_moments(moment_mode, params.patch_side)


def average_p_los_numeric(
    hp: HeightPair,
    params: ItuParams,
    pdf_choice: str = "gauss",
    moment_mode: str = "nominal",
    moments: DistanceMoments | None = None,
) -> float:
    """Distance-averaged LOS probability by adaptive quadrature.

    pdf_choice "poly" weights corrected_p_los with the truncated polynomial
    density renormalized to unit mass over (0, patch_side); "gauss" uses the
    Gaussian model renormalized over the positive axis.  An explicit moments
    argument overrides moment_mode for the Gaussian.
    """
    a = params.patch_side
    if pdf_choice == "poly":
        mass = _POLY_MASS

        def integrand(l_m: float) -> float:
            return (
                corrected_p_los(l_m / 1000.0, hp, params)
                * distance_pdf_poly(l_m / a)
                / (mass * a)
            )

        lo, hi = 0.0, a
    elif pdf_choice == "gauss":
        m = _resolve_moments(params, moment_mode, moments)
        mass = 1.0 - q_function(m.mu / m.sigma)

        def integrand(l_m: float) -> float:
            return corrected_p_los(l_m / 1000.0, hp, params) * distance_pdf_gauss(
                l_m, m
            ) / mass

        lo = max(0.0, m.mu - 12.0 * m.sigma)
        hi = m.mu + 12.0 * m.sigma
    else:
        raise ValueError(f"unknown pdf choice {pdf_choice!r}")

    val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-10, epsrel=1e-9, limit=200)
    return _clamp01(val)


def average_p_los_closed(
    hp: HeightPair,
    params: ItuParams,
    moment_mode: str = "nominal",
    moments: DistanceMoments | None = None,
) -> float:
    """Closed-form distance-averaged LOS probability under the Gaussian model.

    Folding the Gaussian into the exponential distance dependence gives
    P0 + (1 - P0) * P1**eta with
        eta = alpha + 2*c*mu + 2*c**2*sigma**2*ln(P1),   c = sqrt(alpha*beta/pi)
    and a shifted effective mean Gamma = mu + 2*c*sigma**2*ln(P1); mu and
    sigma in kilometers here.  When Gamma < 2*sigma the truncated Gaussian
    loses too much mass for the fold to hold and the same-street floor P0 is
    returned instead.
    """
    p0 = same_street_probability(params)
    p1 = p_los_single(hp, params.gamma)
    if p1 <= _P1_FLOOR:
        return p0
    if p1 >= 1.0:
        return 1.0

    m = _resolve_moments(params, moment_mode, moments)
    mu_km = m.mu / 1000.0
    sigma_km = m.sigma / 1000.0
    c = math.sqrt(params.alpha * params.beta / math.pi)
    log_p1 = math.log(p1)

    gamma_eff = mu_km + 2.0 * c * sigma_km**2 * log_p1
    if gamma_eff < 2.0 * sigma_km:
        return p0
    eta = (
        params.alpha
        + 2.0 * c * mu_km
        + 2.0 * c * c * sigma_km**2 * log_p1
    )
    return _clamp01(p0 + (1.0 - p0) * p1**eta)
