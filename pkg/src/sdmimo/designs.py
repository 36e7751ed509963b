"""Closed-form noise-shaping designs, SQNR / RNSR evaluation and coefficient-norm bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .array import spatial_frequency, spatial_frequency_2d
from .sigma_delta import FilterDesign, iq_norm1, iq_norm_inf, shaping_response, shaping_response_2d

# SQNR of a perfect notch with no background noise. Compares above every finite value.
UNBOUNDED = math.inf


class InfeasibleAmplitudeError(ValueError):
    """The coefficients leave no positive input amplitude under A + ||g||_IQ-1 <= M."""


@dataclass(frozen=True)
class IqNorms:
    iq1: float
    iqinf: float

    @classmethod
    def of(cls, x) -> "IqNorms":
        return cls(iq_norm1(x), iq_norm_inf(x))


@dataclass(frozen=True)
class SqnrContext:
    rho: float
    noise_var: float
    n_effective: int

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")
        if self.n_effective < 1:
            raise ValueError("n_effective must be >= 1")

    def gamma(self, alpha_abs) -> np.ndarray:
        """gamma = 3 sigma^2 / (2 N rho |alpha|^2)."""
        a = np.asarray(alpha_abs, dtype=float)
        return 3 * self.noise_var / (2 * self.n_effective * self.rho * a**2)


def with_max_amplitude(coeffs, m_levels: int, label: str = "") -> FilterDesign:
    """Attach the largest overload-safe amplitude A = M - ||g||_IQ-1."""
    a = m_levels - iq_norm1(coeffs)
    if a <= 0:
        raise InfeasibleAmplitudeError(
            f"{label or 'design'} needs M > ||g||_IQ-1 = {iq_norm1(coeffs):.4g}; got M={m_levels}"
        )
    return FilterDesign(np.asarray(coeffs, complex), a, m_levels, label)


def first_order(m_levels: int) -> FilterDesign:
    return with_max_amplitude([-1.0], m_levels, "first-order")


def second_order(m_levels: int) -> FilterDesign:
    # A = M - 3, so at least four levels are needed
    return with_max_amplitude([-2.0, 1.0], m_levels, "second-order")


def freq_shifted(omega_c: float, m_levels: int) -> FilterDesign:
    if not (-np.pi < omega_c <= np.pi):
        raise ValueError("omega_c must lie in (-pi, pi]")
    return with_max_amplitude([-np.exp(1j * omega_c)], m_levels, "freq-shifted")


def band_stop(order_l: int, omega_c: float) -> np.ndarray:
    """g_l = C(L, l) (-e^{j omega_c})^l, giving 1 + G = (1 - e^{-j(omega - omega_c)})^L."""
    if order_l < 1:
        raise ValueError("band-stop order must be >= 1")
    ls = np.arange(1, order_l + 1)
    return comb(order_l, ls, exact=False) * (-np.exp(1j * omega_c)) ** ls


def first_order_2d(m_levels: int) -> FilterDesign:
    """Separable (1 - e^{-j w1})(1 - e^{-j w2}) shaping; A = M - 3."""
    g = np.array([[0.0, -1.0], [-1.0, 1.0]], dtype=complex)
    return with_max_amplitude(g, m_levels, "first-order-2d")


def zero_noise_coeffs(omegas) -> np.ndarray:
    """Coefficients whose shaping response has a null at every given frequency.

    Expands prod_k (1 + beta_k z), beta_k = -e^{j omega_k}, by repeated
    multiplication. A 2D ``omegas`` array is treated as a batch of rows.
    """
    w = np.asarray(omegas, dtype=float)
    batch = w.ndim == 2
    w = np.atleast_2d(w)
    if w.shape[1] < 1:
        raise ValueError("need at least one null frequency")
    beta = -np.exp(1j * w)
    c = np.zeros((w.shape[0], w.shape[1] + 1), dtype=complex)
    c[:, 0] = 1
    for k in range(w.shape[1]):
        c[:, 1 : k + 2] += beta[:, k : k + 1] * c[:, : k + 1].copy()
    return c[:, 1:] if batch else c[0, 1:]


def _resp(design: FilterDesign, omega):
    if design.kind == "1d":
        return shaping_response(design, omega)
    w1, w2 = omega
    return shaping_response_2d(design, w1, w2)


def sqnr(design: FilterDesign, ctx: SqnrContext, alpha, omega):
    """rho|a|^2 A^2 / ((2 N rho |a|^2 / 3)|1+G(omega)|^2 + sigma^2), linear scale.

    ``omega`` is a frequency for 1D designs or an (omega1, omega2) pair for 2D.
    """
    if not design.amplitude > 0:
        raise ValueError("amplitude must be positive")
    a2 = abs(alpha) ** 2
    num = ctx.rho * a2 * design.amplitude**2
    den = (2 * ctx.n_effective * ctx.rho * a2 / 3) * abs(_resp(design, omega)) ** 2 + ctx.noise_var
    if den == 0:
        return UNBOUNDED
    return num / den


def rnsr(design: FilterDesign, theta, spacing_ratio: float):
    """|1 + G(omega(theta))|^2 / A^2, linear; vectorised over theta."""
    w = spatial_frequency(theta, spacing_ratio)
    return np.abs(shaping_response(design, w)) ** 2 / design.amplitude**2


def rnsr_2d(design: FilterDesign, theta, phi, geom):
    w1, w2 = spatial_frequency_2d(theta, phi, geom)
    return np.abs(shaping_response_2d(design, w1, w2)) ** 2 / design.amplitude**2


def prop1_upper(k: int) -> float:
    """Upper bound sqrt(2)(2^K - 1) on ||g||_IQ-1 of the K-null design."""
    if k < 1:
        raise ValueError("K must be >= 1")
    return math.sqrt(2) * (2**k - 1)


def prop1_rms_bounds(k: int) -> tuple[float, float]:
    """Bounds 2^{(K-1)/2} <= sqrt(E ||g||^2) <= 2^K under uniform random nulls."""
    if k < 1:
        raise ValueError("K must be >= 1")
    return 2 ** ((k - 1) / 2), float(2**k)


def prop2_bounds(order_l: int) -> tuple[float, float]:
    """(2^L - 1, sqrt(2)(2^L - 1)) bracketing ||g||_IQ-1 of the order-L band-stop design."""
    if order_l < 1:
        raise ValueError("L must be >= 1")
    base = 2**order_l - 1
    return float(base), math.sqrt(2) * base
