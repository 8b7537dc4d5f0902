"""Gamma-based constants and one-sided stable densities.

Everything downstream (jump samplers, partition laws, tree marginals, the
dislocation Monte Carlo) consumes either the exact gamma ratios defined here
or the numerically evaluated density of the positive stable law with Laplace
transform exp(-t * lambda**theta), 0 < theta < 1.

The density is computed from the classical single-integral (Zolotarev-type)
representation

    f(x) = (b/pi) * x**(-1-b) * int_0^pi A(phi) exp(-x**(-b) A(phi)) dphi,

with b = theta/(1-theta) and
A(phi) = sin(theta*phi)**b * sin((1-theta)*phi) / sin(phi)**(1+b),
switched to the convergent power series
f(x) = (1/pi) * sum_k (-1)**(k+1) Gamma(k*theta+1)/k! * sin(pi*k*theta) * x**(-k*theta-1)
once x is large enough for the series to converge fast (the power-law tail
regime, where the oscillatory integrand starts losing digits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import gamma as _gamma
from scipy.special import gammaln

__all__ = [
    "Alpha",
    "StableConstants",
    "QuadratureError",
    "rising_factorial",
    "positive_stable_density",
    "positive_stable_cdf",
    "positive_stable_ppf",
    "first_passage_density_q",
    "spectrally_positive_density_p",
    "chi_density",
    "stable_constants",
    "StableDensityTable",
]

# switch from quadrature to the tail series at this standardized argument
_SERIES_SWITCH = 2.0
_LOG_UNDERFLOW = 700.0


class QuadratureError(RuntimeError):
    """Adaptive integration failed to reach the requested tolerance."""


@dataclass(frozen=True)
class Alpha:
    """Stability index, restricted to the open interval (1, 2)."""

    value: float

    def __post_init__(self):
        if not (1.0 < self.value < 2.0):
            raise ValueError(f"alpha must lie strictly in (1, 2), got {self.value}")

    @property
    def theta(self) -> float:
        """Index 1/alpha of the first-passage subordinator."""
        return 1.0 / self.value

    @property
    def theta_conj(self) -> float:
        """Index 1 - 1/alpha of the width subordinator."""
        return 1.0 - 1.0 / self.value


@dataclass(frozen=True)
class StableConstants:
    """The three gamma constants attached to an index alpha.

    c_alpha scales the jump intensity of the first-passage subordinator,
    C_alpha the Levy measure of the spectrally positive process, and D_alpha
    normalizes the dislocation measure.
    """

    alpha: float
    c_alpha: float
    C_alpha: float
    D_alpha: float


def stable_constants(alpha: Alpha) -> StableConstants:
    a = alpha.value
    c = 1.0 / (a * _gamma(1.0 - 1.0 / a))
    big_c = a * (a - 1.0) / _gamma(2.0 - a)
    d = a * a * _gamma(2.0 - 1.0 / a) / _gamma(2.0 - a)
    return StableConstants(alpha=a, c_alpha=c, C_alpha=big_c, D_alpha=d)


def d_alpha_product_form(alpha: Alpha) -> float:
    """Alternate D_alpha expression alpha*(alpha-1)*Gamma(1-1/alpha)/Gamma(2-alpha)."""
    a = alpha.value
    return a * (a - 1.0) * _gamma(1.0 - 1.0 / a) / _gamma(2.0 - a)


def rising_factorial(x: float, n: int) -> float:
    """Gamma(x+n)/Gamma(x), an exact product for small n.

    Requires x > 0 and n >= 0, which keeps every gamma argument positive.
    """
    if x <= 0:
        raise ValueError("rising_factorial requires x > 0")
    if n < 0:
        raise ValueError("rising_factorial requires n >= 0")
    if n <= 20:
        out = 1.0
        for i in range(n):
            out *= x + i
        return out
    return math.exp(gammaln(x + n) - gammaln(x))


def _check_theta(theta: float) -> None:
    if not (0.0 < theta < 1.0):
        raise ValueError(f"stable index theta must lie in (0, 1), got {theta}")


def _log_kernel(theta: float, phi: np.ndarray | float):
    """log A(phi) of the integral representation, vectorized."""
    b = theta / (1.0 - theta)
    return (
        b * np.log(np.sin(theta * phi))
        + np.log(np.sin((1.0 - theta) * phi))
        - (1.0 + b) * np.log(np.sin(phi))
    )


def _kernel_min(theta: float) -> float:
    """A(0+) = theta**b * (1-theta), the minimum of the kernel on (0, pi)."""
    b = theta / (1.0 - theta)
    return theta**b * (1.0 - theta)


def _density_series(theta: float, x: float, rtol: float = 1e-15, kmax: int = 400) -> float:
    total = 0.0
    logx = math.log(x)
    small_run = 0
    for k in range(1, kmax + 1):
        lt = gammaln(k * theta + 1.0) - gammaln(k + 1.0) - (k * theta + 1.0) * logx
        term = math.sin(math.pi * k * theta) * math.exp(lt)
        if k % 2 == 0:
            term = -term
        total += term
        # sin(pi*k*theta) can vanish exactly at rational theta, so one small
        # term is not evidence of convergence; demand three in a row
        if abs(term) <= rtol * abs(total) + 1e-300:
            small_run += 1
            if small_run >= 3:
                break
        else:
            small_run = 0
    return total / math.pi


def _density_quad(theta: float, x: float, tol: float = 1e-10) -> float:
    b = theta / (1.0 - theta)
    xb = x ** (-b)
    if xb * _kernel_min(theta) > _LOG_UNDERFLOW:
        return 0.0  # left tail below double-precision underflow

    def integrand(phi):
        la = _log_kernel(theta, min(max(phi, 1e-12), math.pi - 1e-12))
        if la > _LOG_UNDERFLOW:
            return 0.0
        a = math.exp(la)
        e = la - xb * a
        return math.exp(e) if e > -_LOG_UNDERFLOW else 0.0

    val, err = quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-11, limit=400)
    if not np.isfinite(val) or (val > 0 and err > 1e-7 * val):
        raise QuadratureError(
            f"stable density quadrature did not converge (theta={theta}, x={x}, err={err})"
        )
    return (b / math.pi) * x ** (-1.0 - b) * val


def _log_left_tail(theta: float, x: float | np.ndarray):
    """Saddle-point log-density for x below the quadrature's underflow edge.

    log f(x) ~ -(1-theta) theta**b x**(-b)
               - 0.5*log(2*pi*theta*(1-theta)) - (theta-2)/(2*(1-theta)) * log(theta/x)
    """
    b = theta / (1.0 - theta)
    x = np.asarray(x, dtype=float)
    return (
        -(1.0 - theta) * theta**b * x ** (-b)
        - 0.5 * math.log(2.0 * math.pi * theta * (1.0 - theta))
        - 0.5 * (theta - 2.0) / (1.0 - theta) * np.log(theta / x)
    )


def _std_density(theta: float, x: float) -> float:
    """Density at x of the standard law with Laplace transform exp(-lambda**theta)."""
    if x <= 0.0:
        return 0.0
    if x >= _SERIES_SWITCH:
        return _density_series(theta, x)
    return _density_quad(theta, x)


def positive_stable_density(theta: float, t: float, u: float) -> float:
    """Density at u of the positive stable law with transform exp(-t*lambda**theta).

    Scales out of the standard t=1 case via f_t(u) = t**(-1/theta) f_1(u t**(-1/theta)).
    Points u <= 0 return 0 (the support is the positive half-line).
    """
    _check_theta(theta)
    if t <= 0:
        raise ValueError("time parameter t must be positive")
    if u <= 0:
        return 0.0
    scale = t ** (-1.0 / theta)
    return scale * _std_density(theta, u * scale)


def positive_stable_cdf(theta: float, x: float, t: float = 1.0) -> float:
    """P(S_t <= x) via the single-integral representation of the distribution."""
    _check_theta(theta)
    if x <= 0:
        return 0.0
    xs = x * t ** (-1.0 / theta)
    b = theta / (1.0 - theta)
    xb = xs ** (-b)
    if xb * _kernel_min(theta) > _LOG_UNDERFLOW:
        return 0.0

    def integrand(phi):
        la = _log_kernel(theta, min(max(phi, 1e-12), math.pi - 1e-12))
        e = -xb * math.exp(min(la, _LOG_UNDERFLOW))
        return math.exp(e) if e > -_LOG_UNDERFLOW else 0.0

    val, err = quad(integrand, 0.0, math.pi, epsabs=1e-13, epsrel=1e-11, limit=400)
    if not np.isfinite(val):
        raise QuadratureError(f"stable cdf quadrature failed (theta={theta}, x={x})")
    return val / math.pi


def positive_stable_ppf(theta: float, q: float, t: float = 1.0) -> float:
    """Quantile of the positive stable law, by bracketing the cdf."""
    if not (0.0 < q < 1.0):
        raise ValueError("quantile level must lie in (0, 1)")
    lo, hi = 1e-8, 1.0
    while positive_stable_cdf(theta, hi, t) < q:
        hi *= 4.0
        if hi > 1e12:
            raise QuadratureError("ppf bracket grew unreasonably large")
    while positive_stable_cdf(theta, lo, t) > q:
        lo /= 4.0
    return brentq(lambda x: positive_stable_cdf(theta, x, t) - q, lo, hi, xtol=1e-12, rtol=1e-10)


def first_passage_density_q(alpha: Alpha, x: float, s: float) -> float:
    """q_x(s), the density of the first-passage subordinator at time x.

    This is the positive stable density with index 1/alpha; by the ballot
    relation it also exposes the density of the spectrally positive process
    on the positive half-line, p_s(x) = (s/x) q_x(s).
    """
    if x <= 0:
        raise ValueError("passage level x must be positive")
    return positive_stable_density(alpha.theta, x, s)


def spectrally_positive_density_p(alpha: Alpha, s: float, x: float) -> float:
    """p_s(x) = (s/x) q_x(s) for x > 0, the ballot-relation side of q.

    This is the density of the stable path's position on the side it crosses
    at first passage (the descending side, where the path creeps).
    """
    if x <= 0:
        raise ValueError("ballot relation only exposes the density at x > 0")
    if s <= 0:
        raise ValueError("time s must be positive")
    return (s / x) * first_passage_density_q(alpha, x, s)


def chi_density(alpha: Alpha, s: float, u: float) -> float:
    """chi_s(u), the stable 1-1/alpha subordinator density at time s."""
    if s <= 0:
        raise ValueError("time parameter s must be positive")
    return positive_stable_density(alpha.theta_conj, s, u)


class StableDensityTable:
    """Spline-accelerated evaluator of the standard one-sided stable density.

    The table exists for samplers that evaluate the density at many points
    (conditional jump laws, mark laws); quadrature-grade tests should call
    :func:`positive_stable_density` directly.
    """

    def __init__(self, theta: float, n_grid: int | None = None):
        _check_theta(theta)
        self.theta = theta
        b = theta / (1.0 - theta)
        self.b = b
        amin = _kernel_min(theta)
        self.x_lo = (amin / 680.0) ** (1.0 / b)
        self.x_hi = _SERIES_SWITCH
        if n_grid is None:
            n_grid = min(3600, max(1000, int(250 * (1.0 + b))))
        grid = np.exp(np.linspace(math.log(self.x_lo), math.log(self.x_hi), n_grid))
        logf = np.array([math.log(max(_density_quad(theta, float(x)), 1e-320)) for x in grid])
        self._spline = CubicSpline(np.log(grid), logf)
        # tail series coefficients, fixed order; plenty for x >= x_hi
        ks = np.arange(1, 201, dtype=float)
        self._tail_exp = -(ks * theta + 1.0)
        self._tail_coef = (
            np.where(ks % 2 == 1, 1.0, -1.0)
            * np.exp(gammaln(ks * theta + 1.0) - gammaln(ks + 1.0))
            * np.sin(np.pi * ks * theta)
            / math.pi
        )

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        body = (x > self.x_lo) & (x < self.x_hi)
        if np.any(body):
            out[body] = np.exp(self._spline(np.log(x[body])))
        tail = x >= self.x_hi
        if np.any(tail):
            xt = x[tail]
            out[tail] = np.power.outer(xt, self._tail_exp) @ self._tail_coef
        return out

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        """log density, finite on the whole positive axis.

        Below the spline's left edge the saddle-point asymptotic takes over,
        so conditional densities that only matter up to a common factor can
        be formed without underflow.
        """
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, -np.inf)
        left = (x > 0) & (x <= self.x_lo)
        if np.any(left):
            out[left] = _log_left_tail(self.theta, x[left])
        body = (x > self.x_lo) & (x < self.x_hi)
        if np.any(body):
            out[body] = self._spline(np.log(x[body]))
        tail = x >= self.x_hi
        if np.any(tail):
            xt = x[tail]
            out[tail] = np.log(np.power.outer(xt, self._tail_exp) @ self._tail_coef)
        return out

    def pdf_scaled(self, t: float, u: np.ndarray) -> np.ndarray:
        """Density of the law with transform exp(-t*lambda**theta) at points u."""
        scale = t ** (-1.0 / self.theta)
        return scale * self.pdf(np.asarray(u, dtype=float) * scale)


@lru_cache(maxsize=16)
def density_table(theta: float) -> StableDensityTable:
    """Shared per-theta density table; immutable after construction."""
    return StableDensityTable(theta)
