"""Samplers for the stable 1/alpha subordinator.

Three layers: exact marginal draws (Kanter's ratio construction), the
epsilon-truncated Poisson field of jumps on a time window, and the sequential
size-biased scheme that produces the jumps conditioned on the subordinator's
endpoint value.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .special import Alpha, _log_kernel, density_table, stable_constants
from .streams import RngStream

__all__ = [
    "JumpSequence",
    "sample_positive_stable",
    "sample_jump_field",
    "sample_conditioned_jumps",
    "size_biased_permutation",
]


@dataclass
class JumpSequence:
    """Ranked positive jumps plus a record of what was truncated away.

    ``sum(jumps) + residual == total`` holds to 1e-12 on construction;
    the residual is the (expected) mass below the truncation threshold or the
    unresolved remainder of a conditioned run.
    """

    jumps: np.ndarray
    truncation_epsilon: float
    residual: float
    total: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.jumps = np.asarray(self.jumps, dtype=float)
        if self.jumps.size and np.any(np.diff(self.jumps) > 0):
            raise ValueError("jumps must be ranked nonincreasing")
        if self.jumps.size and self.jumps[-1] <= 0:
            raise ValueError("jumps must be positive")
        if self.residual < 0:
            raise ValueError("residual must be nonnegative")
        gap = abs(float(self.jumps.sum()) + self.residual - self.total)
        if gap > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError(f"sum(jumps) + residual != total (gap {gap:.3e})")

    def ranked_fractions(self) -> np.ndarray:
        """Jumps divided by the total, a ranked mass sequence."""
        return self.jumps / self.total

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in ("alpha", "x", "s", "epsilon", "seed", "stream_id"):
            if key in self.meta:
                buf.write(f"# {key}={self.meta[key]}\n")
        buf.write(f"# residual={self.residual!r}\n")
        buf.write(f"# total={self.total!r}\n")
        buf.write("rank,magnitude\n")
        for i, j in enumerate(self.jumps, start=1):
            buf.write(f"{i},{j!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "JumpSequence":
        meta, jumps, residual, total = {}, [], 0.0, None
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key == "residual":
                    residual = float(val)
                elif key == "total":
                    total = float(val)
                else:
                    meta[key] = val
            elif line and not line.startswith("rank"):
                jumps.append(float(line.split(",")[1]))
        if total is None:
            total = float(np.sum(jumps)) + residual
        return cls(np.array(jumps), float(meta.get("epsilon", 0.0) or 0.0), residual, total, meta)


def sample_positive_stable(theta: float, rng: RngStream | np.random.Generator, size=None):
    """Draws with Laplace transform exp(-lambda**theta), by Kanter's method.

    S = (A(pi*U)/W)**((1-theta)/theta) with U uniform, W standard exponential
    and A the kernel of the one-sided integral representation.
    """
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie in (0, 1)")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    scalar = size is None
    n = 1 if scalar else int(size)
    u = gen.uniform(0.0, np.pi, size=n)
    w = gen.standard_exponential(size=n)
    log_a = _log_kernel(theta, np.clip(u, 1e-12, np.pi - 1e-12))
    out = np.exp(((1.0 - theta) / theta) * (log_a - np.log(w)))
    return float(out[0]) if scalar else out


def sample_jump_field(
    alpha: Alpha, x: float, epsilon: float, rng: RngStream | np.random.Generator
) -> JumpSequence:
    """All jumps of magnitude > epsilon of the subordinator run to time x.

    Count is Poisson with mean c_alpha*x*alpha*eps**(-1/alpha); magnitudes are
    i.i.d. from the power law r**(-1-1/alpha) restricted to (eps, inf).  The
    mass carried by jumps below epsilon enters as its expected value.
    """
    if x <= 0:
        raise ValueError("time window x must be positive")
    if epsilon <= 0:
        raise ValueError("truncation epsilon must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    a = alpha.value
    c = stable_constants(alpha).c_alpha
    mean_count = c * x * a * epsilon ** (-1.0 / a)
    n = gen.poisson(mean_count)
    u = gen.uniform(size=n)
    jumps = np.sort(epsilon * u ** (-a))[::-1]
    residual = c * x * a * epsilon ** (1.0 - 1.0 / a) / (a - 1.0)
    total = float(jumps.sum()) + residual
    meta = {"alpha": a, "x": x, "epsilon": epsilon}
    if isinstance(rng, RngStream):
        meta.update(seed=rng.seed, stream_id=rng.stream_id)
    return JumpSequence(jumps, epsilon, residual, total, meta)


def _conditional_jump_cdf(alpha: Alpha, x: float, s_rem: float, n_grid: int = 385):
    """Inverse cdf of the next size-biased jump given remaining mass s_rem.

    The conditional density is proportional to q_x(s_rem - y) / y**(1/alpha)
    on (0, s_rem); substituting y = z**(alpha/(alpha-1)) absorbs the
    integrable singularity at 0, leaving a bounded integrand on a z-grid
    (graded toward 0, where the mass concentrates once s_rem is small).
    Densities are formed in log space so that remainders deep in the left
    tail of q never underflow.
    """
    a = alpha.value
    p = a / (a - 1.0)
    table = density_table(alpha.theta)
    z_max = s_rem ** (1.0 / p)
    z = z_max * np.linspace(0.0, 1.0, n_grid) ** 3
    y = z**p
    scale = x ** (-a)  # q_x(u) = x**(-a) q_1(u x**(-a)), common factor drops out
    logd = table.log_pdf(np.maximum(s_rem - y, 0.0) * scale)
    logd[-1] = -np.inf
    shift = np.max(logd)
    if not np.isfinite(shift):
        raise RuntimeError(f"conditional jump density vanished (x={x}, s_rem={s_rem})")
    dens = np.exp(logd - shift)
    cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(z))))
    if cdf[-1] <= 0.0:
        raise RuntimeError(f"conditional jump density vanished (x={x}, s_rem={s_rem})")
    cdf /= cdf[-1]
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    return PchipInterpolator(cdf[keep], z[keep]), p


def sample_conditioned_jumps(
    alpha: Alpha,
    x: float,
    s: float,
    rng: RngStream | np.random.Generator,
    k_max: int = 10_000,
    delta: float = 1e-6,
) -> JumpSequence:
    """Jumps of the subordinator on [0, x] conditioned on its value being s.

    Draws the size-biased sequence: each next jump, given remaining mass m,
    has density c_alpha*x*q_x(m - y) / (m * y**(1/alpha) * q_x(m)) on (0, m).
    Stops once the remainder drops below delta*s or k_max jumps were drawn;
    the remainder is recorded as the residual.
    """
    if x <= 0 or s <= 0:
        raise ValueError("x and s must be positive")
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    remainder = s
    jumps = []
    while remainder >= delta * s and len(jumps) < k_max:
        inv, p = _conditional_jump_cdf(alpha, x, remainder)
        y = float(inv(gen.uniform())) ** p
        y = min(max(y, 1e-300), remainder * (1.0 - 1e-12))
        jumps.append(y)
        remainder -= y
    ranked = np.sort(np.asarray(jumps))[::-1]
    meta = {"alpha": alpha.value, "x": x, "s": s}
    if isinstance(rng, RngStream):
        meta.update(seed=rng.seed, stream_id=rng.stream_id)
    return JumpSequence(ranked, 0.0, remainder, s, meta)


def conditional_first_jump_density(alpha: Alpha, x: float, s: float, y) -> np.ndarray:
    """Density of the first size-biased jump given T_x = s, for test oracles."""
    a = alpha.value
    table = density_table(alpha.theta)
    y = np.asarray(y, dtype=float)
    c = stable_constants(alpha).c_alpha
    qs = table.pdf_scaled(x, np.array([s]))[0]
    out = np.zeros_like(y)
    ok = (y > 0) & (y < s)
    out[ok] = c * x * table.pdf_scaled(x, s - y[ok]) / (s * y[ok] ** (1.0 / a) * qs)
    return out


def size_biased_permutation(masses, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Reorder masses in the order a uniform-random point discovers them."""
    masses = np.asarray(masses, dtype=float)
    if masses.size == 0:
        raise ValueError("masses must be nonempty")
    if np.any(masses < 0):
        raise ValueError("masses must be nonnegative")
    total = masses.sum()
    if total <= 0:
        raise ValueError("masses must not all be zero")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    # Gumbel-weighted ordering: argsort of log(m_i) + G_i realizes the
    # successive size-biased picks in one vectorized pass
    with np.errstate(divide="ignore"):
        keys = np.log(masses) + gen.gumbel(size=masses.size)
    order = np.argsort(-keys)
    return masses[order]
