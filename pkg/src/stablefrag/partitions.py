"""Exchangeable partition laws of the first split, evaluated exactly.

The probability of each non-trivial partition of {1..n} at the instant the
n tagged points are first separated, the sigma-finite characteristic-measure
weights, and the one-parameter family of partition probabilities they embed
into, all as closed gamma-ratio forms computed in log space.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.special import gammaln

from .special import Alpha, stable_constants

__all__ = [
    "SetPartition",
    "enumerate_set_partitions",
    "rho_minus",
    "kappa_minus",
    "kappa_theta_form",
    "p_theta",
    "partition_table_csv",
]


@dataclass(frozen=True)
class SetPartition:
    """A partition of {1..n} in canonical form (blocks sorted by least element)."""

    n: int
    blocks: tuple[frozenset, ...]

    @staticmethod
    def from_blocks(n: int, blocks) -> "SetPartition":
        blocks = [frozenset(b) for b in blocks if b]
        seen = set()
        for b in blocks:
            if not b or not all(isinstance(i, int) and 1 <= i <= n for i in b):
                raise ValueError("blocks must contain integers in 1..n")
            if seen & b:
                raise ValueError("blocks must be disjoint")
            seen |= b
        if seen != set(range(1, n + 1)):
            raise ValueError("blocks must cover {1..n}")
        return SetPartition(n, tuple(sorted(blocks, key=min)))

    @property
    def k(self) -> int:
        return len(self.blocks)

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def size_multiset(self) -> tuple[int, ...]:
        return tuple(sorted((len(b) for b in self.blocks), reverse=True))

    def is_trivial(self) -> bool:
        return self.k == 1


@lru_cache(maxsize=None)
def enumerate_set_partitions(n: int) -> tuple[SetPartition, ...]:
    """All Bell(n) partitions of {1..n}, canonical, without duplicates."""
    if not (1 <= n <= 10):
        raise ValueError("enumeration supported for 1 <= n <= 10")
    parts: list[list[list[int]]] = [[[1]]]
    for i in range(2, n + 1):
        nxt = []
        for p in parts:
            for j in range(len(p)):
                nxt.append([b + [i] if k == j else list(b) for k, b in enumerate(p)])
            nxt.append([list(b) for b in p] + [[i]])
        parts = nxt
    return tuple(SetPartition.from_blocks(n, p) for p in parts)


def _log_rising(x: float, n: int) -> float:
    """log of Gamma(x+n)/Gamma(x); arguments stay positive for our uses."""
    assert x > 0, "rising factorial needs a positive base"
    return gammaln(x + n) - gammaln(x)


def _log_product_term(block_sizes, alpha: float) -> float:
    th = 1.0 - 1.0 / alpha
    return sum(_log_rising(th, m - 1) for m in block_sizes)


def rho_minus(pi: SetPartition, alpha: Alpha) -> float:
    """Probability of the non-trivial partition pi at the first separation.

    D_alpha * Gamma(k - alpha) / (alpha**k * Gamma(n - 1/alpha)) times the
    product over blocks of the rising factorials [1 - 1/alpha]_(n_i - 1).
    """
    if pi.is_trivial():
        raise ValueError("rho is supported on non-trivial partitions (k >= 2)")
    a = alpha.value
    n, k = pi.n, pi.k
    assert k - a > 0 and n - 1.0 / a > 0
    log_val = (
        math.log(stable_constants(alpha).D_alpha)
        + gammaln(k - a)
        - k * math.log(a)
        - gammaln(n - 1.0 / a)
        + _log_product_term(pi.block_sizes(), a)
    )
    return math.exp(log_val)


def kappa_minus(pi: SetPartition, alpha: Alpha) -> float:
    """Characteristic-measure weight of pi among partitions of {1..n}.

    Same gamma structure as rho_minus but normalized by Gamma(n-1), so it is
    a finite measure on non-trivial partitions rather than a probability.
    """
    if pi.is_trivial():
        raise ValueError("kappa is supported on non-trivial partitions (k >= 2)")
    if pi.n < 2:
        raise ValueError("kappa needs n >= 2")
    a = alpha.value
    n, k = pi.n, pi.k
    log_val = (
        math.log(stable_constants(alpha).D_alpha)
        + gammaln(k - a)
        - (k - 1) * math.log(a)
        - gammaln(n - 1)
        + _log_product_term(pi.block_sizes(), a)
    )
    return math.exp(log_val)


def kappa_theta_form(block_sizes, theta: float, alpha: Alpha) -> float:
    """The analytic family D_a*Gamma(a*theta+k)/(a**(k-1)*Gamma(theta+n)) * prod.

    Defined for a*theta + k > 0 and theta + n > 0; at theta = -1 it lands on
    kappa_minus, which is how the theta family degenerates into the
    sigma-finite first-split measure.
    """
    a = alpha.value
    k = len(block_sizes)
    n = sum(block_sizes)
    if a * theta + k <= 0 or theta + n <= 0:
        raise ValueError("gamma arguments must stay positive")
    log_val = (
        math.log(stable_constants(alpha).D_alpha)
        + gammaln(a * theta + k)
        - (k - 1) * math.log(a)
        - gammaln(theta + n)
        + _log_product_term(block_sizes, a)
    )
    return math.exp(log_val)


def p_theta(block_sizes, theta: float, alpha: Alpha) -> float:
    """Partition probability [a*theta+1]_(k-1) / (a**(k-1) [theta+1]_(n-1)) * prod.

    Valid for theta > -1/alpha, where the normalized size-biased family is a
    genuine probability distribution on partitions of {1..n}.
    """
    a = alpha.value
    if theta <= -1.0 / a:
        raise ValueError(f"theta must exceed -1/alpha = {-1.0 / a}")
    if not block_sizes:
        raise ValueError("block_sizes must be nonempty")
    k = len(block_sizes)
    n = sum(block_sizes)
    log_val = (
        _log_rising(a * theta + 1.0, k - 1)
        - (k - 1) * math.log(a)
        - _log_rising(theta + 1.0, n - 1)
        + _log_product_term(block_sizes, a)
    )
    return math.exp(log_val)


def partition_table_csv(n: int, alpha: Alpha) -> str:
    """Per size-multiset table of counts, rho and kappa for partitions of {1..n}."""
    rows: dict[tuple[int, ...], list] = {}
    for pi in enumerate_set_partitions(n):
        if pi.is_trivial():
            continue
        key = pi.size_multiset()
        if key not in rows:
            rows[key] = [0, rho_minus(pi, alpha), kappa_minus(pi, alpha)]
        rows[key][0] += 1
    buf = io.StringIO()
    buf.write(f"# n={n}\n# alpha={alpha.value}\n")
    buf.write("size_multiset,count,rho,kappa\n")
    for key in sorted(rows, reverse=True):
        count, rho, kap = rows[key]
        buf.write(f"{'+'.join(map(str, key))},{count},{rho!r},{kap!r}\n")
    return buf.getvalue()
