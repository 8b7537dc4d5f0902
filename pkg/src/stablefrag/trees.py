"""Stable-tree marginals and the discrete height-path fragmentation.

Two layers of machinery live here.  The exact layer enumerates the plane
skeletons with n leaves and no out-degree 1, evaluates their probabilities in
closed form, samples them, and reads off the first-split partition; it also
samples the root mark of the one-leaf marginal by inverse cdf.  The
approximation layer simulates critical Galton-Watson trees conditioned on
their vertex count (offspring generating function s + (1-s)**alpha / alpha)
through a random-walk bridge and the cycle-lemma rotation, and slices the
resulting height paths into ranked fragment masses.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln

from .partitions import SetPartition
from .special import Alpha, density_table
from .streams import RngStream

__all__ = [
    "MarkedTree",
    "DiscreteHeightPath",
    "RankedMassSequence",
    "enumerate_skeletons",
    "skeleton_probability",
    "sample_skeleton",
    "first_split_partition",
    "sample_root_mark",
    "root_mark_density",
    "offspring_pmf",
    "sample_offspring",
    "sample_conditioned_gw_tree",
    "fragment_at_height",
    "fragment_intervals",
    "tagged_leaf_statistics",
    "RejectionBudgetError",
]


class RejectionBudgetError(RuntimeError):
    """The bridge resampling cap was exceeded."""


# ---------------------------------------------------------------------------
# ranked masses


@dataclass
class RankedMassSequence:
    """Nonincreasing masses in [0, 1] with total at most 1."""

    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.masses.size:
            if np.any(np.diff(self.masses) > 1e-15):
                raise ValueError("masses must be nonincreasing")
            if self.masses[-1] < 0:
                raise ValueError("masses must be nonnegative")
        if self.masses.sum() > 1.0 + 1e-12:
            raise ValueError("total mass exceeds 1")

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def to_csv_row(self) -> str:
        return ",".join(repr(m) for m in self.masses)


# ---------------------------------------------------------------------------
# exact skeleton layer

# a plane tree is a nested tuple; a leaf is the empty tuple


def leaf_count(tree) -> int:
    if not tree:
        return 1
    return sum(leaf_count(c) for c in tree)


def _validate_no_unary(tree) -> None:
    if len(tree) == 1:
        raise ValueError("skeletons must not contain out-degree-1 vertices")
    for c in tree:
        _validate_no_unary(c)


@lru_cache(maxsize=None)
def enumerate_skeletons(n: int) -> tuple:
    """All plane trees with n leaves and every internal out-degree >= 2."""
    if not (1 <= n <= 9):
        raise ValueError("skeleton enumeration supported for 1 <= n <= 9")
    if n == 1:
        return ((),)
    out = []

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    for c in range(2, n + 1):
        for comp in compositions(n, c):
            choices = [enumerate_skeletons(m) for m in comp]
            stack = [()]
            for opts in choices:
                stack = [prefix + (t,) for prefix in stack for t in opts]
            out.extend(stack)
    return tuple(out)


def skeleton_probability(tree, alpha: Alpha) -> float:
    """Probability of this plane skeleton for the n-leaf marginal.

    n! / ((alpha-1)(2 alpha - 1)...((n-1) alpha - 1)) times, over internal
    vertices v with c_v children, |(alpha-1)...(alpha-c_v+1)| / c_v!.
    """
    _validate_no_unary(tree)
    n = leaf_count(tree)
    if n < 2:
        raise ValueError("skeleton probability defined for n >= 2 leaves")
    a = alpha.value
    log_p = gammaln(n + 1) - sum(math.log(j * a - 1.0) for j in range(1, n))

    def add_vertex_terms(t):
        nonlocal log_p
        if not t:
            return
        c = len(t)
        log_p += sum(math.log(abs(a - i)) for i in range(1, c)) - gammaln(c + 1)
        for child in t:
            add_vertex_terms(child)

    add_vertex_terms(tree)
    return math.exp(log_p)


@dataclass
class MarkedTree:
    """A plane skeleton with optional vertex marks and leaf labels.

    Marks are listed in depth-first vertex order; leaf labels in depth-first
    leaf order, forming a bijection onto {1..n} when present.
    """

    skeleton: tuple
    marks: np.ndarray | None = None
    leaf_labels: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _validate_no_unary(self.skeleton)
        if self.marks is not None:
            self.marks = np.asarray(self.marks, dtype=float)
            if np.any(self.marks < 0):
                raise ValueError("marks must be nonnegative")
        if self.leaf_labels is not None:
            n = leaf_count(self.skeleton)
            if sorted(self.leaf_labels) != list(range(1, n + 1)):
                raise ValueError("leaf labels must biject onto {1..n}")

    @property
    def n_leaves(self) -> int:
        return leaf_count(self.skeleton)


@lru_cache(maxsize=32)
def _skeleton_law(n: int, alpha_value: float):
    trees = enumerate_skeletons(n)
    probs = np.array([skeleton_probability(t, Alpha(alpha_value)) for t in trees])
    return trees, probs


def sample_skeleton(n: int, alpha: Alpha, rng: RngStream | np.random.Generator) -> MarkedTree:
    """Exact draw from the skeleton law with uniformly random leaf labels."""
    if not (2 <= n <= 8):
        raise ValueError("exact skeleton sampling supported for 2 <= n <= 8")
    trees, probs = _skeleton_law(n, alpha.value)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    idx = gen.choice(len(trees), p=probs / probs.sum())
    labels = tuple(int(v) for v in gen.permutation(n) + 1)
    return MarkedTree(trees[idx], leaf_labels=labels, meta={"alpha": alpha.value})


def first_split_partition(tree: MarkedTree) -> SetPartition:
    """Partition of the leaf labels by root-child subtree."""
    if tree.leaf_labels is None:
        raise ValueError("first-split partition needs leaf labels")
    n = tree.n_leaves
    blocks = []
    pos = 0
    for child in tree.skeleton:
        m = leaf_count(child)
        blocks.append(set(tree.leaf_labels[pos : pos + m]))
        pos += m
    return SetPartition.from_blocks(n, blocks)


# ---------------------------------------------------------------------------
# root mark of the one-leaf marginal


def root_mark_density(alpha: Alpha, h) -> np.ndarray:
    """Density alpha*Gamma(1-1/alpha)*chi_{alpha h}(1) of the root mark."""
    a = alpha.value
    tc = alpha.theta_conj
    h = np.asarray(h, dtype=float)
    out = np.zeros_like(h)
    pos = h > 0
    if np.any(pos):
        tab = density_table(tc)
        scale = (a * h[pos]) ** (-1.0 / tc)
        out[pos] = a * math.gamma(tc) * scale * tab.pdf(scale)
    return out


@lru_cache(maxsize=16)
def _root_mark_inverse_cdf(alpha_value: float):
    alpha = Alpha(alpha_value)
    tc = alpha.theta_conj
    tab = density_table(tc)
    h_hi = tab.x_lo ** (-tc) / alpha_value
    grid = np.linspace(0.0, h_hi, 8192)
    pdf = root_mark_density(alpha, grid)
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))))
    cdf /= cdf[-1]
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    return PchipInterpolator(cdf[keep], grid[keep])


def sample_root_mark(alpha: Alpha, rng: RngStream | np.random.Generator, size=None):
    """Draws of the root mark, by numeric cdf inversion of its density."""
    inv = _root_mark_inverse_cdf(alpha.value)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    scalar = size is None
    u = gen.uniform(size=1 if scalar else int(size))
    out = np.asarray(inv(u), dtype=float)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Galton-Watson layer


@dataclass
class DiscreteHeightPath:
    """Depth-first vertex heights of a rooted plane tree."""

    heights: np.ndarray
    n_vertices: int

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.int64)
        if self.heights.size != self.n_vertices:
            raise ValueError("heights length must equal n_vertices")
        if self.heights[0] != 0:
            raise ValueError("height path must start at the root, height 0")
        if self.heights.size > 1 and np.max(np.diff(self.heights)) > 1:
            raise ValueError("heights may only step up by 1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in getattr(self, "meta", {}).items():
            buf.write(f"# {key}={val}\n")
        buf.write("index,height\n")
        for i, h in enumerate(self.heights):
            buf.write(f"{i},{h}\n")
        return buf.getvalue()


def offspring_pmf(alpha: Alpha, k_max: int) -> np.ndarray:
    """Offspring probabilities of s + (1-s)**alpha / alpha up to k_max.

    p_0 = 1/alpha, p_1 = 0 and p_k = (alpha-1) prod_{i=2}^{k-1} (i-alpha) / k!
    for k >= 2; critical with tail exponent -(1+alpha).
    """
    a = alpha.value
    p = np.zeros(k_max + 1)
    p[0] = 1.0 / a
    if k_max >= 2:
        ks = np.arange(2, k_max + 1)
        logs = np.concatenate(([0.0], np.cumsum(np.log(np.arange(2, k_max) - a))))
        p[2:] = np.exp(math.log(a - 1.0) + logs - gammaln(ks + 1.0))
    return p


@njit(cache=True)
def _alias_setup(p):
    n = p.size
    prob = np.empty(n)
    alias = np.zeros(n, dtype=np.int64)
    scaled = p * n
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        l = large[nl]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        if scaled[l] < 1.0:
            small[ns] = l
            ns += 1
        else:
            large[nl] = l
            nl += 1
    for i in range(ns):
        prob[small[i]] = 1.0
    for i in range(nl):
        prob[large[i]] = 1.0
    return prob, alias


@njit(inline="always")
def _next_u64(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x &= np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(27)
    state[0] = x
    return (x * np.uint64(0x2545F4914F6CDD1D)) & np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(inline="always")
def _next_uniform(state):
    return (_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _alias_draw_batch(prob, alias, state, out):
    k = prob.size
    for i in range(out.size):
        u = _next_uniform(state) * k
        idx = int(u)
        if idx >= k:
            idx = k - 1
        if u - idx < prob[idx]:
            out[i] = idx
        else:
            out[i] = alias[idx]


@njit(cache=True)
def _bridge_attempts(prob, alias, n, state, max_attempts):
    """Draw i.i.d. offspring n at a time until they sum to n - 1."""
    buf = np.empty(n, dtype=np.int64)
    k = prob.size
    for attempt in range(max_attempts):
        total = 0
        for i in range(n):
            u = _next_uniform(state) * k
            idx = int(u)
            if idx >= k:
                idx = k - 1
            if u - idx < prob[idx]:
                buf[i] = idx
            else:
                buf[i] = alias[idx]
            total += buf[i]
        if total == n - 1:
            return buf, attempt + 1
    return buf[:0], max_attempts


@njit(cache=True)
def _cycle_rotate(x):
    """Rotation of an offspring sequence with sum n-1 into a valid preorder."""
    n = x.size
    s = 0
    best = 0
    best_pos = 0
    for k in range(n):
        s += x[k] - 1
        if s < best:
            best = s
            best_pos = k + 1
    out = np.empty(n, dtype=np.int64)
    m = best_pos % n
    for i in range(n):
        out[i] = x[(m + i) % n]
    return out


@njit(cache=True)
def _heights_from_offspring(c):
    """Depth-first vertex heights from a preorder offspring sequence."""
    n = c.size
    heights = np.empty(n, dtype=np.int64)
    rem = np.empty(n + 1, dtype=np.int64)
    hts = np.empty(n + 1, dtype=np.int64)
    top = -1
    for i in range(n):
        while top >= 0 and rem[top] == 0:
            top -= 1
        if top < 0:
            h = 0
        else:
            h = hts[top] + 1
            rem[top] -= 1
        heights[i] = h
        top += 1
        rem[top] = c[i]
        hts[top] = h
    return heights


@lru_cache(maxsize=64)
def _alias_table(alpha_value: float, k_max: int):
    pmf = offspring_pmf(Alpha(alpha_value), k_max)
    pmf = pmf / pmf.sum()  # conditioning on total size makes the cap harmless
    return _alias_setup(pmf)


def sample_offspring(alpha: Alpha, size: int, rng: RngStream, k_max: int = 1 << 20) -> np.ndarray:
    """Unconditioned i.i.d. offspring draws (table capped at k_max)."""
    prob, alias = _alias_table(alpha.value, k_max)
    state = np.array([rng.state_words(1)[0] | np.uint64(1)], dtype=np.uint64)
    out = np.empty(size, dtype=np.int64)
    _alias_draw_batch(prob, alias, state, out)
    return out


def sample_conditioned_gw_tree(
    n_vertices: int,
    alpha: Alpha,
    rng: RngStream,
    max_attempts: int = 2_000_000,
) -> DiscreteHeightPath:
    """A Galton-Watson tree conditioned to have exactly n_vertices vertices.

    Offspring draws are rejected in bridge blocks until they sum to
    n_vertices - 1, then rotated into a valid preorder by the cycle lemma.
    Offspring counts above n_vertices - 1 cannot occur in the conditioned
    tree, so the sampling table is capped there without bias.
    """
    if n_vertices < 2:
        raise ValueError("need at least 2 vertices")
    prob, alias = _alias_table(alpha.value, max(2, n_vertices - 1))
    state = np.array([rng.state_words(1)[0] | np.uint64(1)], dtype=np.uint64)
    offspring, attempts = _bridge_attempts(prob, alias, n_vertices, state, max_attempts)
    if offspring.size == 0:
        raise RejectionBudgetError(
            f"no size-{n_vertices} bridge found in {max_attempts} attempts"
        )
    heights = _heights_from_offspring(_cycle_rotate(offspring))
    path = DiscreteHeightPath(heights, n_vertices)
    path.meta = {
        "alpha": alpha.value,
        "seed": rng.seed,
        "stream_id": rng.stream_id,
        "attempts": attempts,
    }
    return path


# ---------------------------------------------------------------------------
# fragmentation of a height path


def fragment_intervals(path: DiscreteHeightPath, level: int):
    """Preorder index ranges [i, j) of the tree components above the level.

    Each component of {vertices with height > level} is the subtree rooted at
    a vertex of height level + 1, which occupies a contiguous preorder range.
    """
    h = path.heights
    roots = np.flatnonzero(h == level + 1)
    if roots.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    boundary = np.flatnonzero(h <= level + 1)
    pos = np.searchsorted(boundary, roots, side="right")
    ends = np.where(pos < boundary.size, boundary[np.minimum(pos, boundary.size - 1)], h.size)
    return np.stack([roots, ends], axis=1)


def fragment_at_height(path: DiscreteHeightPath, level: int) -> RankedMassSequence:
    """Ranked component masses of the vertices strictly above the level."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    iv = fragment_intervals(path, level)
    sizes = (iv[:, 1] - iv[:, 0]).astype(float)
    return RankedMassSequence(np.sort(sizes)[::-1] / path.n_vertices)


def tagged_leaf_statistics(paths, alpha: Alpha, rng: RngStream) -> list[dict]:
    """Scale-free moment ratios of the height of one uniform vertex per tree.

    The unknown height normalization of the discrete trees cancels in
    m2/m1**2 and m3/(m1*m2); confidence intervals are delta-method.
    """
    if not paths:
        raise ValueError("need a nonempty batch of height paths")
    gen = rng.generator()
    xs = np.array([float(p.heights[gen.integers(p.n_vertices)]) for p in paths])
    n = xs.size
    pw = np.stack([xs, xs**2, xs**3], axis=1)
    m1, m2, m3 = pw.mean(axis=0)
    cov = np.cov(pw, rowvar=False) / n
    reports = []
    for name, value, grad in [
        ("height_ratio_m2_over_m1sq", m2 / m1**2, np.array([-2 * m2 / m1**3, 1 / m1**2, 0.0])),
        (
            "height_ratio_m3_over_m1m2",
            m3 / (m1 * m2),
            np.array([-m3 / (m1**2 * m2), -m3 / (m1 * m2**2), 1 / (m1 * m2)]),
        ),
    ]:
        se = math.sqrt(float(grad @ cov @ grad))
        reports.append(
            {
                "alpha": alpha.value,
                "n_vertices": paths[0].n_vertices,
                "n_trees": n,
                "statistic": name,
                "value": float(value),
                "ci_low": float(value - 3 * se),
                "ci_high": float(value + 3 * se),
            }
        )
    return reports
