"""Uniform sampling of hidden-layer parameters from a bounded ball-times-interval domain.

Directions live in the ball ``|a| <= m / (2 r_scale)`` and biases in ``[-m, m]``.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class SampleDomain:
    m: float
    dim: int
    r_scale: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"truncation parameter m must be positive, got {self.m}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.r_scale > 0:
            raise ValueError(f"r_scale must be positive, got {self.r_scale}")

    @property
    def radius(self):
        return self.m / (2.0 * self.r_scale)

    @property
    def bias_bound(self):
        return self.m


@dataclass(frozen=True, eq=False)
class FeatureParams:
    """Frozen hidden-layer parameters: directions ``a`` (n x dim) and biases ``b`` (n,)."""

    a: np.ndarray
    b: np.ndarray
    seed: int = 0
    cell: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.a, dtype=float, copy=True)
        b = np.array(self.b, dtype=float, copy=True)
        if a.ndim != 2 or b.shape != (a.shape[0],):
            raise ValueError(f"inconsistent parameter shapes {a.shape} and {b.shape}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def dim(self):
        return self.a.shape[1]

    def within(self, dom):
        """True if every direction and bias respects the bounds of ``dom``."""
        ok_a = np.all(np.linalg.norm(self.a, axis=1) <= dom.radius + _BOUND_SLACK)
        ok_b = np.all(np.abs(self.b) <= dom.bias_bound + _BOUND_SLACK)
        return bool(ok_a and ok_b)

    def same_as(self, other):
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)


def element_seed(seed, element_id):
    """Per-element stream seed, reproducible regardless of assembly order."""
    return int(seed) ^ int(element_id)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"number of features must be a positive integer, got {n!r}")
    return int(n)


def _ball_directions(rng, n, dim):
    y = rng.standard_normal((n, dim))
    norms = np.linalg.norm(y, axis=1)
    # a zero Gaussian draw has probability zero; redraw defensively
    while np.any(norms == 0.0):
        bad = norms == 0.0
        y[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(y, axis=1)
    return y / norms[:, None]


def sample_uniform(dom, n, seed=0):
    """I.i.d. uniform draws on the ball times the bias interval.

    The direction comes from a normalized Gaussian vector and the radius is
    ``radius * u**(1/dim)`` with ``u`` uniform on [0, 1].
    """
    n = _check_n(n)
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    a = _ball_directions(rng, n, dom.dim) * (dom.radius * u ** (1.0 / dom.dim))[:, None]
    b = rng.uniform(-dom.bias_bound, dom.bias_bound, n)
    return FeatureParams(a, b, seed)


def balanced_counts(n, axes):
    """Per-axis cell counts whose product is the smallest balanced grid with at least ``n`` cells."""
    n = _check_n(n)
    base = max(1, int(math.floor(n ** (1.0 / axes) + 1e-12)))
    counts = [base] * axes
    i = 0
    while math.prod(counts) < n:
        counts[i] += 1
        i = (i + 1) % axes
    return counts


def stratum_counts(masses, n):
    """Samples per stratum, ``ceil(mass * n)`` for every stratum with positive mass."""
    masses = np.asarray(masses, dtype=float)
    out = np.zeros(masses.shape, dtype=int)
    pos = masses > 0
    out[pos] = np.ceil(masses[pos] * n - 1e-9).astype(int)
    out[pos] = np.maximum(out[pos], 1)
    return out


def _ball_fraction(lo, hi, radius):
    """Fraction of the box [lo, hi] lying inside the centered ball."""
    near = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    far = np.maximum(np.abs(lo), np.abs(hi))
    if np.linalg.norm(near) >= radius:
        return 0.0
    if np.linalg.norm(far) <= radius:
        return 1.0
    dim = lo.size
    if dim == 1:
        return float((min(hi[0], radius) - max(lo[0], -radius)) / (hi[0] - lo[0]))
    sub = max(8, int(round(4096 ** (1.0 / dim))))
    axes = [lo[k] + (np.arange(sub) + 0.5) * (hi[k] - lo[k]) / sub for k in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    return float(np.mean(np.sum(pts * pts, axis=1) <= radius * radius))


@dataclass(frozen=True)
class Strata:
    """Axis-aligned cells over the bounding box of the parameter domain (directions, then bias)."""

    lo: np.ndarray
    hi: np.ndarray
    mass: np.ndarray
    counts: np.ndarray


def stratify(dom, n):
    """Cut the bounding box into about ``n`` equal cells and assign each ``ceil(mass * n)`` samples."""
    n = _check_n(n)
    counts = balanced_counts(n, dom.dim + 1)
    half = np.array([dom.radius] * dom.dim + [dom.bias_bound])
    edges = [np.linspace(-h, h, c + 1) for h, c in zip(half, counts)]
    lo, hi, frac = [], [], []
    for idx in itertools.product(*(range(c) for c in counts)):
        clo = np.array([edges[k][i] for k, i in enumerate(idx)])
        chi = np.array([edges[k][i + 1] for k, i in enumerate(idx)])
        lo.append(clo)
        hi.append(chi)
        frac.append(_ball_fraction(clo[:-1], chi[:-1], dom.radius))
    frac = np.array(frac)
    mass = frac / frac.sum()
    return Strata(np.array(lo), np.array(hi), mass, stratum_counts(mass, n))


def sample_stratified(dom, n, seed=0):
    """Stratified uniform draws: ``ceil(mass * n)`` points inside each cell of a balanced grid.

    Cells cut by the ball boundary use rejection so every direction stays in the ball.
    The returned parameters carry the cell index of each sample in ``cell``.
    """
    strata = stratify(dom, n)
    rng = np.random.default_rng(seed)
    d = dom.dim
    r2 = dom.radius ** 2
    a_parts, b_parts, cells = [], [], []
    for i in np.flatnonzero(strata.counts):
        c = int(strata.counts[i])
        lo, hi = strata.lo[i], strata.hi[i]
        got = np.empty((0, d))
        while got.shape[0] < c:
            trial = rng.uniform(lo[:-1], hi[:-1], size=(max(4 * c, 16), d))
            trial = trial[np.sum(trial * trial, axis=1) <= r2]
            got = np.vstack([got, trial])
        a_parts.append(got[:c])
        b_parts.append(rng.uniform(lo[-1], hi[-1], c))
        cells.append(np.full(c, i))
    return FeatureParams(np.vstack(a_parts), np.concatenate(b_parts), seed, np.concatenate(cells))


SAMPLERS = {"uniform": sample_uniform, "stratified": sample_stratified}
