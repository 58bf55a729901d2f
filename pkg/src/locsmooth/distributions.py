"""Smoothing distributions and their localized parameterizations.

Four per-dimension noise laws are supported:

* ``GaussianDiag``: additive normal noise with one scale per dimension.
  An infinite scale marks a dimension as fully randomized.
* ``UniformBox``: additive uniform noise on ``[-halfwidth, halfwidth]``.
* ``BernoulliFlip``: each bit flips independently with its own probability.
* ``SparsityAware``: bits are added with probability ``theta_plus`` and
  deleted with probability ``theta_minus``.

Sampling draws from a :class:`~locsmooth.numerics.RngStream`. Sample ``k``,
dimension ``d`` uses draw index ``start + k * D + d``, so batches can be split
or regenerated piecewise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .numerics import RngStream


def _frozen_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ShapeError(f"{name} must have at least one entry")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianDiag:
    scales: np.ndarray

    def __post_init__(self):
        scales = _frozen_vector(self.scales, "scales")
        if np.any(np.isnan(scales)) or np.any(scales <= 0):
            raise DomainError("Gaussian scales must be positive (inf allowed)")
        object.__setattr__(self, "scales", scales)

    @property
    def dim(self) -> int:
        return self.scales.size

    family = "gaussian"


@dataclass(frozen=True, eq=False)
class UniformBox:
    halfwidths: np.ndarray

    def __post_init__(self):
        widths = _frozen_vector(self.halfwidths, "halfwidths")
        if np.any(~np.isfinite(widths)) or np.any(widths <= 0):
            raise DomainError("uniform halfwidths must be positive and finite")
        object.__setattr__(self, "halfwidths", widths)

    @property
    def dim(self) -> int:
        return self.halfwidths.size

    family = "uniform"


def _check_open_unit(arr: np.ndarray, name: str):
    if np.any(np.isnan(arr)) or np.any(arr <= 0) or np.any(arr >= 1):
        raise DomainError(f"{name} must lie strictly between 0 and 1")


@dataclass(frozen=True, eq=False)
class BernoulliFlip:
    theta: np.ndarray

    def __post_init__(self):
        theta = _frozen_vector(self.theta, "theta")
        _check_open_unit(theta, "flip probabilities")
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.size

    family = "bernoulli"


@dataclass(frozen=True, eq=False)
class SparsityAware:
    theta_plus: np.ndarray
    theta_minus: np.ndarray

    def __post_init__(self):
        plus = _frozen_vector(self.theta_plus, "theta_plus")
        minus = _frozen_vector(self.theta_minus, "theta_minus")
        if plus.size != minus.size:
            raise ShapeError("theta_plus and theta_minus differ in length")
        _check_open_unit(plus, "addition probabilities")
        _check_open_unit(minus, "deletion probabilities")
        object.__setattr__(self, "theta_plus", plus)
        object.__setattr__(self, "theta_minus", minus)

    @property
    def dim(self) -> int:
        return self.theta_plus.size

    family = "sparsity"


SmoothingDistribution = Union[GaussianDiag, UniformBox, BernoulliFlip, SparsityAware]
DiscreteDistribution = Union[BernoulliFlip, SparsityAware]

_FIELDS = {
    "gaussian": (GaussianDiag, ("scales",)),
    "uniform": (UniformBox, ("halfwidths",)),
    "bernoulli": (BernoulliFlip, ("theta",)),
    "sparsity": (SparsityAware, ("theta_plus", "theta_minus")),
}


def distribution_to_dict(dist: SmoothingDistribution) -> dict:
    cls, fields = _FIELDS[dist.family]
    out = {"family": dist.family}
    for name in fields:
        out[name] = [float(v) for v in getattr(dist, name)]
    return out


def distribution_from_dict(data: dict) -> SmoothingDistribution:
    family = data.get("family")
    if family not in _FIELDS:
        raise ConfigError(f"unknown distribution family {family!r}")
    cls, fields = _FIELDS[family]
    extra = set(data) - set(fields) - {"family"}
    if extra:
        raise ConfigError(f"unknown keys for {family} distribution: {sorted(extra)}")
    missing = [name for name in fields if name not in data]
    if missing:
        raise ConfigError(f"{family} distribution missing {missing}")
    return cls(*[data[name] for name in fields])


def _as_binary(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x)
    if not np.all((arr == 0) | (arr == 1)):
        raise DomainError(f"{name} must be binary")
    return arr.astype(np.int8)


def sample(dist: SmoothingDistribution, x, stream: RngStream, n: int = 1, start: int = 0) -> np.ndarray:
    """Draw ``n`` perturbed copies of ``x``; returns an ``(n, D)`` array.

    Discrete laws return ``int8`` bits. Continuous laws return floats and do
    not clip; infinite Gaussian scales yield infinite coordinates.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size != dist.dim:
        raise ShapeError(f"input has shape {x.shape}, distribution has {dist.dim} dims")
    dim = dist.dim
    if dist.family == "gaussian":
        noise = stream.standard_normal(n * dim, start * dim).reshape(n, dim)
        return x.astype(float) + noise * dist.scales
    uniforms = stream.uniform01(n * dim, start * dim).reshape(n, dim)
    if dist.family == "uniform":
        return x.astype(float) + dist.halfwidths * (2.0 * uniforms - 1.0)
    bits = _as_binary(x)
    if dist.family == "bernoulli":
        flip = uniforms < dist.theta
    else:
        flip = uniforms < np.where(bits == 1, dist.theta_minus, dist.theta_plus)
    return np.bitwise_xor(bits, flip.astype(np.int8))


def flip_probabilities(dist: DiscreteDistribution, x) -> np.ndarray:
    """Per-dimension probability that bit ``d`` differs from ``x_d``."""
    bits = _as_binary(x)
    if bits.shape[-1] != dist.dim:
        raise ShapeError("input and distribution dimension differ")
    if dist.family == "bernoulli":
        return np.broadcast_to(dist.theta, bits.shape).astype(float)
    if dist.family == "sparsity":
        return np.where(bits == 1, dist.theta_minus, dist.theta_plus)
    raise DomainError("flip probabilities exist only for discrete laws")


def exact_pmf(dist: DiscreteDistribution, x, z):
    """Probability of outcome ``z`` (or each row of ``z``) given clean ``x``."""
    bits_x = _as_binary(x, "x")
    bits_z = _as_binary(z, "z")
    if bits_x.ndim != 1 or bits_z.shape[-1] != bits_x.size:
        raise ShapeError("x and z dimensions differ")
    flip_p = flip_probabilities(dist, bits_x)
    flipped = bits_z != bits_x
    per_dim = np.where(flipped, flip_p, 1.0 - flip_p)
    prob = np.prod(per_dim, axis=-1)
    return float(prob) if np.ndim(prob) == 0 else prob


def tile_grid(image_shape: Sequence[int], grid_shape: Sequence[int]) -> list[tuple[int, int]]:
    """Row-major assignment of pixels to an ``H x W`` grid of cells.

    Returns one 1-based ``(row, col)`` cell per flattened input dimension.
    Cells are as even as integer division allows.
    """
    rows, cols = (int(v) for v in image_shape)
    n_h, n_w = (int(v) for v in grid_shape)
    if n_h < 1 or n_w < 1 or n_h > rows or n_w > cols:
        raise ConfigError(f"grid {n_h}x{n_w} does not fit image {rows}x{cols}")
    cells = []
    for r in range(rows):
        for c in range(cols):
            cells.append((r * n_h // rows + 1, c * n_w // cols + 1))
    return cells


def _cell_distances(n_h: int, n_w: int, target_cell, cell_of_dim) -> np.ndarray:
    ti, tj = target_cell
    if not (1 <= ti <= n_h and 1 <= tj <= n_w):
        raise ConfigError(f"target cell {target_cell} outside {n_h}x{n_w} grid")
    dist = np.empty(len(cell_of_dim))
    for d, cell in enumerate(cell_of_dim):
        if cell is None:
            raise ConfigError(f"input dimension {d} has no grid cell")
        k, l = cell
        if not (1 <= k <= n_h and 1 <= l <= n_w):
            raise ConfigError(f"dimension {d} assigned to cell {cell} outside the grid")
        dist[d] = max(abs(ti - k), abs(l - tj))
    return dist


def grid_interpolated(n_h: int, n_w: int, low: float, high: float, target_cell, cell_of_dim) -> np.ndarray:
    """Linear interpolation from ``low`` (target cell) toward ``high`` by cell distance.

    Distance is the Chebyshev distance between cells divided by the grid width.
    ``high = inf`` gives ``low`` on the target cell and ``inf`` elsewhere.
    """
    if not low <= high:
        raise ConfigError(f"need low <= high, got {low} > {high}")
    dist = _cell_distances(n_h, n_w, target_cell, cell_of_dim)
    if np.isinf(high):
        return np.where(dist == 0, low, np.inf)
    return low + (high - low) * dist / n_w


def grid_gaussian_scales(n_h: int, n_w: int, sigma_min: float, sigma_max: float, target_cell, cell_of_dim) -> np.ndarray:
    if not sigma_min > 0:
        raise ConfigError("sigma_min must be positive")
    return grid_interpolated(n_h, n_w, sigma_min, sigma_max, target_cell, cell_of_dim)


def cluster_affinity_ranking(edge_counts) -> list[list[int]]:
    """For each cluster, all clusters ordered from most to least connected.

    Row ``j`` of the result ranks clusters by descending ``edge_counts[:, j]``
    with ties going to the lower index. Cluster ``j`` is always first.
    """
    counts = np.asarray(edge_counts, dtype=float)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise ShapeError(f"edge counts must be square, got shape {counts.shape}")
    if np.any(counts < 0):
        raise DomainError("edge counts must be nonnegative")
    rankings = []
    for j in range(counts.shape[0]):
        others = [i for i in range(counts.shape[0]) if i != j]
        others.sort(key=lambda i: (-counts[i, j], i))
        rankings.append([j] + others)
    return rankings


def cluster_sparsity_thetas(ranking: Sequence[Sequence[int]], theta_min: float, theta_max: float, n_clusters: int) -> np.ndarray:
    """Matrix ``M[i, j]``: parameter used on source cluster ``j`` when classifying in cluster ``i``.

    The ``r``-th ranked source gets the ``r``-th of ``n_clusters`` evenly spaced
    values from ``theta_min`` to ``theta_max``.
    """
    if not 0.0 <= theta_min <= theta_max <= 1.0:
        raise ConfigError(f"need 0 <= theta_min <= theta_max <= 1, got {theta_min}, {theta_max}")
    levels = np.linspace(theta_min, theta_max, n_clusters)
    table = np.empty((len(ranking), n_clusters))
    for i, order in enumerate(ranking):
        if sorted(order) != list(range(n_clusters)):
            raise ConfigError(f"ranking of cluster {i} is not a permutation of {n_clusters} clusters")
        for rank, source in enumerate(order):
            table[i, source] = levels[rank]
    return table


@dataclass(frozen=True)
class LocalizedScheme:
    """One smoothing distribution per disjoint group of outputs."""

    output_subsets: tuple
    distributions: tuple

    def __post_init__(self):
        subsets = tuple(tuple(int(n) for n in s) for s in self.output_subsets)
        dists = tuple(self.distributions)
        if len(subsets) != len(dists):
            raise ConfigError("need exactly one distribution per output subset")
        flat = [n for s in subsets for n in s]
        if any(len(s) == 0 for s in subsets):
            raise ConfigError("output subsets must be nonempty")
        if sorted(flat) != list(range(len(flat))):
            raise ConfigError("output subsets must partition 0..D_out-1")
        if len({d.dim for d in dists}) > 1:
            raise ShapeError("all distributions must share one input dimension")
        object.__setattr__(self, "output_subsets", subsets)
        object.__setattr__(self, "distributions", dists)

    @property
    def d_out(self) -> int:
        return sum(len(s) for s in self.output_subsets)

    @property
    def d_in(self) -> int:
        return self.distributions[0].dim

    def subset_of(self, output: int) -> int:
        for i, subset in enumerate(self.output_subsets):
            if output in subset:
                return i
        raise ConfigError(f"output {output} not covered")

    def distribution_for(self, output: int) -> SmoothingDistribution:
        return self.distributions[self.subset_of(output)]

    @classmethod
    def per_output(cls, distributions: Sequence[SmoothingDistribution]) -> "LocalizedScheme":
        return cls(tuple((n,) for n in range(len(distributions))), tuple(distributions))

    @classmethod
    def shared(cls, dist: SmoothingDistribution, d_out: int) -> "LocalizedScheme":
        return cls((tuple(range(d_out)),), (dist,))
