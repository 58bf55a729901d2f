"""Per-prediction certificates in weighted ``l_p`` form.

A certificate ``(w, eta, p)`` guarantees that a prediction is unchanged for
every ``x'`` with ``sum_d w_d |x'_d - x_d|^p < eta``. With ``p = 0`` the
convention ``0^0 = 0`` turns the sum into a weighted count of changed
dimensions.

Abstention is signalled by returning ``None`` instead of a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError, InvalidStatsError, ShapeError
from .numerics import std_normal_quantile

ETA_MAX = 1e9


@dataclass(frozen=True, eq=False)
class InterfaceCert:
    weights: np.ndarray
    eta: float
    p: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(np.isnan(w)) or np.any(w < 0) or np.any(np.isinf(w)):
            raise DomainError("certificate weights must be finite and nonnegative")
        if not self.eta >= 0:
            raise DomainError(f"certificate radius must be nonnegative, got {self.eta}")
        if self.p not in (0, 1, 2):
            raise DomainError(f"exponent must be 0, 1 or 2, got {self.p}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eta", float(self.eta))

    def to_dict(self) -> dict:
        return {"weights": [float(v) for v in self.weights], "eta": self.eta, "p": self.p}


@dataclass(frozen=True, eq=False)
class SparsityCert:
    """Certificate with separate prices for adding and deleting bits."""

    w_plus: np.ndarray
    w_minus: np.ndarray
    eta: float

    def __post_init__(self):
        plus = np.array(self.w_plus, dtype=float).reshape(-1)
        minus = np.array(self.w_minus, dtype=float).reshape(-1)
        if plus.shape != minus.shape:
            raise ShapeError("addition and deletion weights differ in length")
        if not self.eta >= 0:
            raise DomainError("certificate radius must be nonnegative")
        plus.setflags(write=False)
        minus.setflags(write=False)
        object.__setattr__(self, "w_plus", plus)
        object.__setattr__(self, "w_minus", minus)
        object.__setattr__(self, "eta", float(self.eta))

    def to_dict(self) -> dict:
        return {
            "w_plus": [float(v) for v in self.w_plus],
            "w_minus": [float(v) for v in self.w_minus],
            "eta": self.eta,
        }


Certificate = Union[InterfaceCert, SparsityCert]


@dataclass(frozen=True)
class SmoothedStats:
    """Statistics of a smoothed output.

    ``mu`` is the expected top-class score (or a lower bound on it), ``zeta``
    the expected squared deviation from ``nu`` (or an upper bound), ``q`` the
    probability of the top class for vote-based certificates.
    """

    mu: float = float("nan")
    zeta: float = float("nan")
    nu: float = float("nan")
    q: float = float("nan")


def _quantile_radius(q: float) -> Optional[float]:
    if not q <= 1.0:
        raise DomainError(f"class probability must be at most 1, got {q}")
    if not q > 0.5:
        return None
    if q == 1.0:
        return math.inf
    return std_normal_quantile(q)


def gaussian_cert(scales, q: float, eta_max: float = ETA_MAX) -> Optional[InterfaceCert]:
    """l2 certificate for Gaussian smoothing of the top-class probability."""
    s = np.asarray(scales, dtype=float)
    if np.any(np.isnan(s)) or np.any(s <= 0):
        raise DomainError("Gaussian scales must be positive")
    radius = _quantile_radius(q)
    if radius is None:
        return None
    with np.errstate(divide="ignore"):
        weights = np.where(np.isinf(s), 0.0, 1.0 / (s * s))
    return InterfaceCert(weights, min(radius * radius, eta_max), 2)


def uniform_cert(halfwidths, q: float, eta_max: float = ETA_MAX) -> Optional[InterfaceCert]:
    """l1 certificate for uniform smoothing of the top-class probability."""
    lam = np.asarray(halfwidths, dtype=float)
    if np.any(np.isnan(lam)) or np.any(lam <= 0):
        raise DomainError("uniform halfwidths must be positive")
    radius = _quantile_radius(q)
    if radius is None:
        return None
    weights = np.where(np.isinf(lam), 0.0, 1.0 / lam)
    return InterfaceCert(weights, min(radius, eta_max), 1)


def bernoulli_flip_weights(theta) -> np.ndarray:
    """Log expected likelihood ratio contributed by flipping each bit."""
    t = np.asarray(theta, dtype=float)
    return np.log((1 - t) ** 2 / t + t ** 2 / (1 - t))


def sparsity_weights(theta_plus, theta_minus) -> tuple[np.ndarray, np.ndarray]:
    """Costs of adding (``0 -> 1``) and deleting (``1 -> 0``) each bit."""
    tp = np.asarray(theta_plus, dtype=float)
    tm = np.asarray(theta_minus, dtype=float)
    add = np.log(tm ** 2 / (1 - tp) + (1 - tm) ** 2 / tp)
    delete = np.log((1 - tp) ** 2 / tm + tp ** 2 / (1 - tm))
    return add, delete


def variance_radius(mu: float, zeta: float, eta_max: float = ETA_MAX) -> Optional[float]:
    """Radius ``ln(1 + (mu - 1/2)^2 / zeta)`` shared by the discrete certificates.

    Returns ``None`` (abstain) for ``mu <= 1/2`` and ``eta_max`` for ``zeta = 0``.
    """
    if not mu > 0.5:
        return None
    if zeta < 0 or math.isnan(zeta):
        raise InvalidStatsError(f"second moment must be nonnegative, got {zeta}")
    if zeta == 0:
        return eta_max
    return min(math.log1p((mu - 0.5) ** 2 / zeta), eta_max)


def bernoulli_variance_cert(theta, stats: SmoothedStats, eta_max: float = ETA_MAX) -> Optional[InterfaceCert]:
    eta = variance_radius(stats.mu, stats.zeta, eta_max)
    if eta is None:
        return None
    return InterfaceCert(bernoulli_flip_weights(theta), eta, 0)


def sparsity_variance_cert(theta_plus, theta_minus, stats: SmoothedStats, eta_max: float = ETA_MAX) -> Optional[SparsityCert]:
    eta = variance_radius(stats.mu, stats.zeta, eta_max)
    if eta is None:
        return None
    add, delete = sparsity_weights(theta_plus, theta_minus)
    return SparsityCert(add, delete, eta)


def gaussian_variance_cert(scales, stats: SmoothedStats, eta_max: float = ETA_MAX) -> Optional[InterfaceCert]:
    """l2 certificate from the mean and second moment of a Gaussian-smoothed score."""
    s = np.asarray(scales, dtype=float)
    if np.any(np.isnan(s)) or np.any(s <= 0):
        raise DomainError("Gaussian scales must be positive")
    if not stats.mu > 0.5:
        return None
    if stats.nu > stats.mu:
        raise InvalidStatsError(f"anchor nu={stats.nu} exceeds mu={stats.mu}")
    spread = stats.zeta - (stats.mu - stats.nu) ** 2
    if not spread > 0:
        raise InvalidStatsError(
            f"zeta={stats.zeta} is not above (mu - nu)^2={(stats.mu - stats.nu) ** 2}"
        )
    eta = min(math.log1p((stats.mu - 0.5) ** 2 / spread), eta_max)
    with np.errstate(divide="ignore"):
        weights = np.where(np.isinf(s), 0.0, 1.0 / (s * s))
    return InterfaceCert(weights, eta, 2)


def perturbation_cost(cert: Certificate, x, x_prime) -> float:
    """Left-hand side of the certified-set inequality."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape:
        raise ShapeError("x and x' differ in shape")
    if isinstance(cert, SparsityCert):
        added = (x == 0) & (x_prime != 0)
        deleted = (x == 1) & (x_prime != 1)
        return float(np.sum(cert.w_plus[added]) + np.sum(cert.w_minus[deleted]))
    if cert.weights.size != x.size:
        raise ShapeError("certificate and input dimension differ")
    delta = np.abs(x_prime - x)
    changed = delta != 0
    if cert.p == 0:
        return float(np.sum(cert.weights[changed]))
    # Restricting to changed dims keeps 0 * inf out of the sum for masked inputs.
    return float(np.sum(cert.weights[changed] * delta[changed] ** cert.p))


def holds_at(cert: Certificate, x, x_prime) -> bool:
    """Whether ``x_prime`` lies in the certified set around ``x``."""
    return perturbation_cost(cert, x, x_prime) < cert.eta


def worst_case_cost(cert: InterfaceCert, epsilon: float, domain: str) -> float:
    """Largest perturbation cost reachable within an ``l_p`` ball of radius ``epsilon``."""
    if epsilon < 0:
        raise DomainError("budget must be nonnegative")
    if cert.p == 0 or domain == "binary":
        k = min(int(math.floor(epsilon + 1e-12)), cert.weights.size)
        if k == 0:
            return 0.0
        return float(np.sum(np.sort(cert.weights)[::-1][:k]))
    if epsilon == 0:
        return 0.0
    return float(epsilon ** cert.p * np.max(cert.weights))


def robust_to_ball(cert: InterfaceCert, epsilon: float, domain: str = "continuous") -> bool:
    """Whether the certificate covers the entire perturbation ball."""
    if domain not in ("continuous", "binary"):
        raise DomainError(f"unknown domain {domain!r}")
    return worst_case_cost(cert, epsilon, domain) < cert.eta
