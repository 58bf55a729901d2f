"""Toy two-class multi-output models with known locality.

Inputs are flattened ``rows x cols`` images. Each output sits on one pixel
(its center), and distance between pixels is the Chebyshev distance.

``WindowMajority`` is strictly local: output ``n`` sees only the pixels
within ``radius`` of its center and reports the majority bit there.
``SoftLogistic`` sees every pixel, with weights decaying exponentially in
the distance to the center.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ShapeError


def _positions(layout) -> np.ndarray:
    rows, cols = layout
    idx = np.arange(rows * cols)
    return np.stack([idx // cols, idx % cols], axis=1)


def pixel_distances(layout, centers) -> np.ndarray:
    """Chebyshev distance from each center (rows) to each pixel (columns)."""
    pos = _positions(layout)
    ctr = pos[np.asarray(centers, dtype=int)]
    return np.max(np.abs(ctr[:, None, :] - pos[None, :, :]), axis=2)


def _check_layout(layout, centers):
    rows, cols = (int(v) for v in layout)
    if rows < 1 or cols < 1:
        raise ConfigError(f"layout must be positive, got {layout}")
    centers = tuple(int(c) for c in centers)
    if not centers:
        raise ConfigError("need at least one output")
    if any(not 0 <= c < rows * cols for c in centers):
        raise ConfigError("output center outside the input")
    return (rows, cols), centers


@dataclass(frozen=True, eq=False)
class WindowMajority:
    layout: tuple
    centers: tuple
    radius: int

    def __post_init__(self):
        layout, centers = _check_layout(self.layout, self.centers)
        if self.radius < 0:
            raise ConfigError("window radius must be nonnegative")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radius", int(self.radius))
        fields = (pixel_distances(layout, centers) <= self.radius).astype(float)
        fields.setflags(write=False)
        object.__setattr__(self, "_fields", fields)

    kind = "window_majority"

    @property
    def d_in(self) -> int:
        return self.layout[0] * self.layout[1]

    @property
    def d_out(self) -> int:
        return len(self.centers)

    def receptive_fields(self) -> np.ndarray:
        """Binary ``(D_out, D_in)`` mask of the pixels each output reads."""
        return self._fields

    def class_scores(self, z: np.ndarray) -> np.ndarray:
        bits = (np.asarray(z, dtype=float) > 0.5).astype(float)
        frac = bits @ self._fields.T / self._fields.sum(axis=1)
        return np.stack([1.0 - frac, frac], axis=-1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "layout": list(self.layout), "centers": list(self.centers), "radius": self.radius}

    @classmethod
    def line(cls, d_in: int, centers: Sequence[int], radius: int) -> "WindowMajority":
        return cls((1, d_in), tuple(centers), radius)


@dataclass(frozen=True, eq=False)
class SoftLogistic:
    """Logistic score of ``sum_d w_nd (2 x_d - 1) + bias_n`` for class 1.

    ``w_nd = scale * sign_nd * exp(-decay * dist(d, center_n))``.
    """

    layout: tuple
    centers: tuple
    decay: float
    signs: np.ndarray
    scale: float = 1.0
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        layout, centers = _check_layout(self.layout, self.centers)
        if not self.decay > 0:
            raise ConfigError("decay rate must be positive")
        signs = np.asarray(self.signs, dtype=float).reshape(len(centers), layout[0] * layout[1])
        if not np.all(np.isin(signs, (-1.0, 0.0, 1.0))):
            raise ConfigError("signs must be -1, 0 or +1")
        bias = np.zeros(len(centers)) if self.bias is None else np.asarray(self.bias, dtype=float).reshape(len(centers))
        weights = self.scale * signs * np.exp(-self.decay * pixel_distances(layout, centers))
        for arr in (signs, bias, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "decay", float(self.decay))
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "weights", weights)

    kind = "soft_logistic"

    @property
    def d_in(self) -> int:
        return self.layout[0] * self.layout[1]

    @property
    def d_out(self) -> int:
        return len(self.centers)

    def logits(self, z: np.ndarray) -> np.ndarray:
        return (2.0 * np.asarray(z, dtype=float) - 1.0) @ self.weights.T + self.bias

    def class_scores(self, z: np.ndarray) -> np.ndarray:
        one = expit(self.logits(z))
        return np.stack([1.0 - one, one], axis=-1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "layout": list(self.layout),
            "centers": list(self.centers),
            "decay": self.decay,
            "scale": self.scale,
            "signs": [[float(v) for v in row] for row in self.signs],
            "bias": [float(v) for v in self.bias],
        }

    @classmethod
    def generate(cls, layout, centers, decay: float, seed: int, scale: float = 4.0, bias_scale: float = 0.5) -> "SoftLogistic":
        """Random signs and biases drawn deterministically from ``seed``."""
        layout, centers = _check_layout(layout, centers)
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        signs = rng.choice([-1.0, 1.0], size=(len(centers), layout[0] * layout[1]))
        bias = bias_scale * rng.standard_normal(len(centers))
        return cls(layout, centers, decay, signs, scale, bias)


Model = Union[WindowMajority, SoftLogistic]


def model_from_dict(data: dict) -> Model:
    data = dict(data)
    kind = data.pop("kind", None)
    try:
        if kind == "window_majority":
            return WindowMajority(tuple(data.pop("layout")), tuple(data.pop("centers")), int(data.pop("radius")), **data)
        if kind == "soft_logistic":
            return SoftLogistic(tuple(data.pop("layout")), tuple(data.pop("centers")), **data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind} model parameters: {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def predict_batch(model: Model, z) -> np.ndarray:
    """Class scores of shape ``(m, D_out, 2)`` for inputs of shape ``(m, D_in)``."""
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[1] != model.d_in:
        raise ShapeError(f"expected inputs of shape (m, {model.d_in}), got {z.shape}")
    return model.class_scores(z)


def predict(model: Model, x) -> tuple[np.ndarray, np.ndarray]:
    """Labels and class scores for a single input. Ties go to class 0."""
    x = np.asarray(x)
    if x.ndim != 1 or x.size != model.d_in:
        raise ShapeError(f"expected an input of length {model.d_in}, got shape {x.shape}")
    scores = model.class_scores(x[None, :])[0]
    return np.argmax(scores, axis=1), scores


def masked_eval(model: Model, x, x_prime, psi) -> np.ndarray:
    """Labels when only the pixels selected by ``psi`` are taken from ``x_prime``.

    ``psi`` is one mask for all outputs or a ``(D_out, D_in)`` stack of masks.
    """
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 1:
        return predict(model, psi * x_prime + (1 - psi) * x)[0]
    if psi.shape != (model.d_out, model.d_in):
        raise ShapeError("per-output masks must have shape (D_out, D_in)")
    spliced = psi * x_prime[None, :] + (1 - psi) * x[None, :]
    scores = model.class_scores(spliced)
    return np.argmax(scores[np.arange(model.d_out), np.arange(model.d_out)], axis=1)
