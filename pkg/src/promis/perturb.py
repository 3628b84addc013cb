"""Randomised map variants from a per-feature affine error model.

Every feature ``i`` of sample ``n`` gets its own linear map ``Phi`` (rotation
times scale) and translation ``t``, applied to all of its vertices about the
vertex centroid ``c``::

    v' = Phi (v - c) + c + t

The draws come from a Philox stream keyed by ``(seed, n, i)``, so any sample
can be regenerated on its own, in any order, on any worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from promis.errors import InvalidArgumentError
from promis.geo import FeatureMap

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PerturbationModel:
    translation_std_east: float = 0.0
    translation_std_north: float = 0.0
    rotation_std: float = 0.0
    scale_std: float = 0.0

    def __post_init__(self):
        for name in ("translation_std_east", "translation_std_north", "rotation_std", "scale_std"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be a finite value >= 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def is_zero(self) -> bool:
        return not any(
            (self.translation_std_east, self.translation_std_north, self.rotation_std, self.scale_std)
        )


@dataclass(frozen=True)
class MapSample:
    variant: FeatureMap
    sample_index: int


def feature_stream(seed: int, sample_index: int, feature_index: int) -> np.random.Generator:
    if not (0 <= sample_index < 2**32 and 0 <= feature_index < 2**32):
        raise InvalidArgumentError("sample and feature indices must fit in 32 bits")
    key = np.array([seed & _MASK64, (sample_index << 32) | feature_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_affine(model: PerturbationModel, seed: int, sample_index: int, feature_index: int):
    """Return ``(Phi - I, t)`` for one feature of one sample.

    The deviation from identity is returned instead of ``Phi`` so that a
    zero-noise model leaves coordinates bit-for-bit untouched.
    """
    z = feature_stream(seed, sample_index, feature_index).standard_normal(4)
    t = np.array([z[0] * model.translation_std_east, z[1] * model.translation_std_north])
    angle = z[2] * model.rotation_std
    scale = 1.0 + z[3] * model.scale_std
    c, s = math.cos(angle), math.sin(angle)
    delta = np.array([[scale * c - 1.0, -scale * s], [scale * s, scale * c - 1.0]])
    return delta, t


def perturb_vertices(vertices: np.ndarray, centroid: np.ndarray, delta: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = vertices + t
    if delta.any():
        out = out + (vertices - centroid) @ delta.T
    return out


def sample_map(fmap: FeatureMap, model: PerturbationModel, seed: int, n: int) -> MapSample:
    features = []
    for i, feature in enumerate(fmap.features):
        if feature.fixed or model.is_zero:
            features.append(feature)
            continue
        delta, t = draw_affine(model, seed, n, i)
        features.append(feature.with_vertices(perturb_vertices(feature.vertices, feature.centroid(), delta, t)))
    return MapSample(fmap.with_features(features), n)


def sample_maps(fmap: FeatureMap, model: PerturbationModel, seed: int, count: int) -> list[MapSample]:
    if count < 1:
        raise InvalidArgumentError(f"number of map samples must be >= 1, got {count}")
    return [sample_map(fmap, model, seed, n) for n in range(count)]
