"""Common mapping interface: fit a transform on a source/target pair, predict.

Every method kind registers here; ``make_method`` builds configured
instances and ``predict_map`` dispatches prediction from a (possibly
deserialized) ``FittedMap`` alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError


@dataclass
class FittedMap:
    """A fitted transform: everything ``predict`` needs, plus diagnostics."""

    kind: str
    params: dict
    hyperparameters: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_jsonable(self):
        return {
            "kind": self.kind,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "hyperparameters": _jsonable(self.hyperparameters),
            "diagnostics": _jsonable(self.diagnostics),
        }

    @classmethod
    def from_jsonable(cls, obj):
        return cls(
            kind=obj["kind"],
            params={k: _revive(v) for k, v in obj["params"].items()},
            hyperparameters=obj.get("hyperparameters", {}),
            diagnostics=obj.get("diagnostics", {}),
        )


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return {"__array__": v.tolist(), "shape": list(v.shape)}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _revive(v):
    if isinstance(v, dict) and "__array__" in v:
        return np.array(v["__array__"], dtype=float).reshape(v["shape"])
    if isinstance(v, dict):
        return {k: _revive(x) for k, x in v.items()}
    return v


class MappingMethod:
    """Base class: subclasses define ``kind``, ``fit`` and static ``predict``."""

    kind = "abstract"
    seeded = False

    def fit(self, source, target) -> FittedMap:
        raise NotImplementedError

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        raise NotImplementedError


_REGISTRY: dict = {}
_PRESETS: dict = {}


def register(cls, kind=None, preset=None):
    _REGISTRY[kind or cls.kind] = cls
    if preset:
        _PRESETS[kind or cls.kind] = preset
    return cls


def method_kinds():
    return sorted(_REGISTRY)


def make_method(kind, seed=None, **hyperparameters) -> MappingMethod:
    """Build a configured method instance for the given kind.

    ``seed`` is forwarded only to methods whose fit is randomized
    (cross-validation shuffles, network initialization).
    """
    if kind not in _REGISTRY:
        raise ConfigError(f"unknown mapping method {kind!r}; known: {method_kinds()}")
    cls = _REGISTRY[kind]
    kwargs = dict(_PRESETS.get(kind, {}))
    kwargs.update(hyperparameters)
    if cls.seeded and seed is not None:
        kwargs["seed"] = seed
    method = cls(**kwargs)
    method.kind = kind  # presets keep their requested name
    return method


def predict_map(fitted: FittedMap, source) -> np.ndarray:
    if fitted.kind not in _REGISTRY:
        raise ConfigError(f"unknown mapping method {fitted.kind!r}")
    return _REGISTRY[fitted.kind].predict(fitted, source)


def as_values(x):
    """Accept a ResponseMatrix or a bare array; return the (S, N) float array."""
    values = getattr(x, "values", x)
    return np.asarray(values, dtype=np.float64)
