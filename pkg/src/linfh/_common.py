"""Shared verdict labels, exceptions and JSON helpers."""

from __future__ import annotations

import dataclasses
import enum
import math
from fractions import Fraction
from typing import Any

import numpy as np


class Verdict(str, enum.Enum):
    """Horizon-qualified outcomes; no verdict claims more than the samples show."""

    ADMISSIBLE = "admissible-at-horizon"
    REFUTED = "refuted"
    CONSISTENT = "consistent-at-horizon"
    NOT_WITNESSED = "not-witnessed-at-horizon"
    REFUTED_AT_HORIZON = "refuted-at-horizon"
    REFUTED_AT_CUTOFF = "refuted-at-cutoff"
    CONVERGENT = "convergent-at-horizon"
    DIVERGENT = "divergent-at-horizon"
    PASS = "pass"
    FAIL = "fail"

    def __str__(self) -> str:
        return self.value


class InvalidWeightError(ValueError):
    """A weight took a non-positive (or NaN) value on its domain."""


class InvalidInputError(ValueError):
    pass


class ResolutionError(ValueError):
    """A sampled function lacks nodes at the requested dyadic level."""


class WindowError(ValueError):
    """Data reaches outside the window it is evaluated on."""


class NormalizationError(ValueError):
    """A step-normalized weight (rho(x) = rho([x])) was required."""


class HypothesisViolation(ValueError):
    """A theorem hypothesis fails on the sampled window."""


class HypothesisWarning(UserWarning):
    pass


class GenerationError(ValueError):
    pass


class SpecInconsistencyError(ValueError):
    """Two construction terms landed on the same coordinate."""


class HorizonTooSmallError(ValueError):
    pass


class ContractError(ValueError):
    pass


def to_jsonable(obj: Any) -> Any:
    """Recursively convert reports to plain JSON types (sorted, deterministic)."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_json"):
            return to_jsonable(obj.to_json())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [to_jsonable(v) for v in obj]
        if isinstance(obj, (set, frozenset)):
            items.sort(key=repr)
        return items
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj
