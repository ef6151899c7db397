"""Named parameter spaces and constraint transforms.

Samplers work on unconstrained coordinates; each entry of a space declares
how its coordinates map to the constrained scale and contributes the
log-Jacobian of the inverse map to the log density.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Transform(Enum):
    IDENTITY = "identity"
    LOG_POSITIVE = "log_positive"  # (0, inf) <-> R via log/exp
    LOGIT_UNIT = "logit_unit"      # (0, 1) <-> R via logit/sigmoid


@dataclass(frozen=True)
class Entry:
    name: str
    shape: int
    transform: Transform

    def __post_init__(self):
        if self.shape < 1:
            raise ValueError(f"entry {self.name!r}: shape must be positive")


class DimensionError(ValueError):
    """Vector length does not match the space."""


class ParameterSpace:
    """Ordered collection of named, transform-aware parameter blocks."""

    def __init__(self, entries):
        ents = []
        for e in entries:
            if isinstance(e, Entry):
                ents.append(e)
            else:
                name, shape, transform = e
                ents.append(Entry(name, int(shape), transform))
        names = [e.name for e in ents]
        if len(set(names)) != len(names):
            raise ValueError("entry names must be unique")
        self.entries = tuple(ents)
        self.total_dim = sum(e.shape for e in ents)
        # per-coordinate transform masks, for vectorized maps
        codes = np.concatenate(
            [np.full(e.shape, _CODE[e.transform], dtype=np.int8) for e in ents]
        ) if ents else np.zeros(0, dtype=np.int8)
        self._log_positive = codes == 1
        self._logit_unit = codes == 2
        self._nonidentity = codes != 0

    def column_names(self):
        out = []
        for e in self.entries:
            if e.shape == 1:
                out.append(e.name)
            else:
                out.extend(f"{e.name}[{i}]" for i in range(e.shape))
        return out

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.total_dim:
            raise DimensionError(
                f"expected {self.total_dim} coordinates, got {v.shape[-1]}"
            )
        return v

    def to_constrained(self, v):
        """Map unconstrained coordinates to the constrained scale."""
        v = self._check(v)
        x = v.copy()
        lp, lu = self._log_positive, self._logit_unit
        x[..., lp] = np.exp(v[..., lp])
        x[..., lu] = _sigmoid(v[..., lu])
        return x

    def to_unconstrained(self, x):
        """Inverse of :meth:`to_constrained`; raises on out-of-domain input."""
        x = self._check(x)
        v = x.copy()
        lp, lu = self._log_positive, self._logit_unit
        if np.any(x[..., lp] <= 0):
            raise ValueError("log-positive coordinates must be > 0")
        if np.any((x[..., lu] <= 0) | (x[..., lu] >= 1)):
            raise ValueError("logit-unit coordinates must lie in (0, 1)")
        v[..., lp] = np.log(x[..., lp])
        u = x[..., lu]
        v[..., lu] = np.log(u) - np.log1p(-u)
        return v

    def log_jacobian(self, v):
        """Log |det J| of the unconstrained -> constrained map at v."""
        v = self._check(v)
        total = float(np.sum(v[..., self._log_positive]))
        u = v[..., self._logit_unit]
        # log sigmoid'(u) = -softplus(u) - softplus(-u)
        total += float(np.sum(-np.logaddexp(0.0, u) - np.logaddexp(0.0, -u)))
        return total

    def __repr__(self):
        parts = ", ".join(f"{e.name}({e.shape},{e.transform.value})" for e in self.entries)
        return f"ParameterSpace[{parts}]"


_CODE = {Transform.IDENTITY: 0, Transform.LOG_POSITIVE: 1, Transform.LOGIT_UNIT: 2}


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def as_vector(space, values):
    """Validate a flat unconstrained vector for ``space``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.shape[0] != space.total_dim:
        raise DimensionError(
            f"expected a flat vector of length {space.total_dim}, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("parameter vector must be finite")
    return v
