"""The differentiable log-density contract shared by all models and samplers.

A model is an unnormalized log density over unconstrained coordinates
(Jacobian corrections included) together with its analytic gradient.
Out-of-support points return -inf; the gradient is not meaningful there.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .space import ParameterSpace


class GradientCheckError(RuntimeError):
    """Raised when a finite-difference check cannot be evaluated.

    ``coordinate`` is the index of the coordinate whose perturbation produced
    a non-finite log density, or None when the center point itself failed.
    """

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


@dataclass(frozen=True)
class Model:
    """Immutable bundle of a parameter space and a differentiable log density.

    ``logp_grad`` maps an unconstrained vector to ``(log_density, gradient)``
    and must be safe to call concurrently.
    """

    model_id: str
    space: ParameterSpace
    logp_grad: Callable[[np.ndarray], tuple]

    def log_density(self, v):
        return self.logp_grad(np.asarray(v, dtype=float))[0]

    def gradient(self, v):
        return self.logp_grad(np.asarray(v, dtype=float))[1]

    def log_density_and_gradient(self, v):
        return self.logp_grad(np.asarray(v, dtype=float))


def check_gradient(model, v, step=1e-5):
    """Max relative error between the analytic gradient and central FD.

    The step for coordinate k is ``step * max(1, |v_k|)``; the error is
    ``|analytic - fd| / max(1, |analytic|)``.
    """
    v = np.asarray(v, dtype=float)
    f0, g = model.log_density_and_gradient(v)
    if not np.isfinite(f0):
        raise GradientCheckError(
            f"model {model.model_id!r}: log density is not finite at the "
            "evaluation point"
        )
    names = model.space.column_names()
    worst = 0.0
    for k in range(v.shape[0]):
        h = step * max(1.0, abs(v[k]))
        vp = v.copy()
        vp[k] += h
        vm = v.copy()
        vm[k] -= h
        fp = model.log_density(vp)
        fm = model.log_density(vm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise GradientCheckError(
                f"model {model.model_id!r}: non-finite log density while "
                f"perturbing coordinate {k} ({names[k]})",
                coordinate=k,
            )
        fd = (fp - fm) / (2.0 * h)
        err = abs(g[k] - fd) / max(1.0, abs(g[k]))
        worst = max(worst, err)
    return worst
