"""Per-observation residual, score and Hessian terms of a residual-based model."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ScorePanel:
    """Residuals and their parameter derivatives over one sub-sample.

    For the objective ``l_t = -e_t**2 / 2`` the score is ``D_t = -e_t * grad_t``
    and the Hessian term is ``P_t = grad_t grad_t' + e_t * hess_t``, which is
    exactly ``-d^2 l_t / d lam d lam'``.

    Attributes
    ----------
    eps : ndarray, shape (L,)
        Residuals ``e_t``.
    grad : ndarray, shape (L, m)
        ``d e_t / d lam``.
    hess : ndarray, shape (L, m, m)
        ``d^2 e_t / d lam d lam'``.
    """

    eps: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    @property
    def length(self) -> int:
        return self.eps.shape[0]

    @property
    def dim(self) -> int:
        return self.grad.shape[1]

    @cached_property
    def objective_terms(self) -> np.ndarray:
        return -0.5 * self.eps**2

    @cached_property
    def scores(self) -> np.ndarray:
        """``D_t``, shape (L, m)."""
        return -self.grad * self.eps[:, None]

    @cached_property
    def hessian_terms(self) -> np.ndarray:
        """``P_t``, shape (L, m, m)."""
        return np.einsum("ti,tj->tij", self.grad, self.grad) + self.hess * self.eps[:, None, None]

    def objective(self) -> float:
        return float(self.objective_terms.sum())

    def score_sum(self) -> np.ndarray:
        return self.scores.sum(axis=0)

    def hessian_sum(self) -> np.ndarray:
        """``sum_t P_t`` (the negative Hessian of the summed objective)."""
        g = self.grad
        return g.T @ g + np.tensordot(self.eps, self.hess, axes=1)

    def outer_sum(self) -> np.ndarray:
        """``sum_t D_t D_t'``."""
        s = self.scores
        return s.T @ s
