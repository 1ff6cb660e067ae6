"""Composite objectives ``P = f + R`` with component oracles.

``f`` is the average of ``n`` smooth components ``f_i`` sharing one Lipschitz
constant ``L``; ``R`` is a closed convex regularizer with a closed-form
proximal operator. Besides the per-component oracles every problem may carry
vectorized fast paths, which the solvers use when present.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.special import expit

__all__ = [
    "DimensionError",
    "Regularizer",
    "CompositeProblem",
    "full_gradient",
    "objective_value",
    "prox_step",
    "soft_threshold",
    "linear_problem",
    "logistic_component",
    "ridge_component",
]


class DimensionError(ValueError):
    """A point does not live in the problem's space."""


def soft_threshold(z, t):
    """Componentwise ``sign(z) * max(|z| - t, 0)``."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@dataclass(frozen=True)
class Regularizer:
    """Simple regularizer with a closed-form prox.

    ``kind`` is one of ``zero``, ``l2``, ``l1``, ``elastic_net``. The l2 term is
    ``(lam/2)||x||^2``; the elastic net is ``lam*||x||_1 + (lam2/2)||x||^2``.
    """

    kind: str = "zero"
    lam: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "l2", "l1", "elastic_net"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0 or self.lam2 < 0:
            raise ValueError("regularization weights must be nonnegative")

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls("zero")

    @classmethod
    def l2(cls, lam: float) -> "Regularizer":
        return cls("l2", float(lam))

    @classmethod
    def l1(cls, lam: float) -> "Regularizer":
        return cls("l1", float(lam))

    @classmethod
    def elastic_net(cls, lam1: float, lam2: float) -> "Regularizer":
        return cls("elastic_net", float(lam1), float(lam2))

    @property
    def nu_R_intrinsic(self) -> float:
        """Strong convexity modulus of ``R`` itself."""
        if self.kind == "l2":
            return self.lam
        if self.kind == "elastic_net":
            return self.lam2
        return 0.0

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "l2":
            return 0.5 * self.lam * float(x @ x)
        if self.kind == "l1":
            return self.lam * float(np.abs(x).sum())
        return self.lam * float(np.abs(x).sum()) + 0.5 * self.lam2 * float(x @ x)

    __call__ = value

    def prox(self, h: float, z):
        """Return ``argmin_x 0.5*||x - z||^2 + h*R(x)``."""
        if not h > 0:
            raise ValueError(f"prox stepsize must be positive, got {h}")
        z = np.asarray(z, dtype=float)
        if self.kind == "zero":
            return z.copy()
        if self.kind == "l2":
            return z / (1.0 + h * self.lam)
        if self.kind == "l1":
            return soft_threshold(z, h * self.lam)
        return soft_threshold(z, h * self.lam) / (1.0 + h * self.lam2)


def prox_step(r: Regularizer, h: float, z):
    return r.prox(h, z)


GradOracle = Callable[[int, np.ndarray], np.ndarray]
ValueOracle = Callable[[int, np.ndarray], float]


@dataclass(frozen=True)
class CompositeProblem:
    """``P(x) = (1/n) sum_i f_i(x) + R(x)``.

    Parameters
    ----------
    n, d : int
        Number of components and dimension.
    component_grad, component_value : callable
        ``(i, x) -> grad f_i(x)`` and ``(i, x) -> f_i(x)``, with 0-based ``i``.
    regularizer : Regularizer
    L : float
        Common Lipschitz constant of the component gradients.
    mu : float
        Strong convexity modulus of ``P``.
    nu_f, nu_R : float
        Known lower bounds on the strong convexity of ``f`` and ``R``.
    batch_grad_oracle : callable, optional
        ``(idx, x) -> mean of grad f_i(x) over idx``.
    full_grad_oracle : callable, optional
        ``x -> grad f(x)``.
    smooth_value_oracle : callable, optional
        ``x -> f(x)``.
    batch_grad_diff_oracle : callable, optional
        ``(idx, y, x) -> mean of grad f_i(y) - grad f_i(x) over idx``.
    """

    n: int
    d: int
    component_grad: GradOracle
    component_value: ValueOracle
    regularizer: Regularizer
    L: float
    mu: float
    nu_f: float = 0.0
    nu_R: float = 0.0
    batch_grad_oracle: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    full_grad_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth_value_oracle: Optional[Callable[[np.ndarray], float]] = None
    batch_grad_diff_oracle: Optional[Callable] = None
    name: str = ""
    data: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.nu_f < 0 or self.nu_R < 0:
            raise ValueError("strong convexity lower bounds must be nonnegative")
        if self.nu_f + self.nu_R > self.mu * (1 + 1e-12):
            raise ValueError(
                f"nu_f + nu_R = {self.nu_f + self.nu_R} exceeds mu = {self.mu}"
            )

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionError(f"expected a point of shape ({self.d},), got {x.shape}")
        return x

    def full_gradient(self, x) -> np.ndarray:
        x = self.check_point(x)
        if self.full_grad_oracle is not None:
            return self.full_grad_oracle(x)
        g = np.zeros(self.d)
        for i in range(self.n):
            g += self.component_grad(i, x)
        return g / self.n

    def mean_gradient(self, idx, x) -> np.ndarray:
        """Average of the component gradients over the index batch ``idx``."""
        if self.batch_grad_oracle is not None:
            return self.batch_grad_oracle(idx, x)
        g = np.zeros(self.d)
        for i in idx:
            g += self.component_grad(int(i), x)
        return g / len(idx)

    def mean_gradient_difference(self, idx, y, x) -> np.ndarray:
        """Average of ``grad f_i(y) - grad f_i(x)`` over ``idx``."""
        if self.batch_grad_diff_oracle is not None:
            return self.batch_grad_diff_oracle(idx, y, x)
        return self.mean_gradient(idx, y) - self.mean_gradient(idx, x)

    def smooth_value(self, x) -> float:
        x = self.check_point(x)
        if self.smooth_value_oracle is not None:
            return float(self.smooth_value_oracle(x))
        return sum(self.component_value(i, x) for i in range(self.n)) / self.n

    def objective_value(self, x) -> float:
        return self.smooth_value(x) + self.regularizer.value(x)

    __call__ = objective_value

    def prox(self, h: float, z) -> np.ndarray:
        return self.regularizer.prox(h, z)


def full_gradient(p: CompositeProblem, x) -> np.ndarray:
    return p.full_gradient(x)


def objective_value(p: CompositeProblem, x) -> float:
    return p.objective_value(x)


# -- linear models ------------------------------------------------------------

def _logistic_loss(margin, y):
    return np.logaddexp(0.0, -y * margin)


def _logistic_deriv(margin, y):
    return -y * expit(-y * margin)


def _squared_loss(margin, y):
    return 0.5 * (margin - y) ** 2


def _squared_deriv(margin, y):
    return margin - y


_LOSSES = {
    "logistic": (_logistic_loss, _logistic_deriv),
    "ridge": (_squared_loss, _squared_deriv),
}


def _design_matrix(matrix):
    # dense storage is faster for the small, dense synthetic sets
    if sparse.issparse(matrix):
        n, d = matrix.shape
        if matrix.nnz >= 0.25 * n * d or n * d <= 10_000:
            return np.asarray(matrix.toarray(), dtype=float)
        return sparse.csr_matrix(matrix, dtype=float)
    return np.asarray(matrix, dtype=float)


def _row(A, i) -> np.ndarray:
    if sparse.issparse(A):
        return A.getrow(i).toarray().ravel()
    return A[i]


def _row_sq_norms(A) -> np.ndarray:
    if sparse.issparse(A):
        return np.asarray(A.multiply(A).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", A, A)


def _min_curvature(A) -> float:
    """Smallest eigenvalue of ``A^T A / n``, or 0 when ``d`` is too large."""
    n, d = A.shape
    if d > 2000:
        return 0.0
    M = A.T @ A
    if sparse.issparse(M):
        M = M.toarray()
    return max(float(np.linalg.eigvalsh(np.asarray(M) / n)[0]), 0.0)


def linear_problem(dataset, loss: str, regularizer: Regularizer,
                   ridge_in_f: float = 0.0, name: str = "") -> CompositeProblem:
    """Build ``f_i(x) = loss(<a_i, x>, y_i) + (ridge_in_f/2)||x||^2``.

    ``L`` uses the per-row bound ``c * max_i ||a_i||^2 + ridge_in_f`` with
    ``c = 1/4`` for the logistic loss and ``c = 1`` for the squared loss.
    """
    if loss not in _LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    labels = np.asarray(dataset.labels, dtype=float)
    n = len(labels)
    if n == 0:
        raise ValueError("dataset has no rows")
    A = _design_matrix(dataset.matrix)
    if A.shape[0] != n:
        raise ValueError("row count does not match label count")
    d = A.shape[1]
    if loss == "logistic" and not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("logistic loss needs labels in {-1, +1}")
    value_fn, deriv_fn = _LOSSES[loss]
    lam_f = float(ridge_in_f)
    if lam_f < 0:
        raise ValueError("ridge_in_f must be nonnegative")

    curvature = 0.25 if loss == "logistic" else 1.0
    L = curvature * float(_row_sq_norms(A).max()) + lam_f
    if L <= 0:
        raise ValueError("all rows are zero; the smooth part has no curvature")

    nu_f = lam_f
    nu_R = regularizer.nu_R_intrinsic
    mu = nu_f + nu_R
    if loss == "ridge":
        mu += _min_curvature(A)

    def component_grad(i, x):
        a = _row(A, i)
        return a * deriv_fn(a @ x, labels[i]) + lam_f * x

    def component_value(i, x):
        a = _row(A, i)
        return float(value_fn(a @ x, labels[i])) + 0.5 * lam_f * float(x @ x)

    def batch_grad(idx, x):
        Ab = A[idx]
        r = deriv_fn(Ab @ x, labels[idx])
        return (Ab.T @ r) / len(idx) + lam_f * x

    def batch_grad_diff(idx, y, x):
        Ab = A[idx]
        yb = labels[idx]
        r = deriv_fn(Ab @ y, yb) - deriv_fn(Ab @ x, yb)
        return (Ab.T @ r) / len(idx) + lam_f * (y - x)

    def full_grad(x):
        return (A.T @ deriv_fn(A @ x, labels)) / n + lam_f * x

    def smooth_value(x):
        return float(np.mean(value_fn(A @ x, labels))) + 0.5 * lam_f * float(x @ x)

    return CompositeProblem(
        n=n, d=d,
        component_grad=component_grad,
        component_value=component_value,
        regularizer=regularizer,
        L=L, mu=mu, nu_f=nu_f, nu_R=nu_R,
        batch_grad_oracle=batch_grad,
        full_grad_oracle=full_grad,
        smooth_value_oracle=smooth_value,
        batch_grad_diff_oracle=batch_grad_diff,
        name=name or loss,
        data=(A, labels),
    )


def logistic_component(dataset, lam: float, placement: str = "in_R") -> CompositeProblem:
    """L2-regularized logistic regression.

    With ``placement="in_R"`` the penalty ``(lam/2)||x||^2`` is the regularizer
    and is handled exactly by the prox; with ``"in_f"`` every component carries
    it and ``R = 0``.
    """
    if placement == "in_R":
        return linear_problem(dataset, "logistic", Regularizer.l2(lam))
    if placement == "in_f":
        return linear_problem(dataset, "logistic", Regularizer.zero(), ridge_in_f=lam)
    raise ValueError(f"placement must be 'in_R' or 'in_f', got {placement!r}")


def ridge_component(dataset, lam: float) -> CompositeProblem:
    """Least squares ``0.5*(<a_i,x> - y_i)^2`` with ``R = (lam/2)||x||^2``.

    ``mu`` is exact: ``lam`` plus the smallest eigenvalue of ``A^T A / n``.
    """
    return linear_problem(dataset, "ridge", Regularizer.l2(lam))
