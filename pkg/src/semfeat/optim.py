"""Regularized logistic-regression fitting shared by the context model and
the document classifier.

The objective is the average logistic loss plus a penalty on everything but
the bias: (lambda/2)*||w||^2 for L2 or lambda*||w||_1 for L1. The L2 path
delegates line search to scipy's L-BFGS-B; the L1 path is a proximal
gradient loop with backtracking so weights hit exact zeros. Both stop at a
max-norm residual of ``tol`` or after ``max_iter`` iterations and are fully
deterministic (zero initialization, no randomized steps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

from .errors import DataError


@dataclass(frozen=True)
class Penalty:
    """Regularization choice: kind is "l2" or "l1", lam the strength."""

    kind: str
    lam: float

    def __post_init__(self):
        if self.kind not in ("l2", "l1"):
            raise DataError(f"unknown penalty kind {self.kind!r}", code="bad_penalty")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DataError("penalty strength must be finite and >= 0", code="bad_penalty")

    @classmethod
    def l2(cls, lam: float = 1.0) -> "Penalty":
        return cls("l2", lam)

    @classmethod
    def l1(cls, lam: float = 1.0) -> "Penalty":
        return cls("l1", lam)

    def to_json(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam}

    @classmethod
    def from_json(cls, obj: dict) -> "Penalty":
        return cls(obj["kind"], obj["lambda"])


@dataclass
class FitResult:
    """Fitted parameters plus convergence bookkeeping.

    ``weights`` holds the bias at index 0 followed by the feature weights.
    ``history`` records the (penalized) objective at each iterate, starting
    from the initial point, and is nonincreasing.
    """

    weights: np.ndarray
    iterations: int
    objective: float
    converged: bool
    history: list[float]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + exp(z)) without overflow
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _margins(w: np.ndarray, X) -> np.ndarray:
    return np.asarray(X @ w[1:]).ravel() + w[0]


def smooth_loss_grad(w: np.ndarray, X, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Average logistic loss and its gradient, no penalty term.

    X is (n, d) dense or scipy-sparse without a bias column; w is the
    (d+1,) vector with the bias at index 0.
    """
    n = X.shape[0]
    z = _margins(w, X)
    loss = float(np.mean(_softplus(z) - y * z))
    resid = (_sigmoid(z) - y) / n
    grad = np.empty_like(w)
    grad[0] = resid.sum()
    grad[1:] = np.asarray(X.T @ resid).ravel()
    return loss, grad


def logistic_objective(w: np.ndarray, X, y: np.ndarray, penalty: Penalty) -> tuple[float, np.ndarray]:
    """Penalized objective value and gradient at ``w``.

    For L1 the returned gradient is the subgradient using sign(w) (zero at
    zeros); the L1 objective is nonsmooth, so finite-difference checks
    should use the L2 form.
    """
    loss, grad = smooth_loss_grad(w, X, y)
    if penalty.kind == "l2":
        loss += 0.5 * penalty.lam * float(w[1:] @ w[1:])
        grad = grad.copy()
        grad[1:] += penalty.lam * w[1:]
    else:
        loss += penalty.lam * float(np.abs(w[1:]).sum())
        grad = grad.copy()
        grad[1:] += penalty.lam * np.sign(w[1:])
    return loss, grad


def _fit_l2(X, y: np.ndarray, lam: float, tol: float, max_iter: int) -> FitResult:
    penalty = Penalty.l2(lam)
    history: list[float] = [logistic_objective(np.zeros(X.shape[1] + 1), X, y, penalty)[0]]

    def fun(w):
        return logistic_objective(w, X, y, penalty)

    def callback(wk):
        history.append(logistic_objective(wk, X, y, penalty)[0])

    res = optimize.minimize(
        fun, np.zeros(X.shape[1] + 1), jac=True, method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-18},
    )
    _, grad = fun(res.x)
    converged = bool(np.max(np.abs(grad)) <= tol * (1 + 1e-9))
    return FitResult(weights=res.x, iterations=int(res.nit),
                     objective=float(fun(res.x)[0]), converged=converged,
                     history=history)


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _fit_l1(X, y: np.ndarray, lam: float, tol: float, max_iter: int) -> FitResult:
    w = np.zeros(X.shape[1] + 1)

    def full_objective(wv):
        return smooth_loss_grad(wv, X, y)[0] + lam * float(np.abs(wv[1:]).sum())

    history = [full_objective(w)]
    step = 1.0
    iterations = 0
    converged = False
    for _ in range(max_iter):
        loss, grad = smooth_loss_grad(w, X, y)
        # backtrack until the quadratic majorizer at step size `step` holds
        while True:
            cand = w - step * grad
            cand[1:] = _soft_threshold(cand[1:], step * lam)
            delta = cand - w
            cand_loss = smooth_loss_grad(cand, X, y)[0]
            bound = loss + float(grad @ delta) + float(delta @ delta) / (2 * step)
            if cand_loss <= bound + 1e-12 or step < 1e-16:
                break
            step *= 0.5
        iterations += 1
        residual = float(np.max(np.abs(delta))) / step
        w = cand
        history.append(full_objective(w))
        if residual <= tol:
            converged = True
            break
        step = min(step * 1.25, 1e6)
    return FitResult(weights=w, iterations=iterations,
                     objective=history[-1], converged=converged, history=history)


def fit_logistic(X, y, penalty: Penalty, tol: float = 1e-6, max_iter: int = 1000) -> FitResult:
    """Fit a logistic model on (X, y) with the given penalty.

    Requires both classes present and finite features. Deterministic:
    repeated calls on identical inputs return bit-identical weights.
    """
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ", code="shape_mismatch")
    classes = np.unique(y)
    if not np.array_equal(classes, np.array([0.0, 1.0])):
        if classes.size < 2:
            raise DataError("training data contains a single class", code="single_class")
        raise DataError("labels must be 0/1", code="bad_labels")
    data = X.data if sparse.issparse(X) else X
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite feature value in training data", code="non_finite")
    if penalty.kind == "l2":
        return _fit_l2(X, y, penalty.lam, tol, max_iter)
    return _fit_l1(X, y, penalty.lam, tol, max_iter)
