"""Linear classifier families: ridge, perceptron, passive-aggressive,
hinge-loss subgradient descent (the linear-SVM and SGD configurations),
and full-batch logistic regression.

All solvers consume feature rows already scaled to [0, 1] and labels as
booleans; internally labels become +/-1. Decision scores are the raw
margin ``w . x + b`` except logistic regression, which returns the
positive-class probability.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NonConvergenceWarning
from ..rng import keyed_rng


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float
    link: str = "margin"  # "margin" or "logistic"

    def score(self, X):
        z = np.asarray(X, dtype=float) @ self.w + self.b
        if self.link == "logistic":
            return 1.0 / (1.0 + np.exp(-z))
        return z

    def describe(self):
        return {"weights": [float(v) for v in self.w], "intercept": float(self.b), "link": self.link}


def _signed(y):
    return np.where(np.asarray(y, dtype=bool), 1.0, -1.0)


# ---------------------------------------------------------------------------
# Ridge classifier: closed-form normal equations on +/-1 targets
# ---------------------------------------------------------------------------

def fit_ridge(X, y, alpha):
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    n, d = X.shape
    Z = np.hstack([X, np.ones((n, 1))])
    penalty = np.diag(np.append(np.full(d, float(alpha)), 0.0))  # intercept unpenalized
    beta = np.linalg.solve(Z.T @ Z + penalty, Z.T @ t)
    return LinearModel(w=beta[:d], b=float(beta[d]))


# ---------------------------------------------------------------------------
# Perceptron / passive-aggressive: online updates with seeded epoch shuffles
# ---------------------------------------------------------------------------

def fit_perceptron(X, y, epochs=50, seed=0):
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    mistakes = -1
    for epoch in range(epochs):
        order = keyed_rng("sepsisaudit.learn.perceptron", seed, epoch).permutation(n)
        mistakes = 0
        for i in order:
            if t[i] * (X[i] @ w + b) <= 0.0:
                w += t[i] * X[i]
                b += t[i]
                mistakes += 1
        if mistakes == 0:
            break
    if mistakes:
        warnings.warn(
            f"perceptron: {mistakes} mistakes after {epochs} epochs",
            NonConvergenceWarning,
        )
    return LinearModel(w=w, b=b)


def fit_passive_aggressive(X, y, C=1.0, epochs=50, seed=0):
    # PA-I: tau = min(C, loss / ||x~||^2) with the bias absorbed as a unit feature
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    n, d = X.shape
    sq_norms = np.einsum("ij,ij->i", X, X) + 1.0
    w = np.zeros(d)
    b = 0.0
    for epoch in range(epochs):
        order = keyed_rng("sepsisaudit.learn.pa", seed, epoch).permutation(n)
        for i in order:
            loss = max(0.0, 1.0 - t[i] * (X[i] @ w + b))
            if loss > 0.0:
                tau = min(float(C), loss / sq_norms[i])
                w += tau * t[i] * X[i]
                b += tau * t[i]
    return LinearModel(w=w, b=b)


# ---------------------------------------------------------------------------
# Hinge-loss subgradient descent (linear SVC and SGD families)
# ---------------------------------------------------------------------------

def _penalty_value(w, alpha, penalty, l1_ratio):
    if penalty == "l2":
        return alpha * 0.5 * float(w @ w)
    if penalty == "l1":
        return alpha * float(np.abs(w).sum())
    if penalty == "en":
        return alpha * (l1_ratio * float(np.abs(w).sum()) + (1.0 - l1_ratio) * 0.5 * float(w @ w))
    raise ValueError(f"unknown penalty {penalty!r}")


def hinge_objective(wb, X, y, alpha, penalty="l2", l1_ratio=0.15):
    """Regularized mean hinge loss at parameter vector [w..., b]."""
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    w, b = np.asarray(wb[:-1], dtype=float), float(wb[-1])
    margins = t * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins).mean()
    return hinge + _penalty_value(w, alpha, penalty, l1_ratio)


def hinge_gradient(wb, X, y, alpha, penalty="l2", l1_ratio=0.15):
    """Full-batch (sub)gradient of :func:`hinge_objective` at [w..., b].

    Valid wherever no margin sits exactly at 1 and, for l1/en, no weight
    is exactly 0 (the objective is differentiable there).
    """
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    w, b = np.asarray(wb[:-1], dtype=float), float(wb[-1])
    margins = t * (X @ w + b)
    active = margins < 1.0
    n = X.shape[0]
    gw = -(t[active, None] * X[active]).sum(axis=0) / n
    gb = -t[active].sum() / n
    if penalty == "l2":
        gw = gw + alpha * w
    elif penalty == "l1":
        gw = gw + alpha * np.sign(w)
    elif penalty == "en":
        gw = gw + alpha * (l1_ratio * np.sign(w) + (1.0 - l1_ratio) * w)
    else:
        raise ValueError(f"unknown penalty {penalty!r}")
    return np.append(gw, gb)


def fit_hinge_sgd(X, y, alpha, penalty="l2", l1_ratio=0.15, epochs=50, seed=0, averaged=False):
    """Seeded stochastic subgradient descent on the regularized hinge loss.

    L2 uses multiplicative shrinkage; L1 uses the truncated-gradient
    (soft-threshold) step; elastic net mixes both with ``l1_ratio``. Step
    size follows the 1/(alpha * (t + t0)) schedule. With ``averaged`` the
    returned weights are the average of the iterates (the linear-SVC
    flavor); otherwise the last iterate is returned (the SGD flavor).
    """
    X = np.asarray(X, dtype=float)
    t_lab = _signed(y)
    n, d = X.shape
    alpha = float(alpha)
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    t0 = 1.0 / alpha
    step_count = 0
    for epoch in range(epochs):
        order = keyed_rng("sepsisaudit.learn.sgd", seed, epoch).permutation(n)
        for i in order:
            step_count += 1
            eta = 1.0 / (alpha * (step_count + t0))
            violated = t_lab[i] * (X[i] @ w + b) < 1.0
            if penalty in ("l2", "en"):
                shrink = alpha if penalty == "l2" else alpha * (1.0 - l1_ratio)
                w *= max(0.0, 1.0 - eta * shrink)
            if violated:
                w += eta * t_lab[i] * X[i]
                b += eta * t_lab[i]
            if penalty in ("l1", "en"):
                cut = eta * alpha * (l1_ratio if penalty == "en" else 1.0)
                w = np.sign(w) * np.maximum(0.0, np.abs(w) - cut)
            w_sum += w
            b_sum += b
    if averaged and step_count:
        return LinearModel(w=w_sum / step_count, b=b_sum / step_count)
    return LinearModel(w=w, b=b)


# ---------------------------------------------------------------------------
# Logistic regression: full-batch gradient descent with backtracking line search
# ---------------------------------------------------------------------------

def logistic_objective(wb, X, y, l2):
    """Mean logistic loss plus l2/2 * ||w||^2 at parameter vector [w..., b]."""
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    w, b = np.asarray(wb[:-1], dtype=float), float(wb[-1])
    z = t * (X @ w + b)
    # log(1 + exp(-z)) computed stably
    loss = np.logaddexp(0.0, -z).mean()
    return loss + 0.5 * float(l2) * float(w @ w)


def logistic_gradient(wb, X, y, l2):
    """Analytic gradient of :func:`logistic_objective` at [w..., b]."""
    X = np.asarray(X, dtype=float)
    t = _signed(y)
    w, b = np.asarray(wb[:-1], dtype=float), float(wb[-1])
    z = t * (X @ w + b)
    s = 1.0 / (1.0 + np.exp(z))  # sigmoid(-z)
    coef = -t * s / X.shape[0]
    gw = X.T @ coef + float(l2) * w
    gb = coef.sum()
    return np.append(gw, gb)


def fit_logreg(X, y, l2=0.01, max_iter=1000, tol=1e-6):
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    wb = np.zeros(d + 1)
    obj = logistic_objective(wb, X, y, l2)
    converged = False
    for _ in range(max_iter):
        g = logistic_gradient(wb, X, y, l2)
        if np.max(np.abs(g)) < tol:
            converged = True
            break
        step = 1.0
        g_sq = float(g @ g)
        while step > 1e-12:
            candidate = wb - step * g
            new_obj = logistic_objective(candidate, X, y, l2)
            if new_obj <= obj - 1e-4 * step * g_sq:  # Armijo condition
                break
            step *= 0.5
        wb = wb - step * g
        obj = logistic_objective(wb, X, y, l2)
    if not converged:
        warnings.warn(
            f"logistic regression: gradient norm {np.max(np.abs(logistic_gradient(wb, X, y, l2))):.2e} "
            f"above tolerance after {max_iter} iterations",
            NonConvergenceWarning,
        )
    return LinearModel(w=wb[:d], b=float(wb[d]), link="logistic")
