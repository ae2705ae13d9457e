"""Kernel support vector classification trained by SMO.

Sequential minimal optimization with maximal-violating-pair working-set
selection: each iteration pairs the most KKT-violating index from the
"up" set with the most violating index from the "low" set, using a full
error cache, and stops when the violation gap falls under tolerance.
Selection ties break to the lowest index and there are no random
restarts, so training is a pure function of the data order. The decision
score is the signed kernel margin ``sum_i alpha_i y_i K(x_i, x) + b``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NonConvergenceWarning

_KERNELS = ("rbf", "poly", "sigmoid")


def _kernel_rows(kind, gamma, coef0, degree, X, Z):
    """K(X, Z) for row matrices X (n, d) and Z (m, d)."""
    if kind == "rbf":
        sq = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
        return np.exp(-gamma * sq)
    inner = X @ Z.T
    if kind == "poly":
        return (gamma * inner + coef0) ** degree
    if kind == "sigmoid":
        return np.tanh(gamma * inner + coef0)
    raise ValueError(f"unknown kernel {kind!r}")


def resolve_gamma(X, gamma_scale):
    """gamma = scale / (d * mean feature variance), the scaled default."""
    X = np.asarray(X, dtype=float)
    var = float(X.var())
    if var <= 0.0:
        var = 1.0
    return float(gamma_scale) / (X.shape[1] * var)


@dataclass(frozen=True)
class SvcModel:
    X_sv: np.ndarray
    coef_sv: np.ndarray  # alpha_i * y_i for the support vectors
    b: float
    kind: str
    gamma: float
    coef0: float
    degree: int

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K = _kernel_rows(self.kind, self.gamma, self.coef0, self.degree, X, self.X_sv)
        return K @ self.coef_sv + self.b

    def describe(self):
        return {
            "kernel": self.kind,
            "gamma": float(self.gamma),
            "coef0": float(self.coef0),
            "degree": int(self.degree),
            "n_support": int(self.X_sv.shape[0]),
            "intercept": float(self.b),
        }


class _Smo:
    _CACHE_LIMIT = 3000  # precompute the full kernel matrix up to this n

    def __init__(self, X, t, C, kind, gamma, coef0, degree, tol, eps):
        self.X = X
        self.t = t
        self.n = X.shape[0]
        self.C = float(C)
        self.kind = kind
        self.gamma = gamma
        self.coef0 = coef0
        self.degree = degree
        self.tol = tol
        self.eps = eps
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.E = -t.astype(float)  # f(x) = 0 everywhere initially
        self.K = (
            _kernel_rows(kind, gamma, coef0, degree, X, X) if self.n <= self._CACHE_LIMIT else None
        )
        self._kdiag = self.K.diagonal().copy() if self.K is not None else self._diag()

    def _diag(self):
        if self.kind == "rbf":
            return np.ones(self.n)
        inner = np.einsum("ij,ij->i", self.X, self.X)
        if self.kind == "poly":
            return (self.gamma * inner + self.coef0) ** self.degree
        return np.tanh(self.gamma * inner + self.coef0)

    def _column(self, i):
        if self.K is not None:
            return self.K[:, i]
        return _kernel_rows(self.kind, self.gamma, self.coef0, self.degree, self.X, self.X[[i]])[:, 0]

    def _kval(self, i, j):
        if self.K is not None:
            return self.K[i, j]
        return float(
            _kernel_rows(self.kind, self.gamma, self.coef0, self.degree, self.X[[i]], self.X[[j]])[0, 0]
        )

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        t1, t2 = self.t[i1], self.t[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = t1 * t2
        if s > 0:
            L, H = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            L, H = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if L >= H:
            return False
        k11, k12, k22 = self._kdiag[i1], self._kval(i1, i2), self._kdiag[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + t2 * (E1 - E2) / eta
            a2_new = min(max(a2_new, L), H)
        else:
            # objective at the clip bounds (Platt's degenerate-eta branch)
            f1 = t1 * (E1 + self.b) - a1 * k11 - s * a2 * k12
            f2 = t2 * (E2 + self.b) - s * a1 * k12 - a2 * k22
            L1 = a1 + s * (a2 - L)
            H1 = a1 + s * (a2 - H)
            obj_L = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            obj_H = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if obj_L < obj_H - self.eps:
                a2_new = L
            elif obj_L > obj_H + self.eps:
                a2_new = H
            else:
                a2_new = a2
        if a2_new < 1e-8 * self.C:  # snap to the bounds so the up/low sets stay clean
            a2_new = 0.0
        elif a2_new > (1.0 - 1e-8) * self.C:
            a2_new = self.C
        if abs(a2_new - a2) < self.eps * (a2_new + a2 + self.eps):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 1e-8 * self.C:
            a1_new = 0.0
        elif a1_new > (1.0 - 1e-8) * self.C:
            a1_new = self.C

        k1 = self._column(i1)  # full columns only once the step is accepted
        k2 = self._column(i2)
        d1 = t1 * (a1_new - a1)
        d2 = t2 * (a2_new - a2)
        b1 = self.b - E1 - d1 * k11 - d2 * k12
        b2 = self.b - E2 - d1 * k12 - d2 * k22
        in1 = 0.0 < a1_new < self.C
        in2 = 0.0 < a2_new < self.C
        if in1:
            b_new = b1
        elif in2:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.E += d1 * k1 + d2 * k2 + (b_new - self.b)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.b = b_new
        return True

    def solve(self, max_iter):
        """Maximal-violating-pair loop; True when the KKT gap closes under tol.

        A constant shift of the error cache (the explicit b) moves every
        E_i equally and so never changes which pair is most violating,
        nor the gap; selection is therefore b-independent.
        """
        pos = self.t > 0
        for _ in range(max_iter):
            up = (pos & (self.alpha < self.C)) | (~pos & (self.alpha > 0.0))
            low = (~pos & (self.alpha < self.C)) | (pos & (self.alpha > 0.0))
            if not up.any() or not low.any():
                return True
            up_idx = np.nonzero(up)[0]
            low_idx = np.nonzero(low)[0]
            if self.E[low_idx].max() - self.E[up_idx].min() <= self.tol:
                return True
            # most violating pair; on a degenerate step (non-PSD kernels),
            # walk down the ranked candidates deterministically
            i_order = up_idx[np.argsort(self.E[up_idx], kind="mergesort")]
            j_order = low_idx[np.argsort(-self.E[low_idx], kind="mergesort")]
            stepped = False
            for i1 in i_order[:8]:
                for i2 in j_order[:8]:
                    if self.take_step(int(i1), int(i2)):
                        stepped = True
                        break
                if stepped:
                    break
            if not stepped:
                return False
        return False


def fit_svc(X, y, C=1.0, kind="rbf", gamma=None, gamma_scale=1.0, coef0=None, degree=3,
            tol=1e-3, eps=1e-3, max_iter=None):
    """Train a kernel SVC by SMO; returns the model, warning on iteration cap."""
    if kind not in _KERNELS:
        raise ValueError(f"kernel must be one of {_KERNELS}")
    X = np.asarray(X, dtype=float)
    t = np.where(np.asarray(y, dtype=bool), 1.0, -1.0)
    if gamma is None:
        gamma = resolve_gamma(X, gamma_scale)
    if coef0 is None:
        coef0 = 1.0 if kind == "poly" else 0.0
    if max_iter is None:
        max_iter = max(20000, 100 * X.shape[0])
    smo = _Smo(X, t, C, kind, float(gamma), float(coef0), int(degree), tol, eps)
    converged = smo.solve(max_iter)
    if not converged:
        warnings.warn(
            f"SVC ({kind}): SMO stopped after {max_iter} iterations before meeting KKT tolerance",
            NonConvergenceWarning,
        )
    sv = smo.alpha > 1e-12
    if not sv.any():
        sv = np.zeros(X.shape[0], dtype=bool)
        sv[0] = True  # degenerate: keep one vector so score() stays total
    return SvcModel(
        X_sv=X[sv].copy(),
        coef_sv=(smo.alpha * t)[sv],
        b=float(smo.b),
        kind=kind,
        gamma=float(gamma),
        coef0=float(coef0),
        degree=int(degree),
    )
