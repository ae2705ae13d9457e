"""Naive Bayes families on [0, 1] features.

Multinomial NB consumes the nonnegative scaled features directly with
add-1 smoothing; Bernoulli NB binarizes them at 0.5. Both score with the
posterior log-odds of the positive class.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MultinomialNBModel:
    log_prior_diff: float
    log_theta_diff: np.ndarray

    def score(self, X):
        return self.log_prior_diff + np.asarray(X, dtype=float) @ self.log_theta_diff

    def describe(self):
        return {
            "log_prior_diff": float(self.log_prior_diff),
            "log_theta_diff": [float(v) for v in self.log_theta_diff],
        }


def fit_multinomial_nb(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    d = X.shape[1]
    sums = {c: X[y == c].sum(axis=0) for c in (False, True)}
    counts = {c: int((y == c).sum()) for c in (False, True)}
    theta = {c: (sums[c] + 1.0) / (sums[c].sum() + d) for c in (False, True)}
    log_prior_diff = np.log(counts[True]) - np.log(counts[False])
    return MultinomialNBModel(
        log_prior_diff=float(log_prior_diff),
        log_theta_diff=np.log(theta[True]) - np.log(theta[False]),
    )


@dataclass(frozen=True)
class BernoulliNBModel:
    log_prior_diff: float
    log_theta_on: np.ndarray  # log theta1 - log theta0
    log_theta_off: np.ndarray  # log(1-theta1) - log(1-theta0)

    def score(self, X):
        B = (np.asarray(X, dtype=float) >= 0.5).astype(float)
        return self.log_prior_diff + B @ self.log_theta_on + (1.0 - B) @ self.log_theta_off

    def describe(self):
        return {
            "log_prior_diff": float(self.log_prior_diff),
            "log_theta_on": [float(v) for v in self.log_theta_on],
            "log_theta_off": [float(v) for v in self.log_theta_off],
        }


def fit_bernoulli_nb(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    B = (X >= 0.5).astype(float)
    counts = {c: int((y == c).sum()) for c in (False, True)}
    theta = {c: (B[y == c].sum(axis=0) + 1.0) / (counts[c] + 2.0) for c in (False, True)}
    return BernoulliNBModel(
        log_prior_diff=float(np.log(counts[True]) - np.log(counts[False])),
        log_theta_on=np.log(theta[True]) - np.log(theta[False]),
        log_theta_off=np.log(1.0 - theta[True]) - np.log(1.0 - theta[False]),
    )
