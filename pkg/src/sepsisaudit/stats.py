"""Resampling inference: bootstrap proportion CIs and permutation tests on AUC.

Replicate randomness is keyed per replicate as (master seed, replicate
index) through the package's Philox construction, so every result is
bit-identical for fixed inputs regardless of execution order or thread
count.

The two permutation schemes randomize group membership directly and never
refit models:

* subgroup vs. whole: each replicate draws a uniform random subset of the
  whole test set with the subgroup's size and recomputes
  ``AUC(subset) - AUC(whole)``. The tail follows the sign of the observed
  difference and is stamped into the result. Because the tested direction
  is chosen from the data, the smoothed tail count is doubled (capped at
  1) so that null p-values are uniform; see the docstring of
  :func:`perm_test_subgroup_vs_whole`.
* pairwise: replicates pool both groups and reassign membership uniformly
  at random preserving group sizes; the test is two-tailed on the
  magnitude of ``AUC(A) - AUC(B)``.

p-values use add-one smoothing and are therefore never 0.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyGroup, SingleClassError, UndefinedGroupAUC, UndefinedSubgroupAUC
from .metrics import roc_auc
from .rng import replicate_rng

MIN_REPLICATES = 100


class Tail(str, Enum):
    LowerOneTailed = "LowerOneTailed"
    UpperOneTailed = "UpperOneTailed"
    TwoTailed = "TwoTailed"


@dataclass(frozen=True)
class ProportionCI:
    point: float
    lo: float
    hi: float
    replicates: int
    level: float


@dataclass(frozen=True)
class PermutationResult:
    observed_diff: float
    p_value: float
    replicates: int
    tail: Tail
    seed: int

    def as_dict(self):
        return {
            "observed_diff": self.observed_diff,
            "p_value": self.p_value,
            "replicates": self.replicates,
            "tail": self.tail.value,
            "seed": self.seed,
        }


def _check_replicates(replicates):
    if replicates < MIN_REPLICATES:
        raise ValueError(f"replicates {replicates} below the floor of {MIN_REPLICATES}")


def bootstrap_proportion_ci(flags, replicates=1000, level=0.95, seed=0):
    """Percentile bootstrap CI for a proportion of true flags.

    Parameters
    ----------
    flags : array-like of bool
        Group membership indicator per subject (e.g. "flagged by Angus").
    replicates : int
        Bootstrap resamples (resampling subjects with replacement).
    level : float
        Confidence level in (0, 1); the interval takes the (1-level)/2 and
        1-(1-level)/2 quantiles of the resampled proportions.
    seed : int
        Master seed; replicate r draws from the (seed, r) stream.

    Returns
    -------
    ProportionCI
        point = sample proportion; lo/hi = percentile interval.
    """
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise EmptyGroup("cannot bootstrap an empty group")
    _check_replicates(replicates)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level {level} outside (0, 1)")
    n = flags.size
    props = np.empty(replicates)
    for r in range(replicates):
        idx = replicate_rng(seed, r).integers(0, n, n)
        props[r] = flags[idx].mean()
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(props, [alpha, 1.0 - alpha])
    return ProportionCI(
        point=float(flags.mean()),
        lo=float(lo),
        hi=float(hi),
        replicates=replicates,
        level=level,
    )


def _auc_or_undefined(scores, labels, exc_type, what):
    try:
        return roc_auc(scores, labels)
    except SingleClassError:
        raise exc_type(f"AUC undefined in {what}: only one class present") from None


def perm_test_subgroup_vs_whole(test_scores, test_labels, subgroup_index_set, replicates=1000, seed=0):
    """One-tailed permutation test of a subgroup's AUC against the whole test set.

    ``observed_diff = AUC(subgroup) - AUC(whole test)``. Each replicate
    draws a uniform random subset of the whole test set with the
    subgroup's size and recomputes the difference; replicates whose random
    subset has only one class are counted as at least as extreme
    (conservative). The tail follows the sign of the observed difference.

    Because the tail is selected from the observed data, the naive
    smoothed tail probability is uniform only over half the unit interval;
    the returned p doubles it (capped at 1.0) so that p is uniform under
    the null. Equivalently this is the two-sided price of peeking at the
    direction; the directional claim itself is preserved in ``tail``.
    """
    scores = np.asarray(test_scores, dtype=float)
    labels = np.asarray(test_labels, dtype=bool)
    sub_idx = np.asarray(sorted(subgroup_index_set), dtype=int)
    n = scores.size
    if sub_idx.size == 0 or sub_idx.min() < 0 or sub_idx.max() >= n:
        raise ValueError("subgroup indices must be a nonempty subset of the test set")
    _check_replicates(replicates)

    whole_auc = _auc_or_undefined(scores, labels, UndefinedGroupAUC, "whole test set")
    sub_auc = _auc_or_undefined(scores[sub_idx], labels[sub_idx], UndefinedSubgroupAUC, "subgroup")
    observed = sub_auc - whole_auc
    k = sub_idx.size

    tail = Tail.LowerOneTailed if observed < 0 else Tail.UpperOneTailed
    count = 0
    for r in range(replicates):
        idx = replicate_rng(seed, r).choice(n, size=k, replace=False)
        try:
            diff = roc_auc(scores[idx], labels[idx]) - whole_auc
        except SingleClassError:
            count += 1
            continue
        if tail is Tail.LowerOneTailed:
            count += diff <= observed
        else:
            count += diff >= observed
    p = min(1.0, 2.0 * (1 + count) / (replicates + 1))
    return PermutationResult(
        observed_diff=float(observed),
        p_value=float(p),
        replicates=replicates,
        tail=tail,
        seed=seed,
    )


def perm_test_pairwise(scores_a, labels_a, scores_b, labels_b, replicates=1000, seed=0):
    """Two-tailed permutation test of AUC(A) - AUC(B) between two groups.

    Replicates pool the two groups and reassign membership uniformly at
    random preserving the group sizes; p counts replicates whose absolute
    difference reaches the observed magnitude (add-one smoothed).
    Replicates where either random group has one class count as extreme.
    """
    scores_a = np.asarray(scores_a, dtype=float)
    labels_a = np.asarray(labels_a, dtype=bool)
    scores_b = np.asarray(scores_b, dtype=float)
    labels_b = np.asarray(labels_b, dtype=bool)
    _check_replicates(replicates)

    auc_a = _auc_or_undefined(scores_a, labels_a, UndefinedGroupAUC, "group A")
    auc_b = _auc_or_undefined(scores_b, labels_b, UndefinedGroupAUC, "group B")
    observed = auc_a - auc_b

    pooled_scores = np.concatenate([scores_a, scores_b])
    pooled_labels = np.concatenate([labels_a, labels_b])
    n = pooled_scores.size
    n_a = scores_a.size

    count = 0
    for r in range(replicates):
        perm = replicate_rng(seed, r).permutation(n)
        a_idx, b_idx = perm[:n_a], perm[n_a:]
        try:
            diff = roc_auc(pooled_scores[a_idx], pooled_labels[a_idx]) - roc_auc(
                pooled_scores[b_idx], pooled_labels[b_idx]
            )
        except SingleClassError:
            count += 1
            continue
        count += abs(diff) >= abs(observed)
    p = (1 + count) / (replicates + 1)
    return PermutationResult(
        observed_diff=float(observed),
        p_value=float(p),
        replicates=replicates,
        tail=Tail.TwoTailed,
        seed=seed,
    )
