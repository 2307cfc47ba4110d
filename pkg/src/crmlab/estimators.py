"""Risk and reward estimators over logged bandit feedback.

Risk is one minus expected reward throughout, so every estimator here is of
the form ``1 - (weighted reward average)``.  Importance weighting corrects
for the logging policy's sampling bias; truncation trades variance for bias.
Two truncation styles coexist deliberately and are never mixed:

* denominator truncation ``max(p_i, tau)`` for the plain risk estimators
  that feed the PAC-Bayes bound machinery;
* ratio truncation ``min(pi/p_i, 1/tau)`` only inside the variance statistic
  used by the variance-regularized objective.

Summations are compensated (exact compensated summation via ``math.fsum``):
record counts reach 1e5+ and per-record terms span orders of magnitude, so
naive accumulation would lose digits.  Terms are always reduced in record
order, keeping results independent of any caller-side parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datasets import LabeledDataset, LoggedDataset
from .policies import SoftmaxPolicy, action_prob_matrix

__all__ = [
    "RiskEstimate",
    "ips_risk",
    "truncated_ips_risk",
    "mean_param_risk",
    "poem_sample_variance",
    "expected_reward_stochastic",
    "argmax_accuracy",
]


@dataclass(frozen=True)
class RiskEstimate:
    """A risk value labeled with the estimator that produced it.

    ``estimator_kind`` is one of ``ips``, ``truncated_ips``, ``mean_param``;
    ``tau`` is the truncation level where applicable, else None.
    """

    value: float
    estimator_kind: str
    tau: Optional[float] = None


def _compensated_mean(terms: np.ndarray) -> float:
    # fsum is exact compensated summation; division last keeps one rounding.
    return math.fsum(terms) / terms.shape[0]


def _matched_action_probs(policy: SoftmaxPolicy, data: LoggedDataset) -> np.ndarray:
    if policy.d != data.d:
        raise ValueError(
            f"policy dimension {policy.d} does not match data dimension {data.d}"
        )
    P = action_prob_matrix(policy, data.features)
    return P[np.arange(data.n), data.actions]


def _check_tau(tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return float(tau)


def ips_risk(policy: SoftmaxPolicy, data: LoggedDataset) -> float:
    """Inverse-propensity-scored risk estimate.

    Parameters
    ----------
    policy : SoftmaxPolicy
        Target policy whose risk is estimated.
    data : LoggedDataset
        Logged feedback gathered under a full-support logging policy.

    Returns
    -------
    float
        ``1 - (1/n) sum_i r_i * pi(a_i|x_i) / p_i``.  Unbiased for the true
        risk of ``policy`` because the propensities are the logging
        policy's exact action probabilities.
    """
    pi = _matched_action_probs(policy, data)
    return 1.0 - _compensated_mean(data.rewards * pi / data.propensities)


def truncated_ips_risk(policy: SoftmaxPolicy, data: LoggedDataset, tau: float) -> float:
    """Truncated variant of :func:`ips_risk`.

    Propensities are floored at ``tau`` in the denominator:
    ``1 - (1/n) sum_i r_i * pi(a_i|x_i) / max(p_i, tau)``.

    The result always lies in ``[1 - 1/tau, 1]`` for rewards in [0, 1] and
    is never below the untruncated estimate.

    Parameters
    ----------
    policy : SoftmaxPolicy
    data : LoggedDataset
    tau : float
        Truncation level in (0, 1).
    """
    tau = _check_tau(tau)
    pi = _matched_action_probs(policy, data)
    denom = np.maximum(data.propensities, tau)
    return 1.0 - _compensated_mean(data.rewards * pi / denom)


def mean_param_risk(
    mean: SoftmaxPolicy, sigma: float, B: float, data: LoggedDataset, tau: float
) -> float:
    """Risk estimate for a Gaussian-weight policy from its mean parameters.

    Scales the truncated importance-weighted reward of the mean policy by
    ``exp(-sigma * B^2 / 2)``, the analytic lower bound on how much
    Gaussian weight noise of variance ``sigma`` can shrink any softmax
    probability when context norms are at most ``B``:

    ``1 - (exp(-sigma B^2 / 2)/n) sum_i r_i pi_mean(a_i|x_i)/max(p_i, tau)``.

    At ``sigma = 0`` this equals :func:`truncated_ips_risk` exactly; it is
    nondecreasing in ``sigma`` and tends to 1.

    Parameters
    ----------
    mean : SoftmaxPolicy
        Mean of the Gaussian weight distribution.
    sigma : float
        Isotropic weight variance, >= 0.
    B : float
        Context norm bound; must be at least the dataset's stored bound.
    data : LoggedDataset
    tau : float
        Truncation level in (0, 1).
    """
    if sigma < 0.0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if B < data.feature_norm_bound * (1.0 - 1e-12):
        raise ValueError(
            f"B={B} is below the dataset feature norm bound "
            f"{data.feature_norm_bound}"
        )
    tau = _check_tau(tau)
    pi = _matched_action_probs(mean, data)
    denom = np.maximum(data.propensities, tau)
    shrink = math.exp(-0.5 * sigma * B * B)
    return 1.0 - shrink * _compensated_mean(data.rewards * pi / denom)


def poem_sample_variance(policy: SoftmaxPolicy, data: LoggedDataset, tau: float) -> float:
    """Unbiased sample variance of the ratio-truncated weighted rewards.

    The per-record statistic is ``u_i = r_i * min(pi(a_i|x_i)/p_i, 1/tau)``
    (ratio truncation, not denominator truncation); the variance uses
    divisor ``n - 1`` and a two-pass computation, so it is immune to the
    catastrophic cancellation of single-pass formulas.

    Parameters
    ----------
    policy : SoftmaxPolicy
    data : LoggedDataset
        Must contain at least two records.
    tau : float
        Ratio cap is ``1/tau``.
    """
    tau = _check_tau(tau)
    if data.n < 2:
        raise ValueError("sample variance needs at least two records")
    pi = _matched_action_probs(policy, data)
    u = data.rewards * np.minimum(pi / data.propensities, 1.0 / tau)
    mean_u = _compensated_mean(u)
    centered = u - mean_u
    return math.fsum(centered * centered) / (data.n - 1)


def expected_reward_stochastic(policy: SoftmaxPolicy, test: LabeledDataset) -> float:
    """Mean probability the policy samples the true label on labeled data.

    Parameters
    ----------
    policy : SoftmaxPolicy
    test : LabeledDataset

    Returns
    -------
    float
        ``(1/n) sum_i pi(label_i | x_i)``, the expected reward of the
        stochastic policy under 0/1 match rewards.
    """
    if policy.d != test.d:
        raise ValueError(
            f"policy dimension {policy.d} does not match data dimension {test.d}"
        )
    P = action_prob_matrix(policy, test.features)
    return _compensated_mean(P[np.arange(len(test)), test.labels])


def argmax_accuracy(policy: SoftmaxPolicy, test: LabeledDataset) -> float:
    """Fraction of labeled examples where the argmax action is the label.

    Ties in the logits resolve to the lowest action index, matching
    :func:`crmlab.policies.argmax_action`.
    """
    if policy.d != test.d:
        raise ValueError(
            f"policy dimension {policy.d} does not match data dimension {test.d}"
        )
    logits = test.features @ policy.weights.T + policy.biases
    return float(np.mean(np.argmax(logits, axis=1) == test.labels))
