"""Softmax and mixed-logit policies.

A softmax policy keeps one weight vector per action plus a bias per action
(the joint feature map is one-hot(action) ⊗ context, so the weight matrix is
k×d and a context's norm bounds the joint feature norm).  A mixed-logit
policy draws the weight matrix from an isotropic Gaussian centered at a mean
policy; its action probabilities are expectations of softmax probabilities
over that draw and have no closed form, so this module provides a Monte
Carlo estimator and an analytic probability sandwich.

An action distribution is represented as a plain length-k float64 ndarray on
the probability simplex.

Conventions used throughout: biases enter logits and sampling but are
excluded from parameter norms, distances, and the Gaussian spread; argmax
ties break toward the lowest action index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "SoftmaxPolicy",
    "MixedLogitSpec",
    "ModelFile",
    "zero_policy",
    "action_probs",
    "action_prob_matrix",
    "sample_action",
    "argmax_action",
    "mixed_logit_prob_mc",
    "mixed_logit_prob_bounds",
    "param_distance_sq",
    "save_model",
    "load_model",
]

# Uniform variates are clamped into [_U_LO, _U_HI] before the double-log
# transform so Gumbel noise stays finite.
_U_LO = np.finfo(np.float64).tiny
_U_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class SoftmaxPolicy:
    """Linear softmax policy with per-action weight rows and biases.

    ``weights`` has shape (k, d) and ``biases`` shape (k,).  Instances are
    immutable: arrays are copied on construction and marked read-only, so a
    policy can be shared freely across threads.
    """

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D (k, d) array")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ValueError("biases must be a 1-D array of length k")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise ValueError("policy parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.biases


def zero_policy(d: int, k: int) -> SoftmaxPolicy:
    """Policy with all-zero parameters (uniform action distribution)."""
    return SoftmaxPolicy(np.zeros((k, d)), np.zeros(k))


@dataclass(frozen=True)
class MixedLogitSpec:
    """Gaussian-weight softmax policy together with its prior.

    The weight matrix is distributed N(mean.weights, variance·I); the prior
    is N(prior_mean.weights, prior_variance·I).  Biases are deterministic
    and excluded from the Gaussian.  ``variance == 0`` is the degenerate
    point mass and is accepted here; operations that need a proper density
    (KL terms) reject it at their own boundary.
    """

    mean: SoftmaxPolicy
    variance: float
    prior_mean: SoftmaxPolicy
    prior_variance: float

    def __post_init__(self) -> None:
        if self.mean.weights.shape != self.prior_mean.weights.shape:
            raise ValueError("mean and prior_mean must have equal dimensions")
        if not (self.prior_variance > 0.0):
            raise ValueError("prior_variance must be positive")
        if not (0.0 <= self.variance <= self.prior_variance):
            raise ValueError("variance must lie in [0, prior_variance]")


def _validate_context(policy: SoftmaxPolicy, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (policy.d,):
        raise ValueError(
            f"context has shape {x.shape}, policy expects ({policy.d},)"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("context features must be finite")
    return x


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    # Max-subtraction keeps exp() in range for arbitrarily large logits.
    shifted = logits - logits.max(axis=-1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=-1, keepdims=True)
    return shifted


def action_probs(policy: SoftmaxPolicy, x: np.ndarray) -> np.ndarray:
    """Exact softmax action distribution at context ``x``.

    Returns a length-k array: probs[a] ∝ exp(weights[a]·x + biases[a]),
    normalized exactly, strictly positive for finite logits.
    """
    x = _validate_context(policy, x)
    return _softmax_rows(policy.logits(x))


def action_prob_matrix(policy: SoftmaxPolicy, X: np.ndarray) -> np.ndarray:
    """Row-wise action distributions for a batch of contexts (n×d → n×k)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != policy.d:
        raise ValueError(f"context matrix must have shape (n, {policy.d})")
    if not np.all(np.isfinite(X)):
        raise ValueError("context features must be finite")
    return _softmax_rows(X @ policy.weights.T + policy.biases)


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Gumbel variates via −ln(−ln u), u clamped inside (0, 1)."""
    u = np.clip(rng.uniform(size=shape), _U_LO, _U_HI)
    return -np.log(-np.log(u))


def sample_action(
    policy: SoftmaxPolicy, x: np.ndarray, rng: np.random.Generator
) -> int:
    """Sample an action by perturbing logits with Gumbel noise.

    argmax_a (logit_a + γ_a) with γ_a i.i.d. standard Gumbel is distributed
    exactly as the softmax probabilities of ``action_probs``.
    """
    x = _validate_context(policy, x)
    return int(np.argmax(policy.logits(x) + gumbel_noise(rng, policy.k)))


def argmax_action(policy: SoftmaxPolicy, x: np.ndarray) -> int:
    """Index of the maximum logit; ties break toward the lowest index."""
    x = _validate_context(policy, x)
    return int(np.argmax(policy.logits(x)))


def mixed_logit_prob_mc(
    spec: MixedLogitSpec,
    x: np.ndarray,
    a: int,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of the mixed-logit probability of action ``a``.

    Averages the softmax probability of ``a`` over weight draws
    θ ~ N(mean, variance·I).  Because logits are linear in the weights, the
    induced logit vector is exactly Gaussian, N(mean logits, variance·‖x‖²·I),
    and is sampled directly; this is distributionally identical to drawing
    full weight matrices and cheaper by a factor of d.  Averaging
    probabilities rather than argmax indicators keeps the mean unchanged
    and shrinks the variance.

    Returns ``(estimate, std_error)``; the standard error uses the
    unbiased sample variance and is NaN when ``samples == 1``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = _validate_context(spec.mean, x)
    if not (0 <= a < spec.mean.k):
        raise ValueError("action index out of range")
    mu = spec.mean.logits(x)
    scale = float(np.sqrt(spec.variance) * np.linalg.norm(x))
    z = mu + scale * rng.standard_normal((samples, spec.mean.k))
    p = _softmax_rows(z)[:, a]
    estimate = float(p.mean())
    if samples > 1:
        std_error = float(p.std(ddof=1) / np.sqrt(samples))
    else:
        std_error = float("nan")
    return estimate, std_error


def mixed_logit_prob_bounds(
    spec: MixedLogitSpec, x: np.ndarray, a: int, B: float
) -> tuple[float, float]:
    """Analytic sandwich for the mixed-logit probability of action ``a``.

    For ‖x‖ ≤ B and weight variance σ:

        softmax(a|x) · exp(−σB²/2)  ≤  prob  ≤  softmax(a|x) · exp(2σB²)

    where softmax is taken at the mean policy; the upper bound is clamped
    to 1.  At σ = 0 both sides collapse to the exact softmax probability.
    """
    x = _validate_context(spec.mean, x)
    if not (0 <= a < spec.mean.k):
        raise ValueError("action index out of range")
    norm = float(np.linalg.norm(x))
    # 1 ulp of relative slack so contexts at the stored bound pass intact.
    if norm > B * (1.0 + 1e-12):
        raise ValueError(f"context norm {norm} exceeds feature bound {B}")
    p = float(action_probs(spec.mean, x)[a])
    sb2 = spec.variance * B * B
    lower = p * float(np.exp(-0.5 * sb2))
    upper = min(1.0, p * float(np.exp(2.0 * sb2)))
    return lower, upper


def param_distance_sq(a: SoftmaxPolicy, b: SoftmaxPolicy) -> float:
    """Squared Euclidean distance between weight matrices; biases excluded."""
    if a.weights.shape != b.weights.shape:
        raise ValueError("policies must have equal dimensions")
    diff = a.weights - b.weights
    return float(np.sum(diff * diff))


# -----------------------------------------------------------------------
# Model files
# -----------------------------------------------------------------------
#
# Structured-text key-value format (JSON) with nested arrays.  Floats are
# written with shortest round-trip decimal repr, so save -> load is
# bit-exact for every finite double.

_MODEL_FORMAT = "crmlab-model"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    """Deserialized model file: a policy plus optional posterior metadata."""

    policy: SoftmaxPolicy
    sigma: Optional[float] = None
    sigma0: Optional[float] = None
    prior: Optional[SoftmaxPolicy] = None
    feature_norm_bound: Optional[float] = None
    log_propensity_upper_bound: bool = field(default=False)


def save_model(
    path,
    policy: SoftmaxPolicy,
    *,
    sigma: Optional[float] = None,
    sigma0: Optional[float] = None,
    prior: Optional[SoftmaxPolicy] = None,
    feature_norm_bound: Optional[float] = None,
    log_propensity_upper_bound: bool = False,
) -> None:
    """Write a policy (and optional posterior/prior metadata) to ``path``.

    ``log_propensity_upper_bound`` records whether a deployment of this
    model as a stochastic-parameter logging policy should log the analytic
    upper bound of the action probability instead of the mean-policy
    probability; it is carried as metadata and defaults to off.
    """
    if prior is not None and prior.weights.shape != policy.weights.shape:
        raise ValueError("prior dimensions must match the policy")
    doc = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "d": policy.d,
        "k": policy.k,
        "weights": policy.weights.tolist(),
        "biases": policy.biases.tolist(),
        "sigma": sigma,
        "sigma0": sigma0,
        "prior_weights": None if prior is None else prior.weights.tolist(),
        "prior_biases": None if prior is None else prior.biases.tolist(),
        "feature_norm_bound": feature_norm_bound,
        "log_propensity_upper_bound": bool(log_propensity_upper_bound),
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_model(path) -> ModelFile:
    """Read a model file written by :func:`save_model`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _MODEL_FORMAT:
        raise ValueError(f"{path} is not a {_MODEL_FORMAT} file")
    policy = SoftmaxPolicy(np.array(doc["weights"]), np.array(doc["biases"]))
    if policy.d != doc["d"] or policy.k != doc["k"]:
        raise ValueError(f"{path}: stored dimensions disagree with arrays")
    prior = None
    if doc.get("prior_weights") is not None:
        prior_biases = doc.get("prior_biases")
        if prior_biases is None:
            prior_biases = np.zeros(policy.k)
        prior = SoftmaxPolicy(np.array(doc["prior_weights"]), np.array(prior_biases))
    return ModelFile(
        policy=policy,
        sigma=doc.get("sigma"),
        sigma0=doc.get("sigma0"),
        prior=prior,
        feature_norm_bound=doc.get("feature_norm_bound"),
        log_propensity_upper_bound=bool(doc.get("log_propensity_upper_bound", False)),
    )
