"""Sandwich the action probability of a Gaussian-perturbed softmax policy.

A mixed-logit policy draws its weights from a Gaussian centred on a softmax
policy. Its action probabilities have no closed form, but they admit a
two-sided analytic sandwich plus a cheap Monte-Carlo estimate. This script
prints all three side by side as the weight variance grows, until the
variance cap is reached.
"""

import numpy as np

from crmlab import (
    MixedLogitSpec,
    SoftmaxPolicy,
    action_probs,
    mixed_logit_prob_bounds,
    mixed_logit_prob_mc,
    zero_policy,
)


def main():
    rng = np.random.default_rng(3)
    d, k = 4, 3
    mean = SoftmaxPolicy(rng.normal(size=(k, d)), np.zeros(k))
    prior_variance = 0.5
    x = rng.normal(size=d)
    x /= np.linalg.norm(x)  # unit norm, so the feature bound is 1
    action = 0

    base = action_probs(mean, x)[action]
    print(f"softmax probability at the mean weights: {base:.4f}")
    print()
    print(f"{'variance':>10} {'lower':>8} {'mc estimate':>14} {'upper':>8}")
    for sigma in (1e-4, 1e-3, 1e-2, 0.1, 0.3, prior_variance):
        spec = MixedLogitSpec(mean, sigma, zero_policy(d, k), prior_variance)
        lower, upper = mixed_logit_prob_bounds(spec, x, action, B=1.0)
        estimate, se = mixed_logit_prob_mc(spec, x, action, 100_000, rng)
        print(f"{sigma:>10g} {lower:>8.4f} {estimate:>9.4f} ±{2 * se:.4f} {upper:>8.4f}")
    print()
    print("Both ends of the sandwich are multiplicative in exp(variance·B²),")
    print("so they stay tight exactly when the perturbation is small, which")
    print("is the regime the training objectives operate in.")


if __name__ == "__main__":
    main()
