"""Certify a trained policy's risk with PAC-Bayes bounds, no test set needed.

Workflow: simulate logs on a synthetic task, train a prior-anchored policy,
then compute high-probability upper bounds on its true risk from the same
logs. Because the task is enumerable we can also print the exact risk, which
a bound can never see in practice, to show how much slack each certificate
carries and how it shrinks as the log grows.

Four certificates are compared:
  * the basic PAC-Bayes bound with the exact Gaussian KL,
  * the fixed-truncation bound at the training truncation level,
  * its all-truncation-levels variant (looser constants, wider coverage),
  * the learned-prior bound, which replaces the known logging policy with
    a ridge-penalized refit and pays a stability surcharge for it.
"""

import numpy as np

from crmlab import (
    BoundInputs,
    MixedLogitSpec,
    StabilityParams,
    TrainConfig,
    crm_bound_all_tau,
    crm_bound_fixed_tau,
    data_dep_risk_bound,
    default_logging_policy,
    enumerable_task,
    exact_risk_of_probs,
    gaussian_kl_exact,
    mcallester_bound,
    mean_param_risk,
    mixed_logit_prob_mc,
    mixed_logit_risk_bound,
    solve_logging_nll_exact,
    task_logs,
    train,
)

TAU, DELTA, SIGMA0 = 0.2, 0.1, 1.0


def certify(task, logging, n):
    logs = task_logs(task, logging, n, seed=99)
    fit = train(TrainConfig(objective="ips_lpr", lam=1.0, epochs=30, seed=0),
                logs, prior=logging)
    posterior_mean = fit.final_policy
    sigma = 1.0 / n
    spec = MixedLogitSpec(posterior_mean, sigma, logging, SIGMA0)
    d_eff = task.rewards.shape[1] * task.contexts.shape[1]

    emp = mean_param_risk(posterior_mean, sigma, 1.0, logs, TAU)
    kl = gaussian_kl_exact(posterior_mean, sigma, logging, SIGMA0, d_eff)
    inputs = BoundInputs(n=n, delta=DELTA, tau=TAU, kl_term=kl, emp_risk=emp)

    refit = solve_logging_nll_exact(logs, 0.01)
    learned_spec = MixedLogitSpec(posterior_mean, sigma, refit, SIGMA0)
    stability = StabilityParams(lipschitz=2.0, lam=0.01, n=n, delta=DELTA)

    # Ground truth by enumeration over Monte-Carlo action marginals.
    rng = np.random.default_rng(1)
    probs = np.empty_like(task.rewards)
    for c in range(probs.shape[0]):
        for a in range(probs.shape[1]):
            probs[c, a], _ = mixed_logit_prob_mc(spec, task.contexts[c], a,
                                                 100_000, rng)

    return {
        "emp": emp,
        "basic": mcallester_bound(emp, kl, n, DELTA),
        "fixed": crm_bound_fixed_tau(inputs),
        "all_tau": crm_bound_all_tau(inputs),
        "learned": data_dep_risk_bound(learned_spec, logs, TAU, DELTA,
                                       stability),
        "mixed": mixed_logit_risk_bound(spec, logs, TAU, DELTA),
        "true": exact_risk_of_probs(task, probs),
    }


def main():
    task = enumerable_task()
    logging = default_logging_policy(task)
    print(f"truncation {TAU}, confidence {1 - DELTA:.0%}, "
          f"posterior variance 1/n, anchored to the logging policy")
    print()
    header = ("n", "emp risk", "basic", "fixed", "all-tau", "learned", "true")
    print(("{:>8} " * len(header)).format(*header))
    for n in (2_000, 20_000, 100_000):
        row = certify(task, logging, n)
        print(f"{n:>8} {row['emp']:>8.4f} {row['basic']:>8.4f} "
              f"{row['fixed']:>8.4f} {row['all_tau']:>8.4f} "
              f"{row['learned']:>8.4f} {row['true']:>8.4f}")
    print()
    print("A certificate below 1 says something nontrivial about a risk in")
    print("[0, 1]. All four tighten toward the empirical risk at the 1/sqrt(n)")
    print("rate; the all-truncation and learned-prior variants pay for their")
    print("extra coverage with visibly more slack.")


if __name__ == "__main__":
    main()
