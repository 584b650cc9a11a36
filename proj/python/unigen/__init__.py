"""Generative-model laboratory: adversarial and autoencoding objectives with
exactly evaluable verification oracles.

The heavy lifting lives in the compiled extension; this package re-exports
its surface. Structured results come back as plain dicts and lists.
"""

from ._unigen import (
    ConfigError,
    NumericalAbort,
    canonical_mixture,
    degeneration_checks,
    elbo_equivalence_check,
    entropy,
    gradient_identity_check,
    histogram_divergences,
    jsd,
    jsd_bound_check,
    kl,
    load_idx,
    marginal_prior,
    mode_coverage,
    normalize,
    normalize_importance_weights,
    optimal_discriminator,
    optimal_specialization_check,
    random_gan_instance,
    random_tabular_vae,
    reversed_posterior,
    run_experiment,
    sample_mixture_2d,
    softmax,
    verify_lemmas,
    write_synthetic_idx,
)

__all__ = [
    "ConfigError",
    "NumericalAbort",
    "canonical_mixture",
    "degeneration_checks",
    "elbo_equivalence_check",
    "entropy",
    "gradient_identity_check",
    "histogram_divergences",
    "jsd",
    "jsd_bound_check",
    "kl",
    "load_idx",
    "marginal_prior",
    "mode_coverage",
    "normalize",
    "normalize_importance_weights",
    "optimal_discriminator",
    "optimal_specialization_check",
    "random_gan_instance",
    "random_tabular_vae",
    "reversed_posterior",
    "run_experiment",
    "sample_mixture_2d",
    "softmax",
    "verify_lemmas",
    "write_synthetic_idx",
]
