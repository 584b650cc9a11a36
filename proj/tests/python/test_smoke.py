"""End-to-end smoke tests for the python surface of the compiled module."""

import math

import pytest

import unigen


def test_divergences_on_known_distributions():
    p = [0.5, 0.5]
    q = [0.9, 0.1]
    expected_kl = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert unigen.kl(p, q) == pytest.approx(expected_kl, rel=1e-12)
    assert unigen.jsd(p, p) == 0.0
    assert 0.0 <= unigen.jsd(p, q) <= math.log(2.0)
    assert unigen.entropy([1.0, 0.0]) == 0.0


def test_optimal_discriminator_and_reversed_posterior():
    p_g = [0.25, 0.75]
    p_data = [0.75, 0.25]
    opt = unigen.optimal_discriminator(p_g, p_data)
    assert opt["prob_real"] == pytest.approx([0.75, 0.25])
    assert opt["defined"] == [True, True]

    mix = unigen.marginal_prior(p_g, p_data)
    assert mix == pytest.approx([0.5, 0.5])

    # y=0 row of the reversed posterior is proportional to d(x) * p_x(x).
    post = unigen.reversed_posterior(opt["prob_real"], mix, 0)
    assert sum(post) == pytest.approx(1.0, abs=1e-12)
    assert post == pytest.approx([0.75, 0.25])


def test_importance_weights_textbook_case():
    rep = unigen.normalize_importance_weights([0.8 / 0.2, 0.2 / 0.8])
    assert rep["normalized"][0] == 16.0 / 17.0
    assert rep["normalized"][1] == 1.0 / 17.0
    assert not rep["fallback_uniform"]

    uniform = unigen.normalize_importance_weights([1.0, 1.0, 1.0, 1.0])
    assert all(w == 0.25 for w in uniform["normalized"])


def test_oracles_on_seeded_instances():
    inst = unigen.random_gan_instance(7, n=8)
    grad = unigen.gradient_identity_check(inst)
    assert grad["max_abs_diff"] < 1e-5

    bound = unigen.jsd_bound_check(inst)
    assert bound["holds"]
    assert bound["jsd"] <= bound["expected_kl"] + 1e-10

    spec = unigen.optimal_specialization_check(inst)
    assert not spec["undefined"]
    assert spec["max_abs_diff"] < 1e-5

    vae = unigen.random_tabular_vae(11, n_x=6, n_z=4)
    rep = unigen.elbo_equivalence_check(vae)
    assert abs(rep["diff"]) < 1e-10
    assert abs(rep["bayes_gap"]) < 1e-10

    degen = unigen.degeneration_checks(123)
    assert degen["pass"]


def test_sampling_and_metrics_round_trip():
    spec = unigen.canonical_mixture()
    samples = unigen.sample_mixture_2d(spec, 500, seed=42)
    assert len(samples) == 500
    assert len(samples[0]) == 2

    cov = unigen.mode_coverage(samples, spec)
    assert cov["covered_modes"] == 2
    assert cov["high_quality_fraction"] > 0.95

    div = unigen.histogram_divergences(
        samples, samples, lo=[-4.0, -4.0], hi=[4.0, 4.0], bins=[20, 20]
    )
    assert div["kl"] == 0.0
    assert div["jsd"] == 0.0


def test_idx_round_trip(tmp_path):
    unigen.write_synthetic_idx(tmp_path, 32, 16, seed=5)
    ds = unigen.load_idx(
        tmp_path / "train-images-idx3-ubyte",
        tmp_path / "train-labels-idx1-ubyte",
        subset_fraction=0.5,
        seed=9,
    )
    assert ds["rows"] == 28 and ds["cols"] == 28
    assert len(ds["images"]) == 16
    assert len(ds["labels"]) == 16
    assert all(v in (0.0, 1.0) for v in ds["images"][0])
    assert all(0 <= label <= 9 for label in ds["labels"])


def test_run_experiment_and_config_errors():
    rec = unigen.run_experiment(
        {
            "kind": "gan",
            "seed": 3,
            "steps": 20,
            "batch_size": 16,
            "log_every": 10,
            "eval_samples": 200,
            "model": {"latent_dim": 2, "hidden": [8]},
        }
    )
    assert rec["summary"]["counts"]["steps"] == 20
    assert "mode" in rec["summary"]["eval"]
    assert len(rec["metrics"]) == 2
    assert rec["real_examples"] == 20 * 16

    with pytest.raises(ValueError, match="unknown key"):
        unigen.run_experiment({"kind": "gan", "seed": 1, "stepz": 5})


def test_verify_lemmas_report():
    report = unigen.verify_lemmas(seed=20240801, instances=3)
    assert report["instances"] == 3
    assert report["all_pass"]
