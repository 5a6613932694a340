"""Ground-truth generator: construction invariants and reproducibility."""

import numpy as np
import pytest

from encscale.errors import InputError
from encscale.synth import (
    SynthConfig,
    _rotation,
    gen_isc_cohort,
    gen_study,
    study_designs,
    theoretical_ceiling,
)


def _small_cfg(**over):
    base = dict(
        n_runs=3,
        n_scans=40,
        n_voxels=8,
        family_dims=(2, 4, 8),
        noise_sigma=1.0,
        seed=0,
        oversampling=4,
    )
    base.update(over)
    return SynthConfig(**base)


# ---------------------------------------------------------------------------
# ceiling formula


def test_theoretical_ceiling_values():
    assert theoretical_ceiling(1.0, 1.0) == pytest.approx(0.7071067811865476, abs=1e-15)
    assert theoretical_ceiling(1.0, 0.0) == 1.0
    assert theoretical_ceiling(0.0, 1.0) == 0.0
    assert theoretical_ceiling(3.0, 1.0) == pytest.approx(np.sqrt(0.75))


def test_theoretical_ceiling_validation():
    with pytest.raises(InputError):
        theoretical_ceiling(-1.0, 1.0)
    with pytest.raises(InputError):
        theoretical_ceiling(0.0, 0.0)


def test_config_validation():
    with pytest.raises(InputError):
        _small_cfg(n_voxels=7).validate()
    with pytest.raises(InputError):
        _small_cfg(family_dims=(4, 4)).validate()
    with pytest.raises(InputError):
        _small_cfg(family_dims=()).validate()
    with pytest.raises(InputError):
        _small_cfg(noise_sigma=-0.1).validate()
    with pytest.raises(InputError):
        _small_cfg(ar_rho=1.0).validate()
    with pytest.raises(InputError):
        _small_cfg(left_gain="loud").validate()
    with pytest.raises(InputError):
        _small_cfg(words_per_scan=0).validate()
    with pytest.raises(InputError):
        _small_cfg(tr=0.0).validate()
    _small_cfg().validate()


# ---------------------------------------------------------------------------
# study construction


def test_gen_study_shapes_and_alignment():
    cfg = _small_cfg()
    study = gen_study(cfg)
    assert len(study.bold_runs) == 3
    assert len(study.events) == 3
    assert sorted(study.features) == [2, 4, 8]
    n_words = cfg.n_scans * cfg.words_per_scan
    for k in range(3):
        assert study.bold_runs[k].data.shape == (40, 8)
        assert study.bold_runs[k].run_id == k
        assert len(study.events[k]) == n_words
        assert study.latents[k].shape == (n_words, 8)
        for d in cfg.family_dims:
            assert study.features[d][k].shape == (n_words, d)
    assert study.truth.betas.shape == (8, 8)
    assert study.truth.latent_dim == 8


def test_gen_study_is_deterministic():
    a = gen_study(_small_cfg())
    b = gen_study(_small_cfg())
    for k in range(3):
        np.testing.assert_array_equal(a.bold_runs[k].data, b.bold_runs[k].data)
        np.testing.assert_array_equal(a.features[4][k], b.features[4][k])
    c = gen_study(_small_cfg(seed=1))
    assert np.abs(a.bold_runs[0].data - c.bold_runs[0].data).max() > 0.1


def test_geometry_is_mirrored_pairs():
    study = gen_study(_small_cfg())
    x = study.geometry.coords[:, 0]
    np.testing.assert_array_equal(x, [-4.0, 4.0, -8.0, 8.0, -12.0, 12.0, -16.0, 16.0])
    np.testing.assert_array_equal(study.geometry.coords[:, 1:], np.zeros((8, 2)))
    # hemisphere flags agree with the coordinates
    np.testing.assert_array_equal(study.truth.is_left, x < 0)


def test_clean_signal_has_unit_variance():
    study = gen_study(_small_cfg(noise_sigma=0.0))
    for run in study.bold_runs:
        np.testing.assert_allclose(run.data.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(run.data.std(axis=0), 1.0, atol=1e-12)


def test_ceiling_matches_noise_level():
    study = gen_study(_small_cfg(noise_sigma=2.0))
    np.testing.assert_allclose(study.truth.ceiling, np.sqrt(1.0 / 5.0), atol=1e-15)
    clean = gen_study(_small_cfg(noise_sigma=0.0))
    np.testing.assert_array_equal(clean.truth.ceiling, np.ones(8))


def test_flat_control_gives_identical_pair_loadings():
    study = gen_study(_small_cfg(left_gain="flat"))
    betas = study.truth.betas
    for pair in range(4):
        np.testing.assert_array_equal(betas[:, 2 * pair], betas[:, 2 * pair + 1])


def test_harmonic_loadings_shape():
    cfg = _small_cfg(left_gain="harmonic")
    study = gen_study(cfg)
    betas = study.truth.betas
    is_left = study.truth.is_left
    d_floor = cfg.family_dims[0]
    # right voxels load on the first d_floor dims only
    np.testing.assert_array_equal(betas[d_floor:, ~is_left], 0.0)
    # left voxels keep loading beyond d_floor, with the 1/sqrt(j) envelope
    assert np.abs(betas[d_floor:, is_left]).max() > 0
    base = betas[:, ~is_left]  # right envelope is 1 on the first dims
    expected_left = base * (1.0 / np.sqrt(np.arange(1, 9)))[:, None]
    np.testing.assert_allclose(betas[:d_floor, is_left], expected_left[:d_floor], atol=1e-12)


def test_features_are_rotated_latent_prefixes():
    cfg = _small_cfg()
    study = gen_study(cfg)
    for d in cfg.family_dims:
        q = _rotation(d, cfg.seed)
        np.testing.assert_allclose(q @ q.T, np.eye(d), atol=1e-12)
        for k in range(cfg.n_runs):
            np.testing.assert_allclose(
                study.features[d][k] @ q.T, study.latents[k][:, :d], atol=1e-12
            )


def test_rotation_deterministic_and_sign_fixed():
    a = _rotation(5, 3)
    b = _rotation(5, 3)
    np.testing.assert_array_equal(a, b)
    assert np.abs(_rotation(5, 4) - a).max() > 0.01


def test_ar1_noise_autocorrelation():
    rho = 0.6
    cfg = dict(n_runs=1, n_scans=400, n_voxels=20, family_dims=(2, 4), oversampling=4)
    clean = gen_study(SynthConfig(noise_sigma=0.0, **cfg)).bold_runs[0].data
    noisy = gen_study(SynthConfig(noise_sigma=1.0, ar_rho=rho, **cfg)).bold_runs[0].data
    noise = noisy - clean
    lag1 = [np.corrcoef(noise[:-1, v], noise[1:, v])[0, 1] for v in range(20)]
    assert np.mean(lag1) == pytest.approx(rho, abs=0.05)
    # stationary scaling keeps unit marginal variance
    assert noise.var() == pytest.approx(1.0, abs=0.1)


def test_study_designs_shapes_and_errors():
    cfg = _small_cfg()
    study = gen_study(cfg)
    designs = study_designs(study, 4)
    assert len(designs) == 3
    for d in designs:
        assert d.shape == (40, 4)
    with pytest.raises(InputError):
        study_designs(study, 3)


# ---------------------------------------------------------------------------
# shared-signal cohorts


def test_isc_cohort_shapes_and_determinism():
    subs = gen_isc_cohort(3, 1.0, 0.5, n_scans=30, seed=5, n_runs=2, n_voxels=4)
    assert len(subs) == 3
    for runs in subs:
        assert len(runs) == 2
        assert runs[0].data.shape == (30, 4)
        assert runs[1].run_id == 1
    again = gen_isc_cohort(3, 1.0, 0.5, n_scans=30, seed=5, n_runs=2, n_voxels=4)
    np.testing.assert_array_equal(subs[2][1].data, again[2][1].data)


def test_isc_cohort_noiseless_subjects_identical():
    subs = gen_isc_cohort(3, 1.0, 0.0, n_scans=20, n_runs=2, n_voxels=3)
    np.testing.assert_array_equal(subs[0][0].data, subs[1][0].data)
    np.testing.assert_array_equal(subs[1][1].data, subs[2][1].data)


def test_isc_cohort_noise_independent_across_subjects():
    subs = gen_isc_cohort(2, 0.0, 1.0, n_scans=500, n_runs=1, n_voxels=1)
    r = np.corrcoef(subs[0][0].data[:, 0], subs[1][0].data[:, 0])[0, 1]
    assert abs(r) < 0.15


def test_isc_cohort_validation():
    with pytest.raises(InputError):
        gen_isc_cohort(1, 1.0, 1.0, n_scans=10)
    with pytest.raises(InputError):
        gen_isc_cohort(2, -1.0, 1.0, n_scans=10)
