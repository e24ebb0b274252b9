import numpy as np
import pytest

from uda_lab.augment import augmentation_moments, sample_augmentation, w_blocks
from uda_lab.model import Domain, ModelParams, population_second_moment, sample_labeled, stream, w_inv, w_spu

P = ModelParams()


def test_zero_input():
    assert np.array_equal(sample_augmentation(np.zeros(5), stream(0)), np.zeros(5))


def test_contraction():
    rng = stream(1)
    x = rng.standard_normal(25)
    for _ in range(20):
        a = sample_augmentation(x, rng)
        assert np.all(np.abs(a) <= np.abs(x))
        assert np.all((a == 0) | (np.sign(a) == np.sign(x)))


def test_mean_is_half():
    rng = stream(2)
    x = rng.standard_normal(10)
    a = sample_augmentation(np.tile(x, (100_000, 1)), rng)
    assert np.max(np.abs(a.mean(axis=0) - x / 2)) <= 0.01 * np.max(np.abs(x))


def test_degenerate_point_mass():
    # sigma_sp must be positive for ModelParams, so build the moment directly
    from uda_lab.augment import moments_from_second_moment
    mom = moments_from_second_moment(np.zeros((4, 4)))
    assert not mom.sigma_a.any() and not mom.sigma_tilde.any()


def test_invariant_projection():
    mom = augmentation_moments(P)
    g2, s2, din = P.gamma**2, P.sigma_in**2, P.d_in
    want = g2 * (3 * din + 1) / (12 * din) + s2 * (din - 1) / (12 * din)
    assert w_inv(P) @ mom.sigma_a @ w_inv(P) == pytest.approx(want, rel=1e-14)


def test_symmetric_and_psd_gap():
    mom = augmentation_moments(P)
    for m in (mom.sigma_a, mom.sigma_tilde):
        assert np.max(np.abs(m - m.T)) < 1e-12
    assert np.linalg.eigvalsh(mom.sigma_a - mom.sigma_tilde).min() > -1e-12
    assert np.array_equal(mom.sigma_tilde, 0.25 * population_second_moment(P, Domain.UNION))


def test_monte_carlo_moments():
    rng = stream(3)
    n = 200_000
    src = sample_labeled(P, Domain.SOURCE, n // 2, rng).xs
    tgt = sample_labeled(P, Domain.TARGET, n // 2, rng).xs
    x = np.vstack([src, tgt])
    a = sample_augmentation(x, rng)
    mom = augmentation_moments(P)
    assert np.max(np.abs(a.T @ a / n - mom.sigma_a)) <= 0.03
    b = sample_augmentation(x, rng)
    assert np.max(np.abs(a.T @ b / n - mom.sigma_tilde)) <= 0.03


def test_cross_covariance_with_complement_vanishes():
    mom = augmentation_moments(P)
    basis = np.vstack([w_inv(P), w_spu(P)])
    comp = np.linalg.svd(basis)[2][2:]
    assert np.max(np.abs(basis @ mom.sigma_a @ comp.T)) < 1e-10
    assert np.max(np.abs(basis @ mom.sigma_tilde @ comp.T)) < 1e-10


@pytest.mark.parametrize("p", [P, P.with_(gamma=1.7, sigma_sp=2.5, d_sp=7, d_in=3)])
def test_w_blocks_match_projection(p):
    mom = augmentation_moments(p)
    basis = np.vstack([w_inv(p), w_spu(p)])
    a, t = w_blocks(p)
    assert np.max(np.abs(basis @ mom.sigma_a @ basis.T - a)) < 1e-12
    assert np.max(np.abs(basis @ mom.sigma_tilde @ basis.T - t)) < 1e-12


def test_variant_block_differs_only_in_spurious_entry():
    a, _ = w_blocks(P)
    b, _ = w_blocks(P, sp_coef=4 / 3)
    assert (b - a)[1, 1] == pytest.approx(P.sigma_sp**2 * (4 / 3 - 2 / 3) / 4)
    assert (b - a)[0, 0] == 0 and (b - a)[0, 1] == 0


def test_w_blocks_requires_ones_direction():
    from uda_lab.model import random_wstar
    with pytest.raises(ValueError):
        w_blocks(ModelParams(w_star=random_wstar(5, stream(0))))
