import numpy as np
import pytest

from helpers import naive_forward_intensity

from hsphase.cube import SpectralGrid
from hsphase.masks import make_mask_set
from hsphase.metrics import empirical_snr_db
from hsphase.optics import DispersionModel, make_transfer_functions
from hsphase.sensing import (
    NoiseSpec,
    add_gaussian,
    add_poisson,
    chi_for_snr,
    forward_intensities,
    forward_intensity,
    observe,
    sigma_for_snr,
)

GRID = SpectralGrid((400e-9, 550e-9, 700e-9), 3.45e-6, 16, 16, 2e-3)
MODEL = DispersionModel.bk7()


@pytest.fixture(scope="module")
def scene():
    rng = np.random.default_rng(0)
    u_o = rng.normal(size=(3, 16, 16)) + 1j * rng.normal(size=(3, 16, 16))
    masks = make_mask_set(1, 2, GRID, MODEL)
    tfs = make_transfer_functions(GRID)
    return u_o, masks, tfs


class TestForwardIntensity:
    def test_zero_object(self, scene):
        _, masks, tfs = scene
        y = forward_intensity(np.zeros((3, 16, 16), dtype=complex), masks, tfs, 0)
        np.testing.assert_array_equal(y, np.zeros((16, 16)))

    def test_identity_operator_single_channel(self):
        from hsphase.masks import MaskSet

        grid = SpectralGrid((500e-9,), 3.45e-6, 8, 8, 0.0)
        masks = MaskSet(
            thickness=np.zeros((1, 8, 8)),
            transmittances=np.ones((1, 1, 8, 8), dtype=complex),
            cell_size=1,
            seed=0,
        )
        tfs = make_transfer_functions(grid)
        rng = np.random.default_rng(1)
        u_o = rng.normal(size=(1, 8, 8)) + 1j * rng.normal(size=(1, 8, 8))
        y = forward_intensity(u_o, masks, tfs, 0)
        np.testing.assert_allclose(y, np.abs(u_o[0]) ** 2, atol=1e-12)

    def test_matches_straight_line_oracle(self, scene):
        u_o, masks, tfs = scene
        for t in range(2):
            expected = naive_forward_intensity(
                u_o, masks.transmittances[t], GRID.wavelengths, GRID.pixel_pitch, GRID.distance
            )
            got = forward_intensity(u_o, masks, tfs, t)
            assert np.max(np.abs(got - expected)) < 1e-10

    def test_batch_matches_single(self, scene):
        u_o, masks, tfs = scene
        batched = forward_intensities(u_o, masks, tfs)
        for t in range(2):
            np.testing.assert_array_equal(batched[t], forward_intensity(u_o, masks, tfs, t))

    def test_global_phase_invariance(self, scene):
        u_o, masks, tfs = scene
        y0 = forward_intensities(u_o, masks, tfs)
        y1 = forward_intensities(np.exp(1j * 0.7123) * u_o, masks, tfs)
        np.testing.assert_allclose(y1, y0, rtol=1e-12, atol=1e-14)

    def test_nonnegative(self, scene):
        u_o, masks, tfs = scene
        assert np.all(forward_intensities(u_o, masks, tfs) >= 0)


class TestGaussianNoise:
    def test_sigma_closed_form(self):
        assert sigma_for_snr(np.ones((2, 4, 4)), 20.0) == pytest.approx(0.1, rel=1e-12)

    def test_sigma_noiseless_limit(self):
        assert sigma_for_snr(np.ones((1, 2, 2)), 300.0) < 1e-14

    def test_sigma_rejects_zero_signal(self):
        with pytest.raises(ValueError):
            sigma_for_snr(np.zeros((1, 2, 2)), 30.0)

    def test_zero_sigma_bitwise(self):
        y = np.random.default_rng(2).uniform(size=(2, 8, 8))
        np.testing.assert_array_equal(add_gaussian(y, 0.0, seed=0), y)

    def test_moments(self):
        y = np.zeros((1, 1000, 1000))
        sigma = 0.37
        z = add_gaussian(y, sigma, seed=3)
        n = z.size
        assert abs(z.mean()) < 4 * sigma / np.sqrt(n)
        assert abs(z.var() - sigma**2) < 0.01 * sigma**2

    def test_empirical_snr_calibration(self):
        rng = np.random.default_rng(4)
        y = rng.uniform(0.5, 2.0, size=(1, 1000, 1000))
        sigma = sigma_for_snr(y, 30.0)
        z = add_gaussian(y, sigma, seed=5)
        assert empirical_snr_db(y, z) == pytest.approx(30.0, abs=0.1)

    def test_negative_observations_kept(self):
        y = np.full((1, 100, 100), 1e-4)
        z = add_gaussian(y, 1.0, seed=6)
        assert np.any(z < 0)


class TestPoissonNoise:
    def test_chi_closed_form(self):
        assert chi_for_snr(np.full((1, 2, 2), 2.0), 10.0) == pytest.approx(5.0, rel=1e-12)

    def test_zero_rate_pixels_stay_zero(self):
        y = np.zeros((1, 64, 64))
        y[0, 0, 0] = 1.0
        z = add_poisson(y, 10.0, seed=7)
        assert np.all(z[0][y[0] == 0] == 0)

    def test_counts_are_integers(self):
        y = np.random.default_rng(8).uniform(size=(2, 16, 16))
        z = add_poisson(y, 50.0, seed=9)
        np.testing.assert_array_equal(z, np.round(z))

    def test_moments(self):
        y = np.full((1, 1000, 1000), 0.8)
        chi = 12.0
        z = add_poisson(y, chi, seed=10)
        lam = 0.8 * chi
        n = z.size
        assert abs(z.mean() - lam) < 3 * np.sqrt(lam / n)
        assert abs(z.var() / z.mean() - 1.0) < 0.02  # Fano factor

    def test_rejects_negative_intensity(self):
        with pytest.raises(ValueError):
            add_poisson(np.array([[[-1.0]]]), 1.0, seed=0)
        with pytest.raises(ValueError):
            chi_for_snr(np.array([[[-1.0]]]), 10.0)


class TestObserve:
    def test_none_kind_returns_clean(self, scene):
        u_o, masks, tfs = scene
        z, info = observe(u_o, masks, tfs, NoiseSpec("none", 54.0, seed=0))
        np.testing.assert_array_equal(z, forward_intensities(u_o, masks, tfs))
        assert info["kind"] == "none"

    def test_gaussian_info(self, scene):
        u_o, masks, tfs = scene
        z, info = observe(u_o, masks, tfs, NoiseSpec("gaussian", 40.0, seed=0))
        assert info["sigma"] > 0
        assert "snr_definition" in info

    def test_poisson_info(self, scene):
        u_o, masks, tfs = scene
        z, info = observe(u_o, masks, tfs, NoiseSpec("poisson", 30.0, seed=0))
        assert info["chi"] > 0
        assert np.all(z >= 0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec("laplace", 30.0)

    def test_determinism(self, scene):
        u_o, masks, tfs = scene
        z1, _ = observe(u_o, masks, tfs, NoiseSpec("gaussian", 34.0, seed=11))
        z2, _ = observe(u_o, masks, tfs, NoiseSpec("gaussian", 34.0, seed=11))
        np.testing.assert_array_equal(z1, z2)
