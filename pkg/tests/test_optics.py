import numpy as np
import pytest

from hsphase.cube import SpectralGrid, cube_inner
from hsphase.optics import (
    DispersionModel,
    angular_spectrum_tf,
    make_transfer_functions,
    propagate,
    transmittance,
)

PAPER_GRID = SpectralGrid((400e-9, 700e-9), 3.45e-6, 64, 64, 2e-3)


def project_onto_band(field, tf):
    band = tf != 0
    return np.fft.ifft2(band * np.fft.fft2(field, norm="ortho"), norm="ortho")


class TestCauchyIndex:
    def test_normal_dispersion(self):
        bk7 = DispersionModel.bk7()
        assert bk7.index(400e-9) > bk7.index(700e-9)

    def test_constant_index(self):
        flat = DispersionModel(1.5, 0.0, 0.0)
        assert flat.index(123e-9) == 1.5

    def test_bk7_sodium_line(self):
        # B + C/lam^2 at 587.6 nm: 1.5046 + 0.0042/0.5876^2 = 1.51676...
        assert DispersionModel.bk7().index(587.6e-9) == pytest.approx(1.5168, abs=1e-3)

    def test_rejects_nonpositive_wavelength(self):
        with pytest.raises(ValueError):
            DispersionModel.bk7().index(0.0)


class TestAngularSpectrumTf:
    def test_zero_distance_is_unity_on_band(self):
        tf = angular_spectrum_tf(PAPER_GRID, 400e-9, 0.0)
        band = tf != 0
        np.testing.assert_array_equal(tf[band], np.ones(np.count_nonzero(band), dtype=complex))

    def test_distance_conjugate_symmetry(self):
        fwd = angular_spectrum_tf(PAPER_GRID, 500e-9, 2e-3)
        bwd = angular_spectrum_tf(PAPER_GRID, 500e-9, -2e-3)
        np.testing.assert_allclose(np.conj(fwd), bwd, atol=1e-15)

    def test_unit_magnitude_on_band(self):
        tf = angular_spectrum_tf(PAPER_GRID, 400e-9, 2e-3)
        band = tf != 0
        assert band.all()  # paper parameters: whole FFT grid propagates
        assert np.max(np.abs(np.abs(tf[band]) - 1.0)) < 1e-12

    def test_evanescent_cutoff_with_large_product(self):
        # artificially long wavelength pushes corners past the cutoff
        grid = SpectralGrid((5e-6,), 3.45e-6, 64, 64, 1e-3)
        tf = angular_spectrum_tf(grid, 5e-6, 1e-3)
        assert np.any(tf == 0)
        band = tf != 0
        assert np.max(np.abs(np.abs(tf[band]) - 1.0)) < 1e-12

    def test_spectral_variation(self):
        a = angular_spectrum_tf(PAPER_GRID, 400e-9, 2e-3)
        b = angular_spectrum_tf(PAPER_GRID, 700e-9, 2e-3)
        assert np.max(np.abs(a - b)) > 0


class TestPropagate:
    def test_identity_filter(self):
        rng = np.random.default_rng(0)
        field = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
        out = propagate(field, np.ones((64, 64), dtype=complex))
        np.testing.assert_allclose(out, field, atol=1e-12)

    def test_round_trip_is_band_projection(self):
        rng = np.random.default_rng(1)
        grid = SpectralGrid((5e-6,), 3.45e-6, 64, 64, 1e-3)
        fwd = angular_spectrum_tf(grid, 5e-6, 1e-3)
        bwd = angular_spectrum_tf(grid, 5e-6, -1e-3)
        field = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
        projected = project_onto_band(field, fwd)
        out = propagate(propagate(projected, fwd), bwd)
        assert np.max(np.abs(out - projected)) < 1e-10

    def test_norm_preserved_on_band(self):
        rng = np.random.default_rng(2)
        tf = angular_spectrum_tf(PAPER_GRID, 400e-9, 2e-3)
        field = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
        field = project_onto_band(field, tf)
        n_in = np.linalg.norm(field)
        n_out = np.linalg.norm(propagate(field, tf))
        assert abs(n_out - n_in) < 1e-10 * n_in

    def test_adjoint_identity(self):
        rng = np.random.default_rng(3)
        for lam, d in [(400e-9, 2e-3), (550e-9, 1e-3), (700e-9, 5e-3)]:
            tf = angular_spectrum_tf(PAPER_GRID, lam, d)
            u = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
            v = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
            lhs = cube_inner(propagate(u, tf)[None], v[None])
            rhs = cube_inner(u[None], propagate(v, np.conj(tf))[None])
            assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            propagate(np.ones((4, 4)), np.ones((8, 8)))


class TestTransmittance:
    def test_zero_thickness(self):
        a = np.random.default_rng(4).uniform(0.1, 1.0, size=(8, 8))
        g = transmittance(a, np.zeros((8, 8)), 500e-9, DispersionModel.bk7())
        np.testing.assert_array_equal(g, a.astype(complex))

    def test_full_wave_plate(self):
        lam = 500e-9
        model = DispersionModel.bk7()
        h = np.full((4, 4), lam / (model.index(lam) - 1.0))
        g = transmittance(np.ones((4, 4)), h, lam, model)
        assert np.max(np.abs(g - 1.0)) < 1e-12

    def test_quarter_wave_phase(self):
        lam = 400e-9
        model = DispersionModel.bk7()
        h = np.full((2, 2), lam / 4.0)
        g = transmittance(np.ones((2, 2)), h, lam, model)
        expected = -2.0 * np.pi * 0.25 * (model.index(lam) - 1.0)
        np.testing.assert_allclose(np.angle(g), expected, atol=1e-12)
        assert expected == pytest.approx(-0.83, abs=0.01)


class TestTransferFunctionSet:
    def test_build_and_forward_backward(self):
        tfs = make_transfer_functions(PAPER_GRID)
        assert tfs.filters.shape == (2, 64, 64)
        rng = np.random.default_rng(5)
        fields = rng.normal(size=(2, 64, 64)) + 1j * rng.normal(size=(2, 64, 64))
        out = tfs.backward(tfs.forward(fields))
        # whole grid propagates at these parameters, so A^H A = identity
        np.testing.assert_allclose(out, fields, atol=1e-10)

    def test_padded_round_trip(self):
        tfs = make_transfer_functions(PAPER_GRID, pad_factor=2)
        assert tfs.filters.shape == (2, 128, 128)
        rng = np.random.default_rng(6)
        fields = rng.normal(size=(2, 64, 64)) + 1j * rng.normal(size=(2, 64, 64))
        out = tfs.forward(fields)
        assert out.shape == (2, 64, 64)
        # d=0 padded propagation is embed+crop = identity
        tfs0 = make_transfer_functions(PAPER_GRID, distance=0.0, pad_factor=2)
        np.testing.assert_allclose(tfs0.forward(fields), fields, atol=1e-12)

    def test_channel_variants_match(self):
        tfs = make_transfer_functions(PAPER_GRID)
        rng = np.random.default_rng(7)
        field = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
        np.testing.assert_array_equal(
            tfs.forward_channel(field, 1), tfs.forward(np.stack([field, field]))[1]
        )
