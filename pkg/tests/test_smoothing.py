import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import savgol_filter
from sklearn.base import clone

from specmix.io import HyperCube
from specmix.smoothing import (
    SavitzkyGolaySmoother,
    SgParams,
    sg_coefficients,
    sg_smooth_spectrum,
    smooth_cube,
)


def lstsq_weights(window, order):
    """Centre weights from fitting each unit impulse by an SVD least-squares solve."""
    half = window // 2
    positions = np.arange(-half, half + 1, dtype=float)
    design = np.vander(positions, order + 1, increasing=True)
    weights = np.empty(window)
    for i in range(window):
        impulse = np.zeros(window)
        impulse[i] = 1.0
        poly, *_ = np.linalg.lstsq(design, impulse, rcond=None)
        weights[i] = poly[0]  # value of the fitted polynomial at position 0
    return weights


windows_orders = st.integers(1, 12).flatmap(lambda h: st.tuples(st.just(2 * h + 1), st.integers(0, min(2 * h, 6))))


class TestCoefficients:
    def test_five_two_matches_oracle_and_closed_form(self):
        got = sg_coefficients(SgParams(5, 2))
        np.testing.assert_allclose(got, lstsq_weights(5, 2), atol=1e-12, rtol=0)
        np.testing.assert_allclose(got, np.array([-3, 12, 17, 12, -3]) / 35, atol=1e-12, rtol=0)

    def test_degree_zero_is_mean(self):
        np.testing.assert_allclose(sg_coefficients(SgParams(3, 0)), [1 / 3] * 3, atol=1e-15)

    def test_interpolating_fit_is_delta(self):
        np.testing.assert_allclose(sg_coefficients(SgParams(7, 6)), [0, 0, 0, 1, 0, 0, 0], atol=1e-10)

    @given(windows_orders)
    def test_oracle_sum_and_symmetry(self, wo):
        window, order = wo
        c = sg_coefficients(SgParams(window, order))
        np.testing.assert_allclose(c, lstsq_weights(window, order), atol=1e-9)
        assert abs(c.sum() - 1.0) < 1e-12
        np.testing.assert_array_equal(c, c[::-1])

    @pytest.mark.parametrize("window, order", [(4, 2), (5, 5), (5, 7), (1, 0), (5, -1)])
    def test_invalid(self, window, order):
        with pytest.raises(ValueError):
            SgParams(window, order)

    def test_accepts_tuple(self):
        np.testing.assert_array_equal(sg_coefficients((5, 2)), sg_coefficients(SgParams(5, 2)))


class TestSmoothSpectrum:
    def test_constant(self):
        out = sg_smooth_spectrum(np.full(30, 2.5), SgParams(11, 3))
        np.testing.assert_allclose(out, 2.5, rtol=1e-13)

    def test_ramp_interior(self):
        ramp = np.arange(40, dtype=float)
        out = sg_smooth_spectrum(ramp, SgParams(11, 1))
        np.testing.assert_allclose(out[5:-5], ramp[5:-5], atol=1e-11)

    def test_impulse_centre(self):
        out = sg_smooth_spectrum([0, 0, 1, 0, 0], SgParams(5, 2))
        assert abs(out[2] - 17 / 35) < 1e-12

    def test_mirror_edges_match_scipy(self, rng):
        x = rng.random(50)
        for window, order in [(5, 2), (11, 3), (7, 0)]:
            np.testing.assert_allclose(
                sg_smooth_spectrum(x, SgParams(window, order)),
                savgol_filter(x, window, order, mode="mirror"),
                atol=1e-12,
            )

    @settings(max_examples=50)
    @given(windows_orders, st.integers(0, 2**32 - 1))
    def test_polynomial_reproduced(self, wo, seed):
        window, order = wo
        r = np.random.default_rng(seed)
        t = np.linspace(-1, 1, window + 20)
        y = np.polyval(r.normal(size=order + 1), t)
        out = sg_smooth_spectrum(y, SgParams(window, order))
        h = window // 2
        np.testing.assert_allclose(out[h:-h], y[h:-h], atol=1e-8 * (1 + np.abs(y).max()))

    def test_linearity(self, rng):
        x, y = rng.random(25), rng.random(25)
        p = SgParams(9, 2)
        np.testing.assert_allclose(
            sg_smooth_spectrum(2 * x - 3 * y, p),
            2 * sg_smooth_spectrum(x, p) - 3 * sg_smooth_spectrum(y, p),
            atol=1e-12,
        )

    def test_too_short(self):
        with pytest.raises(ValueError, match="fewer than window"):
            sg_smooth_spectrum(np.ones(5), SgParams(7, 2))


class TestSmoothCube:
    def test_single_pixel(self, rng):
        x = rng.random(20)
        cube = smooth_cube(HyperCube(x.reshape(1, 1, -1)), SgParams(5, 2))
        np.testing.assert_allclose(cube.data[0, 0], sg_smooth_spectrum(x.astype(np.float32), SgParams(5, 2)), atol=1e-6)

    def test_constant_spectra(self):
        data = np.tile(np.array([1.0, 2.0, 3.0, 4.0])[:, None, None], (1, 3, 12))
        out = smooth_cube(HyperCube(data), SgParams(5, 3))
        np.testing.assert_allclose(out.data, data, rtol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_pixel_permutation_commutes(self, seed):
        r = np.random.default_rng(seed)
        pixels = r.random((12, 15))
        perm = r.permutation(12)
        p = SgParams(5, 2)
        a = smooth_cube(HyperCube.from_pixels(pixels[perm], 3, 4), p).pixels
        b = smooth_cube(HyperCube.from_pixels(pixels, 3, 4), p).pixels[perm]
        np.testing.assert_array_equal(a, b)

    def test_threads_do_not_change_bytes(self, rng):
        cube = HyperCube(rng.random((40, 30, 20)))
        one = smooth_cube(cube, SgParams(), n_jobs=1)
        many = smooth_cube(cube, SgParams(), n_jobs=4)
        assert one.data.tobytes() == many.data.tobytes()


class TestEstimator:
    def test_shapes_and_params(self, rng):
        est = SavitzkyGolaySmoother(window=5, order=2)
        assert clone(est).get_params() == {"window": 5, "order": 2, "n_jobs": 1}
        X3 = rng.random((3, 4, 10))
        out3 = est.fit_transform(X3)
        assert out3.shape == X3.shape
        np.testing.assert_array_equal(out3.reshape(12, 10), est.transform(X3.reshape(12, 10)))

    def test_band_count_checked(self, rng):
        est = SavitzkyGolaySmoother(5, 2).fit(rng.random((4, 10)))
        with pytest.raises(ValueError, match="bands"):
            est.transform(rng.random((4, 11)))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            SavitzkyGolaySmoother().transform(np.ones((2, 20)))
