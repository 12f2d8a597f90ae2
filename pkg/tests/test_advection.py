import numpy as np
import pytest

from framecast.advection import AdvectionParams, bilinear_shift, generate_advection_event


class TestBilinearShift:
    def test_uniform_field_invariant(self):
        field = np.full((8, 8), 3.25)
        for velocity in [(1.0, 0.0), (0.5, 0.25), (-2.3, 1.7)]:
            out = bilinear_shift(field, *velocity).astype(np.float32)
            assert np.array_equal(out, field.astype(np.float32))

    def test_integer_impulse_shift(self):
        field = np.zeros((5, 7))
        field[2, 3] = 1.0
        out = bilinear_shift(field, 1.0, 0.0)
        expected = np.zeros((5, 7))
        expected[2, 4] = 1.0
        assert np.array_equal(out, expected)

    def test_wraps_around(self):
        field = np.zeros((4, 4))
        field[0, 3] = 2.0
        out = bilinear_shift(field, 1.0, 0.0)
        assert out[0, 0] == 2.0

    def test_fractional_shift_conserves_mass(self):
        rng = np.random.default_rng(3)
        field = rng.uniform(0, 5, size=(16, 16))
        out = bilinear_shift(field, 0.7, -1.3)
        assert out.sum() == pytest.approx(field.sum(), rel=1e-12)


class TestGenerator:
    def test_determinism(self):
        params = AdvectionParams(seed=42)
        a = generate_advection_event(params, 6, (16, 16))
        b = generate_advection_event(params, 6, (16, 16))
        assert np.array_equal(a.frames, b.frames)
        assert a.context_len == b.context_len

    def test_impulse_advection_oracle(self):
        # one frame of pure shift: compare against an index-shift by hand
        params = AdvectionParams(velocity=(1.0, 0.0), n_blobs=1, growth_rate=1.0, seed=5)
        ev = generate_advection_event(params, 4, (12, 12))
        for t in range(3):
            rolled = np.roll(ev.frames[t], 1, axis=1)
            assert np.allclose(ev.frames[t + 1], rolled, atol=1e-6)

    def test_mass_conservation(self):
        params = AdvectionParams(velocity=(1.3, -0.6), n_blobs=4, growth_rate=1.0, seed=9)
        ev = generate_advection_event(params, 8, (24, 24))
        sums = ev.frames.sum(axis=(1, 2), dtype=np.float64)
        assert np.all(np.abs(sums - sums[0]) <= 1e-6 * sums[0])

    def test_growth_scales_sum(self):
        params = AdvectionParams(velocity=(0.0, 1.0), growth_rate=1.05, seed=2)
        ev = generate_advection_event(params, 5, (16, 16))
        sums = ev.frames.sum(axis=(1, 2), dtype=np.float64)
        ratios = sums[1:] / sums[:-1]
        assert ratios == pytest.approx(np.full(4, 1.05), rel=1e-5)

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            generate_advection_event(AdvectionParams(), 1, (8, 8))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            AdvectionParams(blob_radius=(0.0, 2.0))
        with pytest.raises(ValueError):
            AdvectionParams(blob_amplitude=(-1.0, 2.0))
        with pytest.raises(ValueError):
            AdvectionParams(n_blobs=0)
