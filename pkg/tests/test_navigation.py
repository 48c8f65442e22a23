import numpy as np
import pytest

from drumgen.navigation import (
    NavigationState,
    change_directions,
    decode_position,
    sample_center,
    z_digest,
)


class TestSampleCenter:
    def test_directions_orthonormal(self):
        state = sample_center(seed=0)
        assert abs(np.linalg.norm(state.e1) - 1.0) < 1e-9
        assert abs(np.linalg.norm(state.e2) - 1.0) < 1e-9
        assert abs(state.e1 @ state.e2) < 1e-9

    def test_deterministic_per_seed(self):
        a, b = sample_center(seed=11), sample_center(seed=11)
        assert np.array_equal(a.z_center, b.z_center)
        assert np.array_equal(a.e1, b.e1)
        assert np.array_equal(a.e2, b.e2)

    def test_center_dimension_128(self):
        assert sample_center(seed=1).z_center.shape == (128,)

    def test_distinct_seeds_differ(self):
        assert not np.array_equal(sample_center(seed=1).z_center, sample_center(seed=2).z_center)


class TestChangeDirections:
    def test_center_preserved(self):
        state = sample_center(seed=3)
        new = change_directions(state, seed=4)
        assert np.array_equal(new.z_center, state.z_center)

    def test_directions_change_and_stay_orthonormal(self):
        state = sample_center(seed=5)
        new = change_directions(state, seed=6)
        assert not np.array_equal(new.e1, state.e1)
        assert abs(np.linalg.norm(new.e1) - 1.0) < 1e-9
        assert abs(new.e1 @ new.e2) < 1e-9


class TestDecodePosition:
    def test_origin_returns_center(self):
        state = sample_center(seed=7)
        assert np.array_equal(decode_position(state, 0.0, 0.0), state.z_center)

    def test_unit_step_along_e1(self):
        state = sample_center(seed=8)
        z = decode_position(state, 1.0, 0.0)
        assert np.allclose(z, state.z_center + state.e1)

    def test_displacement_norm_equals_abs_u(self):
        state = sample_center(seed=9)
        for u in (-2.5, -1.0, 0.5, 3.0):
            z = decode_position(state, u)
            assert abs(np.linalg.norm(z - state.z_center) - abs(u)) < 1e-9

    def test_v_ignored_in_1d_mode(self):
        state = sample_center(seed=10, mode="1d")
        assert np.array_equal(decode_position(state, 0.5, 99.0), decode_position(state, 0.5, 0.0))

    def test_v_applies_in_2d_mode(self):
        state = sample_center(seed=10, mode="2d")
        z = decode_position(state, 0.5, 2.0)
        assert np.allclose(z, state.z_center + 0.5 * state.e1 + 2.0 * state.e2)

    def test_pure_function(self):
        state = sample_center(seed=12)
        assert np.array_equal(decode_position(state, 1.5, -0.5), decode_position(state, 1.5, -0.5))


class TestValidation:
    def test_bad_dimensions_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            NavigationState(np.zeros(64), np.zeros(128), np.zeros(128))

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            NavigationState(np.zeros(128), np.zeros(128), np.zeros(128), mode="3d")

    def test_digest_stable(self):
        z = np.arange(128, dtype=np.float64)
        assert z_digest(z) == z_digest(z.copy())
        assert z_digest(z) != z_digest(z + 1e-9)
