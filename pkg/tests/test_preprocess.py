import numpy as np
import pytest

from dynnet.exceptions import ConditionNumberWarning, GMembershipError
from dynnet.linalg import BlockLayout
from dynnet.oracle import lsim_exact
from dynnet.preprocess import (
    StateSpace,
    classify_diagonal_blocks,
    preprocess_lti,
)
from dynnet.systems import make_diffusion2d, make_random_mixed_system

from conftest import random_rotated


class TestStateSpace:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            StateSpace(a=np.eye(2), b=np.ones((3, 1)), c=np.ones((1, 2)), d=[[0.0]])
        with pytest.raises(ValueError):
            StateSpace(a=[[np.inf]], b=[[1.0]], c=[[1.0]], d=[[0.0]])

    def test_tuple_coercion(self):
        ss = StateSpace([[1.0]], [[1.0]], [[1.0]], [[0.0]])
        assert (ss.n_states, ss.n_inputs, ss.n_outputs) == (1, 1, 1)


class TestClassify:
    def test_all_real(self):
        infos = classify_diagonal_blocks(np.diag([-1.0, -2.0]), BlockLayout((2,)))
        assert infos[0].k_r == 2 and infos[0].k_c == 0
        assert infos[0].clazz == "G_r"

    def test_all_complex(self):
        m = np.array([[-1.0, 2.0], [-2.0, -1.0]])
        infos = classify_diagonal_blocks(m, BlockLayout((2,)))
        assert infos[0].k_r == 0 and infos[0].k_c == 1
        assert infos[0].clazz == "G_c"

    def test_mixed(self):
        m = np.zeros((3, 3))
        m[0, 0] = -3.0
        m[1:, 1:] = [[-1.0, 2.0], [-2.0, -1.0]]
        m[0, 1:] = 0.5
        infos = classify_diagonal_blocks(m, BlockLayout((3,)))
        assert (infos[0].k_r, infos[0].k_c, infos[0].clazz) == (1, 1, "G_mixed")

    def test_zero_upper_right_rejected(self):
        m = np.array([[-1.0, 0.0], [3.0, -2.0]])
        with pytest.raises(GMembershipError):
            classify_diagonal_blocks(m, BlockLayout((2,)))


class TestPreprocess:
    def test_diffusion_takes_unitary_path(self):
        ss, _ = make_diffusion2d()
        t_lti = preprocess_lti(ss, ss.n_states)
        assert t_lti.diagonalizable_path
        assert abs(t_lti.cond_t - 1.0) <= 1e-9
        assert all(b.dim == 1 for b in t_lti.blocks)
        assert np.array_equal(t_lti.ss.a, np.diag(np.diag(t_lti.ss.a)))

    def test_transform_invariants(self, rng):
        a, _ = random_rotated(rng, ["r", "c", "r", "c"])
        n = a.shape[0]
        ss = StateSpace(a, rng.standard_normal((n, 2)),
                        rng.standard_normal((2, n)), np.zeros((2, 2)))
        t_lti = preprocess_lti(ss, 3)
        scale = np.abs(a).max()
        assert np.abs(t_lti.ss.a - t_lti.t_inv @ a @ t_lti.t).max() <= 1e-9 * scale
        assert np.abs(t_lti.ss.b - t_lti.t_inv @ ss.b).max() <= 1e-12 * max(
            1, np.abs(ss.b).max()
        ) * t_lti.cond_t
        assert np.array_equal(t_lti.ss.c, ss.c @ t_lti.t)
        assert np.array_equal(t_lti.ss.d, ss.d)
        # transformed state matrix is exactly block diagonal
        for sl, b in zip(t_lti.layout.slices(), t_lti.blocks):
            assert b.dim == sl.stop - sl.start
        off_mask = np.ones_like(a, dtype=bool)
        for sl in t_lti.layout.slices():
            off_mask[sl, sl] = False
        assert np.all(t_lti.ss.a[off_mask] == 0.0)
        # every emitted block passes classification
        classify_diagonal_blocks(t_lti.ss.a, t_lti.layout)

    @pytest.mark.parametrize("seed", range(8))
    def test_io_map_preserved(self, seed):
        ss, n_blobs = make_random_mixed_system(seed)
        t_lti = preprocess_lti(ss, n_blobs)
        times = np.round(np.arange(0.0, 5.0001, 0.05), 10)
        rng = np.random.default_rng(seed + 999)
        u = rng.standard_normal((len(times), ss.n_inputs))
        y0 = lsim_exact(ss, times, u).outputs
        y1 = lsim_exact(t_lti.ss, times, u).outputs
        tol = 1e-7 * (1.0 + np.abs(y0).max()) * max(1.0, t_lti.cond_t)
        assert np.abs(y0 - y1).max() <= tol

    def test_max_cond_warning(self, rng):
        a, _ = random_rotated(rng, ["r", "r", "r"])
        ss = StateSpace(a, np.eye(3), np.eye(3), np.zeros((3, 3)))
        with pytest.warns(ConditionNumberWarning):
            preprocess_lti(ss, 3, max_cond=1.0 - 1e-9)

    def test_cluster_count_validation(self):
        ss = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            preprocess_lti(ss, 0)
        with pytest.raises(ValueError):
            preprocess_lti(ss, 2)
