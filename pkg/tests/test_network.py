import numpy as np
import pytest

from dynnet.exceptions import DegenerateNeuronError, GMembershipError
from dynnet.linalg import BlockLayout
from dynnet.network import (
    HorizontalLayer,
    NeuronSpec,
    SecondOrderSystem,
    build_dynn,
    detect_block_diagonal_layout,
    interleave_permutation,
    map_eta,
    map_hidden,
    map_lti_second_order,
    map_output,
    n_dynn_forward,
    n_dynn_inverse,
    permute_complex_block,
)
from dynnet.oracle import lsim_exact
from dynnet.preprocess import StateSpace, preprocess_lti
from dynnet.simulate import SolverConfig, forward_pass_whole, integrate_dense
from dynnet.systems import make_diffusion2d

from conftest import random_quasi_triangular


def make_gc_block(rng, n_pairs, coupling=0.6):
    """Member of the all-pairs sparse class: 2x2 diagonal blocks with
    nonzero upper-right entries, block-upper-triangular coupling."""
    n = 2 * n_pairs
    m = np.triu(rng.uniform(-coupling, coupling, size=(n, n)), 1)
    for k in range(n_pairs):
        re = rng.uniform(-4.0, -0.5)
        im = rng.uniform(0.3, 2.0)
        m[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = [[re, -im], [im, re]]
        m[2 * k + 1, 2 * k] = im  # keep exact
    return m


class TestPermuteComplexBlock:
    def test_single_pair_identity_content(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        t, (a, b, c, d) = permute_complex_block(m)
        assert a == [[1.0]] and b == [[2.0]] and c == [[3.0]] and d == [[4.0]]

    def test_two_pairs_symbolic_entries(self):
        # entries tagged by position: block (i,j) holds [[aij, bij], [cij, dij]]
        n = 2
        m = np.zeros((4, 4))
        for i in range(n):
            for j in range(i, n):
                tag = 10.0 * (i + 1) + (j + 1)
                m[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = [
                    [tag + 0.1, tag + 0.2],
                    [tag + 0.3, tag + 0.4],
                ]
        t, (a, b, c, d) = permute_complex_block(m)
        for i in range(n):
            for j in range(i, n):
                tag = 10.0 * (i + 1) + (j + 1)
                assert a[i, j] == tag + 0.1
                assert b[i, j] == tag + 0.2
                assert c[i, j] == tag + 0.3
                assert d[i, j] == tag + 0.4
        assert np.array_equal(t @ m @ t.T, np.block([[a, b], [c, d]]))

    def test_random_gc_member_blocks_triangular(self, rng):
        m = make_gc_block(rng, 3)
        t, blocks = permute_complex_block(m)
        assert np.array_equal(t @ t.T, np.eye(6))
        for blk in blocks:
            assert np.all(np.tril(blk, -1) == 0.0)  # exact zeros

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            permute_complex_block(np.eye(3))


class TestMapEta:
    def test_single_pair_hand_values(self):
        a, b = -1.0, 2.0
        em = map_eta(np.array([[a, -b], [b, a]]), np.array([[1.0], [0.0]]))
        assert np.allclose(em.w_mat, [[a / b]])
        assert np.allclose(em.q_mat, [[-1.0 / b]])
        assert np.allclose(em.z_mat, [[1.0 / b]])

    def test_pure_rotation_zero_input(self):
        em = map_eta(np.array([[0.0, -1.0], [1.0, 0.0]]), np.array([[0.0], [0.0]]))
        assert np.allclose(em.w_mat, [[0.0]])
        assert np.allclose(em.q_mat, [[-1.0]])
        assert np.allclose(em.z_mat, [[0.0]])

    def test_triangular_structure(self, rng):
        m = make_gc_block(rng, 3)
        em = map_eta(m, rng.standard_normal((6, 2)))
        assert np.all(np.tril(em.w_mat, -1) == 0.0)
        assert np.all(np.tril(em.q_mat, -1) == 0.0)

    def test_reconstructs_discarded_state(self, rng):
        # mixed 4x4 block: 2 reals then one pair
        a_l = random_quasi_triangular(rng, ["r", "r", "c"])
        b_l = rng.standard_normal((4, 2))
        em = map_eta(a_l, b_l)
        times = np.round(np.arange(0.0, 4.0001, 0.02), 10)
        u = rng.standard_normal((len(times), 2))
        res = lsim_exact(StateSpace(a_l, b_l, np.eye(4), np.zeros((4, 2))), times, u)
        x = res.states
        xi_c, eta = x[:, 2], x[:, 3]
        xdot = x @ a_l.T + u @ b_l.T
        xi_c_dot = xdot[:, 2]
        recon = em.w_mat[0, 0] * xi_c + em.q_mat[0, 0] * xi_c_dot + u @ em.z_mat[0]
        assert np.abs(recon - eta).max() <= 1e-7 * (1 + np.abs(eta).max())

    def test_requires_pairs(self):
        with pytest.raises(ValueError):
            map_eta(np.diag([-1.0, -2.0]), np.zeros((2, 1)))


class TestMapLtiSecondOrder:
    def test_pure_real_block(self, rng):
        a_l = np.diag([-2.0, -3.0])
        b_l = rng.standard_normal((2, 3))
        sos = map_lti_second_order(a_l, b_l)
        assert np.array_equal(sos.m, np.zeros((2, 2)))
        assert np.array_equal(sos.c, np.eye(2))
        assert np.array_equal(sos.k, np.diag([2.0, 3.0]))
        assert np.array_equal(sos.e, b_l)
        assert np.array_equal(sos.v, np.zeros((2, 3)))

    def test_single_pair_characteristic_roots(self):
        a, b = -1.0, 2.0
        sos = map_lti_second_order(np.array([[a, -b], [b, a]]), np.array([[1.0], [0.0]]))
        # xi'' + c xi' + k xi = ... with roots a +- i b
        roots = np.roots([sos.m[0, 0], sos.c[0, 0], sos.k[0, 0]])
        assert np.allclose(sorted(roots, key=lambda z: z.imag), [a - b * 1j, a + b * 1j])

    def test_structural_membership_exact(self, rng):
        a_l = random_quasi_triangular(rng, ["r", "c", "c"])
        sos = map_lti_second_order(a_l, rng.standard_normal((5, 2)))
        assert np.all(sos.m == np.diag(np.diag(sos.m)))
        assert np.all(np.tril(sos.c, -1) == 0.0)
        assert np.all(np.tril(sos.k, -1) == 0.0)
        assert np.all(sos.v[:1] == 0.0)  # first-order rows have no du weight

    def test_mixed_block_equivalence_to_lti(self, rng):
        # companion-form integration of the second-order system must match
        # the permuted state of the original block
        a_l = random_quasi_triangular(rng, ["r", "c"])
        d_i = 2
        b_l = rng.standard_normal((3, d_i))
        sos = map_lti_second_order(a_l, b_l)
        k_r, k_c = 1, 1

        times = np.round(np.arange(0.0, 4.0001, 0.05), 10)
        u_samples = rng.standard_normal((len(times), d_i))
        from dynnet.simulate import derive_input_signal

        sig = derive_input_signal(times, u_samples)

        # companion states: (xi_r, xi_c, xi_c')
        def rhs(t, z):
            u = sig.eval_u(t)
            du = sig.eval_du(t)
            xi = z[: k_r + k_c]
            xid_c = z[k_r + k_c :]
            rhs_r = (sos.e[:k_r] @ u - sos.k[:k_r] @ xi
                     - sos.c[:k_r, k_r:] @ xid_c)
            rhs_c = (sos.e[k_r:] @ u + sos.v[k_r:] @ du
                     - sos.k[k_r:] @ xi - sos.c[k_r:, k_r:] @ xid_c)
            return np.concatenate([rhs_r, xid_c, rhs_c])

        cfg = SolverConfig(rtol=1e-11, atol=1e-11).with_breakpoints(times)
        traj = integrate_dense(rhs, np.zeros(3), (0.0, 4.0), cfg)
        z = traj.eval(times)

        ref = lsim_exact(StateSpace(a_l, b_l, np.eye(3), np.zeros((3, d_i))),
                         times, u_samples)
        want_xi = np.column_stack([ref.states[:, 0], ref.states[:, 1]])
        assert np.abs(z[:, :2] - want_xi).max() <= 1e-7 * (1 + np.abs(want_xi).max())


def random_layer(rng, orders, d_i):
    neurons = []
    n = len(orders)
    for i, order in enumerate(orders):
        width = 2 * d_i + sum(1 if o == "first" else 2 for o in orders[i + 1 :])
        neurons.append(
            NeuronSpec(
                order=order,
                m=0.0 if order == "first" else 1.0,
                c=float(rng.uniform(0.5, 2.0)),
                k=float(rng.uniform(0.5, 4.0)),
                w=rng.standard_normal(width),
            )
        )
    return HorizontalLayer(neurons=tuple(neurons), n_inputs=d_i)


class TestNDynnBijection:
    def test_single_first_order(self):
        layer = HorizontalLayer(
            neurons=(NeuronSpec(order="first", m=0.0, c=1.0, k=2.0,
                                w=np.array([0.5, -0.5])),),
            n_inputs=1,
        )
        sos = n_dynn_forward(layer)
        assert sos.m[0, 0] == 0.0 and sos.c[0, 0] == 1.0 and sos.k[0, 0] == 2.0
        assert sos.e[0, 0] == 0.5 and sos.v[0, 0] == -0.5

    def test_tail_signs_match_weight_partition(self, rng):
        layer = random_layer(rng, ["second", "second"], d_i=1)
        sos = n_dynn_forward(layer)
        w0 = layer.neurons[0].w
        assert sos.k[0, 1] == -w0[2]
        assert sos.c[0, 1] == -w0[3]

    @pytest.mark.parametrize("orders", [
        ["first"], ["second"], ["first", "second"],
        ["first", "first", "second", "second"],
    ])
    def test_round_trip_exact(self, orders, rng):
        layer = random_layer(rng, orders, d_i=2)
        back = n_dynn_inverse(n_dynn_forward(layer), n_inputs=2)
        assert len(back.neurons) == len(layer.neurons)
        for a, b in zip(layer.neurons, back.neurons):
            assert a.order == b.order
            assert (a.m, a.c, a.k) == (b.m, b.c, b.k)
            assert np.array_equal(a.w, b.w)

    def test_mass_normalization(self):
        sos = SecondOrderSystem(
            m=np.array([[2.0]]), c=np.array([[4.0]]), k=np.array([[8.0]]),
            e=np.array([[2.0]]), v=np.array([[0.0]]),
        )
        layer = n_dynn_inverse(sos)
        nr = layer.neurons[0]
        assert (nr.m, nr.c, nr.k) == (1.0, 2.0, 4.0)
        assert nr.w[0] == 1.0

    def test_unrepresentable_coupling_rejected(self):
        c = np.array([[1.0, 0.5], [0.0, 1.0]])  # couples to a first-order xi'
        sos = SecondOrderSystem(
            m=np.zeros((2, 2)), c=c, k=np.eye(2),
            e=np.zeros((2, 1)), v=np.zeros((2, 1)),
        )
        with pytest.raises(ValueError, match="not representable"):
            n_dynn_inverse(sos)

    def test_degenerate_first_order_rejected(self):
        with pytest.raises(DegenerateNeuronError):
            NeuronSpec(order="first", m=0.0, c=0.0, k=1.0, w=np.zeros(2))


class TestMapHidden:
    def test_diffusion_single_neuron_layers(self):
        ss, _ = make_diffusion2d()
        t_lti = preprocess_lti(ss, ss.n_states)
        layers = map_hidden(t_lti.ss.a, t_lti.ss.b, t_lti.layout)
        assert len(layers) == 400
        assert all(l.n_neurons == 1 and l.k_r == 1 for l in layers)

    def test_layout_detection(self):
        a = np.diag([-1.0, -2.0, -3.0])
        a[1, 2] = 0.5
        layout = detect_block_diagonal_layout(a)
        assert layout.sizes == (1, 2)

    def test_block_index_in_errors(self):
        a = np.zeros((3, 3))
        a[0, 0] = -1.0
        a[1:, 1:] = [[-1.0, 0.0], [3.0, -2.0]]  # zero upper-right pair block
        with pytest.raises(GMembershipError, match="block 1"):
            map_hidden(a, np.ones((3, 1)), BlockLayout((1, 2)))


class TestMapOutput:
    def test_all_real_psi_is_d(self, rng):
        a = np.diag([-1.0, -2.0])
        ss = StateSpace(a, rng.standard_normal((2, 2)),
                        rng.standard_normal((2, 2)), rng.standard_normal((2, 2)))
        t_lti = preprocess_lti(ss, 2)
        phi, psi = map_output(t_lti)
        assert np.array_equal(psi, ss.d)
        for layer_phi in phi:
            for p in layer_phi:
                assert p.shape[1] == 1  # derivative column dropped

    def test_single_pair_state_reconstruction(self):
        a, b = -1.0, 2.0
        ss = StateSpace([[a, -b], [b, a]], [[1.0], [0.0]], np.eye(2),
                        np.zeros((2, 1)))
        params, t_lti = build_dynn(ss, 1)
        times = np.round(np.arange(0.0, 6.0001, 0.05), 10)
        u = np.sin(times)[:, None]
        out, _ = forward_pass_whole(
            params,
            __import__("dynnet.simulate", fromlist=["derive_input_signal"])
            .derive_input_signal(times, u),
            (0.0, 6.0),
            SolverConfig(),
        )
        ref = lsim_exact(ss, times, u)
        assert np.abs(out(times) - ref.states).max() <= 1e-7 * (
            1 + np.abs(ref.states).max()
        )

    def test_phi_columns_match_independent_assembly(self, rng):
        # re-derive C*F and C*Z + D directly from the eta-map formulas
        a_l = random_quasi_triangular(rng, ["r", "c", "c"])
        d_i, d_o = 2, 3
        b_l = rng.standard_normal((5, d_i))
        c_mat = rng.standard_normal((d_o, 5))
        d_mat = rng.standard_normal((d_o, d_i))
        ss = StateSpace(a_l, b_l, c_mat, d_mat)
        t_lti = preprocess_lti(ss, 1)
        phi, psi = map_output(t_lti)

        k_r, k_c = t_lti.blocks[0].k_r, t_lti.blocks[0].k_c
        n_l = k_r + k_c
        em = map_eta(t_lti.ss.a, t_lti.ss.b)
        p_xi = np.zeros((5, n_l))
        p_eta = np.zeros((5, k_c))
        for r in range(k_r):
            p_xi[r, r] = 1.0
        for j in range(k_c):
            p_xi[k_r + 2 * j, k_r + j] = 1.0
            p_eta[k_r + 2 * j + 1, j] = 1.0
        x_xi = p_xi + p_eta @ np.hstack([np.zeros((k_c, k_r)), em.w_mat])
        x_xid = p_eta @ np.hstack([np.zeros((k_c, k_r)), em.q_mat])
        want_psi = t_lti.ss.c @ (p_eta @ em.z_mat) + d_mat
        assert np.allclose(psi, want_psi, atol=1e-12)
        for t in range(n_l):
            want_xi_col = t_lti.ss.c @ x_xi[:, t]
            want_xid_col = t_lti.ss.c @ x_xid[:, t]
            got = phi[0][t]
            assert np.allclose(got[:, 0], want_xi_col, atol=1e-12)
            if t < k_r:
                assert np.all(x_xid[:, t] == 0.0)
            else:
                assert np.allclose(got[:, 1], want_xid_col, atol=1e-12)


class TestBuildDynn:
    def test_scalar_system(self):
        ss = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        params, t_lti = build_dynn(ss, 1)
        assert params.n_layers == 1 and params.layer_sizes == (1,)
        nr = params.layers[0].neurons[0]
        assert (nr.order, nr.m, nr.c, nr.k) == ("first", 0.0, 1.0, 1.0)
        assert np.allclose(params.phi[0][0], [[1.0]])
        assert np.array_equal(params.psi, [[0.0]])

    def test_ladder_l4_architecture(self):
        from dynnet.systems import make_conditioning_ladder

        params, t_lti = build_dynn(make_conditioning_ladder(), 4)
        assert params.n_layers == 4
        assert params.n_first_order == 10 and params.n_second_order == 0

    def test_architecture_summary(self):
        ss = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        params, _ = build_dynn(ss, 1)
        s = params.architecture_summary()
        assert s["n_layers"] == 1 and s["layer_sizes"] == [1]
