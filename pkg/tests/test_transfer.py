"""Transfer operator construction und application."""

import numpy as np
import pytest

from sisdc.collocation import gauss_lobatto, make_nodes
from sisdc.transfer import (
    SpaceTimeTransfer,
    apply_temporal,
    build_spatial_h_transfer,
    build_spatial_p_transfer,
    build_temporal_transfer,
    dump_pair_csv,
)


def gll(n):
    return 2.0 * make_nodes("lobatto", n).tau - 1.0


class TestTemporal:
    @pytest.mark.parametrize("convention", ["nodes_only", "nodes_plus_t0"])
    @pytest.mark.parametrize("kind", ["embedded", "l2"])
    def test_restrict_is_interp_transpose(self, convention, kind):
        t = build_temporal_transfer(
            make_nodes("radau_right", 3), make_nodes("radau_right", 5), kind, convention
        )
        assert np.array_equal(t.restrict, t.interp.T)

    def test_identical_rules_identity(self):
        r = make_nodes("radau_right", 4)
        t = build_temporal_transfer(r, r)
        for name in ("interp", "project", "restrict"):
            assert np.allclose(t.matrix(name), np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("kind", ["embedded", "l2"])
    def test_round_trip_on_coarse_space(self, kind):
        rc = make_nodes("radau_right", 3)
        rf = make_nodes("radau_right", 5)
        t = build_temporal_transfer(rc, rf, kind)
        rng = np.random.default_rng(7)
        u_c = rng.standard_normal((3, 6))
        back = apply_temporal(t, "project", apply_temporal(t, "interp", u_c))
        assert np.allclose(back, u_c, atol=1e-12)

    def test_linear_data_exact_both_ways(self):
        rc = make_nodes("radau_right", 2)
        rf = make_nodes("lobatto", 5)
        t = build_temporal_transfer(rc, rf)
        up = apply_temporal(t, "interp", rc.tau[:, None])
        assert np.allclose(up[:, 0], rf.tau, atol=1e-13)
        down = apply_temporal(t, "project", rf.tau[:, None])
        assert np.allclose(down[:, 0], rc.tau, atol=1e-13)

    def test_quadratic_up_down(self):
        # t^2 is not coarse-representable for M = 2: the upward interpolant
        # deviates from t^2 at fine nodes, yet the coarse samples come back
        rc = make_nodes("radau_right", 2)
        rf = make_nodes("radau_right", 3)
        t = build_temporal_transfer(rc, rf)
        u_c = (rc.tau**2)[:, None]
        up = apply_temporal(t, "interp", u_c)
        assert np.max(np.abs(up[:, 0] - rf.tau**2)) > 1e-3
        back = apply_temporal(t, "project", up)
        assert np.allclose(back, u_c, atol=1e-13)

    def test_nodes_plus_t0_carries_u0(self):
        rc = make_nodes("radau_right", 2)
        rf = make_nodes("radau_right", 3)
        t = build_temporal_transfer(rc, rf, node_convention="nodes_plus_t0")
        # quadratic through (0, u0): exact under the augmented convention
        u0 = np.array([1.0])
        poly = lambda s: 1.0 - 0.5 * s + 2.0 * s**2
        u_c = poly(rc.tau)[:, None]
        up = apply_temporal(t, "interp", u_c, u0)
        assert np.allclose(up[:, 0], poly(rf.tau), atol=1e-13)
        with pytest.raises(ValueError):
            apply_temporal(t, "interp", u_c)

    def test_determinism(self):
        a = build_temporal_transfer(make_nodes("radau_right", 3), make_nodes("radau_right", 7))
        b = build_temporal_transfer(make_nodes("radau_right", 3), make_nodes("radau_right", 7))
        assert np.array_equal(a.interp, b.interp)
        assert np.array_equal(a.project, b.project)

    def test_coarse_larger_rejected(self):
        with pytest.raises(ValueError):
            build_temporal_transfer(make_nodes("radau_right", 5), make_nodes("radau_right", 3))


class TestSpatialP:
    def test_constant_exact(self):
        t = build_spatial_p_transfer(3, 8, n_elem=4)
        u = np.ones(4 * 4)
        assert np.allclose(t.apply("interp", u), 1.0, atol=1e-13)
        assert np.allclose(t.apply("project", np.ones(4 * 9)), 1.0, atol=1e-13)

    def test_same_degree_identity(self):
        t = build_spatial_p_transfer(5, 5, n_elem=3)
        u = np.arange(3.0 * 6)
        assert np.array_equal(t.apply("interp", u), u)

    @pytest.mark.parametrize("kind", ["embedded", "l2"])
    def test_round_trip(self, kind):
        t = build_spatial_p_transfer(4, 9, n_elem=2, ncomp=3, projection_kind=kind)
        rng = np.random.default_rng(3)
        u = rng.standard_normal(3 * 2 * 5)
        back = t.apply("project", t.apply("interp", u))
        assert np.allclose(back, u, atol=1e-11)

    def test_l2_preserves_element_integral(self):
        pf, pc = 9, 4
        t = build_spatial_p_transfer(pc, pf, n_elem=1, projection_kind="l2")
        xf, wf = gauss_lobatto(pf + 1)
        xc, wc = gauss_lobatto(pc + 1)
        rng = np.random.default_rng(11)
        u = rng.standard_normal(pf + 1)
        down = t.apply("project", u)
        assert wc @ down == pytest.approx(wf @ u, abs=1e-12)

    def test_restrict_matches_dense_transpose(self):
        t = build_spatial_p_transfer(2, 4, n_elem=3)
        pair = t.as_pair()
        assert np.array_equal(pair.restrict, pair.interp.T)
        r = np.random.default_rng(5).standard_normal(3 * 5)
        assert np.allclose(t.apply("restrict", r), pair.interp.T @ r, atol=1e-13)


class TestSpatialH:
    def test_continuous_round_trip(self):
        p = 6
        t = build_spatial_h_transfer(3, p)
        # globally smooth coarse-representable data: per-element polynomials
        rng = np.random.default_rng(2)
        u = rng.standard_normal(3 * (p + 1))
        fine = t.apply("interp", u)
        assert np.allclose(t.apply("project", fine), u, atol=1e-11)

    def test_interp_splits_parent_polynomial(self):
        p = 4
        t = build_spatial_h_transfer(1, p)
        xi = gll(p + 1)
        u = xi**3 - 0.5 * xi  # cubic on the parent
        fine = t.apply("interp", u).reshape(2, p + 1)
        xl, xr = 0.5 * (xi - 1.0), 0.5 * (xi + 1.0)
        assert np.allclose(fine[0], xl**3 - 0.5 * xl, atol=1e-13)
        assert np.allclose(fine[1], xr**3 - 0.5 * xr, atol=1e-13)

    def test_average_policy_center_value(self):
        # discontinuous pair: center of the projected parent is the mean of
        # the two one-sided values
        p = 4  # even degree: parent owns a center node
        t = build_spatial_h_transfer(1, p, projection_kind="embedded", jump_policy="average")
        left = np.full(p + 1, 2.0)
        right = np.full(p + 1, 6.0)
        parent = t.apply("project", np.concatenate((left, right)))
        center = (p + 1) // 2
        assert parent[center] == pytest.approx(4.0, abs=1e-12)

    def test_linear_blend_keeps_outer_ends(self):
        p = 5
        t = build_spatial_h_transfer(1, p, jump_policy="linear_blend")
        left = np.linspace(0.0, 1.0, p + 1)
        right = np.linspace(3.0, 4.0, p + 1)  # jump of 2 at the interface
        parent = t.apply("project", np.concatenate((left, right)))
        assert parent[0] == pytest.approx(left[0], abs=1e-12)
        assert parent[-1] == pytest.approx(right[-1], abs=1e-12)

    def test_l2_conserves_parent_integral(self):
        p = 7
        t = build_spatial_h_transfer(2, p, projection_kind="l2")
        x, w = gauss_lobatto(p + 1)
        rng = np.random.default_rng(9)
        fine = rng.standard_normal(4 * (p + 1))
        parent = t.apply("project", fine).reshape(2, p + 1)
        kids = fine.reshape(2, 2, p + 1)
        for e in range(2):
            # children are half as long: physical integrals halve
            int_kids = 0.5 * (w @ kids[e, 0] + w @ kids[e, 1])
            assert w @ parent[e] == pytest.approx(int_kids, abs=1e-12)

    def test_wrong_fine_count_rejected(self):
        t = build_spatial_h_transfer(2, 3)
        with pytest.raises(ValueError):
            t.apply("project", np.zeros(3 * 4))  # 3 fine elements, not 4


class TestSpaceTime:
    def make(self):
        tt = build_temporal_transfer(make_nodes("radau_right", 3), make_nodes("radau_right", 5))
        ts = build_spatial_h_transfer(2, 4)
        return SpaceTimeTransfer(tt, ts)

    def test_composed_round_trip(self):
        st = self.make()
        rng = np.random.default_rng(4)
        u_c = rng.standard_normal((3, 2 * 5))
        fine = st.interp_solution(u_c)
        assert fine.shape == (5, 4 * 5)
        back = st.project_solution(fine)
        assert np.allclose(back, u_c, atol=1e-11)

    def test_factored_orders_commute(self):
        st = self.make()
        rng = np.random.default_rng(6)
        u_f = rng.standard_normal((5, 4 * 5))
        a = st.project_solution(u_f)
        # temporal first, then spatial
        tmp = apply_temporal(st.temporal, "project", u_f)
        b = np.stack([st.spatial.apply("project", u) for u in tmp])
        assert np.allclose(a, b, atol=1e-12)

    def test_zero_maps_to_zero(self):
        st = self.make()
        assert np.allclose(st.restrict_residual(np.zeros((5, 20))), 0.0)


def test_csv_dump(tmp_path):
    t = build_temporal_transfer(make_nodes("radau_right", 2), make_nodes("radau_right", 3))
    files = dump_pair_csv(t, str(tmp_path / "pair"))
    assert len(files) == 3
    rows = open(files[0]).read().strip().split("\n")
    A = np.array([[float(v) for v in r.split(",")] for r in rows])
    assert np.allclose(A, t.interp, atol=0)
