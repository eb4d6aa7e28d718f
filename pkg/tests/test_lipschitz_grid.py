"""Gridded metrics: mollification, FD curvature, cone scans, deficit curves."""

import math

import numpy as np
import pytest

from lorentz_synth import lipschitz_grid as L
from lorentz_synth.errors import DegenerateMetricError, InvalidInputError
from lorentz_synth.lipschitz_grid import _ricci_arrays


def kinked_grid(shape=(1025, 129)):
    return L.warped_grid(lambda t: 1.0 - np.abs(t) / 4.0, (-2.0, 2.0), (0.0, 2.0), shape)


class TestMetricGrid:
    def test_rejects_riemannian_signature(self):
        def fn(pts):
            g = np.zeros(pts.shape[:-1] + (2, 2))
            g[..., 0, 0] = 1.0
            g[..., 1, 1] = 1.0
            return g

        with pytest.raises(DegenerateMetricError):
            L.metric_grid(fn, ((0, 1), (0, 1)), (9, 9))

    def test_rejects_nonfinite_weight(self):
        with pytest.raises(InvalidInputError):
            L.minkowski_grid(((0, 1), (0, 1)), (9, 9),
                             weight=lambda p: np.where(p[..., 0] > 0.5, np.nan, 0.0))

    def test_lipschitz_bound_records_the_steepest_quotient(self):
        g = kinked_grid((257, 17))
        # d(a^2)/dt = 2 a a' peaks at |a'| = 1/4, a = 1
        assert g.lipschitz_bound == pytest.approx(0.5, abs=5e-3)

    def test_binary_roundtrip(self, tmp_path):
        g = L.warped_grid(np.cosh, (-1, 1), (0, 1), (33, 17),
                          weight=lambda t: 0.3 * t)
        L.save_grid(g, tmp_path / "g.bin")
        assert L.load_grid(tmp_path / "g.bin") == g


class TestMollify:
    def test_constant_grid_is_untouched(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (65, 65))
        sm = L.mollify(g, 0.1)
        assert np.allclose(sm.nodes[sm.valid], g.nodes[sm.valid], atol=1e-14)
        assert sm.sup_error <= 1e-14

    def test_kink_smoothing_leaves_a_negative_curvature_bump(self):
        # a = 1 - |t|/4 has a'' = -(1/2) delta_0; after smoothing the second
        # derivative must be a negative bump of mass ~ -1/2 and width ~ eps
        g = kinked_grid()
        sm = L.mollify(g, 0.2)
        ts = sm.axes()[0]
        mid = sm.shape[1] // 2
        a_eff = np.sqrt(-sm.nodes[:, mid, 1, 1])
        h = ts[1] - ts[0]
        app = np.gradient(np.gradient(a_eff, h), h)
        sel = sm.valid[:, mid]
        mass = np.trapezoid(app[sel], ts[sel])
        assert mass == pytest.approx(-0.5, abs=5e-3)
        support = ts[sel][np.abs(app[sel]) > 1e-3]
        assert np.max(np.abs(support)) < 0.25

    def test_sup_error_is_linear_in_the_radius(self):
        g = kinked_grid((513, 65))
        errs = [L.mollify(g, e).sup_error for e in (0.4, 0.2, 0.1)]
        assert errs == sorted(errs, reverse=True)
        for e, err in zip((0.4, 0.2, 0.1), errs):
            assert err <= g.lipschitz_bound * e + 1e-12

    def test_w11_convergence_of_first_derivatives(self):
        g = kinked_grid((513, 65))
        h = g.spacing[0]
        dists = []
        region = None
        for e in (0.4, 0.2, 0.1):
            sm = L.mollify(g, e)
            if region is None:
                region = sm.valid[1:, :] & sm.valid[:-1, :]
            d_sm = np.diff(sm.nodes[..., 1, 1], axis=0) / h
            d_g = np.diff(g.nodes[..., 1, 1], axis=0) / h
            dists.append(float(np.mean(np.abs(d_sm - d_g)[region])))
        assert dists == sorted(dists, reverse=True)

    def test_underresolved_kernel_is_rejected(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (17, 17))
        with pytest.raises(InvalidInputError):
            L.mollify(g, 0.05)

    def test_signature_loss_is_reported(self):
        # an oscillating off-diagonal coefficient keeps det = -delta pointwise,
        # but smoothing replaces b^2 by its average and the determinant flips
        def fn(pts):
            b = np.sin(40.0 * pts[..., 0])
            g = np.zeros(pts.shape[:-1] + (2, 2))
            g[..., 0, 0] = 1.0
            g[..., 0, 1] = b
            g[..., 1, 0] = b
            g[..., 1, 1] = b ** 2 - 0.05
            return g

        g = L.metric_grid(fn, ((0, 2), (0, 1)), (513, 17))
        with pytest.raises(DegenerateMetricError):
            L.mollify(g, 0.3)


class TestConeNarrowing:
    def test_flat_example(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (17, 17))
        out = L.cone_narrowed(g, 0.1)
        assert np.allclose(out.nodes[..., 0, 0], 0.9)
        assert L.cone_narrowed(g, 0.0) is g

    def test_losing_the_timelike_eigenvalue_raises(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (9, 9))
        with pytest.raises(DegenerateMetricError):
            L.cone_narrowed(g, 2.0)

    def test_narrowed_causal_vectors_are_timelike_for_the_rough_input(self):
        raw = kinked_grid((513, 65))
        sm = L.mollify(raw, 0.25)
        nr = L.cone_narrowed(sm, L.narrowing_constant(sm))
        rng = np.random.default_rng(19)
        idx = np.nonzero(nr.valid)
        pick = rng.integers(0, len(idx[0]), 1000)
        for a, b in zip(idx[0][pick], idx[1][pick]):
            gt = nr.nodes[a, b]
            s_null = math.sqrt(gt[0, 0] / -gt[1, 1])
            v = np.array([1.0, rng.uniform(-1.0, 1.0) * s_null])
            assert v @ gt @ v >= -1e-12
            assert v @ raw.nodes[a, b] @ v > 0.0


class TestCurvature:
    def test_constant_metric_has_no_christoffels(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (33, 33))
        f = L.christoffels(g)
        assert np.max(np.abs(f.christoffel[f.valid])) == 0.0

    def test_warped_christoffels_match_hand_values(self):
        g = L.warped_grid(np.cosh, (-1.2, 1.2), (0.0, 0.5), (257, 33))
        f = L.christoffels(g)
        ts = g.axes()[0]
        want_txx = (np.cosh(ts) * np.sinh(ts))[:, None]
        want_xtx = np.tanh(ts)[:, None]
        sel = f.valid
        assert np.max(np.abs((f.christoffel[..., 0, 1, 1] - want_txx)[sel])) < 1e-4
        assert np.max(np.abs((f.christoffel[..., 1, 0, 1] - want_xtx)[sel])) < 1e-4
        assert np.array_equal(f.christoffel[..., :, 0, 1], f.christoffel[..., :, 1, 0])

    def test_near_singular_nodes_are_rejected(self):
        def fn(pts):
            g = np.zeros(pts.shape[:-1] + (2, 2))
            g[..., 0, 0] = 1.0
            g[..., 1, 1] = -1e-13
            return g

        g = L.metric_grid(fn, ((0, 1), (0, 1)), (9, 9))
        with pytest.raises(DegenerateMetricError):
            L.christoffels(g)

    def test_flat_ricci_vanishes(self):
        g = L.minkowski_grid(((0, 1), (-1, 1)), (65, 65))
        f = L.ricci(g)
        assert np.max(np.abs(f.ricci[f.valid])) < 1e-8

    def test_cosh_warp_ricci_is_minus_the_metric(self):
        g = L.warped_grid(np.cosh, (-1.2, 1.2), (0.0, 0.5), (257, 33))
        f = L.ricci(g)
        tt = f.ricci[..., 0, 0][f.valid]
        assert np.max(np.abs(tt + 1.0)) < 1e-3
        sym = np.abs(f.ricci - np.swapaxes(f.ricci, -1, -2))
        assert np.max(sym[f.valid]) < 1e-10

    def test_convergence_order_of_the_warped_ricci(self):
        errs = []
        for n in (65, 129):
            g = L.warped_grid(np.cosh, (-1.2, 1.2), (0.0, 0.5), (n, 17))
            f = L.ricci(g)
            errs.append(np.max(np.abs(f.ricci[..., 0, 0][f.valid] + 1.0)))
        assert math.log2(errs[0] / errs[1]) >= 1.8

    def test_spatial_sign_flip_leaves_ricci_tt_alone(self):
        # diagonal 1+1: Ric_tt only sees g_xx through log|det| and the squared
        # mixed symbol, so the (unphysical) sign flip changes nothing
        ts = np.linspace(-1.0, 1.0, 33)
        a2 = (1.0 + 0.3 * np.sin(ts)) ** 2
        nodes = np.zeros((33, 9, 2, 2))
        nodes[..., 0, 0] = 1.0
        nodes[..., 1, 1] = -a2[:, None]
        flipped = nodes.copy()
        flipped[..., 1, 1] = a2[:, None]
        h = (ts[1] - ts[0], 0.125)
        ric_a, _ = _ricci_arrays(nodes, h)
        ric_b, _ = _ricci_arrays(flipped, h)
        assert np.allclose(ric_a[16, 4, 0, 0], ric_b[16, 4, 0, 0], atol=1e-12)


class TestBakryEmery:
    def test_constant_weight_reduces_to_ricci(self):
        g = L.warped_grid(np.cosh, (-1, 1), (0, 1), (65, 33),
                          weight=lambda t: 0.7 * np.ones_like(t))
        f = L.bakry_emery(g, 2.0)
        assert np.allclose(f.bakry_emery[f.valid], f.ricci[f.valid], atol=1e-12)

    def test_flat_gaussian_weight_example(self):
        g = L.minkowski_grid(((-1, 1), (-1, 1)), (129, 33),
                             weight=lambda p: p[..., 0] ** 2 / 2)
        f = L.bakry_emery(g, 3.0)
        ts = g.axes()[0]
        want = (-1.0 - ts ** 2)[:, None]
        got = f.bakry_emery[..., 0, 0]
        assert np.max(np.abs((got - want)[f.valid])) < 1e-6
        sym = np.abs(f.bakry_emery - np.swapaxes(f.bakry_emery, -1, -2))
        assert np.max(sym[f.valid]) < 1e-10

    def test_dimension_matching_needs_constant_weight(self):
        g = L.minkowski_grid(((-1, 1), (-1, 1)), (33, 33),
                             weight=lambda p: p[..., 0] ** 2)
        with pytest.raises(InvalidInputError):
            L.bakry_emery(g, 2.0)
        with pytest.raises(InvalidInputError):
            L.bakry_emery(g, 1.5)


class TestConeScan:
    def test_flat_lower_bound_is_zero(self):
        g = L.minkowski_grid(((0, 1), (-1, 1)), (65, 65))
        k = L.timelike_lower_bound_fn(L.ricci(g), g)
        assert np.nanmax(np.abs(k)) < 1e-8

    def test_cosh_warp_lower_bound(self):
        g = L.warped_grid(np.cosh, (-1.2, 1.2), (0.0, 0.5), (257, 33))
        k = L.timelike_lower_bound_fn(L.ricci(g), g)
        assert np.nanmax(np.abs(k + 1.0)) < 1e-3

    def test_quotient_ignores_sample_rescaling(self):
        g = L.warped_grid(np.cosh, (-1, 1), (0, 1), (65, 33))
        f = L.ricci(g)
        vs = L.default_cone_samples(g)
        k1 = L.timelike_lower_bound_fn(f, g, vs)
        k2 = L.timelike_lower_bound_fn(f, g, 3.0 * vs)
        sel = f.valid
        assert np.allclose(k1[sel], k2[sel], atol=1e-12)

    def test_empty_cone_sample_is_invalid(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (33, 33))
        with pytest.raises(InvalidInputError):
            L.timelike_lower_bound_fn(L.ricci(g), g, np.zeros(g.shape + (0, 2)))


class TestDeficitCurve:
    def test_satisfied_bound_gives_negligible_deficit(self):
        g = L.warped_grid(np.cosh, (-1.2, 1.2), (0.0, 1.0), (513, 129))
        curve = L.lp_deficit_curve(g, -1.2, 2.0, [0.3, 0.15], 2.0)
        assert all(d <= 1e-6 for _, d in curve)

    def test_concave_kink_deficits_fall_along_the_schedule(self):
        g = kinked_grid()
        eps = [0.5, 0.25, 0.125]
        for p in (1.0, 2.0):
            ds = [d for _, d in L.lp_deficit_curve(g, 0.0, p, eps, 2.0)]
            assert ds[0] >= ds[1] >= ds[2]
            assert ds[2] <= 0.1 * ds[0]

    def test_rough_uniform_lower_bound_across_refinements(self):
        worst = []
        for shape in ((513, 65), (1025, 129)):
            g = kinked_grid(shape)
            mins = []
            for eps in (0.5, 0.25, 0.125):
                sm = L.mollify(g, eps)
                nr = L.cone_narrowed(sm, L.narrowing_constant(sm))
                k = L.timelike_lower_bound_fn(L.bakry_emery(nr, 2.0), nr)
                mins.append(-np.nanmin(k))
            worst.append(max(mins))
        assert all(w <= 0.5 for w in worst)

    def test_schedule_validation(self):
        g = L.minkowski_grid(((0, 1), (0, 1)), (65, 65))
        with pytest.raises(InvalidInputError):
            L.lp_deficit_curve(g, 0.0, 2.0, [0.1, 0.2], 2.0)
        with pytest.raises(InvalidInputError):
            L.lp_deficit_curve(g, 0.0, 2.0, [0.2, 0.01], 2.0)
