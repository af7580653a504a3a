"""Twist deformations: unchanged fundamental forms, Lee-norm factors,
integrability against transverse holomorphy, parameter recovery, and the
twisted Ricci-form identity."""

import numpy as np
import pytest

from kahlerkit.jets import Jet2, JetDomainError, SamplePlan
from kahlerkit.fields import endo_jets, metric_jets, nijenhuis
from kahlerkit.hermitian import kahler_verdict
from kahlerkit.calabi import CalabiProfile, build_calabi, disk_base
from kahlerkit.twist import (TwistMap, build_twist, build_twist_fields,
                             constant_twist, coordinate_twist, mobius,
                             mobius_inv, norm_factor_expected,
                             norm_factor_measured, ricci_identity_check,
                             solve_single_twist,
                             transverse_holomorphy_residuals, validate_twist,
                             zeta_duality_residual)


def make_cal(k=1):
    base, alpha = disk_base(k)
    prof = CalabiProfile(A=-1.0, z_range=(0.5, 2.0), s_range=(-1.0, 1.0))
    return build_calabi(base, prof, alpha=alpha)


def values(fn, p):
    x = Jet2.seed(np.asarray(p, float))
    out = fn(x)
    return np.array([[e.value for e in row] for row in out])


def test_zero_twist_is_exact_identity():
    cal = make_cal()
    tt = build_twist(cal, constant_twist(0.0))
    for p in cal.chart.samples(SamplePlan(1, 5)):
        g1, _, _ = metric_jets(cal.g.fn, p)
        g2, _, _ = metric_jets(tt.g_w.fn, p)
        J1, _, _ = endo_jets(cal.J.fn, p)
        J2, _, _ = endo_jets(tt.J_w.fn, p)
        assert np.abs(g1 - g2).max() == 0.0
        assert np.abs(J1 - J2).max() == 0.0


def test_fundamental_forms_unchanged():
    # both structures keep their fundamental two-forms under the deformation
    cal = make_cal()
    for tw in (constant_twist(0.3, 0.4), coordinate_twist(2, 3)):
        tt = build_twist(cal, tw)
        for p in cal.chart.samples(SamplePlan(2, 8)):
            g = values(cal.g.fn, p)
            gw = values(tt.g_w.fn, p)
            J = values(cal.J.fn, p)
            Jw = values(tt.J_w.fn, p)
            I0 = values(cal.I0.fn, p)
            Iw = values(tt.I_w.fn, p)
            assert np.abs(Jw.T @ gw - J.T @ g).max() < 1e-9
            assert np.abs(Iw.T @ gw - I0.T @ g).max() < 1e-9


def test_mode_a_also_preserves_forms():
    cal = make_cal()
    tt = build_twist(cal, constant_twist(0.2, -0.3), mode="A")
    for p in cal.chart.samples(SamplePlan(3, 5)):
        g = values(cal.g.fn, p)
        gw = values(tt.g_w.fn, p)
        J = values(cal.J.fn, p)
        Jw = values(tt.J_w.fn, p)
        assert np.abs(Jw.T @ gw - J.T @ g).max() < 1e-9


def test_bad_mode_rejected():
    cal = make_cal()
    with pytest.raises(ValueError):
        build_twist_fields(cal.g.fn, [cal.J.fn], cal.proj_plus.fn,
                           constant_twist(0.1).fn, cal.theta.fn,
                           cal.chart.dim, mode="C")


def test_norm_factor_closed_forms():
    assert abs(norm_factor_expected(0.0, 0.0) - 1.0) < 1e-15
    assert abs(norm_factor_expected(0.5, 0.0) - 3.0) < 1e-15
    assert abs(norm_factor_expected(0.3, 0.4) - 37.0 / 15.0) < 1e-15
    assert abs(norm_factor_expected(0.5, 0.0, mode="A") - 1.0 / 3.0) < 1e-15


def test_norm_factor_measured_matches_expected():
    cal = make_cal()
    cases = [(0.0, 0.0), (0.5, 0.0), (0.3, 0.4)]
    for w1, w2 in cases:
        tt = build_twist(cal, constant_twist(w1, w2))
        for p in cal.chart.samples(SamplePlan(4, 6)):
            got = norm_factor_measured(cal.g.fn, tt.g_w.fn, cal.theta.fn, p)
            assert abs(got - norm_factor_expected(w1, w2)) < 1e-9
    # position-dependent twist: compare pointwise
    tw = coordinate_twist(2, 3)
    tt = build_twist(cal, tw)
    for p in cal.chart.samples(SamplePlan(5, 6)):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = tw.fn(x)
        got = norm_factor_measured(cal.g.fn, tt.g_w.fn, cal.theta.fn, p)
        assert abs(got - norm_factor_expected(w1.value, w2.value)) < 1e-9


def test_integrability_iff_transverse_holomorphy():
    cal = make_cal()
    plan = SamplePlan(6, 6)
    # holomorphic dependence on the base coordinate: both residuals vanish
    tw = coordinate_twist(2, 3)
    tr = transverse_holomorphy_residuals(cal.J.fn, cal.proj_plus.fn, tw.fn,
                                         cal.theta.fn, cal.chart, plan)
    assert tr["primary"] < 1e-12
    tt = build_twist(cal, tw)
    worst = 0.0
    for p in cal.chart.samples(plan):
        worst = max(worst, np.abs(nijenhuis(tt.J_w.fn, p)).max())
    assert worst < 1e-7
    v = kahler_verdict(tt.triple(), SamplePlan(7, 6), tolerance=1e-7)
    assert v.is_kahler

    # conjugated dependence: both residuals blow up together
    twc = coordinate_twist(2, 3, conj=True)
    trc = transverse_holomorphy_residuals(cal.J.fn, cal.proj_plus.fn, twc.fn,
                                          cal.theta.fn, cal.chart, plan)
    assert trc["primary"] > 1.0
    ttc = build_twist(cal, twc)
    worstc = 0.0
    for p in cal.chart.samples(plan):
        worstc = max(worstc, np.abs(nijenhuis(ttc.J_w.fn, p)).max())
    assert worstc > 1.0
    vc = kahler_verdict(ttc.triple(), SamplePlan(7, 6), tolerance=1e-7)
    assert not vc.is_kahler
    assert vc.compatible < 1e-12
    assert vc.closed < 1e-12
    assert vc.integrable > 1.0


def test_zeta_duality():
    cal = make_cal()
    for tw in (constant_twist(0.3, 0.4), coordinate_twist(2, 3)):
        tt = build_twist(cal, tw)
        for p in cal.chart.samples(SamplePlan(8, 6)):
            r = zeta_duality_residual(cal.g.fn, cal.J.fn, tt.g_w.fn,
                                      tt.J_w.fn, cal.theta.fn, p)
            assert r < 1e-8


def test_single_twist_parameter_recovery():
    cal = make_cal()
    p = [0.2, 1.1, 0.1, -0.15]
    for w1, w2 in [(0.25, -0.35), (0.0, 0.5), (-0.3, 0.1)]:
        tt = build_twist(cal, constant_twist(w1, w2))
        got1, got2 = solve_single_twist(cal.g.fn, tt.g_w.fn, cal.J.fn,
                                        cal.proj_plus.fn, cal.theta.fn, p)
        assert abs(got1 - w1) < 1e-10
        assert abs(got2 - w2) < 1e-10
    # position-dependent case recovers the pointwise value
    tw = coordinate_twist(2, 3)
    tt = build_twist(cal, tw)
    got1, got2 = solve_single_twist(cal.g.fn, tt.g_w.fn, cal.J.fn,
                                    cal.proj_plus.fn, cal.theta.fn, p)
    assert abs(got1 - p[2]) < 1e-10
    assert abs(got2 - p[3]) < 1e-10


def test_mobius_family():
    rng = np.random.default_rng(17)
    for _ in range(100):
        w = complex(*rng.uniform(-0.28, 0.28, size=2))
        wt = mobius(w)
        assert abs(mobius(wt) - w) < 1e-14
        assert abs(mobius_inv(wt) - w) < 1e-14
    with pytest.raises(ValueError):
        mobius(1.2)
    with pytest.raises(ValueError):
        mobius_inv(-0.6)


def test_validate_twist_errors():
    cal = make_cal()
    plan = SamplePlan(9, 5)
    with pytest.raises(ValueError) as e:
        validate_twist(constant_twist(0.9999999).fn, cal.theta.fn, cal.chart, plan)
    assert "circle" in str(e.value)

    def flat_theta(pt):
        n = pt[0].grad.size
        return [Jet2.const(0.0, n) for _ in range(4)]
    with pytest.raises(ValueError) as e:
        validate_twist(constant_twist(0.1).fn, flat_theta, cal.chart, plan)
    assert "degenerate" in str(e.value)
    # the same validation runs from build_twist when a plan is given
    with pytest.raises(ValueError):
        build_twist(cal, constant_twist(0.9999999), plan=plan)


def test_twist_leaving_disc_raises_at_evaluation():
    cal = make_cal()
    tt = build_twist(cal, coordinate_twist(2, 3, scale=5.0))
    with pytest.raises(JetDomainError):
        tt.g_w.fn(Jet2.seed(np.array([0.0, 1.0, 0.4, 0.3])))


def test_ricci_identity_corrected_form_holds():
    cal = make_cal()
    pts = list(cal.chart.samples(SamplePlan(10, 5)))
    for tw in (constant_twist(0.0), constant_twist(0.3, 0.4),
               coordinate_twist(2, 3)):
        tt = build_twist(cal, tw)
        for p in pts:
            res = ricci_identity_check(cal, tw, tt, p)
            assert res["corrected"] < 1e-6
            # the fiber correction this identity needs is genuinely large
            assert res["correction_size"] > 0.05


@pytest.mark.xfail(strict=True, reason="two-term form of the twisted Ricci "
                   "identity omits the fiber term; measured residual is "
                   "order one at every sampled point")
def test_ricci_identity_two_term_form():
    cal = make_cal()
    tt = build_twist(cal, coordinate_twist(2, 3))
    worst = 0.0
    for p in cal.chart.samples(SamplePlan(11, 5)):
        res = ricci_identity_check(cal, coordinate_twist(2, 3), tt, p)
        worst = max(worst, res["printed"])
    assert worst < 1e-6


def test_ricci_identity_two_term_gap_is_pinned():
    # companion to the expected failure above: the residual of the two-term
    # form stays bounded away from zero, for the zero twist as well
    cal = make_cal()
    for tw in (constant_twist(0.0), coordinate_twist(2, 3)):
        tt = build_twist(cal, tw)
        p = [0.2, 1.1, 0.1, -0.15]
        res = ricci_identity_check(cal, tw, tt, p)
        assert res["printed"] > 1e-2


def test_twist_map_labels():
    assert constant_twist(0.3, 0.4).label == "const(0.3,0.4)"
    assert coordinate_twist(2, 3).label == "zeta[2,3]"
    assert coordinate_twist(2, 3, conj=True).label == "conj_zeta[2,3]"
    assert coordinate_twist(2, 3).uses == (2, 3)
    tm = TwistMap(lambda pt: (pt[0], pt[1]), label="custom")
    assert tm.label == "custom"
