"""Twist deformations of homothetic-foliation structures.

The deforming endomorphism S acts on D+ with matrix [[w1, w2], [w2, -w1]] in
the coframe {theta, pair * theta o J} and vanishes on D-.  One shared S field
(frame anchored to the first endomorphism passed in) deforms the metric and
every endomorphism together; mixing frames breaks the unchanged-form
invariant.  Mode "B" is

    g_w = g(A., .),  A = 1 - 2 (S - |w|^2 P+)/(1 - |w|^2),
    J_w = (1-S)^{-1} J (1-S),

mode "A" the conjugate order with A = 1 + 2 (S + |w|^2 P+)/(1 - |w|^2).
Both leave the fundamental forms unchanged; w = 0 is the identity
deformation exactly.  theta must be supplied as an exact jet closure (an
extracted Lee form only carries first-order information, which is not enough
for curvature of the twisted metric).
"""

from dataclasses import dataclass

import numpy as np

from kahlerkit.jets import (Jet2, JetDomainError, jsize, jconst, jlog, jeye,
                            jmatmul, jmat_add, jmat_scale, pack)
from kahlerkit.fields import (MetricField, EndoField, metric_jets,
                              curvature_from_jets, lie_endo_from_jets)
from kahlerkit.hermitian import HermitianTriple, ddc_from_jets


@dataclass
class TwistMap:
    """w: chart point -> unit disc, as a jet closure returning (w1, w2)."""
    fn: object
    label: str = "twist"
    uses: tuple = ()

    def __call__(self, pt):
        return self.fn(pt)


def constant_twist(c1, c2=0.0):
    def fn(pt):
        n = jsize(pt)
        return jconst(float(c1), n), jconst(float(c2), n)
    return TwistMap(fn, label="const(%g,%g)" % (c1, c2), uses=())


def coordinate_twist(ix, iy, conj=False, scale=1.0, label=None):
    """w = scale * (x_ix + i x_iy), conjugated when conj is set."""
    sgn = -1.0 if conj else 1.0

    def fn(pt):
        return pt[ix] * scale, pt[iy] * (scale * sgn)
    if label is None:
        label = "%szeta[%d,%d]" % ("conj_" if conj else "", ix, iy)
    return TwistMap(fn, label=label, uses=(ix, iy))


def function_twist(fn, label, uses=()):
    return TwistMap(fn, label=label, uses=tuple(uses))


def mobius(w):
    """w -> w~ = -w/(1+w); this family is an involution."""
    w = complex(w)
    if abs(w) >= 1.0:
        raise ValueError("mobius needs |w| < 1, got %r" % (w,))
    return -w / (1.0 + w)


def mobius_inv(wt):
    wt = complex(wt)
    if wt.real <= -0.5:
        raise ValueError("mobius_inv needs Re w~ > -1/2, got %r" % (wt,))
    return -wt / (1.0 + wt)


@dataclass
class TwistedTriple:
    g_w: MetricField
    J_w: EndoField
    I_w: object
    S: EndoField
    endos_w: list
    chart: object
    mode: str
    pair: float
    twist: TwistMap

    def triple(self):
        return HermitianTriple(self.g_w, self.J_w, self.chart)


def make_sfield(Jfn, Ppfn, wfn, theta_fn, dim, pair=-1.0):
    """S field closure; returns (S, Pp, (w1, w2)) at a jet point.

    The D+ frame dual to {theta, pair * theta o J} is built from the first two
    projector columns; a degenerate frame surfaces as a singular 2x2 solve.
    """
    def sfield(pt):
        th = theta_fn(pt)
        J = Jfn(pt)
        thJ = [sum((th[m] * J[m][i] for m in range(dim)), 0.0) for i in range(dim)]
        e2 = [t * pair for t in thJ]
        Pp = Ppfn(pt)
        v = [[Pp[k][0] for k in range(dim)], [Pp[k][1] for k in range(dim)]]
        E = [[sum((th[k] * v[0][k] for k in range(dim)), 0.0),
              sum((th[k] * v[1][k] for k in range(dim)), 0.0)],
             [sum((e2[k] * v[0][k] for k in range(dim)), 0.0),
              sum((e2[k] * v[1][k] for k in range(dim)), 0.0)]]
        det = E[0][0] * E[1][1] - E[0][1] * E[1][0]
        if abs(det.value) < 1e-12:
            raise JetDomainError("degenerate twist frame (|det E| = %.2e)" % abs(det.value))
        idet = det.inv()
        Ei = [[E[1][1] * idet, E[0][1] * (-1.0) * idet],
              [E[1][0] * (-1.0) * idet, E[0][0] * idet]]
        u = [[sum((v[c][k] * Ei[c][b] for c in range(2)), 0.0) for k in range(dim)]
             for b in range(2)]
        w1, w2 = wfn(pt)
        S = [[u[0][k] * (w1 * th[i] + w2 * e2[i]) + u[1][k] * (w2 * th[i] - w1 * e2[i])
              for i in range(dim)] for k in range(dim)]
        return S, Pp, (w1, w2)
    return sfield


def build_twist_fields(gfn, endo_fns, Ppfn, wfn, theta_fn, dim, mode="B", pair=-1.0):
    """Low-level twist: returns (g_w fn, [endo_w fns], sfield) with one shared
    S anchored to endo_fns[0]'s frame."""
    if mode not in ("A", "B"):
        raise ValueError("mode must be 'A' or 'B'")
    sfield = make_sfield(endo_fns[0], Ppfn, wfn, theta_fn, dim, pair)

    def gwfn(pt):
        nj = jsize(pt)
        S, Pp, (w1, w2) = sfield(pt)
        g = gfn(pt)
        ww = w1 * w1 + w2 * w2
        if ww.value > 1.0 - 1e-6:
            raise JetDomainError("twist leaves the disc: |w|^2 = %.8f" % ww.value)
        fac = (jconst(1.0, nj) - ww).inv()
        if mode == "B":
            Adj = jmat_scale(jconst(-2.0, nj) * fac,
                             jmat_add(S, jmat_scale(ww * (-1.0), Pp)))
        else:
            Adj = jmat_scale(jconst(2.0, nj) * fac, jmat_add(S, jmat_scale(ww, Pp)))
        Am = jmat_add(jeye(dim, nj), Adj)
        # g_w(X, Y) = g(A X, Y): component [i][j] = g[m][j] A[m][i]
        return [[sum((g[m][j] * Am[m][i] for m in range(dim)), 0.0)
                 for j in range(dim)] for i in range(dim)]

    def make_endo_w(Efn):
        def Ewfn(pt):
            nj = jsize(pt)
            S, Pp, (w1, w2) = sfield(pt)
            E = Efn(pt)
            ww = w1 * w1 + w2 * w2
            fac = (jconst(1.0, nj) - ww).inv()
            onem = jmat_add(jeye(dim, nj), jmat_scale(jconst(-1.0, nj), S))
            inv_onem = jmat_add(jeye(dim, nj),
                                jmat_scale(fac, jmat_add(S, jmat_scale(ww, Pp))))
            if mode == "B":
                return jmatmul(inv_onem, jmatmul(E, onem))
            return jmatmul(onem, jmatmul(E, inv_onem))
        return Ewfn

    return gwfn, [make_endo_w(E) for E in endo_fns], sfield


def validate_twist(wfn, theta_fn, chart, plan, disc_tol=1e-6, frame_tol=1e-6):
    """|w| <= 1 - disc_tol and |theta| bounded away from zero at samples;
    raises with the offending point."""
    for p in chart.samples(plan):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = wfn(x)
        ww = w1.value ** 2 + w2.value ** 2
        if ww > (1.0 - disc_tol) ** 2:
            raise ValueError("twist |w| = %.8f too close to the circle at %s"
                             % (ww ** 0.5, np.asarray(p).tolist()))
        th = np.array([e.value for e in theta_fn(x)])
        if np.abs(th).max() < frame_tol:
            raise ValueError("twist frame degenerate (|theta| < %.1e) at %s"
                             % (frame_tol, np.asarray(p).tolist()))


def build_twist(cal, tw, mode="B", pair=-1.0, plan=None):
    """Twist a CalabiChart (or anything with g/J/I0/proj_plus/theta fields and
    a chart) with one shared S; returns a TwistedTriple."""
    dim = cal.chart.dim
    endos = [cal.J.fn, cal.I0.fn] if cal.I0 is not None else [cal.J.fn]
    if plan is not None:
        validate_twist(tw.fn, cal.theta.fn, cal.chart, plan)
    gw, ew, sfield = build_twist_fields(cal.g.fn, endos, cal.proj_plus.fn, tw.fn,
                                        cal.theta.fn, dim, mode=mode, pair=pair)

    def sonly(pt):
        return sfield(pt)[0]

    return TwistedTriple(
        g_w=MetricField(gw, cal.chart), J_w=EndoField(ew[0], cal.chart),
        I_w=EndoField(ew[1], cal.chart) if len(ew) > 1 else None,
        S=EndoField(sonly, cal.chart), endos_w=[EndoField(e, cal.chart) for e in ew],
        chart=cal.chart, mode=mode, pair=pair, twist=tw)


def norm_factor_expected(w1, w2, mode="B"):
    ww = w1 * w1 + w2 * w2
    if mode == "B":
        return ((1.0 + w1) ** 2 + w2 ** 2) / (1.0 - ww)
    return ((1.0 - w1) ** 2 + w2 ** 2) / (1.0 - ww)


def norm_factor_measured(gfn, gwfn, theta_fn, p):
    """|theta|^2_{g_w} / |theta|^2_g at p."""
    x = Jet2.seed(np.asarray(p, float))
    th = np.array([e.value for e in theta_fn(x)])
    gv = np.array([[e.value for e in row] for row in gfn(x)])
    gwv = np.array([[e.value for e in row] for row in gwfn(x)])
    return float(th @ np.linalg.inv(gwv) @ th) / float(th @ np.linalg.inv(gv) @ th)


def transverse_holomorphy_residuals(Jfn, Ppfn, wfn, theta_fn, chart, plan, pair=-1.0):
    """Primary residual: dw2(P-X) + dw1(J P-X) over the D- coordinate frame;
    this is the quantity that gates integrability of the twisted structure.
    Secondary: the raw Lie-derivative comparison |L_{JX}S - J (L_X S)| over the
    same frame, reported as a diagnostic only (it picks up frame derivatives
    and need not vanish even when the primary residual does)."""
    sfield = make_sfield(Jfn, Ppfn, wfn, theta_fn, chart.dim, pair)
    primary = secondary = 0.0
    n = chart.dim
    for p in chart.samples(plan):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = wfn(x)
        Jv, Jg, _ = pack(Jfn(x))
        Ppv, Ppg, _ = pack(Ppfn(x))
        Pmv = np.eye(n) - Ppv
        Pmg = -Ppg
        d1 = w1.grad
        d2 = w2.grad
        Sv, Sg, _ = pack(sfield(x)[0])
        for j in range(n):
            X = Pmv[:, j]
            if np.abs(X).max() < 1e-13:
                continue
            primary = max(primary, abs(float(d2 @ X) + float(d1 @ (Jv @ X))))
            Xg = Pmg[:, j, :]
            JXv = Jv @ X
            JXg = np.einsum('kml,m->kl', Jg, X) + Jv @ Xg
            LX = lie_endo_from_jets(X, Xg, Sv, Sg)
            LJX = lie_endo_from_jets(JXv, JXg, Sv, Sg)
            secondary = max(secondary, np.abs(LJX - Jv @ LX).max())
    return {"primary": primary, "lie_secondary": secondary}


def ricci_identity_check(cal, tw, tt, p):
    """Residuals of the twisted-Ricci identities at p, for the log profile.

    corrected: rho^{g_w} = rho_N(lifted) + ((m-1)/2)(d J_w d) ln z
                          - (1/2)(d J_w d) ln(1-|w|^2)
    printed:   rho^{g_w} = rho_N(lifted) - (1/2)(d J_w d) ln(1-|w|^2)

    (printed is the two-term form without the fiber correction; its residual
    is reported, not asserted).  Returns the two residuals and the size of the
    correction term.
    """
    m = cal.m
    n = cal.chart.dim
    p = np.asarray(p, float)
    gv, gg, gh = metric_jets(tt.g_w.fn, p)
    _, Ric, _, _ = curvature_from_jets(gv, gg, gh)
    x = Jet2.seed(p)
    Jw = tt.J_w.fn(x)
    Jwv, Jwg, _ = pack(Jw)
    rho_w = np.einsum('mi,mj->ij', Jwv, Ric)

    # lifted base Ricci form
    nb = n - 2
    bp = p[2:]
    bgv, bgg, bgh = metric_jets(cal.base.g.fn, bp)
    _, bRic, _, _ = curvature_from_jets(bgv, bgg, bgh)
    bJv = np.array([[e.value for e in row] for row in cal.base.J.fn(Jet2.seed(bp))])
    rho_N = np.zeros((n, n))
    rho_N[2:, 2:] = np.einsum('mi,mj->ij', bJv, bRic)

    fz = jlog(x[1])
    ddz = ddc_from_jets(fz, Jwv, Jwg)
    w1, w2 = tw.fn(x)
    ww = w1 * w1 + w2 * w2
    fw = jlog(jconst(1.0, jsize(x)) - ww)
    ddw = ddc_from_jets(fw, Jwv, Jwg)

    corr = 0.5 * (m - 1) * ddz
    corrected = np.abs(rho_w - rho_N - corr + 0.5 * ddw).max()
    printed = np.abs(rho_w - rho_N + 0.5 * ddw).max()
    return {"corrected": corrected, "printed": printed,
            "correction_size": np.abs(corr).max()}


def zeta_duality_residual(gfn, Jfn, gwfn, Jwfn, theta_fn, p):
    """J_w zeta_w = J zeta, with zeta/zeta_w the metric duals of theta."""
    x = Jet2.seed(np.asarray(p, float))
    th = np.array([e.value for e in theta_fn(x)])
    gv = np.array([[e.value for e in row] for row in gfn(x)])
    gwv = np.array([[e.value for e in row] for row in gwfn(x)])
    Jv = np.array([[e.value for e in row] for row in Jfn(x)])
    Jwv = np.array([[e.value for e in row] for row in Jwfn(x)])
    zeta = np.linalg.solve(gv, th)
    zeta_w = np.linalg.solve(gwv, th)
    return np.abs(Jwv @ zeta_w - Jv @ zeta).max()


def solve_single_twist(g0fn, gcompfn, J0fn, Ppfn, theta_fn, p):
    """Recover the single-twist parameter reproducing a composite metric at p
    (mode B, pair -1 frame)."""
    x = Jet2.seed(np.asarray(p, float))
    gv0 = np.array([[e.value for e in row] for row in g0fn(x)])
    gvc = np.array([[e.value for e in row] for row in gcompfn(x)])
    th = np.array([e.value for e in theta_fn(x)])
    J0v = np.array([[e.value for e in row] for row in J0fn(x)])
    e2 = -th @ J0v
    Pp = np.array([[e.value for e in row] for row in Ppfn(x)])
    v = Pp[:, [0, 1]]
    E = np.stack([th @ v, e2 @ v])
    u = v @ np.linalg.inv(E)
    C = np.linalg.inv(gv0) @ gvc
    B = np.stack([th @ C @ u, e2 @ C @ u])
    tau = B[0, 0] + B[1, 1]
    ww = (tau - 2.0) / (tau + 2.0)
    S3 = 0.5 * ((1.0 + ww) * np.eye(2) - (1.0 - ww) * B)
    return S3[0, 0], S3[0, 1]
