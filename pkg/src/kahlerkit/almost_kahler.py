"""Plane-times-Kähler products with twisted structures, the curvature
symmetry R(J~., J~., J~., J~.) = R, intrinsic-torsion checks, Einstein
residuals, and the iterated-chart chains.

On M = R^2 x Z the product carries two orthogonal structures: J (rotation on
the plane plus the base structure, Kähler candidate) and J~ (rotation flipped
on the plane, almost Kähler for every twist).  Both are deformed by one
shared S built on the frame {dx1, dx2}; the twist parameter w may depend on Z
only, which keeps d/dx1, d/dx2 Killing.
"""

from dataclasses import dataclass, field

import numpy as np

from kahlerkit.jets import (Jet2, jsize, jconst, jlog, jeye, jmat_inv,
                            jet_dcoord, pack)
from kahlerkit.fields import (ChartManifold, MetricField, EndoField, FormField,
                              metric_jets, endo_jets, christoffel_parts,
                              curvature_from_jets)
from kahlerkit.hermitian import HermitianTriple, ddc_from_jets
from kahlerkit.calabi import CalabiProfile, build_calabi, disk_base
from kahlerkit.twist import (TwistMap, coordinate_twist, build_twist_fields,
                             build_twist)


@dataclass
class AKProduct:
    z_factor: HermitianTriple
    tw: TwistMap
    g: MetricField
    J: EndoField
    J_tilde: EndoField
    g0: MetricField
    J0: EndoField
    Jt0: EndoField
    proj_plus: EndoField
    frame_form: FormField
    chart: ChartManifold
    twist_full: TwistMap

    def triple(self):
        return HermitianTriple(self.g, self.J, self.chart)

    def triple_tilde(self):
        return HermitianTriple(self.g, self.J_tilde, self.chart)


@dataclass
class TorsionReport:
    prelt_residual: float
    nullity_residual: float
    containment_residual: float
    span_ranks: list
    alg_anticommute: float
    alg_jshift: float
    points_used: int
    points_excluded: int


def build_ak_product(z_factor, tw, mode="B", pair=-1.0, plane_range=(-1.0, 1.0)):
    """Twisted product structures on R^2 x Z.  tw is declared on Z: its
    closure receives Z-points and is lifted here; any dependence on the plane
    coordinates is rejected."""
    nz = z_factor.chart.dim
    n = nz + 2

    def g0fn(pt):
        nj = jsize(pt)
        h = z_factor.g.fn(pt[2:])
        g = jeye(n, nj)
        for i in range(nz):
            for j in range(nz):
                g[2 + i][2 + j] = h[i][j]
        return g

    def J0fn(pt):
        nj = jsize(pt)
        I = z_factor.J.fn(pt[2:])
        zero = jconst(0.0, nj)
        M = [[zero for _ in range(n)] for _ in range(n)]
        M[1][0] = jconst(1.0, nj)
        M[0][1] = jconst(-1.0, nj)
        for i in range(nz):
            for j in range(nz):
                M[2 + i][2 + j] = I[i][j]
        return M

    def Jt0fn(pt):
        M = J0fn(pt)
        M[1][0] = M[1][0] * (-1.0)
        M[0][1] = M[0][1] * (-1.0)
        return M

    def Ppfn(pt):
        nj = jsize(pt)
        zero = jconst(0.0, nj)
        P = [[zero for _ in range(n)] for _ in range(n)]
        P[0][0] = jconst(1.0, nj)
        P[1][1] = jconst(1.0, nj)
        return P

    def framefn(pt):
        nj = jsize(pt)
        return [jconst(1.0, nj)] + [jconst(0.0, nj)] * (n - 1)

    def wfull(pt):
        return tw.fn(pt[2:])

    tw_full = TwistMap(wfull, label=tw.label + "@R2xZ", uses=tuple(2 + u for u in tw.uses))

    chart = ChartManifold(n, [tuple(plane_range), tuple(plane_range)]
                          + [tuple(d) for d in z_factor.chart.domain],
                          label="R2x" + z_factor.chart.label)

    # the Killing property needs w independent of the plane coordinates
    probe = chart.center()
    for shift in (0.0, 0.17):
        x = Jet2.seed(np.asarray(probe, float) + shift * np.ones(n) * 0.1)
        w1, w2 = wfull(x)
        if max(np.abs(w1.grad[:2]).max(), np.abs(w2.grad[:2]).max()) > 1e-12:
            raise ValueError("twist depends on the plane coordinates; "
                             "d/dx1, d/dx2 would not be Killing")

    gw, ew, _ = build_twist_fields(g0fn, [J0fn, Jt0fn], Ppfn, wfull, framefn, n,
                                   mode=mode, pair=pair)
    return AKProduct(
        z_factor=z_factor, tw=tw,
        g=MetricField(gw, chart), J=EndoField(ew[0], chart),
        J_tilde=EndoField(ew[1], chart),
        g0=MetricField(g0fn, chart), J0=EndoField(J0fn, chart),
        Jt0=EndoField(Jt0fn, chart),
        proj_plus=EndoField(Ppfn, chart), frame_form=FormField(1, framefn, chart),
        chart=chart, twist_full=tw_full)


def ak_invariants(ak, plan):
    """Structural residuals: omega_{J~} against -dx1^dx2 + omega^h, its
    closedness and twist-invariance, and the Killing residual of the plane
    directions."""
    n = ak.chart.dim
    nz = n - 2
    r_target = r_dom = r_inv = r_kill = 0.0
    for p in ak.chart.samples(plan):
        x = Jet2.seed(np.asarray(p, float))
        g = ak.g.fn(x)
        Jt = ak.J_tilde.fn(x)
        om = [[sum((Jt[m][i] * g[m][j] for m in range(n)), 0.0) for j in range(n)]
              for i in range(n)]
        omv = np.array([[e.value for e in row] for row in om])
        omg = np.array([[e.grad for e in row] for row in om])
        dom = (np.einsum('jki->ijk', omg) - np.einsum('ikj->ijk', omg)
               + np.einsum('ijk->ijk', omg))
        r_dom = max(r_dom, np.abs(dom).max())

        target = np.zeros((n, n))
        target[0, 1] = -1.0
        target[1, 0] = 1.0
        bp = Jet2.seed(np.asarray(p[2:], float))
        h = ak.z_factor.g.fn(bp)
        I = ak.z_factor.J.fn(bp)
        hv = np.array([[e.value for e in row] for row in h])
        Iv = np.array([[e.value for e in row] for row in I])
        target[2:, 2:] = Iv.T @ hv
        r_target = max(r_target, np.abs(omv - target).max())

        g0 = ak.g0.fn(x)
        Jt0 = ak.Jt0.fn(x)
        om0 = np.array([[sum(Jt0[m][i].value * g0[m][j].value for m in range(n))
                         for j in range(n)] for i in range(n)])
        r_inv = max(r_inv, np.abs(omv - om0).max())

        gg = np.array([[e.grad for e in row] for row in g])
        r_kill = max(r_kill, np.abs(gg[:, :, 0]).max(), np.abs(gg[:, :, 1]).max())
    return {"omega_tilde_target": r_target, "d_omega_tilde": r_dom,
            "omega_tilde_invariance": r_inv, "killing": r_kill}


def ak3_residual(ak, plan):
    """Curvature symmetry under four J~'s, normalized by max |R|; the two
    proof blocks R(V,V,V,X) and R(X,Y,Z,V) are reported separately.  Index
    split: V in the plane (0,1), X in the Z factor."""
    n = ak.chart.dim
    rel = b1 = b2 = 0.0
    scale_seen = 0.0
    for p in ak.chart.samples(plan):
        gv, gg, gh = metric_jets(ak.g.fn, p)
        Rlow, _, _, _ = curvature_from_jets(gv, gg, gh)
        Jtv, _, _ = endo_jets(ak.J_tilde.fn, p)
        RJ = np.einsum('ai,bj,ck,dl,abcd->ijkl', Jtv, Jtv, Jtv, Jtv, Rlow)
        sc = np.abs(Rlow).max()
        scale_seen = max(scale_seen, sc)
        denom = sc if sc > 1e-12 else 1.0
        rel = max(rel, np.abs(RJ - Rlow).max() / denom)
        zidx = range(2, n)
        b1 = max(b1, max(abs(Rlow[a, b, c, X]) for a in (0, 1) for b in (0, 1)
                         for c in (0, 1) for X in zidx) / denom)
        b2 = max(b2, max(abs(Rlow[X, Y, Z, d]) for X in zidx for Y in zidx
                         for Z in zidx for d in (0, 1)) / denom)
    return {"relative": rel, "block_plane": b1, "block_z": b2, "scale": scale_seen}


def eta_tensor(gfn, Jtfn, p):
    """eta = (1/2)(nabla J~)J~ at p; returns (eta[i,k,j], gv, gg, Jtv) with
    eta[i,k,j] the k-component of eta_{d_i} d_j."""
    gv, gg, gh = metric_jets(gfn, p)
    Gam, _, _ = christoffel_parts(gv, gg, gh, p)
    Jtv, Jtg, _ = endo_jets(Jtfn, p)
    covJ = (np.einsum('kji->ikj', Jtg) + np.einsum('kim,mj->ikj', Gam, Jtv)
            - np.einsum('mij,km->ikj', Gam, Jtv))
    eta = 0.5 * np.einsum('ikm,mj->ikj', covJ, Jtv)
    return eta, gv, gg, Jtv


def torsion_report(ak, plan, dw_floor=1e-6, rank_rtol=1e-8):
    """All the pointwise torsion claims for the product: the derivative
    identity 2 g(eta_{K_i} K_j, X) = X g(K_i, K_j), the D- nullity, the
    containment of eta_{D+} D+ in D-, the rank-2 span of eta_{D+} D-, and the
    two algebraic identities with J~.  Points with |dw| < dw_floor are
    excluded from the nullity/containment/rank claims and counted."""
    n = ak.chart.dim
    zidx = list(range(2, n))
    prelt = nullr = cont = algA = algB = 0.0
    ranks = []
    used = excluded = 0
    for p in ak.chart.samples(plan):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = ak.twist_full.fn(x)
        dw = max(np.abs(w1.grad).max(), np.abs(w2.grad).max())
        eta, gv, gg, Jtv = eta_tensor(ak.g.fn, ak.J_tilde.fn, p)
        for a in (0, 1):
            for b in (0, 1):
                for X in zidx:
                    lhs = 2.0 * sum(gv[m, X] * eta[a, m, b] for m in range(n))
                    prelt = max(prelt, abs(lhs - gg[a, b, X]))
        algA = max(algA, np.abs(np.einsum('ikm,mj->ikj', eta, Jtv)
                                + np.einsum('km,imj->ikj', Jtv, eta)).max())
        algB = max(algB, np.abs(np.einsum('mi,mkj->ikj', Jtv, eta)
                                - np.einsum('ikm,mj->ikj', eta, Jtv)).max())
        if dw < dw_floor:
            excluded += 1
            continue
        used += 1
        nullr = max(nullr, np.abs(eta[zidx, :, :]).max())
        cont = max(cont, np.abs(eta[0:2, 0:2, 0:2]).max())
        vecs = np.stack([eta[a, :, c] for a in (0, 1) for c in zidx])
        sv = np.linalg.svd(vecs, compute_uv=False)
        ranks.append(int((sv > rank_rtol * sv[0]).sum()) if sv[0] > 0 else 0)
    return TorsionReport(prelt_residual=prelt, nullity_residual=nullr,
                         containment_residual=cont, span_ranks=ranks,
                         alg_anticommute=algA, alg_jshift=algB,
                         points_used=used, points_excluded=excluded)


def einstein_residual(gfield, plan, chart=None):
    """Pointwise least-squares Einstein fit: lambda(p) = <Ric, g>/<g, g>,
    residual max |Ric - lambda g|, plus the spread of lambda across points and
    the raw max |Ric|."""
    chart = chart if chart is not None else gfield.chart
    lambdas = []
    ricci_max = 0.0
    dev = 0.0
    for p in chart.samples(plan):
        gv, gg, gh = metric_jets(gfield.fn, p)
        _, Ric, _, _ = curvature_from_jets(gv, gg, gh)
        lam = float(np.tensordot(Ric, gv) / np.tensordot(gv, gv))
        lambdas.append(lam)
        dev = max(dev, np.abs(Ric - lam * gv).max())
        ricci_max = max(ricci_max, np.abs(Ric).max())
    spread = (max(lambdas) - min(lambdas)) if lambdas else 0.0
    return {"ricci_max": ricci_max, "einstein_dev": dev, "spread": spread,
            "lambdas": lambdas}


@dataclass
class ChainLevel:
    index: int
    kind: str
    chain_height: int
    triple: HermitianTriple
    alpha: FormField
    cal: object = None
    twisted: object = None
    claimed_coeff: float = 0.0
    z_positions: dict = field(default_factory=dict)

    def identity_residuals(self, p):
        """Residuals at p of the claimed log-coefficient identity and of the
        corrected one carrying the (j/2) ln z_j fiber terms."""
        n = self.triple.chart.dim
        p = np.asarray(p, float)
        gv, gg, gh = metric_jets(self.triple.g.fn, p)
        _, Ric, _, _ = curvature_from_jets(gv, gg, gh)
        x = Jet2.seed(p)
        Jv, Jg, _ = pack(self.triple.J.fn(x))
        rho = np.einsum('mi,mj->ij', Jv, Ric)
        xx, yy = x[n - 2], x[n - 1]
        L = jlog(jconst(1.0, n) - xx * xx - yy * yy)
        ddL = ddc_from_jets(L, Jv, Jg)
        claimed = rho - self.claimed_coeff * ddL
        corrected = claimed.copy()
        corr_size = 0.0
        for j, pos in self.z_positions.items():
            term = 0.5 * j * ddc_from_jets(jlog(x[pos]), Jv, Jg)
            corrected = corrected - term
            corr_size = max(corr_size, np.abs(term).max())
        return {"claimed": np.abs(claimed).max(),
                "corrected": np.abs(corrected).max(),
                "correction_size": corr_size}


def _lifted_alpha(cal):
    """Exact primitive z * Theta of the chart's Kähler form, for the next
    level: components [z, 0, z * alpha_prev...]."""
    prev = cal.alpha.fn

    def afn(pt):
        nj = jsize(pt)
        z = pt[1]
        a = prev(pt[2:])
        return [z, jconst(0.0, nj)] + [z * ai for ai in a]
    return FormField(1, afn, cal.chart)


def iterate_chain(kind, m, A=-1.0, radius=0.55, z_range=(0.6, 1.8),
                  s_range=(-0.8, 0.8)):
    """Iterated chart chains over the disk.

    kind "untwisted": Sigma carries (1 - rho^2) delta and each level is the
    plain fibered chart over the previous one; m - 1 steps.  The claimed
    log-coefficient stays 1/2 at every level.

    kind "twisted": Sigma carries (1 - rho^2)^m delta and every fibered level
    is twisted by the lifted disk coordinate; m steps, so the top level has
    claimed coefficient (m - m)/2 = 0, the literal Ricci-flat claim.  The
    corrected identity adds (j/2) (d J d) ln z_j for every fiber level j.
    """
    if kind not in ("untwisted", "twisted"):
        raise ValueError("kind must be 'untwisted' or 'twisted'")
    if not 1 <= m <= 3:
        raise ValueError("chain height m must be 1..3 (dimension cap)")
    if not 0 < radius < 1:
        raise ValueError("disk radius must sit inside the unit disk")
    if z_range[0] <= 0:
        raise ValueError("step 1: z interval must stay positive")

    k0 = 1 if kind == "untwisted" else m
    base, alpha0 = disk_base(k0, radius=radius)
    steps = (m - 1) if kind == "untwisted" else m

    def coeff(k):
        return 0.5 if kind == "untwisted" else 0.5 * (m - k)

    levels = [ChainLevel(index=0, kind=kind, chain_height=m, triple=base,
                         alpha=alpha0, claimed_coeff=coeff(0))]
    for k in range(1, steps + 1):
        prev = levels[-1]
        profile = CalabiProfile(A=A, z_range=z_range, s_range=s_range)
        try:
            cal = build_calabi(prev.triple, profile, alpha=prev.alpha)
        except Exception as exc:
            raise type(exc)("step %d: %s" % (k, exc)) from exc
        zpos = {j: pos + 2 for j, pos in prev.z_positions.items()}
        zpos[k] = 1
        if kind == "twisted":
            n = cal.chart.dim
            tw = coordinate_twist(n - 2, n - 1)
            tt = build_twist(cal, tw)
            triple = tt.triple()
            levels.append(ChainLevel(index=k, kind=kind, chain_height=m,
                                     triple=triple, alpha=_lifted_alpha(cal),
                                     cal=cal, twisted=tt, claimed_coeff=coeff(k),
                                     z_positions=zpos))
        else:
            levels.append(ChainLevel(index=k, kind=kind, chain_height=m,
                                     triple=cal.triple(), alpha=_lifted_alpha(cal),
                                     cal=cal, claimed_coeff=coeff(k),
                                     z_positions=zpos))
    return levels


def ker_dw_projector(gfn, wfn):
    """g-orthogonal projector field onto Ker dw1 ∩ Ker dw2 (first-order jets,
    enough for the second-fundamental-form residual)."""
    def Qfn(pt):
        nj = jsize(pt)
        g = gfn(pt)
        dim = len(g)
        w1, w2 = wfn(pt)
        dws = [[jet_dcoord(w1, k) for k in range(dim)],
               [jet_dcoord(w2, k) for k in range(dim)]]
        gi = jmat_inv(g)
        ns = [[sum((gi[k][j] * dws[a][j] for j in range(dim)), 0.0) for k in range(dim)]
              for a in range(2)]
        M = [[sum((dws[a][k] * ns[b][k] for k in range(dim)), 0.0) for b in range(2)]
             for a in range(2)]
        Mi = jmat_inv(M)
        Q = [[jconst(1.0 if i == j else 0.0, nj)
              - sum((ns[a][i] * Mi[a][b] * dws[b][j] for a in range(2) for b in range(2)), 0.0)
              for j in range(dim)] for i in range(dim)]
        return Q
    return Qfn


def ker_dw_geodesic_residual(gfn, wfn, p):
    """Max component of the D-orthogonal second fundamental form of Ker dw at
    p: (1 - Q) nabla_X (Q Y) restricted to X, Y in Ker dw."""
    p = np.asarray(p, float)
    gv, gg, gh = metric_jets(gfn, p)
    Gam, _, _ = christoffel_parts(gv, gg, gh, p)
    Qfn = ker_dw_projector(gfn, wfn)
    x = Jet2.seed(p)
    Q = Qfn(x)
    n = gv.shape[0]
    Qv = np.array([[e.value for e in row] for row in Q])
    Qg = np.array([[e.grad for e in row] for row in Q])
    covQ = np.einsum('mji->mij', Qg) + np.einsum('mia,aj->mij', Gam, Qv)
    B = np.einsum('km,mij->kij', np.eye(n) - Qv, covQ)
    return np.abs(np.einsum('kij,ia,jb->kab', B, Qv, Qv)).max()
