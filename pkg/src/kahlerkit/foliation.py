"""Splittings, the homothetic-foliation residual, Lee-form extraction, O'Neill
tensors, structure-equation checks, and the pointwise classifier.

The Lee form is never taken from a builder: it is extracted from the metric by
the trace formula theta(V) = tr(g^{-1} (L_V g) P_minus) / (dim - 2) over a
D+ frame, which turns the homothetic equation L_V g = theta(V) g on D- into a
genuine two-sided test. zeta denotes the g-dual of theta.
"""

from dataclasses import dataclass, field

import numpy as np

from kahlerkit.jets import Jet2, jmat_inv, jet_dcoord, pack
from kahlerkit.fields import (EndoField, metric_jets, endo_jets,
                              christoffel_parts, lie_endo_from_jets,
                              pack_form, exterior_from_grad)

VERDICT_HOLOMORPHIC = "holomorphic"
VERDICT_GEODESIC = "geodesic_riemannian"
VERDICT_PRODUCT = "kahler_product"
VERDICT_FAILED = "failed"


@dataclass
class Splitting:
    proj_plus: object
    proj_minus: object
    ranks: tuple

    @staticmethod
    def from_plus(proj_plus_fn, dim):
        def minus_fn(pt):
            P = proj_plus_fn(pt)
            n = pt[0].grad.size
            return [[Jet2.const(1.0 if i == j else 0.0, n) - P[i][j]
                     for j in range(dim)] for i in range(dim)]
        return Splitting(EndoField(proj_plus_fn), EndoField(minus_fn), (2, dim - 2))


@dataclass
class FoliationReport:
    theta: np.ndarray
    theta_closed_residual: float
    homothetic_residual: float
    oneill_ring_residual: float
    dplus_totally_geodesic_residual: float
    holomorphy_residual: float
    chi1_consistency_residual: float
    verdict: str
    points_used: int = 0
    points_excluded: int = 0
    diagnostics: dict = field(default_factory=dict)


def _frame_columns(Pv, tol=1e-8):
    """Two column indices of the rank-2 projector giving a well-conditioned
    D+ frame."""
    n = Pv.shape[0]
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            U = Pv[:, [i, j]]
            d = abs(np.linalg.det(U.T @ U))
            if best is None or d > best[0]:
                best = (d, (i, j))
    if best is None or best[0] < tol:
        raise ValueError("projector has rank below two")
    return best[1]


def theta_jets(t, s, p):
    """Jet-level Lee-form extraction at p.

    Returns (theta_comps, homothetic_residual, thetaV, cols) where theta_comps
    is a list of first-order-valid jets (value and grad exact; hess padding),
    thetaV the theta(V_a) jets for the D+ frame columns.
    """
    x = Jet2.seed(np.asarray(p, float))
    g = t.g(x)
    Pp = s.proj_plus(x)
    n = len(g)
    gv = np.array([[e.value for e in row] for row in g])
    Pv = np.array([[e.value for e in row] for row in Pp])
    cols = _frame_columns(Pv)
    gi = jmat_inv(g)
    Pm = [[(Jet2.const(1.0 if i == j else 0.0, x[0].grad.size)) - Pp[i][j]
           for j in range(n)] for i in range(n)]

    thetaV = []
    resid = 0.0
    Pmv = np.eye(n) - Pv
    for a in cols:
        V = [Pp[k][a] for k in range(n)]
        # (L_V g)_ij as first-order jets: v-derivatives of g come from jet grads
        L = [[sum((V[k] * jet_dcoord(g[i][j], k) for k in range(n)), 0.0)
              + sum((g[k][j] * jet_dcoord(V[k], i) for k in range(n)), 0.0)
              + sum((g[i][k] * jet_dcoord(V[k], j) for k in range(n)), 0.0)
              for j in range(n)] for i in range(n)]
        tr = sum((gi[i][j] * L[j][k] * Pm[k][i]
                  for i in range(n) for j in range(n) for k in range(n)), 0.0)
        th_a = tr * (1.0 / (n - 2))
        thetaV.append(th_a)
        Lv = np.array([[e.value for e in row] for row in L])
        D = Pmv.T @ (Lv - th_a.value * gv) @ Pmv
        resid = max(resid, np.abs(D).max())

    # assemble theta as a 1-form: theta(d_i) = theta(P+ d_i) expanded in the frame
    U = [[Pp[k][a] for a in cols] for k in range(n)]
    G2 = [[sum((U[k][a] * g[k][m] * U[m][b] for k in range(n) for m in range(n)), 0.0)
           for b in range(2)] for a in range(2)]
    G2i = jmat_inv(G2)
    rhs = [[sum((U[k][a] * g[k][m] * Pp[m][i] for k in range(n) for m in range(n)), 0.0)
            for i in range(n)] for a in range(2)]
    coef = [[sum((G2i[a][b] * rhs[b][i] for b in range(2)), 0.0) for i in range(n)]
            for a in range(2)]
    theta = [sum((coef[a][i] * thetaV[a] for a in range(2)), 0.0) for i in range(n)]
    return theta, resid, thetaV, cols


def extract_theta(t, s, p):
    """Lee-form components at p (vanishes on D- by construction)."""
    theta, _, _, _ = theta_jets(t, s, p)
    return np.array([e.value for e in theta])


def homothetic_residual(t, s, plan):
    """Max over samples of the D- block residual of L_V g - theta(V) g, plus the
    d(theta) residual reported separately."""
    worst = 0.0
    dtheta = 0.0
    pts = t.chart.samples(plan)
    for p in pts:
        theta, resid, _, _ = theta_jets(t, s, p)
        worst = max(worst, resid)
        tg = np.array([e.grad for e in theta])
        dtheta = max(dtheta, np.abs(tg.T - tg).max())
    return {"homothetic": worst, "dtheta": dtheta, "points": len(pts)}


def oneill_tensors(t, s, p, theta=None):
    """(xi, xi_ring) at p.

    xi[k,i,j] is the (D - nabla) tensor on coordinate arguments; xi_ring is the
    D-x D- part with the zeta terms of the homothetic second fundamental form
    removed: xi_ring = xi|_{D-} - (1/2)<JX,Y> Jzeta - (1/2)<X,Y> zeta.
    """
    gv, gg, gh = metric_jets(t.g, p)
    Gam, _, gi = christoffel_parts(gv, gg, gh, p)
    Jv, _, _ = endo_jets(t.J, p)
    Ppv, Ppg, _ = endo_jets(s.proj_plus, p)
    n = gv.shape[0]
    Pmv = np.eye(n) - Ppv
    Pmg = -Ppg
    # covP[m,i,j] = d_i P^m_j + Gamma^m_{ia} P^a_j
    covPp = np.einsum('mji->mij', Ppg) + np.einsum('mia,aj->mij', Gam, Ppv)
    covPm = np.einsum('mji->mij', Pmg) + np.einsum('mia,aj->mij', Gam, Pmv)
    xi = -(np.einsum('km,mij->kij', Ppv, covPm) + np.einsum('km,mij->kij', Pmv, covPp))
    if theta is None:
        theta = extract_theta(t, s, p)
    zeta = gi @ theta
    Jzeta = Jv @ zeta
    om = Jv.T @ gv
    ip_m = Pmv.T @ gv @ Pmv
    om_m = Pmv.T @ om @ Pmv
    xi_minus = np.einsum('kab,ai,bj->kij', xi, Pmv, Pmv)
    xi_ring = (xi_minus - 0.5 * np.einsum('ij,k->kij', om_m, Jzeta)
               - 0.5 * np.einsum('ij,k->kij', ip_m, zeta))
    return xi, xi_ring


def dplus_geodesic_residual(xi, Ppv):
    return np.abs(np.einsum('kab,ai,bj->kij', xi, Ppv, Ppv)).max()


def structure_equation_checks(t, s, plan, skip_theta_below=1e-6):
    """Residuals for d(omega_minus) = theta ^ omega_minus, for D+ holomorphy
    (proj_minus o (L_X J) over a D+ frame), and for the two chi_1 routes:
    the L_zeta J coefficient fit against -2|theta|^{-2} L_{Jzeta} ln|theta|.

    Points where |theta| falls below the threshold are skipped for the chi_1
    and wedge checks and counted in 'excluded'.
    """
    r_wedge = r_hol = r_chi = r_fit = 0.0
    used = excluded = 0
    pts = t.chart.samples(plan)
    for p in pts:
        x = Jet2.seed(np.asarray(p, float))
        g = t.g(x)
        J = t.J(x)
        Pp = s.proj_plus(x)
        n = len(g)
        gv, gg, gh = pack(g)
        Jv, Jg, _ = pack(J)
        Ppv, Ppg, _ = pack(Pp)

        # holomorphy of the leaves: P- (L_X J) for X in the D+ frame
        cols = _frame_columns(Ppv)
        Pmv = np.eye(n) - Ppv
        for a in cols:
            Xv = Ppv[:, a]
            Xg = Ppg[:, a, :]
            LJ = lie_endo_from_jets(Xv, Xg, Jv, Jg)
            r_hol = max(r_hol, np.abs(Pmv @ LJ).max())

        theta, _, _, _ = theta_jets(t, s, p)
        thv = np.array([e.value for e in theta])
        gi = np.linalg.inv(gv)
        norm2 = float(thv @ gi @ thv)
        if norm2 < skip_theta_below ** 2:
            excluded += 1
            continue
        used += 1

        # omega_minus = omega - P+^T omega P+ as a jet field, then d of it
        om = [[sum((J[m][i] * g[m][j] for m in range(n)), 0.0) for j in range(n)]
              for i in range(n)]
        omp = [[sum((Pp[a][i] * om[a][b] * Pp[b][j] for a in range(n) for b in range(n)), 0.0)
               for j in range(n)] for i in range(n)]
        omm = [[om[i][j] - omp[i][j] for j in range(n)] for i in range(n)]
        ommv, ommg = pack_form(omm)
        dmm = exterior_from_grad(ommg, 2)
        wedge = (np.einsum('i,jk->ijk', thv, ommv)
                 - np.einsum('j,ik->ijk', thv, ommv)
                 + np.einsum('k,ij->ijk', thv, ommv))
        r_wedge = max(r_wedge, np.abs(dmm - wedge).max())

        # chi_1 from the L_zeta J coefficient fit vs the logarithmic formula
        gij = jmat_inv(g)
        zeta_j = [sum((gij[k][m] * theta[m] for m in range(n)), 0.0) for k in range(n)]
        zv = np.array([e.value for e in zeta_j])
        zg = np.array([e.grad for e in zeta_j])
        LzJ = lie_endo_from_jets(zv, zg, Jv, Jg)
        Jz = Jv @ zv
        thJ = thv @ Jv
        basis = [np.einsum('j,k->kj', thv, zv), np.einsum('j,k->kj', thJ, zv),
                 np.einsum('j,k->kj', thv, Jz), np.einsum('j,k->kj', thJ, Jz)]
        Amat = np.stack([b.ravel() for b in basis], axis=1)
        cvec, _, _, _ = np.linalg.lstsq(Amat, LzJ.ravel(), rcond=None)
        r_fit = max(r_fit, np.abs(Amat @ cvec - LzJ.ravel()).max())
        chi1_fit = cvec[0]
        # |theta|^2 as a jet: theta_i gi_ij theta_j with gi jets
        n2j = sum((theta[i] * gij[i][j] * theta[j] for i in range(n) for j in range(n)), 0.0)
        dn2 = n2j.grad
        chi1_log = -float(Jz @ dn2) / (norm2 ** 2)
        r_chi = max(r_chi, abs(chi1_fit - chi1_log))
    return {"wedge_minus": r_wedge, "holomorphy": r_hol, "chi1": r_chi,
            "lie_fit": r_fit, "points_used": used, "points_excluded": excluded}


def classify(t, s, plan, tol=1e-6):
    """Pointwise classifier: homothetic residual gates everything; then the
    verdict is kahler_product / geodesic_riemannian / holomorphic by the
    vanishing pattern of theta and the O'Neill tensors."""
    hom = 0.0
    dtheta = 0.0
    ring = 0.0
    geod = 0.0
    xi_all = 0.0
    theta_max = 0.0
    theta_last = None
    pts = t.chart.samples(plan)
    for p in pts:
        theta, resid, _, _ = theta_jets(t, s, p)
        hom = max(hom, resid)
        tg = np.array([e.grad for e in theta])
        dtheta = max(dtheta, np.abs(tg.T - tg).max())
        thv = np.array([e.value for e in theta])
        theta_last = thv
        theta_max = max(theta_max, np.abs(thv).max())
        xi, xi_ring = oneill_tensors(t, s, p, theta=thv)
        ring = max(ring, np.abs(xi_ring).max())
        xi_all = max(xi_all, np.abs(xi).max())
        Ppv, _, _ = endo_jets(s.proj_plus, p)
        geod = max(geod, dplus_geodesic_residual(xi, Ppv))
    st = structure_equation_checks(t, s, plan)
    if hom > tol:
        verdict = VERDICT_FAILED
    elif theta_max <= tol and xi_all <= tol:
        verdict = VERDICT_PRODUCT
    elif theta_max <= tol and geod <= tol:
        verdict = VERDICT_GEODESIC
    elif ring <= tol:
        verdict = VERDICT_HOLOMORPHIC
    else:
        verdict = VERDICT_FAILED
    return FoliationReport(
        theta=theta_last,
        theta_closed_residual=dtheta,
        homothetic_residual=hom,
        oneill_ring_residual=ring,
        dplus_totally_geodesic_residual=geod,
        holomorphy_residual=st["holomorphy"],
        chi1_consistency_residual=max(st["chi1"], st["lie_fit"]),
        verdict=verdict,
        points_used=len(pts) - st["points_excluded"],
        points_excluded=st["points_excluded"],
        diagnostics={"xi_total": xi_all, "theta_max": theta_max,
                     "wedge_minus": st["wedge_minus"]},
    )
