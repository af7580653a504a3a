"""Fibered Kähler charts of Calabi type over a Kähler base, in moment-map
coordinates.

Chart layout is (s, z, base coords...): s is the circle/flow coordinate, z the
moment-map coordinate, and the remaining 2(m-1) coordinates are the base's.
With the log profile G(r) = A ln r (A < 0) the metric takes the constant-q
form

    g = q dz^2 + q^{-1} Theta^2 + z * g_N,   Theta = ds + alpha,  q = -1/A,

where alpha is a primitive of the base Kähler form (d alpha = omega_N).
Orientation conventions: J ds-vector = -(1/q) dz-vector, the base rotation
sends dx-vector to dy-vector, and the moment map satisfies
iota_{d/ds} omega_J = -dz.  I0 = J (1 - 2 P+) flips J on the fiber span
{d/ds, d/dz} and is integrable; its Lee form is 2 dln z.
"""

from dataclasses import dataclass
from math import comb, exp, log

import numpy as np

from kahlerkit.jets import (Jet2, SamplePlan, jsize, jconst, jlog, jeye,
                            jmatmul, jmat_add, jmat_scale)
from kahlerkit.fields import (ChartManifold, MetricField, EndoField, FormField,
                              NotClosedError, wedge_top, homotopy_primitive,
                              exterior_from_grad)
from kahlerkit.hermitian import HermitianTriple, fundamental_form_jets
from kahlerkit.foliation import Splitting


@dataclass
class CalabiProfile:
    """Log moment-map profile G(r) = A ln r with A < 0, plus the chart ranges.

    The r <-> z dictionary: z = G(r), r = exp(z/A), G'(r) = A/r, and the
    auxiliary profile H = 1/G drives the Lee-form formulas of I0.
    """
    A: float = -1.0
    z_range: tuple = (0.5, 2.0)
    s_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if not self.A < 0:
            raise ValueError("profile needs A < 0, got A=%r" % (self.A,))
        lo, hi = self.z_range
        if not (0 < lo < hi):
            raise ValueError("z_range must be positive and increasing")

    @property
    def q(self):
        return -1.0 / self.A

    def moment_map_G(self, r):
        return self.A * log(r)

    def r_of_z(self, z):
        return exp(z / self.A)

    def G_prime(self, r):
        return self.A / r

    def H(self, r):
        return 1.0 / (self.A * log(r))

    def H_prime(self, r):
        z = self.A * log(r)
        return -(self.A / r) / (z * z)

    def lee_dr_coefficient(self, r):
        """dr-coefficient of the I0 Lee form, -2 H'/H = 2A/(r z)."""
        return -2.0 * self.H_prime(r) / self.H(r)

    def lee_norm_sq(self, r):
        """|theta_0|^2 = 4 r H'(r) = -4A/z^2."""
        return 4.0 * r * self.H_prime(r)


def disk_u_coefficients(k):
    """Polynomial coefficients (ascending in t = rho^2) of u_k with
    d[u_k (x dy - y dx)] = (1-t)^k dx^dy: u_k(t) = (1-(1-t)^{k+1})/(2(k+1)t)."""
    return [comb(k + 1, i) * (-1.0) ** (i + 1) / (2.0 * (k + 1))
            for i in range(1, k + 2)]


def _poly(coeffs, t):
    out = 0.0
    for c in reversed(coeffs):
        out = out * t + c
    return out


def disk_base(k, radius=0.55):
    """HermitianTriple for the unit-disk base with metric (1 - rho^2)^k * delta
    and the standard rotation, plus the closed-form primitive alpha of its
    Kähler form.  Returns (triple, alpha: FormField(1))."""
    dom = [(-radius, radius), (-radius, radius)]
    chart = ChartManifold(2, dom, label="disk^%d" % k)
    ucoef = disk_u_coefficients(k)

    def gfn(pt):
        x, y = pt[0], pt[1]
        n = jsize(pt)
        t = x * x + y * y
        f = jconst(1.0, n) - t
        out = jconst(1.0, n)
        for _ in range(k):
            out = out * f
        zero = jconst(0.0, n)
        return [[out, zero], [zero, out]]

    def Ifn(pt):
        n = jsize(pt)
        z0 = jconst(0.0, n)
        return [[z0, jconst(-1.0, n)], [jconst(1.0, n), z0]]

    def alphafn(pt):
        x, y = pt[0], pt[1]
        t = x * x + y * y
        u = _poly(ucoef, t)
        return [u * y * (-1.0), u * x]

    triple = HermitianTriple(MetricField(gfn, chart), EndoField(Ifn, chart), chart)
    return triple, FormField(1, alphafn, chart)


def flat_base(radius=0.55):
    """Flat C with alpha = (x dy - y dx)/2."""
    return disk_base(0, radius=radius)


@dataclass
class CalabiChart:
    g: MetricField
    J: EndoField
    I0: EndoField
    proj_plus: EndoField
    theta: FormField
    chart: ChartManifold
    base: HermitianTriple
    alpha: FormField
    profile: CalabiProfile
    m: int

    def triple(self):
        return HermitianTriple(self.g, self.J, self.chart)

    def triple_I(self):
        return HermitianTriple(self.g, self.I0, self.chart)

    def splitting(self):
        return Splitting.from_plus(self.proj_plus.fn, self.chart.dim)


def build_calabi(base, profile, alpha=None, alpha_tol=1e-7, check_count=10):
    """Assemble the chart over a Kähler base.

    alpha must satisfy d alpha = omega_N; when omitted it is produced by the
    homotopy primitive over the base chart (star-shaped domain assumed).
    """
    nb = base.chart.dim
    n = nb + 2
    m = n // 2
    q0 = profile.q

    if alpha is None:
        alpha = homotopy_primitive(_base_omega_field(base), base.chart)
    else:
        plan = SamplePlan(seed=0, count=check_count)
        worst = 0.0
        for p in base.chart.samples(plan):
            omv, _ = _base_omega_at(base, p)
            x = Jet2.seed(np.asarray(p, float))
            aj = alpha.fn(x)
            ag = np.array([e.grad for e in aj])
            worst = max(worst, np.abs((ag.swapaxes(0, 1) - ag) - omv).max())
        if worst > alpha_tol:
            raise NotClosedError("d alpha mismatches the base Kähler form by %.3e" % worst)

    afn = alpha.fn

    def gfn(pt):
        z = pt[1]
        nj = jsize(pt)
        b = pt[2:]
        gN = base.g(b)
        a = afn(b)
        q = jconst(q0, nj)
        iq = jconst(1.0 / q0, nj)
        zero = jconst(0.0, nj)
        Th = [jconst(1.0, nj), zero] + list(a)
        dz = [zero, jconst(1.0, nj)] + [zero] * nb
        g = [[q * dz[i] * dz[j] + iq * Th[i] * Th[j] for j in range(n)] for i in range(n)]
        for ai in range(nb):
            for bi in range(nb):
                g[2 + ai][2 + bi] = g[2 + ai][2 + bi] + z * gN[ai][bi]
        return g

    def Jfn(pt):
        nj = jsize(pt)
        b = pt[2:]
        I = base.J(b)
        a = afn(b)
        zero = jconst(0.0, nj)
        J = [[zero for _ in range(n)] for _ in range(n)]
        J[1][0] = jconst(-1.0 / q0, nj)
        J[0][1] = jconst(q0, nj)
        for ai in range(nb):
            # column of the lifted base direction d_{x^a}
            J[0][2 + ai] = -sum((I[bi][ai] * a[bi] for bi in range(nb)), 0.0)
            J[1][2 + ai] = a[ai] * (-1.0 / q0)
            for bi in range(nb):
                J[2 + bi][2 + ai] = I[bi][ai]
        return J

    def Ppfn(pt):
        nj = jsize(pt)
        b = pt[2:]
        a = afn(b)
        zero = jconst(0.0, nj)
        P = [[zero for _ in range(n)] for _ in range(n)]
        P[0][0] = jconst(1.0, nj)
        for ai in range(nb):
            P[0][2 + ai] = a[ai]
        P[1][1] = jconst(1.0, nj)
        return P

    def I0fn(pt):
        nj = jsize(pt)
        J = Jfn(pt)
        P = Ppfn(pt)
        refl = jmat_add(jeye(n, nj), jmat_scale(jconst(-2.0, nj), P))
        return jmatmul(J, refl)

    def thetafn(pt):
        nj = jsize(pt)
        zero = jconst(0.0, nj)
        return [zero, pt[1].inv()] + [zero] * nb

    dom = [tuple(profile.s_range), tuple(profile.z_range)] + [tuple(d) for d in base.chart.domain]
    chart = ChartManifold(n, dom, label="calabi(m=%d)" % m)
    return CalabiChart(
        g=MetricField(gfn, chart), J=EndoField(Jfn, chart), I0=EndoField(I0fn, chart),
        proj_plus=EndoField(Ppfn, chart), theta=FormField(1, thetafn, chart),
        chart=chart, base=base, alpha=alpha, profile=profile, m=m)


def _base_omega_field(base):
    def omfn(pt):
        g = base.g(pt)
        J = base.J(pt)
        nb = len(g)
        return [[sum((J[mm][i] * g[mm][j] for mm in range(nb)), 0.0) for j in range(nb)]
                for i in range(nb)]
    return FormField(2, omfn, base.chart)


def _base_omega_at(base, p):
    omv, omg, _ = fundamental_form_jets(HermitianTriple(base.g, base.J, base.chart), p)
    return omv, omg


def moment_map_residual(cal, plan):
    """max |iota_{d/ds} omega_J + dz| over samples (the flow is Hamiltonian
    with moment map -z in these conventions)."""
    want = np.zeros(cal.chart.dim)
    want[1] = -1.0
    worst = 0.0
    for p in cal.chart.samples(plan):
        omv, _, _ = fundamental_form_jets(cal.triple(), p)
        worst = max(worst, np.abs(omv[0, :] - want).max())
    return worst


def volume_checks(cal, p):
    """Top-power identity at a point: the Pfaffian coefficient of omega^m in
    chart coordinates against the fibered closed forms, in both the z and the
    r dictionaries.  Returns a dict of the three coefficients and residuals."""
    m = cal.m
    n = cal.chart.dim
    p = np.asarray(p, float)
    omv, _, _ = fundamental_form_jets(cal.triple(), p)
    lhs = wedge_top([omv] * m)

    x = Jet2.seed(p)
    b = x[2:]
    a = [e.value for e in cal.alpha.fn(b)]
    gN = [[e.value for e in row] for row in cal.base.g(b)]
    IN = [[e.value for e in row] for row in cal.base.J(b)]
    nb = n - 2
    omN = np.zeros((n, n))
    for i in range(nb):
        for j in range(nb):
            omN[2 + i, 2 + j] = sum(IN[mm][i] * gN[mm][j] for mm in range(nb))
    Th = np.zeros(n)
    Th[0] = 1.0
    Th[2:] = a
    dz = np.zeros(n)
    dz[1] = 1.0
    z = p[1]
    dzTh = np.outer(dz, Th) - np.outer(Th, dz)
    rhs_z = m * z ** (m - 1) * wedge_top([dzTh] + [omN] * (m - 1))

    prof = cal.profile
    r = prof.r_of_z(z)
    Gp = prof.G_prime(r)
    dr = dz / Gp
    Thdr = np.outer(Th, dr) - np.outer(dr, Th)
    rhs_r = -m * prof.moment_map_G(r) ** (m - 1) * Gp * wedge_top([omN] * (m - 1) + [Thdr])

    return {"pfaffian": lhs, "z_form": rhs_z, "r_form": rhs_r,
            "residual_z": abs(lhs - rhs_z), "residual_r": abs(lhs - rhs_r)}


def lee_form_of_I0(cal, p):
    """Solve d omega_I = theta0 ^ omega_I for theta0 by least squares over all
    3-form components.  Returns (theta0 components, fit residual)."""
    n = cal.chart.dim
    omv, omg, _ = fundamental_form_jets(cal.triple_I(), p)
    dom = exterior_from_grad(omg, 2)
    rows, rhs = [], []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                row = np.zeros(n)
                row[i] += omv[j, k]
                row[j] -= omv[i, k]
                row[k] += omv[i, j]
                rows.append(row)
                rhs.append(dom[i, j, k])
    Amat = np.array(rows)
    bvec = np.array(rhs)
    th0, *_ = np.linalg.lstsq(Amat, bvec, rcond=None)
    fit = np.abs(Amat @ th0 - bvec).max() if len(bvec) else 0.0
    return th0, fit


def rescale_biaxial(t, s, a, b, profile=None, tol=1e-9, t_samples=9):
    """Biaxial rescale g_hat = a(ln z) g|D+ + b(ln z) g|D-.

    a and b are scalar jet closures of one variable.  The closedness of the
    rescaled fundamental form forces b' + b = a; the constraint is validated
    on a grid of the ln z range and violations raise NotClosedError.
    Returns (HermitianTriple of the rescaled structure, constraint residual).
    """
    zlo, zhi = (profile.z_range if profile is not None else (0.5, 2.0))
    worst = 0.0
    for tv in np.linspace(np.log(zlo), np.log(zhi), t_samples):
        u = Jet2(tv, np.array([1.0]), np.zeros((1, 1)))
        av = a(u)
        bv = b(u)
        if av.value <= 0 or bv.value <= 0:
            raise ValueError("rescale profiles must stay positive, got a=%.3e b=%.3e at t=%.3f"
                             % (av.value, bv.value, tv))
        worst = max(worst, abs(bv.grad[0] + bv.value - av.value))
    if worst > tol:
        raise NotClosedError("b' + b - a = %.3e exceeds %.1e; the rescaled form is not closed"
                             % (worst, tol))

    gfn = t.g.fn
    Jfn = t.J.fn
    Ppfn = s.proj_plus.fn

    def ghat(pt):
        g = gfn(pt)
        P = Ppfn(pt)
        dim = len(g)
        lt = jlog(pt[1])
        av = a(lt)
        bv = b(lt)
        gp = [[sum((P[ai][i] * g[ai][bi] * P[bi][j] for ai in range(dim) for bi in range(dim)), 0.0)
               for j in range(dim)] for i in range(dim)]
        return [[av * gp[i][j] + bv * (g[i][j] - gp[i][j]) for j in range(dim)]
                for i in range(dim)]

    return HermitianTriple(MetricField(ghat, t.chart), EndoField(Jfn, t.chart), t.chart), worst
