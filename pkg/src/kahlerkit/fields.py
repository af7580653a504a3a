"""Charts and pointwise tensor calculus.

A chart is a coordinate box; every tensor field is a callable taking the list
of coordinate jets and returning jet-valued components. All curvature below is
float-layer linear algebra on the packed (value, grad, hess) arrays, so the
only differentiation ever performed is the exact jet propagation.

Curvature convention: R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z
- nabla_[X,Y] Z, lowered on the last slot as R(X,Y,Z,W) = g(R(X,Y)Z, W), and
Ricci(X,Y) = trace(Z -> R(Z,X)Y). Validated against sphere/hyperbolic oracles.
"""

import itertools

import numpy as np

from kahlerkit.jets import Jet2, pack, pack1, sample_points


class DegenerateMetricError(ValueError):
    pass


class NotClosedError(ValueError):
    pass


class AlmostComplexError(ValueError):
    pass


class ChartManifold:
    """Coordinate box with a dimension and a label; all geometry on it is a
    function of a point expressed in these coordinates."""

    def __init__(self, dim, domain, label=""):
        if dim < 1 or len(domain) != dim:
            raise ValueError("domain must provide one interval per coordinate")
        self.dim = int(dim)
        self.domain = [(float(a), float(b)) for a, b in domain]
        self.label = label

    def samples(self, plan):
        return sample_points(self.domain, plan)

    def contains(self, p):
        p = np.asarray(p, float)
        return all(a <= x <= b for x, (a, b) in zip(p, self.domain))

    def center(self):
        return np.array([0.5 * (a + b) for a, b in self.domain])

    def __repr__(self):
        return f"ChartManifold(dim={self.dim}, label={self.label!r})"


class MetricField:
    def __init__(self, fn, chart=None):
        self.fn = fn
        self.chart = chart

    def __call__(self, pt):
        return self.fn(pt)


class EndoField:
    def __init__(self, fn, chart=None):
        self.fn = fn
        self.chart = chart

    def __call__(self, pt):
        return self.fn(pt)


class FormField:
    def __init__(self, degree, fn, chart=None):
        self.degree = int(degree)
        self.fn = fn
        self.chart = chart

    def __call__(self, pt):
        return self.fn(pt)


class VectorFieldF:
    def __init__(self, fn, chart=None):
        self.fn = fn
        self.chart = chart

    def __call__(self, pt):
        return self.fn(pt)


class ScalarField:
    def __init__(self, fn, chart=None):
        self.fn = fn
        self.chart = chart

    def __call__(self, pt):
        return self.fn(pt)


def seedcall(field, p):
    return field(Jet2.seed(np.asarray(p, float)))


def metric_jets(g, p):
    return pack(seedcall(g, p))


def endo_jets(J, p):
    return pack(seedcall(J, p))


def vector_jets(V, p):
    return pack1(seedcall(V, p))


# ---------------------------------------------------------------------------
# curvature stack
# ---------------------------------------------------------------------------

def _inverse(gv, p):
    try:
        gi = np.linalg.inv(gv)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError(f"singular metric at point {np.asarray(p).tolist()}")
    return gi

def christoffel_parts(gv, gg, gh, p=None):
    """Gamma[k,i,j] plus its coordinate derivative dGamma[k,i,j,m] and g^{-1}."""
    gi = _inverse(gv, p)
    T = np.einsum('jli->lij', gg) + np.einsum('ilj->lij', gg) - np.einsum('ijl->lij', gg)
    Gam = 0.5 * np.einsum('kl,lij->kij', gi, T)
    dgi = -np.einsum('ka,abm,bl->klm', gi, gg, gi)
    dT = (np.einsum('jlim->lijm', gh) + np.einsum('iljm->lijm', gh)
          - np.einsum('ijlm->lijm', gh))
    dGam = (0.5 * np.einsum('klm,lij->kijm', dgi, T)
            + 0.5 * np.einsum('kl,lijm->kijm', gi, dT))
    return Gam, dGam, gi


def christoffel(g, p):
    gv, gg, gh = metric_jets(g, p)
    Gam, _, _ = christoffel_parts(gv, gg, gh, p)
    return Gam


def curvature(g, p):
    """Riemann (fully lowered), Ricci, scalar curvature and g^{-1} at p."""
    gv, gg, gh = metric_jets(g, p)
    return curvature_from_jets(gv, gg, gh, p)


def curvature_from_jets(gv, gg, gh, p=None):
    Gam, dGam, gi = christoffel_parts(gv, gg, gh, p)
    Rup = (np.einsum('ljki->lijk', dGam) - np.einsum('likj->lijk', dGam)
           + np.einsum('lim,mjk->lijk', Gam, Gam) - np.einsum('ljm,mik->lijk', Gam, Gam))
    Rlow = np.einsum('lm,mijk->ijkl', gv, Rup)
    Ric = np.einsum('il,ijkl->jk', gi, Rlow)
    scal = np.einsum('jk,jk->', gi, Ric)
    return Rlow, Ric, scal, gi


def riemann(g, p):
    return curvature(g, p)[0]


def ricci(g, p):
    return curvature(g, p)[1]


def scalar_curvature(g, p):
    return curvature(g, p)[2]


# ---------------------------------------------------------------------------
# Lie derivative, exterior derivative, Nijenhuis
# ---------------------------------------------------------------------------

def lie_derivative_metric(g, V, p):
    """(L_V g)_ij = V^k d_k g_ij + g_kj d_i V^k + g_ik d_j V^k."""
    gv, gg, _ = metric_jets(g, p)
    vv, vg, _ = vector_jets(V, p)
    return lie_metric_from_jets(gv, gg, vv, vg)


def lie_metric_from_jets(gv, gg, vv, vg):
    return (np.einsum('k,ijk->ij', vv, gg) + np.einsum('kj,ki->ij', gv, vg)
            + np.einsum('ik,kj->ij', gv, vg))


def lie_endo_from_jets(Xv, Xg, Jv, Jg):
    """(L_X J)^k_j = X^m d_m J^k_j - J^m_j d_m X^k + J^k_m d_j X^m."""
    t1 = np.einsum('m,kjm->kj', Xv, Jg)
    t2 = np.einsum('mj,km->kj', Jv, Xg)
    t3 = np.einsum('km,mj->kj', Jv, Xg)
    return t1 - t2 + t3


def embed_form2(val, dim, offset):
    """Zero-pad a 2-form value array into a larger chart at the given slot offset
    (the pullback along the coordinate projection)."""
    out = np.zeros((dim, dim))
    k = val.shape[0]
    out[offset:offset + k, offset:offset + k] = val
    return out


def pack_form(F):
    """Nested jet lists of a k-form -> (value array (n,)*k, grad array (n,)*k+(n,))."""
    arr = np.array(F, dtype=object)
    shape = arr.shape
    n = arr.flat[0].grad.size
    val = np.empty(shape)
    grad = np.empty(shape + (n,))
    for idx in np.ndindex(shape):
        val[idx] = arr[idx].value
        grad[idx] = arr[idx].grad
    return val, grad


def exterior_from_grad(grad, k):
    """d of a k-form given the packed component gradients."""
    out = None
    for j in range(k + 1):
        term = np.moveaxis(grad, -1, j)
        out = term if out is None else out + ((-1.0) ** j) * term
    return out


def exterior_derivative(omega, p, dim=None):
    """(d omega) components at p; degree omega.degree + 1 must not exceed dim."""
    comps = seedcall(omega, p)
    if omega.degree == 0:
        return comps.grad if isinstance(comps, Jet2) else pack1(comps)[1]
    val, grad = pack_form(comps)
    n = grad.shape[-1]
    if dim is None:
        dim = n
    if omega.degree + 1 > dim:
        raise ValueError(f"exterior derivative of degree {omega.degree} form exceeds dim {dim}")
    return exterior_from_grad(grad, omega.degree)


def dform1(alpha_val_grad):
    av, ag = alpha_val_grad
    return ag.T - ag


def dform2_from_jets(omv, omg):
    return (np.einsum('jki->ijk', omg) - np.einsum('ikj->ijk', omg)
            + np.einsum('ijk->ijk', omg))


def nijenhuis_from_jets(Jv, Jg):
    """N^k_ij with Jg[k,j,m] = d_m J^k_j; zero iff the structure is integrable."""
    t1 = np.einsum('mi,kjm->kij', Jv, Jg)
    t2 = np.einsum('mj,kim->kij', Jv, Jg)
    t3 = np.einsum('km,mij->kij', Jv, Jg)
    t4 = np.einsum('km,mji->kij', Jv, Jg)
    return t1 - t2 + t3 - t4


def nijenhuis(J, p, check=True, tol=1e-8):
    Jv, Jg, _ = endo_jets(J, p)
    if check:
        d = Jv.shape[0]
        sq = np.abs(Jv @ Jv + np.eye(d)).max()
        if sq > tol:
            raise AlmostComplexError(
                f"endomorphism square differs from -1 by {sq:.2e} at {np.asarray(p).tolist()}")
    return nijenhuis_from_jets(Jv, Jg)


# ---------------------------------------------------------------------------
# homotopy primitive (star-shaped chart, center = box center)
# ---------------------------------------------------------------------------

def homotopy_primitive(omega, chart, order=32, check_plan=None, tol=1e-8):
    """One-form alpha with d(alpha) = omega for a closed 2-form omega.

    alpha(x) = integral_0^1 t * omega(c + t(x-c))(x - c, .) dt with c the box
    center. Exact for polynomial omega at the default order. Closedness of
    omega is verified on a small sample first.
    """
    if check_plan is not None:
        for p in chart.samples(check_plan):
            d = exterior_derivative(omega, p, chart.dim)
            r = np.abs(d).max()
            if r > tol:
                raise NotClosedError(f"form is not closed: d-residual {r:.2e} at {p.tolist()}")
    c = chart.center()
    dim = chart.dim
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def alpha_fn(pt):
        nsz = pt[0].grad.size
        diff = [pt[i] - c[i] for i in range(dim)]
        acc = [Jet2.const(0.0, nsz) for _ in range(dim)]
        for x, w in zip(nodes, weights):
            t = 0.5 * (x + 1.0)
            arg = [Jet2.const(c[i], nsz) + t * diff[i] for i in range(dim)]
            om = omega(arg)
            scale = 0.5 * w * t
            for j in range(dim):
                acc[j] = acc[j] + scale * sum((om[i][j] * diff[i] for i in range(dim)), 0.0)
        return acc

    return FormField(1, alpha_fn, chart)


# ---------------------------------------------------------------------------
# wedge products of 2-forms (top-degree coefficient)
# ---------------------------------------------------------------------------

def _perm_sign(perm):
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return sign


def wedge_top(two_forms):
    """Coefficient of e_0^...^e_{2m-1} in beta_1 ^ ... ^ beta_m (each a 2-form
    value array on a 2m-dimensional chart)."""
    m = len(two_forms)
    n = two_forms[0].shape[0]
    if n != 2 * m:
        raise ValueError("wedge_top needs m two-forms on a 2m-dimensional chart")
    total = 0.0
    for perm in itertools.permutations(range(n)):
        term = 1.0
        for i, beta in enumerate(two_forms):
            term *= beta[perm[2 * i], perm[2 * i + 1]]
            if term == 0.0:
                break
        if term != 0.0:
            total += _perm_sign(perm) * term
    return total / (2.0 ** m)
