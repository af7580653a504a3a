"""Scenario registry and check suites.

A scenario file is a JSON object:

    {"name": "ak_disk",
     "builder": "ak_product",
     "params": {"z": "disk", "k": 1, "twist": {"id": "coord_z"}},
     "plan": {"seed": 7, "count": 30},
     "tolerances": {"ak3_identity": 1e-6}}

"builder" picks an entry from BUILDERS, "params" overrides that builder's
defaults, and "tolerances" overrides per-check defaults by check name.  A
report is a plain dict (rendered by render_json with 17-significant-digit
floats) holding one record per check: points used/excluded, max and mean
residual, tolerance, pass flag.  For a fixed (scenario, seed) everything in
the report except timings_seconds is reproduced byte for byte.
"""

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from kahlerkit.jets import (Jet2, SamplePlan, JetDomainError, jsize, jconst,
                            jsin, jlog, jeye)
from kahlerkit.fields import (ChartManifold, MetricField, DegenerateMetricError,
                              NotClosedError, AlmostComplexError, metric_jets,
                              endo_jets, curvature_from_jets, dform2_from_jets,
                              nijenhuis_from_jets)
from kahlerkit.hermitian import (CompatibilityError, fundamental_form_jets,
                                 ddc_from_jets)
from kahlerkit.foliation import (theta_jets, oneill_tensors,
                                 dplus_geodesic_residual, classify,
                                 VERDICT_HOLOMORPHIC)
from kahlerkit.calabi import CalabiProfile, disk_base, build_calabi, volume_checks
from kahlerkit.twist import (constant_twist, coordinate_twist, build_twist,
                             norm_factor_expected, norm_factor_measured,
                             ricci_identity_check, zeta_duality_residual)
from kahlerkit.almost_kahler import (build_ak_product, eta_tensor, iterate_chain,
                                     ker_dw_geodesic_residual)


class ScenarioError(ValueError):
    """Scenario file or parameter problem (usage error, exit code 2)."""


@dataclass
class Scenario:
    name: str
    builder: str
    params: dict
    seed: int
    count: int
    margin: float
    tolerances: dict
    source: str = "<memory>"


@dataclass
class CheckResult:
    points_used: int
    points_excluded: int
    max_residual: float
    mean_residual: float
    error: str = ""


@dataclass
class Check:
    name: str
    doc: str
    tol: float
    run: object


@dataclass
class Case:
    label: str
    chart: ChartManifold
    metric: MetricField
    checks: list


@dataclass
class BuilderEntry:
    id: str
    summary: str
    defaults: dict
    check_names: tuple
    make: object


_DOMAIN_ERRORS = (JetDomainError, DegenerateMetricError, NotClosedError,
                  AlmostComplexError, CompatibilityError, np.linalg.LinAlgError)


def _point_loop(chart, plan, fn):
    """Run fn over the plan's samples; fn returns a residual, or None to
    exclude the point.  A domain error aborts the check and is surfaced in the
    record together with the offending point."""
    vals = []
    excluded = 0
    for p in chart.samples(plan):
        try:
            r = fn(p)
        except _DOMAIN_ERRORS as exc:
            msg = "%s at point %s: %s" % (type(exc).__name__,
                                          np.asarray(p).round(8).tolist(), exc)
            mx = max(vals) if vals else 0.0
            mean = (sum(vals) / len(vals)) if vals else 0.0
            return CheckResult(len(vals), excluded, mx, mean, msg)
        if r is None:
            excluded += 1
            continue
        vals.append(float(r))
    mx = max(vals) if vals else 0.0
    mean = (sum(vals) / len(vals)) if vals else 0.0
    return CheckResult(len(vals), excluded, mx, mean, "")


def _merge_params(defaults, given, builder_id):
    merged = dict(defaults)
    for key, val in dict(given).items():
        if key not in defaults:
            raise ScenarioError("builder %r has no parameter %r (known: %s)"
                                % (builder_id, key, ", ".join(sorted(defaults))))
        merged[key] = val
    return merged


def _twist_from_spec(spec, dim):
    """Registry of twist maps addressable from scenario files.  The last two
    chart coordinates are the disk coordinates, so coord_z / conj_z attach
    there."""
    if isinstance(spec, str):
        spec = {"id": spec}
    if not isinstance(spec, dict) or "id" not in spec:
        raise ScenarioError("twist must be a name or an object with an 'id'")
    extra = set(spec) - {"id", "c", "scale"}
    if extra:
        raise ScenarioError("unknown twist fields: %s" % ", ".join(sorted(extra)))
    tid = spec["id"]
    scale = float(spec.get("scale", 1.0))
    if tid == "const":
        c = spec.get("c", [0.0, 0.0])
        if not (isinstance(c, (list, tuple)) and len(c) == 2):
            raise ScenarioError("const twist needs c = [re, im]")
        return constant_twist(float(c[0]), float(c[1]))
    if tid == "coord_z":
        return coordinate_twist(dim - 2, dim - 1, scale=scale)
    if tid == "conj_z":
        return coordinate_twist(dim - 2, dim - 1, conj=True, scale=scale)
    raise ScenarioError("unknown twist id %r (known: const, coord_z, conj_z)" % (tid,))


def _kahler_residual_at(triple, p):
    gv, _, _ = metric_jets(triple.g, p)
    Jv, Jg, _ = endo_jets(triple.J, p)
    d = gv.shape[0]
    compat = max(np.abs(Jv.T @ gv @ Jv - gv).max(),
                 np.abs(Jv @ Jv + np.eye(d)).max())
    omv, omg, _ = fundamental_form_jets(triple, p)
    closed = np.abs(dform2_from_jets(omv, omg)).max()
    integ = np.abs(nijenhuis_from_jets(Jv, Jg)).max()
    return max(compat, closed, integ)


def _omega_values(gfn, Jfn, x):
    d = len(gfn(x))
    g = gfn(x)
    J = Jfn(x)
    return np.array([[sum(J[m][i].value * g[m][j].value for m in range(d))
                      for j in range(d)] for i in range(d)])


# ---------------------------------------------------------------------------
# flat
# ---------------------------------------------------------------------------

def _make_flat(params):
    dim = int(params["dim"])
    if dim < 2:
        raise ScenarioError("flat builder needs dim >= 2")
    chart = ChartManifold(dim, [(-1.0, 1.0)] * dim, label="R^%d" % dim)

    def gfn(pt):
        return jeye(dim, jsize(pt))

    metric = MetricField(gfn, chart)

    def riem_at(p):
        gv, gg, gh = metric_jets(gfn, p)
        Rlow, _, _, _ = curvature_from_jets(gv, gg, gh)
        return np.abs(Rlow).max()

    def ric_at(p):
        gv, gg, gh = metric_jets(gfn, p)
        _, Ric, _, _ = curvature_from_jets(gv, gg, gh)
        return np.abs(Ric).max()

    checks = [
        Check("curvature_zero", "Riemann tensor of the Euclidean metric vanishes",
              1e-11, lambda plan: _point_loop(chart, plan, riem_at)),
        Check("ricci_zero", "Ricci tensor of the Euclidean metric vanishes",
              1e-11, lambda plan: _point_loop(chart, plan, ric_at)),
    ]
    return Case("Euclidean R^%d" % dim, chart, metric, checks)


# ---------------------------------------------------------------------------
# sphere
# ---------------------------------------------------------------------------

def _make_sphere(params):
    chart = ChartManifold(2, [(0.4, 2.7), (-3.0, 3.0)], label="S^2")

    def gfn(pt):
        n = jsize(pt)
        su = jsin(pt[0])
        zero = jconst(0.0, n)
        return [[jconst(1.0, n), zero], [zero, su * su]]

    metric = MetricField(gfn, chart)

    def curv(p):
        gv, gg, gh = metric_jets(gfn, p)
        return curvature_from_jets(gv, gg, gh)

    def scal_at(p):
        return abs(curv(p)[2] - 2.0)

    def sym_at(p):
        R = curv(p)[0]
        sc = max(np.abs(R).max(), 1e-12)
        r1 = np.abs(R + R.transpose(1, 0, 2, 3)).max()
        r2 = np.abs(R + R.transpose(0, 1, 3, 2)).max()
        r3 = np.abs(R - R.transpose(2, 3, 0, 1)).max()
        return max(r1, r2, r3) / sc

    def bianchi_at(p):
        R = curv(p)[0]
        sc = max(np.abs(R).max(), 1e-12)
        return np.abs(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)).max() / sc

    checks = [
        Check("scalar_curvature_two", "scalar curvature of the unit sphere is 2",
              1e-9, lambda plan: _point_loop(chart, plan, scal_at)),
        Check("riemann_symmetries",
              "antisymmetry and pair symmetry of the lowered curvature tensor",
              1e-9, lambda plan: _point_loop(chart, plan, sym_at)),
        Check("bianchi_first", "cyclic sum over the first three slots vanishes",
              1e-9, lambda plan: _point_loop(chart, plan, bianchi_at)),
    ]
    return Case("unit 2-sphere", chart, metric, checks)


# ---------------------------------------------------------------------------
# calabi
# ---------------------------------------------------------------------------

def _calabi_core(params):
    kind = params["base"]
    if kind not in ("flat", "disk"):
        raise ScenarioError("calabi base must be 'flat' or 'disk'")
    k = 0 if kind == "flat" else int(params["k"])
    base, alpha0 = disk_base(k, radius=float(params["radius"]))
    profile = CalabiProfile(A=float(params["A"]),
                            z_range=tuple(params["z_range"]),
                            s_range=tuple(params["s_range"]))
    amode = params["alpha"]
    if amode not in ("closed_form", "homotopy"):
        raise ScenarioError("alpha must be 'closed_form' or 'homotopy'")
    return build_calabi(base, profile, alpha=(alpha0 if amode == "closed_form" else None))


def _calabi_checks(cal, floor, expected_verdict):
    t = cal.triple()
    s = cal.splitting()
    chart = cal.chart

    def hom_at(p):
        return theta_jets(t, s, p)[1]

    def lee_at(p):
        th = theta_jets(t, s, p)[0]
        want = np.zeros(chart.dim)
        want[1] = 1.0 / p[1]
        return np.abs(np.array([c.value for c in th]) - want).max()

    def closed_at(p):
        th = theta_jets(t, s, p)[0]
        ag = np.array([c.grad for c in th])
        return np.abs(ag.T - ag).max()

    def geod_at(p):
        xi, _ = oneill_tensors(t, s, p)
        Ppv, _, _ = endo_jets(cal.proj_plus.fn, p)
        return dplus_geodesic_residual(xi, Ppv)

    def moment_at(p):
        omv, _, _ = fundamental_form_jets(t, p)
        want = np.zeros(chart.dim)
        want[1] = -1.0
        return np.abs(omv[0, :] - want).max()

    def vol_at(p):
        res = volume_checks(cal, p)
        return max(res["residual_z"], res["residual_r"])

    def volfloor_at(p):
        pf = abs(volume_checks(cal, p)["pfaffian"])
        return max(0.0, floor - pf)

    def verdict_run(plan):
        rep = classify(t, s, plan)
        r = 0.0 if rep.verdict == expected_verdict else 1.0
        return CheckResult(rep.points_used, rep.points_excluded, r, r, "")

    return [
        Check("kahler_verdict",
              "g-J compatibility, closed fundamental form, integrable J",
              1e-7, lambda plan: _point_loop(chart, plan,
                                             lambda p: _kahler_residual_at(t, p))),
        Check("homothetic_foliation",
              "(L_V g) restricted off the fibers equals theta(V) g, extracted theta",
              1e-7, lambda plan: _point_loop(chart, plan, hom_at)),
        Check("lee_is_dlnz", "extracted Lee form equals d ln z",
              1e-7, lambda plan: _point_loop(chart, plan, lee_at)),
        Check("lee_closed", "extracted Lee form is closed",
              1e-7, lambda plan: _point_loop(chart, plan, closed_at)),
        Check("plus_geodesic", "splitting tensor vanishes on fiber-fiber slots",
              1e-7, lambda plan: _point_loop(chart, plan, geod_at)),
        Check("moment_map", "contraction of omega with the circle field is -dz",
              1e-9, lambda plan: _point_loop(chart, plan, moment_at)),
        Check("volume_identity",
              "omega^m against the z- and r-coordinate product volume forms",
              1e-9, lambda plan: _point_loop(chart, plan, vol_at)),
        Check("volume_nonvanishing",
              "Pfaffian of omega stays above the declared floor",
              1e-15, lambda plan: _point_loop(chart, plan, volfloor_at)),
        Check("classify_verdict", "foliation classifier verdict",
              0.5, verdict_run),
    ]


def _make_calabi(params):
    cal = _calabi_core(params)
    checks = _calabi_checks(cal, float(params["volume_floor"]), params["verdict"])
    return Case(cal.chart.label + " over " + cal.base.chart.label,
                cal.chart, cal.g, checks)


# ---------------------------------------------------------------------------
# calabi_twist
# ---------------------------------------------------------------------------

def _make_calabi_twist(params):
    cal = _calabi_core(params)
    tw = _twist_from_spec(params["twist"], cal.chart.dim)
    mode = params["mode"]
    if mode not in ("A", "B"):
        raise ScenarioError("twist mode must be 'A' or 'B'")
    tt = build_twist(cal, tw, mode=mode)
    twt = tt.triple()
    s = cal.splitting()
    chart = cal.chart
    n = chart.dim

    def invariance_at(p):
        x = Jet2.seed(np.asarray(p, float))
        rJ = np.abs(_omega_values(tt.g_w.fn, tt.J_w.fn, x)
                    - _omega_values(cal.g.fn, cal.J.fn, x)).max()
        rI = np.abs(_omega_values(tt.g_w.fn, tt.I_w.fn, x)
                    - _omega_values(cal.g.fn, cal.I0.fn, x)).max()
        return max(rJ, rI)

    def norm_at(p):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = tw.fn(x)
        want = norm_factor_expected(w1.value, w2.value, mode)
        got = norm_factor_measured(cal.g.fn, tt.g_w.fn, cal.theta.fn, p)
        return abs(got - want)

    def transverse_at(p):
        x = Jet2.seed(np.asarray(p, float))
        w1, w2 = tw.fn(x)
        Jv, _, _ = endo_jets(cal.J.fn, p)
        Ppv, _, _ = endo_jets(cal.proj_plus.fn, p)
        Pm = np.eye(n) - Ppv
        r = 0.0
        for col in range(n):
            X = Pm[:, col]
            r = max(r, abs(w2.grad @ X + w1.grad @ (Jv @ X)))
        return r

    def nijenhuis_at(p):
        Jv, Jg, _ = endo_jets(tt.J_w.fn, p)
        return np.abs(nijenhuis_from_jets(Jv, Jg)).max()

    def hom_at(p):
        return theta_jets(twt, s, p)[1]

    def ricci_at(p):
        return ricci_identity_check(cal, tw, tt, p)["corrected"]

    def duality_at(p):
        return zeta_duality_residual(cal.g.fn, cal.J.fn, tt.g_w.fn, tt.J_w.fn,
                                     cal.theta.fn, p)

    def verdict_run(plan):
        rep = classify(twt, s, plan)
        r = 0.0 if rep.verdict == params["verdict"] else 1.0
        return CheckResult(rep.points_used, rep.points_excluded, r, r, "")

    checks = [
        Check("form_invariance", "omega of (g,J) and of (g,I0) unchanged by the twist",
              1e-9, lambda plan: _point_loop(chart, plan, invariance_at)),
        Check("norm_factor", "theta-direction rescaling factor of the twisted metric",
              1e-9, lambda plan: _point_loop(chart, plan, norm_at)),
        Check("transverse_holomorphy", "dw2 kills what J rotates into dw1 off the fibers",
              1e-7, lambda plan: _point_loop(chart, plan, transverse_at)),
        Check("nijenhuis_twisted", "integrability of the twisted J",
              1e-7, lambda plan: _point_loop(chart, plan, nijenhuis_at)),
        Check("homothetic_foliation", "homothetic residual of the twisted triple",
              1e-7, lambda plan: _point_loop(chart, plan, hom_at)),
        Check("ricci_fiber_log",
              "Ricci form minus lifted base Ricci form matches the log potential terms",
              1e-6, lambda plan: _point_loop(chart, plan, ricci_at)),
        Check("zeta_duality", "J_w g_w^{-1} theta equals J g^{-1} theta",
              1e-8, lambda plan: _point_loop(chart, plan, duality_at)),
        Check("classify_verdict", "foliation classifier verdict on the twisted triple",
              0.5, verdict_run),
    ]
    return Case("twisted " + chart.label + " [" + tw.label + ", mode " + mode + "]",
                chart, tt.g_w, checks)


# ---------------------------------------------------------------------------
# ak_product
# ---------------------------------------------------------------------------

def _make_ak(params):
    zkind = params["z"]
    radius = float(params["radius"])
    zpos_product = {}
    if zkind == "plane":
        zt, _ = disk_base(0, radius=radius)
    elif zkind == "disk":
        zt, _ = disk_base(int(params["k"]), radius=radius)
    elif zkind == "chain":
        levels = iterate_chain("twisted", int(params["chain_m"]), A=params["A"],
                               radius=radius, z_range=tuple(params["z_range"]),
                               s_range=tuple(params["s_range"]))
        lv = levels[int(params["chain_level"])]
        zt = lv.triple
        zpos_product = {j: pos + 2 for j, pos in lv.z_positions.items()}
    else:
        raise ScenarioError("ak z factor must be 'plane', 'disk' or 'chain'")

    tw = _twist_from_spec(params["twist"], zt.chart.dim)
    mode = params["mode"]
    if mode not in ("A", "B"):
        raise ScenarioError("twist mode must be 'A' or 'B'")
    ak = build_ak_product(zt, tw, mode=mode,
                          plane_range=tuple(params["plane_range"]))
    chart = ak.chart
    n = chart.dim
    zidx = list(range(2, n))
    cache = {}

    def cached(tag, p, compute):
        key = (tag, np.asarray(p, float).tobytes())
        if key not in cache:
            cache[key] = compute()
        return cache[key]

    def curv(p):
        def build():
            gv, gg, gh = metric_jets(ak.g.fn, p)
            Rlow, Ric, scal, gi = curvature_from_jets(gv, gg, gh)
            return gv, gg, Rlow, Ric
        return cached("curv", p, build)

    def eta(p):
        return cached("eta", p, lambda: eta_tensor(ak.g.fn, ak.J_tilde.fn, p))

    def dwmag(p):
        def build():
            x = Jet2.seed(np.asarray(p, float))
            w1, w2 = ak.twist_full.fn(x)
            return max(np.abs(w1.grad).max(), np.abs(w2.grad).max())
        return cached("dw", p, build)

    def structure_at(p):
        x = Jet2.seed(np.asarray(p, float))
        g = ak.g.fn(x)
        Jt = ak.J_tilde.fn(x)
        om = [[sum((Jt[m][i] * g[m][j] for m in range(n)), 0.0) for j in range(n)]
              for i in range(n)]
        omv = np.array([[e.value for e in row] for row in om])
        omg = np.array([[e.grad for e in row] for row in om])
        dom = np.abs(np.einsum('jki->ijk', omg) - np.einsum('ikj->ijk', omg)
                     + omg).max()
        target = np.zeros((n, n))
        target[0, 1] = -1.0
        target[1, 0] = 1.0
        bp = Jet2.seed(np.asarray(p[2:], float))
        hv = np.array([[e.value for e in row] for row in ak.z_factor.g.fn(bp)])
        Iv = np.array([[e.value for e in row] for row in ak.z_factor.J.fn(bp)])
        target[2:, 2:] = Iv.T @ hv
        r_target = np.abs(omv - target).max()
        r_inv = np.abs(omv - _omega_values(ak.g0.fn, ak.Jt0.fn, x)).max()
        return max(dom, r_target, r_inv)

    def killing_at(p):
        gv, gg, _, _ = curv(p)
        return max(np.abs(gg[:, :, 0]).max(), np.abs(gg[:, :, 1]).max())

    def ak3_at(p):
        _, _, Rlow, _ = curv(p)
        Jtv, _, _ = endo_jets(ak.J_tilde.fn, p)
        RJ = np.einsum('ai,bj,ck,dl,abcd->ijkl', Jtv, Jtv, Jtv, Jtv, Rlow)
        sc = np.abs(Rlow).max()
        return np.abs(RJ - Rlow).max() / (sc if sc > 1e-12 else 1.0)

    def blocks_at(p):
        _, _, Rlow, _ = curv(p)
        sc = np.abs(Rlow).max()
        denom = sc if sc > 1e-12 else 1.0
        b1 = max(abs(Rlow[a, b, c, X]) for a in (0, 1) for b in (0, 1)
                 for c in (0, 1) for X in zidx)
        b2 = max(abs(Rlow[X, Y, Z, d]) for X in zidx for Y in zidx
                 for Z in zidx for d in (0, 1))
        return max(b1, b2) / denom

    def prelt_at(p):
        et, gv, gg, _ = eta(p)
        r = 0.0
        for a in (0, 1):
            for b in (0, 1):
                for X in zidx:
                    lhs = 2.0 * sum(gv[m, X] * et[a, m, b] for m in range(n))
                    r = max(r, abs(lhs - gg[a, b, X]))
        return r

    def algebra_at(p):
        et, _, _, Jtv = eta(p)
        rA = np.abs(np.einsum('ikm,mj->ikj', et, Jtv)
                    + np.einsum('km,imj->ikj', Jtv, et)).max()
        rB = np.abs(np.einsum('mi,mkj->ikj', Jtv, et)
                    - np.einsum('ikm,mj->ikj', et, Jtv)).max()
        return max(rA, rB)

    def kernel_at(p):
        if dwmag(p) < 1e-6:
            return None
        et, _, _, _ = eta(p)
        return max(np.abs(et[zidx, :, :]).max(), np.abs(et[0:2, 0:2, 0:2]).max())

    def rank_at(p):
        if dwmag(p) < 1e-6:
            return None
        et, _, _, _ = eta(p)
        vecs = np.stack([et[a, :, c] for a in (0, 1) for c in zidx])
        sv = np.linalg.svd(vecs, compute_uv=False)
        rank = int((sv > 1e-8 * sv[0]).sum()) if sv[0] > 0 else 0
        return abs(rank - 2.0)

    def einstein_at(p):
        gv, _, _, Ric = curv(p)
        lam = float(np.tensordot(Ric, gv) / np.tensordot(gv, gv))
        return np.abs(Ric - lam * gv).max()

    def ricci_at(p):
        return np.abs(curv(p)[3]).max()

    def fiber_log_at(p):
        _, _, _, Ric = curv(p)
        Jv, Jg, _ = endo_jets(ak.J.fn, p)
        rho = np.einsum('mi,mj->ij', Jv, Ric)
        x = Jet2.seed(np.asarray(p, float))
        for j, pos in zpos_product.items():
            rho = rho - 0.5 * j * ddc_from_jets(jlog(x[pos]), Jv, Jg)
        return np.abs(rho).max()

    checks = [
        Check("structure_forms",
              "omega of J~ hits -dx1^dx2 + lifted base form, closed, twist-invariant",
              1e-9, lambda plan: _point_loop(chart, plan, structure_at)),
        Check("killing_plane", "plane translations are Killing for the twisted metric",
              1e-9, lambda plan: _point_loop(chart, plan, killing_at)),
        Check("ak3_identity",
              "curvature invariance under four copies of J~, relative",
              1e-6, lambda plan: _point_loop(chart, plan, ak3_at)),
        Check("ak3_blocks", "mixed plane/Z curvature blocks vanish, relative",
              1e-6, lambda plan: _point_loop(chart, plan, blocks_at)),
        Check("torsion_derivative",
              "2 g(eta_V W, X) equals the X-derivative of g(V, W) on the plane",
              1e-8, lambda plan: _point_loop(chart, plan, prelt_at)),
        Check("torsion_algebra", "eta anticommutes with J~ and shifts its slot",
              1e-7, lambda plan: _point_loop(chart, plan, algebra_at)),
        Check("torsion_kernel",
              "eta vanishes on Z directions and sends the plane off itself",
              1e-7, lambda plan: _point_loop(chart, plan, kernel_at)),
        Check("torsion_rank", "span of eta over the plane directions has rank 2",
              0.5, lambda plan: _point_loop(chart, plan, rank_at)),
        Check("einstein_fit", "max |Ric - lambda g| for the pointwise best lambda",
              1e-6, lambda plan: _point_loop(chart, plan, einstein_at)),
        Check("ricci_flat", "max |Ric|",
              1e-6, lambda plan: _point_loop(chart, plan, ricci_at)),
    ]
    if zpos_product:
        checks.append(Check(
            "ricci_form_fiber_log",
            "Ricci form of the product equals the fiber log potential terms",
            1e-6, lambda plan: _point_loop(chart, plan, fiber_log_at)))
    return Case("R^2 x " + zt.chart.label + " [" + tw.label + ", mode " + mode + "]",
                chart, ak.g, checks)


# ---------------------------------------------------------------------------
# calabi_chain
# ---------------------------------------------------------------------------

def _make_chain(params):
    kind = params["kind"]
    m = int(params["m"])
    levels = iterate_chain(kind, m, A=float(params["A"]),
                           radius=float(params["radius"]),
                           z_range=tuple(params["z_range"]),
                           s_range=tuple(params["s_range"]))
    top = levels[-1]
    floor = float(params["volume_floor"])

    def over_levels(fn):
        def run(plan):
            used = excluded = 0
            mx = 0.0
            total = 0.0
            for lv in levels:
                res = _point_loop(lv.triple.chart, plan, lambda p: fn(lv, p))
                used += res.points_used
                excluded += res.points_excluded
                mx = max(mx, res.max_residual)
                total += res.mean_residual * res.points_used
                if res.error:
                    return CheckResult(used, excluded, mx,
                                       total / used if used else 0.0,
                                       "level %d: %s" % (lv.index, res.error))
            return CheckResult(used, excluded, mx,
                               total / used if used else 0.0, "")
        return run

    def kahler_at(lv, p):
        return _kahler_residual_at(lv.triple, p)

    def coeff_at(lv, p):
        return lv.identity_residuals(p)["corrected"]

    def alpha_at(lv, p):
        x = Jet2.seed(np.asarray(p, float))
        a = lv.alpha.fn(x)
        ag = np.array([c.grad for c in a])
        omv, _, _ = fundamental_form_jets(lv.triple, p)
        return np.abs((ag.T - ag) - omv).max()

    def vol_at(p):
        res = volume_checks(top.cal, p)
        return max(res["residual_z"], res["residual_r"])

    def volfloor_at(p):
        pf = abs(volume_checks(top.cal, p)["pfaffian"])
        return max(0.0, floor - pf)

    def verdict_run(plan):
        rep = classify(top.triple, top.cal.splitting(), plan)
        r = 0.0 if rep.verdict == VERDICT_HOLOMORPHIC else 1.0
        return CheckResult(rep.points_used, rep.points_excluded, r, r, "")

    checks = [
        Check("kahler_levels", "every level passes the pointwise Kähler residuals",
              1e-7, over_levels(kahler_at)),
        Check("ricci_coefficient",
              "Ricci form matches the disk log coefficient plus fiber log terms",
              1e-6, over_levels(coeff_at)),
        Check("alpha_primitive", "each level's alpha is a primitive of its omega",
              1e-7, over_levels(alpha_at)),
    ]
    if top.cal is not None:
        checks.extend([
            Check("volume_identity",
                  "top-level omega^m against both coordinate volume forms",
                  1e-9, lambda plan: _point_loop(top.triple.chart, plan, vol_at)),
            Check("volume_nonvanishing", "top-level Pfaffian stays above the floor",
                  1e-15, lambda plan: _point_loop(top.triple.chart, plan, volfloor_at)),
            Check("classify_top", "classifier verdict on the top level",
                  0.5, verdict_run),
        ])
    if kind == "untwisted" and top.cal is not None:
        tw = coordinate_twist(top.triple.chart.dim - 2, top.triple.chart.dim - 1)

        def ker_at(p):
            return ker_dw_geodesic_residual(top.triple.g.fn, tw.fn, p)

        checks.append(Check(
            "ker_dw_geodesic",
            "kernel of the lifted disk map is totally geodesic",
            1e-6, lambda plan: _point_loop(top.triple.chart, plan, ker_at)))
    label = "%s chain, m=%d, top %s" % (kind, m, top.triple.chart.label)
    return Case(label, top.triple.chart, top.triple.g, checks)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

BUILDERS = [
    BuilderEntry("flat", "Euclidean metric on R^n",
                 {"dim": 3},
                 ("curvature_zero", "ricci_zero"), _make_flat),
    BuilderEntry("sphere", "round unit 2-sphere in polar coordinates",
                 {},
                 ("scalar_curvature_two", "riemann_symmetries", "bianchi_first"),
                 _make_sphere),
    BuilderEntry("calabi", "fibered chart over a disk base, log profile",
                 {"base": "flat", "k": 1, "radius": 0.5, "A": -1.0,
                  "z_range": [0.6, 1.8], "s_range": [-0.8, 0.8],
                  "alpha": "closed_form", "volume_floor": 1e-6,
                  "verdict": VERDICT_HOLOMORPHIC},
                 ("kahler_verdict", "homothetic_foliation", "lee_is_dlnz",
                  "lee_closed", "plus_geodesic", "moment_map", "volume_identity",
                  "volume_nonvanishing", "classify_verdict"), _make_calabi),
    BuilderEntry("calabi_twist", "twist deformation of a fibered chart",
                 {"base": "flat", "k": 1, "radius": 0.5, "A": -1.0,
                  "z_range": [0.6, 1.8], "s_range": [-0.8, 0.8],
                  "alpha": "closed_form", "twist": {"id": "coord_z"}, "mode": "B",
                  "verdict": VERDICT_HOLOMORPHIC},
                 ("form_invariance", "norm_factor", "transverse_holomorphy",
                  "nijenhuis_twisted", "homothetic_foliation", "ricci_fiber_log",
                  "zeta_duality", "classify_verdict"), _make_calabi_twist),
    BuilderEntry("calabi_chain", "iterated fibered charts over the disk",
                 {"kind": "untwisted", "m": 2, "A": -1.0, "radius": 0.55,
                  "z_range": [0.6, 1.8], "s_range": [-0.8, 0.8],
                  "volume_floor": 1e-6},
                 ("kahler_levels", "ricci_coefficient", "alpha_primitive",
                  "volume_identity", "volume_nonvanishing", "classify_top",
                  "ker_dw_geodesic"), _make_chain),
    BuilderEntry("ak_product", "plane times Kähler factor with twisted structures",
                 {"z": "plane", "k": 1, "radius": 0.55, "chain_m": 2,
                  "chain_level": 1, "A": -1.0, "z_range": [0.6, 1.8],
                  "s_range": [-0.8, 0.8], "twist": {"id": "const", "c": [0.0, 0.0]},
                  "mode": "B", "plane_range": [-1.0, 1.0]},
                 ("structure_forms", "killing_plane", "ak3_identity", "ak3_blocks",
                  "torsion_derivative", "torsion_algebra", "torsion_kernel",
                  "torsion_rank", "einstein_fit", "ricci_flat",
                  "ricci_form_fiber_log"), _make_ak),
]

BUILDER_MAP = {b.id: b for b in BUILDERS}


def bundled_dir():
    return os.path.join(os.path.dirname(__file__), "scenarios")


def bundled_names():
    d = bundled_dir()
    if not os.path.isdir(d):
        return []
    return sorted(os.path.splitext(f)[0] for f in os.listdir(d)
                  if f.endswith(".json"))


def parse_scenario(obj, source="<memory>"):
    if not isinstance(obj, dict):
        raise ScenarioError("%s: scenario must be a JSON object" % source)
    extra = set(obj) - {"name", "builder", "params", "plan", "tolerances", "title"}
    if extra:
        raise ScenarioError("%s: unknown scenario fields: %s"
                            % (source, ", ".join(sorted(extra))))
    for key in ("name", "builder"):
        if not isinstance(obj.get(key), str):
            raise ScenarioError("%s: missing or non-string %r" % (source, key))
    if obj["builder"] not in BUILDER_MAP:
        raise ScenarioError("%s: unknown builder %r (known: %s)"
                            % (source, obj["builder"],
                               ", ".join(b.id for b in BUILDERS)))
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("%s: params must be an object" % source)
    plan = obj.get("plan", {})
    if not isinstance(plan, dict) or set(plan) - {"seed", "count", "margin"}:
        raise ScenarioError("%s: plan takes only seed, count, margin" % source)
    tol = obj.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ScenarioError("%s: tolerances must be an object" % source)
    for key, val in tol.items():
        if not isinstance(val, (int, float)):
            raise ScenarioError("%s: tolerance %r must be a number" % (source, key))
    try:
        seed = int(plan.get("seed", 0))
        count = int(plan.get("count", 30))
        margin = float(plan.get("margin", 0.15))
        SamplePlan(seed, count, margin)
    except ValueError as exc:
        raise ScenarioError("%s: bad plan: %s" % (source, exc))
    return Scenario(name=obj["name"], builder=obj["builder"], params=params,
                    seed=seed, count=count, margin=margin,
                    tolerances=dict(tol), source=source)


def load_scenario(arg):
    """Accepts a path to a scenario file or the bare name of a bundled one."""
    path = arg
    if not os.path.exists(path):
        cand = os.path.join(bundled_dir(), arg + ".json")
        if os.path.exists(cand):
            path = cand
        else:
            raise ScenarioError("no scenario file %r and no bundled scenario "
                                "named %r (bundled: %s)"
                                % (arg, arg, ", ".join(bundled_names())))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError("%s: line %d column %d: %s"
                            % (path, exc.lineno, exc.colno, exc.msg))
    except OSError as exc:
        raise ScenarioError("%s: %s" % (path, exc))
    return parse_scenario(obj, source=path)


def build_case(scn):
    entry = BUILDER_MAP[scn.builder]
    return entry.make(_merge_params(entry.defaults, scn.params, entry.id))


def run_scenario_obj(scn, tol_override=None, case=None):
    """Execute every check of the scenario's builder; returns the report dict."""
    if case is None:
        case = build_case(scn)
    known = {c.name for c in case.checks}
    for name in scn.tolerances:
        if name not in known:
            raise ScenarioError("%s: tolerance for unknown check %r (this case "
                                "runs: %s)" % (scn.source, name,
                                               ", ".join(sorted(known))))
    plan = SamplePlan(scn.seed, scn.count, scn.margin)
    records = []
    timings = {}
    for ck in case.checks:
        t0 = time.perf_counter()
        res = ck.run(plan)
        timings[ck.name] = time.perf_counter() - t0
        tol = float(tol_override if tol_override is not None
                    else scn.tolerances.get(ck.name, ck.tol))
        passed = (res.error == "") and (res.max_residual <= tol)
        rec = {"name": ck.name, "doc": ck.doc,
               "points_used": res.points_used,
               "points_excluded": res.points_excluded,
               "max_residual": res.max_residual,
               "mean_residual": res.mean_residual,
               "tolerance": tol, "pass": passed}
        if res.error:
            rec["error"] = res.error
        records.append(rec)
    return {"scenario": scn.name, "builder": scn.builder, "case": case.label,
            "seed": scn.seed, "samples": scn.count, "params": scn.params,
            "checks": records, "all_pass": all(r["pass"] for r in records),
            "timings_seconds": timings}


def run_scenario(arg, seed=None, samples=None, tol=None):
    scn = load_scenario(arg)
    if seed is not None:
        scn.seed = int(seed)
    if samples is not None:
        scn.count = int(samples)
    return run_scenario_obj(scn, tol_override=tol)


def render_json(obj, indent=0):
    """Deterministic JSON with floats at 17 significant digits."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [inner + json.dumps(str(k)) + ": " + render_json(v, indent + 2)
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [inner + render_json(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if f != f or f in (float("inf"), float("-inf")):
            return json.dumps(str(f))
        return format(f, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError("cannot render %r" % type(obj))
