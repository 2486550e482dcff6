"""Barta-type lower bounds ``c(X) = div X - |X|^2`` and isoperimetric checks."""

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from ._numerics import DEFAULT_SEED, central_partials
from .errors import BandResolutionError, DomainViolationError, ParameterError, SweepError
from .immersion import (
    laplacian_h_composed,
    tangent_components,
    xtop_norm,
    xtop_norm_pairing,
)
from .mesh import DomainMesh, band_mesh, induced_quadrature

__all__ = [
    "HOLDS",
    "VIOLATED",
    "INCONCLUSIVE",
    "verdict",
    "CandidateField",
    "DefiningFunction",
    "ExhaustionDomain",
    "InequalityCheck",
    "ToneReport",
    "CheegerSweep",
    "zero_field",
    "custom_field",
    "coordinate_divergence",
    "c_values",
    "c_of_field",
    "prop3_field",
    "thm3_field",
    "norm_xtop_defining",
    "h_composed_defining",
    "exhaustion_domain",
    "regular_eps",
    "cheeger_sweep",
    "cheeger_profile",
    "inequality_report",
]

HOLDS, VIOLATED, INCONCLUSIVE = "holds", "violated", "inconclusive"


def verdict(margin, uncertainty=0.0):
    """Three-valued verdict for ``margin = rhs - lhs >= 0``."""
    if margin > uncertainty:
        return HOLDS
    if margin < -uncertainty:
        return VIOLATED
    return INCONCLUSIVE


@dataclass(frozen=True)
class CandidateField:
    """A tangent vector field on the patch, given by parameter components.

    ``divergence_fn`` is optional; without it the divergence uses the
    coordinate formula ``(1/sqrt g) d_a (sqrt g X^a)`` by central differences.
    ``check_fn`` raises :class:`DomainViolationError` where the field is undefined.
    """

    kind: str
    vector_fn: Callable
    divergence_fn: Optional[Callable] = None
    check_fn: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def vector(self, q):
        return np.asarray(self.vector_fn(np.asarray(q, dtype=float)), dtype=float)

    def check(self, q):
        if self.check_fn is not None:
            self.check_fn(np.asarray(q, dtype=float))


def zero_field(m):
    return CandidateField("zero", lambda q: np.zeros(q.shape), lambda q: np.zeros(q.shape[:-1]))


def custom_field(vector_fn, divergence_fn=None, name="custom"):
    return CandidateField(name, vector_fn, divergence_fn)


def coordinate_divergence(imm, vector_fn, q, steps=None):
    """``(1/sqrt det g) sum_a d_a(sqrt det g X^a)`` by central differences in parameters."""
    q = np.asarray(q, dtype=float)
    steps = imm.steps if steps is None else np.asarray(steps, dtype=float)
    total = 0.0
    for a in range(imm.m):
        e = np.zeros(imm.m)
        e[a] = steps[a]
        fp = np.sqrt(np.linalg.det(imm.induced_metric(q + e))) * vector_fn(q + e)[..., a]
        fm = np.sqrt(np.linalg.det(imm.induced_metric(q - e))) * vector_fn(q - e)[..., a]
        total = total + (fp - fm) / (2 * steps[a])
    return total / np.sqrt(np.linalg.det(imm.induced_metric(q)))


def c_values(imm, X, q):
    """Pointwise ``div_g X - |X|_g^2``."""
    q = np.asarray(q, dtype=float)
    X.check(q)
    vec = X.vector(q)
    if X.divergence_fn is not None:
        div = np.asarray(X.divergence_fn(q), dtype=float)
    else:
        div = coordinate_divergence(imm, X.vector, q)
    g = imm.induced_metric(q)
    vals = div - np.einsum("...a,...ab,...b->...", vec, g, vec)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainViolationError(f"{X.kind} field is undefined at {q[bad][0]}", point=q[bad][0])
    return vals


def _quadrature_points(imm, domain):
    mesh = domain.mesh if isinstance(domain, ExhaustionDomain) else domain
    if isinstance(mesh, DomainMesh):
        return induced_quadrature(imm, mesh).points.reshape(-1, imm.m)
    return np.asarray(domain, dtype=float).reshape(-1, imm.m)


def c_of_field(imm, X, domain):
    """Infimum of ``c(X)`` over the quadrature points of ``domain``."""
    return float(np.min(c_values(imm, X, _quadrature_points(imm, domain))))


# -- the explicit candidate fields ------------------------------------------------------

def prop3_field(imm, fld, R, alpha, alpha_prime, delta=1e-3, n_check=2048, seed=DEFAULT_SEED):
    """``X = C / (R^2 - t^2) X_top`` with ``t = |X_top|`` and ``C = 2 (alpha - alpha')``.

    ``R`` is enlarged to ``R (1 + delta)`` so the profile stays finite when
    the supremum is only estimated.  The divergence is
    ``f(t) div(X_top) + f'(t) g(grad t, X_top)`` with both factors evaluated
    by the coordinate formula.
    """
    if not alpha_prime < alpha:
        raise ParameterError(f"alpha_prime = {alpha_prime} must be smaller than alpha = {alpha}")
    r_used = R * (1.0 + delta)
    tmax = float(np.max(xtop_norm(imm, fld, imm.sample(n_check, seed))))
    if r_used < tmax:
        raise ParameterError(f"R = {r_used:.6g} is below the sampled sup |X_top| = {tmax:.6g}")
    C = 2.0 * (alpha - alpha_prime)

    def profile(t):
        return C / (r_used**2 - t**2)

    def top(q):
        return tangent_components(imm, fld, q)

    def check(q):
        t = xtop_norm(imm, fld, q)
        bad = t >= r_used
        if np.any(bad):
            raise DomainViolationError(f"|X_top| reaches R at {q[bad][0]}", point=q[bad][0])

    def vector(q):
        return profile(xtop_norm(imm, fld, q))[..., None] * top(q)

    def divergence(q):
        t = xtop_norm(imm, fld, q)
        f = profile(t)
        fprime = 2.0 * C * t / (r_used**2 - t**2) ** 2
        return f * coordinate_divergence(imm, top, q) + fprime * xtop_norm_pairing(imm, fld, q)

    def lower_bound(q):
        t = xtop_norm(imm, fld, q)
        return C * imm.m * alpha / (r_used**2 - t**2)

    return CandidateField("prop3", vector, divergence, check,
                          {"R": R, "R_used": r_used, "delta": delta, "alpha": alpha, "alpha_prime": alpha_prime,
                           "C": C, "lower_bound": lower_bound})


def thm3_field(imm, spec, R, n_check=2048, seed=DEFAULT_SEED):
    """``X = grad(h o F) / (R - h o F)``; ``c(X) = Delta(h o F) / (R - h o F)``."""
    umax = float(np.max(spec.value(imm.point(imm.sample(n_check, seed)))))
    if not R > umax:
        raise ParameterError(f"R = {R:.6g} must exceed the sampled sup of h o F = {umax:.6g}")

    def u(q):
        return spec.value(imm.point(q))

    def grad_u(q):
        du = np.einsum("...k,...ka->...a", spec.differential(imm.point(q)), imm.tangents(q))
        return np.linalg.solve(imm.induced_metric(q), du[..., None])[..., 0]

    def check(q):
        bad = u(q) >= R
        if np.any(bad):
            raise DomainViolationError(f"h o F reaches R at {q[bad][0]}", point=q[bad][0])

    def vector(q):
        return grad_u(q) / (R - u(q))[..., None]

    def divergence(q):
        gap = R - u(q)
        gu = grad_u(q)
        norm2 = np.einsum("...a,...ab,...b->...", gu, imm.induced_metric(q), gu)
        return laplacian_h_composed(imm, spec, q) / gap + norm2 / gap**2

    return CandidateField("thm3", vector, divergence, check, {"R": R})


# -- exhaustion domains ------------------------------------------------------------------

@dataclass(frozen=True)
class DefiningFunction:
    """Scalar function whose band near ``R`` defines the domains ``D_eps``.

    ``kind`` is ``"norm_X_top"`` (values ``|X_top|^2``, band
    ``R^2 - eps^2 < . < R^2``) or ``"h_composed"`` (values ``h o F``, band
    ``R - eps < . < R``).
    """

    kind: str
    values: Callable
    R: float

    def band(self, eps):
        if self.kind == "norm_X_top":
            return self.R**2 - eps**2, self.R**2
        return self.R - eps, self.R

    def describe(self, eps):
        if self.kind == "norm_X_top":
            return f"{{{self.R**2 - eps**2:.6g} < |X_top|^2 < {self.R**2:.6g}}}"
        return f"{{{self.R - eps:.6g} < h o F < {self.R:.6g}}}"


def norm_xtop_defining(imm, fld, R):
    return DefiningFunction("norm_X_top", lambda q: xtop_norm(imm, fld, q) ** 2, R)


def h_composed_defining(imm, spec, R):
    return DefiningFunction("h_composed", lambda q: spec.value(imm.point(q)), R)


@dataclass(frozen=True)
class ExhaustionDomain:
    epsilon: float
    defining: DefiningFunction
    mesh: DomainMesh

    @property
    def description(self):
        return self.defining.describe(self.epsilon)


def exhaustion_domain(imm, defining, eps, n_along=64, n_across=8, axis=1, center=None, n_scan=2048):
    """Mesh ``D_eps`` and check that every cell centroid lies inside the band."""
    lo, hi = defining.band(eps)
    mesh = band_mesh(imm, defining.values, lo, hi, n_along, n_across, axis=axis, center=center, n_scan=n_scan)
    vals = defining.values(mesh.centroids())
    slack = 1e-9 * max(1.0, abs(hi))
    if np.any(vals <= lo - slack) or np.any(vals >= hi + slack):
        raise BandResolutionError("cell centroids leave the band; refine n_along")
    return ExhaustionDomain(float(eps), defining, mesh)


def _level_points(imm, defining, level, n_probe, axis, center, seed):
    """Points of ``{s = level}``: line crossings plus local minimizers of ``(s - level)^2``.

    The minimizers catch levels that are touched rather than crossed, such as
    the minimum value of ``s``, which a crossing scan never sees.
    """
    scale = 1e-6 * max(1.0, abs(level))
    found = []
    try:
        mesh = band_mesh(imm, defining.values, level, math.inf, n_probe, 1, axis=axis, center=center)
        pts = mesh.vertices[mesh.boundary]
        found.append(pts[np.abs(defining.values(pts) - level) < scale])
    except (BandResolutionError, ValueError):
        pass
    samples = imm.sample(max(16 * n_probe, 256), seed)
    gap = np.abs(defining.values(samples) - level)
    bounds = list(zip(imm.lo, imm.hi))
    for idx in np.argsort(gap)[:8]:
        res = minimize(lambda x: float((defining.values(x) - level) ** 2), samples[idx], method="L-BFGS-B",
                       bounds=bounds, options={"ftol": 1e-20, "gtol": 1e-14, "maxiter": 200})
        if math.sqrt(max(res.fun, 0.0)) < scale and bool(imm.contains(res.x)):
            found.append(np.asarray(res.x)[None, :])
    return np.concatenate(found) if found else np.zeros((0, imm.m))


def regular_eps(imm, defining, eps_sequence, threshold=1e-6, n_probe=64, axis=1, center=None,
                seed=DEFAULT_SEED):
    """Keep the ``eps`` whose lower band level is a regular value of the defining function.

    Regularity is judged by the minimum of ``|grad s|_g`` over points of the
    level set; a level that does not meet the patch is kept.
    """
    def grad_norm(x):
        ds = central_partials(defining.values, x, imm.steps)
        return np.sqrt(np.einsum("...a,...ab,...b->...", ds, np.linalg.inv(imm.induced_metric(x)), ds))

    kept = []
    for eps in eps_sequence:
        lo, _ = defining.band(eps)
        tol = threshold * max(1.0, abs(lo))
        pts = _level_points(imm, defining, lo, n_probe, axis, center, seed)
        if len(pts) == 0:
            kept.append(eps)
            continue
        # one-sided stencils would be needed at the patch edge; stay inside
        pts = np.clip(pts, imm.lo + imm.steps, imm.hi - imm.steps)
        gn = grad_norm(pts)
        regular = bool(np.min(gn) > tol)
        # a level touched at a critical point only shows a small gradient nearby;
        # descend |grad s|^2 locally and see whether it reaches zero on the level
        radius = 0.01 * (imm.hi - imm.lo)
        for x in pts[np.argsort(gn)[:8]] if regular else ():
            box = list(zip(np.maximum(x - radius, imm.lo + imm.steps), np.minimum(x + radius, imm.hi - imm.steps)))
            res = minimize(lambda y: float(grad_norm(y) ** 2), x, method="L-BFGS-B", bounds=box,
                           options={"ftol": 1e-24, "gtol": 1e-14, "maxiter": 100})
            if math.sqrt(max(res.fun, 0.0)) <= tol and abs(float(defining.values(res.x)) - lo) < 1e-6 * max(1, abs(lo)):
                regular = False
                break
        if regular:
            kept.append(eps)
    return kept


# -- Cheeger sweeps --------------------------------------------------------------------

@dataclass
class CheegerSweep:
    upper_bound: float
    threshold: float
    thresholds: np.ndarray
    ratios: np.ndarray

    def as_dict(self):
        return {"upper_bound": self.upper_bound, "threshold": self.threshold}


def _sublevel_pieces(imm, mesh, geom, s, t):
    """Volume and boundary measure of ``{s < t}`` for piecewise-linear ``s``.

    Cut triangles are split along the level segment; the corner triangle is
    integrated with the metric at its centroid and the level segment with
    the metric at its midpoint.
    """
    c = mesh.cell_coords()
    sv = s[mesh.cells]
    below = sv < t
    nb = below.sum(axis=1)
    cell_measure = geom.measure.sum(axis=1)
    vol = np.where(nb == mesh.m + 1, cell_measure, 0.0)
    if mesh.m == 1:
        cut = np.flatnonzero(nb == 1)
        lo_end = np.where(below[cut, 0], 0, 1)
        x_lo = c[cut, lo_end, 0]
        x_hi = c[cut, 1 - lo_end, 0]
        s_lo, s_hi = sv[cut, lo_end], sv[cut, 1 - lo_end]
        xt = x_lo + (t - s_lo) / (s_hi - s_lo) * (x_hi - x_lo)
        mid = 0.5 * (x_lo + xt)[:, None]
        length = np.abs(xt - x_lo) * np.sqrt(np.linalg.det(imm.induced_metric(mid)))
        return float(vol.sum() + length.sum()), float(len(cut))
    area = 0.0
    for k in (1, 2):
        sel = np.flatnonzero(nb == k)
        if not sel.size:
            continue
        b_k = below[sel]
        # the odd vertex (lone below for k=1, lone above for k=2) goes first
        odd = np.argmax(b_k, axis=1) if k == 1 else np.argmin(b_k, axis=1)
        order = np.stack([odd, (odd + 1) % 3, (odd + 2) % 3], axis=1)
        rows = np.arange(len(sel))[:, None]
        sk, ck = sv[sel][rows, order], c[sel][rows, order]
        f1 = (t - sk[:, 0]) / (sk[:, 1] - sk[:, 0])
        f2 = (t - sk[:, 0]) / (sk[:, 2] - sk[:, 0])
        x0 = ck[:, 0]
        p1 = x0 + f1[:, None] * (ck[:, 1] - x0)
        p2 = x0 + f2[:, None] * (ck[:, 2] - x0)
        e1, e2 = p1 - x0, p2 - x0
        corner_area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        corner = corner_area * np.sqrt(np.linalg.det(imm.induced_metric((x0 + p1 + p2) / 3.0)))
        corner = np.minimum(corner, cell_measure[sel])
        vol[sel] = corner if k == 1 else cell_measure[sel] - corner
        d = p2 - p1
        gm = imm.induced_metric(0.5 * (p1 + p2))
        area += float(np.sum(np.sqrt(np.einsum("ca,cab,cb->c", d, gm, d))))
    return float(vol.sum()), area


def cheeger_profile(imm, mesh, sweep, n_thresholds=256):
    """Ratios ``A(boundary D_t) / V(D_t)`` for sub-level sets ``D_t = {s < t}``.

    Only the level set ``{s = t}`` counts as boundary.
    """
    geom = induced_quadrature(imm, mesh)
    s = np.asarray(sweep(mesh.vertices) if callable(sweep) else sweep, dtype=float)
    smin, smax = float(s.min()), float(s.max())
    ts = np.linspace(smin, smax, n_thresholds + 1)[1:]
    ts[-1] = smax - 1e-9 * (smax - smin)
    out_t, out_r = [], []
    for t in ts:
        vol, area = _sublevel_pieces(imm, mesh, geom, s, t)
        if vol <= 0 or area <= 0:
            continue
        out_t.append(t)
        out_r.append(area / vol)
    if not out_t:
        raise SweepError("every sub-level set of the sweep was empty")
    return np.array(out_t), np.array(out_r)


def cheeger_sweep(imm, mesh, sweep, n_thresholds=256):
    """Minimum sweep ratio: an upper bound for the Cheeger constant of the region."""
    ts, rs = cheeger_profile(imm, mesh, sweep, n_thresholds)
    i = int(np.argmin(rs))
    return CheegerSweep(float(rs[i]), float(ts[i]), ts, rs)


# -- inequality reports --------------------------------------------------------------------

@dataclass
class InequalityCheck:
    name: str
    lhs: Optional[float]
    rhs: Optional[float]
    margin: Optional[float]
    uncertainty: float
    verdict: str

    def as_dict(self):
        return asdict(self)


@dataclass
class ToneReport:
    lambda_fem: Optional[float] = None
    c_inf: Optional[float] = None
    bound_paper: Optional[float] = None
    cheeger_sweep_upper: Optional[float] = None
    cheeger_paper_lower: Optional[float] = None
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    incomplete: list = field(default_factory=list)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        d = {k: v for k, v in asdict(self).items() if k != "checks"}
        d["checks"] = [c.as_dict() for c in self.checks]
        return d


def _ineq(name, lhs, rhs, unc):
    if lhs is None or rhs is None:
        return InequalityCheck(name, lhs, rhs, None, unc, "incomplete")
    margin = rhs - lhs
    return InequalityCheck(name, float(lhs), float(rhs), float(margin), float(unc), verdict(margin, unc))


def inequality_report(m, alpha, sup_xf=None, sup_xtop=None, sup_h=None, cheeger_upper=None, lambda_fem=None,
                      minimal=False, sup_rho=None, uncertainty=None, c_inf=None, bound_paper=None,
                      eps_floor=1e-8):
    """Evaluate the isoperimetric and tone inequalities with estimated quantities.

    ``uncertainty`` maps quantity names (``sup_xf``, ``sup_xtop``,
    ``lambda_fem``, ``cheeger``, ``sup_rho``) to absolute estimator
    uncertainties; margins within the propagated band are inconclusive.
    Missing inputs yield ``incomplete`` entries instead of failures.
    """
    unc = dict(uncertainty or {})
    u_xf, u_xt = unc.get("sup_xf", 0.0), unc.get("sup_xtop", 0.0)
    u_lam, u_h = unc.get("lambda_fem", 0.0), unc.get("cheeger", 0.0)
    u_rho = unc.get("sup_rho", 0.0)
    rep = ToneReport(lambda_fem=lambda_fem, c_inf=c_inf, bound_paper=bound_paper,
                     cheeger_sweep_upper=cheeger_upper)
    sqrt_lam = None if lambda_fem is None else math.sqrt(max(lambda_fem, 0.0))
    du_sqrt = 0.0 if not lambda_fem else u_lam / (2 * math.sqrt(lambda_fem))

    def inv(x, ux):
        return (None, 0.0) if x is None or x <= 0 else (1.0 / x, ux / x**2)

    inv_xf, u_ixf = inv(sup_xf, u_xf)
    inv_xt, u_ixt = inv(sup_xtop, u_xt)
    checks = []
    hterm = 0.0 if sup_h is None else sup_h
    if cheeger_upper is not None:
        checks.append(_ineq("isoperimetric", inv_xf, (cheeger_upper / m + hterm) / alpha,
                            u_ixf + u_h / (m * alpha)))
    else:
        rep.incomplete.append("isoperimetric")
    if lambda_fem is not None:
        checks.append(_ineq("general_tone", inv_xf, (2.0 / m * sqrt_lam + hterm) / alpha,
                            u_ixf + 2 * du_sqrt / (m * alpha)))
    else:
        rep.incomplete.append("general_tone")
    if minimal:
        if cheeger_upper is not None:
            checks.append(_ineq("minimal_isoperimetric", inv_xt, cheeger_upper / (m * alpha),
                                u_ixt + u_h / (m * alpha)))
        if lambda_fem is not None:
            checks.append(_ineq("minimal_tone", inv_xt, 2.0 / (m * alpha) * sqrt_lam,
                                u_ixt + 2 * du_sqrt / (m * alpha)))
        if sup_xtop:
            rep.cheeger_paper_lower = m * alpha / sup_xtop
            if cheeger_upper is not None:
                checks.append(_ineq("cheeger_lower", rep.cheeger_paper_lower, cheeger_upper,
                                    u_h + m * alpha * u_xt / sup_xtop**2))
            if lambda_fem is not None:
                checks.append(_ineq("cheeger_tone_lower", rep.cheeger_paper_lower, 2 * sqrt_lam,
                                    2 * du_sqrt + m * alpha * u_xt / sup_xtop**2))
    if sup_rho is not None and cheeger_upper is not None:
        inv_rho, u_irho = inv(sup_rho, u_rho)
        checks.append(_ineq("prop4_product", inv_rho, cheeger_upper / (m * alpha), u_irho + u_h / (m * alpha)))
    if c_inf is not None and lambda_fem is not None:
        checks.append(_ineq("barta", c_inf, lambda_fem, u_lam))
    if sup_xtop is not None and sup_xtop < eps_floor:
        rep.flags.append("X_top vanishes on the sampled region")
    rep.checks = checks
    return rep
