"""Immersed submanifolds ``F: M -> ambient`` and their pointwise geometry.

Parameter points are arrays ``(..., m)``; ambient quantities are chart
components ``(..., N)``.  Frames store vectors as rows: ``frame.tangent[..., i, :]``
is the ambient vector ``e_i``.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize

from ._numerics import DEFAULT_SEED, box_samples, central_partials
from .ambient import AmbientSpace, EuclideanSpace, ProductSpace
from .errors import (
    BoundaryStencilError,
    EmptyScanError,
    ImmersionDegeneracyError,
    NumericError,
    ParameterError,
)
from .fields import lie_derivative_matrix

__all__ = [
    "Immersion",
    "SplitFrame",
    "PointGeometry",
    "Condition6Report",
    "SupEstimate",
    "affine_patch",
    "plane",
    "line",
    "identity_patch",
    "spiral",
    "catenoid",
    "sphere",
    "graph",
    "grid_patch",
    "restrict",
    "disk_region",
    "split_frame",
    "second_fundamental_form",
    "project_field",
    "tangent_components",
    "point_geometry",
    "divergence_tangential",
    "xtop_norm",
    "xtop_norm_pairing",
    "h_composed",
    "check_condition6",
    "laplacian_h_composed",
    "trace_conformality",
    "graph_frame_bound",
    "certify_minimal",
    "estimate_supremum",
]


@dataclass(frozen=True)
class Immersion:
    """A parametric patch ``F`` on the box ``[lo, hi]`` of ``R^m``.

    Derivatives are analytic when ``dF``/``d2F`` are supplied; otherwise
    central differences with step ``1e-4`` times the box size per axis.
    Axes flagged in ``periodic`` wrap with period ``hi - lo``.  An optional
    ``inside`` predicate cuts the patch down to a subregion of the box.
    """

    space: AmbientSpace
    m: int
    F: Callable
    lo: np.ndarray
    hi: np.ndarray
    dF: Optional[Callable] = None
    d2F: Optional[Callable] = None
    periodic: tuple = ()
    minimal_claimed: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)
    inside: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float).reshape(self.m))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float).reshape(self.m))
        per = tuple(bool(x) for x in self.periodic) or (False,) * self.m
        object.__setattr__(self, "periodic", per)

    @property
    def n(self):
        return self.space.dim - self.m

    @property
    def steps(self):
        return 1e-4 * (self.hi - self.lo)

    @property
    def periods(self):
        return np.where(self.periodic, self.hi - self.lo, 0.0)

    def point(self, q):
        return np.asarray(self.F(np.asarray(q, dtype=float)), dtype=float)

    def tangents(self, q):
        """``dF`` as ``(..., N, m)``."""
        q = np.asarray(q, dtype=float)
        if self.dF is not None:
            return np.asarray(self.dF(q), dtype=float)
        return self._checked_fd(self.point, q)

    def hessians(self, q):
        """``d^2 F`` as ``(..., N, m, m)``."""
        q = np.asarray(q, dtype=float)
        if self.d2F is not None:
            return np.asarray(self.d2F(q), dtype=float)
        out = self._checked_fd(self.tangents, q)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def _checked_fd(self, fun, q):
        jac = np.zeros(np.shape(fun(q)) + (self.m,))
        for a in range(self.m):
            e = np.zeros(self.m)
            e[a] = self.steps[a]
            fp, fm = fun(q + e), fun(q - e)
            if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
                raise BoundaryStencilError(f"finite-difference stencil of {self.name} left its domain near {q}")
            jac[..., a] = (fp - fm) / (2.0 * self.steps[a])
        return jac

    def induced_metric(self, q):
        d = self.tangents(q)
        g = self.space.metric(self.point(q))
        return np.einsum("...ia,...ij,...jb->...ab", d, g, d)

    def contains(self, q):
        q = np.asarray(q, dtype=float)
        ok = np.all((q >= self.lo) & (q <= self.hi), axis=-1)
        return ok if self.inside is None else ok & np.asarray(self.inside(q), dtype=bool)

    def sample(self, n, seed=DEFAULT_SEED):
        """``n`` low-discrepancy parameter points of the patch."""
        if self.inside is None:
            return box_samples(n, self.lo, self.hi, seed)
        count = 2 * n
        while True:
            pts = box_samples(count, self.lo, self.hi, seed)
            pts = pts[self.contains(pts)]
            if len(pts) >= n:
                return pts[:n]
            if count > 1000 * n:
                raise ParameterError(f"the region of {self.name} is too small to sample")
            count *= 4


def restrict(imm, inside, description=""):
    """The same patch cut down to ``{q : inside(q)}``."""
    params = dict(imm.params)
    if description:
        params["region"] = description
    return replace(imm, inside=inside, params=params)


def disk_region(radius, center=(0.0, 0.0)):
    center = np.asarray(center, dtype=float)
    return lambda q: np.sum((np.asarray(q) - center) ** 2, axis=-1) < radius**2


@dataclass(frozen=True)
class SplitFrame:
    point: np.ndarray
    tangent: np.ndarray  # (..., m, N)
    normal: np.ndarray  # (..., n, N)
    coeffs: np.ndarray  # (..., m, m): e_i = sum_a coeffs[i, a] dF_a


@dataclass(frozen=True)
class PointGeometry:
    point: np.ndarray
    frame: SplitFrame
    B: np.ndarray  # (..., m, m, n) in the frame
    H: np.ndarray  # (..., N)
    X: np.ndarray
    X_top: np.ndarray
    X_bot: np.ndarray
    div_X_top: np.ndarray


# -- built-in immersions --------------------------------------------------------

def affine_patch(space, origin, basis, lo, hi, name="affine", minimal_claimed=False, periodic=()):
    """``F(q) = origin + basis @ q`` with ``basis`` of shape ``(N, m)``."""
    origin = np.asarray(origin, dtype=float)
    basis = np.asarray(basis, dtype=float)
    N, m = basis.shape
    return Immersion(
        space, m,
        lambda q: origin + q @ basis.T,
        lo, hi,
        lambda q: np.broadcast_to(basis, q.shape[:-1] + (N, m)).copy(),
        lambda q: np.zeros(q.shape[:-1] + (N, m, m)),
        periodic, minimal_claimed, name,
        {"origin": origin.tolist(), "basis": basis.tolist()},
    )


def plane(space=None, lo=(-1.0, -1.0), hi=(1.0, 1.0), offset=0.0):
    """The coordinate plane ``{x_3 = offset}`` of a 3-dimensional chart."""
    space = space or EuclideanSpace(3)
    basis = np.zeros((space.dim, 2))
    basis[0, 0] = basis[1, 1] = 1.0
    origin = np.zeros(space.dim)
    origin[2] = offset
    minimal = offset == 0.0 or isinstance(space, EuclideanSpace)
    return affine_patch(space, origin, basis, lo, hi, "plane", minimal)


def line(direction, lo=-1.0, hi=1.0, space=None):
    direction = np.asarray(direction, dtype=float)
    space = space or EuclideanSpace(direction.size)
    return affine_patch(space, np.zeros(direction.size), direction[:, None], [lo], [hi], "line", True)


def identity_patch(space, lo, hi):
    """The chart itself as a codimension-zero immersion."""
    return affine_patch(space, np.zeros(space.dim), np.eye(space.dim), lo, hi, "identity", True)


def spiral(a, b, t_range):
    """``gamma(t) = a e^{tb} (cos e^{abt}, sin e^{abt})`` in the Euclidean plane."""
    if not (a > 1 and b > 0):
        raise ParameterError("spiral needs a > 1 and b > 0")

    def F(q):
        t = q[..., 0]
        rad, ang = a * np.exp(t * b), np.exp(a * b * t)
        return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)

    def dF(q):
        t = q[..., 0]
        rad, ang = a * np.exp(t * b), np.exp(a * b * t)
        w = a * b * ang  # d(angle)/dt
        c, s = np.cos(ang), np.sin(ang)
        return np.stack([b * rad * c - rad * w * s, b * rad * s + rad * w * c], axis=-1)[..., None]

    def d2F(q):
        t = q[..., 0]
        rad, ang = a * np.exp(t * b), np.exp(a * b * t)
        w = a * b * ang
        dw = a * b * w
        c, s = np.cos(ang), np.sin(ang)
        # rad' = b rad; (rad e^{i ang})'' = (rad'' - rad w^2 + i(2 rad' w + rad w')) e^{i ang}
        re = b * b * rad - rad * w * w
        im = 2 * b * rad * w + rad * dw
        return np.stack([re * c - im * s, re * s + im * c], axis=-1)[..., None, None]

    return Immersion(EuclideanSpace(2), 1, F, [t_range[0]], [t_range[1]], dF, d2F, (), False, "spiral",
                     {"a": a, "b": b, "t_range": list(t_range)})


def catenoid(c=1.0, v_range=(-1.0, 1.0), u_range=(0.0, 2 * math.pi)):
    """``(c cosh(v/c) cos u, c cosh(v/c) sin u, v)``; periodic in ``u``."""

    def F(q):
        u, v = q[..., 0], q[..., 1]
        rho = c * np.cosh(v / c)
        return np.stack([rho * np.cos(u), rho * np.sin(u), v], axis=-1)

    def dF(q):
        u, v = q[..., 0], q[..., 1]
        rho, drho = c * np.cosh(v / c), np.sinh(v / c)
        cu, su = np.cos(u), np.sin(u)
        du = np.stack([-rho * su, rho * cu, np.zeros_like(u)], axis=-1)
        dv = np.stack([drho * cu, drho * su, np.ones_like(u)], axis=-1)
        return np.stack([du, dv], axis=-1)

    def d2F(q):
        u, v = q[..., 0], q[..., 1]
        rho, drho, ddrho = c * np.cosh(v / c), np.sinh(v / c), np.cosh(v / c) / c
        cu, su = np.cos(u), np.sin(u)
        z = np.zeros_like(u)
        uu = np.stack([-rho * cu, -rho * su, z], axis=-1)
        uv = np.stack([-drho * su, drho * cu, z], axis=-1)
        vv = np.stack([ddrho * cu, ddrho * su, z], axis=-1)
        return np.stack([np.stack([uu, uv], -1), np.stack([uv, vv], -1)], -2)

    periodic = (abs(u_range[1] - u_range[0] - 2 * math.pi) < 1e-12, False)
    return Immersion(EuclideanSpace(3), 2, F, [u_range[0], v_range[0]], [u_range[1], v_range[1]], dF, d2F,
                     periodic, True, "catenoid", {"c": c, "u_range": list(u_range), "v_range": list(v_range)})


def sphere(radius=1.0, theta_range=(0.3, math.pi - 0.3)):
    """Round sphere ``radius * (sin th cos ph, sin th sin ph, cos th)``, periodic in ``ph``."""

    def F(q):
        th, ph = q[..., 0], q[..., 1]
        return radius * np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    def dF(q):
        th, ph = q[..., 0], q[..., 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        dth = radius * np.stack([ct * cp, ct * sp, -st], axis=-1)
        dph = radius * np.stack([-st * sp, st * cp, np.zeros_like(th)], axis=-1)
        return np.stack([dth, dph], axis=-1)

    def d2F(q):
        th, ph = q[..., 0], q[..., 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        tt = radius * np.stack([-st * cp, -st * sp, -ct], axis=-1)
        tp = radius * np.stack([-ct * sp, ct * cp, np.zeros_like(th)], axis=-1)
        pp = radius * np.stack([-st * cp, -st * sp, np.zeros_like(th)], axis=-1)
        return np.stack([np.stack([tt, tp], -1), np.stack([tp, pp], -1)], -2)

    return Immersion(EuclideanSpace(3), 2, F, [theta_range[0], 0.0], [theta_range[1], 2 * math.pi], dF, d2F,
                     (False, True), False, "sphere", {"radius": radius, "theta_range": list(theta_range)})


def graph(linear_map, lo, hi, space=None):
    """Graph ``x -> (x, A x)`` of a linear map ``A: R^m -> R^n`` in a product ``R^m x R^n``."""
    a = np.atleast_2d(np.asarray(linear_map, dtype=float))
    n, m = a.shape
    if space is None:
        space = ProductSpace(EuclideanSpace(m), EuclideanSpace(n))
    basis = np.vstack([np.eye(m), a])
    imm = affine_patch(space, np.zeros(m + n), basis, lo, hi, "graph", isinstance(space.first, EuclideanSpace)
                       and isinstance(space.second, EuclideanSpace))
    imm.params["linear_map"] = a.tolist()
    return imm


def grid_patch(space, axes, values, minimal_claimed=False, name="grid"):
    """Patch interpolating tabulated ``F`` values (cubic); derivatives by differences."""
    m = len(axes)
    values = np.asarray(values, dtype=float)
    N = values.shape[-1]
    interp = RegularGridInterpolator(axes, values, method="cubic" if all(len(a) >= 4 for a in axes) else "linear")
    lo = [a[0] for a in axes]
    hi = [a[-1] for a in axes]

    def F(q):
        flat = q.reshape(-1, m)
        inside = np.all((flat >= np.array(lo) - 1e-12) & (flat <= np.array(hi) + 1e-12), axis=-1)
        out = np.full((flat.shape[0], N), np.nan)
        if np.any(inside):
            out[inside] = interp(np.clip(flat[inside], lo, hi))
        return out.reshape(q.shape[:-1] + (N,))

    step_lo = np.array(lo) + 1e-3 * (np.array(hi) - np.array(lo))
    step_hi = np.array(hi) - 1e-3 * (np.array(hi) - np.array(lo))
    return Immersion(space, m, F, step_lo, step_hi, minimal_claimed=minimal_claimed, name=name)


# -- frames and second fundamental form ----------------------------------------------

def split_frame(imm, q):
    """Orthonormal tangent and normal bases at ``F(q)`` (Gram-Schmidt in the ambient metric)."""
    q = np.asarray(q, dtype=float)
    p = imm.point(q)
    d = imm.tangents(q)
    g = imm.space.metric(p)
    s = np.linalg.cholesky(g)  # g = s s^T
    t = np.einsum("...ji,...ja->...ia", s, d)  # whitened tangents s^T dF
    qmat, r = np.linalg.qr(t, mode="complete")
    m, N = imm.m, imm.space.dim
    diag = np.diagonal(r[..., :m, :], axis1=-2, axis2=-1)
    scale = np.max(np.abs(diag), axis=-1, keepdims=True)
    if np.any(np.abs(diag) <= 1e-10 * np.maximum(scale, 1e-300)):
        raise ImmersionDegeneracyError(f"dF of {imm.name} is rank deficient", point=q)
    sign = np.sign(diag)
    qmat = qmat.copy()
    qmat[..., :, :m] *= sign[..., None, :]
    rr = r[..., :m, :] * sign[..., :, None]
    if N > m:
        det = np.linalg.det(qmat)
        qmat[..., :, -1] *= np.sign(det)[..., None]
    sinv_t = np.linalg.inv(np.swapaxes(s, -1, -2))
    vecs = np.einsum("...ij,...jk->...ki", sinv_t, qmat)  # rows are ambient vectors
    coeffs = np.swapaxes(np.linalg.inv(rr), -1, -2)  # e_i = sum_a (R^{-1})_{a i} dF_a
    return SplitFrame(q, vecs[..., :m, :], vecs[..., m:, :], coeffs)


def second_fundamental_form(imm, q, frame=None):
    """``(B, H)``: ``B[..., i, j, alpha] = g(B(e_i, e_j), nu_alpha)`` and the mean curvature vector."""
    q = np.asarray(q, dtype=float)
    frame = frame or split_frame(imm, q)
    p = imm.point(q)
    d = imm.tangents(q)
    dd = imm.hessians(q)
    gam = imm.space.christoffel(p)
    g = imm.space.metric(p)
    acc = dd + np.einsum("...kij,...ia,...jb->...kab", gam, d, d)
    bn = np.einsum("...kab,...kl,...cl->...abc", acc, g, frame.normal)
    b = np.einsum("...ia,...jb,...abc->...ijc", frame.coeffs, frame.coeffs, bn)
    b = 0.5 * (b + np.swapaxes(b, -2, -3))
    trace = np.einsum("...iic->...c", b)
    H = np.einsum("...c,...ck->...k", trace, frame.normal) / imm.m
    return b, H


def project_field(imm, fld, q, frame=None):
    """``(X_top, X_bot)`` of the ambient field along ``F`` at ``q``."""
    q = np.asarray(q, dtype=float)
    frame = frame or split_frame(imm, q)
    p = imm.point(q)
    x = fld.value(p)
    comps = np.einsum("...k,...kl,...il->...i", x, imm.space.metric(p), frame.tangent)
    top = np.einsum("...i,...ik->...k", comps, frame.tangent)
    return top, x - top


def tangent_components(imm, fld, q, frame=None):
    """Parameter components ``X^a`` of ``X_top = X^a dF_a``."""
    q = np.asarray(q, dtype=float)
    frame = frame or split_frame(imm, q)
    p = imm.point(q)
    x = fld.value(p)
    comps = np.einsum("...k,...kl,...il->...i", x, imm.space.metric(p), frame.tangent)
    return np.einsum("...i,...ia->...a", comps, frame.coeffs)


def point_geometry(imm, fld, q):
    q = np.asarray(q, dtype=float)
    frame = split_frame(imm, q)
    b, H = second_fundamental_form(imm, q, frame)
    top, bot = project_field(imm, fld, q, frame)
    div = _divergence_from_parts(imm, fld, q, frame, b, bot)
    return PointGeometry(q, frame, b, H, top + bot, top, bot, div)


def _divergence_from_parts(imm, fld, q, frame, b, bot):
    p = imm.point(q)
    lie = lie_derivative_matrix(imm.space, fld, p)
    half_trace = 0.5 * np.einsum("...ik,...kl,...il->...", frame.tangent, lie, frame.tangent)
    nu_dot_bot = np.einsum("...ck,...kl,...l->...c", frame.normal, imm.space.metric(p), bot)
    return half_trace + np.einsum("...iic,...c->...", b, nu_dot_bot)


def divergence_tangential(imm, fld, q):
    """``div_g(X_top) = sum_i [L_X g(e_i, e_i) / 2 + g(B(e_i, e_i), X_bot)]``."""
    return point_geometry(imm, fld, q).div_X_top


def xtop_norm(imm, fld, q):
    top, _ = project_field(imm, fld, q)
    return imm.space.norm(imm.point(q), top)


def xtop_norm_pairing(imm, fld, q):
    """``g(grad |X_top|, X_top)`` by central differences of ``|X_top|`` along the patch."""
    q = np.asarray(q, dtype=float)
    dt = central_partials(lambda x: xtop_norm(imm, fld, x), q, imm.steps)
    return np.einsum("...a,...a->...", dt, tangent_components(imm, fld, q))


def h_composed(imm, spec, q):
    return spec.value(imm.point(q))


@dataclass
class Condition6Report:
    """Outcome of scanning ``|g(B(X_top, X_top), X_bot)| <= alpha' |X_top|^2``."""

    alpha_prime_est: float
    alpha_prime_max: float
    holds: bool
    t: np.ndarray
    ratio: np.ndarray
    n_used: int
    n_excluded: int
    eps_floor: float
    threshold: float

    @property
    def verdict(self):
        return "holds" if self.holds else "violated"

    def as_dict(self):
        return {
            "alpha_prime_est": float(self.alpha_prime_est),
            "alpha_prime_max": float(self.alpha_prime_max),
            "verdict": self.verdict,
            "n_used": int(self.n_used),
            "n_excluded": int(self.n_excluded),
            "eps_floor": float(self.eps_floor),
            "threshold": float(self.threshold),
        }


def condition6_ratio(imm, fld, q):
    """``(t, |g(B(X_top, X_top), X_bot)| / t^2)`` with ``t = |X_top|``."""
    q = np.asarray(q, dtype=float)
    frame = split_frame(imm, q)
    b, _ = second_fundamental_form(imm, q, frame)
    top, bot = project_field(imm, fld, q, frame)
    p = imm.point(q)
    g = imm.space.metric(p)
    comps = np.einsum("...k,...kl,...il->...i", top, g, frame.tangent)
    nu_dot_bot = np.einsum("...ck,...kl,...l->...c", frame.normal, g, bot)
    pairing = np.einsum("...i,...j,...ijc,...c->...", comps, comps, b, nu_dot_bot)
    t2 = np.einsum("...i,...i->...", comps, comps)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(pairing) / t2
    return np.sqrt(t2), ratio


def check_condition6(imm, fld, region=None, alpha_prime_max=1.0, n_samples=4096, width=None, eps_floor=None,
                     seed=DEFAULT_SEED):
    """Scan the tangential-normal pairing ratio near the supremum of ``|X_top|``.

    ``region`` is an ``(n, m)`` array of parameter points; by default the
    patch is sampled and points with ``t^2 > R^2 - width^2`` are kept, where
    ``R`` is the sampled maximum of ``t`` (``width=None`` keeps all points).
    Points with ``t`` below ``eps_floor`` are excluded rather than counted.
    """
    pts = imm.sample(n_samples, seed) if region is None else np.asarray(region, dtype=float).reshape(-1, imm.m)
    t, ratio = condition6_ratio(imm, fld, pts)
    rmax = float(np.max(t))
    threshold = 0.0
    if width is not None:
        threshold = math.sqrt(max(rmax**2 - width**2, 0.0))
    if eps_floor is None:
        eps_floor = 1e-8 * max(rmax, 1.0)
    keep = (t >= threshold) & (t > eps_floor)
    if not np.any(keep):
        raise EmptyScanError("every sampled point fell below the exclusion floor")
    est = float(np.max(ratio[keep]))
    order = np.argsort(t[keep])
    return Condition6Report(est, float(alpha_prime_max), est < alpha_prime_max, t[keep][order], ratio[keep][order],
                            int(keep.sum()), int((~keep).sum()), float(eps_floor), threshold)


def laplacian_h_composed(imm, spec, q):
    """``Delta(h o F) = sum_i Hess h(dF e_i, dF e_i) + m g(grad h, H)``."""
    q = np.asarray(q, dtype=float)
    frame = split_frame(imm, q)
    _, H = second_fundamental_form(imm, q, frame)
    p = imm.point(q)
    hess = spec.hessian(p)
    tr = np.einsum("...ik,...kl,...il->...", frame.tangent, hess, frame.tangent)
    return tr + imm.m * np.einsum("...k,...k->...", spec.differential(p), H)


def trace_conformality(imm, fld, region=None, n_samples=4096, seed=DEFAULT_SEED):
    """Min and max over samples of ``Trace_g F^* L_X g / (2m)``."""
    pts = imm.sample(n_samples, seed) if region is None else np.asarray(region, dtype=float).reshape(-1, imm.m)
    frame = split_frame(imm, pts)
    lie = lie_derivative_matrix(imm.space, fld, imm.point(pts))
    vals = np.einsum("...ik,...kl,...il->...", frame.tangent, lie, frame.tangent) / (2.0 * imm.m)
    return float(vals.min()), float(vals.max())


def graph_frame_bound(df_singular_values, sigma_dir):
    """``sum_i <sigma, a_i>^2 / (1 + lambda_i^2)`` for a graph with singular values ``lambda_i``.

    ``sigma_dir`` is given in the orthonormal singular basis ``a_i`` of the
    first factor and must be a unit vector.
    """
    lam = np.asarray(df_singular_values, dtype=float)
    sigma = np.asarray(sigma_dir, dtype=float)
    if np.any(lam < 0):
        raise ParameterError("singular values must be nonnegative")
    if sigma.shape != lam.shape:
        raise ParameterError("sigma_dir must have one component per singular value")
    if abs(np.linalg.norm(sigma) - 1.0) > 1e-10:
        raise ParameterError(f"sigma_dir is not normalized (norm {np.linalg.norm(sigma):.6g})")
    return float(np.sum(sigma**2 / (1.0 + lam**2)))


def certify_minimal(imm, n_samples=512, tol=1e-6, seed=DEFAULT_SEED):
    """Largest sampled ``|H|``; raises when a minimal claim fails the tolerance."""
    pts = imm.sample(n_samples, seed)
    _, H = second_fundamental_form(imm, pts)
    hmax = float(np.max(imm.space.norm(imm.point(pts), H)))
    if imm.minimal_claimed and hmax > tol:
        raise NumericError(f"{imm.name} claimed minimal but max |H| = {hmax:.3g} > {tol:g}")
    return hmax


@dataclass(frozen=True)
class SupEstimate:
    value: float
    uncertainty: float
    argmax: np.ndarray
    sampled: float

    def as_dict(self):
        return {"value": self.value, "uncertainty": self.uncertainty, "argmax": self.argmax.tolist(),
                "sampled": self.sampled}


def estimate_supremum(imm, fun, n_samples=2048, n_refine=6, seed=DEFAULT_SEED):
    """Supremum of a scalar function on the patch: sampling plus bounded local ascent.

    The uncertainty is the spread between the sampled maximum and the refined
    value, which bounds how far the ascent moved the estimate.
    """
    pts = imm.sample(n_samples, seed)
    vals = np.asarray(fun(pts), dtype=float)
    order = np.argsort(vals)[::-1][:n_refine]
    best_val, best_pt = float(vals[order[0]]), pts[order[0]]
    bounds = list(zip(imm.lo, imm.hi))
    for idx in order:
        res = minimize(lambda x: -float(fun(x)), pts[idx], method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
        if -res.fun > best_val and bool(imm.contains(res.x)):
            best_val, best_pt = float(-res.fun), np.asarray(res.x)
    sampled = float(vals[order[0]])
    return SupEstimate(best_val, abs(best_val - sampled) + 1e-12 * max(1.0, abs(best_val)), best_pt, sampled)
