"""Chart-based ambient Riemannian spaces.

Every space carries a single global chart.  Points and tangent vectors are
arrays whose last axis has length ``dim``; all methods broadcast over any
leading axes.  Christoffel symbols are returned as ``gamma[..., k, i, j]``
meaning the coefficient of ``d/dx^k`` in ``nabla_{d/dx^i} d/dx^j``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._numerics import DEFAULT_SEED, box_samples, central_jacobian, solve_spd
from .errors import AdmissibilityError, ChartDomainError, UnsupportedError

__all__ = [
    "AmbientSpace",
    "EuclideanSpace",
    "ConstantCurvatureBall",
    "ProductSpace",
    "CustomSpace",
    "GeodesicBallSpec",
    "euclidean",
    "hyperbolic_ball",
    "spherical_cap",
    "product",
    "custom",
    "custom_from_grid",
    "covariant_derivative",
    "distance_from_point",
    "distance_gradient",
    "distance_to_totally_convex",
    "half_rho_squared",
    "christoffel_from_metric",
    "sectional_curvature",
]


def christoffel_from_metric(metric, p, h=None):
    """Levi-Civita symbols of ``metric`` by central differences of its components."""
    p = np.asarray(p, dtype=float)
    if h is None:
        h = 1e-5 * np.maximum(1.0, np.linalg.norm(p, axis=-1))
    dg = central_jacobian(metric, p, h)  # [..., i, j, k] = d_k g_ij
    dg = np.moveaxis(dg, -1, -3)  # [..., k, i, j]
    # first kind: Gamma_{l i j} = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    first = 0.5 * (
        np.swapaxes(dg, -3, -2)  # [..., l, i, j] <- d_i g_lj
        + np.moveaxis(dg, -3, -1)  # d_j g_li
        - dg
    )
    ginv = np.linalg.inv(metric(p))
    return np.einsum("...kl,...lij->...kij", ginv, first)


class AmbientSpace:
    """Base class.  Subclasses supply ``metric`` and usually ``christoffel``."""

    kind = "custom"

    def __init__(self, dim, curvature_bounds=(-math.inf, math.inf), name=None):
        self.dim = int(dim)
        self.curvature_bounds = (float(curvature_bounds[0]), float(curvature_bounds[1]))
        self.name = name or self.kind

    # -- geometry ---------------------------------------------------------
    def metric(self, p):
        raise NotImplementedError

    def christoffel(self, p):
        self.check(p)
        return christoffel_from_metric(self.metric, p)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return np.all(np.isfinite(p), axis=-1)

    def check(self, p):
        ok = self.contains(p)
        if not np.all(ok):
            bad = np.asarray(p)[~np.asarray(ok)] if np.ndim(ok) else np.asarray(p)
            raise ChartDomainError(f"point {np.asarray(bad).reshape(-1, self.dim)[0]} outside the chart of {self.name}")

    def inner(self, p, u, v):
        return np.einsum("...i,...ij,...j->...", u, self.metric(p), v)

    def norm(self, p, v):
        return np.sqrt(np.maximum(self.inner(p, v, v), 0.0))

    def sharp(self, p, covector):
        """Raise an index: the vector ``g^{-1} w``."""
        return solve_spd(self.metric(p), np.asarray(covector, dtype=float))

    # -- curvature metadata -------------------------------------------------
    @property
    def kappa_plus(self):
        return max(0.0, self.curvature_bounds[1])

    @property
    def kappa_minus(self):
        return min(0.0, self.curvature_bounds[0])

    # -- distance -----------------------------------------------------------
    def distance(self, base, p):
        raise UnsupportedError(f"{self.name} has no registered distance function")

    def distance_gradient(self, base, p):
        """Ambient gradient of ``r = d(base, .)``; generic central differences."""
        p = np.asarray(p, dtype=float)
        base = np.asarray(base, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.linalg.norm(p, axis=-1))
        dr = central_jacobian(lambda x: self.distance(base, x), p, h)
        return self.sharp(p, dr)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} dim={self.dim}>"


class EuclideanSpace(AmbientSpace):
    kind = "euclidean"

    def __init__(self, dim, name=None):
        super().__init__(dim, (0.0, 0.0), name or f"R^{dim}")

    def metric(self, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(self.dim), p.shape[:-1] + (self.dim, self.dim)).copy()

    def christoffel(self, p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1] + (self.dim,) * 3)

    def distance(self, base, p):
        return np.linalg.norm(np.asarray(p, float) - np.asarray(base, float), axis=-1)

    def distance_gradient(self, base, p):
        d = np.asarray(p, float) - np.asarray(base, float)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


class ConstantCurvatureBall(AmbientSpace):
    """Conformal model of constant curvature ``K != 0``.

    The metric is ``4 |dx|^2 / (1 + K |x|^2)^2``: the Poincare ball for
    ``K < 0`` and the pullback of the round sphere of radius ``1/sqrt(K)``
    under inverse stereographic projection for ``K > 0`` (the chart origin is
    the north pole, the south pole is excluded).
    """

    def __init__(self, dim, curvature, name=None):
        curvature = float(curvature)
        if curvature == 0.0:
            raise ValueError("use EuclideanSpace for zero curvature")
        bounds = (curvature, curvature) if dim >= 2 else (0.0, 0.0)
        self.K = curvature
        self.kind = "hyperbolic_ball_model" if curvature < 0 else "spherical_cap"
        super().__init__(dim, bounds, name or f"{self.kind}(K={curvature:g}, dim={dim})")
        self._k = math.sqrt(abs(curvature))

    @property
    def chart_radius(self):
        return 1.0 / self._k if self.K < 0 else math.inf

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        ok = np.all(np.isfinite(p), axis=-1)
        if self.K < 0:
            ok &= np.einsum("...i,...i->...", p, p) * (-self.K) < 1.0
        return ok

    def conformal_factor(self, p):
        p = np.asarray(p, dtype=float)
        return 2.0 / (1.0 + self.K * np.einsum("...i,...i->...", p, p))

    def metric(self, p):
        p = np.asarray(p, dtype=float)
        self.check(p)
        lam = self.conformal_factor(p)
        return (lam**2)[..., None, None] * np.eye(self.dim)

    def christoffel(self, p):
        p = np.asarray(p, dtype=float)
        self.check(p)
        s2 = np.einsum("...i,...i->...", p, p)
        dphi = -2.0 * self.K * p / (1.0 + self.K * s2)[..., None]
        eye = np.eye(self.dim)
        # Gamma^k_ij = delta_ki d_j phi + delta_kj d_i phi - delta_ij d_k phi
        return (
            eye[:, :, None] * dphi[..., None, None, :]
            + eye[:, None, :] * dphi[..., None, :, None]
            - eye[None, :, :] * dphi[..., :, None, None]
        )

    # radial profile about the chart origin
    def radius_of_chart(self, s):
        """Geodesic distance from the origin of a chart point at Euclidean radius ``s``."""
        k = self._k
        s = np.asarray(s, dtype=float)
        if self.K < 0:
            return 2.0 / k * np.arctanh(k * s)
        return 2.0 / k * np.arctan(k * s)

    def chart_of_radius(self, r):
        k = self._k
        r = np.asarray(r, dtype=float)
        if self.K < 0:
            return np.tanh(k * r / 2.0) / k
        return np.tan(k * r / 2.0) / k

    def distance(self, base, p):
        p = np.asarray(p, dtype=float)
        base = np.asarray(base, dtype=float)
        self.check(p)
        k = self._k
        u, v = k * base, k * p
        duv = np.linalg.norm(u - v, axis=-1)
        if self.K < 0:
            den = np.sqrt((1.0 - np.sum(u * u, -1)) * (1.0 - np.sum(v * v, -1)))
            return 2.0 / k * np.arcsinh(duv / den)
        den = np.sqrt((1.0 + np.sum(u * u, -1)) * (1.0 + np.sum(v * v, -1)))
        return 2.0 / k * np.arcsin(np.clip(duv / den, 0.0, 1.0))

    def distance_gradient(self, base, p):
        base = np.asarray(base, dtype=float)
        if np.any(base != 0.0):
            return super().distance_gradient(base, p)
        p = np.asarray(p, dtype=float)
        self.check(p)
        s2 = np.einsum("...i,...i->...", p, p)
        s = np.sqrt(s2)
        # radial lines are geodesics and dr/ds equals the conformal factor
        return p * ((1.0 + self.K * s2) / (2.0 * s))[..., None]


class ProductSpace(AmbientSpace):
    """Riemannian product ``A x B`` with chart ``(x, y)``."""

    kind = "product"

    def __init__(self, first, second, name=None):
        self.first = first
        self.second = second
        self.split_index = first.dim
        lo = min(0.0, first.curvature_bounds[0], second.curvature_bounds[0])
        hi = max(0.0, first.curvature_bounds[1], second.curvature_bounds[1])
        super().__init__(first.dim + second.dim, (lo, hi), name or f"{first.name} x {second.name}")

    def split(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., : self.split_index], p[..., self.split_index:]

    def contains(self, p):
        a, b = self.split(p)
        return self.first.contains(a) & self.second.contains(b)

    def metric(self, p):
        a, b = self.split(p)
        ga, gb = self.first.metric(a), self.second.metric(b)
        out = np.zeros(np.shape(p)[:-1] + (self.dim, self.dim))
        i = self.split_index
        out[..., :i, :i] = ga
        out[..., i:, i:] = gb
        return out

    def christoffel(self, p):
        a, b = self.split(p)
        out = np.zeros(np.shape(p)[:-1] + (self.dim,) * 3)
        i = self.split_index
        out[..., :i, :i, :i] = self.first.christoffel(a)
        out[..., i:, i:, i:] = self.second.christoffel(b)
        return out

    def distance(self, base, p):
        ba, bb = self.split(base)
        pa, pb = self.split(p)
        return np.hypot(self.first.distance(ba, pa), self.second.distance(bb, pb))

    def distance_gradient(self, base, p):
        ba, bb = self.split(base)
        pa, pb = self.split(p)
        da, db = self.first.distance(ba, pa), self.second.distance(bb, pb)
        d = np.hypot(da, db)
        ga = self.first.distance_gradient(ba, pa) if np.all(da > 0) else np.zeros_like(pa)
        gb = self.second.distance_gradient(bb, pb) if np.all(db > 0) else np.zeros_like(pb)
        return np.concatenate([ga * (da / d)[..., None], gb * (db / d)[..., None]], axis=-1)


class CustomSpace(AmbientSpace):
    """Space given by a metric callable; Christoffels by central differences."""

    kind = "custom"

    def __init__(self, dim, metric, contains=None, distance=None, curvature_bounds=(-math.inf, math.inf), name=None):
        super().__init__(dim, curvature_bounds, name or "custom")
        self._metric = metric
        self._contains = contains
        self._distance = distance

    def contains(self, p):
        ok = super().contains(p)
        if self._contains is not None:
            ok = ok & np.asarray(self._contains(np.asarray(p, dtype=float)), dtype=bool)
        return ok

    def metric(self, p):
        p = np.asarray(p, dtype=float)
        self.check(p)
        return np.asarray(self._metric(p), dtype=float)

    def distance(self, base, p):
        if self._distance is None:
            return super().distance(base, p)
        return self._distance(np.asarray(base, float), np.asarray(p, float))


# -- constructors ---------------------------------------------------------------

def euclidean(dim):
    return EuclideanSpace(dim)


def hyperbolic_ball(dim, curvature=-1.0):
    if curvature >= 0:
        raise ValueError("hyperbolic ball needs negative curvature")
    return ConstantCurvatureBall(dim, curvature)


def spherical_cap(dim, curvature=1.0):
    if curvature <= 0:
        raise ValueError("spherical cap needs positive curvature")
    return ConstantCurvatureBall(dim, curvature)


def product(first, second):
    return ProductSpace(first, second)


def custom(dim, metric, **kwargs):
    return CustomSpace(dim, metric, **kwargs)


def custom_from_grid(axes, values, **kwargs):
    """Custom space whose metric is tabulated on a regular grid.

    ``axes`` is a list of ``dim`` increasing 1-d coordinate arrays and
    ``values`` has shape ``(*len(axes), dim, dim)``.  Components are
    interpolated linearly; points outside the grid are outside the chart.
    """
    dim = len(axes)
    values = np.asarray(values, dtype=float)
    values = 0.5 * (values + np.swapaxes(values, -1, -2))
    interp = RegularGridInterpolator(axes, values.reshape(values.shape[:dim] + (dim * dim,)), method="linear")
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])

    def metric(p):
        flat = p.reshape(-1, dim)
        return interp(flat).reshape(p.shape[:-1] + (dim, dim))

    def inside(p):
        return np.all((p >= lo) & (p <= hi), axis=-1)

    return CustomSpace(dim, metric, contains=inside, **kwargs)


@dataclass(frozen=True)
class GeodesicBallSpec:
    """Geodesic ball ``B_R(center)`` of an ambient space."""

    center: np.ndarray
    radius: float
    space: AmbientSpace

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("geodesic ball radius must be positive")
        if self.space.kappa_plus > 0 and math.sqrt(self.space.kappa_plus) * self.radius >= math.pi / 2:
            raise AdmissibilityError(
                f"sqrt(kappa+) * R = {math.sqrt(self.space.kappa_plus) * self.radius:.6g} >= pi/2"
            )

    def _chart_half_width(self):
        sp = self.space
        if isinstance(sp, ConstantCurvatureBall) and not np.any(self.center):
            return float(sp.chart_of_radius(self.radius))
        if isinstance(sp, EuclideanSpace):
            return self.radius
        # bisection for the chart extent along each coordinate axis
        width = 0.0
        for k in range(sp.dim):
            for sign in (1.0, -1.0):
                e = np.zeros(sp.dim)
                e[k] = sign
                lo, hi = 0.0, self.radius
                while sp.contains(self.center + hi * e) and sp.distance(self.center, self.center + hi * e) < self.radius:
                    hi *= 2.0
                    if hi > 1e8:
                        break
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    pt = self.center + mid * e
                    if sp.contains(pt) and sp.distance(self.center, pt) < self.radius:
                        lo = mid
                    else:
                        hi = mid
                width = max(width, hi)
        return 1.25 * width

    def sample(self, n, seed=DEFAULT_SEED):
        """``n`` deterministic low-discrepancy points inside the ball."""
        w = self._chart_half_width()
        lo, hi = self.center - w, self.center + w
        out = []
        count = 0
        batch = max(64, 2 * n)
        while count < n:
            pts = box_samples(batch, lo, hi, seed=seed + len(out))
            inside = self.space.contains(pts)
            pts = pts[inside]
            pts = pts[self.space.distance(self.center, pts) < self.radius]
            out.append(pts)
            count += len(pts)
        return np.concatenate(out)[:n]


# -- operations ------------------------------------------------------------------

def covariant_derivative(space, field, p, v):
    """``nabla_v X`` in chart components at ``p``."""
    p = np.asarray(p, dtype=float)
    space.check(p)
    v = np.asarray(v, dtype=float)
    jac = field.jacobian(p)
    gam = space.christoffel(p)
    x = field.value(p)
    return np.einsum("...kj,...j->...k", jac, v) + np.einsum("...kij,...i,...j->...k", gam, v, x)


def distance_from_point(space, base, p):
    return space.distance(np.asarray(base, dtype=float), np.asarray(p, dtype=float))


def distance_gradient(space, base, p):
    return space.distance_gradient(np.asarray(base, dtype=float), np.asarray(p, dtype=float))


def _require_product(space):
    if not isinstance(space, ProductSpace):
        raise UnsupportedError(f"{space.name} is not a product space")


def distance_to_totally_convex(space, x0, p):
    """Distance ``rho`` from ``p = (x, y)`` to the slice ``{x0} x B``."""
    _require_product(space)
    x, _ = space.split(p)
    return space.first.distance(np.asarray(x0, dtype=float), x)


def half_rho_squared(space, x0, p):
    return 0.5 * distance_to_totally_convex(space, x0, p) ** 2


def sectional_curvature(space, p, u, v, h=1e-4):
    """Sectional curvature of the plane ``span(u, v)`` from Christoffel differences."""
    p = np.asarray(p, dtype=float)
    gam = space.christoffel(p)
    dgam = central_jacobian(space.christoffel, p, h)  # [l, i, j, m] = d_m Gamma^l_ij
    # R^l_{ijk} = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    riem = (
        np.einsum("ljki->lijk", dgam)
        - np.einsum("likj->lijk", dgam)
        + np.einsum("lim,mjk->lijk", gam, gam)
        - np.einsum("ljm,mik->lijk", gam, gam)
    )
    g = space.metric(p)
    # <R(u, v) v, u> with R(X,Y)Z = R^l_{ijk} X^i Y^j Z^k d_l
    num = np.einsum("lijk,i,j,k,lm,m->", riem, u, v, v, g, u)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return num / den
