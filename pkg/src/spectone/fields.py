"""Ambient vector fields, convex functions and their conformality constants."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._numerics import DEFAULT_SEED, central_jacobian
from .ambient import (
    AmbientSpace,
    ConstantCurvatureBall,
    EuclideanSpace,
    GeodesicBallSpec,
    ProductSpace,
    covariant_derivative,
)
from .errors import AdmissibilityError, DegenerateFootError, NumericError, UnsupportedError

__all__ = [
    "UNBOUNDED",
    "Unbounded",
    "AmbientField",
    "ConvexFunctionSpec",
    "ConformalityEstimate",
    "BoxRegion",
    "position_field",
    "scaled_field",
    "rotation_field",
    "gradient_field",
    "half_r_squared",
    "half_rho_squared",
    "lie_derivative_metric",
    "lie_derivative_matrix",
    "relative_eigenvalues",
    "estimate_conformality",
    "alpha_kappa",
    "hessian_of",
    "kasue_lower_bound",
]


class Unbounded:
    """Marker for ``beta = +infinity`` (strongly convex fields)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __ge__(self, other):
        return True

    def __gt__(self, other):
        return not isinstance(other, Unbounded)

    def __le__(self, other):
        return isinstance(other, Unbounded)

    def __lt__(self, other):
        return False


UNBOUNDED = Unbounded()


def _fd_step(p):
    return 1e-5 * np.maximum(1.0, np.linalg.norm(p, axis=-1))


@dataclass(frozen=True)
class AmbientField:
    """A vector field on an ambient space.

    ``value_fn`` maps chart points ``(..., N)`` to chart components.  The
    Jacobian ``d_j X^k`` is analytic when ``jacobian_fn`` is given and
    central differences otherwise.
    """

    space: AmbientSpace
    value_fn: Callable
    kind: str = "custom"
    jacobian_fn: Optional[Callable] = None
    potential: Optional["ConvexFunctionSpec"] = None
    params: dict = field(default_factory=dict)

    def value(self, p):
        return np.asarray(self.value_fn(np.asarray(p, dtype=float)), dtype=float)

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        if self.jacobian_fn is not None:
            return np.asarray(self.jacobian_fn(p), dtype=float)
        return central_jacobian(self.value_fn, p, _fd_step(p))

    def covariant_derivative(self, p, v):
        return covariant_derivative(self.space, self, p, v)


@dataclass(frozen=True)
class ConvexFunctionSpec:
    """A nonnegative (convex) function ``h`` with differential and covariant Hessian."""

    space: AmbientSpace
    value_fn: Callable
    name: str = "custom"
    differential_fn: Optional[Callable] = None
    hessian_fn: Optional[Callable] = None
    alpha_claimed: Optional[float] = None
    params: dict = field(default_factory=dict)

    def value(self, p):
        return np.asarray(self.value_fn(np.asarray(p, dtype=float)), dtype=float)

    def differential(self, p):
        """Covector ``dh`` in chart components."""
        p = np.asarray(p, dtype=float)
        if self.differential_fn is not None:
            return np.asarray(self.differential_fn(p), dtype=float)
        return central_jacobian(self.value_fn, p, _fd_step(p))

    def gradient(self, p):
        return self.space.sharp(p, self.differential(p))

    def hessian(self, p):
        """Covariant Hessian ``d_i d_j h - Gamma^k_ij d_k h``."""
        p = np.asarray(p, dtype=float)
        if self.hessian_fn is not None:
            return np.asarray(self.hessian_fn(p), dtype=float)
        h = 1e-4 * np.maximum(1.0, np.linalg.norm(p, axis=-1))
        second = central_jacobian(self.differential, p, h)
        second = 0.5 * (second + np.swapaxes(second, -1, -2))
        gam = self.space.christoffel(p)
        return second - np.einsum("...kij,...k->...ij", gam, self.differential(p))


@dataclass(frozen=True)
class ConformalityEstimate:
    """Sampled constants ``alpha <= beta`` with ``2 alpha g <= L_X g <= 2 beta g``."""

    alpha_est: float
    beta_est: object
    sample_count: int
    region: str

    def __post_init__(self):
        if not self.alpha_est <= self.beta_est:
            raise NumericError(f"alpha_est {self.alpha_est} exceeds beta_est {self.beta_est}")

    def as_dict(self):
        beta = "inf" if isinstance(self.beta_est, Unbounded) else float(self.beta_est)
        return {"alpha_est": float(self.alpha_est), "beta_est": beta,
                "sample_count": int(self.sample_count), "region": self.region}


@dataclass(frozen=True)
class BoxRegion:
    lo: np.ndarray
    hi: np.ndarray

    def sample(self, n, seed=DEFAULT_SEED):
        from ._numerics import box_samples

        return box_samples(n, self.lo, self.hi, seed)

    def __str__(self):
        return f"box({list(np.round(self.lo, 12))}, {list(np.round(self.hi, 12))})"


# -- radial profiles of the conformal models ------------------------------------------

def _profile(K, s2):
    """``phi(s)`` and ``phi'(s)/s`` for the position field ``phi(s) x`` about the origin."""
    s = np.sqrt(s2)
    small = s * math.sqrt(abs(K)) < 1e-3
    safe_s = np.where(small, 1.0, s)
    k = math.sqrt(abs(K))
    r = 2.0 / k * (np.arctanh(k * safe_s) if K < 0 else np.arctan(k * safe_s))
    phi = r * (1.0 + K * safe_s**2) / (2.0 * safe_s)
    dphi_over_s = (1.0 + K * safe_s * r - phi) / safe_s**2
    phi = np.where(small, 1.0 + (2.0 / 3.0) * K * s2 - (2.0 / 15.0) * K**2 * s2**2, phi)
    dphi_over_s = np.where(small, (4.0 / 3.0) * K - (8.0 / 15.0) * K**2 * s2, dphi_over_s)
    return r, phi, dphi_over_s


def _origin_only(space, base):
    if np.any(np.asarray(base, dtype=float) != 0.0):
        raise UnsupportedError(f"analytic position field on {space.name} is only available about the chart origin")


# -- built-in fields ------------------------------------------------------------

def position_field(space, base=None):
    """The position field ``r d/dr = grad(r^2 / 2)`` about ``base``."""
    base = np.zeros(space.dim) if base is None else np.asarray(base, dtype=float)
    spec = half_r_squared(space, base)
    if isinstance(space, EuclideanSpace):
        return AmbientField(space, lambda p: p - base, "position",
                            lambda p: np.broadcast_to(np.eye(space.dim), p.shape + (space.dim,)).copy(),
                            spec, {"base": base.tolist()})
    if isinstance(space, ConstantCurvatureBall):
        _origin_only(space, base)
        K = space.K

        def value(p):
            _, phi, _ = _profile(K, np.einsum("...i,...i->...", p, p))
            return phi[..., None] * p

        def jac(p):
            _, phi, dps = _profile(K, np.einsum("...i,...i->...", p, p))
            return phi[..., None, None] * np.eye(space.dim) + dps[..., None, None] * p[..., :, None] * p[..., None, :]

        return AmbientField(space, value, "position", jac, spec, {"base": base.tolist()})
    if isinstance(space, ProductSpace):
        fa = position_field(space.first, base[: space.split_index])
        fb = position_field(space.second, base[space.split_index:])
        i = space.split_index

        def value(p):
            return np.concatenate([fa.value(p[..., :i]), fb.value(p[..., i:])], axis=-1)

        def jac(p):
            out = np.zeros(p.shape + (space.dim,))
            out[..., :i, :i] = fa.jacobian(p[..., :i])
            out[..., i:, i:] = fb.jacobian(p[..., i:])
            return out

        return AmbientField(space, value, "position", jac, spec, {"base": base.tolist()})
    return gradient_field(spec)


def scaled_field(fld, factor):
    """``factor * X`` (a homothety of the position field for Euclidean ``X``)."""
    jac = None if fld.jacobian_fn is None else (lambda p: factor * fld.jacobian(p))
    return AmbientField(fld.space, lambda p: factor * fld.value(p), f"{fld.kind}*{factor:g}", jac,
                        None, {**fld.params, "scale": factor})


def rotation_field(space, i=0, j=1):
    """Infinitesimal rotation in the ``(x_i, x_j)`` plane about the chart origin.

    Killing for Euclidean space and for the conformal constant-curvature models.
    """
    n = space.dim
    a = np.zeros((n, n))
    a[i, j], a[j, i] = -1.0, 1.0
    return AmbientField(space, lambda p: p @ a.T, "killing",
                        lambda p: np.broadcast_to(a, p.shape + (n,)).copy(), None, {"plane": [i, j]})


def gradient_field(spec):
    """``grad h`` for a convex function spec."""
    space = spec.space

    def jac(p):
        # d_j (g^{ki} d_i h) = g^{ki} (d_j d_i h) + (d_j g^{ki}) d_i h
        return central_jacobian(spec.gradient, p, _fd_step(p))

    return AmbientField(space, spec.gradient, f"gradient_of({spec.name})", jac, spec, {})


def half_r_squared(space, base=None):
    """``h = r^2 / 2`` with ``r`` the distance to ``base``; analytic for built-ins."""
    base = np.zeros(space.dim) if base is None else np.asarray(base, dtype=float)
    n = space.dim
    if isinstance(space, EuclideanSpace):
        return ConvexFunctionSpec(
            space,
            lambda p: 0.5 * np.sum((p - base) ** 2, axis=-1),
            "half_r_squared",
            lambda p: p - base,
            lambda p: np.broadcast_to(np.eye(n), p.shape + (n,)).copy(),
            1.0,
            {"base": base.tolist()},
        )
    if isinstance(space, ConstantCurvatureBall):
        _origin_only(space, base)
        K = space.K

        def value(p):
            return 0.5 * space.radius_of_chart(np.linalg.norm(p, axis=-1)) ** 2

        def differential(p):
            s2 = np.einsum("...i,...i->...", p, p)
            r, phi, _ = _profile(K, s2)
            lam = 2.0 / (1.0 + K * s2)
            # dh = r dr = r * lam * x / s = lam^2 * phi * x
            return (lam**2 * phi)[..., None] * p

        def hessian(p):
            # Hess(r^2/2) = dr (x) dr + alpha_K(r) (g - dr (x) dr)
            s2 = np.einsum("...i,...i->...", p, p)
            s = np.sqrt(s2)
            r = space.radius_of_chart(s)
            lam = 2.0 / (1.0 + K * s2)
            u = p / np.where(s > 0, s, 1.0)[..., None]
            uu = u[..., :, None] * u[..., None, :]
            ak = _alpha_kappa_array(r, K)
            return (lam**2)[..., None, None] * (uu + ak[..., None, None] * (np.eye(n) - uu))

        alpha = 1.0 if K < 0 else None
        return ConvexFunctionSpec(space, value, "half_r_squared", differential, hessian, alpha,
                                  {"base": base.tolist()})
    if isinstance(space, ProductSpace):
        i = space.split_index
        fa = half_r_squared(space.first, base[:i])
        fb = half_r_squared(space.second, base[i:])

        def hessian(p):
            out = np.zeros(p.shape + (n,))
            out[..., :i, :i] = fa.hessian(p[..., :i])
            out[..., i:, i:] = fb.hessian(p[..., i:])
            return out

        alphas = [fa.alpha_claimed, fb.alpha_claimed]
        alpha = None if None in alphas else min(alphas)
        return ConvexFunctionSpec(
            space,
            lambda p: fa.value(p[..., :i]) + fb.value(p[..., i:]),
            "half_r_squared",
            lambda p: np.concatenate([fa.differential(p[..., :i]), fb.differential(p[..., i:])], axis=-1),
            hessian,
            alpha,
            {"base": base.tolist()},
        )
    return ConvexFunctionSpec(space, lambda p: 0.5 * space.distance(base, p) ** 2, "half_r_squared",
                              params={"base": base.tolist()})


def half_rho_squared(space, x0=None):
    """``h(x, y) = r_A(x)^2 / 2`` on a product ``A x B``: half squared distance to ``{x0} x B``."""
    if not isinstance(space, ProductSpace):
        raise UnsupportedError(f"{space.name} is not a product space")
    i, n = space.split_index, space.dim
    x0 = np.zeros(i) if x0 is None else np.asarray(x0, dtype=float)
    fa = half_r_squared(space.first, x0)

    def hessian(p):
        out = np.zeros(p.shape + (n,))
        out[..., :i, :i] = fa.hessian(p[..., :i])
        return out

    def differential(p):
        return np.concatenate([fa.differential(p[..., :i]), np.zeros(p.shape[:-1] + (n - i,))], axis=-1)

    return ConvexFunctionSpec(space, lambda p: fa.value(p[..., :i]), "half_rho_squared", differential, hessian,
                              None, {"x0": x0.tolist()})


# -- operations ------------------------------------------------------------------

def lie_derivative_matrix(space, fld, p):
    """Components ``(L_X g)_ij = g(nabla_i X, d_j) + g(nabla_j X, d_i)``."""
    p = np.asarray(p, dtype=float)
    space.check(p)
    nab = fld.jacobian(p) + np.einsum("...kil,...l->...ki", space.christoffel(p), fld.value(p))
    low = np.einsum("...ik,...kj->...ij", space.metric(p), nab)  # g_ik (nabla_j X)^k
    return low + np.swapaxes(low, -1, -2)


def lie_derivative_metric(space, fld, p, y, z):
    """``L_X g(Y, Z) = g(nabla_Y X, Z) + g(nabla_Z X, Y)``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    g = space.metric(p)
    ny = covariant_derivative(space, fld, p, y)
    nz = covariant_derivative(space, fld, p, z)
    return np.einsum("...i,...ij,...j->...", ny, g, z) + np.einsum("...i,...ij,...j->...", nz, g, y)


def relative_eigenvalues(form, metric):
    """Eigenvalues of ``metric^{-1} form`` via Cholesky, ascending."""
    try:
        chol = np.linalg.cholesky(metric)
    except np.linalg.LinAlgError as exc:
        raise NumericError("metric is not positive definite") from exc
    linv = np.linalg.inv(chol)
    a = linv @ form @ np.swapaxes(linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2)))


def estimate_conformality(space, fld, region, n_samples=4096, seed=DEFAULT_SEED):
    """Sampled ``alpha`` and ``beta`` of Eq. ``2 alpha g <= L_X g <= 2 beta g``.

    ``region`` is a :class:`GeodesicBallSpec`, a :class:`BoxRegion` or an
    explicit ``(n, dim)`` array of points.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if isinstance(region, (GeodesicBallSpec, BoxRegion)):
        pts = region.sample(n_samples, seed)
        label = str(region) if isinstance(region, BoxRegion) else f"ball(R={region.radius:g})"
    else:
        pts = np.asarray(region, dtype=float).reshape(-1, space.dim)
        label = f"points({len(pts)})"
    half = 0.5 * lie_derivative_matrix(space, fld, pts)
    g = space.metric(pts)
    bad = ~np.all(np.linalg.eigvalsh(g) > 0, axis=-1)
    if np.any(bad):
        raise NumericError("degenerate metric at a sample", point=pts[bad][0])
    ev = relative_eigenvalues(half, g)
    return ConformalityEstimate(float(ev[:, 0].min()), float(ev[:, -1].max()), len(pts), label)


def _alpha_kappa_array(r, kappa):
    r = np.asarray(r, dtype=float)
    if kappa == 0:
        return np.ones_like(r)
    x = math.sqrt(abs(kappa)) * r
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    if kappa > 0:
        val = xs / np.tan(xs)
        series = 1.0 - x**2 / 3.0 - x**4 / 45.0
    else:
        val = xs / np.tanh(xs)
        series = 1.0 + x**2 / 3.0 - x**4 / 45.0
    return np.where(small, series, val)


def alpha_kappa(R, kappa):
    """``R sqrt(k) cot(sqrt(k) R)``, ``1`` or ``R sqrt(-k) coth(sqrt(-k) R)`` by the sign of ``kappa``."""
    R = float(R)
    kappa = float(kappa)
    if R < 0:
        raise ValueError("R must be nonnegative")
    if kappa > 0 and R >= math.pi / (2.0 * math.sqrt(kappa)):
        raise AdmissibilityError(f"R = {R} violates sqrt(kappa) R < pi/2 for kappa = {kappa}")
    return float(_alpha_kappa_array(R, kappa))


def hessian_of(space, spec, p):
    """Covariant Hessian of ``spec`` at ``p``."""
    p = np.asarray(p, dtype=float)
    space.check(p)
    return spec.hessian(p)


def kasue_lower_bound(space, x0, p, y):
    """``g(sigma'(l), Y)^2`` where ``sigma'(l) = grad rho`` at ``p``.

    ``rho`` is the distance to the totally convex slice ``{x0} x B`` of a
    nonpositively curved product.
    """
    if not isinstance(space, ProductSpace):
        raise UnsupportedError(f"{space.name} is not a product space")
    if space.kappa_plus > 0:
        raise UnsupportedError("the Hessian comparison needs nonpositive curvature")
    p = np.asarray(p, dtype=float)
    x, _ = space.split(p)
    x0 = np.asarray(x0, dtype=float)
    rho = space.first.distance(x0, x)
    if np.any(rho <= 0):
        raise DegenerateFootError("point lies on the totally convex set", point=p)
    grad_a = space.first.distance_gradient(x0, x)
    sigma = np.concatenate([grad_a, np.zeros(p.shape[:-1] + (space.dim - space.split_index,))], axis=-1)
    return space.inner(p, sigma, np.asarray(y, dtype=float)) ** 2
