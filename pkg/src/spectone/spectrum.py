"""Dirichlet Laplace-Beltrami eigenproblems on meshed parameter domains."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmptyInteriorError, ProbeDegeneracyError, SolverError, ZeroFunctionError
from .mesh import induced_quadrature
from .tone import c_values, exhaustion_domain

__all__ = [
    "EigenResult",
    "ExhaustionRow",
    "ExhaustionTable",
    "assemble",
    "smallest_dirichlet_eigenvalue",
    "dirichlet_eigenvalue",
    "rayleigh_quotient",
    "barta_equality_probe",
    "exhaustion_study",
    "DENSE_LIMIT",
    "RESIDUAL_TOL",
]

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8


def assemble(imm, mesh, geom=None):
    """P1 stiffness and mass matrices in the metric induced by ``imm``.

    Returns
    -------
    (stiffness, mass) : scipy.sparse.csr_matrix
        ``int g^{ab} d_a phi_i d_b phi_j dV`` and ``int phi_i phi_j dV``.
    """
    geom = induced_quadrature(imm, mesh) if geom is None else geom
    dv = geom.measure  # (nc, nq)
    gr = geom.grads  # (nc, m+1, m)
    k_loc = np.einsum("cia,cqab,cjb,cq->cij", gr, geom.ginv, gr, dv)
    m_loc = np.einsum("qi,qj,cq->cij", geom.bary, geom.bary, dv)
    cells = mesh.cells
    rows = np.repeat(cells, cells.shape[1], axis=1).ravel()
    cols = np.tile(cells, (1, cells.shape[1])).ravel()
    n = mesh.n_vertices
    stiff = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mass = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    # exact symmetry regardless of summation order
    return (stiff + stiff.T) * 0.5, (mass + mass.T) * 0.5


@dataclass
class EigenResult:
    """First Dirichlet eigenpair; ``eigenfunction`` is nonnegative with unit discrete L2 norm."""

    lambda1: float
    eigenfunction: np.ndarray
    residual: float
    mesh_size_h: Optional[float] = None
    refinement_estimate: Optional[float] = None
    n_dofs: int = 0

    def as_dict(self):
        return {
            "lambda1": self.lambda1,
            "residual": self.residual,
            "mesh_size_h": self.mesh_size_h,
            "refinement_estimate": self.refinement_estimate,
            "n_dofs": self.n_dofs,
        }


def smallest_dirichlet_eigenvalue(stiffness, mass, boundary, tol=RESIDUAL_TOL):
    """Smallest generalized eigenpair of ``K x = lambda M x`` on the interior dofs.

    Dense ``eigh`` below :data:`DENSE_LIMIT` interior dofs, shift-invert
    Lanczos about zero otherwise.  Both paths are deterministic.
    """
    boundary = np.asarray(boundary, dtype=bool)
    inner = np.flatnonzero(~boundary)
    if inner.size == 0:
        raise EmptyInteriorError("no interior degrees of freedom")
    K = sp.csr_matrix(stiffness)[inner][:, inner]
    M = sp.csr_matrix(mass)[inner][:, inner]
    if inner.size <= DENSE_LIMIT:
        w, v = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, 0])
        lam, x = float(w[0]), v[:, 0]
    else:
        try:
            w, v = spla.eigsh(K.tocsc(), k=1, M=M.tocsc(), sigma=0.0, which="LM",
                              v0=np.ones(inner.size), tol=1e-12, maxiter=10 * inner.size)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"shift-invert Lanczos did not converge on {inner.size} dofs: {exc}") from exc
        lam, x = float(w[0]), v[:, 0]
    mx = M @ x
    x = x / np.sqrt(x @ mx)
    if x.sum() < 0:
        x = -x
    mx = M @ x
    residual = float(np.linalg.norm(K @ x - lam * mx) / max(abs(lam) * np.linalg.norm(mx), 1e-300))
    if not residual <= tol:
        raise SolverError(f"relative residual {residual:.3e} exceeds {tol:.1e} (lambda={lam:.6g}, dofs={inner.size})")
    full = np.zeros(len(boundary))
    full[inner] = x
    return EigenResult(lam, full, residual, n_dofs=int(inner.size))


def dirichlet_eigenvalue(imm, mesh, coarse=None):
    """Assemble and solve on ``mesh``; with a ``coarse`` mesh, attach ``|lambda_h - lambda_2h| / 3``."""
    K, M = assemble(imm, mesh)
    res = smallest_dirichlet_eigenvalue(K, M, mesh.boundary)
    res.mesh_size_h = mesh.h
    if coarse is not None:
        Kc, Mc = assemble(imm, coarse)
        lam_c = smallest_dirichlet_eigenvalue(Kc, Mc, coarse.boundary).lambda1
        res.refinement_estimate = abs(res.lambda1 - lam_c) / 3.0
    return res


def rayleigh_quotient(imm, mesh, f, operators=None):
    """Discrete ``int |grad f|^2 / int f^2`` for vertex values vanishing on the boundary."""
    f = np.asarray(f, dtype=float)
    K, M = assemble(imm, mesh) if operators is None else operators
    f = np.where(mesh.boundary, 0.0, f)
    den = float(f @ (M @ f))
    if not den > 0:
        raise ZeroFunctionError("the function vanishes at every interior vertex")
    return float(f @ (K @ f)) / den


def _recovered_gradient(mesh, geom, phi):
    """Vertex covectors ``d phi`` averaged over incident cells with measure weights."""
    grad_cell = np.einsum("ci,cia->ca", phi[mesh.cells], geom.grads)
    w = geom.measure.sum(axis=1)
    acc = np.zeros((mesh.n_vertices, mesh.m))
    wsum = np.zeros(mesh.n_vertices)
    for k in range(mesh.m + 1):
        np.add.at(acc, mesh.cells[:, k], grad_cell * w[:, None])
        np.add.at(wsum, mesh.cells[:, k], w)
    return acc / wsum[:, None], grad_cell


def barta_equality_probe(imm, mesh, result=None, interior_fraction=0.3, step=None):
    """``inf c(X*)`` for ``X* = -grad log phi_1`` built from the discrete first eigenfunction.

    ``grad phi_1`` is recovered at vertices by averaging cell gradients and
    interpolated linearly; ``c`` is evaluated at centroids of cells whose
    vertices all carry ``phi_1 >= interior_fraction * max phi_1``, which keeps
    the probe away from the boundary layer where ``log phi_1`` is singular.
    """
    if result is None:
        result = dirichlet_eigenvalue(imm, mesh)
    phi = result.eigenfunction
    geom = induced_quadrature(imm, mesh)
    G, grad_cell = _recovered_gradient(mesh, geom, phi)
    keep = np.all(phi[mesh.cells] >= interior_fraction * phi.max(), axis=1)
    if not np.any(keep):
        raise ProbeDegeneracyError("no cell lies inside the probe region; refine the mesh")
    cells = mesh.cells[keep]
    grads = geom.grads[keep]
    x = mesh.cell_coords()[keep].mean(axis=1)
    ph = phi[cells].mean(axis=1)
    if np.any(ph <= 0):
        raise ProbeDegeneracyError("the eigenfunction vanishes at an interior probe point")
    ginv_v = np.linalg.inv(imm.induced_metric(mesh.vertices))
    V = np.einsum("vab,vb->va", ginv_v, G)  # vertex vectors grad phi
    Vc = V[cells].mean(axis=1)
    divV = np.einsum("cia,cia->c", V[cells], grads)
    # divergence correction V^a d_a log sqrt det g
    h = np.full(mesh.m, 1e-5) if step is None else np.asarray(step)
    dlog = np.zeros_like(x)
    for a in range(mesh.m):
        e = np.zeros(mesh.m)
        e[a] = h[a]
        dlog[:, a] = 0.25 * (np.log(np.linalg.det(imm.induced_metric(x + e)))
                             - np.log(np.linalg.det(imm.induced_metric(x - e)))) / h[a]
    divV = divV + np.einsum("ca,ca->c", Vc, dlog)
    dphi = grad_cell[keep]
    g = imm.induced_metric(x)
    norm_v2 = np.einsum("ca,cab,cb->c", Vc, g, Vc)
    c = -divV / ph + (np.einsum("ca,ca->c", Vc, dphi) - norm_v2) / ph**2
    return float(np.min(c))


@dataclass
class ExhaustionRow:
    eps: float
    lambda_fem: float
    c_inf: float
    paper_bound: float
    margin: float
    refinement_estimate: float
    barta_ok: bool
    n_dofs: int
    mesh_size_h: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class ExhaustionTable:
    rows: list = field(default_factory=list)
    monotone: bool = True
    barta_ok: bool = True

    COLUMNS = ("eps", "lambda_fem", "c_inf", "paper_bound", "margin")

    def as_dict(self):
        return {"rows": [r.as_dict() for r in self.rows], "monotone": self.monotone, "barta_ok": self.barta_ok}

    def to_csv(self):
        lines = [",".join(self.COLUMNS)]
        for r in sorted(self.rows, key=lambda r: -r.eps):
            lines.append(",".join(repr(float(getattr(r, k))) for k in self.COLUMNS))
        return "\n".join(lines) + "\n"


def exhaustion_study(imm, defining, eps_sequence, candidate, paper_bound, n_along=64, n_across=8,
                     axis=1, center=None, barta_factor=10.0):
    """Tone of the bands ``D_eps`` against the Barta value of ``candidate``.

    Parameters
    ----------
    defining : DefiningFunction
    eps_sequence : sequence of float
        Decreasing band widths.
    candidate : CandidateField
    paper_bound : callable
        ``eps -> `` lower bound predicted for ``c(X)`` on ``D_eps``.

    The margin column is ``c_inf - paper_bound``.  Each row also solves a
    half-resolution band and uses ``|lambda_h - lambda_2h| / 3`` as the
    discretization error in the Barta check ``lambda_fem >= c_inf - tol``.
    """
    eps_sequence = [float(e) for e in eps_sequence]
    if any(b >= a for a, b in zip(eps_sequence, eps_sequence[1:])):
        raise ValueError("eps_sequence must be strictly decreasing")
    table = ExhaustionTable()
    for eps in eps_sequence:
        dom = exhaustion_domain(imm, defining, eps, n_along, n_across, axis=axis, center=center)
        coarse = exhaustion_domain(imm, defining, eps, max(n_along // 2, 3), max(n_across // 2, 1),
                                   axis=axis, center=center)
        res = dirichlet_eigenvalue(imm, dom.mesh, coarse.mesh)
        geom = induced_quadrature(imm, dom.mesh)
        c_inf = float(np.min(c_values(imm, candidate, geom.points.reshape(-1, imm.m))))
        bound = float(paper_bound(eps))
        tol = barta_factor * res.refinement_estimate + RESIDUAL_TOL * abs(res.lambda1)
        ok = res.lambda1 >= c_inf - tol
        table.rows.append(ExhaustionRow(eps, res.lambda1, c_inf, bound, c_inf - bound,
                                        res.refinement_estimate, bool(ok), res.n_dofs, dom.mesh.h))
    lams = [r.lambda_fem for r in table.rows]
    table.monotone = all(b > a for a, b in zip(lams, lams[1:]))
    table.barta_ok = all(r.barta_ok for r in table.rows)
    return table
