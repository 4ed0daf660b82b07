"""Per-element HDG operators: local blocks, local solves, static condensation.

On every triangle T the method couples a vector flux unknown (2N scalar
coefficients, N = dim P_p), a scalar unknown (N coefficients), and the
traces of the skeleton unknown on the three faces (p + 1 coefficients
each).  With test functions conjugated, the element-local equations read

    i kappa (q, r) - (u, div r)   = -<lam, r.n>           for all r,
    i kappa (u, w) + (div q, w)
        + tau <u - lam, w>        = (f, w)                for all w,

where the second line is the scalar equation after substituting the
stabilized numerical flux  qhat.n = q.n + tau (u - lam)  and integrating
the flux term by parts.  Because the element bases are orthonormal, the
mass blocks are identities and the local 2x2 block system

    L = [[i kappa I, -B], [B^T, i kappa I + S]]

is uniquely solvable for every kappa, tau > 0.  Static condensation
eliminates (q, u) and leaves, per element, the map from face traces to
the face moments of qhat.n; those element matrices are the only coupling
that survives in the global skeleton system.

All functions here are pure: they read the geometry and configuration
they are given and share no mutable state, so elements may be processed
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .analytic import data_quadrature_degree
from .mesh import DOMAIN_BOUNDS, ElementGeometry, Mesh
from .polybasis import (
    EdgeBasis,
    TriangleBasis,
    MAX_ORDER,
    quadrature_rule,
    reference_face_points,
)


@dataclass(frozen=True)
class ProblemConfig:
    """Wave number, polynomial order, and stabilization of one run."""

    kappa: float
    p: int
    tau: float
    domain: tuple = DOMAIN_BOUNDS
    data_quad_degree: int | None = None

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("wave number must be positive")
        if not (1 <= self.p <= MAX_ORDER):
            raise ValueError(f"polynomial order must be in [1, {MAX_ORDER}]")
        if self.tau <= 0:
            raise ValueError("stabilization parameter must be positive")

    @classmethod
    def for_mesh(
        cls,
        kappa: float,
        p: int,
        mesh: Mesh,
        tau_rule: str = "p/(kappa*h)",
        data_quad_degree: int | None = None,
    ) -> "ProblemConfig":
        """Configuration with tau = p/(kappa h) evaluated on this mesh.

        The stabilization uses the global mesh size, so it must be
        recomputed whenever the mesh changes.
        """
        if tau_rule != "p/(kappa*h)":
            raise ValueError(f"unknown tau rule {tau_rule!r}")
        return cls(
            kappa=float(kappa),
            p=int(p),
            tau=float(p) / (float(kappa) * mesh.h_global),
            data_quad_degree=data_quad_degree,
        )


@dataclass(frozen=True)
class LocalBlocks:
    """Assembled element blocks of the local HDG equations.

    A is the i*kappa-scaled vector mass (identity times i*kappa in the
    orthonormal basis), B the divergence coupling (u, div r), C the trace
    coupling <lam, r.n>, S the tau-weighted boundary mass on scalar
    traces, R the tau-weighted trace coupling <lam, w>, and M the scalar
    mass.  Matrices act on trial coefficients; test functions are
    conjugated (the forms are sesquilinear, the matrices are not
    Hermitian).
    """

    p: int
    kappa: float
    tau: float
    n_scalar: int
    A: np.ndarray  # (2N, 2N) complex
    B: np.ndarray  # (2N, N)
    C: np.ndarray  # (2N, 3(p+1))
    S: np.ndarray  # (N, N)
    R: np.ndarray  # (N, 3(p+1))
    M: np.ndarray  # (N, N)

    @property
    def n_trace(self) -> int:
        return 3 * (self.p + 1)

    def system_matrix(self) -> np.ndarray:
        """Dense matrix of the local equations acting on (Q, U)."""
        n2 = 2 * self.n_scalar
        size = n2 + self.n_scalar
        L = np.zeros((size, size), dtype=complex)
        L[:n2, :n2] = self.A
        L[:n2, n2:] = -self.B
        L[n2:, :n2] = self.B.T
        L[n2:, n2:] = 1j * self.kappa * self.M + self.S
        return L

    def rhs(self, lam: np.ndarray, f_load: np.ndarray | None = None) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex).reshape(self.n_trace)
        top = -self.C @ lam
        bottom = self.R @ lam
        if f_load is not None:
            bottom = bottom + np.asarray(f_load, dtype=complex).reshape(self.n_scalar)
        return np.concatenate([top, bottom])


def assemble_local_blocks(geom: ElementGeometry, cfg: ProblemConfig) -> LocalBlocks:
    """Element blocks of the local equations on one triangle.

    All operator integrals are polynomial on affine elements and use
    exactness degree 2p; the resulting blocks are exact to rounding.
    """
    if geom.area <= 1e-14:
        raise ValueError(f"degenerate element (area = {geom.area!r})")
    p = cfg.p
    basis = TriangleBasis(p)
    n = basis.dim
    m = p + 1

    rule = quadrature_rule("triangle", 2 * p)
    phi, grad = basis.eval_with_grad(rule.points)
    # Physical gradients carry inv(J)^T; the det factors of the two scaled
    # basis functions cancel against the volume Jacobian.
    gphys = np.einsum("qad,cd->qac", grad, geom.inv_jt)
    B = np.einsum("q,qac,qj->caj", rule.weights, gphys, phi).reshape(2 * n, n)
    M = phi.T @ (rule.weights[:, None] * phi)
    A = 1j * cfg.kappa * np.kron(np.eye(2), M)

    edge_basis = EdgeBasis(p)
    face_rule = quadrature_rule("edge", 2 * p)
    C = np.zeros((2 * n, 3 * m))
    S = np.zeros((n, n))
    R = np.zeros((n, 3 * m))
    for face in range(3):
        ref_pts = reference_face_points(face, face_rule.points)
        phi_f = basis.eval(ref_pts)
        t_global = face_rule.points if geom.edge_orient[face] == 1 else 1.0 - face_rule.points
        psi = edge_basis.eval(t_global)
        lf = geom.face_lengths[face]
        w = face_rule.weights
        sl = slice(face * m, (face + 1) * m)

        trace = math.sqrt(lf / geom.det) * (phi_f.T @ (w[:, None] * psi))  # (n, m)
        for c in range(2):
            C[c * n : (c + 1) * n, sl] = geom.normals[face, c] * trace
        S += cfg.tau * (lf / geom.det) * (phi_f.T @ (w[:, None] * phi_f))
        R[:, sl] = cfg.tau * trace
    return LocalBlocks(p=p, kappa=cfg.kappa, tau=cfg.tau, n_scalar=n, A=A, B=B, C=C, S=S, R=R, M=M)


def volume_load(
    geom: ElementGeometry, cfg: ProblemConfig, f: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Moments (f, w) of the source against the element basis.

    Uses the high-degree data rule, not the 2p operator rule; the source
    of the benchmark oscillates on the scale 1/kappa.
    """
    degree = cfg.data_quad_degree
    if degree is None:
        degree = data_quadrature_degree(cfg.p, cfg.kappa, geom.h)
    rule = quadrature_rule("triangle", degree)
    phi = TriangleBasis(cfg.p).eval(rule.points)
    values = np.asarray(f(geom.map_to_physical(rule.points)), dtype=complex)
    return math.sqrt(geom.det) * (phi.T @ (rule.weights * values))


def local_solve(
    blocks: LocalBlocks, lam: np.ndarray, f_load: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the local equations for given face traces and source moments.

    Returns the flux and scalar coefficient vectors (2N,) and (N,).  The
    local matrix is provably invertible; a singular factorization here
    signals an assembly bug upstream.
    """
    L = blocks.system_matrix()
    try:
        x = sla.solve(L, blocks.rhs(lam, f_load))
    except sla.LinAlgError as exc:  # pragma: no cover - cannot occur for valid blocks
        raise RuntimeError("singular local HDG system; assembly is inconsistent") from exc
    n2 = 2 * blocks.n_scalar
    return x[:n2], x[n2:]


def local_residual(
    blocks: LocalBlocks,
    Q: np.ndarray,
    U: np.ndarray,
    lam: np.ndarray,
    f_load: np.ndarray | None = None,
) -> float:
    """Relative residual of the local equations at given coefficients."""
    L = blocks.system_matrix()
    x = np.concatenate([np.asarray(Q, dtype=complex), np.asarray(U, dtype=complex)])
    rhs = blocks.rhs(lam, f_load)
    scale = max(np.linalg.norm(rhs), np.linalg.norm(L, ord=np.inf) * np.linalg.norm(x), 1e-300)
    return float(np.linalg.norm(L @ x - rhs) / scale)


def flux_functional(blocks: LocalBlocks, Q, U, lam) -> np.ndarray:
    """Face moments <qhat.n, mu> of the numerical flux, one per trace dof."""
    Q = np.asarray(Q, dtype=complex)
    U = np.asarray(U, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    return blocks.C.T @ Q + blocks.R.T @ U - blocks.tau * lam


@dataclass(frozen=True)
class CondensedElement:
    """Schur complement of one element onto its face trace unknowns.

    For any traces lam, solving the local equations and taking face
    moments of the numerical flux gives K @ lam - F (with F collecting
    the source contribution).  recon_lam and recon_f map traces and
    source moments back to the interior (Q, U) coefficients.
    """

    K: np.ndarray  # (3(p+1), 3(p+1)) complex
    F: np.ndarray  # (3(p+1),) complex
    recon_lam: np.ndarray  # (3N, 3(p+1)) complex
    recon_f: np.ndarray  # (3N,) complex
    cond: float  # condition number of the local system


class _CondensedOperators:
    """Source-independent condensation operators, reusable across elements
    that share geometry (only the source moments differ)."""

    def __init__(self, blocks: LocalBlocks):
        L = blocks.system_matrix()
        n, n2 = blocks.n_scalar, 2 * blocks.n_scalar
        lam_rhs = np.zeros((n2 + n, blocks.n_trace), dtype=complex)
        lam_rhs[:n2] = -blocks.C
        lam_rhs[n2:] = blocks.R
        load_rhs = np.zeros((n2 + n, n), dtype=complex)
        load_rhs[n2:] = np.eye(n)
        lu = sla.lu_factor(L)
        self.blocks = blocks
        self.recon_lam = sla.lu_solve(lu, lam_rhs)
        self.inv_load = sla.lu_solve(lu, load_rhs)  # (3N, N): source moments -> (Q, U)
        W = np.concatenate([blocks.C.T, blocks.R.T], axis=1)
        self.K = W @ self.recon_lam - blocks.tau * np.eye(blocks.n_trace)
        self.load_to_flux = -(W @ self.inv_load)  # (3(p+1), N): source moments -> F
        self.cond = float(np.linalg.cond(L))

    def condensed(self, f_load: np.ndarray) -> CondensedElement:
        f_load = np.asarray(f_load, dtype=complex).reshape(self.blocks.n_scalar)
        return CondensedElement(
            K=self.K,
            F=self.load_to_flux @ f_load,
            recon_lam=self.recon_lam,
            recon_f=self.inv_load @ f_load,
            cond=self.cond,
        )


def condense_element(blocks: LocalBlocks, f_load: np.ndarray | None = None) -> CondensedElement:
    """Statically condense one element onto its face trace unknowns."""
    if f_load is None:
        f_load = np.zeros(blocks.n_scalar, dtype=complex)
    return _CondensedOperators(blocks).condensed(f_load)
