"""Error norms, the discrete energy identity, and convergence tables.

The flagship correctness invariant is the discrete energy identity: for
any computed solution,

    i kappa ||u_h||^2 - i kappa ||q_h||^2 + tau ||u_h - uhat||^2_dTh
        + ||uhat||^2_dOmega  =  (f, u_h) + <g, uhat>_dOmega,

an algebraic consequence of testing the scheme with its own solution.
Both sides are evaluated from the assembled quantities (coefficient
norms, assembly-rule face integrals, and the very load vectors used in
the solve), so the residual of each part is limited only by the direct
solver and must sit at machine precision.  Its real part also yields the
computable bound  tau ||u_h - uhat||^2 <= ||f|| ||u_h|| + ||g||^2, which
the standard pipeline asserts on every solve.

Error norms against the exact solution use the high-degree data rule;
the trace error counts interior edges once per incident element (twice
in total), matching the broken-boundary norm.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytic import ExactSolution, benchmark_problem, data_quadrature_degree
from .hdg_local import ProblemConfig
from .mesh import Mesh, build_structured_mesh, mesh_entities
from .polybasis import EdgeBasis, TriangleBasis, quadrature_rule, reference_face_points
from .skeleton import (
    Solution,
    SolveInfo,
    _error_batches,
    boundary_loads,
    build_dof_map,
    solve_helmholtz,
    volume_loads,
)


@dataclass(frozen=True)
class ErrorReport:
    """Error norms and bookkeeping of one solve."""

    kappa: float
    p: int
    n: int
    h: float
    dofs: int
    e_u: float
    e_q: float
    e_q_scaled: float
    e_trace: float
    seconds: float

    def __post_init__(self):
        for name in ("e_u", "e_q", "e_q_scaled", "e_trace"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")


@dataclass
class ConvergenceTable:
    """Error reports at increasing mesh resolution for one (kappa, p)."""

    rows: list[ErrorReport] = field(default_factory=list)

    def add(self, report: ErrorReport) -> None:
        if self.rows and report.n <= self.rows[-1].n:
            raise ValueError("rows must be strictly ordered by increasing n")
        self.rows.append(report)

    def errors(self, kind: str) -> np.ndarray:
        return np.array([getattr(r, f"e_{kind}") for r in self.rows])

    def pairwise_rates(self, kind: str) -> list[float]:
        """Observed slope between consecutive rows; equals the log2 error
        ratio when the mesh size halves."""
        e = self.errors(kind)
        h = np.array([r.h for r in self.rows])
        return [
            float(np.log(e[k] / e[k + 1]) / np.log(h[k] / h[k + 1]))
            for k in range(len(e) - 1)
        ]


@dataclass(frozen=True)
class RateSummary:
    """Observed h-slopes (least squares over the finest three rows)."""

    slope_u: float
    slope_q: float
    slope_trace: float
    pairwise_u: list[float]
    pairwise_q: list[float]
    pairwise_trace: list[float]


def convergence_rates(table: ConvergenceTable) -> RateSummary:
    """Observed convergence slopes of a table.

    Coarse rows oscillate before the asymptotic regime sets in, so the
    headline slope is fitted to the finest three rows only.
    """
    if len(table.rows) < 3:
        raise ValueError("need at least 3 rows to measure convergence rates")
    log_h = np.log([r.h for r in table.rows[-3:]])

    def slope(kind: str) -> float:
        return float(np.polyfit(log_h, np.log(table.errors(kind)[-3:]), 1)[0])

    return RateSummary(
        slope_u=slope("u"),
        slope_q=slope("q"),
        slope_trace=slope("trace"),
        pairwise_u=table.pairwise_rates("u"),
        pairwise_q=table.pairwise_rates("q"),
        pairwise_trace=table.pairwise_rates("trace"),
    )


def _face_points(mesh: Mesh, face: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Physical points (F, nq, 2) and lengths (F,) of one local face slot."""
    a = mesh.vertices[mesh.triangles[:, face]]
    b = mesh.vertices[mesh.triangles[:, (face + 1) % 3]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    return pts, np.linalg.norm(b - a, axis=1)


def _uhat_on_faces(
    mesh: Mesh, cfg: ProblemConfig, uhat: np.ndarray, face: int, t: np.ndarray
) -> np.ndarray:
    """Trace unknown evaluated on one local face slot of every element, (F, nq)."""
    m = cfg.p + 1
    dof_map = build_dof_map(mesh, cfg.p)
    coeff = uhat[dof_map.elem_dofs[:, face * m : (face + 1) * m]]
    basis = EdgeBasis(cfg.p)
    plus = coeff @ basis.eval(t).T
    minus = coeff @ basis.eval(1.0 - t).T
    flags = mesh.elem_edge_orient[:, face]
    lengths = np.linalg.norm(
        mesh.vertices[mesh.triangles[:, (face + 1) % 3]] - mesh.vertices[mesh.triangles[:, face]],
        axis=1,
    )
    return np.where((flags == 1)[:, None], plus, minus) / np.sqrt(lengths)[:, None]


def compute_errors(
    solution: Solution,
    exact: ExactSolution,
    mesh: Mesh,
    cfg: ProblemConfig,
    seconds: float = float("nan"),
) -> ErrorReport:
    """L2 errors of (u_h, q_h) and the broken trace error of uhat."""
    n = TriangleBasis(cfg.p).dim
    e_u_sq = 0.0
    e_q_sq = 0.0
    for ids, geom, rule, phi, _ in _error_batches(mesh, cfg):
        scale = 1.0 / math.sqrt(geom.det)
        v0 = mesh.vertices[mesh.triangles[ids, 0]]
        phys = (v0[:, None, :] + rule.points @ geom.jacobian.T).reshape(-1, 2)
        du = scale * (solution.U[ids] @ phi.T) - exact.u(phys).reshape(len(ids), -1)
        qe = exact.q(phys).reshape(len(ids), -1, 2)
        dq1 = scale * (solution.Q[ids, :n] @ phi.T) - qe[:, :, 0]
        dq2 = scale * (solution.Q[ids, n:] @ phi.T) - qe[:, :, 1]
        e_u_sq += geom.det * float((np.abs(du) ** 2 @ rule.weights).sum())
        e_q_sq += geom.det * float(((np.abs(dq1) ** 2 + np.abs(dq2) ** 2) @ rule.weights).sum())

    degree = cfg.data_quad_degree
    if degree is None:
        degree = data_quadrature_degree(cfg.p, cfg.kappa, mesh.h_global)
    rule = quadrature_rule("edge", degree)
    e_t_sq = 0.0
    for face in range(3):
        pts, lengths = _face_points(mesh, face, rule.points)
        diff = exact.u(pts.reshape(-1, 2)).reshape(mesh.n_elements, -1)
        diff -= _uhat_on_faces(mesh, cfg, solution.uhat, face, rule.points)
        e_t_sq += float(lengths @ (np.abs(diff) ** 2 @ rule.weights))

    e_u = math.sqrt(e_u_sq)
    e_q = math.sqrt(e_q_sq)
    return ErrorReport(
        kappa=cfg.kappa,
        p=cfg.p,
        n=mesh.n if mesh.n is not None else -1,
        h=mesh.h_global,
        dofs=(cfg.p + 1) * mesh.n_edges,
        e_u=e_u,
        e_q=e_q,
        e_q_scaled=cfg.kappa * e_q,
        e_trace=math.sqrt(e_t_sq),
        seconds=seconds,
    )


@dataclass(frozen=True)
class EnergyBalance:
    """Both sides of the discrete energy identity and derived quantities."""

    lhs: complex
    rhs: complex
    norm_u: float
    norm_q: float
    trace_jump_sq: float  # tau || u_h - uhat ||^2 over all element boundaries
    uhat_boundary_sq: float
    residual_re: float
    residual_im: float


def energy_balance(
    solution: Solution,
    f: Callable,
    g: Callable,
    mesh: Mesh,
    cfg: ProblemConfig,
) -> EnergyBalance:
    """Evaluate the discrete energy identity for a computed solution.

    Volume norms come from coefficient sums (the bases are orthonormal),
    face terms from the 2p assembly rule, and the right-hand side pairs
    the solution with the same load vectors the solve used, so the
    identity holds to solver precision.
    """
    n = TriangleBasis(cfg.p).dim
    m = cfg.p + 1
    norm_u_sq = float(np.sum(np.abs(solution.U) ** 2))
    norm_q_sq = float(np.sum(np.abs(solution.Q) ** 2))

    face_rule = quadrature_rule("edge", 2 * cfg.p)
    basis = TriangleBasis(cfg.p)
    edge_basis = EdgeBasis(cfg.p)
    dof_map = build_dof_map(mesh, cfg.p)
    jump_sq = 0.0
    for ids, geom, _, _, _ in _error_batches(mesh, cfg):
        scale = 1.0 / math.sqrt(geom.det)
        for face in range(3):
            phi_f = basis.eval(reference_face_points(face, face_rule.points))
            uh = scale * (solution.U[ids] @ phi_f.T)
            t = face_rule.points if geom.edge_orient[face] == 1 else 1.0 - face_rule.points
            psi = edge_basis.eval(t) / math.sqrt(geom.face_lengths[face])
            lam = solution.uhat[dof_map.elem_dofs[ids, face * m : (face + 1) * m]] @ psi.T
            jump_sq += geom.face_lengths[face] * float(
                (np.abs(uh - lam) ** 2 @ face_rule.weights).sum()
            )

    bd_dofs = (m * np.flatnonzero(mesh.boundary_flags)[:, None] + np.arange(m)).ravel()
    uhat_bd_sq = float(np.sum(np.abs(solution.uhat[bd_dofs]) ** 2))

    f_loads = volume_loads(mesh, cfg, f)
    g_loads = boundary_loads(mesh, cfg, g)
    rhs = complex(np.sum(f_loads * np.conj(solution.U)) + np.dot(g_loads, np.conj(solution.uhat)))
    lhs = 1j * cfg.kappa * (norm_u_sq - norm_q_sq) + cfg.tau * jump_sq + uhat_bd_sq

    def rel(a: float, b: float) -> float:
        scale = max(abs(a), abs(b))
        return abs(a - b) / scale if scale > 0.0 else 0.0

    return EnergyBalance(
        lhs=lhs,
        rhs=rhs,
        norm_u=math.sqrt(norm_u_sq),
        norm_q=math.sqrt(norm_q_sq),
        trace_jump_sq=cfg.tau * jump_sq,
        uhat_boundary_sq=uhat_bd_sq,
        residual_re=rel(lhs.real, rhs.real),
        residual_im=rel(lhs.imag, rhs.imag),
    )


def energy_identity_residual(
    solution: Solution, f: Callable, g: Callable, mesh: Mesh, cfg: ProblemConfig
) -> tuple[float, float]:
    """Relative residuals (real part, imaginary part) of the energy identity."""
    balance = energy_balance(solution, f, g, mesh, cfg)
    return balance.residual_re, balance.residual_im


def data_norms(mesh: Mesh, cfg: ProblemConfig, f: Callable, g: Callable) -> tuple[float, float]:
    """L2 norms of the source over the domain and of g over the boundary."""
    f_sq = 0.0
    for ids, geom, rule, _, _ in _error_batches(mesh, cfg):
        v0 = mesh.vertices[mesh.triangles[ids, 0]]
        phys = (v0[:, None, :] + rule.points @ geom.jacobian.T).reshape(-1, 2)
        values = np.abs(np.asarray(f(phys), dtype=complex)).reshape(len(ids), -1) ** 2
        f_sq += geom.det * float((values @ rule.weights).sum())

    degree = cfg.data_quad_degree
    if degree is None:
        degree = data_quadrature_degree(cfg.p, cfg.kappa, mesh.h_global)
    rule = quadrature_rule("edge", degree)
    g_sq = 0.0
    for edge in np.flatnonzero(mesh.boundary_flags):
        lo, hi = mesh.edges[edge]
        a, b = mesh.vertices[lo], mesh.vertices[hi]
        length = float(np.linalg.norm(b - a))
        elem, face = mesh.edge_to_elements[edge, 0]
        normal = mesh_entities(mesh, int(elem)).normals[int(face)]
        pts = a + rule.points[:, None] * (b - a)
        values = np.abs(np.asarray(g(pts, np.tile(normal, (rule.n_points, 1))), dtype=complex)) ** 2
        g_sq += length * float(values @ rule.weights)
    return math.sqrt(f_sq), math.sqrt(g_sq)


def stability_ratio(norm_u: float, f_norm: float, g_norm: float, cfg: ProblemConfig, h: float) -> float:
    """||u_h|| over its wave-number-explicit stability bound.

    The denominator is (1 + kappa^3 h^2 / p^2) ||f|| +
    (1 + kappa^(3/2) h / p) ||g||; boundedness of the ratio across the
    test matrix is a regression guard on the solver's stability.
    """
    kappa, p = cfg.kappa, cfg.p
    denom = (1.0 + kappa**3 * h**2 / p**2) * f_norm + (1.0 + kappa**1.5 * h / p) * g_norm
    return norm_u / denom if denom > 0.0 else 0.0


@dataclass(frozen=True)
class CaseResult:
    """Everything measured for one benchmark solve."""

    report: ErrorReport
    solution: Solution
    info: SolveInfo
    balance: EnergyBalance
    stability: float


def run_benchmark_case(
    kappa: float,
    p: int,
    n: int,
    tau_rule: str = "p/(kappa*h)",
    data_quad_degree: int | None = None,
    check: bool = True,
) -> CaseResult:
    """Solve the benchmark problem on the structured n x n mesh.

    With ``check=True`` (the default pipeline behavior) the computable
    energy inequality  tau ||u_h - uhat||^2 <= ||f|| ||u_h|| + ||g||^2
    is asserted after the solve.
    """
    mesh = build_structured_mesh(n)
    cfg = ProblemConfig.for_mesh(
        kappa, p, mesh, tau_rule=tau_rule, data_quad_degree=data_quad_degree
    )
    exact, data = benchmark_problem(kappa)
    t0 = time.perf_counter()
    solution, info = solve_helmholtz(mesh, cfg, data.f, data.g)
    balance = energy_balance(solution, data.f, data.g, mesh, cfg)
    f_norm, g_norm = data_norms(mesh, cfg, data.f, data.g)
    if check:
        bound = f_norm * balance.norm_u + g_norm**2
        if balance.trace_jump_sq > bound * (1.0 + 1e-9) + 1e-300:
            raise RuntimeError(
                f"energy inequality violated: {balance.trace_jump_sq!r} > {bound!r}"
            )
    report = compute_errors(
        solution, exact, mesh, cfg, seconds=time.perf_counter() - t0
    )
    stability = stability_ratio(balance.norm_u, f_norm, g_norm, cfg, mesh.h_global)
    return CaseResult(
        report=report, solution=solution, info=info, balance=balance, stability=stability
    )


def format_float(value: float) -> str:
    """Lossless decimal rendering used in every CSV and report."""
    return f"{value:.17g}"


def write_convergence_csv(path: str, table: ConvergenceTable, config_lines: list[str]) -> None:
    """Write a convergence table with pairwise rates and a config-echo header."""
    columns = [
        "kappa", "p", "n", "h", "dofs",
        "e_u", "e_q", "e_q_scaled", "e_trace",
        "rate_u", "rate_q", "rate_trace", "seconds",
    ]
    rates = {
        kind: [""] + [format_float(r) for r in table.pairwise_rates(kind)]
        if len(table.rows) > 1
        else [""] * len(table.rows)
        for kind in ("u", "q", "trace")
    }
    with open(path, "w", encoding="utf-8") as fh:
        for line in config_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for k, r in enumerate(table.rows):
            row = [
                format_float(r.kappa), str(r.p), str(r.n), format_float(r.h), str(r.dofs),
                format_float(r.e_u), format_float(r.e_q), format_float(r.e_q_scaled),
                format_float(r.e_trace),
                rates["u"][k], rates["q"][k], rates["trace"][k],
                format_float(r.seconds),
            ]
            fh.write(",".join(row) + "\n")
