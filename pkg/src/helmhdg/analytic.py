"""Exact benchmark solution, problem data, Bessel functions, L2 projections.

The benchmark is the Helmholtz problem -Lap(u) - kappa^2 u = ft on the
centered unit square with the impedance condition du/dn + i kappa u = gt,
whose exact solution is radial:

    u(r) = cos(kappa r)/kappa - c * J0(kappa r),
    c    = (cos kappa + i sin kappa) / (kappa (J0(kappa) + i J1(kappa))),

with source ft(r) = sin(kappa r)/r and gt the Robin trace of u.  The
first-order solver consumes the rescaled data f = -i ft / kappa and
g = -i gt / kappa and approximates the flux q = i grad(u) / kappa.

Bessel functions J0 and J1 are evaluated in-house so results are
bit-reproducible and free of special-function dependencies: an extended
precision power series below the crossover at x = 12, and Miller's
downward recurrence (with exact power-of-two rescaling) above it.  Both
branches overlap on [8, 16] and are cross-validated there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import DOMAIN_BOUNDS, ElementGeometry
from .polybasis import EdgeBasis, TriangleBasis, quadrature_rule

#: Crossover between the power-series and downward-recurrence branches.
BESSEL_SERIES_CUTOFF = 12.0
BESSEL_MAX_ARGUMENT = 1e4

_N_SERIES_TERMS = 55
# Series coefficients of J0 (in q = (x/2)^2) and of J1/(x/2), kept in
# extended precision because partial sums near the crossover exceed the
# final value by ~1e5.
_J0_COEF = np.zeros(_N_SERIES_TERMS + 1, dtype=np.longdouble)
_J1_COEF = np.zeros(_N_SERIES_TERMS + 1, dtype=np.longdouble)
_J0_COEF[0] = 1.0
_J1_COEF[0] = 1.0
for _m in range(1, _N_SERIES_TERMS + 1):
    _J0_COEF[_m] = -_J0_COEF[_m - 1] / np.longdouble(_m * _m)
    _J1_COEF[_m] = -_J1_COEF[_m - 1] / np.longdouble(_m * (_m + 1))

_RESCALE_LIMIT = 2.0**512
_RESCALE = 2.0**-512


def _j0j1_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = x.astype(np.longdouble)
    q = 0.25 * z * z
    s0 = np.full_like(q, _J0_COEF[_N_SERIES_TERMS])
    s1 = np.full_like(q, _J1_COEF[_N_SERIES_TERMS])
    for m in range(_N_SERIES_TERMS - 1, -1, -1):
        s0 = s0 * q + _J0_COEF[m]
        s1 = s1 * q + _J1_COEF[m]
    return s0.astype(float), (0.5 * z * s1).astype(float)


def _j0j1_miller(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """J0 and J1 by downward recurrence, normalized by J0 + 2*sum J_{2m} = 1."""
    xmax = float(x.max())
    start = int(math.ceil(xmax + 15.0 * xmax ** (1.0 / 3.0) + 30.0))
    b_hi = np.zeros_like(x)  # b_{k+1}
    b_lo = np.full_like(x, 1e-30)  # b_k
    norm = np.zeros_like(x)
    inv_x = 1.0 / x
    for k in range(start, 0, -1):
        if k % 2 == 0:
            norm += 2.0 * b_lo
        b_hi, b_lo = b_lo, (2.0 * k) * inv_x * b_lo - b_hi
        big = np.abs(b_lo) > _RESCALE_LIMIT
        if np.any(big):
            b_lo[big] *= _RESCALE
            b_hi[big] *= _RESCALE
            norm[big] *= _RESCALE
    norm += b_lo
    return b_lo / norm, b_hi / norm


def _j0j1(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    j0 = np.empty_like(x)
    j1 = np.empty_like(x)
    small = x < BESSEL_SERIES_CUTOFF
    if np.any(small):
        j0[small], j1[small] = _j0j1_series(x[small])
    if np.any(~small):
        j0[~small], j1[~small] = _j0j1_miller(x[~small])
    return j0, j1


def bessel_j(order: int, x) -> np.ndarray | float:
    """Bessel function of the first kind, order 0 or 1, for 0 <= x <= 1e4.

    Absolute accuracy is 1e-12 or better across the supported range.
    """
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order}")
    arr = np.asarray(x, dtype=float)
    if arr.size and (arr.min() < 0.0 or arr.max() > BESSEL_MAX_ARGUMENT):
        raise ValueError(f"argument must lie in [0, {BESSEL_MAX_ARGUMENT:g}]")
    j0, j1 = _j0j1(arr.reshape(-1))
    res = (j0 if order == 0 else j1).reshape(arr.shape)
    return float(res) if np.isscalar(x) or arr.shape == () else res


def _radius(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.hypot(pts[:, 0], pts[:, 1])


class ExactSolution:
    """Radial exact solution of the benchmark problem at wave number kappa."""

    def __init__(self, kappa: float):
        if kappa <= 0:
            raise ValueError("wave number must be positive")
        self.kappa = float(kappa)
        j0k, j1k = _j0j1(np.array([self.kappa]))
        den = complex(j0k[0], j1k[0])
        # J0 and J1 have no common zeros, so the denominator never vanishes.
        assert abs(den) > 0.0, "J0(kappa) + i J1(kappa) vanished"
        self.coef = complex(math.cos(self.kappa), math.sin(self.kappa)) / (self.kappa * den)

    def u(self, points: np.ndarray) -> np.ndarray:
        r = _radius(points)
        j0, _ = _j0j1(self.kappa * r)
        return np.cos(self.kappa * r) / self.kappa - self.coef * j0

    def grad_u(self, points: np.ndarray) -> np.ndarray:
        """Gradient of u, shape (npts, 2); zero at the origin by symmetry."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        r = _radius(pts)
        _, j1 = _j0j1(self.kappa * r)
        du_dr = -np.sin(self.kappa * r) + self.coef * self.kappa * j1
        safe = np.where(r > 0.0, r, 1.0)
        direction = np.where(r[:, None] > 0.0, pts / safe[:, None], 0.0)
        return du_dr[:, None] * direction

    def q(self, points: np.ndarray) -> np.ndarray:
        """Exact flux q = i grad(u) / kappa, shape (npts, 2)."""
        return 1j * self.grad_u(points) / self.kappa


def exact_solution(kappa: float, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convenience evaluator returning (u, grad u, q) at the given points."""
    sol = ExactSolution(kappa)
    return sol.u(points), sol.grad_u(points), sol.q(points)


@dataclass
class DataFunctions:
    """Source and boundary data of the benchmark, raw and rescaled.

    ``f_tilde(x) = sin(kappa r)/r`` extends continuously through r = 0
    with value kappa; near the origin it is evaluated by its power series
    for uniform accuracy.  ``g_tilde = du/dn + i kappa u`` is the Robin
    trace of the exact solution.
    """

    kappa: float
    exact: ExactSolution = field(init=False)

    def __post_init__(self):
        self.exact = ExactSolution(self.kappa)

    def f_tilde(self, points: np.ndarray) -> np.ndarray:
        z = self.kappa * _radius(points)
        small = z < 1e-3
        zs = np.where(small, z, 1.0)
        series = 1.0 - zs * zs / 6.0 * (1.0 - zs * zs / 20.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            direct = np.sin(z) / np.where(small, 1.0, z)
        return self.kappa * np.where(small, series, direct)

    def f(self, points: np.ndarray) -> np.ndarray:
        return -1j * self.f_tilde(points) / self.kappa

    def g_tilde(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        normals = np.asarray(normals, dtype=float).reshape(-1, 2)
        du_dn = np.sum(self.exact.grad_u(points) * normals, axis=1)
        return du_dn + 1j * self.kappa * self.exact.u(points)

    def g(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        return -1j * self.g_tilde(points, normals) / self.kappa


def benchmark_problem(kappa: float) -> tuple[ExactSolution, DataFunctions]:
    """Exact solution and matching data functions of the study problem."""
    return ExactSolution(kappa), DataFunctions(kappa)


def _on_boundary(point: np.ndarray) -> bool:
    xmin, ymin, xmax, ymax = DOMAIN_BOUNDS
    x, y = float(point[0]), float(point[1])
    inside = xmin - 1e-12 <= x <= xmax + 1e-12 and ymin - 1e-12 <= y <= ymax + 1e-12
    on_edge = (
        min(abs(x - xmin), abs(x - xmax)) <= 1e-12 or min(abs(y - ymin), abs(y - ymax)) <= 1e-12
    )
    return inside and on_edge


def source_and_boundary_data(
    kappa: float, point: np.ndarray, normal: np.ndarray | None = None
) -> tuple[complex, complex]:
    """Benchmark data at one point: (f_tilde, f), or (g_tilde, g) on the boundary.

    Passing a normal requests the boundary data and requires the point to
    lie on the domain boundary.
    """
    data = DataFunctions(kappa)
    pt = np.asarray(point, dtype=float).reshape(1, 2)
    if normal is None:
        return complex(data.f_tilde(pt)[0]), complex(data.f(pt)[0])
    if not _on_boundary(pt[0]):
        raise ValueError(f"boundary data requested at interior point {pt[0]}")
    nrm = np.asarray(normal, dtype=float).reshape(1, 2)
    return complex(data.g_tilde(pt, nrm)[0]), complex(data.g(pt, nrm)[0])


def data_quadrature_degree(p: int, kappa: float, h: float) -> int:
    """Exactness degree for data and error integrals on an element of size h.

    2p + 4 plus one unit per resolved oscillation keeps the quadrature
    error of the oscillatory integrands below the discretization error.
    """
    return 2 * p + 4 + int(math.ceil(kappa * h))


def l2_project(
    target: str,
    function: Callable[[np.ndarray], np.ndarray],
    p: int,
    geometry,
    quad_degree: int | None = None,
) -> np.ndarray:
    """L2-orthogonal projection onto the order-p space of an element or edge.

    In the orthonormal bases the coefficients are plain quadrature inner
    products of the function with each basis member.  For ``target ==
    "element"`` the geometry is an `ElementGeometry`; for ``target ==
    "edge"`` it is the pair of endpoints, shape (2, 2), whose order fixes
    the edge parametrization.
    """
    degree = 2 * p + 10 if quad_degree is None else quad_degree
    if target == "element":
        geom: ElementGeometry = geometry
        rule = quadrature_rule("triangle", degree)
        basis = TriangleBasis(p).eval(rule.points)
        values = np.asarray(function(geom.map_to_physical(rule.points)))
        return math.sqrt(geom.det) * (basis.T @ (rule.weights * values))
    if target == "edge":
        ends = np.asarray(geometry, dtype=float).reshape(2, 2)
        length = float(np.linalg.norm(ends[1] - ends[0]))
        rule = quadrature_rule("edge", degree)
        basis = EdgeBasis(p).eval(rule.points)
        pts = ends[0] + rule.points[:, None] * (ends[1] - ends[0])
        values = np.asarray(function(pts))
        return math.sqrt(length) * (basis.T @ (rule.weights * values))
    raise ValueError(f"unknown projection target {target!r}")
