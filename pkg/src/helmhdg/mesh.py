"""Structured triangulations of the square domain with full connectivity.

The solver works on shape-regular triangle meshes of the centered unit
square ``[-0.5, 0.5]^2``.  `build_structured_mesh(n)` splits an n x n grid
of squares into two triangles each, always along the lower-left to
upper-right diagonal, so repeated runs produce bit-identical meshes and
therefore bit-identical convergence tables.

Edges are oriented globally from the lower vertex index to the higher
one.  Skeleton degrees of freedom live on edges in this global
parametrization; each element records, per face, the global edge id and
whether its local face direction agrees with the global one.  Meshes are
immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Bounds (xmin, ymin, xmax, ymax) of the computational domain.
DOMAIN_BOUNDS = (-0.5, -0.5, 0.5, 0.5)


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with edge connectivity and size metadata.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (F, 3) int array, positively oriented vertex triples
    edges : (E, 2) int array, each row (lo, hi) with lo < hi
    edge_to_elements : (E, 2, 2) int array
        Per edge, up to two (element, local face) incidences; unused slots
        hold -1.
    boundary_flags : (E,) bool array
    h_global : float, max element diameter
    h_per_element : (F,) float array
    elem_edges : (F, 3) int array, global edge id of each local face
    elem_edge_orient : (F, 3) int array, +1 if the local face direction
        (vertex f -> vertex f+1) matches the global edge direction, else -1
    n : subdivisions per side for structured meshes, None otherwise
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_to_elements: np.ndarray
    boundary_flags: np.ndarray
    h_global: float
    h_per_element: np.ndarray
    elem_edges: np.ndarray
    elem_edge_orient: np.ndarray
    n: int | None = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def validate(self) -> None:
        """Check mesh invariants; raises ValueError on any violation."""
        v, e, f = self.n_vertices, self.n_edges, self.n_elements
        if v - e + f != 1:
            raise ValueError(f"Euler relation violated: V-E+F = {v - e + f}")
        n_incident = np.sum(self.edge_to_elements[:, :, 0] >= 0, axis=1)
        if not np.all(np.where(self.boundary_flags, n_incident == 1, n_incident == 2)):
            raise ValueError("edge incidence counts inconsistent with boundary flags")
        areas = _signed_areas(self.vertices, self.triangles)
        if np.any(areas <= 0):
            raise ValueError("negatively oriented or degenerate triangle")
        xmin, ymin, xmax, ymax = DOMAIN_BOUNDS
        domain_area = (xmax - xmin) * (ymax - ymin)
        if abs(areas.sum() - domain_area) > 1e-12 * domain_area:
            raise ValueError(f"element areas sum to {areas.sum()!r}, expected {domain_area!r}")

        corners = self.vertices[self.triangles]  # (F, 3, 2)
        tangents = np.roll(corners, -1, axis=1) - corners
        lengths = np.linalg.norm(tangents, axis=2)
        normals = np.stack([tangents[:, :, 1], -tangents[:, :, 0]], axis=2) / lengths[..., None]
        if np.max(np.abs(np.linalg.norm(normals, axis=2) - 1.0)) > 1e-12:
            raise ValueError("non-unit face normal")
        if np.max(np.abs(np.sum(normals * tangents, axis=2)) / lengths) > 1e-12:
            raise ValueError("normal not orthogonal to face tangent")
        midpoints = corners + 0.5 * tangents
        outward = np.sum(normals * (midpoints - corners.mean(axis=1, keepdims=True)), axis=2)
        if np.any(outward <= 0):
            raise ValueError("face normal points toward the centroid")


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the cross product of stacked 2-d vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * _cross2(p1 - p0, p2 - p0)


def build_structured_mesh(n: int) -> Mesh:
    """Uniform triangulation of [-0.5, 0.5]^2 with n subdivisions per side.

    Each grid square is split along its lower-left to upper-right diagonal
    into two positively oriented triangles, so h_global = sqrt(2)/n.
    """
    if n < 1:
        raise ValueError(f"subdivisions per side must be >= 1, got {n}")

    coords = np.linspace(-0.5, 0.5, n + 1)
    xx, yy = np.meshgrid(coords, coords)  # row j = y index, col i = x index
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (n + 1) + i

    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            triangles[k] = (a, b, c)
            triangles[k + 1] = (a, c, d)
            k += 2

    return _finish_mesh(vertices, triangles, n=n)


def _finish_mesh(vertices: np.ndarray, triangles: np.ndarray, n: int | None) -> Mesh:
    """Derive edge connectivity and size metadata from vertices/triangles."""
    f = triangles.shape[0]
    face_from = triangles
    face_to = np.roll(triangles, -1, axis=1)
    lo = np.minimum(face_from, face_to)
    hi = np.maximum(face_from, face_to)

    pairs = np.column_stack([lo.ravel(), hi.ravel()])
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    n_edges = edges.shape[0]
    elem_edges = inverse.reshape(f, 3).astype(np.int64)
    elem_edge_orient = np.where(face_from == lo, 1, -1).astype(np.int64)

    # Incidences in element-major order: stable sort of the flattened
    # face -> edge map groups the 1-2 faces touching each edge.
    order = np.argsort(elem_edges.ravel(), kind="stable")
    counts = np.bincount(elem_edges.ravel(), minlength=n_edges)
    first = np.zeros(n_edges, dtype=np.int64)
    first[1:] = np.cumsum(counts)[:-1]
    elem_of = order // 3
    face_of = order % 3

    edge_to_elements = np.full((n_edges, 2, 2), -1, dtype=np.int64)
    edge_to_elements[:, 0, 0] = elem_of[first]
    edge_to_elements[:, 0, 1] = face_of[first]
    interior = counts == 2
    edge_to_elements[interior, 1, 0] = elem_of[first[interior] + 1]
    edge_to_elements[interior, 1, 1] = face_of[first[interior] + 1]

    boundary_flags = ~interior
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: an edge touches more than two elements")

    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    side = np.stack(
        [
            np.linalg.norm(p1 - p0, axis=1),
            np.linalg.norm(p2 - p1, axis=1),
            np.linalg.norm(p0 - p2, axis=1),
        ],
        axis=1,
    )
    h_per_element = side.max(axis=1)
    # For structured meshes the mesh size is known in closed form; using it
    # makes h_global(2n) exactly half of h_global(n) in floating point.
    h_global = np.sqrt(2.0) / n if n is not None else float(h_per_element.max())

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_to_elements=edge_to_elements,
        boundary_flags=boundary_flags,
        h_global=h_global,
        h_per_element=h_per_element,
        elem_edges=elem_edges,
        elem_edge_orient=elem_edge_orient,
        n=n,
    )
    mesh.validate()
    return mesh


@dataclass(frozen=True)
class ElementGeometry:
    """Geometry of a single triangle, including its affine reference map.

    The affine map is x = v0 + J xhat with xhat in the reference triangle;
    det J = 2 * area > 0 for positively oriented elements.
    """

    vertices: np.ndarray  # (3, 2)
    area: float
    h: float
    jacobian: np.ndarray  # (2, 2), columns v1-v0 and v2-v0
    det: float
    inv_jt: np.ndarray  # inverse transpose of the Jacobian
    normals: np.ndarray  # (3, 2) outward unit normals per local face
    face_lengths: np.ndarray  # (3,)
    edge_ids: np.ndarray  # (3,) global edge ids, -1 if standalone
    edge_orient: np.ndarray  # (3,) +1/-1 vs global edge direction

    @classmethod
    def from_vertices(
        cls,
        verts: np.ndarray,
        edge_ids: np.ndarray | None = None,
        edge_orient: np.ndarray | None = None,
    ) -> "ElementGeometry":
        verts = np.asarray(verts, dtype=float).reshape(3, 2)
        jac = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
        det = float(np.linalg.det(jac))
        if det <= 1e-14:
            raise ValueError(f"degenerate or negatively oriented element (det J = {det!r})")
        tangents = np.roll(verts, -1, axis=0) - verts
        lengths = np.linalg.norm(tangents, axis=1)
        normals = np.column_stack([tangents[:, 1], -tangents[:, 0]]) / lengths[:, None]
        return cls(
            vertices=verts,
            area=0.5 * det,
            h=float(lengths.max()),
            jacobian=jac,
            det=det,
            inv_jt=np.linalg.inv(jac).T,
            normals=normals,
            face_lengths=lengths,
            edge_ids=np.full(3, -1, dtype=np.int64) if edge_ids is None else np.asarray(edge_ids),
            edge_orient=np.ones(3, dtype=np.int64) if edge_orient is None else np.asarray(edge_orient),
        )

    def map_to_physical(self, ref_points: np.ndarray) -> np.ndarray:
        """Map reference-triangle points (npts, 2) to physical coordinates."""
        ref_points = np.asarray(ref_points, dtype=float).reshape(-1, 2)
        return self.vertices[0] + ref_points @ self.jacobian.T


def mesh_entities(mesh: Mesh, elem: int) -> ElementGeometry:
    """Geometry and connectivity of one element of the mesh."""
    if not (0 <= elem < mesh.n_elements):
        raise IndexError(f"element index {elem} out of range [0, {mesh.n_elements})")
    return ElementGeometry.from_vertices(
        mesh.vertices[mesh.triangles[elem]],
        edge_ids=mesh.elem_edges[elem],
        edge_orient=mesh.elem_edge_orient[elem],
    )


def format_mesh(mesh: Mesh) -> str:
    """Plain-text mesh dump with vertex, triangle, and edge sections."""
    out = [f"vertices {mesh.n_vertices}"]
    for k, (x, y) in enumerate(mesh.vertices):
        out.append(f"{k} {x:.17g} {y:.17g}")
    out.append(f"triangles {mesh.n_elements}")
    for k, (a, b, c) in enumerate(mesh.triangles):
        out.append(f"{k} {a} {b} {c}")
    out.append(f"edges {mesh.n_edges}")
    for k, ((a, b), bd) in enumerate(zip(mesh.edges, mesh.boundary_flags)):
        out.append(f"{k} {a} {b} {int(bd)}")
    return "\n".join(out) + "\n"


def write_mesh(mesh: Mesh, path: str) -> None:
    """Write the plain-text mesh dump to a file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mesh(mesh))
