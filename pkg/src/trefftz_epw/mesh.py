"""2D triangular meshes with the edge connectivity used by skeleton assembly.

A mesh is immutable after construction.  Edges are oriented: each edge
stores the element on its left (the element that traverses it
counterclockwise in the stored endpoint order) and the unit normal pointing
out of that element.  Interior edges also store the element on the right;
boundary edges have ``right = -1``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "MeshFormatError",
    "NonConformingMeshError",
    "OrientationError",
    "build_rect_mesh",
    "load_mesh",
    "save_mesh",
    "element_diameter",
]

NO_ELEMENT = -1


class MeshError(Exception):
    """Base class for mesh construction and I/O failures."""


class MeshFormatError(MeshError):
    """The mesh file could not be parsed."""


class NonConformingMeshError(MeshError):
    """Connectivity is not a conforming triangulation (e.g. hanging node)."""


class OrientationError(MeshError):
    """A triangle is degenerate or not counterclockwise."""


class Mesh:
    """Conforming triangulation with derived edge/skeleton connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex ids
    tri_diameters : (nt,) float array, max pairwise vertex distance
    edge_vertices : (ne, 2) int array, endpoints in the left element's order
    edge_left, edge_right : (ne,) int arrays; right is NO_ELEMENT on boundary
    edge_normal : (ne, 2) float array, unit, outward from the left element
    edge_length : (ne,) float array
    elem_edges : (nt, 3) int array, edge ids of each triangle
    boundary_edges, interior_edges : int arrays of edge ids
    """

    def __init__(self, vertices, triangles):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("vertex coordinates must be finite")
        nv = len(vertices)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
            raise MeshError("triangle vertex id out of range")

        self.vertices = vertices
        self.triangles = triangles
        self._check_orientation()
        self._build_edges()
        self._check_conforming()
        self.tri_diameters = self._diameters()
        for arr in (self.vertices, self.triangles, self.tri_diameters,
                    self.edge_vertices, self.edge_left, self.edge_right,
                    self.edge_normal, self.edge_length, self.elem_edges,
                    self.boundary_edges, self.interior_edges):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------

    def _check_orientation(self):
        v = self.vertices
        t = self.triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) \
            - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        bad = np.nonzero(area2 <= 0.0)[0]
        if bad.size:
            raise OrientationError(
                f"triangle {bad[0]} is degenerate or clockwise "
                f"(signed doubled area {area2[bad[0]]:.3e})")

    def _build_edges(self):
        edge_of = {}
        records = []  # (v0, v1, left) in left-traversal order
        elem_edges = np.empty((len(self.triangles), 3), dtype=np.int64)
        for ti, tri in enumerate(self.triangles):
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                key = (a, b) if a < b else (b, a)
                if key not in edge_of:
                    edge_of[key] = len(records)
                    records.append([a, b, ti, NO_ELEMENT])
                    elem_edges[ti, k] = edge_of[key]
                else:
                    ei = edge_of[key]
                    rec = records[ei]
                    if rec[3] != NO_ELEMENT:
                        raise NonConformingMeshError(
                            f"edge {key} referenced by more than two triangles")
                    if (rec[0], rec[1]) == (a, b):
                        raise NonConformingMeshError(
                            f"edge {key} traversed twice in the same direction "
                            f"(duplicate or overlapping triangles {rec[2]} and {ti})")
                    rec[3] = ti
                    elem_edges[ti, k] = ei

        records = np.asarray(records, dtype=np.int64).reshape(-1, 4)
        self.edge_vertices = np.ascontiguousarray(records[:, 0:2])
        self.edge_left = np.ascontiguousarray(records[:, 2])
        self.edge_right = np.ascontiguousarray(records[:, 3])
        self.elem_edges = elem_edges

        p0 = self.vertices[self.edge_vertices[:, 0]]
        p1 = self.vertices[self.edge_vertices[:, 1]]
        tang = p1 - p0
        self.edge_length = np.hypot(tang[:, 0], tang[:, 1])
        if np.any(self.edge_length == 0.0):
            raise MeshError("zero-length edge")
        # Outward normal for a CCW-traversed edge is the tangent rotated -90deg.
        self.edge_normal = np.column_stack(
            (tang[:, 1], -tang[:, 0])) / self.edge_length[:, None]
        self.boundary_edges = np.nonzero(self.edge_right == NO_ELEMENT)[0]
        self.interior_edges = np.nonzero(self.edge_right != NO_ELEMENT)[0]

    def _check_conforming(self):
        # A hanging node shows up as a vertex lying strictly inside an edge
        # that only one triangle references.
        v = self.vertices
        for ei in self.boundary_edges:
            a = v[self.edge_vertices[ei, 0]]
            b = v[self.edge_vertices[ei, 1]]
            length = self.edge_length[ei]
            tang = (b - a) / length
            rel = v - a
            along = rel @ tang
            perp = np.abs(rel[:, 0] * tang[1] - rel[:, 1] * tang[0])
            tol = 1e-12 * length
            on_open_segment = (perp < tol) & (along > tol) & (along < length - tol)
            if np.any(on_open_segment):
                culprit = int(np.nonzero(on_open_segment)[0][0])
                raise NonConformingMeshError(
                    f"hanging node: vertex {culprit} lies inside edge "
                    f"({self.edge_vertices[ei, 0]}, {self.edge_vertices[ei, 1]})")

    def _diameters(self):
        v = self.vertices
        t = self.triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        dab = np.hypot(*(a - b).T)
        dbc = np.hypot(*(b - c).T)
        dca = np.hypot(*(c - a).T)
        return np.maximum(np.maximum(dab, dbc), dca)

    # -- queries ---------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edge_vertices)

    def triangle_coords(self, elem_id: int) -> np.ndarray:
        """Vertex coordinates of one triangle, shape (3, 2)."""
        return self.vertices[self.triangles[elem_id]]

    def edge_endpoints(self, edge_id: int):
        """Coordinate pair (p0, p1) of an edge in left-traversal order."""
        p = self.vertices[self.edge_vertices[edge_id]]
        return p[0], p[1]

    def outward_normal(self, edge_id: int, elem_id: int) -> np.ndarray:
        """Unit normal of an edge pointing out of the given adjacent element."""
        if self.edge_left[edge_id] == elem_id:
            return self.edge_normal[edge_id]
        if self.edge_right[edge_id] == elem_id:
            return -self.edge_normal[edge_id]
        raise ValueError(f"edge {edge_id} does not belong to element {elem_id}")


def element_diameter(mesh: Mesh, elem_id: int) -> float:
    """Max pairwise vertex distance of a triangle."""
    if not 0 <= elem_id < mesh.num_elements:
        raise IndexError(f"element id {elem_id} out of range")
    return float(mesh.tri_diameters[elem_id])


def build_rect_mesh(lower, upper, nx: int, ny: int, jitter: float = 0.0,
                    seed: int = 0) -> Mesh:
    """Triangulate a rectangle into nx-by-ny cells, each split in two.

    Interior vertices are displaced by ``jitter`` times the local cell size
    (independently per axis, uniform in [-jitter, jitter]) with a seeded
    generator, so repeated calls are reproducible.  Boundary vertices are
    never moved and the rectangle is preserved exactly.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if not np.all(upper > lower):
        raise ValueError(f"degenerate rectangle: lower={lower}, upper={upper}")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    if not 0.0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")

    dx = (upper[0] - lower[0]) / nx
    dy = (upper[1] - lower[1]) / ny
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    verts = np.column_stack((lower[0] + ii.ravel() * dx,
                             lower[1] + jj.ravel() * dy))
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        shifts = rng.uniform(-1.0, 1.0, size=verts.shape)
        interior = ((ii.ravel() > 0) & (ii.ravel() < nx)
                    & (jj.ravel() > 0) & (jj.ravel() < ny))
        verts[interior, 0] += jitter * dx * shifts[interior, 0]
        verts[interior, 1] += jitter * dy * shifts[interior, 1]

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return Mesh(verts, np.asarray(tris, dtype=np.int64))


def save_mesh(mesh: Mesh, path) -> None:
    """Write the ASCII format: `ntv <nv> <nt>`, vertex lines, triangle lines."""
    lines = [f"ntv {mesh.num_vertices} {mesh.num_elements}"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    """Read the ASCII mesh format written by :func:`save_mesh`.

    Lines starting with ``#`` are comments.  Raises
    :class:`MeshFormatError` on malformed input and the connectivity
    errors of :class:`Mesh` on bad topology.
    """
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read()
    tokens_per_line = [ln.split() for ln in raw.splitlines()
                       if ln.strip() and not ln.lstrip().startswith("#")]
    if not tokens_per_line:
        raise MeshFormatError(f"{path}: empty mesh file")
    head = tokens_per_line[0]
    if len(head) != 3 or head[0] != "ntv":
        raise MeshFormatError(f"{path}: expected header 'ntv <nv> <nt>', got {head}")
    try:
        nv, nt = int(head[1]), int(head[2])
    except ValueError as exc:
        raise MeshFormatError(f"{path}: bad header counts") from exc
    if len(tokens_per_line) != 1 + nv + nt:
        raise MeshFormatError(
            f"{path}: expected {1 + nv + nt} data lines, found {len(tokens_per_line)}")
    try:
        verts = np.array([[float(t) for t in ln] for ln in tokens_per_line[1:1 + nv]],
                         dtype=float)
        tris = np.array([[int(t) for t in ln] for ln in tokens_per_line[1 + nv:]],
                        dtype=np.int64)
    except ValueError as exc:
        raise MeshFormatError(f"{path}: malformed vertex or triangle line") from exc
    if nv and verts.shape != (nv, 2):
        raise MeshFormatError(f"{path}: vertex lines must have two coordinates")
    if nt and tris.shape != (nt, 3):
        raise MeshFormatError(f"{path}: triangle lines must have three indices")
    return Mesh(verts, tris)
