"""Meshes and P1 finite-element assembly.

Two mesh types are provided: a uniform partition of an interval and a
structured right-triangle split of the unit square.  Both expose the same
minimal surface (``points``, ``cells``, ``boundary``) so that assembly and
post-processing code can stay dimension agnostic.

All element integrals are evaluated exactly for piecewise-linear functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TextIO

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    """Invalid mesh construction or degenerate element."""


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Interval mesh with consecutive two-node elements."""

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray

    dim = 1

    @property
    def points(self) -> np.ndarray:
        return self.nodes[:, None]

    @property
    def cells(self) -> np.ndarray:
        return self.elements

    @property
    def boundary(self) -> np.ndarray:
        return self.boundary_nodes

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes[self.elements], axis=1)[:, 0]

    @cached_property
    def measures(self) -> np.ndarray:
        return self.widths

    @cached_property
    def nodal_weights(self) -> np.ndarray:
        """Row sums of the consistent mass matrix, i.e. integrals of the hats."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.elements.ravel(), np.repeat(self.widths / 2.0, 2))
        return w

    @property
    def volume(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    def check(self) -> None:
        if self.nodes.ndim != 1 or len(self.nodes) < 2:
            raise MeshError("a 1D mesh needs at least two nodes")
        if np.any(np.diff(self.nodes) <= 0):
            raise MeshError("nodes must be strictly increasing")
        ends = {int(np.argmin(self.nodes)), int(np.argmax(self.nodes))}
        if set(int(i) for i in self.boundary_nodes) != ends:
            raise MeshError("boundary nodes must be the two endpoints")


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangulation with counterclockwise vertex ordering."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray

    dim = 2

    @property
    def points(self) -> np.ndarray:
        return self.vertices

    @property
    def cells(self) -> np.ndarray:
        return self.triangles

    @property
    def boundary(self) -> np.ndarray:
        return self.boundary_vertices

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def measures(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def nodal_weights(self) -> np.ndarray:
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.triangles.ravel(), np.repeat(self.measures / 3.0, 3))
        return w

    @property
    def volume(self) -> float:
        return float(self.measures.sum())

    def check(self) -> None:
        bad = np.nonzero(self.signed_areas <= 0)[0]
        if len(bad):
            raise MeshError(f"triangle {int(bad[0])} has non-positive signed area")
        if set(int(i) for i in self.boundary_vertices) != set(
            int(i) for i in boundary_from_edges(self.triangles)
        ):
            raise MeshError("boundary vertices do not match the one-sided edges")


Mesh = Mesh1D | Mesh2D


def build_uniform_interval(a: float, b: float, n_elements: int) -> Mesh1D:
    """Uniform mesh of ``[a, b]`` with ``n_elements`` equal cells."""
    if not a < b:
        raise MeshError(f"need a < b, got a={a}, b={b}")
    if int(n_elements) != n_elements or n_elements < 1:
        raise MeshError(f"n_elements must be a positive integer, got {n_elements}")
    n = int(n_elements)
    nodes = a + (b - a) * np.arange(n + 1) / n
    nodes[-1] = b
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    mesh = Mesh1D(nodes, elements, np.array([0, n]))
    mesh.check()
    return mesh


def boundary_from_edges(triangles: np.ndarray) -> np.ndarray:
    """Vertices incident to an edge that belongs to exactly one triangle."""
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1])


def build_uniform_triangulation(nx: int, ny: int) -> Mesh2D:
    """Structured mesh of the unit square, each grid cell cut along its diagonal.

    Gives ``(nx+1)(ny+1)`` vertices and ``2*nx*ny`` congruent right triangles.
    """
    for name, v in (("nx", nx), ("ny", ny)):
        if int(v) != v or v < 1:
            raise MeshError(f"{name} must be a positive integer, got {v}")
    nx, ny = int(nx), int(ny)
    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    mesh = Mesh2D(vertices, triangles, boundary_from_edges(triangles))
    mesh.check()
    return mesh


def nearest_structured_subdivisions(n_elements: int) -> int:
    """Subdivision count ``n`` whose ``2*n*n`` element count is closest to ``n_elements``."""
    n = max(1, int(np.sqrt(n_elements / 2.0)))
    return min((n, n + 1), key=lambda k: abs(2 * k * k - n_elements))


def local_mass(points: np.ndarray) -> np.ndarray:
    """Element mass matrix for a segment (2 points) or triangle (3 points)."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 2:
        L = abs(float(np.ravel(points[1] - points[0])[0]))
        return (L / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
    A = abs(_signed_area(points))
    return (A / 12.0) * (np.ones((3, 3)) + np.eye(3))


def local_stiffness(points: np.ndarray) -> np.ndarray:
    """Element stiffness matrix for a segment or triangle."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 2:
        L = abs(float(np.ravel(points[1] - points[0])[0]))
        if L == 0.0:
            raise MeshError("degenerate segment")
        return (1.0 / L) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    A = _signed_area(points)
    if A == 0.0:
        raise MeshError("degenerate triangle")
    G = basis_gradients(points[None])[0]
    return abs(A) * (G @ G.T)


def _signed_area(p: np.ndarray) -> float:
    e1 = p[1] - p[0]
    e2 = p[2] - p[0]
    return 0.5 * float(e1[0] * e2[1] - e1[1] * e2[0])


def basis_gradients(p: np.ndarray) -> np.ndarray:
    """Gradients of the three hat functions on each triangle, shape ``(n, 3, 2)``."""
    x, y = p[..., 0], p[..., 1]
    twice_area = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (
        y[:, 1] - y[:, 0]
    )
    G = np.empty(p.shape[:1] + (3, 2))
    G[:, 0, 0] = y[:, 1] - y[:, 2]
    G[:, 1, 0] = y[:, 2] - y[:, 0]
    G[:, 2, 0] = y[:, 0] - y[:, 1]
    G[:, 0, 1] = x[:, 2] - x[:, 1]
    G[:, 1, 1] = x[:, 0] - x[:, 2]
    G[:, 2, 1] = x[:, 1] - x[:, 0]
    return G / twice_area[:, None, None]


def element_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Constant gradient of the P1 field ``u`` on every element, shape ``(n_cells, dim)``."""
    u = _as_field(mesh, u)
    if mesh.dim == 1:
        du = np.diff(u[mesh.elements], axis=1)[:, 0]
        return (du / mesh.widths)[:, None]
    G = basis_gradients(mesh.vertices[mesh.triangles])
    return np.einsum("eij,ei->ej", G, u[mesh.triangles])


def _assemble(mesh: Mesh, local: np.ndarray, element_mask=None) -> sp.csr_matrix:
    cells = mesh.cells
    if element_mask is not None:
        cells = cells[element_mask]
        local = local[element_mask]
    k = cells.shape[1]
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    A = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    # bitwise symmetry regardless of duplicate summation order
    return ((A + A.T) * 0.5).tocsr()


def assemble_mass(mesh: Mesh, element_mask: np.ndarray | None = None) -> sp.csr_matrix:
    """Consistent P1 mass matrix, optionally restricted to a subset of elements."""
    meas = mesh.measures
    if mesh.dim == 1:
        ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = meas[:, None, None] * ref[None]
    return _assemble(mesh, local, element_mask)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix (discrete Dirichlet form).

    Raises
    ------
    MeshError
        If any element has zero measure; the message names the element.
    """
    bad = np.nonzero(mesh.measures <= 0)[0]
    if len(bad):
        raise MeshError(f"element {int(bad[0])} is degenerate (zero measure)")
    if mesh.dim == 1:
        ref = np.array([[1.0, -1.0], [-1.0, 1.0]])
        local = (1.0 / mesh.widths)[:, None, None] * ref[None]
    else:
        G = basis_gradients(mesh.vertices[mesh.triangles])
        local = mesh.measures[:, None, None] * np.einsum("eik,ejk->eij", G, G)
    return _assemble(mesh, local)


def integrate(mesh: Mesh, u: np.ndarray) -> float:
    """Exact integral of the P1 field ``u`` over the mesh."""
    u = _as_field(mesh, u)
    return float(mesh.nodal_weights @ u)


def _as_field(mesh: Mesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ValueError(
            f"field has shape {u.shape}, mesh has {mesh.n_nodes} nodes"
        )
    return u


def dump_mesh(mesh: Mesh, fh: TextIO) -> None:
    """Write a plain-text listing: one ``node`` or ``elem`` record per line.

    Intended for debugging only; the format is not kept stable.
    """
    boundary = set(int(i) for i in mesh.boundary)
    for i, p in enumerate(mesh.points):
        coords = " ".join(repr(float(c)) for c in p)
        flag = " b" if i in boundary else ""
        fh.write(f"node {i} {coords}{flag}\n")
    for e, c in enumerate(mesh.cells):
        fh.write(f"elem {e} " + " ".join(str(int(i)) for i in c) + "\n")
