"""Piecewise-uniform Shishkin triangulation of the unit square.

The square is split at ``1 - lambda_x`` and ``1 - lambda_y`` into a coarse
region and three layer regions, each carrying ``N/2 x N/2`` uniform cells.
Every cell is cut by the diagonal from ``(x_{i+1}, y_j)`` to ``(x_i, y_{j+1})``
into a lower-left triangle (K1) and an upper-right triangle (K2).

Numbering conventions (fixed, golden outputs depend on them):

* node ``(i, j)`` has global id ``i + j*(N+1)``;
* triangle ``(i, j, orient)`` has global index ``2*(i + j*N) + orient``;
* macrotriangle of block ``(a, b)`` has index ``2*(a + b*N/2) + upper``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

__all__ = [
    "MeshParams",
    "Orientation",
    "TriangleRef",
    "Subdomain",
    "ShishkinMesh",
    "MacroTriangle",
    "MacroMesh",
    "compute_transition_parameters",
    "build_mesh",
    "classify_triangle",
    "build_macro_mesh",
]


class Orientation(enum.IntEnum):
    K1 = 0  # (x_i, y_j), (x_{i+1}, y_j), (x_i, y_{j+1})
    K2 = 1  # (x_i, y_{j+1}), (x_{i+1}, y_j), (x_{i+1}, y_{j+1})


class Subdomain(enum.IntEnum):
    S = 0
    X = 1
    Y = 2
    XY = 3


class TriangleRef(NamedTuple):
    i: int
    j: int
    orient: Orientation


@dataclass(frozen=True)
class MeshParams:
    N: int
    epsilon: float
    beta1: float
    beta2: float
    rho: float = 2.5

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ConfigurationError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 4 or self.N % 2:
            raise ConfigurationError(f"N must be even and >= 4, got {self.N}")
        for name in ("epsilon", "beta1", "beta2", "rho"):
            value = float(getattr(self, name))
            if not value > 0 or not math.isfinite(value):
                raise ConfigurationError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)

    @property
    def supports_postprocessing(self) -> bool:
        return self.N % 4 == 0


def compute_transition_parameters(params: MeshParams) -> tuple[float, float]:
    """Return ``(lambda_x, lambda_y)``, each ``min(1/2, rho*eps/beta*ln N)``.

    A clamp to 1/2 is legal (the mesh degenerates to a uniform one in that
    direction) but is logged as a warning.
    """
    log_n = math.log(params.N)
    lam_x = params.rho * params.epsilon / params.beta1 * log_n
    lam_y = params.rho * params.epsilon / params.beta2 * log_n
    if lam_x >= 0.5 or lam_y >= 0.5:
        logger.warning(
            "transition parameter clamped to 1/2 (N=%d, eps=%g); mesh is not layer-adapted",
            params.N, params.epsilon,
        )
    return min(0.5, lam_x), min(0.5, lam_y)


def _graded_coordinates(n: int, lam: float) -> np.ndarray:
    half = n // 2
    tau = 1.0 - lam
    coarse = np.arange(half + 1) * tau / half
    fine = tau + np.arange(1, half + 1) * lam / half
    pts = np.concatenate([coarse, fine])
    # exact endpoints and transition point, independent of rounding above
    pts[0], pts[half], pts[n] = 0.0, tau, 1.0
    return pts


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShishkinMesh:
    params: MeshParams
    lambda_x: float
    lambda_y: float
    xs: np.ndarray
    ys: np.ndarray
    triangles: np.ndarray = field(repr=False)  # (2N^2, 3) node ids, counterclockwise
    tri_cells: np.ndarray = field(repr=False)  # (2N^2, 2) cell indices (i, j)
    tri_orient: np.ndarray = field(repr=False)
    tri_subdomain: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** 2

    @property
    def n_triangles(self) -> int:
        return 2 * self.N * self.N

    def node_id(self, i, j):
        return i + j * (self.N + 1)

    def node_index(self, node_id):
        return node_id % (self.N + 1), node_id // (self.N + 1)

    @cached_property
    def node_x(self) -> np.ndarray:
        return _frozen(np.tile(self.xs, self.N + 1))

    @cached_property
    def node_y(self) -> np.ndarray:
        return _frozen(np.repeat(self.ys, self.N + 1))

    @property
    def hx(self) -> np.ndarray:
        return np.diff(self.xs)

    @property
    def hy(self) -> np.ndarray:
        return np.diff(self.ys)

    def boundary_mask(self) -> np.ndarray:
        i, j = self.node_index(np.arange(self.n_nodes))
        return (i == 0) | (i == self.N) | (j == 0) | (j == self.N)

    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask())

    def triangle_index(self, tri: TriangleRef) -> int:
        self._check_ref(tri)
        return 2 * (tri.i + tri.j * self.N) + int(tri.orient)

    def triangle_ref(self, index: int) -> TriangleRef:
        i, j = self.tri_cells[index]
        return TriangleRef(int(i), int(j), Orientation(int(self.tri_orient[index])))

    def vertices(self, tri) -> np.ndarray:
        """(3, 2) vertex coordinates of a triangle (ref or global index)."""
        index = tri if isinstance(tri, (int, np.integer)) else self.triangle_index(tri)
        ids = self.triangles[index]
        return np.column_stack([self.node_x[ids], self.node_y[ids]])

    def triangle_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Vertex coordinates of every triangle, two arrays of shape (2N^2, 3)."""
        i, j = self.node_index(self.triangles)
        return self.xs[i], self.ys[j]

    def triangle_areas(self) -> np.ndarray:
        vx, vy = self.triangle_coordinates()
        return 0.5 * ((vx[:, 1] - vx[:, 0]) * (vy[:, 2] - vy[:, 0])
                      - (vx[:, 2] - vx[:, 0]) * (vy[:, 1] - vy[:, 0]))

    def _check_ref(self, tri: TriangleRef) -> None:
        if not (0 <= tri.i < self.N and 0 <= tri.j < self.N):
            raise IndexError(f"triangle cell ({tri.i}, {tri.j}) outside 0..{self.N - 1}")


def build_mesh(params: MeshParams) -> ShishkinMesh:
    if not isinstance(params, MeshParams):
        raise ConfigurationError("build_mesh expects MeshParams")
    n = params.N
    lam_x, lam_y = compute_transition_parameters(params)
    xs = _graded_coordinates(n, lam_x)
    ys = _graded_coordinates(n, lam_y)

    jj, ii = np.divmod(np.arange(n * n), n)
    nid = lambda i, j: i + j * (n + 1)  # noqa: E731
    k1 = np.stack([nid(ii, jj), nid(ii + 1, jj), nid(ii, jj + 1)], axis=1)
    k2 = np.stack([nid(ii, jj + 1), nid(ii + 1, jj), nid(ii + 1, jj + 1)], axis=1)
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = k1
    triangles[1::2] = k2
    cells = np.repeat(np.stack([ii, jj], axis=1), 2, axis=0)
    orient = np.tile(np.array([0, 1], dtype=np.int8), n * n)
    sub = _subdomain_of_cells(cells[:, 0], cells[:, 1], n)

    return ShishkinMesh(
        params=params,
        lambda_x=lam_x,
        lambda_y=lam_y,
        xs=_frozen(xs),
        ys=_frozen(ys),
        triangles=_frozen(triangles),
        tri_cells=_frozen(cells),
        tri_orient=_frozen(orient),
        tri_subdomain=_frozen(sub),
    )


def _subdomain_of_cells(i, j, n):
    half = n // 2
    return ((np.asarray(i) >= half).astype(np.int8)
            + 2 * (np.asarray(j) >= half).astype(np.int8))


def classify_triangle(mesh: ShishkinMesh, tri: TriangleRef) -> Subdomain:
    mesh._check_ref(tri)
    return Subdomain(int(_subdomain_of_cells(tri.i, tri.j, mesh.N)))


@dataclass(frozen=True)
class MacroTriangle:
    index: int
    subdomain: Subdomain
    fine: tuple[TriangleRef, ...]
    nodes: tuple[int, ...]  # 3 vertices then midpoints of edges v0v1, v1v2, v2v0
    origin: np.ndarray  # affine map x = origin + jacobian @ (s, t)
    jacobian: np.ndarray


@dataclass(frozen=True, eq=False)
class MacroMesh:
    """Coarse mesh of macrotriangles, each the union of four fine triangles.

    ``nodes[m]`` holds six fine-mesh node ids: the three vertices followed by
    the midpoints of edges (v0, v1), (v1, v2), (v2, v0). ``fine[m]`` holds the
    global indices of the four constituent fine triangles and
    ``fine_to_macro`` is its inverse.
    """

    mesh: ShishkinMesh
    nodes: np.ndarray
    fine: np.ndarray
    subdomain: np.ndarray
    fine_to_macro: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, m: int) -> MacroTriangle:
        if not 0 <= m < len(self):
            raise IndexError(m)
        origin, jac = self.affine_maps()
        return MacroTriangle(
            index=m,
            subdomain=Subdomain(int(self.subdomain[m])),
            fine=tuple(self.mesh.triangle_ref(int(t)) for t in self.fine[m]),
            nodes=tuple(int(v) for v in self.nodes[m]),
            origin=origin[m],
            jacobian=jac[m],
        )

    def __iter__(self):
        return (self[m] for m in range(len(self)))

    def affine_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Origins (M, 2) and Jacobians (M, 2, 2) mapping the reference triangle."""
        return self._affine

    @cached_property
    def _affine(self):
        x = self.mesh.node_x[self.nodes[:, :3]]
        y = self.mesh.node_y[self.nodes[:, :3]]
        origin = np.stack([x[:, 0], y[:, 0]], axis=1)
        jac = np.empty((len(self), 2, 2))
        jac[:, 0, 0] = x[:, 1] - x[:, 0]
        jac[:, 0, 1] = x[:, 2] - x[:, 0]
        jac[:, 1, 0] = y[:, 1] - y[:, 0]
        jac[:, 1, 1] = y[:, 2] - y[:, 0]
        return origin, jac


def build_macro_mesh(mesh: ShishkinMesh) -> MacroMesh:
    n = mesh.N
    if n % 4:
        raise ConfigurationError(f"postprocessing needs N divisible by 4, got N={n}")
    half = n // 2
    bb, aa = np.divmod(np.arange(half * half), half)
    i, j = 2 * aa, 2 * bb
    nid = mesh.node_id

    def tri(ci, cj, o):
        return 2 * (ci + cj * n) + o

    lower_nodes = np.stack([
        nid(i, j), nid(i + 2, j), nid(i, j + 2),
        nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1),
    ], axis=1)
    upper_nodes = np.stack([
        nid(i + 2, j), nid(i + 2, j + 2), nid(i, j + 2),
        nid(i + 2, j + 1), nid(i + 1, j + 2), nid(i + 1, j + 1),
    ], axis=1)
    lower_fine = np.stack([tri(i, j, 0), tri(i, j, 1), tri(i + 1, j, 0), tri(i, j + 1, 0)], axis=1)
    upper_fine = np.stack([tri(i + 1, j, 1), tri(i, j + 1, 1), tri(i + 1, j + 1, 0),
                           tri(i + 1, j + 1, 1)], axis=1)

    m = 2 * half * half
    nodes = np.empty((m, 6), dtype=np.int64)
    fine = np.empty((m, 4), dtype=np.int64)
    nodes[0::2], nodes[1::2] = lower_nodes, upper_nodes
    fine[0::2], fine[1::2] = lower_fine, upper_fine
    subdomain = np.repeat(_subdomain_of_cells(i, j, n), 2)

    fine_to_macro = np.full(mesh.n_triangles, -1, dtype=np.int64)
    fine_to_macro[fine.ravel()] = np.repeat(np.arange(m), 4)
    return MacroMesh(
        mesh=mesh,
        nodes=_frozen(nodes),
        fine=_frozen(fine),
        subdomain=_frozen(subdomain),
        fine_to_macro=_frozen(fine_to_macro),
    )
