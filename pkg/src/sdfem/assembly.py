"""Streamline-diffusion assembly with linear elements on the Shishkin mesh.

Row ``i`` / column ``j`` of an element matrix is ``a_SD(phi_j, phi_i)``:

    eps (grad phi_j, grad phi_i) + (b.grad phi_j + c phi_j, phi_i)
        + delta_K (b.grad phi_j + c phi_j, b.grad phi_i)

The -eps*Lap term of the residual vanishes for piecewise linears and is not
assembled. Dirichlet nodes are eliminated; the system lives on interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AssemblyError, ConfigurationError
from .linalg import CsrMatrix
from .mesh import ShishkinMesh, Subdomain, TriangleRef, classify_triangle
from .problem import ProblemSpec
from .quadrature import QuadRule, triangle_rule

GALERKIN_DEGREE = 4
RHS_DEGREE = 6


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Nodal values of a continuous piecewise linear function (all (N+1)^2 nodes)."""

    mesh: ShishkinMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} nodal values, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __sub__(self, other: "DiscreteField") -> "DiscreteField":
        if other.mesh is not self.mesh:
            raise ConfigurationError("fields live on different meshes")
        return DiscreteField(self.mesh, self.values - other.values)

    def boundary_max(self) -> float:
        return float(np.max(np.abs(self.values[self.mesh.boundary_mask()])))

    def evaluate_on_triangles(self, rule: QuadRule):
        """Values and gradients at the quadrature points of every fine triangle.

        Returns ``(w, wx, wy)``, each of shape (n_triangles, n_points).
        """
        geo = element_geometry(self.mesh)
        nodal = self.values[self.mesh.triangles]
        w = nodal @ rule.points.T
        wx = np.sum(nodal * geo.gx, axis=1)[:, None]
        wy = np.sum(nodal * geo.gy, axis=1)[:, None]
        shape = w.shape
        return w, np.broadcast_to(wx, shape), np.broadcast_to(wy, shape)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    A: CsrMatrix
    rhs: np.ndarray
    dofs: np.ndarray  # global node id of each unknown
    mesh: ShishkinMesh = field(repr=False)
    c_star: float = 1.0

    @property
    def size(self) -> int:
        return len(self.dofs)

    def to_field(self, x: np.ndarray) -> DiscreteField:
        values = np.zeros(self.mesh.n_nodes)
        values[self.dofs] = x
        return DiscreteField(self.mesh, values)

    def restrict(self, fld: DiscreteField) -> np.ndarray:
        return np.asarray(fld.values)[self.dofs]


@dataclass(frozen=True, eq=False)
class NormMatrices:
    stiffness: CsrMatrix
    mass: CsrMatrix
    streamline: CsrMatrix


@dataclass(frozen=True, eq=False)
class _Geometry:
    vx: np.ndarray
    vy: np.ndarray
    area: np.ndarray
    gx: np.ndarray  # (nt, 3) x-derivatives of the barycentric hats
    gy: np.ndarray


_GEOMETRY_CACHE: "dict[int, tuple[ShishkinMesh, _Geometry]]" = {}


def element_geometry(mesh: ShishkinMesh) -> _Geometry:
    cached = _GEOMETRY_CACHE.get(id(mesh))
    if cached is not None and cached[0] is mesh:
        return cached[1]
    vx, vy = mesh.triangle_coordinates()
    geo = _geometry_from_vertices(vx, vy)
    if len(_GEOMETRY_CACHE) > 8:
        _GEOMETRY_CACHE.clear()
    _GEOMETRY_CACHE[id(mesh)] = (mesh, geo)
    return geo


def _geometry_from_vertices(vx, vy) -> _Geometry:
    det = (vx[:, 1] - vx[:, 0]) * (vy[:, 2] - vy[:, 0]) - (vx[:, 2] - vx[:, 0]) * (vy[:, 1] - vy[:, 0])
    if np.any(np.abs(det) <= 1e-300):
        bad = int(np.flatnonzero(np.abs(det) <= 1e-300)[0])
        raise AssemblyError(f"degenerate triangle (zero area) at element {bad}")
    gx = np.stack([vy[:, 1] - vy[:, 2], vy[:, 2] - vy[:, 0], vy[:, 0] - vy[:, 1]], axis=1) / det[:, None]
    gy = np.stack([vx[:, 2] - vx[:, 1], vx[:, 0] - vx[:, 2], vx[:, 1] - vx[:, 0]], axis=1) / det[:, None]
    return _Geometry(vx, vy, 0.5 * np.abs(det), gx, gy)


def delta_K(mesh: ShishkinMesh, tri: TriangleRef, c_star: float) -> float:
    """Stabilization parameter: c_star/N on the coarse subdomain, 0 in the layers."""
    if classify_triangle(mesh, tri) is Subdomain.S:
        return c_star / mesh.N
    return 0.0


def delta_values(mesh: ShishkinMesh, c_star: float) -> np.ndarray:
    return np.where(mesh.tri_subdomain == Subdomain.S, c_star / mesh.N, 0.0)


def _check_cstar(c_star):
    if not (np.isfinite(c_star) and c_star >= 0):
        raise ConfigurationError(f"c_star must be a non-negative number, got {c_star}")


def _element_blocks(geo: _Geometry, delta, problem: ProblemSpec, quad_gal: QuadRule,
                    quad_rhs: QuadRule):
    """Batched element matrices (nt, 3, 3), loads (nt, 3) and streamline blocks."""
    area = geo.area
    lam = quad_gal.points  # (nq, 3)
    wts = quad_gal.weights
    qx, qy = quad_gal.map(geo.vx, geo.vy)
    b1 = np.broadcast_to(problem.b1(qx, qy), qx.shape)
    b2 = np.broadcast_to(problem.b2(qx, qy), qx.shape)
    c = np.broadcast_to(problem.c(qx, qy), qx.shape)
    # b.grad(phi_k) at each point: (nt, nq, 3)
    bg = b1[:, :, None] * geo.gx[:, None, :] + b2[:, :, None] * geo.gy[:, None, :]
    trial = bg + c[:, :, None] * lam[None, :, :]
    wa = wts[None, :] * area[:, None]  # (nt, nq)

    stiff = area[:, None, None] * (geo.gx[:, :, None] * geo.gx[:, None, :]
                                   + geo.gy[:, :, None] * geo.gy[:, None, :])
    galerkin_lower = np.einsum("tq,qi,tqj->tij", wa, lam, trial)
    stab = delta[:, None, None] * np.einsum("tq,tqi,tqj->tij", wa, bg, trial)
    streamline = delta[:, None, None] * np.einsum("tq,tqi,tqj->tij", wa, bg, bg)
    mass = np.einsum("tq,qi,qj->tij", wa, lam, lam)

    rlam = quad_rhs.points
    rx, ry = quad_rhs.map(geo.vx, geo.vy)
    fq = np.broadcast_to(problem.f(rx, ry), rx.shape)
    rb1 = np.broadcast_to(problem.b1(rx, ry), rx.shape)
    rb2 = np.broadcast_to(problem.b2(rx, ry), rx.shape)
    rwa = quad_rhs.weights[None, :] * area[:, None]
    rbg = rb1[:, :, None] * geo.gx[:, None, :] + rb2[:, :, None] * geo.gy[:, None, :]
    load = np.einsum("tq,tq,qi->ti", rwa, fq, rlam)
    load += delta[:, None] * np.einsum("tq,tq,tqi->ti", rwa, fq, rbg)

    local = problem.epsilon * stiff + galerkin_lower + stab
    return local, load, stiff, mass, streamline


def local_element(tri: TriangleRef, mesh: ShishkinMesh, problem: ProblemSpec, c_star: float,
                  quad_galerkin: Optional[QuadRule] = None, quad_rhs: Optional[QuadRule] = None):
    """Element matrix (3x3) and load (3,) for one fine triangle.

    Local node order is the triangle's vertex order.
    """
    _check_cstar(c_star)
    quad_galerkin = quad_galerkin or triangle_rule(GALERKIN_DEGREE)
    quad_rhs = quad_rhs or triangle_rule(RHS_DEGREE)
    verts = mesh.vertices(tri)
    geo = _geometry_from_vertices(verts[None, :, 0], verts[None, :, 1])
    delta = np.array([delta_K(mesh, tri, c_star)])
    local, load, *_ = _element_blocks(geo, delta, problem, quad_galerkin, quad_rhs)
    return local[0], load[0]


def _scatter(mesh, blocks, dof_of_node, n_dofs):
    tris = mesh.triangles
    rows = np.repeat(tris[:, :, None], 3, axis=2)
    cols = np.repeat(tris[:, None, :], 3, axis=1)
    if dof_of_node is None:
        return CsrMatrix.from_triplets(rows, cols, blocks, (n_dofs, n_dofs))
    r = dof_of_node[rows].ravel()
    c = dof_of_node[cols].ravel()
    keep = (r >= 0) & (c >= 0)
    return CsrMatrix.from_triplets(r[keep], c[keep], blocks.ravel()[keep], (n_dofs, n_dofs))


def assemble_system(mesh: ShishkinMesh, problem: ProblemSpec, c_star: float = 1.0,
                    quad_galerkin: Optional[QuadRule] = None,
                    quad_rhs: Optional[QuadRule] = None) -> LinearSystem:
    _check_cstar(c_star)
    if problem.epsilon != mesh.params.epsilon:
        raise ConfigurationError("mesh and problem use different epsilon")
    quad_galerkin = quad_galerkin or triangle_rule(GALERKIN_DEGREE)
    quad_rhs = quad_rhs or triangle_rule(RHS_DEGREE)
    geo = element_geometry(mesh)
    local, load, *_ = _element_blocks(geo, delta_values(mesh, c_star), problem,
                                      quad_galerkin, quad_rhs)

    dofs = mesh.interior_nodes()
    dof_of_node = np.full(mesh.n_nodes, -1, dtype=np.int64)
    dof_of_node[dofs] = np.arange(len(dofs))
    A = _scatter(mesh, local, dof_of_node, len(dofs))
    rhs_full = np.zeros(mesh.n_nodes)
    # np.add.at accumulates in element order
    np.add.at(rhs_full, mesh.triangles.ravel(), load.ravel())
    return LinearSystem(A=A, rhs=rhs_full[dofs], dofs=dofs, mesh=mesh, c_star=float(c_star))


def assemble_norm_matrices(mesh: ShishkinMesh, problem: ProblemSpec, c_star: float = 1.0,
                           quad: Optional[QuadRule] = None) -> NormMatrices:
    """Unweighted stiffness, mass and delta-weighted streamline matrices on all nodes."""
    _check_cstar(c_star)
    quad = quad or triangle_rule(GALERKIN_DEGREE)
    geo = element_geometry(mesh)
    _, _, stiff, mass, streamline = _element_blocks(
        geo, delta_values(mesh, c_star), problem, quad, triangle_rule(1))
    n = mesh.n_nodes
    return NormMatrices(
        stiffness=_scatter(mesh, stiff, None, n),
        mass=_scatter(mesh, mass, None, n),
        streamline=_scatter(mesh, streamline, None, n),
    )
