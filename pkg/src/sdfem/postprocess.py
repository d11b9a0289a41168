"""Piecewise quadratic interpolation of a linear field on the macromesh.

Each macrotriangle owns six interpolation points that are all fine-mesh
nodes, so the postprocessed field is read straight off the nodal vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import DiscreteField, element_geometry
from .errors import ConfigurationError
from .mesh import MacroMesh, ShishkinMesh
from .quadrature import QuadRule


def _basis(s, t):
    """Quadratic nodal basis on the reference triangle and its (s, t) gradients.

    Order: vertices 0, 1, 2, then midpoints of edges 01, 12, 20.
    Returns arrays of shape (6, ...) and (6, 2, ...).
    """
    l0, l1, l2 = 1.0 - s - t, s, t
    one = np.ones_like(s)
    dl = [(-one, -one), (one, 0 * one), (0 * one, one)]
    ls = [l0, l1, l2]
    phi = [ls[k] * (2 * ls[k] - 1) for k in range(3)]
    dphi = [tuple((4 * ls[k] - 1) * dl[k][c] for c in range(2)) for k in range(3)]
    for a, b in ((0, 1), (1, 2), (2, 0)):
        phi.append(4 * ls[a] * ls[b])
        dphi.append(tuple(4 * (ls[a] * dl[b][c] + ls[b] * dl[a][c]) for c in range(2)))
    return np.array(phi), np.array([np.array(d) for d in dphi])


@dataclass(frozen=True, eq=False)
class QuadraticField:
    macro: MacroMesh
    coeffs: np.ndarray  # (n_macro, 6) nodal values

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def mesh(self) -> ShishkinMesh:
        return self.macro.mesh

    def _eval(self, m, px, py):
        origin, jac = self.macro.affine_maps()
        o, J = origin[m], jac[m]
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        dx, dy = px - o[..., 0], py - o[..., 1]
        s = (J[..., 1, 1] * dx - J[..., 0, 1] * dy) / det
        t = (-J[..., 1, 0] * dx + J[..., 0, 0] * dy) / det
        phi, dphi = _basis(s, t)
        c = np.moveaxis(self.coeffs[m], -1, 0)
        val = np.sum(c * phi, axis=0)
        ds = np.sum(c * dphi[:, 0], axis=0)
        dt = np.sum(c * dphi[:, 1], axis=0)
        # grad_x = J^{-T} grad_st
        gx = (J[..., 1, 1] * ds - J[..., 1, 0] * dt) / det
        gy = (-J[..., 0, 1] * ds + J[..., 0, 0] * dt) / det
        return val, gx, gy

    def eval_reference(self, m, s, t):
        """Value of macrotriangle ``m``'s polynomial at reference coordinates (s, t)."""
        phi, _ = _basis(np.asarray(s, float), np.asarray(t, float))
        return np.sum(np.moveaxis(self.coeffs[m], -1, 0) * phi, axis=0)

    def evaluate_on_triangles(self, rule: QuadRule):
        """Values and gradients at quadrature points of every fine triangle."""
        geo = element_geometry(self.mesh)
        qx, qy = rule.map(geo.vx, geo.vy)
        m = np.broadcast_to(self.macro.fine_to_macro[:, None], qx.shape)
        return self._eval(m, qx, qy)


def postprocess(mesh: ShishkinMesh, macro: MacroMesh, fld: DiscreteField) -> QuadraticField:
    if macro.mesh is not mesh or fld.mesh is not mesh:
        raise ConfigurationError("field, mesh and macromesh must belong together")
    return QuadraticField(macro, np.asarray(fld.values)[macro.nodes].copy())


def locate(macro: MacroMesh, x, y) -> np.ndarray:
    """Index of the macrotriangle containing each point; ties go to the lowest index."""
    mesh = macro.mesh
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)) or not (
            np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("point outside the unit square")
    n, half = mesh.N, mesh.N // 2
    ci = np.clip(np.searchsorted(mesh.xs, x, side="left") - 1, 0, n - 1)
    cj = np.clip(np.searchsorted(mesh.ys, y, side="left") - 1, 0, n - 1)
    a, b = ci // 2, cj // 2
    x0, x2 = mesh.xs[2 * a], mesh.xs[2 * a + 2]
    y0, y2 = mesh.ys[2 * b], mesh.ys[2 * b + 2]
    upper = (x - x0) / (x2 - x0) + (y - y0) / (y2 - y0) > 1.0
    return 2 * (a + b * half) + upper.astype(np.int64)


def eval_quadratic(fld: QuadraticField, x, y, macro_index: Optional[np.ndarray] = None):
    """Value and gradient ``(value, (d/dx, d/dy))`` of the postprocessed field.

    ``macro_index`` forces evaluation of a particular macrotriangle's
    polynomial (used to compare one-sided limits on shared edges).
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    m = locate(fld.macro, x, y) if macro_index is None else np.asarray(macro_index)
    m = np.broadcast_to(m, np.broadcast(x, y).shape)
    val, gx, gy = fld._eval(m, x, y)
    return val, (gx, gy)
