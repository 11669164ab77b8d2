"""Continuous Lagrange spaces P1/P2 on triangle meshes.

Reference element is the unit triangle with vertices (0,0), (1,0), (0,1);
barycentric coordinates are (1-x-y, x, y).  Scalar DOFs are ordered
vertices first, then edge midpoints (P2).  Vector spaces (components=2)
use a block layout: all x-component DOFs, then all y-component DOFs.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


class SpaceError(ValueError):
    """Unsupported degree or inconsistent space usage."""


# -- quadrature ---------------------------------------------------------------


class QuadRule:
    """Quadrature on the reference triangle in barycentric coordinates."""

    def __init__(self, bary, weights, exactness):
        self.bary = np.asarray(bary, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.exactness = exactness

    @property
    def npoints(self):
        return len(self.weights)

    def xy(self):
        return self.bary[:, 1:]


def _duffy_rule(degree):
    """Collapsed Gauss product rule, exact for total degree <= degree."""
    nu = (degree + 3) // 2
    nv = (degree + 2) // 2
    xu, wu = leggauss(nu)
    xv, wv = leggauss(nv)
    # map [-1,1] -> [0,1]
    xu = 0.5 * (xu + 1.0)
    wu = 0.5 * wu
    xv = 0.5 * (xv + 1.0)
    wv = 0.5 * wv
    pts = []
    wts = []
    for u, cu in zip(xu, wu):
        for v, cv in zip(xv, wv):
            x = u
            y = v * (1.0 - u)
            pts.append((1.0 - x - y, x, y))
            wts.append(cu * cv * (1.0 - u))
    return np.array(pts), np.array(wts)


def quadrature_rule(exactness):
    """Positive-weight rule integrating polynomials up to `exactness` exactly."""
    if not 1 <= exactness <= 8:
        raise SpaceError(f"quadrature exactness {exactness} outside supported range 1..8")
    if exactness == 1:
        bary = np.array([[1 / 3, 1 / 3, 1 / 3]])
        w = np.array([0.5])
    elif exactness == 2:
        bary = np.array(
            [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
        )
        w = np.full(3, 1 / 6)
    else:
        bary, w = _duffy_rule(exactness)
    return QuadRule(bary, w, exactness)


_GAUSS_1D = {}


def gauss_segment(exactness):
    """Gauss points/weights on [0,1] exact to the given polynomial degree."""
    n = max(1, (exactness + 2) // 2)
    if n not in _GAUSS_1D:
        x, w = leggauss(n)
        _GAUSS_1D[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_1D[n]


# -- reference bases -----------------------------------------------------------


def eval_basis(k, bary):
    """Values and reference-coordinate gradients of the P_k basis.

    bary: (np, 3) barycentric points.  Returns (values (np, nloc),
    gradients (np, nloc, 2)) with gradients w.r.t. reference (x, y).
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    npt = len(bary)
    # reference gradients of barycentric coordinates
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if k == 1:
        vals = np.stack([l0, l1, l2], axis=1)
        grads = np.broadcast_to(dl, (npt, 3, 2)).copy()
        return vals, grads
    if k == 2:
        lam = [l0, l1, l2]
        vals = np.empty((npt, 6))
        grads = np.empty((npt, 6, 2))
        for i in range(3):
            vals[:, i] = lam[i] * (2 * lam[i] - 1)
            grads[:, i] = (4 * lam[i] - 1)[:, None] * dl[i]
        for j in range(3):  # edge j: midpoint of (j+1, j+2)
            a, b = (j + 1) % 3, (j + 2) % 3
            vals[:, 3 + j] = 4 * lam[a] * lam[b]
            grads[:, 3 + j] = 4 * (lam[a][:, None] * dl[b] + lam[b][:, None] * dl[a])
        return vals, grads
    raise SpaceError(f"unsupported degree {k}; only k in {{1, 2}}")


def reference_hessians(k):
    """Constant reference Hessians of the P_k basis, shape (nloc, 2, 2)."""
    if k == 1:
        return np.zeros((3, 2, 2))
    if k == 2:
        dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        H = np.empty((6, 2, 2))
        for i in range(3):
            H[i] = 4 * np.outer(dl[i], dl[i])
        for j in range(3):
            a, b = (j + 1) % 3, (j + 2) % 3
            H[3 + j] = 4 * (np.outer(dl[a], dl[b]) + np.outer(dl[b], dl[a]))
        return H
    raise SpaceError(f"unsupported degree {k}")


def lagrange_nodes(k):
    """Barycentric coordinates of the local P_k nodes (matching DOF order)."""
    if k == 0:
        return np.array([[1 / 3, 1 / 3, 1 / 3]])
    if k == 1:
        return np.eye(3)
    if k == 2:
        verts = np.eye(3)
        mids = np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
        return np.concatenate([verts, mids], axis=0)
    raise SpaceError(f"unsupported degree {k}")


# -- global spaces --------------------------------------------------------------


class FeSpace:
    """Continuous Lagrange space of degree k with 1 or 2 components."""

    def __init__(self, mesh, degree, components=1):
        if degree not in (1, 2):
            raise SpaceError(f"unsupported degree {degree}; only k in {{1, 2}}")
        if components not in (1, 2):
            raise SpaceError("components must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.components = components

        nv, ne, nt = mesh.num_vertices, mesh.num_edges, mesh.num_triangles
        self.num_scalar = nv + (degree - 1) * ne
        self.dof_count = components * self.num_scalar

        if degree == 1:
            cell_scalar = mesh.triangles.copy()
            pts = mesh.vertices.copy()
        else:
            cell_scalar = np.concatenate(
                [mesh.triangles, nv + mesh.tri_to_edges], axis=1
            )
            mids = 0.5 * (
                mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
            )
            pts = np.concatenate([mesh.vertices, mids], axis=0)
        self.cell_scalar_dofs = cell_scalar
        self.scalar_points = pts
        if components == 1:
            self.cell_dofs = cell_scalar
            self.dof_points = pts
        else:
            self.cell_dofs = np.concatenate(
                [cell_scalar, cell_scalar + self.num_scalar], axis=1
            )
            self.dof_points = np.concatenate([pts, pts], axis=0)

        self._boundary_scalar = {}

    def local_size(self):
        return (3 * self.degree) * self.components

    def boundary_scalar_dofs(self, tag=None):
        """Scalar DOF indices sitting on edges of the given tag (or any tag)."""
        key = tag
        if key not in self._boundary_scalar:
            mesh = self.mesh
            eids = mesh.boundary_edges(tag)
            dofs = set()
            for e in eids:
                a, b = mesh.edges[e]
                dofs.add(int(a))
                dofs.add(int(b))
                if self.degree == 2:
                    dofs.add(mesh.num_vertices + int(e))
            self._boundary_scalar[key] = np.array(sorted(dofs), dtype=np.int64)
        return self._boundary_scalar[key]

    def boundary_dofs(self, tag=None):
        """Global DOF indices on the boundary (all components)."""
        s = self.boundary_scalar_dofs(tag)
        if self.components == 1:
            return s
        return np.concatenate([s, s + self.num_scalar])

    def edge_scalar_dofs(self, eid):
        """Scalar DOFs supported on edge eid, endpoint order matching mesh.edges."""
        a, b = self.mesh.edges[eid]
        if self.degree == 1:
            return np.array([a, b], dtype=np.int64)
        return np.array([a, b, self.mesh.num_vertices + eid], dtype=np.int64)


def build_space(mesh, k, components=1):
    return FeSpace(mesh, k, components)


class DiscreteField:
    """Coefficient vector bound to a finite element space."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.dof_count,):
            raise SpaceError(
                f"coefficient length {coeffs.shape} does not match dof_count {space.dof_count}"
            )
        if not np.isfinite(coeffs).all():
            raise SpaceError("non-finite coefficient")
        self.space = space
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, space):
        return cls(space, np.zeros(space.dof_count))

    def _local_coeffs(self, cells):
        sp = self.space
        loc = self.coeffs[sp.cell_scalar_dofs[cells]]  # (nc, nloc)
        if sp.components == 1:
            return loc
        locy = self.coeffs[sp.cell_scalar_dofs[cells] + sp.num_scalar]
        return np.stack([loc, locy], axis=-1)  # (nc, nloc, 2)

    def eval_cells(self, cells, bary):
        """Values at barycentric points: (nc, np) scalar or (nc, np, 2)."""
        vals, _ = eval_basis(self.space.degree, bary)
        loc = self._local_coeffs(cells)
        if self.space.components == 1:
            return np.einsum("pl,nl->np", vals, loc)
        return np.einsum("pl,nlc->npc", vals, loc)

    def grad_cells(self, cells, bary):
        """Physical gradients: (nc, np, 2) scalar or (nc, np, 2comp, 2dx)."""
        _, gref = eval_basis(self.space.degree, bary)
        _, _, invJT = self.space.mesh.jacobians()
        g = np.einsum("nde,ple->npld", invJT[cells], gref)  # (nc, np, nloc, 2)
        loc = self._local_coeffs(cells)
        if self.space.components == 1:
            return np.einsum("npld,nl->npd", g, loc)
        return np.einsum("npld,nlc->npcd", g, loc)

    def values_on_cells(self, mesh, cells, bary, phys=None):
        if mesh is not self.space.mesh:
            raise SpaceError("field lives on a different mesh")
        return self.eval_cells(cells, bary)

    def gradients_on_cells(self, mesh, cells, bary, phys=None):
        if mesh is not self.space.mesh:
            raise SpaceError("field lives on a different mesh")
        return self.grad_cells(cells, bary)

    def eval_cells_varying(self, cells, bary):
        """Values at per-cell point sets; bary has shape (nc, np, 3)."""
        nc, npt, _ = bary.shape
        vals, _ = eval_basis(self.space.degree, bary.reshape(-1, 3))
        vals = vals.reshape(nc, npt, -1)
        loc = self._local_coeffs(cells)
        if self.space.components == 1:
            return np.einsum("npl,nl->np", vals, loc)
        return np.einsum("npl,nlc->npc", vals, loc)

    def grad_cells_varying(self, cells, bary):
        nc, npt, _ = bary.shape
        _, gref = eval_basis(self.space.degree, bary.reshape(-1, 3))
        gref = gref.reshape(nc, npt, -1, 2)
        _, _, invJT = self.space.mesh.jacobians()
        g = np.einsum("nde,nple->npld", invJT[cells], gref)
        loc = self._local_coeffs(cells)
        if self.space.components == 1:
            return np.einsum("npld,nl->npd", g, loc)
        return np.einsum("npld,nlc->npcd", g, loc)


class ScaledField:
    """Scalar multiple of a cellwise-evaluable field (used for f = sigma*beta)."""

    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)

    def values_on_cells(self, mesh, cells, bary, phys=None):
        return self.factor * self.base.values_on_cells(mesh, cells, bary, phys)

    def gradients_on_cells(self, mesh, cells, bary, phys=None):
        return self.factor * self.base.gradients_on_cells(mesh, cells, bary, phys)

    def eval_cells_varying(self, cells, bary):
        return self.factor * self.base.eval_cells_varying(cells, bary)


def eval_field(field, mesh, cells, bary, phys=None):
    """Evaluate a data field on cells: DiscreteField fast path or callable."""
    if hasattr(field, "values_on_cells"):
        return field.values_on_cells(mesh, cells, bary, phys)
    if phys is None:
        phys = mesh.map_points(cells, bary)
    flat = phys.reshape(-1, 2)
    out = np.asarray(field(flat), dtype=float)
    if out.ndim == 1:
        return out.reshape(phys.shape[:2])
    return out.reshape(phys.shape[:2] + (out.shape[-1],))


def interpolate(fun, space):
    """Nodal interpolant: sample fun at the DOF points."""
    pts = space.scalar_points
    out = np.asarray(fun(pts), dtype=float)
    if space.components == 1:
        if out.shape != (len(pts),):
            raise SpaceError("function must return one value per point")
        coeffs = out
    else:
        if out.shape != (len(pts), 2):
            raise SpaceError("function must return a 2-vector per point")
        coeffs = np.concatenate([out[:, 0], out[:, 1]])
    if not np.isfinite(coeffs).all():
        raise SpaceError("non-finite sample in interpolation")
    return DiscreteField(space, coeffs)
