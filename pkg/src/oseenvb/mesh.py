"""Conforming triangle meshes.

Provides construction from arrays or MSH-TXT files, structured generators
for rectangles and the L-shaped domain, uniform (red) refinement, and
size-map-driven adaptive refinement based on newest-vertex bisection with
conformity closure, a one-layer safety margin and a guarded Laplacian
smoothing pass.

A mesh is immutable after construction; every refinement returns a new
mesh.  Boundary edges carry a tag in {1, 2} (Gamma_1 / Gamma_2).
"""

from __future__ import annotations

import warnings

import numpy as np

GAMMA1 = 1
GAMMA2 = 2

_BISECT_SAFETY = 200_000_000  # hard cap on bisection work, never hit in practice


class MeshError(ValueError):
    """Invalid mesh data (orientation, conformity, tagging)."""


class MeshParseError(MeshError):
    """MSH-TXT parse failure; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TriMesh:
    """Conforming triangulation with edge adjacency and boundary tags.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise; the refinement edge
        used by adaptive bisection is the (v1, v2) edge (longest edge,
        deterministic tie-break).
    edges : (ne, 2) int array with a canonical orientation: an interior
        edge is oriented as traversed by its lower-indexed triangle, a
        boundary edge as traversed by its only triangle.  The canonical
        normal hence points from the lower- to the higher-indexed
        triangle, outward on the boundary.
    edge_to_tris : (ne, 2) int array, second entry -1 on the boundary.
    tri_to_edges : (nt, 3) int array, edge j opposite local vertex j.
    boundary_tag : (ne,) int array, 0 interior, 1 Gamma_1, 2 Gamma_2.
    h_T, h_e : per-triangle diameters and per-edge lengths.
    """

    def __init__(self, vertices, triangles, boundary_edges, *, _validated=False):
        """Build a mesh from raw arrays.

        boundary_edges is a sequence of (v0, v1, tag) covering exactly the
        single-incidence edges; use :meth:`from_tagger` to derive it.
        """
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        tris = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if tris.size and (tris.min() < 0 or tris.max() >= len(self.vertices)):
            raise MeshError("triangle vertex index out of range")

        areas = _signed_areas(self.vertices, tris)
        bad = np.nonzero(areas <= 0.0)[0]
        if bad.size:
            raise MeshError(
                f"triangle {bad[0]} has non-positive signed area "
                f"({areas[bad[0]]:.3e}); vertices must be counter-clockwise"
            )

        self.triangles = _normalize_refinement_edges(self.vertices, tris)
        self._build_edges()
        self._apply_boundary_tags(boundary_edges)
        if not _validated:
            self._check_conforming()

        self.area = _signed_areas(self.vertices, self.triangles)
        self.h_T = self._diameters()
        self.h_e = np.linalg.norm(
            self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1
        )
        for arr in (self.vertices, self.triangles, self.edges, self.edge_to_tris,
                    self.tri_to_edges, self.boundary_tag, self.area, self.h_T, self.h_e):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_tagger(cls, vertices, triangles, tagger=None):
        """Build a mesh, deriving boundary edges and tagging them.

        tagger maps an edge midpoint (x, y) to 1 or 2; default all Gamma_1.
        """
        mesh = cls(vertices, triangles, boundary_edges=None)
        if tagger is not None:
            verts = mesh.vertices
            tags = mesh.boundary_tag.copy()
            for e in np.nonzero(tags)[0]:
                a, b = mesh.edges[e]
                tag = int(tagger(tuple(0.5 * (verts[a] + verts[b]))))
                if tag not in (GAMMA1, GAMMA2):
                    raise MeshError(f"tagger returned invalid tag {tag}")
                tags[e] = tag
            tags.flags.writeable = False
            mesh.boundary_tag = tags
        return mesh

    def _build_edges(self):
        tris = self.triangles
        nt = len(tris)
        # local edge j is opposite local vertex j, traversed CCW
        directed = np.concatenate(
            [tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=0
        )
        key = np.sort(directed, axis=1)
        uniq, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True
        )
        if counts.max(initial=0) > 2:
            e = uniq[np.argmax(counts)]
            raise MeshError(f"edge ({e[0]}, {e[1]}) shared by more than two triangles")
        ne = len(uniq)
        self.tri_to_edges = inverse.reshape(3, nt).T.copy()

        owner = np.full((ne, 2), -1, dtype=np.int64)
        tri_ids = np.tile(np.arange(nt), 3)
        # lower-indexed incident triangle first
        order = np.argsort(tri_ids, kind="stable")
        for loc, e in zip(order, inverse[order]):
            t = tri_ids[loc]
            if owner[e, 0] == -1:
                owner[e, 0] = t
            elif owner[e, 1] == -1 and owner[e, 0] != t:
                owner[e, 1] = t
        if (owner[:, 0] == -1).any():
            raise MeshError("internal edge bookkeeping failure")
        self.edge_to_tris = owner

        # canonical orientation: as traversed by the first (lower) triangle
        edges = np.empty((ne, 2), dtype=np.int64)
        first_dir = np.empty(ne, dtype=bool)
        first_dir[:] = False
        for loc in order[::-1]:
            e = inverse[loc]
            if tri_ids[loc] == owner[e, 0]:
                edges[e] = directed[loc]
        self.edges = edges

    def _apply_boundary_tags(self, boundary_edges):
        ne = len(self.edges)
        tags = np.zeros(ne, dtype=np.int64)
        is_boundary = self.edge_to_tris[:, 1] == -1
        if boundary_edges is None:
            tags[is_boundary] = GAMMA1
            self.boundary_tag = tags
            return
        lookup = {}
        for i in np.nonzero(is_boundary)[0]:
            a, b = self.edges[i]
            lookup[(min(a, b), max(a, b))] = i
        seen = set()
        for v0, v1, tag in boundary_edges:
            key = (min(v0, v1), max(v0, v1))
            if key not in lookup:
                raise MeshError(f"tagged edge ({v0}, {v1}) is not a boundary edge")
            if tag not in (GAMMA1, GAMMA2):
                raise MeshError(f"invalid boundary tag {tag} on edge ({v0}, {v1})")
            tags[lookup[key]] = tag
            seen.add(key)
        missing = set(lookup) - seen
        if missing:
            a, b = sorted(missing)[0]
            raise MeshError(f"boundary edge ({a}, {b}) has no tag")
        self.boundary_tag = tags

    def _check_conforming(self):
        """Reject hanging vertices: no vertex strictly inside another edge."""
        from scipy.spatial import cKDTree

        boundary = np.nonzero(self.edge_to_tris[:, 1] == -1)[0]
        if not boundary.size:
            return
        a = self.vertices[self.edges[boundary, 0]]
        b = self.vertices[self.edges[boundary, 1]]
        mid = 0.5 * (a + b)
        lens = np.linalg.norm(b - a, axis=1)
        tree = cKDTree(self.vertices)
        hits = tree.query_ball_point(mid, lens / 2 * (1 - 1e-9))
        for k, cand in enumerate(hits):
            for v in cand:
                if v in (self.edges[boundary[k], 0], self.edges[boundary[k], 1]):
                    continue
                ab = b[k] - a[k]
                ap = self.vertices[v] - a[k]
                cross = abs(ab[0] * ap[1] - ab[1] * ap[0])
                if cross <= 1e-12 * lens[k] ** 2:
                    e0, e1 = self.edges[boundary[k]]
                    raise MeshError(
                        f"hanging vertex {v} on edge ({e0}, {e1}): mesh is not conforming"
                    )

    def _diameters(self):
        v = self.vertices
        t = self.triangles
        l0 = np.linalg.norm(v[t[:, 2]] - v[t[:, 1]], axis=1)
        l1 = np.linalg.norm(v[t[:, 0]] - v[t[:, 2]], axis=1)
        l2 = np.linalg.norm(v[t[:, 1]] - v[t[:, 0]], axis=1)
        return np.maximum(np.maximum(l0, l1), l2)

    # -- queries ---------------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def h_max(self):
        return float(self.h_T.max())

    def interior_edges(self):
        return np.nonzero(self.edge_to_tris[:, 1] >= 0)[0]

    def boundary_edges(self, tag=None):
        if tag is None:
            return np.nonzero(self.boundary_tag > 0)[0]
        return np.nonzero(self.boundary_tag == tag)[0]

    def has_tag(self, tag):
        return bool((self.boundary_tag == tag).any())

    def edge_frames(self):
        """Unit normal and tangent per edge, with t_e = (-n2, n1) exactly."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        t = d / np.linalg.norm(d, axis=1)[:, None]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        t_e = np.column_stack([-n[:, 1], n[:, 0]])
        return n, t_e

    def inradii(self):
        v = self.vertices
        t = self.triangles
        l0 = np.linalg.norm(v[t[:, 2]] - v[t[:, 1]], axis=1)
        l1 = np.linalg.norm(v[t[:, 0]] - v[t[:, 2]], axis=1)
        l2 = np.linalg.norm(v[t[:, 1]] - v[t[:, 0]], axis=1)
        return 2.0 * self.area / (l0 + l1 + l2)

    def shape_regularity(self):
        """max over triangles of diameter / inradius."""
        return float((self.h_T / self.inradii()).max())

    def jacobians(self):
        """Affine maps: (nt,2,2) Jacobians, determinants, inverse transposes."""
        cached = getattr(self, "_jac_cache", None)
        if cached is not None:
            return cached
        v = self.vertices
        t = self.triangles
        J = np.empty((len(t), 2, 2))
        J[:, :, 0] = v[t[:, 1]] - v[t[:, 0]]
        J[:, :, 1] = v[t[:, 2]] - v[t[:, 0]]
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJT = np.empty_like(J)
        invJT[:, 0, 0] = J[:, 1, 1]
        invJT[:, 0, 1] = -J[:, 1, 0]
        invJT[:, 1, 0] = -J[:, 0, 1]
        invJT[:, 1, 1] = J[:, 0, 0]
        invJT /= det[:, None, None]
        self._jac_cache = (J, det, invJT)
        return self._jac_cache

    def map_points(self, cells, bary):
        """Physical coordinates of barycentric points on the given cells.

        bary has shape (np, 3); returns (len(cells), np, 2).
        """
        t = self.triangles[cells]
        corners = self.vertices[t]  # (nc, 3, 2)
        return np.einsum("pk,nkd->npd", bary, corners)

    def boundary_vertices(self):
        b = self.boundary_edges()
        return np.unique(self.edges[b].ravel())


# -- element geometry helpers ------------------------------------------------


def _signed_areas(vertices, tris):
    a = vertices[tris[:, 0]]
    b = vertices[tris[:, 1]]
    c = vertices[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _edge_sort_key(vertices, a, b):
    # longest edge wins; ties broken by vertex indices for determinism
    length = float(np.hypot(*(vertices[b] - vertices[a])))
    return (length, min(a, b), max(a, b))


def _normalize_one(vertices, tri):
    keys = [
        _edge_sort_key(vertices, tri[1], tri[2]),
        _edge_sort_key(vertices, tri[2], tri[0]),
        _edge_sort_key(vertices, tri[0], tri[1]),
    ]
    j = max(range(3), key=lambda i: keys[i])
    return tuple(np.roll(tri, -j))


def _normalize_refinement_edges(vertices, tris):
    """Rotate each triangle so the refinement edge is (v1, v2)."""
    v = vertices
    out = tris.copy()
    l0 = np.linalg.norm(v[tris[:, 2]] - v[tris[:, 1]], axis=1)
    l1 = np.linalg.norm(v[tris[:, 0]] - v[tris[:, 2]], axis=1)
    l2 = np.linalg.norm(v[tris[:, 1]] - v[tris[:, 0]], axis=1)
    lens = np.column_stack([l0, l1, l2])
    need_check = np.abs(lens - lens.max(axis=1, keepdims=True)) < 1e-12 * lens.max(axis=1, keepdims=True)
    ambiguous = need_check.sum(axis=1) > 1
    rot = np.argmax(lens, axis=1)
    for i in np.nonzero(ambiguous)[0]:
        out[i] = _normalize_one(v, tris[i])
    clear = ~ambiguous
    for j in (1, 2):
        sel = clear & (rot == j)
        out[sel] = np.roll(tris[sel], -j, axis=1)
    return out


# -- MSH-TXT I/O ---------------------------------------------------------------


def load_mesh(path):
    """Read a mesh from the MSH-TXT format.

    Layout: header ``meshtxt 1``; counts ``nv nt nbe``; nv vertex lines
    ``x y``; nt triangle lines ``v0 v1 v2`` (0-based, CCW); nbe boundary
    edge lines ``v0 v1 tag`` with tag in {1, 2}.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise MeshParseError(lineno, msg)

    if not lines or lines[0].split() != ["meshtxt", "1"]:
        fail(1, "expected header 'meshtxt 1'")
    try:
        nv, nt, nbe = (int(tok) for tok in lines[1].split())
    except (IndexError, ValueError):
        fail(2, "expected counts 'nv nt nbe'")
    if len(lines) < 2 + nv + nt + nbe:
        fail(len(lines), f"file truncated: need {2 + nv + nt + nbe} lines")

    verts = np.empty((nv, 2))
    for i in range(nv):
        lineno = 3 + i
        toks = lines[2 + i].split()
        if len(toks) != 2:
            fail(lineno, "expected 'x y'")
        try:
            verts[i] = (float(toks[0]), float(toks[1]))
        except ValueError:
            fail(lineno, f"bad vertex coordinates {toks!r}")
        if not np.isfinite(verts[i]).all():
            fail(lineno, "non-finite vertex coordinates")

    tris = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        lineno = 3 + nv + i
        toks = lines[2 + nv + i].split()
        if len(toks) != 3:
            fail(lineno, "expected 'v0 v1 v2'")
        try:
            tris[i] = [int(t) for t in toks]
        except ValueError:
            fail(lineno, f"bad triangle indices {toks!r}")

    btags = []
    for i in range(nbe):
        lineno = 3 + nv + nt + i
        toks = lines[2 + nv + nt + i].split()
        if len(toks) != 3:
            fail(lineno, "expected 'v0 v1 tag'")
        try:
            v0, v1, tag = (int(t) for t in toks)
        except ValueError:
            fail(lineno, f"bad boundary edge {toks!r}")
        btags.append((v0, v1, tag))

    return TriMesh(verts, tris, btags)


def save_mesh(mesh, path):
    """Write MSH-TXT with shortest round-trippable decimals."""
    lines = ["meshtxt 1"]
    b = mesh.boundary_edges()
    lines.append(f"{mesh.num_vertices} {mesh.num_triangles} {len(b)}")
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    for t in mesh.triangles:
        lines.append(f"{t[0]} {t[1]} {t[2]}")
    for e in b:
        v0, v1 = mesh.edges[e]
        lines.append(f"{v0} {v1} {mesh.boundary_tag[e]}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


# -- generators ----------------------------------------------------------------


def generate_rect(corners, n, tagger=None):
    """Structured triangulation of a rectangle, two triangles per cell.

    corners are two opposite points; n subdivisions per axis; h_T is the
    cell diagonal.  tagger maps boundary-edge midpoints to {1, 2}.
    """
    (x0, y0), (x1, y1) = corners
    if n < 1:
        raise MeshError("n must be >= 1")
    if x1 <= x0 or y1 <= y0:
        raise MeshError("degenerate rectangle")
    return _grid_mesh(x0, y0, x1, y1, n, n, keep=None, tagger=tagger)


def generate_lshape(n, tagger=None):
    """L-shaped domain (-1,1)^2 minus (0,1)^2, reentrant corner at the origin."""
    if n < 1:
        raise MeshError("n must be >= 1")
    return _grid_mesh(
        -1.0, -1.0, 1.0, 1.0, 2 * n, 2 * n,
        keep=lambda cx, cy: cx < 0 or cy < 0,
        tagger=tagger,
    )


def _grid_mesh(x0, y0, x1, y1, nx, ny, keep, tagger):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    vid = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    verts = []
    tris = []

    def vertex(i, j):
        if vid[i, j] < 0:
            vid[i, j] = len(verts)
            verts.append((xs[i], ys[j]))
        return vid[i, j]

    for i in range(nx):
        for j in range(ny):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if keep is not None and not keep(cx, cy):
                continue
            p00 = vertex(i, j)
            p10 = vertex(i + 1, j)
            p11 = vertex(i + 1, j + 1)
            p01 = vertex(i, j + 1)
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))

    if not tris:
        raise MeshError("empty mesh")
    return TriMesh.from_tagger(np.array(verts), np.array(tris), tagger)


# -- uniform (red) refinement ----------------------------------------------------


def refine_uniform(mesh):
    """Split every triangle into 4 congruent children (red refinement).

    Child vertices are exact edge midpoints, so h_T halves exactly and
    areas are preserved bitwise up to the usual 0.5*cross rounding.
    """
    v = mesh.vertices
    t = mesh.triangles
    e = mesh.edges
    nv = len(v)
    mid = 0.5 * (v[e[:, 0]] + v[e[:, 1]])
    new_verts = np.concatenate([v, mid], axis=0)

    m = mesh.tri_to_edges + nv  # midpoint vid of edge opposite local vertex j
    c0 = np.column_stack([t[:, 0], m[:, 2], m[:, 1]])
    c1 = np.column_stack([t[:, 1], m[:, 0], m[:, 2]])
    c2 = np.column_stack([t[:, 2], m[:, 1], m[:, 0]])
    cc = np.column_stack([m[:, 0], m[:, 1], m[:, 2]])
    new_tris = np.concatenate([c0, c1, c2, cc], axis=0)

    btags = []
    for eid in mesh.boundary_edges():
        a, b = e[eid]
        tag = int(mesh.boundary_tag[eid])
        btags.append((a, nv + eid, tag))
        btags.append((nv + eid, b, tag))
    return TriMesh(new_verts, new_tris, btags, _validated=True)


# -- adaptive refinement ---------------------------------------------------------


class _Refiner:
    """Mutable scratch structure for newest-vertex bisection."""

    def __init__(self, mesh, bounds, shape_bound):
        self.verts = [tuple(p) for p in mesh.vertices]
        self.tris = [tuple(t) for t in mesh.triangles]
        self.alive = [True] * len(self.tris)
        self.bound = list(bounds)           # diameter bound inherited per lineage
        self.gen = [0] * len(self.tris)
        self.shape_bound = shape_bound
        self.btag = {}
        for eid in mesh.boundary_edges():
            a, b = mesh.edges[eid]
            self.btag[_ekey(a, b)] = int(mesh.boundary_tag[eid])
        self.edge2tris = {}
        for i, t in enumerate(self.tris):
            self._register(i, t)
        self.midpoint = {}
        self.any_split = False

    def _register(self, i, t):
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            self.edge2tris.setdefault(_ekey(a, b), set()).add(i)

    def _unregister(self, i, t):
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            s = self.edge2tris[_ekey(a, b)]
            s.discard(i)
            if not s:
                del self.edge2tris[_ekey(a, b)]

    def diameter(self, i):
        p0, p1, p2 = (np.asarray(self.verts[v]) for v in self.tris[i])
        return max(np.hypot(*(p1 - p0)), np.hypot(*(p2 - p1)), np.hypot(*(p0 - p2)))

    def ref_edge(self, i):
        t = self.tris[i]
        return _ekey(t[1], t[2])

    def neighbor_across(self, i, key):
        for j in self.edge2tris.get(key, ()):
            if j != i:
                return j
        return None

    def _midvertex(self, key):
        if key in self.midpoint:
            return self.midpoint[key]
        a, b = key
        pa, pb = self.verts[a], self.verts[b]
        vid = len(self.verts)
        self.verts.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
        self.midpoint[key] = vid
        if key in self.btag:
            tag = self.btag.pop(key)
            self.btag[_ekey(a, vid)] = tag
            self.btag[_ekey(vid, b)] = tag
        return vid

    def _bisect_one(self, i):
        """Bisect triangle i at its refinement edge; returns the two children."""
        p0, p1, p2 = self.tris[i]
        m = self._midvertex(_ekey(p1, p2))
        self.alive[i] = False
        self._unregister(i, self.tris[i])
        kids = []
        for child in ((m, p0, p1), (m, p2, p0)):
            j = len(self.tris)
            self.tris.append(child)
            self.alive.append(True)
            self.bound.append(self.bound[i])
            self.gen.append(self.gen[i] + 1)
            self._register(j, child)
            kids.append(j)
        self.any_split = True
        return kids

    def ensure_split(self, i0):
        """Bisect i0, recursively splitting neighbors for conformity."""
        stack = [i0]
        steps = 0
        while stack:
            steps += 1
            if steps > _BISECT_SAFETY:
                raise MeshError("bisection closure did not terminate")
            i = stack[-1]
            if not self.alive[i]:
                stack.pop()
                continue
            key = self.ref_edge(i)
            nb = self.neighbor_across(i, key)
            if nb is not None and self.ref_edge(nb) != key:
                stack.append(nb)
                continue
            self._bisect_one(i)
            if nb is not None:
                self._bisect_one(nb)
            stack.pop()

    def refine_to_bounds(self, marked):
        queue = list(marked)
        steps = 0
        while queue:
            steps += 1
            if steps > _BISECT_SAFETY:
                raise MeshError("size-map refinement did not terminate")
            i = queue.pop()
            if not self.alive[i] or self.diameter(i) <= self.bound[i]:
                continue
            n_before = len(self.tris)
            self.ensure_split(i)
            for j in range(n_before, len(self.tris)):
                if self.alive[j] and self.diameter(j) > self.bound[j]:
                    queue.append(j)

    def smooth(self):
        """One guarded Laplacian pass over interior vertices."""
        boundary = set()
        for a, b in self.btag:
            boundary.add(a)
            boundary.add(b)
        nbrs = {}
        incident = {}
        for i, t in enumerate(self.tris):
            if not self.alive[i]:
                continue
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                nbrs.setdefault(a, set()).add(b)
                nbrs.setdefault(b, set()).add(a)
            for v in t:
                incident.setdefault(v, []).append(i)

        for v in sorted(nbrs):
            if v in boundary:
                continue
            ring = nbrs[v]
            new = (
                sum(self.verts[u][0] for u in ring) / len(ring),
                sum(self.verts[u][1] for u in ring) / len(ring),
            )
            old = self.verts[v]
            if new == old:
                continue
            self.verts[v] = new
            if not self._move_ok(incident[v]):
                self.verts[v] = old

    def _move_ok(self, tri_ids):
        for i in tri_ids:
            p0, p1, p2 = (np.asarray(self.verts[v]) for v in self.tris[i])
            area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
            if area2 <= 0.0:
                return False
            l0 = np.hypot(*(p2 - p1))
            l1 = np.hypot(*(p0 - p2))
            l2 = np.hypot(*(p1 - p0))
            diam = max(l0, l1, l2)
            if diam > self.bound[i] * (1 + 1e-12):
                return False
            inradius = area2 / (l0 + l1 + l2)
            if diam / inradius > self.shape_bound:
                return False
        return True

    def build(self):
        tris = [t for t, ok in zip(self.tris, self.alive) if ok]
        btags = [(a, b, tag) for (a, b), tag in sorted(self.btag.items())]
        return TriMesh(np.array(self.verts), np.array(tris), btags, _validated=True)


def _ekey(a, b):
    return (a, b) if a < b else (b, a)


def refine_by_size_map(mesh, target, *, size_floor=1e-6, shape_bound=10.0):
    """Refine until every descendant of T has diameter <= max(target_T, floor).

    Newest-vertex bisection with conformity closure; afterwards one extra
    layer of edge-neighbors of the marked set is bisected once and a single
    guarded Laplacian smoothing pass is applied to the interior vertices.
    Targets below the floor are clamped with a warning.  If nothing is
    marked the input mesh is returned unchanged.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (mesh.num_triangles,):
        raise MeshError("target must have one entry per triangle")
    if (target <= 0).any():
        raise MeshError("size-map targets must be positive")
    if (target < size_floor).any():
        warnings.warn(
            f"{int((target < size_floor).sum())} size-map targets below the "
            f"floor {size_floor:g}; clamped",
            stacklevel=2,
        )
    bounds = np.maximum(target, size_floor)

    marked = np.nonzero(mesh.h_T > bounds)[0]
    if not marked.size:
        return mesh

    ref = _Refiner(mesh, bounds, shape_bound)
    ref.refine_to_bounds(list(marked))

    marked_set = set(int(i) for i in marked)
    layer = set()
    for i in marked_set:
        for eid in mesh.tri_to_edges[i]:
            for j in mesh.edge_to_tris[eid]:
                if j >= 0 and int(j) not in marked_set:
                    layer.add(int(j))
    for i in sorted(layer):
        if ref.alive[i]:
            ref.ensure_split(i)

    ref.smooth()
    out = ref.build()
    if out.shape_regularity() > shape_bound * (1 + 1e-9):
        raise MeshError(
            f"shape regularity {out.shape_regularity():.2f} exceeds bound {shape_bound}"
        )
    return out
