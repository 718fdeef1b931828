"""Discrete convex geometry in R^3.

Polytopes are stored as vertex sets with merged planar facets, so that
facet normals and areas are exact data rather than triangulation artifacts.
On top of them the module computes the two boundary measures of a convex
body (surface-area and cone-volume), volumes, Hausdorff distances between
support functions, minimum-volume enclosing ellipsoids, and the projection
diagnostics used to detect degenerating (blowing-down) bodies.

Conventions
-----------
* Facet loops list vertex indices counter-clockwise as seen from outside
  (against the outward normal).
* Ellipsoid radii are sorted ascending; ``axes[i]`` is the unit principal
  direction for ``radii[i]``.
* OBJ output uses 1-based vertex indices, one polygon per facet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import (
    ConvergenceFailure,
    DimensionDeficient,
    InvalidParameter,
    OriginNotContained,
)
from .grid import ScalarField, SphericalGrid, integrate, tangential_gradient
from .solver import SupportFunction

_MERGE_TOL = 1e-9          # facets merge when 1 - n_i . n_j <= this
_VERTEX_SLACK = 1e-9       # feasibility slack nu . x <= h + slack
_ORIGIN_TOL = 1e-9         # origin-in-closure slack on support numbers
_UNIT_TOL = 1e-10


def _as_points(points, minimum: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidParameter(f"expected an (m, 3) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidParameter("points contain non-finite entries")
    if pts.shape[0] < minimum:
        raise InvalidParameter(f"need at least {minimum} points, got {pts.shape[0]}")
    return pts


def _require_full_rank(pts: np.ndarray) -> None:
    centered = pts - pts.mean(axis=0)
    sing = np.linalg.svd(centered, compute_uv=False)
    if sing[2] <= 1e-12 * max(sing[0], 1.0):
        raise DimensionDeficient(
            "points are affinely dependent (rank < 3); no full-dimensional hull"
        )


def _orthobasis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane basis (t1, t2) with t1 x t2 = normal."""
    k = int(np.argmin(np.abs(normal)))
    axis = np.zeros(3)
    axis[k] = 1.0
    t1 = axis - normal[k] * normal
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return t1, t2


@dataclass(frozen=True)
class Facet:
    """One planar facet: outward unit normal, support number, vertex loop.

    ``loop`` indexes into the owning polytope's vertex array, ordered
    counter-clockwise about ``normal``.  ``area`` and ``centroid`` are the
    polygon area and area centroid of the facet.
    """

    normal: np.ndarray
    offset: float
    loop: tuple
    area: float
    centroid: np.ndarray

    def __post_init__(self):
        self.normal.setflags(write=False)
        self.centroid.setflags(write=False)


class Polytope:
    """Convex polytope with merged planar facets.

    Build instances with :func:`convex_hull_3d` (or the OBJ reader); the
    constructor only freezes prepared data.  Vertices are the extreme
    points, ``centroid`` is their mean and serves as the apex for the
    facet-cone volume decomposition.
    """

    def __init__(self, vertices: np.ndarray, facets: list, centroid: np.ndarray):
        self.vertices = np.asarray(vertices, dtype=float)
        self.facets = list(facets)
        self.centroid = np.asarray(centroid, dtype=float)
        self.vertices.setflags(write=False)
        self.centroid.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def facet_normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets])

    def facet_offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.facets])

    def facet_areas(self) -> np.ndarray:
        return np.array([f.area for f in self.facets])

    def support(self, directions) -> float | np.ndarray:
        """Support values max_x in P of u . x, for one direction or a stack."""
        u = np.asarray(directions, dtype=float)
        vals = self.vertices @ np.atleast_2d(u).T
        out = vals.max(axis=0)
        if u.ndim == 1:
            return float(out[0])
        return out

    def contains_origin(self, tol: float = _ORIGIN_TOL) -> bool:
        return bool(np.min(self.facet_offsets()) >= -tol)

    def translated(self, shift) -> "Polytope":
        """The translate P + shift; facet geometry moves rigidly."""
        t = np.asarray(shift, dtype=float)
        if t.shape != (3,):
            raise InvalidParameter(f"shift must be a 3-vector, got shape {t.shape}")
        facets = [
            Facet(f.normal.copy(), f.offset + float(f.normal @ t), f.loop,
                  f.area, f.centroid + t)
            for f in self.facets
        ]
        return Polytope(self.vertices + t, facets, self.centroid + t)

    def rotated(self, rotation) -> "Polytope":
        """The image R P for an orthogonal matrix R with det +1."""
        R = np.asarray(rotation, dtype=float)
        if R.shape != (3, 3):
            raise InvalidParameter(f"rotation must be a 3x3 matrix, got shape {R.shape}")
        if (np.max(np.abs(R @ R.T - np.eye(3))) > 1e-10
                or np.linalg.det(R) < 0.0):
            raise InvalidParameter("matrix is not a proper rotation")
        facets = [
            Facet(R @ f.normal, f.offset, f.loop, f.area, R @ f.centroid)
            for f in self.facets
        ]
        return Polytope(self.vertices @ R.T, facets, R @ self.centroid)

    def __repr__(self) -> str:
        return (f"Polytope(n_vertices={self.n_vertices}, "
                f"n_facets={self.n_facets})")


class DiscreteMeasure:
    """Finite nonnegative measure on the sphere: unit atoms with weights."""

    def __init__(self, vectors: np.ndarray, weights: np.ndarray):
        vectors = np.asarray(vectors, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] != 3:
            raise InvalidParameter(
                f"atom vectors must form a (k, 3) array, got shape {vectors.shape}"
            )
        if weights.shape != (vectors.shape[0],):
            raise InvalidParameter(
                f"got {vectors.shape[0]} atoms but weight shape {weights.shape}"
            )
        if not (np.all(np.isfinite(vectors)) and np.all(np.isfinite(weights))):
            raise InvalidParameter("measure data contains non-finite entries")
        norms = np.linalg.norm(vectors, axis=1)
        if np.max(np.abs(norms - 1.0)) > _UNIT_TOL:
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise InvalidParameter(
                f"atom vector {bad} is not unit (norm {norms[bad]!r})"
            )
        if np.min(weights, initial=0.0) < 0.0:
            bad = int(np.argmin(weights))
            raise InvalidParameter(f"atom weight {bad} is negative ({weights[bad]!r})")
        self.vectors = vectors
        self.weights = weights
        self.vectors.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    def total(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, g) -> float:
        """Integral of a test function: sum of w_i * g(u_i).

        ``g`` is either a callable mapping an (k, 3) array of directions to
        k values, or an array of k precomputed values.
        """
        vals = np.asarray(g(self.vectors) if callable(g) else g, dtype=float)
        if vals.shape != (self.n_atoms,):
            raise InvalidParameter(
                f"test function produced shape {vals.shape}, expected ({self.n_atoms},)"
            )
        return float(self.weights @ vals)

    def sorted(self) -> "DiscreteMeasure":
        """Atoms in lexicographic vector order, for comparisons."""
        order = np.lexsort((self.vectors[:, 2], self.vectors[:, 1], self.vectors[:, 0]))
        return DiscreteMeasure(self.vectors[order], self.weights[order])

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, total={self.total():.6g})"


class Ellipsoid:
    """Solid ellipsoid: center, ascending radii, matching orthonormal axes."""

    def __init__(self, center: np.ndarray, radii: np.ndarray, axes: np.ndarray):
        center = np.asarray(center, dtype=float)
        radii = np.asarray(radii, dtype=float)
        axes = np.asarray(axes, dtype=float)
        if center.shape != (3,) or radii.shape != (3,) or axes.shape != (3, 3):
            raise InvalidParameter("ellipsoid needs center (3,), radii (3,), axes (3, 3)")
        if np.any(radii <= 0.0):
            raise InvalidParameter(f"radii must be positive, got {radii}")
        if np.any(np.diff(radii) < 0.0):
            raise InvalidParameter(f"radii must be sorted ascending, got {radii}")
        if np.max(np.abs(axes @ axes.T - np.eye(3))) > _UNIT_TOL:
            raise InvalidParameter("axes rows are not orthonormal")
        self.center = center
        self.radii = radii
        self.axes = axes
        for arr in (self.center, self.radii, self.axes):
            arr.setflags(write=False)

    @property
    def volume(self) -> float:
        return float(4.0 * np.pi / 3.0 * np.prod(self.radii))

    def _shape_matrix(self) -> np.ndarray:
        # A with E = {x : (x - c)^T A (x - c) <= 1}
        return self.axes.T @ np.diag(1.0 / self.radii**2) @ self.axes

    def support(self, directions) -> float | np.ndarray:
        """h_E(u) = c . u + sqrt(u^T Sigma u), Sigma = sum r_i^2 e_i e_i^T."""
        u = np.atleast_2d(np.asarray(directions, dtype=float))
        sigma = self.axes.T @ np.diag(self.radii**2) @ self.axes
        vals = u @ self.center + np.sqrt(np.einsum("ij,jk,ik->i", u, sigma, u))
        if np.asarray(directions).ndim == 1:
            return float(vals[0])
        return vals

    def mahalanobis(self, points) -> np.ndarray:
        """Ellipsoidal norm of x - c; <= 1 exactly on E."""
        d = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        A = self._shape_matrix()
        return np.sqrt(np.einsum("ij,jk,ik->i", d, A, d))

    def contains(self, points, slack: float = 0.0) -> bool:
        return bool(np.all(self.mahalanobis(points) <= 1.0 + slack))

    def scaled(self, factor: float) -> "Ellipsoid":
        """Dilate by ``factor`` about the ellipsoid's own center."""
        if factor <= 0.0:
            raise InvalidParameter(f"scale factor must be positive, got {factor}")
        return Ellipsoid(self.center, self.radii * factor, self.axes)

    def __repr__(self) -> str:
        r = ", ".join(f"{x:.4g}" for x in self.radii)
        return f"Ellipsoid(radii=({r}))"


@dataclass(frozen=True)
class BlowdownDiagnostics:
    """Shape-degeneration indicators from the enclosing ellipsoid.

    ratio_32 and ratio_21 are the principal-radius ratios r3/r2 and r2/r1.
    axis_dist_ratio is the distance from the origin's projection to the
    boundary of the polytope's shadow on the r3-axis, over r3.
    plane_dist_ratio is the distance from the origin's projection to the
    boundary of the shadow on the (r2, r3)-plane, over r3.  Large radius
    ratios with small distance ratios flag a body collapsing toward a
    segment or a plate through the origin.
    """

    ratio_32: float
    ratio_21: float
    axis_dist_ratio: float
    plane_dist_ratio: float


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def convex_hull_3d(points) -> Polytope:
    """Convex hull of a 3D point cloud with coplanar facets merged.

    The returned polytope's vertices are exactly the extreme points of the
    input.  Triangles from the hull construction are merged into maximal
    planar facets whenever adjacent normals agree to within 1e-9 (measured
    as 1 - cos of the dihedral angle), so each genuine face contributes a
    single measure atom.  Raises :class:`DimensionDeficient` for coplanar
    input.
    """
    pts = _as_points(points, minimum=4)
    _require_full_rank(pts)
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DimensionDeficient(f"hull construction failed: {exc}") from exc

    vertex_ids = np.array(hull.vertices)
    relabel = np.full(pts.shape[0], -1, dtype=int)
    relabel[vertex_ids] = np.arange(vertex_ids.shape[0])
    vertices = pts[vertex_ids]

    simplices = hull.simplices
    normals = hull.equations[:, :3]
    n_tri = simplices.shape[0]

    tri_pts = pts[simplices]
    cross = np.cross(tri_pts[:, 1] - tri_pts[:, 0], tri_pts[:, 2] - tri_pts[:, 0])
    tri_areas = 0.5 * np.linalg.norm(cross, axis=1)

    uf = _UnionFind(n_tri)
    for i in range(n_tri):
        for j in hull.neighbors[i]:
            if j > i and 1.0 - normals[i] @ normals[j] <= _MERGE_TOL:
                uf.union(i, int(j))

    groups: dict[int, list[int]] = {}
    for i in range(n_tri):
        groups.setdefault(uf.find(i), []).append(i)

    scale = float(np.max(np.abs(vertices))) + 1.0
    facets = []
    for root in sorted(groups):
        tris = groups[root]
        weighted = tri_areas[tris][:, None] * normals[tris]
        normal = weighted.sum(axis=0)
        normal /= np.linalg.norm(normal)
        member_ids = np.unique(simplices[tris])
        coords = pts[member_ids]
        offset = float(np.max(coords @ normal))

        t1, t2 = _orthobasis(normal)
        rel = coords - coords.mean(axis=0)
        xy = np.column_stack((rel @ t1, rel @ t2))
        order = np.argsort(np.arctan2(xy[:, 1], xy[:, 0]))
        xy = xy[order]
        x, y = xy[:, 0], xy[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross2 = x * yn - xn * y
        area = 0.5 * float(np.sum(cross2))
        if area <= 1e-14 * scale * scale:
            raise DimensionDeficient("hull produced a zero-area facet")
        cx = float(np.sum((x + xn) * cross2)) / (6.0 * area)
        cy = float(np.sum((y + yn) * cross2)) / (6.0 * area)
        base = coords.mean(axis=0)
        centroid = base + cx * t1 + cy * t2
        loop = tuple(int(relabel[v]) for v in member_ids[order])
        facets.append(Facet(normal, offset, loop, area, centroid))

    offsets = np.array([f.offset for f in facets])
    gaps = vertices @ np.array([f.normal for f in facets]).T - offsets
    worst = float(np.max(gaps))
    if worst > _VERTEX_SLACK:
        raise InvalidParameter(
            f"internal hull inconsistency: vertex violates a facet by {worst:.3e}"
        )
    return Polytope(vertices, facets, vertices.mean(axis=0))


def support_function(P: Polytope, u) -> float | np.ndarray:
    """h_P(u) = max over vertices of u . x."""
    return P.support(u)


def support_field(P: Polytope, grid: SphericalGrid) -> ScalarField:
    """Sample h_P at all grid nodes."""
    return ScalarField(grid, P.support(grid.nodes))


def surface_area_measure(P: Polytope) -> DiscreteMeasure:
    """One atom per facet at its outward normal, weighted by facet area."""
    return DiscreteMeasure(P.facet_normals(), P.facet_areas())


def cone_volume_measure(P: Polytope) -> DiscreteMeasure:
    """Cone-volume measure: atom weight (1/3) h_F Area(F) per facet.

    Requires the origin in the closure of P; the weight of a facet is the
    volume of the cone over it with apex at the origin, and the total mass
    is the volume of P.  Facets through the origin get weight zero (tiny
    negative products from roundoff are clamped).
    """
    offsets = P.facet_offsets()
    if np.min(offsets) < -_ORIGIN_TOL:
        bad = int(np.argmin(offsets))
        raise OriginNotContained(
            f"origin lies outside the polytope: facet {bad} has support "
            f"number {offsets[bad]:.3e}"
        )
    weights = np.maximum(offsets * P.facet_areas() / 3.0, 0.0)
    return DiscreteMeasure(P.facet_normals(), weights)


def volume(P: Polytope) -> float:
    """Volume by summing facet cones about the vertex centroid."""
    heights = P.facet_offsets() - P.facet_normals() @ P.centroid
    return float(np.sum(heights * P.facet_areas()) / 3.0)


def volume_from_support(h) -> float:
    """Volume of the smooth body with support function h: (1/3) int h det W.

    Accepts a certified :class:`SupportFunction` or a band-limited
    :class:`ScalarField` (certified on the fly; non-convex data raises
    :class:`ConvexityError`).
    """
    if isinstance(h, ScalarField):
        h = SupportFunction.from_field(h)
    if not isinstance(h, SupportFunction):
        raise InvalidParameter(
            f"expected a SupportFunction or ScalarField, got {type(h).__name__}"
        )
    return float(integrate(ScalarField(h.grid, h.values * h.det_w)) / 3.0)


def hausdorff_distance(hK, hL) -> float:
    """Grid sup-distance max over nodes of |h_K - h_L|.

    Arguments may be :class:`SupportFunction` or plain :class:`ScalarField`
    (support values of a non-smooth body such as a polytope are fields, not
    certifiable support functions).  Both must live on the same grid.
    """
    fields = []
    for arg in (hK, hL):
        if isinstance(arg, SupportFunction):
            fields.append(arg.field)
        elif isinstance(arg, ScalarField):
            fields.append(arg)
        else:
            raise InvalidParameter(
                f"expected SupportFunction or ScalarField, got {type(arg).__name__}"
            )
    a, b = fields
    if a.grid is not b.grid and a.grid.L != b.grid.L:
        raise InvalidParameter(
            f"grids differ (L={a.grid.L} vs L={b.grid.L}); "
            "evaluate both bodies on one grid"
        )
    return float(np.max(np.abs(a.values - b.values)))


def polytope_from_support(h: SupportFunction) -> Polytope:
    """Polytope through the boundary points x(u) = grad h + h u of the body.

    The boundary map is evaluated at every grid node and the points are
    hulled; for a smooth convex body this inscribes a polytope whose
    Hausdorff distance to the body is O(L^-2).
    """
    if not isinstance(h, SupportFunction):
        raise InvalidParameter(
            f"expected a SupportFunction, got {type(h).__name__}"
        )
    grad = tangential_gradient(h.field)
    points = grad + h.values[:, None] * h.grid.nodes
    return convex_hull_3d(points)


def enclosing_ellipsoid(body, tolerance: float = 1e-7,
                        max_iterations: int = 100000) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid of a polytope or point cloud.

    Runs Khachiyan's barycentric-coordinate ascent on the lifted points,
    with away steps on the support of the weight vector so the optimality
    gap decays linearly rather than as 1/k.  Iteration stops when the
    largest lifted Mahalanobis value is within ``tolerance`` of its
    optimum; the cap of 1e5 iterations raises
    :class:`ConvergenceFailure` if hit first.
    """
    if isinstance(body, Polytope):
        pts = body.vertices
    else:
        pts = _as_points(body, minimum=4)
        _require_full_rank(pts)
    m = pts.shape[0]
    if tolerance <= 0.0:
        raise InvalidParameter(f"tolerance must be positive, got {tolerance}")
    if max_iterations < 1:
        raise InvalidParameter(f"max_iterations must be >= 1, got {max_iterations}")

    lifted = np.column_stack((pts, np.ones(m)))
    dim = 4
    u = np.full(m, 1.0 / m)
    gap = np.inf
    for _ in range(int(max_iterations)):
        X = (lifted * u[:, None]).T @ lifted
        try:
            Xinv = np.linalg.inv(X)
        except np.linalg.LinAlgError as exc:
            raise DimensionDeficient(
                "weighted scatter matrix is singular; points are degenerate"
            ) from exc
        M = np.einsum("ij,ij->i", lifted @ Xinv, lifted)
        j_add = int(np.argmax(M))
        kappa_add = float(M[j_add])
        gap = kappa_add - dim
        if gap <= dim * tolerance:
            break
        on_support = u > 0.0
        support_ids = np.nonzero(on_support)[0]
        j_away = int(support_ids[np.argmin(M[support_ids])])
        kappa_away = float(M[j_away])
        if gap >= dim - kappa_away:
            beta = gap / (dim * (kappa_add - 1.0))
            u *= 1.0 - beta
            u[j_add] += beta
        else:
            cap = u[j_away] / (1.0 - u[j_away])
            if kappa_away > 1.0:
                beta = min((dim - kappa_away) / (dim * (kappa_away - 1.0)), cap)
            else:
                beta = cap
            u *= 1.0 + beta
            u[j_away] -= beta
            u[j_away] = max(u[j_away], 0.0)
    else:
        raise ConvergenceFailure(
            f"ellipsoid iteration did not reach tolerance {tolerance:g} in "
            f"{max_iterations} iterations (gap {gap:.3e})",
            residual=gap, iterations=int(max_iterations),
        )

    center = pts.T @ u
    sigma = (pts * u[:, None]).T @ pts - np.outer(center, center)
    eigvals, eigvecs = np.linalg.eigh(sigma)
    if eigvals[0] <= 1e-14 * max(eigvals[2], 1.0):
        raise DimensionDeficient("enclosing ellipsoid degenerates; points are flat")
    radii = np.sqrt(3.0 * eigvals)
    return Ellipsoid(center, radii, eigvecs.T)


def _point_to_polygon_boundary(point: np.ndarray, polygon: np.ndarray) -> float:
    """Distance from a 2D point to the boundary polyline of a polygon."""
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    d = b - a
    lengths2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", point - a, d) / lengths2, 0.0, 1.0)
    proj = a + t[:, None] * d
    return float(np.min(np.linalg.norm(point - proj, axis=1)))


def blowdown_diagnostics(P: Polytope,
                         ellipsoid_tolerance: float = 1e-7,
                         max_iterations: int = 100000) -> BlowdownDiagnostics:
    """Radius ratios and origin-projection distances for degeneration tests.

    The enclosing ellipsoid supplies principal radii r1 <= r2 <= r3 and
    directions.  P is projected onto the line spanned by the r3-direction
    (segment I) and onto the plane spanned by the r2- and r3-directions
    (shadow K'); the origin's projections are compared with the respective
    boundaries and both distances are normalized by r3.

    ``ellipsoid_tolerance`` is forwarded to :func:`enclosing_ellipsoid`;
    ratio consumers that only need percent-level accuracy can loosen it,
    which matters for many-vertex approximations of smooth bodies where
    the tight default converges slowly.
    """
    E = enclosing_ellipsoid(P, tolerance=ellipsoid_tolerance,
                            max_iterations=max_iterations)
    r1, r2, r3 = (float(r) for r in E.radii)
    axis_long = E.axes[2]
    t = P.vertices @ axis_long
    axis_dist = min(abs(float(t.min())), abs(float(t.max())))

    plane_basis = E.axes[1:3]
    shadow_pts = P.vertices @ plane_basis.T
    try:
        hull2 = ConvexHull(shadow_pts)
    except QhullError as exc:
        raise DimensionDeficient(f"shadow polygon is degenerate: {exc}") from exc
    polygon = shadow_pts[hull2.vertices]
    plane_dist = _point_to_polygon_boundary(np.zeros(2), polygon)

    return BlowdownDiagnostics(
        ratio_32=r3 / r2,
        ratio_21=r2 / r1,
        axis_dist_ratio=axis_dist / r3,
        plane_dist_ratio=plane_dist / r3,
    )


def _spiral_directions(n: int) -> np.ndarray:
    """Deterministic roughly-equidistributed unit directions (golden spiral)."""
    k = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / n
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    ang = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.column_stack((rho * np.cos(ang), rho * np.sin(ang), z))


def ball_offset_outer(P: Polytope, radius: float, n_directions: int = 2000) -> Polytope:
    """Outer polytope approximation of the rounded body P + radius * B.

    Intersects the supporting halfspaces {x . u <= h_P(u) + radius} over a
    deterministic spiral direction set augmented with the facet normals of
    P, so the flat faces of the offset body are cut exactly while the
    rounded parts are faceted.  The result contains P + radius * B and
    tightens as directions are added.
    """
    if radius <= 0.0:
        raise InvalidParameter(f"offset radius must be positive, got {radius}")
    if n_directions < 4:
        raise InvalidParameter(f"need at least 4 directions, got {n_directions}")
    dirs = np.vstack((P.facet_normals(), _spiral_directions(int(n_directions))))
    b = P.support(dirs) + radius
    halfspaces = np.column_stack((dirs, -b))
    interior = P.centroid
    try:
        hs = HalfspaceIntersection(halfspaces, interior)
    except QhullError as exc:
        raise DimensionDeficient(f"halfspace intersection failed: {exc}") from exc
    points = np.unique(np.round(hs.intersections, 8), axis=0)
    return convex_hull_3d(points)


def polytope_to_obj(P: Polytope) -> str:
    """OBJ text: one `v` line per vertex, one `f` line per facet (1-based)."""
    lines = []
    for x, y, z in P.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for f in P.facets:
        lines.append("f " + " ".join(str(i + 1) for i in f.loop))
    return "\n".join(lines) + "\n"


def polytope_from_obj(text: str) -> Polytope:
    """Rebuild a polytope from OBJ text.

    Vertex lines are parsed and re-hulled, which restores all class
    invariants regardless of how the file orders or groups faces.  Face
    lines are validated for index range only.
    """
    verts = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) != 4:
                raise InvalidParameter(f"OBJ line {lineno}: expected 'v x y z'")
            try:
                verts.append([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise InvalidParameter(f"OBJ line {lineno}: bad coordinate") from exc
        elif parts[0] == "f":
            if len(parts) < 4:
                raise InvalidParameter(f"OBJ line {lineno}: face needs >= 3 indices")
            try:
                faces.append([int(p.split("/")[0]) for p in parts[1:]])
            except ValueError as exc:
                raise InvalidParameter(f"OBJ line {lineno}: bad face index") from exc
    if not verts:
        raise InvalidParameter("OBJ text contains no vertices")
    n = len(verts)
    for face in faces:
        for idx in face:
            if idx < 1 or idx > n:
                raise InvalidParameter(f"OBJ face index {idx} out of range 1..{n}")
    return convex_hull_3d(np.array(verts))


def measure_to_csv(measure: DiscreteMeasure) -> str:
    """CSV with header nx,ny,nz,weight and full-precision rows."""
    lines = ["nx,ny,nz,weight"]
    for (nx, ny, nz), w in zip(measure.vectors, measure.weights):
        lines.append(f"{float(nx)!r},{float(ny)!r},{float(nz)!r},{float(w)!r}")
    return "\n".join(lines) + "\n"


def measure_from_csv(text: str) -> DiscreteMeasure:
    rows = [line.strip() for line in text.splitlines()
            if line.strip() and not line.startswith("#")]
    if not rows or rows[0] != "nx,ny,nz,weight":
        raise InvalidParameter("measure CSV must start with header nx,ny,nz,weight")
    vectors = []
    weights = []
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        if len(parts) != 4:
            raise InvalidParameter(f"measure CSV line {lineno}: expected 4 fields")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise InvalidParameter(f"measure CSV line {lineno}: bad number") from exc
        vectors.append(vals[:3])
        weights.append(vals[3])
    return DiscreteMeasure(np.array(vectors), np.array(weights))
