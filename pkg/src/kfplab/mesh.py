"""Structured triangular meshes of rectangles with P1 interpolation.

Every grid cell is split along the lower-left to upper-right diagonal, so
assembly and error numbers are fully deterministic. Meshes are immutable
after construction and all operations here are pure.
"""

from dataclasses import dataclass, field

import numpy as np

FORMS = ("original", "lagrangian", "selfsimilar")


@dataclass(frozen=True)
class RectDomain:
    """Rectangle [v_min, v_max] x [z_min, z_max].

    The first axis is the velocity-like variable, the second is the
    position-like variable (x, z or the rescaled one, depending on the
    formulation in play).
    """

    v_min: float
    v_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.v_min < self.v_max and self.z_min < self.z_max):
            raise ValueError("degenerate domain: need v_min < v_max and z_min < z_max")

    @property
    def side_v(self) -> float:
        return self.v_max - self.v_min

    @property
    def side_z(self) -> float:
        return self.z_max - self.z_min

    @property
    def area(self) -> float:
        return self.side_v * self.side_z

    @staticmethod
    def square(half_width: float) -> "RectDomain":
        return RectDomain(-half_width, half_width, -half_width, half_width)


class TriMesh:
    """Uniform triangulation of a rectangle with n subdivisions per side.

    Nodes are ordered row-major over the structured grid: node id
    iz * (n + 1) + iv. Each of the n*n cells is split into two triangles
    (lower: ll, lr, ur and upper: ll, ur, ul), all with positive area.
    """

    def __init__(self, domain: RectDomain, n: int):
        if n < 1:
            raise ValueError("n must be a positive integer")
        self.domain = domain
        self.n = int(n)
        self.hv = domain.side_v / n
        self.hz = domain.side_z / n
        self.h = max(self.hv, self.hz)

        nv = n + 1
        vs = np.linspace(domain.v_min, domain.v_max, nv)
        zs = np.linspace(domain.z_min, domain.z_max, nv)
        V, Z = np.meshgrid(vs, zs, indexing="xy")  # row iz, column iv
        self.nodes = np.column_stack([V.ravel(), Z.ravel()])

        iv, iz = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        ll = (iz * nv + iv).ravel()
        lr = ll + 1
        ul = ll + nv
        ur = ul + 1
        lower = np.column_stack([ll, lr, ur])
        upper = np.column_stack([ll, ur, ul])
        self.elements = np.empty((2 * n * n, 3), dtype=np.int64)
        self.elements[0::2] = lower
        self.elements[1::2] = upper

        grid_iv = np.tile(np.arange(nv), nv)
        grid_iz = np.repeat(np.arange(nv), nv)
        self.boundary = (grid_iv == 0) | (grid_iv == n) | (grid_iz == 0) | (grid_iz == n)
        self.interior = ~self.boundary
        # map node id -> interior unknown index, -1 on the boundary
        self.interior_index = np.full(self.node_count, -1, dtype=np.int64)
        self.interior_index[self.interior] = np.arange(self.interior_count)

    @property
    def node_count(self) -> int:
        return (self.n + 1) ** 2

    @property
    def element_count(self) -> int:
        return 2 * self.n ** 2

    @property
    def interior_count(self) -> int:
        return (self.n - 1) ** 2

    def element_coords(self) -> np.ndarray:
        """Vertex coordinates per element, shape (n_elements, 3, 2)."""
        return self.nodes[self.elements]

    def element_areas(self) -> np.ndarray:
        p = self.element_coords()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def element_gradients(self) -> tuple[np.ndarray, np.ndarray]:
        """Constant P1 basis gradients per element, shape (n_elements, 3, 2)."""
        p = self.element_coords()
        areas = self.element_areas()
        grads = np.empty_like(p)
        for i in range(3):
            pj = p[:, (i + 1) % 3]
            pk = p[:, (i + 2) % 3]
            grads[:, i, 0] = pj[:, 1] - pk[:, 1]
            grads[:, i, 1] = pk[:, 0] - pj[:, 0]
        grads /= (2.0 * areas)[:, None, None]
        return grads, areas


@dataclass
class Field:
    """Nodal coefficients of a P1 function on a mesh, tagged with time and form."""

    mesh: TriMesh
    values: np.ndarray
    time: float = 0.0
    form: str = "original"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.node_count,):
            raise ValueError("field length does not match mesh node count")
        if self.form not in FORMS:
            raise ValueError(f"unknown formulation {self.form!r}")

    def interior_values(self) -> np.ndarray:
        return self.values[self.mesh.interior]

    def with_interior(self, interior: np.ndarray, time: float) -> "Field":
        vals = np.zeros(self.mesh.node_count)
        vals[self.mesh.interior] = interior
        return Field(self.mesh, vals, time=time, form=self.form)


def build_structured_mesh(domain: RectDomain, n: int) -> TriMesh:
    """Uniform mesh of (n+1)^2 nodes and 2 n^2 triangles over the rectangle."""
    return TriMesh(domain, n)


def element_quadrature(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edge-midpoint rule on one triangle, exact for total degree <= 2.

    coords is (3, 2); returns (points (3, 2), weights (3,)), each weight |T|/3.
    """
    coords = np.asarray(coords, dtype=float)
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if area <= 0.0:
        raise ValueError("degenerate or negatively oriented element")
    pts = 0.5 * (coords + np.roll(coords, -1, axis=0))
    w = np.full(3, area / 3.0)
    return pts, w


def midpoint_quadrature(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """All element midpoints (n_el, 3, 2) and weights (n_el,) = |T|/3 at once."""
    p = mesh.element_coords()
    pts = 0.5 * (p + np.roll(p, -1, axis=1))
    w = mesh.element_areas() / 3.0
    return pts, w


def interpolate_many(field: Field, points: np.ndarray) -> np.ndarray:
    """P1 values at arbitrary points, 0 outside the domain (Dirichlet extension).

    Point location is pure cell-index arithmetic on the uniform grid followed
    by the two-triangle test; points within 1e-12 * h of the boundary count as
    inside.
    """
    mesh = field.mesh
    dom = mesh.domain
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = mesh.n
    tol = 1e-12 * mesh.h
    gx = (pts[:, 0] - dom.v_min) / mesh.hv
    gy = (pts[:, 1] - dom.z_min) / mesh.hz
    pad = tol / min(mesh.hv, mesh.hz)
    inside = (gx >= -pad) & (gx <= n + pad) & (gy >= -pad) & (gy <= n + pad)

    gx = np.clip(gx, 0.0, n)
    gy = np.clip(gy, 0.0, n)
    i = np.minimum(gx.astype(np.int64), n - 1)
    j = np.minimum(gy.astype(np.int64), n - 1)
    xi = gx - i
    eta = gy - j

    nv = n + 1
    u = field.values
    ll = j * nv + i
    lr = ll + 1
    ul = ll + nv
    ur = ul + 1
    low = u[ll] * (1.0 - xi) + u[lr] * (xi - eta) + u[ur] * eta
    up = u[ll] * (1.0 - eta) + u[ur] * xi + u[ul] * (eta - xi)
    out = np.where(eta <= xi, low, up)
    out[~inside] = 0.0
    return out


def interpolate(field: Field, point) -> float:
    """Scalar convenience wrapper around interpolate_many."""
    return float(interpolate_many(field, np.asarray(point, dtype=float)[None, :])[0])
