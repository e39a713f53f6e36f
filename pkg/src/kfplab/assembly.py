"""P1 finite element assembly over the structured mesh.

All element integrals use the 3-midpoint rule. Every integrand that appears
here (products of the linear basis functions, their constant gradients and
the linear advection coefficients) has total degree <= 2, so assembly is
exact and the discrete energy identities hold to machine precision rather
than approximately.

Homogeneous Dirichlet conditions are imposed by reduction to the interior
unknowns; boundary rows and columns are dropped, never penalized.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import sparse
from .mesh import TriMesh


def _element_blocks(mesh: TriMesh):
    """Per-element 3x3 kernels for every bilinear form used by the solvers.

    Returns a dict of (n_el, 3, 3) arrays: mass, d_vv, d_zz, d_vz_sym (the
    symmetrized mixed-gradient pairing) and b_adv, the advection pairing
    ((v/2) d_v u + (3 z / 2) d_z u, w) with u the column index.
    """
    grads, areas = mesh.element_gradients()
    coords = mesh.element_coords()

    base = (np.full((3, 3), 1.0) + np.eye(3)) / 12.0
    mass = areas[:, None, None] * base[None, :, :]

    gv = grads[:, :, 0]
    gz = grads[:, :, 1]
    a = areas[:, None, None]
    d_vv = a * gv[:, :, None] * gv[:, None, :]
    d_zz = a * gz[:, :, None] * gz[:, None, :]
    d_vz = a * gv[:, :, None] * gz[:, None, :]  # rows derive in v, cols in z
    d_vz_sym = d_vz + np.transpose(d_vz, (0, 2, 1))

    # int_T coord * phi_i by the midpoint rule: midpoint q joins vertices q
    # and q+1, where phi_i equals 1/2; it vanishes at the opposite midpoint.
    mids = 0.5 * (coords + np.roll(coords, -1, axis=1))
    phi_at_mid = np.zeros((3, 3))  # [i, q]
    for i in range(3):
        for q in range(3):
            phi_at_mid[i, q] = 0.5 if i in (q, (q + 1) % 3) else 0.0
    int_v_phi = np.einsum("eq,iq,e->ei", mids[:, :, 0], phi_at_mid, areas / 3.0)
    int_z_phi = np.einsum("eq,iq,e->ei", mids[:, :, 1], phi_at_mid, areas / 3.0)

    # b_adv[i, j] = (1/2) g_j^v * int(v phi_i) + (3/2) g_j^z * int(z phi_i)
    b_adv = 0.5 * int_v_phi[:, :, None] * gv[:, None, :] + 1.5 * int_z_phi[:, :, None] * gz[:, None, :]

    return {"mass": mass, "d_vv": d_vv, "d_zz": d_zz, "d_vz_sym": d_vz_sym, "b_adv": b_adv}


def _interior_pattern(mesh: TriMesh):
    """Triplet (i, j) layout over interior unknowns plus the keep-mask that
    selects the element-matrix entries whose row and column both survive."""
    ele = mesh.elements
    imap = mesh.interior_index
    rows = np.repeat(ele, 3, axis=1).reshape(-1, 3, 3)  # rows[e, i, j] = ele[e, i]
    cols = np.transpose(rows, (0, 2, 1))
    ri = imap[rows].ravel()
    ci = imap[cols].ravel()
    keep = (ri >= 0) & (ci >= 0)
    m = mesh.interior_count
    return sparse.TripletPattern(m, m, ri[keep], ci[keep]), keep


def _full_pattern(mesh: TriMesh):
    ele = mesh.elements
    rows = np.repeat(ele, 3, axis=1).reshape(-1, 3, 3)
    cols = np.transpose(rows, (0, 2, 1))
    nn = mesh.node_count
    return sparse.TripletPattern(nn, nn, rows.ravel(), cols.ravel())


@dataclass
class OperatorBlocks:
    """Mesh-level matrices assembled once and recombined per time step.

    All matrices live on the interior unknowns and share one CSR pattern, so
    the time-dependent forms are cheap linear combinations:

        lagrangian(t)     = d_vv + t^2 d_zz + t d_vz_sym
        selfsimilar(s,o1) = d_vv + A d_vz_sym + A^2 d_zz - b_adv - o1 * mass,
                            A = 1 - e^{-s}
    """

    mesh: TriMesh
    mass: sparse.SparseMatrix
    d_vv: sparse.SparseMatrix
    d_zz: sparse.SparseMatrix
    d_vz_sym: sparse.SparseMatrix
    b_adv: sparse.SparseMatrix

    def lagrangian(self, t: float) -> sparse.SparseMatrix:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return sparse.combine([(1.0, self.d_vv), (t * t, self.d_zz), (t, self.d_vz_sym)])

    def selfsimilar(self, s: float, sigma1: float) -> sparse.SparseMatrix:
        if s < 0:
            raise ValueError("s must be nonnegative")
        if sigma1 > 1.0:
            raise ValueError("sigma1 must satisfy sigma1 <= 1 (coercivity of the implicit part)")
        a = 1.0 - math.exp(-s)
        return sparse.combine([
            (1.0, self.d_vv), (a, self.d_vz_sym), (a * a, self.d_zz),
            (-1.0, self.b_adv), (-sigma1, self.mass),
        ])


def assemble_blocks(mesh: TriMesh) -> OperatorBlocks:
    """All interior-reduced building-block matrices on a shared pattern."""
    blocks = _element_blocks(mesh)
    pattern, keep = _interior_pattern(mesh)
    mats = {name: pattern.assemble(arr.ravel()[keep]) for name, arr in blocks.items()}
    return OperatorBlocks(mesh, mats["mass"], mats["d_vv"], mats["d_zz"],
                          mats["d_vz_sym"], mats["b_adv"])


def assemble_mass(mesh: TriMesh, reduced: bool = True) -> sparse.SparseMatrix:
    """Consistent P1 mass matrix; reduced=False keeps boundary rows/columns."""
    blocks = _element_blocks(mesh)
    if reduced:
        pattern, keep = _interior_pattern(mesh)
        return pattern.assemble(blocks["mass"].ravel()[keep])
    return _full_pattern(mesh).assemble(blocks["mass"].ravel())


def assemble_lagrangian(mesh: TriMesh, t: float) -> sparse.SparseMatrix:
    """Matrix of a_t(u, w) = (d_v u, d_v w) + t^2 (d_z u, d_z w)
    + t [(d_v u, d_z w) + (d_z u, d_v w)] on the interior space."""
    return assemble_blocks(mesh).lagrangian(t)


def assemble_heat_v(mesh: TriMesh) -> sparse.SparseMatrix:
    """The v-direction diffusion matrix, identical to assemble_lagrangian(mesh, 0)."""
    return assemble_lagrangian(mesh, 0.0)


def assemble_selfsimilar_K1(mesh: TriMesh, s: float, sigma1: float) -> sparse.SparseMatrix:
    """Matrix of the coercive split operator's (negated) weak action:

        a(u, w) = ((d_v + A d_z) u, (d_v + A d_z) w)
                  - ((v/2) d_v u + (3 z/2) d_z u, w) - sigma1 (u, w)

    with A = 1 - e^{-s}. The advection coefficient is assembled in this
    combined physical form: the split operator's drift has 3z/(2A) in its
    second slot, which is singular at s = 0, but the directional gradient
    multiplies it back by A, so assembling the product is valid for all
    s >= 0 and algebraically identical for s > 0. The theta scheme uses this
    matrix directly as the implicit-side operator.
    """
    return assemble_blocks(mesh).selfsimilar(s, sigma1)


@dataclass
class OperatorSet:
    """Mass matrix plus one formulation's spatial form frozen at a time.

    Convenience bundle for callers that want a single (M, A) pair; the
    solvers themselves recombine OperatorBlocks per step instead.
    """

    mass: sparse.SparseMatrix
    spatial: sparse.SparseMatrix
    time: float
    form: str


def operator_set(mesh: TriMesh, form: str, time: float, sigma1: float = 1.0) -> OperatorSet:
    blocks = assemble_blocks(mesh)
    if form == "original":
        spatial = blocks.lagrangian(0.0)
    elif form == "lagrangian":
        spatial = blocks.lagrangian(time)
    elif form == "selfsimilar":
        spatial = blocks.selfsimilar(time, sigma1)
    else:
        raise ValueError(f"unknown formulation {form!r}")
    return OperatorSet(blocks.mass, spatial, time, form)


@dataclass(frozen=True)
class SplitParams:
    """Reaction split sigma1 + sigma2 = 2 with sigma1 <= 1, plus theta."""

    sigma1: float = 1.0
    theta: float = 0.5

    def __post_init__(self):
        if self.sigma1 > 1.0:
            raise ValueError("sigma1 must satisfy sigma1 <= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")

    @property
    def sigma2(self) -> float:
        return 2.0 - self.sigma1
