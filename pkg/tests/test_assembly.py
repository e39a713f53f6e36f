import math

import numpy as np
import pytest

from kfplab import sparse
from kfplab.assembly import (
    SplitParams,
    operator_set,
    _element_blocks,
    assemble_blocks,
    assemble_heat_v,
    assemble_lagrangian,
    assemble_mass,
    assemble_selfsimilar_K1,
)
from kfplab.mesh import RectDomain, build_structured_mesh

UNIT = RectDomain(0.0, 1.0, 0.0, 1.0)


def random_interior(mesh, seed=0, count=1):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, (count, mesh.interior_count))


def directional_sq_norm(blocks, a, x):
    """||(d_v + a d_z) u||^2 via the quadratic form of the diffusion blocks."""
    D = sparse.combine([(1.0, blocks.d_vv), (a, blocks.d_vz_sym), (a * a, blocks.d_zz)])
    return float(x @ D.matvec(x))


def test_element_mass_matrix_closed_form():
    mesh = build_structured_mesh(UNIT, 1)
    blocks = _element_blocks(mesh)
    area = 0.5
    want = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    for e in range(mesh.element_count):
        assert np.allclose(blocks["mass"][e], want, atol=1e-15)


def test_full_mass_integrates_one():
    mesh = build_structured_mesh(RectDomain(-3.0, 1.0, 2.0, 7.0), 6)
    M = assemble_mass(mesh, reduced=False)
    ones = np.ones(mesh.node_count)
    assert ones @ M.matvec(ones) == pytest.approx(mesh.domain.area, rel=1e-13)


def test_mass_symmetric_exactly():
    mesh = build_structured_mesh(UNIT, 5)
    M = assemble_mass(mesh)
    assert np.max(np.abs(M.toarray() - M.toarray().T)) == 0.0


def test_mass_positive_definite_on_interior():
    mesh = build_structured_mesh(UNIT, 6)
    M = assemble_mass(mesh)
    for x in random_interior(mesh, seed=2, count=10):
        assert x @ M.matvec(x) > 0.0


def test_heat_v_equals_lagrangian_at_zero():
    mesh = build_structured_mesh(RectDomain.square(2.0), 7)
    A0 = assemble_lagrangian(mesh, 0.0)
    Ah = assemble_heat_v(mesh)
    assert Ah.same_pattern(A0)
    assert np.array_equal(Ah.values, A0.values)


def test_heat_v_positive_semidefinite():
    mesh = build_structured_mesh(UNIT, 8)
    A = assemble_heat_v(mesh)
    for x in random_interior(mesh, seed=3, count=10):
        assert x @ A.matvec(x) >= 0.0


def test_heat_v_sine_energy():
    # int (d_v sin(pi v) sin(pi z))^2 over the unit square is pi^2 / 4
    mesh = build_structured_mesh(UNIT, 64)
    vals = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
    vals[mesh.boundary] = 0.0
    x = vals[mesh.interior]
    q = x @ assemble_heat_v(mesh).matvec(x)
    assert abs(q - np.pi ** 2 / 4) / (np.pi ** 2 / 4) < 0.02


@pytest.mark.parametrize("t", [0.0, 1.0, 3.7])
def test_lagrangian_symmetric(t):
    mesh = build_structured_mesh(RectDomain.square(2.0), 6)
    A = assemble_lagrangian(mesh, t)
    assert np.max(np.abs(A.toarray() - A.toarray().T)) == 0.0


def test_lagrangian_perfect_square_identity():
    mesh = build_structured_mesh(RectDomain.square(3.0), 10)
    blocks = assemble_blocks(mesh)
    grads, areas = mesh.element_gradients()
    for t in (0.0, 0.6, 2.5):
        A = blocks.lagrangian(t)
        for x in random_interior(mesh, seed=int(10 * t) + 1, count=20):
            # elementwise quadrature of the squared directional gradient
            vals = np.zeros(mesh.node_count)
            vals[mesh.interior] = x
            ue = vals[mesh.elements]
            gv = np.einsum("ei,ei->e", ue, grads[:, :, 0])
            gz = np.einsum("ei,ei->e", ue, grads[:, :, 1])
            direct = float(np.sum(areas * (gv + t * gz) ** 2))
            assert x @ A.matvec(x) == pytest.approx(direct, rel=1e-12, abs=1e-14)


def test_selfsimilar_at_s0_drops_mixed_terms():
    mesh = build_structured_mesh(RectDomain.square(2.0), 6)
    blocks = assemble_blocks(mesh)
    A = blocks.selfsimilar(0.0, 0.5)
    manual = sparse.combine([(1.0, blocks.d_vv), (-1.0, blocks.b_adv), (-0.5, blocks.mass)])
    assert np.max(np.abs(A.values - manual.values)) == 0.0


@pytest.mark.parametrize("s", [0.0, 0.5, 2.0])
def test_selfsimilar_energy_identity(s):
    mesh = build_structured_mesh(RectDomain.square(2.0), 8)
    blocks = assemble_blocks(mesh)
    sigma1 = 0.25
    A = blocks.selfsimilar(s, sigma1)
    M = blocks.mass
    a = 1.0 - math.exp(-s)
    for x in random_interior(mesh, seed=17, count=20):
        lhs = float(x @ A.matvec(x))
        rhs = directional_sq_norm(blocks, a, x) + (1.0 - sigma1) * float(x @ M.matvec(x))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_selfsimilar_sigma1_one_is_pure_square():
    mesh = build_structured_mesh(RectDomain.square(2.0), 8)
    blocks = assemble_blocks(mesh)
    s = 1.3
    a = 1.0 - math.exp(-s)
    A = blocks.selfsimilar(s, 1.0)
    for x in random_interior(mesh, seed=23, count=20):
        assert float(x @ A.matvec(x)) == pytest.approx(
            directional_sq_norm(blocks, a, x), rel=1e-12, abs=1e-14)


def test_selfsimilar_rejects_sigma1_above_one():
    mesh = build_structured_mesh(UNIT, 4)
    with pytest.raises(ValueError):
        assemble_selfsimilar_K1(mesh, 1.0, 1.0 + 1e-9)


def test_coercivity_threshold():
    # the mass-term coefficient of the energy identity changes sign at
    # sigma1 = 1: just above it the identity goes negative on every field
    mesh = build_structured_mesh(RectDomain.square(2.0), 8)
    blocks = assemble_blocks(mesh)
    s = 0.7
    a = 1.0 - math.exp(-s)
    eps = 1e-6
    for x in random_interior(mesh, seed=29, count=5):
        m_norm = float(x @ blocks.mass.matvec(x))
        base = float(x @ blocks.selfsimilar(s, 1.0).matvec(x))
        # sigma1 = 1 + eps corresponds to subtracting eps * M from the form
        above = base - eps * m_norm
        assert above - directional_sq_norm(blocks, a, x) < 0.0
        for sigma1 in (1.0, 0.5, 0.0, -1.0):
            val = float(x @ blocks.selfsimilar(s, sigma1).matvec(x))
            assert val - directional_sq_norm(blocks, a, x) >= -1e-13 * m_norm


def test_advection_skew_identity():
    # x^T (B + B^T) x = -2 x^T M x on zero-boundary fields
    mesh = build_structured_mesh(RectDomain.square(4.0), 9)
    blocks = assemble_blocks(mesh)
    Bt = blocks.b_adv.transpose()
    for x in random_interior(mesh, seed=31, count=10):
        lhs = float(x @ blocks.b_adv.matvec(x) + x @ Bt.matvec(x))
        rhs = -2.0 * float(x @ blocks.mass.matvec(x))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_directional_diffusion_positive_semidefinite():
    mesh = build_structured_mesh(RectDomain.square(2.0), 7)
    blocks = assemble_blocks(mesh)
    for s in (0.0, 0.4, 3.0):
        a = 1.0 - math.exp(-s)
        for x in random_interior(mesh, seed=37, count=10):
            assert directional_sq_norm(blocks, a, x) >= 0.0


def test_bandwidth_of_assembled_matrices():
    mesh = build_structured_mesh(UNIT, 12)
    blocks = assemble_blocks(mesh)
    span = 2 * (mesh.n + 1) + 2
    for mat in (blocks.mass, blocks.d_vv, blocks.b_adv):
        rows = np.repeat(np.arange(mat.rows), np.diff(mat.offsets))
        assert np.max(np.abs(rows - mat.indices)) <= span


def test_split_params():
    p = SplitParams(sigma1=0.5)
    assert p.sigma2 == 1.5
    with pytest.raises(ValueError):
        SplitParams(sigma1=1.5)
    with pytest.raises(ValueError):
        SplitParams(theta=1.5)


def test_operator_set_bundles():
    mesh = build_structured_mesh(RectDomain.square(2.0), 6)
    for form, time in (("original", 0.0), ("lagrangian", 1.5), ("selfsimilar", 0.8)):
        ops = operator_set(mesh, form, time)
        assert ops.form == form and ops.time == time
        assert ops.mass.rows == mesh.interior_count
        assert ops.spatial.rows == mesh.interior_count
    blocks = assemble_blocks(mesh)
    assert np.array_equal(operator_set(mesh, "lagrangian", 1.5).spatial.values,
                          blocks.lagrangian(1.5).values)
    with pytest.raises(ValueError):
        operator_set(mesh, "bogus", 0.0)
