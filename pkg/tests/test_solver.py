import math

import numpy as np
import pytest

import mnepv
from mnepv import MNepvProblem, MonotoneFn
from mnepv.errors import SingularShiftError
from mnepv.linalg import eig_full, largest_eigpair
from mnepv.problem import assemble_h, objective, phi_char, residual, rho_map
from mnepv.solver import (
    AccelStatus,
    SolveOptions,
    accel_step,
    greedy_init,
    jacobian_sym,
    multistart,
    sample_directions,
    scf_step,
    solve,
    sphere_grid,
    supporting_points,
    theta_grid,
)
from mnepv.vectors import vec_angle

from oracles import DEMO_B, dhdae_instance, random_problem, random_unit


@pytest.fixture(scope="module")
def demo_problem():
    return mnepv.numrad_problem(DEMO_B)


@pytest.fixture(scope="module")
def demo_multistart(demo_problem):
    _, dirs = theta_grid(100)
    starts = [p.x_v for p in supporting_points(demo_problem, dirs)]
    return starts, multistart(demo_problem, starts)


class TestScfStep:
    def test_linear_case_one_step(self):
        p = MNepvProblem([np.diag([1.0, 2.0])], [MonotoneFn.constant(1.0)])
        lam, x = scf_step(p, np.array([1.0, 1.0]) / np.sqrt(2))
        assert lam == 2.0
        assert np.allclose(x, [0.0, 1.0], atol=0)

    def test_monotone_from_any_start(self, demo_problem):
        rng = np.random.default_rng(0)
        for _ in range(10):
            x0 = random_unit(rng, 4, True)
            _, x1 = scf_step(demo_problem, x0)
            assert objective(demo_problem, x1) >= objective(demo_problem, x0) - 1e-12

    def test_fixed_point(self, demo_problem, demo_multistart):
        _, result = demo_multistart
        x_star = result.best_report.x_star
        _, x_next = scf_step(demo_problem, x_star)
        assert vec_angle(x_star, x_next) <= 1e-8

    def test_supporting_point_geometry(self, demo_problem):
        # the SCF image is the supporting point for the gradient direction
        rng = np.random.default_rng(1)
        x0 = random_unit(rng, 4, True)
        rho0 = rho_map(demo_problem, x0)
        grad = np.array(
            [fn.h(float(r)) for fn, r in zip(demo_problem.fns, rho0)]
        )
        _, x1 = scf_step(demo_problem, x0)
        [pt] = supporting_points(demo_problem, [grad])
        assert np.dot(grad, rho_map(demo_problem, x1)) == pytest.approx(
            np.dot(grad, pt.y_v), abs=1e-10
        )


class TestJacobianSym:
    def test_constant_coefficients_reduce_to_h(self):
        rng = np.random.default_rng(2)
        p = random_problem(rng, n=6, m=2, cplx=True)
        p = MNepvProblem(p.matrices, [MonotoneFn.constant(0.7)] * 2)
        x = random_unit(rng, 6, True)
        assert np.allclose(jacobian_sym(p, x), assemble_h(p, x), atol=1e-15)

    def test_annihilates_along_x(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = random_problem(rng)
            x = random_unit(rng, p.n, not p.is_real)
            js = jacobian_sym(p, x)
            h = assemble_h(p, x)
            err = np.linalg.norm(js @ x - h @ x)
            assert err <= 1e-13 * max(np.linalg.norm(h, 1), 1e-300)

    def test_matches_fd_jacobian_real_case(self):
        # J(x) = d/dx [H(x/|x|) x] equals J_s + x q^T with q = 2 P M C M^T x
        rng = np.random.default_rng(4)
        p = random_problem(rng, n=7, m=3, cplx=False)
        x = random_unit(rng, 7, False)
        js = jacobian_sym(p, x)
        mcols = np.stack([a @ x for a in p.matrices], axis=1)
        c = np.array([fn.hprime(float(r)) for fn, r in zip(p.fns, rho_map(p, x))])
        w = mcols - np.outer(x, x @ mcols)
        q = 2.0 * w @ (c * (mcols.T @ x))
        j_full = js + np.outer(x, q)

        def g(v):
            u = v / np.linalg.norm(v)
            return assemble_h(p, u) @ v

        errs = []
        for alpha in (1e-4, 1e-5, 1e-6):
            fd = np.stack(
                [(g(x + alpha * e) - g(x)) / alpha for e in np.eye(7)], axis=1
            )
            errs.append(np.max(np.abs(fd - j_full)))
        assert errs[0] < 1e-3
        assert errs[1] < errs[0] / 3  # first order in alpha
        assert errs[2] < errs[1]


class TestAccelStep:
    def test_exact_eigenpair_makes_shift_singular(self):
        p = MNepvProblem([np.diag([1.0, 2.0])], [MonotoneFn.constant(1.0)])
        with pytest.raises(SingularShiftError):
            accel_step(p, np.array([0.0, 1.0]))

    def test_solve_logs_failed_acceleration(self, monkeypatch, demo_problem):
        import mnepv.linalg as la

        def boom(*args, **kwargs):
            raise SingularShiftError("forced")

        monkeypatch.setattr(la, "solve_shifted", boom)
        rng = np.random.default_rng(5)
        rep = solve(demo_problem, random_unit(rng, 4, True))
        assert rep.converged  # plain SCF carries the run
        assert AccelStatus.SOLVE_FAILED in rep.accel_log
        assert AccelStatus.ACCEPTED_INCREASED_F not in rep.accel_log

    def test_local_quadratic_contraction_real_case(self):
        rng = np.random.default_rng(6)
        j, bs = dhdae_instance(rng, 30, ell=1)
        p = mnepv.dhdae_problem(j, bs)
        x0 = largest_eigpair(p.matrices[0])[1]
        x_star = solve(p, x0).x_star
        for _ in range(5):
            d = rng.standard_normal(30)
            d = d - x_star * np.dot(x_star, d)
            d /= np.linalg.norm(d)
            x = x_star * np.cos(1e-4) + d * np.sin(1e-4)
            assert vec_angle(x_star, accel_step(p, x)) <= 1e-6

    def test_quadratic_residual_contraction(self):
        rng = np.random.default_rng(7)
        j, bs = dhdae_instance(rng, 40, ell=1)
        p = mnepv.dhdae_problem(j, bs)
        x0 = largest_eigpair(p.matrices[0])[1]
        rep = solve(p, x0)
        pairs = [
            (r.res_scf, r.res_accel)
            for r in rep.records
            if r.res_accel is not None and r.res_scf <= 0.1
        ]
        assert pairs
        for r_in, r_out in pairs:
            assert r_out <= 1e3 * r_in**2 + 1e-15


class TestSolve:
    def test_linear_reduction_single_iteration(self):
        rng = np.random.default_rng(8)
        g = rng.standard_normal((10, 10))
        a = (g + g.T) / 2
        p = MNepvProblem([a], [MonotoneFn.constant(1.0)])
        rep = solve(p, random_unit(rng, 10, False))
        assert rep.converged and rep.iterations == 1
        dec = eig_full(a)
        assert vec_angle(dec.vectors[:, 0], rep.x_star) <= 1e-10

    def test_report_invariants(self):
        rng = np.random.default_rng(9)
        for _ in range(15):
            p = random_problem(rng, n=10)
            rep = solve(p, random_unit(rng, 10, not p.is_real))
            hist = rep.objective_history
            assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))
            if rep.converged:
                assert rep.residual_history[-1] <= 1e-13
                h = assemble_h(p, rep.x_star)
                top = eig_full(h).values[0]
                assert abs(rep.lambda_star - top) <= 1e-10 * np.linalg.norm(h, 1)

    def test_plateau_in_converged_tail_means_converged_residual(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            p = random_problem(rng, n=8)
            rep = solve(p, random_unit(rng, 8, not p.is_real))
            if not rep.converged:
                continue
            hist = rep.objective_history
            tail = range(max(0, len(hist) - 4), len(hist) - 1)
            for k in tail:
                if hist[k + 1] - hist[k] <= 1e-14 * abs(hist[k]):
                    assert rep.residual_history[-1] <= 10 * 1e-13

    def test_accel_disabled_and_forced(self, demo_problem):
        rng = np.random.default_rng(11)
        x0 = random_unit(rng, 4, True)
        plain = solve(demo_problem, x0, SolveOptions(tol_acc=0.0))
        assert all(s is AccelStatus.NOT_ATTEMPTED for s in plain.accel_log)
        eager = solve(demo_problem, x0, SolveOptions(tol_acc=math.inf))
        attempted = [s for s in eager.accel_log[:-1]]
        assert all(s is not AccelStatus.NOT_ATTEMPTED for s in attempted)

    def test_max_iter_returns_unconverged_report(self, demo_problem):
        rng = np.random.default_rng(12)
        rep = solve(demo_problem, random_unit(rng, 4, True), SolveOptions(max_iter=2))
        assert not rep.converged and rep.iterations == 2

    def test_record_history(self, demo_problem):
        rng = np.random.default_rng(13)
        rep = solve(
            demo_problem, random_unit(rng, 4, True), SolveOptions(record_history=True)
        )
        assert len(rep.iterates) == rep.iterations
        assert np.array_equal(rep.iterates[-1], rep.x_star)

    def test_nonnegativity_preserved(self):
        rng = np.random.default_rng(14)
        mats = []
        for _ in range(3):
            g = rng.uniform(0, 1, (9, 9))
            mats.append((g + g.T) / 2)
        p = MNepvProblem(mats, [MonotoneFn.identity()] * 3)
        x0 = np.abs(rng.standard_normal(9))
        rep = solve(p, x0 / np.linalg.norm(x0), SolveOptions(record_history=True, tol_acc=0.0))
        for x in rep.iterates:
            assert np.min(x) >= -1e-12

    def test_options_validation(self):
        with pytest.raises(ValueError):
            SolveOptions(tol=0.0)
        with pytest.raises(ValueError):
            SolveOptions(tol_acc=-1.0)
        with pytest.raises(ValueError):
            SolveOptions(max_iter=0)

    def test_degenerate_zero_h_converges(self):
        # H(x) = -I + (x^T x) I vanishes on the unit sphere: every unit
        # vector is an exact eigenvector with lambda = 0.
        p = MNepvProblem(
            [-np.eye(3), np.eye(3)], [MonotoneFn.constant(1.0), MonotoneFn.identity()]
        )
        rep = solve(p, np.array([1.0, 1.0, 1.0]) / np.sqrt(3))
        assert rep.converged
        assert rep.lambda_star == 0.0


class TestSupportingPoints:
    def test_diagonal_example(self):
        p = MNepvProblem(
            [np.diag([1.0, 2.0]), np.diag([5.0, 7.0])],
            [MonotoneFn.identity()] * 2,
        )
        [pt] = supporting_points(p, [np.array([1.0, 0.0])])
        assert pt.lambda_v == 2.0
        assert np.allclose(pt.x_v, [0.0, 1.0], atol=0)
        assert np.allclose(pt.y_v, [2.0, 7.0], atol=0)

    def test_monte_carlo_supporting_inequality(self):
        rng = np.random.default_rng(15)
        p = random_problem(rng, n=8, m=3, cplx=True)
        dirs = [random_unit(rng, 3, False) for _ in range(20)]
        pts = supporting_points(p, dirs)
        samples = np.stack(
            [rho_map(p, random_unit(rng, 8, True)) for _ in range(1000)]
        )
        for pt in pts:
            assert np.max(samples @ pt.v) <= np.dot(pt.v, pt.y_v) + 1e-10

    def test_antipodal_pair_uses_bottom_eigenpair(self):
        rng = np.random.default_rng(16)
        p = random_problem(rng, n=6, m=2, cplx=True)
        v = np.array([0.6, 0.8])
        [pplus, pminus] = supporting_points(p, [v, -v])
        hv = 0.6 * p.matrices[0] + 0.8 * p.matrices[1]
        dec = eig_full(hv)
        assert pplus.lambda_v == pytest.approx(dec.values[0], abs=1e-14)
        assert pminus.lambda_v == pytest.approx(-dec.values[-1], abs=1e-14)
        assert np.dot(pminus.v, pminus.y_v) == pytest.approx(
            -dec.values[-1], abs=1e-12
        )

    def test_zero_direction_rejected(self):
        p = MNepvProblem([np.eye(2), np.eye(2)], [MonotoneFn.identity()] * 2)
        with pytest.raises(ValueError):
            supporting_points(p, [np.zeros(2)])

    def test_boundary_hull_contains_samples(self, demo_problem):
        from scipy.spatial import ConvexHull

        _, dirs = theta_grid(100)
        pts = supporting_points(demo_problem, dirs)
        boundary = np.stack([pt.y_v for pt in pts])
        hull = ConvexHull(boundary)
        rng = np.random.default_rng(17)
        samples = np.stack(
            [rho_map(demo_problem, random_unit(rng, 4, True)) for _ in range(500)]
        )
        scale = np.max(np.abs(boundary))
        slack = 1e-2 * scale
        inside = samples @ hull.equations[:, :-1].T + hull.equations[:, -1]
        assert np.max(inside) <= slack


class TestGrids:
    def test_theta_grid_negation_pairing(self):
        thetas, dirs = theta_grid(10)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-15)
        assert np.array_equal(dirs[5:], -dirs[:5])
        assert thetas[0] == 0.0 and len(thetas) == 10

    def test_sphere_grid_covers(self):
        etas, thetas, dirs = sphere_grid(100)
        assert dirs.shape == (100, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-14)
        assert etas.min() == 0.0 and etas.max() == pytest.approx(np.pi)

    def test_sample_directions_all_widths(self):
        for m in (1, 2, 3, 4, 6):
            dirs = sample_directions(m, 7, rng_seed=1)
            assert dirs.shape == (7, m)
            assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-14)


class TestGreedyInit:
    def test_single_sample_is_that_point(self):
        p = MNepvProblem(
            [np.diag([1.0, 2.0]), np.diag([0.0, 0.0])], [MonotoneFn.identity()] * 2
        )
        x0 = greedy_init(p, 1)
        [pt] = supporting_points(p, [np.array([1.0, 0.0])])
        assert np.array_equal(x0, pt.x_v)

    def test_argmax_contract(self):
        rng = np.random.default_rng(18)
        p = random_problem(rng, n=7, m=4, cplx=True)
        dirs = sample_directions(4, 12, rng_seed=0)
        pts = supporting_points(p, dirs)
        x0 = greedy_init(p, 12, rng_seed=0)
        f0 = objective(p, x0)
        assert all(f0 >= objective(p, pt.x_v) - 1e-13 for pt in pts)

    def test_demo_reaches_top_cluster(self, demo_problem, demo_multistart):
        _, result = demo_multistart
        x0 = greedy_init(demo_problem, 100)
        rep = solve(demo_problem, x0)
        assert rep.converged
        assert abs(rep.f_star - result.clusters[0].f_star) < 1e-9


class TestMultistart:
    def test_single_start_single_cluster(self, demo_problem):
        rng = np.random.default_rng(19)
        result = multistart(demo_problem, [random_unit(rng, 4, True)])
        assert len(result.reports) == 1
        assert len(result.clusters) == 1
        assert result.best_index == 0

    def test_demo_three_clusters(self, demo_multistart):
        _, result = demo_multistart
        assert result.n_converged == 100
        assert len(result.clusters) == 3
        for c in result.clusters:
            fs = [result.reports[i].f_star for i in c.run_indices]
            assert max(fs) - min(fs) < 1e-10
        gaps = [
            result.clusters[i].f_star - result.clusters[i + 1].f_star
            for i in range(len(result.clusters) - 1)
        ]
        assert min(gaps) > 1e-6

    def test_unconverged_runs_not_clustered(self, demo_problem):
        rng = np.random.default_rng(20)
        starts = [random_unit(rng, 4, True) for _ in range(3)]
        result = multistart(demo_problem, starts, SolveOptions(max_iter=1))
        assert result.n_converged == 0
        assert result.clusters == [] and result.best_index is None

    def test_jobs_parallel_matches_serial(self, demo_problem):
        rng = np.random.default_rng(21)
        starts = [random_unit(rng, 4, True) for _ in range(6)]
        serial = multistart(demo_problem, starts, jobs=1)
        parallel = multistart(demo_problem, starts, jobs=3)
        for a, b in zip(serial.reports, parallel.reports):
            assert a.f_star == b.f_star and a.iterations == b.iterations

    def test_empty_starts_rejected(self, demo_problem):
        with pytest.raises(ValueError):
            multistart(demo_problem, [])


class TestLocalRate:
    def test_scf_contraction_matches_spectral_radius(self, demo_problem, demo_multistart):
        starts, result = demo_multistart
        x_star = result.best_report.x_star
        srep = mnepv.operator_L_rho(demo_problem, x_star)
        assert srep.classification is mnepv.Classification.STABLE
        i0 = result.clusters[0].run_indices[0]
        rep = solve(
            demo_problem, starts[i0], SolveOptions(tol_acc=0.0, record_history=True)
        )
        angles = [vec_angle(x_star, x) for x in rep.iterates]
        ratios = [
            b / a
            for a, b in zip(angles, angles[1:])
            if 1e-12 < b < a < 0.1
        ]
        emp = float(np.mean(ratios[-10:]))
        assert srep.rho_L - 0.15 <= emp <= srep.rho_L + 0.15
