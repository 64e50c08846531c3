import numpy as np
import pytest
import scipy.optimize

from deqscores.qp import (
    ConstraintCycle,
    DimensionTooLarge,
    InfeasibleProblem,
    MaxIterationsExceeded,
    QPProblem,
    SolverSettings,
    brute_force_minimize,
    check_feasibility,
    solve,
)


def single_variable_problem():
    # fit-only objective (y - 7)^2 with box [6.5, 7.5]
    return QPProblem.build([[2.0]], [-14.0], [], [6.5], [7.5], constant=49.0)


def two_variable_pair_problem():
    # (y1-5)^2 + (y2-5)^2 with y1 - y2 >= 0.05 and boxes [4.5, 5.5]
    return QPProblem.build(
        2.0 * np.eye(2), [-10.0, -10.0], [(0, 1, 0.05)], [4.5, 4.5], [5.5, 5.5], constant=50.0
    )


def random_problem(rng, n, with_pairs=True):
    while True:
        m = rng.normal(size=(n, n))
        quadratic = m @ m.T + 0.3 * np.eye(n)
        linear = rng.normal(size=n)
        lo = rng.uniform(-1.0, 0.0, n)
        hi = lo + rng.uniform(0.5, 2.0, n)
        pairs = []
        if with_pairs and n >= 2 and rng.random() < 0.8:
            pairs.append((0, 1, float(rng.uniform(0.0, 0.2))))
        if with_pairs and n >= 3 and rng.random() < 0.5:
            pairs.append((1, 2, float(rng.uniform(0.0, 0.2))))
        problem = QPProblem.build(quadratic, linear, pairs, lo, hi)
        if check_feasibility(problem).feasible:
            return problem


class TestSolve:
    def test_unconstrained_interior_minimum(self):
        solution = solve(single_variable_problem())
        assert solution.values == pytest.approx([7.0], abs=1e-8)
        assert solution.objective_value == pytest.approx(0.0, abs=1e-10)

    def test_symmetric_pair_split(self):
        solution = solve(two_variable_pair_problem())
        assert solution.values == pytest.approx([5.025, 4.975], abs=1e-7)

    def test_residuals_meet_settings(self):
        settings = SolverSettings()
        solution = solve(two_variable_pair_problem(), settings)
        primal, stationarity = solution.residuals
        assert primal <= settings.feasibility_tolerance
        assert stationarity <= settings.optimality_tolerance

    def test_uniqueness_across_starting_points(self):
        rng = np.random.default_rng(3)
        problem = random_problem(rng, 4)
        settings = SolverSettings()
        a = solve(problem, settings, start=problem.box_lower.copy())
        b = solve(problem, settings, start=problem.box_upper.copy())
        assert np.max(np.abs(a.values - b.values)) <= 10 * settings.optimality_tolerance

    def test_kkt_gradient_in_active_cone(self):
        # with every constraint written a.y >= b, stationarity makes the
        # gradient a nonnegative combination of the active normals a
        problem = two_variable_pair_problem()
        solution = solve(problem)
        y = solution.values
        gradient = problem.quadratic @ y + problem.linear
        columns = []
        for i in range(problem.n):
            if y[i] <= problem.box_lower[i] + 1e-6:
                col = np.zeros(problem.n)
                col[i] = 1.0
                columns.append(col)
            if y[i] >= problem.box_upper[i] - 1e-6:
                col = np.zeros(problem.n)
                col[i] = -1.0
                columns.append(col)
        for i, j, gap in problem.pair_constraints:
            if y[i] - y[j] <= gap + 1e-6:
                col = np.zeros(problem.n)
                col[i] = 1.0
                col[j] = -1.0
                columns.append(col)
        basis = np.column_stack(columns) if columns else np.zeros((problem.n, 0))
        _, residual = scipy.optimize.nnls(basis, gradient)
        assert residual <= 1e-6

    def test_monotone_box_tightening(self):
        problem = two_variable_pair_problem()
        before = solve(problem).values
        shrunk = QPProblem.build(
            problem.quadratic,
            problem.linear,
            problem.pair_constraints,
            before - 0.1,
            before + 0.1,
            constant=problem.constant,
        )
        after = solve(shrunk).values
        assert np.max(np.abs(after - before)) <= 1e-7

    def test_max_iterations_raises(self):
        rng = np.random.default_rng(5)
        problem = random_problem(rng, 4)
        with pytest.raises(MaxIterationsExceeded):
            solve(problem, SolverSettings(optimality_tolerance=1e-16, max_iterations=30))

    def test_infeasible_raises_before_iterating(self):
        problem = QPProblem.build(
            2.0 * np.eye(2), [0.0, 0.0], [(0, 1, 3.0)], [0.0, 0.0], [1.0, 1.0]
        )
        with pytest.raises(InfeasibleProblem):
            solve(problem)

    def test_large_fit_weight_stays_accurate(self):
        lam = 1e6
        quadratic = 2.0 * lam * np.eye(2) + np.array([[1.0, -1.0], [-1.0, 1.0]])
        z = np.array([5.0, 5.0])
        problem = QPProblem.build(
            quadratic,
            -2.0 * lam * z,
            [(0, 1, 0.05)],
            z - 0.5,
            z + 0.5,
            constant=lam * float(z @ z),
        )
        solution = solve(problem)
        assert solution.values == pytest.approx([5.025, 4.975], abs=1e-6)


class TestCheckFeasibility:
    def test_short_chain_fits_in_shared_box(self):
        problem = QPProblem.build(
            2.0 * np.eye(4),
            np.zeros(4),
            [(0, 1, 0.05), (1, 2, 0.05), (2, 3, 0.05)],
            np.zeros(4),
            np.ones(4),
        )
        assert check_feasibility(problem).feasible

    def test_long_tied_chain_overflows_box(self):
        n = 22
        pairs = [(i, i + 1, 0.05) for i in range(n - 1)]
        problem = QPProblem.build(2.0 * np.eye(n), np.zeros(n), pairs, np.zeros(n), np.ones(n))
        result = check_feasibility(problem)
        assert not result.feasible
        assert len(result.witness) == n  # the whole chain is named

    def test_two_cycle_raises(self):
        problem = QPProblem.build(
            2.0 * np.eye(2), np.zeros(2), [(0, 1, 0.05), (1, 0, 0.05)], np.zeros(2), np.ones(2)
        )
        with pytest.raises(ConstraintCycle):
            check_feasibility(problem)

    def test_tightened_lower_point_is_feasible(self):
        problem = QPProblem.build(
            2.0 * np.eye(3),
            np.zeros(3),
            [(0, 1, 0.3), (1, 2, 0.3)],
            np.zeros(3),
            np.ones(3),
        )
        result = check_feasibility(problem)
        assert problem.constraint_violation(result.tightened_lower) == 0.0


class TestBruteForce:
    def test_matches_analytic_single_variable(self):
        solution = brute_force_minimize(single_variable_problem(), 1e-3)
        assert solution.values == pytest.approx([7.0], abs=1e-3)

    def test_matches_solve_on_pair_example(self):
        oracle = brute_force_minimize(two_variable_pair_problem(), 1e-3)
        exact = solve(two_variable_pair_problem())
        assert abs(oracle.objective_value - exact.objective_value) <= 1e-5

    def test_oracle_agreement_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            problem = random_problem(rng, 3)
            exact = solve(problem)
            oracle = brute_force_minimize(problem, 1e-3)
            assert exact.objective_value <= oracle.objective_value + 1e-5
            assert abs(exact.objective_value - oracle.objective_value) <= 1e-5

    def test_rejects_large_dimensions(self):
        problem = QPProblem.build(
            2.0 * np.eye(7), np.zeros(7), [], np.zeros(7), np.ones(7)
        )
        with pytest.raises(DimensionTooLarge):
            brute_force_minimize(problem)


class TestProblemConstruction:
    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            QPProblem.build([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0], [], [0, 0], [1, 1])

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError, match="empty box"):
            QPProblem.build(np.eye(2), [0.0, 0.0], [], [0, 2], [1, 1])

    def test_bad_pair_indices_rejected(self):
        with pytest.raises(ValueError, match="pair constraint"):
            QPProblem.build(np.eye(2), [0.0, 0.0], [(0, 2, 0.1)], [0, 0], [1, 1])

    def test_settings_must_be_positive(self):
        with pytest.raises(ValueError):
            SolverSettings(feasibility_tolerance=0.0)
