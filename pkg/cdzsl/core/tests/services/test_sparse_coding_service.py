import numpy as np
import pytest

from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.models.sparse_coding import LassoProblem, SolverOptions
from cdzsl.core.services.sparse_coding_service import (
    batch_lasso,
    cd_lasso_oracle,
    lasso_objective,
    lasso_solve,
    soft_threshold,
    spectral_bound,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def problem(rng):
    """Small well-posed instance: 30 x 10 Gaussian dictionary."""
    D = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    return LassoProblem(dictionary=D, target=y, sparsity_weight=0.5, data_weight=1.0)


def test_soft_threshold_values():
    out = soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), 1.0)
    np.testing.assert_array_equal(out, [-2.0, 0.0, 0.0, 0.0, 2.0])


def test_soft_threshold_rejects_negative_threshold():
    with pytest.raises(ValueError):
        soft_threshold(np.ones(3), -0.1)


def test_spectral_bound_of_diagonal_dictionary():
    D = np.zeros((5, 3))
    D[0, 0], D[1, 1], D[2, 2] = 3.0, 1.0, 0.5
    assert spectral_bound(D) == pytest.approx(9.0, rel=1e-10)


def test_spectral_bound_of_zero_dictionary_is_zero():
    assert spectral_bound(np.zeros((4, 2))) == 0.0


def test_lasso_solve_matches_coordinate_descent(problem):
    """Test the proximal-gradient solve against the coordinate-descent reference."""
    reference = cd_lasso_oracle(problem)

    result = lasso_solve(problem)

    assert result.converged
    assert result.objective == pytest.approx(lasso_objective(problem, reference), rel=1e-6)
    np.testing.assert_allclose(result.code, reference, atol=1e-4)


def test_lasso_solve_backtracking_without_acceleration(problem):
    reference = cd_lasso_oracle(problem)
    opts = SolverOptions(acceleration=False, step_rule="backtracking", max_iterations=20000, tolerance=1e-12)

    result = lasso_solve(problem, opts)

    assert result.objective == pytest.approx(lasso_objective(problem, reference), rel=1e-6)


def test_objective_trace_is_nonincreasing(problem):
    result = lasso_solve(problem, SolverOptions(polish=False))

    trace = np.asarray(result.objective_trace)
    assert trace.size > 1
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))


def test_huge_penalty_gives_zero_code(problem):
    heavy = problem.model_copy(update={"sparsity_weight": 1e6})

    result = lasso_solve(heavy)

    np.testing.assert_array_equal(result.code, np.zeros(10))
    assert result.objective == pytest.approx(float(problem.target @ problem.target))


def test_zero_dictionary_returns_zero_code():
    problem = LassoProblem(dictionary=np.zeros((4, 3)), target=np.ones(4), sparsity_weight=0.1)

    result = lasso_solve(problem)

    assert result.converged
    assert result.iterations == 0
    assert result.objective == pytest.approx(4.0)


def test_warm_start_length_is_checked(problem):
    with pytest.raises(DimensionMismatch):
        lasso_solve(problem, warm_start=np.zeros(3))


def test_problem_rejects_mismatched_target(rng):
    with pytest.raises(DimensionMismatch):
        LassoProblem(dictionary=rng.standard_normal((5, 3)), target=np.ones(4), sparsity_weight=0.1)


def test_batch_strategies_agree(rng):
    D = rng.standard_normal((20, 12))
    Y = rng.standard_normal((20, 6))

    columns = batch_lasso(D, Y, data_weight=0.5, sparsity_weight=0.2, strategy="columns")
    vectorized = batch_lasso(D, Y, data_weight=0.5, sparsity_weight=0.2, strategy="vectorized")

    np.testing.assert_allclose(columns.objectives, vectorized.objectives, rtol=1e-6)
    np.testing.assert_allclose(columns.codes, vectorized.codes, atol=1e-4)


def test_threaded_batch_matches_sequential(rng):
    D = rng.standard_normal((15, 8))
    Y = rng.standard_normal((15, 9))

    sequential = batch_lasso(D, Y, data_weight=1.0, sparsity_weight=0.3, n_jobs=1)
    threaded = batch_lasso(D, Y, data_weight=1.0, sparsity_weight=0.3, n_jobs=4)

    np.testing.assert_array_equal(sequential.codes, threaded.codes)


def test_batch_column_matches_single_solve(rng):
    D = rng.standard_normal((15, 8))
    Y = rng.standard_normal((15, 3))

    batch = batch_lasso(D, Y, data_weight=1.0, sparsity_weight=0.3)
    single = lasso_solve(LassoProblem(dictionary=D, target=Y[:, 1], sparsity_weight=0.3))

    np.testing.assert_array_equal(batch.codes[:, 1], single.code)


def test_batch_with_no_columns():
    out = batch_lasso(np.eye(3), np.zeros((3, 0)), data_weight=1.0, sparsity_weight=0.1)

    assert out.codes.shape == (3, 0)
    assert out.all_converged


def test_batch_rejects_mismatched_targets():
    with pytest.raises(DimensionMismatch):
        batch_lasso(np.eye(3), np.zeros((4, 2)), data_weight=1.0, sparsity_weight=0.1)


def _random_problem(rng: np.random.Generator) -> LassoProblem:
    d = int(rng.integers(2, 21))
    r = int(rng.integers(1, 51))
    D = rng.standard_normal((d, r))
    y = rng.standard_normal(d)
    data_weight = float(rng.uniform(0.1, 2.0))
    # a fraction of lambda_max keeps the minimizer sparse but nonzero
    lambda_max = 2.0 * data_weight * float(np.abs(D.T @ y).max())
    return LassoProblem(
        dictionary=D, target=y, data_weight=data_weight,
        sparsity_weight=float(rng.uniform(0.05, 0.6)) * lambda_max,
    )


def _gradient(problem: LassoProblem, code: np.ndarray) -> np.ndarray:
    D = problem.dictionary
    return 2.0 * problem.data_weight * (D.T @ (D @ code - problem.target))


def test_lasso_solve_agrees_with_oracle_on_random_problems():
    """100 seeded problems: objective within 1e-6 of coordinate descent, optimality certificate holds."""
    rng = np.random.default_rng(2024)
    opts = SolverOptions(max_iterations=20000, tolerance=1e-15)

    for _ in range(100):
        problem = _random_problem(rng)
        reference = cd_lasso_oracle(problem)

        result = lasso_solve(problem, opts)

        assert abs(result.objective - lasso_objective(problem, reference)) <= 1e-6
        w = problem.sparsity_weight
        grad = _gradient(problem, result.code)
        active = result.code != 0.0
        assert np.all(np.abs(grad[active] + w * np.sign(result.code[active])) <= 1e-4 * w)
        assert np.all(np.abs(grad[~active]) <= w * (1.0 + 1e-4))


def test_orthonormal_dictionary_soft_thresholds_target():
    problem = LassoProblem(
        dictionary=np.eye(3), target=np.array([2.0, -0.1, 0.5]), data_weight=1.0, sparsity_weight=1.0
    )

    result = lasso_solve(problem)

    np.testing.assert_allclose(result.code, [1.5, 0.0, 0.0], atol=1e-10)


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_scaling_rows_rescales_sparsity_weight(rng, scale):
    D = rng.standard_normal((12, 8))
    y = rng.standard_normal(12)
    scaled = LassoProblem(dictionary=scale * D, target=scale * y, sparsity_weight=0.8)
    plain = LassoProblem(dictionary=D, target=y, sparsity_weight=0.8 / scale**2)

    np.testing.assert_allclose(lasso_solve(scaled).code, lasso_solve(plain).code, atol=1e-6)
