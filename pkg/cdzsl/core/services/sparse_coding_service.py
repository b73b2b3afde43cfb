"""
Sparse Coding Service
---------------------
Solvers for the l1-regularized least-squares (LASSO) subproblems used by every stage.

Features:
- Proximal gradient with a fixed 1/L step or backtracking, plain or momentum-accelerated.
  The accelerated mode keeps the best iterate (monotone variant) and restarts momentum on rejection,
  so the recorded objective never increases.
- Optional support polish: an exact sign-constrained least-squares solve on the final support.
- Column-wise batch solving, sequential/threaded or fully vectorized.
- Cyclic coordinate descent oracle for verification on small problems.

Functions:
- `soft_threshold()`: Proximal operator of the l1 norm.
- `spectral_bound()`: Largest squared singular value by power iteration.
- `lasso_objective()`: Objective value of a code.
- `lasso_solve()`: Solve one LASSO problem.
- `cd_lasso_oracle()`: Slow reference solver.
- `batch_lasso()`: Solve one problem per target column.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
import scipy.linalg

from cdzsl.core.config.settings import settings
from cdzsl.core.exceptions import DimensionMismatch, NonConvergence
from cdzsl.core.models.sparse_coding import (
    LassoProblem,
    LassoResult,
    SolverOptions,
    SparseCodeMatrix,
)
from cdzsl.core.utils.logger import logger

POWER_ITERATIONS = 50
ORACLE_STOP = 1e-10
ORACLE_MAX_SWEEPS = 1_000_000
_TINY = np.finfo(np.float64).tiny


def soft_threshold(v: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """
    Componentwise soft thresholding, sign(v) * max(|v| - t, 0).

    Args:
        v (np.ndarray): Input values.
        t (float | np.ndarray): Nonnegative threshold (scalar or broadcastable).

    Returns:
        np.ndarray: Thresholded values.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def spectral_bound(dictionary: np.ndarray, iterations: int = POWER_ITERATIONS) -> float:
    """
    Estimates the largest squared singular value of a dictionary by power iteration.

    The start vector is drawn from a fixed-seed stream, so the estimate is a
    deterministic function of the dictionary.

    Args:
        dictionary (np.ndarray): d x r matrix.
        iterations (int): Power iterations on D^T D.

    Returns:
        float: sigma_max(D)^2 (0.0 for an all-zero dictionary).
    """
    if not np.any(dictionary):
        return 0.0
    v = np.random.default_rng(0).standard_normal(dictionary.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        w = dictionary.T @ (dictionary @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(np.linalg.norm(dictionary @ v) ** 2)


def lasso_objective(problem: LassoProblem, code: np.ndarray) -> float:
    """
    Evaluates data_weight * ||target - D code||^2 + sparsity_weight * ||code||_1.
    """
    residual = problem.target - problem.dictionary @ code
    return float(
        problem.data_weight * residual @ residual
        + problem.sparsity_weight * np.abs(code).sum()
    )


def _objectives(D, Y, X, data_weight, sparsity_weight):
    R = Y - D @ X
    return data_weight * np.einsum("ij,ij->j", R, R) + sparsity_weight * np.abs(X).sum(axis=0)


def _proximal_gradient(
    D: np.ndarray,
    Y: np.ndarray,
    X0: np.ndarray,
    data_weight: float,
    sparsity_weight: float,
    opts: SolverOptions,
    lipschitz: float,
    record_trace: bool = False,
):
    """
    Advances every column of Y through the same proximal-gradient iteration.

    Columns stop independently once their relative objective decrease falls to
    `opts.tolerance` on an accepted step.

    Returns:
        tuple: (codes, objectives, iterations, converged, trace) where trace is a
        list of per-iteration objective arrays when `record_trace` is set.
    """
    n = Y.shape[1]
    X = X0.copy()
    F = _objectives(D, Y, X, data_weight, sparsity_weight)
    Z = X.copy()
    t = np.ones(n)
    start = lipschitz if opts.step_rule == "fixed" else lipschitz / 8.0
    L = np.full(n, start if start > 0 else 1.0)
    iterations = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    trace = [F.copy()] if record_trace else []

    for it in range(1, opts.max_iterations + 1):
        if active.size == 0:
            break
        Xa, Za, Fa, Ya = X[:, active], Z[:, active], F[active], Y[:, active]
        Rz = Ya - D @ Za
        grad = -2.0 * data_weight * (D.T @ Rz)

        La = L[active]
        if opts.step_rule == "fixed":
            U = soft_threshold(Za - grad / La, sparsity_weight / La)
        else:
            fz = data_weight * np.einsum("ij,ij->j", Rz, Rz)
            for _ in range(60):
                U = soft_threshold(Za - grad / La, sparsity_weight / La)
                Ru = Ya - D @ U
                fu = data_weight * np.einsum("ij,ij->j", Ru, Ru)
                diff = U - Za
                model = fz + np.einsum("ij,ij->j", grad, diff) + 0.5 * La * np.einsum("ij,ij->j", diff, diff)
                bad = fu > model + 1e-12 * np.abs(model)
                if not bad.any():
                    break
                La = np.where(bad, 2.0 * La, La)
            L[active] = La

        Fu = _objectives(D, Ya, U, data_weight, sparsity_weight)
        if opts.acceleration:
            accept = Fu <= Fa
            Xn = np.where(accept, U, Xa)
            Fn = np.where(accept, Fu, Fa)
            ta = t[active]
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
            Zn = Xn + (ta / tn) * (U - Xn) + ((ta - 1.0) / tn) * (Xn - Xa)
            # restart momentum where the candidate was rejected
            Zn = np.where(accept, Zn, Xa)
            tn = np.where(accept, tn, 1.0)
            t[active] = tn
        else:
            accept = np.ones(active.size, dtype=bool)
            Xn, Fn, Zn = U, Fu, U

        rel = (Fa - Fn) / np.maximum(np.abs(Fa), _TINY)
        done = accept & (rel <= opts.tolerance)

        X[:, active] = Xn
        Z[:, active] = Zn
        F[active] = Fn
        iterations[active] = it
        if record_trace:
            trace.append(F.copy())
        converged[active[done]] = True
        active = active[~done]

    return X, F, iterations, converged, trace


def _polish_column(D, y, code, data_weight, sparsity_weight, objective):
    """
    Exact solve of the LASSO stationarity conditions on the support of `code`.

    Returns (code, objective) when the candidate keeps the support signs, satisfies the
    off-support conditions and does not raise the objective; otherwise None.
    """
    support = np.flatnonzero(code)
    signs_all = np.sign(code)
    shrink = sparsity_weight / (2.0 * data_weight)
    for _ in range(3):
        candidate = np.zeros_like(code)
        if support.size:
            Ds = D[:, support]
            signs = signs_all[support]
            gram = Ds.T @ Ds
            rhs = Ds.T @ y - shrink * signs
            sol = scipy.linalg.lstsq(gram, rhs)[0]
            if np.linalg.norm(gram @ sol - rhs) > 1e-10 * (1.0 + np.linalg.norm(rhs)):
                return None
            flipped = np.sign(sol) != signs
            if flipped.any():
                support = support[~flipped]
                continue
            candidate[support] = sol
        grad = -2.0 * data_weight * (D.T @ (y - D @ candidate))
        off = np.ones(code.shape[0], dtype=bool)
        off[support] = False
        if np.any(np.abs(grad[off]) > sparsity_weight * (1.0 + 1e-9) + 1e-14):
            return None
        residual = y - D @ candidate
        value = float(data_weight * residual @ residual + sparsity_weight * np.abs(candidate).sum())
        if value <= objective:
            return candidate, value
        return None
    return None


def lasso_solve(
    problem: LassoProblem,
    opts: SolverOptions | None = None,
    warm_start: np.ndarray | None = None,
    *,
    sigma_sq: float | None = None,
) -> LassoResult:
    """
    Solves one LASSO problem by proximal gradient.

    Args:
        problem (LassoProblem): The problem instance.
        opts (SolverOptions | None): Solver options; defaults when omitted.
        warm_start (np.ndarray | None): Initial code; zero vector when absent.
        sigma_sq (float | None): Precomputed sigma_max(D)^2 (computed when omitted).

    Returns:
        LassoResult: Best iterate, its objective and the objective trace.

    Raises:
        DimensionMismatch: If the warm start length differs from the code length.
    """
    opts = opts or SolverOptions()
    D, y = problem.dictionary, problem.target
    r = problem.code_length
    if warm_start is None:
        x0 = np.zeros(r)
    else:
        x0 = np.asarray(warm_start, dtype=np.float64)
        if x0.shape != (r,):
            raise DimensionMismatch(f"warm start length {x0.shape} != code length {r}")

    sigma2 = spectral_bound(D) if sigma_sq is None else sigma_sq
    if sigma2 == 0.0:
        objective = float(problem.data_weight * y @ y)
        return LassoResult(
            code=np.zeros(r), objective=objective, iterations=0, converged=True,
            objective_trace=[objective],
        )
    L = 2.0 * problem.data_weight * sigma2

    X, F, iterations, converged, trace = _proximal_gradient(
        D, y[:, None], x0[:, None], problem.data_weight, problem.sparsity_weight,
        opts, L, record_trace=True,
    )
    code, objective, ok = X[:, 0], float(F[0]), bool(converged[0])
    objective_trace = [float(f[0]) for f in trace]

    if opts.polish:
        polished = _polish_column(D, y, code, problem.data_weight, problem.sparsity_weight, objective)
        if polished is not None:
            code, objective = polished
            objective_trace.append(objective)
            ok = True

    if not ok:
        logger.warning(
            "LASSO solve did not converge",
            extra={"iterations": int(iterations[0]), "objective": objective},
        )
    return LassoResult(
        code=code, objective=objective, iterations=int(iterations[0]),
        converged=ok, objective_trace=objective_trace,
    )


def cd_lasso_oracle(problem: LassoProblem) -> np.ndarray:
    """
    Cyclic coordinate descent with exact per-coordinate soft-threshold updates.

    Runs until the largest coordinate change in a sweep is below 1e-10. Intended only
    for tests on small instances.

    Args:
        problem (LassoProblem): The problem instance.

    Returns:
        np.ndarray: The minimizing code.

    Raises:
        NonConvergence: If the sweep budget is exhausted.
    """
    D, y = problem.dictionary, problem.target
    w, s = problem.data_weight, problem.sparsity_weight
    r = problem.code_length
    a = np.zeros(r)
    col_sq = np.einsum("ij,ij->j", D, D)

    for _ in range(ORACLE_MAX_SWEEPS):
        residual = y - D @ a
        max_change = 0.0
        for j in range(r):
            if col_sq[j] == 0.0:
                continue
            rho = D[:, j] @ residual + col_sq[j] * a[j]
            new = soft_threshold(np.array([2.0 * w * rho]), s)[0] / (2.0 * w * col_sq[j])
            delta = new - a[j]
            if delta != 0.0:
                residual -= D[:, j] * delta
                a[j] = new
                max_change = max(max_change, abs(delta))
        if max_change < ORACLE_STOP:
            return a
    raise NonConvergence("coordinate descent oracle exhausted its sweep budget")


def batch_lasso(
    dictionary: np.ndarray,
    targets: np.ndarray,
    *,
    data_weight: float,
    sparsity_weight: float,
    opts: SolverOptions | None = None,
    warm_starts: np.ndarray | None = None,
    strategy: Literal["columns", "vectorized"] = "columns",
    n_jobs: int | None = None,
) -> SparseCodeMatrix:
    """
    Solves one LASSO problem per target column against a shared dictionary.

    Column j of the result depends only on column j of `targets` (and its warm start),
    so results are independent of execution order and thread count.

    Args:
        dictionary (np.ndarray): d x r shared dictionary (read-only).
        targets (np.ndarray): d x n targets.
        data_weight (float): Fidelity weight.
        sparsity_weight (float): l1 weight.
        opts (SolverOptions | None): Solver options.
        warm_starts (np.ndarray | None): r x n initial codes.
        strategy (Literal): `columns` runs `lasso_solve` per column (threaded with
            `n_jobs`); `vectorized` iterates all columns as one matrix.
        n_jobs (int | None): Threads for the `columns` strategy (settings.N_JOBS by default).

    Returns:
        SparseCodeMatrix: Codes plus per-column objective, iterations and status.

    Raises:
        DimensionMismatch: On inconsistent shapes.
    """
    opts = opts or SolverOptions()
    D = np.asarray(dictionary, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != D.shape[0]:
        raise DimensionMismatch(f"targets shape {Y.shape} incompatible with dictionary {D.shape}")
    r, n = D.shape[1], Y.shape[1]
    if warm_starts is not None:
        warm_starts = np.asarray(warm_starts, dtype=np.float64)
        if warm_starts.shape != (r, n):
            raise DimensionMismatch(f"warm starts shape {warm_starts.shape} != {(r, n)}")
    if n == 0:
        return SparseCodeMatrix(
            codes=np.zeros((r, 0)), objectives=np.zeros(0),
            iterations=np.zeros(0, dtype=np.int64), converged=np.zeros(0, dtype=bool),
        )

    sigma2 = spectral_bound(D)

    if strategy == "columns":
        def solve(j: int) -> LassoResult:
            problem = LassoProblem(
                dictionary=D, target=Y[:, j],
                sparsity_weight=sparsity_weight, data_weight=data_weight,
            )
            warm = None if warm_starts is None else warm_starts[:, j]
            return lasso_solve(problem, opts, warm, sigma_sq=sigma2)

        workers = n_jobs or settings.N_JOBS
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(solve, range(n)))
        else:
            results = [solve(j) for j in range(n)]
        codes = np.column_stack([res.code for res in results])
        status = SparseCodeMatrix(
            codes=codes,
            objectives=np.array([res.objective for res in results]),
            iterations=np.array([res.iterations for res in results], dtype=np.int64),
            converged=np.array([res.converged for res in results], dtype=bool),
        )
    else:
        X0 = np.zeros((r, n)) if warm_starts is None else warm_starts
        if sigma2 == 0.0:
            R = Y
            return SparseCodeMatrix(
                codes=np.zeros((r, n)),
                objectives=data_weight * np.einsum("ij,ij->j", R, R),
                iterations=np.zeros(n, dtype=np.int64), converged=np.ones(n, dtype=bool),
            )
        X, F, iterations, converged, _ = _proximal_gradient(
            D, Y, X0, data_weight, sparsity_weight, opts, 2.0 * data_weight * sigma2
        )
        if opts.polish:
            for j in range(n):
                polished = _polish_column(D, Y[:, j], X[:, j], data_weight, sparsity_weight, F[j])
                if polished is not None:
                    X[:, j], F[j] = polished
                    converged[j] = True
        status = SparseCodeMatrix(codes=X, objectives=F, iterations=iterations, converged=converged)

    if not status.all_converged:
        logger.warning(
            "batch LASSO finished with unconverged columns",
            extra={"unconverged": int((~status.converged).sum()), "columns": n},
        )
    else:
        logger.debug("batch LASSO converged", extra={"columns": n, "strategy": strategy})
    return status
