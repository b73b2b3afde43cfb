"""
Prediction Service
------------------
Predicts attribute vectors of unseen-class samples from their visual features.

Features:
- Attribute-agnostic prediction (AAg): sparse-code the feature against D_x, decode with D_z.
- Attribute-aware prediction (AAw): adds gamma times the entropy of the soft assignment of the
  decoded attribute to the unseen prototypes, minimized by proximal gradient with backtracking
  from the AAg code.
- Soft assignment with a Student's-t kernel, normalized in log space.

Functions:
- `soft_assignment()`: Normalized t-kernel similarities to every prototype.
- `assignment_entropy()`: Shannon entropy of a soft assignment.
- `aag_predict()`: Attribute-agnostic prediction of one sample.
- `aaw_objective_and_gradient()`: Smooth AAw objective and its analytic gradient.
- `aaw_predict()`: Attribute-aware prediction of one sample.
- `predict_attributes()`: Predict a batch of samples.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from scipy.special import entr, logsumexp, softmax

from cdzsl.core.config.settings import settings
from cdzsl.core.exceptions import DimensionMismatch
from cdzsl.core.models.prediction import AAwConfig, AttributePrediction, PredictionBatch, SoftAssignment
from cdzsl.core.models.sparse_coding import LassoProblem, SolverOptions
from cdzsl.core.models.training import CoupledDictionary
from cdzsl.core.services.sparse_coding_service import (
    batch_lasso,
    lasso_solve,
    soft_threshold,
    spectral_bound,
)
from cdzsl.core.utils.logger import logger

MAX_BACKTRACKS = 60
_TINY = np.finfo(np.float64).tiny


def _log_kernel(attribute: np.ndarray, prototypes: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Returns (log t-kernel per prototype, attribute - prototype differences)."""
    if prototypes.ndim != 2 or prototypes.shape[0] != attribute.shape[0]:
        raise DimensionMismatch(
            f"prototypes {prototypes.shape} do not match attribute length {attribute.shape[0]}"
        )
    diff = attribute[:, None] - prototypes
    sq_dist = np.einsum("ij,ij->j", diff, diff)
    return -0.5 * (rho + 1.0) * np.log1p(sq_dist / rho), diff


def soft_assignment(code: np.ndarray, d_z: np.ndarray, Zprime: np.ndarray, rho: float) -> SoftAssignment:
    """
    p_m proportional to (1 + ||D_z code - z'_m||^2 / rho)^(-(rho + 1) / 2), normalized over m.

    Args:
        code (np.ndarray): Sparse code, length r.
        d_z (np.ndarray): Attribute dictionary, q x r.
        Zprime (np.ndarray): Unseen prototypes, q x M.
        rho (float): Kernel parameter (> 0).

    Returns:
        SoftAssignment: Probabilities over the prototypes.

    Raises:
        DimensionMismatch: On inconsistent shapes.
    """
    if rho <= 0.0:
        raise ValueError("kernel parameter must be positive")
    if d_z.shape[1] != code.shape[0]:
        raise DimensionMismatch(f"code length {code.shape[0]} != D_z columns {d_z.shape[1]}")
    log_kernel, _ = _log_kernel(d_z @ code, Zprime, rho)
    return SoftAssignment(probabilities=softmax(log_kernel), kernel_param=rho)


def assignment_entropy(assignment: SoftAssignment) -> float:
    """H = -sum p log p with 0 log 0 = 0."""
    return float(entr(assignment.probabilities).sum())


def aag_predict(
    dictionary: CoupledDictionary,
    x: np.ndarray,
    sparsity: float,
    opts: SolverOptions | None = None,
) -> AttributePrediction:
    """
    Attribute-agnostic prediction: code = argmin (1/p)||x - D_x a||^2 + (lambda/r)||a||_1,
    attribute = D_z code.

    Args:
        dictionary (CoupledDictionary): Trained dictionaries.
        x (np.ndarray): Feature vector, length p.
        sparsity (float): lambda.
        opts (SolverOptions | None): LASSO solver options.

    Returns:
        AttributePrediction: Code, decoded attribute and the LASSO objective trace.
    """
    if x.shape != (dictionary.feature_dim,):
        raise DimensionMismatch(f"feature length {x.shape} != p = {dictionary.feature_dim}")
    problem = LassoProblem(
        dictionary=dictionary.d_x,
        target=x,
        sparsity_weight=sparsity / dictionary.atom_count,
        data_weight=1.0 / dictionary.feature_dim,
    )
    result = lasso_solve(problem, opts)
    return AttributePrediction(
        code=result.code,
        attribute=dictionary.d_z @ result.code,
        objective_trace=result.objective_trace,
        converged=result.converged,
    )


def aaw_objective_and_gradient(
    code: np.ndarray,
    x: np.ndarray,
    dictionary: CoupledDictionary,
    Zprime: np.ndarray,
    config: AAwConfig,
) -> tuple[float, np.ndarray]:
    """
    Smooth part g(a) = (1/p)||x - D_x a||^2 + gamma * H(p(a)) and its gradient.

    The entropy gradient follows the chain
    dH/dl_k = -p_k (log p_k + H),  dl_k/dd_k = -c / (rho + d_k),  dd_k/dz = 2 (z - z'_k),
    with l_k the log-kernel, d_k the squared distance and c = (rho + 1) / 2.

    Returns:
        tuple[float, np.ndarray]: (g(a), grad g(a)).

    Raises:
        DimensionMismatch: On inconsistent shapes.
    """
    p = dictionary.feature_dim
    if x.shape != (p,) or code.shape != (dictionary.atom_count,):
        raise DimensionMismatch(f"feature {x.shape} / code {code.shape} do not match the dictionaries")
    residual = dictionary.d_x @ code - x
    value = float(residual @ residual) / p
    gradient = (2.0 / p) * (dictionary.d_x.T @ residual)
    if config.entropy_weight == 0.0:
        return value, gradient

    rho = config.kernel_param
    log_kernel, diff = _log_kernel(dictionary.d_z @ code, Zprime, rho)
    log_p = log_kernel - logsumexp(log_kernel)
    probs = np.exp(log_p)
    entropy = float(entr(probs).sum())
    sq_dist = np.einsum("ij,ij->j", diff, diff)

    d_entropy = -probs * (log_p + entropy)
    d_log_kernel = -0.5 * (rho + 1.0) / (rho + sq_dist)
    d_attribute = diff @ (2.0 * d_entropy * d_log_kernel)

    value += config.entropy_weight * entropy
    gradient = gradient + config.entropy_weight * (dictionary.d_z.T @ d_attribute)
    return value, gradient


def aaw_predict(
    dictionary: CoupledDictionary,
    Zprime: np.ndarray,
    x: np.ndarray,
    config: AAwConfig,
    opts: SolverOptions | None = None,
) -> AttributePrediction:
    """
    Attribute-aware prediction by proximal gradient on g(a) + (lambda/r)||a||_1,
    started from the AAg code.

    The backtracking rule enforces sufficient decrease, so the objective trace is
    non-increasing. The `fixed` rule uses the fidelity Lipschitz constant; its first step
    that fails to decrease the objective is discarded and ends the run as converged.

    Args:
        dictionary (CoupledDictionary): Trained dictionaries.
        Zprime (np.ndarray): Unseen prototypes, q x M.
        x (np.ndarray): Feature vector, length p.
        config (AAwConfig): AAw options.
        opts (SolverOptions | None): Options of the AAg initialization.

    Returns:
        AttributePrediction: Best code, its decoded attribute and the objective trace.
    """
    if Zprime.ndim != 2 or Zprime.shape[0] != dictionary.attribute_dim:
        raise DimensionMismatch(f"prototypes {Zprime.shape} do not match q = {dictionary.attribute_dim}")
    start = aag_predict(dictionary, x, config.sparsity, opts)
    weight = config.sparsity / dictionary.atom_count

    def objective(a: np.ndarray) -> tuple[float, np.ndarray]:
        return aaw_objective_and_gradient(a, x, dictionary, Zprime, config)

    code = start.code
    g, grad = objective(code)
    F = g + weight * float(np.abs(code).sum())
    trace = [F]
    L = 2.0 * spectral_bound(dictionary.d_x) / dictionary.feature_dim
    L = L if L > 0.0 else 1.0
    converged = False

    for _ in range(config.max_iterations):
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            candidate = soft_threshold(code - grad / L, weight / L)
            g_c, grad_c = objective(candidate)
            step = candidate - code
            model = g + float(grad @ step) + 0.5 * L * float(step @ step)
            F_c = g_c + weight * float(np.abs(candidate).sum())
            if config.step_rule == "fixed":
                accepted = True
                break
            if g_c <= model + 1e-12 * abs(model):
                accepted = True
                break
            L *= 2.0
        if not accepted:
            break
        if F_c > F:
            # no decrease left at working precision
            converged = True
            break

        decrease = (F - F_c) / max(abs(F), _TINY)
        code, g, grad, F = candidate, g_c, grad_c, F_c
        trace.append(F)
        if decrease <= config.tolerance:
            converged = True
            break

    if not converged:
        logger.warning(
            "attribute-aware prediction did not converge",
            extra={"iterations": len(trace) - 1, "objective": F},
        )
    return AttributePrediction(
        code=code, attribute=dictionary.d_z @ code, objective_trace=trace, converged=converged
    )


def predict_attributes(
    dictionary: CoupledDictionary,
    features: np.ndarray,
    Zprime: np.ndarray,
    method: Literal["aag", "aaw"],
    config: AAwConfig,
    opts: SolverOptions | None = None,
    n_jobs: int | None = None,
) -> PredictionBatch:
    """
    Predicts attributes for every column of `features`.

    Args:
        dictionary (CoupledDictionary): Trained dictionaries.
        features (np.ndarray): p x L test features.
        Zprime (np.ndarray): Unseen prototypes, q x M.
        method (Literal): `aag` or `aaw`.
        config (AAwConfig): Sparsity and AAw options.
        opts (SolverOptions | None): LASSO options.
        n_jobs (int | None): Worker threads (settings.N_JOBS by default).

    Returns:
        PredictionBatch: Codes, attributes and per-sample status.
    """
    if features.ndim != 2 or features.shape[0] != dictionary.feature_dim:
        raise DimensionMismatch(f"features {features.shape} do not match p = {dictionary.feature_dim}")
    workers = n_jobs or settings.N_JOBS

    if method == "aag":
        codes = batch_lasso(
            dictionary.d_x,
            features,
            data_weight=1.0 / dictionary.feature_dim,
            sparsity_weight=config.sparsity / dictionary.atom_count,
            opts=opts,
            strategy="columns",
            n_jobs=workers,
        )
        batch = PredictionBatch(
            codes=codes.codes, attributes=dictionary.d_z @ codes.codes,
            converged=codes.converged, method="aag",
        )
    else:
        columns = range(features.shape[1])

        def predict(j: int) -> AttributePrediction:
            return aaw_predict(dictionary, Zprime, features[:, j], config, opts)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(predict, columns))
        else:
            results = [predict(j) for j in columns]
        codes_matrix = (
            np.column_stack([res.code for res in results]) if results
            else np.zeros((dictionary.atom_count, 0))
        )
        batch = PredictionBatch(
            codes=codes_matrix,
            attributes=dictionary.d_z @ codes_matrix,
            converged=np.array([res.converged for res in results], dtype=bool),
            method="aaw",
        )

    logger.info(
        "attributes predicted",
        extra={"method": method, "samples": int(features.shape[1]),
               "unconverged": int((~batch.converged).sum())},
    )
    return batch
