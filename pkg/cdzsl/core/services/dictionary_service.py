"""
Dictionary Service
------------------
Coupled dictionary learning: a visual dictionary D_x and an attribute dictionary D_z
sharing one sparse code per seen sample, plus codes for the unseen class prototypes.

The learned objective is

    (1/(Np))||X - D_x A||^2 + (1/(Nq))||Z - D_z A||^2 + (1/(Mq))||Z' - D_z B||^2
    + (lambda/(Nr))||A||_1 + (lambda/(Mr))||B||_1 + beta(||D_x||^2 + ||D_z||^2)

minimized by alternating a visual block (codes A, then D_x) and an attribute block
(codes B, then D_z, with A held fixed). In the default `visual` code update A is coded
against D_x alone; a sample keeps its new code only when that does not raise its coupled
terms, so full-batch training never raises the objective.

Functions:
- `init_dictionary()`: Seeded random dictionary with unit columns.
- `preprocess()`: Unit-normalize feature and attribute columns.
- `accept_codes()`: Keep only codes that do not raise the coupled per-sample objective.
- `update_visual_block()`: Code/D_x rounds of the visual block.
- `update_attribute_block()`: Code/D_z rounds of the attribute block.
- `coupled_objective()`: Objective terms for the trace.
- `train_coupled()`: Full training loop.
"""

import logging
from pathlib import Path

import numpy as np
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from cdzsl.core.exceptions import DimensionMismatch, StepDivergence
from cdzsl.core.models.training import (
    CoupledDictionary,
    TraceEntry,
    TrainingConfig,
    TrainingResult,
    TrainingSet,
    TrainingTrace,
)
from cdzsl.core.repositories.checkpoint_repository import CheckpointMeta, CheckpointRepository
from cdzsl.core.services.sparse_coding_service import batch_lasso
from cdzsl.core.utils.helper import derive_seeds, project_columns, unit_columns
from cdzsl.core.utils.logger import logger

MAX_HALVINGS = 10
DIVERGENCE_SLACK = 0.10
_EPS = np.finfo(np.float64).eps

# One fidelity term of a block: (targets Y, codes C, scale s) contributing s * ||Y - D C||^2.
Term = tuple[np.ndarray, np.ndarray, float]


def init_dictionary(rows: int, atoms: int, seed: int) -> np.ndarray:
    """
    Draws a rows x atoms standard normal matrix from a seeded stream and rescales
    every column to unit l2 norm.

    Args:
        rows (int): Signal dimension.
        atoms (int): Number of atoms.
        seed (int): Seed of the normal stream.

    Returns:
        np.ndarray: The initial dictionary.
    """
    if rows < 1 or atoms < 1:
        raise DimensionMismatch(f"dictionary shape must be positive, got {rows} x {atoms}")
    matrix = np.random.default_rng(seed).standard_normal((rows, atoms))
    return unit_columns(matrix)


def preprocess(data: TrainingSet, normalize_features: bool = True, normalize_attributes: bool = True) -> TrainingSet:
    """
    Rescales feature columns and/or attribute columns (seen and unseen) to unit l2 norm.
    """
    return TrainingSet(
        seen_features=unit_columns(data.seen_features) if normalize_features else data.seen_features,
        seen_attributes=unit_columns(data.seen_attributes) if normalize_attributes else data.seen_attributes,
        unseen_attributes=(
            unit_columns(data.unseen_attributes) if normalize_attributes else data.unseen_attributes
        ),
    )


def _block_objective(D: np.ndarray, terms: list[Term], beta: float) -> float:
    value = beta * float(np.sum(D * D))
    for Y, C, scale in terms:
        R = Y - D @ C
        value += scale * float(np.sum(R * R))
    return value


def _gradient_step(D: np.ndarray, terms: list[Term], beta: float, step: float, normalize: bool) -> np.ndarray:
    """
    One (projected) gradient step of `_block_objective` with step `step / L_block`.
    """
    gradient = 2.0 * beta * D
    lipschitz = beta
    for Y, C, scale in terms:
        gradient = gradient + 2.0 * scale * ((D @ C - Y) @ C.T)
        if C.size:
            lipschitz += scale * float(np.linalg.norm(C, 2)) ** 2
    lipschitz *= 2.0
    if lipschitz == 0.0:
        return D.copy()
    D_new = D - (step / lipschitz) * gradient
    return project_columns(D_new) if normalize else D_new


def _guarded_step(
    D: np.ndarray,
    terms: list[Term],
    config: TrainingConfig,
    step: float,
    full_batch: bool,
    block: str,
) -> np.ndarray:
    """
    Dictionary step with the divergence safeguard.

    In full-batch mode a step that raises the block objective by more than 10% is
    retried with half the step, at most `MAX_HALVINGS` times. Rises below rounding level
    of the data terms never count as divergence.

    Raises:
        StepDivergence: If every halving still diverges.
    """
    before = _block_objective(D, terms, config.dict_penalty) if full_batch else 0.0
    floor = _EPS * sum(scale * float(np.sum(Y * Y)) for Y, _, scale in terms)
    D_new = D
    for attempt in Retrying(
        stop=stop_after_attempt(MAX_HALVINGS + 1),
        retry=retry_if_exception_type(StepDivergence),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True,
    ):
        with attempt:
            halvings = attempt.retry_state.attempt_number - 1
            D_new = _gradient_step(
                D, terms, config.dict_penalty, step * 0.5**halvings, config.normalize_columns
            )
            if full_batch:
                after = _block_objective(D_new, terms, config.dict_penalty)
                if after > before * (1.0 + DIVERGENCE_SLACK) + floor:
                    raise StepDivergence(
                        f"{block} dictionary step raised the block objective from {before:.6g} to {after:.6g}"
                    )
    return D_new


def _step_size(config: TrainingConfig, full_batch: bool, step_index: int) -> float:
    if full_batch:
        return config.dict_step
    return config.dict_step / (1.0 + step_index / 10.0)


def _batch_columns(rng: np.random.Generator, n: int, config: TrainingConfig) -> np.ndarray:
    if config.is_full_batch(n):
        return np.arange(n)
    return np.sort(rng.choice(n, size=config.batch_size, replace=False))


def _solve(dictionary, targets, warm, data_weight, sparsity_weight, config):
    return batch_lasso(
        dictionary,
        targets,
        data_weight=data_weight,
        sparsity_weight=sparsity_weight,
        opts=config.solver,
        warm_starts=warm,
        strategy=config.solver_strategy,
    ).codes


def _code_objectives(d_x, d_z, X, Z, C, weight) -> np.ndarray:
    p, q = X.shape[0], Z.shape[0]
    Rx = X - d_x @ C
    Rz = Z - d_z @ C
    return (
        np.einsum("ij,ij->j", Rx, Rx) / p
        + np.einsum("ij,ij->j", Rz, Rz) / q
        + weight * np.abs(C).sum(axis=0)
    )


def accept_codes(
    d_x: np.ndarray,
    d_z: np.ndarray,
    X: np.ndarray,
    Z: np.ndarray,
    previous: np.ndarray,
    proposed: np.ndarray,
    weight: float,
) -> np.ndarray:
    """
    Per column, keeps the proposed code, or the largest blend
    previous + 2^-h (proposed - previous) with h <= MAX_HALVINGS, that does not raise
    (1/p)||x - D_x a||^2 + (1/q)||z - D_z a||^2 + weight ||a||_1. Columns where no blend
    qualifies keep their previous code.

    Returns:
        np.ndarray: The accepted codes.
    """
    base = _code_objectives(d_x, d_z, X, Z, previous, weight)
    accepted = previous.copy()
    pending = np.arange(previous.shape[1])
    theta = 1.0
    for _ in range(MAX_HALVINGS + 1):
        if pending.size == 0:
            break
        trial = previous[:, pending] + theta * (proposed[:, pending] - previous[:, pending])
        ok = _code_objectives(d_x, d_z, X[:, pending], Z[:, pending], trial, weight) <= base[pending]
        accepted[:, pending[ok]] = trial[:, ok]
        pending = pending[~ok]
        theta *= 0.5
    if pending.size:
        logger.debug("codes kept from the previous round", extra={"columns": int(pending.size)})
    return accepted


def update_visual_block(
    d_x: np.ndarray,
    X: np.ndarray,
    A: np.ndarray,
    config: TrainingConfig,
    *,
    rng: np.random.Generator | None = None,
    coupling: tuple[np.ndarray, np.ndarray] | None = None,
    step_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Runs `inner_alternations` rounds of {codes of a sample batch; one D_x step}.

    Args:
        d_x (np.ndarray): Visual dictionary, p x r.
        X (np.ndarray): Seen features, p x N.
        A (np.ndarray): Current codes, r x N (warm starts).
        config (TrainingConfig): Training configuration.
        rng (np.random.Generator | None): Batch sampler; seeded from `config.seed` if omitted.
        coupling (tuple | None): `(D_z, Z)`. The `joint` code update solves codes with the
            seen-attribute fidelity; the `visual` one solves them from X alone and passes
            them through `accept_codes`. None solves codes from X alone, unchecked.
        step_index (int): Outer iteration index for the step decay.

    Returns:
        tuple[np.ndarray, np.ndarray]: Updated D_x and A.

    Raises:
        DimensionMismatch: On inconsistent shapes.
        StepDivergence: When the safeguard gives up.
    """
    p, r = d_x.shape
    if X.shape[0] != p or A.shape != (r, X.shape[1]):
        raise DimensionMismatch(f"D_x {d_x.shape}, X {X.shape} and A {A.shape} are inconsistent")
    n = X.shape[1]
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    full_batch = config.is_full_batch(n)
    step = _step_size(config, full_batch, step_index)
    weight = config.sparsity / r
    A = A.copy()

    if coupling is not None:
        d_z, Z = coupling
        q = d_z.shape[0]
        if Z.shape != (q, n) or d_z.shape[1] != r:
            raise DimensionMismatch(f"D_z {d_z.shape} and Z {Z.shape} do not match the visual block")

    for _ in range(config.inner_alternations):
        cols = _batch_columns(rng, n, config)
        if coupling is None:
            A[:, cols] = _solve(d_x, X[:, cols], A[:, cols], 1.0 / p, weight, config)
        elif config.code_update == "joint":
            stacked = np.vstack([d_x / np.sqrt(p), d_z / np.sqrt(q)])
            targets = np.vstack([X[:, cols] / np.sqrt(p), Z[:, cols] / np.sqrt(q)])
            A[:, cols] = _solve(stacked, targets, A[:, cols], 1.0, weight, config)
        else:
            proposed = _solve(d_x, X[:, cols], A[:, cols], 1.0 / p, weight, config)
            A[:, cols] = accept_codes(d_x, d_z, X[:, cols], Z[:, cols], A[:, cols], proposed, weight)

        terms = [(X[:, cols], A[:, cols], 1.0 / (cols.size * p))]
        d_x = _guarded_step(d_x, terms, config, step, full_batch, "visual")
    return d_x, A


def update_attribute_block(
    d_z: np.ndarray,
    Z: np.ndarray,
    Zprime: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    config: TrainingConfig,
    *,
    rng: np.random.Generator | None = None,
    step_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Runs `attribute_alternations` rounds of {prototype codes B; one D_z step}. A is read only.

    Returns:
        tuple[np.ndarray, np.ndarray]: Updated D_z and B.

    Raises:
        DimensionMismatch: On inconsistent shapes.
        StepDivergence: When the safeguard gives up.
    """
    q, r = d_z.shape
    n, m = Z.shape[1], Zprime.shape[1]
    if Z.shape[0] != q or Zprime.shape[0] != q or A.shape != (r, n) or B.shape != (r, m):
        raise DimensionMismatch(
            f"D_z {d_z.shape}, Z {Z.shape}, Z' {Zprime.shape}, A {A.shape}, B {B.shape} are inconsistent"
        )
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    full_batch = config.is_full_batch(n)
    step = _step_size(config, full_batch, step_index)
    B = B.copy()

    for _ in range(config.attribute_alternations):
        B = _solve(d_z, Zprime, B, 1.0 / q, config.sparsity / r, config)
        cols = _batch_columns(rng, n, config)
        terms = [
            (Z[:, cols], A[:, cols], 1.0 / (cols.size * q)),
            (Zprime, B, 1.0 / (m * q)),
        ]
        d_z = _guarded_step(d_z, terms, config, step, full_batch, "attribute")
    return d_z, B


def coupled_objective(
    data: TrainingSet,
    dictionary: CoupledDictionary,
    A: np.ndarray,
    B: np.ndarray,
    config: TrainingConfig,
    iteration: int = 0,
) -> TraceEntry:
    """
    Evaluates every term of the coupled objective at the given state.
    """
    n, m = data.n_seen, data.n_unseen
    p, q, r = data.feature_dim, data.attribute_dim, dictionary.atom_count
    lam = config.sparsity

    def sq(M: np.ndarray) -> float:
        return float(np.sum(M * M))

    return TraceEntry(
        iteration=iteration,
        visual_fidelity=sq(data.seen_features - dictionary.d_x @ A) / (n * p),
        seen_attribute_fidelity=sq(data.seen_attributes - dictionary.d_z @ A) / (n * q),
        unseen_attribute_fidelity=sq(data.unseen_attributes - dictionary.d_z @ B) / (m * q),
        sparsity=lam / (n * r) * float(np.abs(A).sum()) + lam / (m * r) * float(np.abs(B).sum()),
        dictionary_penalty=config.dict_penalty * (sq(dictionary.d_x) + sq(dictionary.d_z)),
    )


def train_coupled(
    data: TrainingSet,
    config: TrainingConfig,
    *,
    checkpoint_dir: Path | None = None,
    config_text: str | None = None,
    meta: CheckpointMeta | None = None,
) -> TrainingResult:
    """
    Learns the coupled dictionaries and the codes of seen samples and unseen prototypes.

    Args:
        data (TrainingSet): Training matrices (already preprocessed).
        config (TrainingConfig): Training configuration.
        checkpoint_dir (Path | None): Written every `config.checkpoint_every` outer iterations.
        config_text (str | None): Run configuration echo stored with checkpoints.
        meta (CheckpointMeta | None): Preprocessing flags stored with checkpoints.

    Returns:
        TrainingResult: Final dictionaries, codes and the objective trace.
    """
    p, q, r = data.feature_dim, data.attribute_dim, config.atom_count
    dx_seed, dz_seed, batch_seed = derive_seeds(config.seed, 3)
    d_x = init_dictionary(p, r, dx_seed)
    d_z = init_dictionary(q, r, dz_seed)
    rng = np.random.default_rng(batch_seed)
    A = np.zeros((r, data.n_seen))
    B = np.zeros((r, data.n_unseen))
    entries: list[TraceEntry] = []

    logger.info(
        "training coupled dictionaries",
        extra={"p": p, "q": q, "r": r, "n_seen": data.n_seen, "n_unseen": data.n_unseen,
               "code_update": config.code_update},
    )
    for t in range(config.outer_iterations):
        # the first visual round has no attribute fit to protect yet
        coupling = None if config.code_update == "visual" and t == 0 else (d_z, data.seen_attributes)
        d_x, A = update_visual_block(
            d_x, data.seen_features, A, config, rng=rng, coupling=coupling, step_index=t
        )
        d_z, B = update_attribute_block(
            d_z, data.seen_attributes, data.unseen_attributes, A, B, config, rng=rng, step_index=t
        )
        entry = coupled_objective(data, CoupledDictionary(d_x=d_x, d_z=d_z), A, B, config, iteration=t + 1)
        entries.append(entry)
        logger.info("outer iteration", extra={"iteration": t + 1, "objective": entry.total})

        if checkpoint_dir is not None and (t + 1) % config.checkpoint_every == 0:
            CheckpointRepository.save_checkpoint(
                checkpoint_dir,
                TrainingResult(
                    dictionary=CoupledDictionary(d_x=d_x, d_z=d_z), codes_seen=A, codes_unseen=B,
                    trace=TrainingTrace(entries=list(entries)),
                ),
                iteration=t + 1,
                config_text=config_text,
                meta=meta,
            )

    return TrainingResult(
        dictionary=CoupledDictionary(d_x=d_x, d_z=d_z),
        codes_seen=A,
        codes_unseen=B,
        trace=TrainingTrace(entries=entries),
    )
