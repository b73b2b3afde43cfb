"""
Label Service
-------------
Turns predicted attributes into class labels.

Features:
- Inductive labeling: nearest unseen prototype, and full distance rankings.
- Transductive labeling: exact kNN graph over [prototypes, predictions] with Gaussian
  weights, then label propagation from the prototypes to the predictions.
  Propagation solves (I - alpha S) F^T = (1 - alpha) Y^T with S = D^-1/2 W D^-1/2 and
  alpha = 1 / (1 + mu): dense Cholesky up to `DENSE_LIMIT` nodes, conjugate gradient above.

Functions:
- `nn_assign()`: Index of the nearest prototype.
- `rank_classes()`: K nearest prototypes.
- `build_knn_graph()`: Union-symmetrized kNN graph.
- `propagate_labels_closed()`: Linear-solve propagation.
- `propagate_labels_iterative()`: Fixed-point propagation.
- `transduce()`: Graph plus propagation for a batch of predictions.
- `taaw_classify()`: Transductive labels of a batch of predictions.
- `taaw_rank()`: Rankings by propagated score.
"""

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.spatial.distance import cdist

from cdzsl.core.exceptions import DimensionMismatch, InvalidGraph, InvalidK, SingularSystem
from cdzsl.core.models.graph import GraphConfig, LabelGraph, LabelMatrix
from cdzsl.core.utils.logger import logger

DENSE_LIMIT = 5000
DEGREE_EPSILON = 1e-12
CHUNK_ROWS = 1024
CG_TOLERANCE = 1e-13


def _sq_distances(predicted: np.ndarray, Zprime: np.ndarray) -> np.ndarray:
    if predicted.ndim != 1 or Zprime.ndim != 2 or Zprime.shape[0] != predicted.shape[0]:
        raise DimensionMismatch(f"prediction {predicted.shape} does not match prototypes {Zprime.shape}")
    diff = Zprime - predicted[:, None]
    return np.einsum("ij,ij->j", diff, diff)


def nn_assign(predicted: np.ndarray, Zprime: np.ndarray) -> int:
    """
    Index of the prototype nearest to `predicted` (lowest index on ties).
    """
    return int(np.argmin(_sq_distances(predicted, Zprime)))


def rank_classes(predicted: np.ndarray, Zprime: np.ndarray, k: int) -> list[int]:
    """
    The `k` prototype indices nearest to `predicted`, ascending by distance, ties by index.

    Raises:
        InvalidK: If k is outside 1..M.
    """
    m = Zprime.shape[1]
    if not 1 <= k <= m:
        raise InvalidK(f"K = {k} outside 1..{m}")
    return np.argsort(_sq_distances(predicted, Zprime), kind="stable")[:k].tolist()


def build_knn_graph(
    attributes: np.ndarray,
    k: int,
    sigma: float | str = "auto",
    *,
    n_labeled: int = 0,
) -> LabelGraph:
    """
    Exact kNN graph with Gaussian weights exp(-||v_m - v_n||^2 / (2 sigma^2)).

    An edge is kept when either endpoint selects the other. Each undirected edge is
    weighted once and mirrored, so W is exactly symmetric.

    Args:
        attributes (np.ndarray): q x n node matrix.
        k (int): Neighbors selected per node (1 <= k < n).
        sigma (float | str): Kernel width or `auto` (median retained edge length).
        n_labeled (int): Number of leading prototype nodes.

    Returns:
        LabelGraph: The graph.

    Raises:
        InvalidGraph: If k or sigma are invalid for the node set.
    """
    if attributes.ndim != 2:
        raise InvalidGraph(f"node matrix must be 2-D, got {attributes.ndim}-D")
    n = attributes.shape[1]
    if not 1 <= k < n:
        raise InvalidGraph(f"k = {k} must satisfy 1 <= k < {n} nodes")
    nodes = np.ascontiguousarray(attributes.T)

    selected = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, CHUNK_ROWS):
        stop = min(start + CHUNK_ROWS, n)
        block = cdist(nodes[start:stop], nodes, "sqeuclidean")
        block[np.arange(stop - start), np.arange(start, stop)] = np.inf
        selected[start:stop] = np.argsort(block, axis=1, kind="stable")[:, :k]

    heads = np.repeat(np.arange(n), k)
    tails = selected.ravel()
    pairs = np.unique(np.column_stack([np.minimum(heads, tails), np.maximum(heads, tails)]), axis=0)
    rows, cols = pairs[:, 0], pairs[:, 1]
    lengths = np.linalg.norm(nodes[rows] - nodes[cols], axis=1)

    if isinstance(sigma, str):
        if sigma != "auto":
            raise InvalidGraph(f"sigma must be positive or 'auto', got {sigma!r}")
        median = float(np.median(lengths)) if lengths.size else 0.0
        width = median if median > 0.0 else 1.0
    else:
        if not sigma > 0.0:
            raise InvalidGraph(f"sigma must be positive, got {sigma}")
        width = float(sigma)
    weights = np.exp(-(lengths**2) / (2.0 * width * width))

    if n <= DENSE_LIMIT:
        W = np.zeros((n, n))
        W[rows, cols] = weights
        W[cols, rows] = weights
        degrees = W.sum(axis=1)
    else:
        W = scipy.sparse.coo_matrix(
            (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(n, n),
        ).tocsr()
        degrees = np.asarray(W.sum(axis=1)).ravel()

    logger.debug(
        "kNN graph built",
        extra={"nodes": n, "edges": int(rows.size), "k": k, "sigma": width},
    )
    return LabelGraph(
        node_attributes=attributes, weights=W, degrees=degrees,
        sigma=width, neighbors=k, n_labeled=n_labeled,
    )


def _seed_labels(graph: LabelGraph) -> np.ndarray:
    m, n = graph.n_labeled, graph.node_count
    if m < 1:
        raise InvalidGraph("label propagation needs at least one labeled node")
    Y = np.zeros((m, n))
    Y[:, :m] = np.eye(m)
    return Y


def _normalized_affinity(graph: LabelGraph):
    degrees = np.where(graph.isolated, DEGREE_EPSILON, graph.degrees)
    if graph.isolated.any():
        logger.warning("graph has isolated nodes", extra={"isolated": int(graph.isolated.sum())})
    scale = 1.0 / np.sqrt(degrees)
    if graph.is_sparse:
        D = scipy.sparse.diags(scale)
        return (D @ graph.weights @ D).tocsr()
    return scale[:, None] * graph.weights * scale[None, :]


def propagate_labels_closed(graph: LabelGraph, mu: float) -> LabelMatrix:
    """
    Closed-form propagation F = (mu/(1+mu)) Y (I - S/(1+mu))^-1, by linear solve.

    Args:
        graph (LabelGraph): Graph with `n_labeled` prototype nodes first.
        mu (float): Fitness weight (> 0).

    Returns:
        LabelMatrix: Scores and seeds.

    Raises:
        SingularSystem: If the system cannot be factorized or CG fails.
    """
    if not mu > 0.0:
        raise InvalidGraph(f"mu must be positive, got {mu}")
    Y = _seed_labels(graph)
    S = _normalized_affinity(graph)
    alpha = 1.0 / (1.0 + mu)
    rhs = (1.0 - alpha) * Y.T
    n = graph.node_count

    if graph.is_sparse:
        system = scipy.sparse.identity(n, format="csr") - alpha * S
        columns = []
        for j in range(rhs.shape[1]):
            solution, info = scipy.sparse.linalg.cg(system, rhs[:, j], rtol=CG_TOLERANCE, atol=0.0)
            if info != 0:
                raise SingularSystem(f"conjugate gradient failed on label column {j} (info={info})")
            columns.append(solution)
        F_t = np.column_stack(columns)
    else:
        system = np.eye(n) - alpha * S
        try:
            factor = scipy.linalg.cho_factor(system)
            F_t = scipy.linalg.cho_solve(factor, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"propagation system is not positive definite: {exc}") from exc
    return LabelMatrix(scores=F_t.T, seeds=Y)


def propagate_labels_iterative(
    graph: LabelGraph, mu: float, max_iter: int = 100_000, tol: float = 1e-12
) -> LabelMatrix:
    """
    Fixed-point iteration F <- alpha F S + (1 - alpha) Y until the largest change is below `tol`.

    Returns:
        LabelMatrix: Scores with `converged=False` when the budget ran out.
    """
    if not mu > 0.0:
        raise InvalidGraph(f"mu must be positive, got {mu}")
    Y = _seed_labels(graph)
    S = _normalized_affinity(graph)
    alpha = 1.0 / (1.0 + mu)
    F = (1.0 - alpha) * Y
    for it in range(1, max_iter + 1):
        F_next = alpha * np.asarray((S @ F.T).T) + (1.0 - alpha) * Y
        change = float(np.max(np.abs(F_next - F)))
        F = F_next
        if change < tol:
            return LabelMatrix(scores=F, seeds=Y, iterations=it, converged=True)
    logger.warning("label propagation did not converge", extra={"iterations": max_iter})
    return LabelMatrix(scores=F, seeds=Y, iterations=max_iter, converged=False)


def transduce(predicted: np.ndarray, Zprime: np.ndarray, config: GraphConfig) -> tuple[LabelMatrix, LabelGraph]:
    """
    Builds the graph over [Z', predicted] and propagates the prototype labels.

    `config.neighbors` is clamped to node_count - 1.
    """
    if predicted.ndim != 2 or predicted.shape[1] < 1:
        raise DimensionMismatch("transduction needs at least one predicted attribute column")
    if Zprime.ndim != 2 or predicted.shape[0] != Zprime.shape[0]:
        raise DimensionMismatch(f"predictions {predicted.shape} do not match prototypes {Zprime.shape}")
    nodes = np.hstack([Zprime, predicted])
    n = nodes.shape[1]
    k = config.neighbors
    if k > n - 1:
        logger.warning("neighbor count clamped", extra={"requested": k, "used": n - 1})
        k = n - 1
    graph = build_knn_graph(nodes, k, config.sigma, n_labeled=Zprime.shape[1])
    if config.solver == "closed":
        labels = propagate_labels_closed(graph, config.fitness_weight)
    else:
        labels = propagate_labels_iterative(graph, config.fitness_weight, config.max_iterations, config.tolerance)
    return labels, graph


def taaw_classify(predicted: np.ndarray, Zprime: np.ndarray, config: GraphConfig) -> np.ndarray:
    """
    Transductive labels (prototype indices) of the predicted attribute columns.

    Test nodes without edges fall back to the nearest prototype.

    Args:
        predicted (np.ndarray): q x L predicted attributes.
        Zprime (np.ndarray): q x M prototypes.
        config (GraphConfig): Graph and propagation options.

    Returns:
        np.ndarray: Label index per test column.
    """
    labels, graph = transduce(predicted, Zprime, config)
    m = Zprime.shape[1]
    result = labels.labels[m:].copy()
    for j in np.flatnonzero(graph.isolated[m:]):
        result[j] = nn_assign(predicted[:, j], Zprime)
    return result


def taaw_rank(scores: np.ndarray, predicted: np.ndarray, Zprime: np.ndarray, k: int) -> list[list[int]]:
    """
    Ranks classes per test column by descending propagated score, then distance, then index.

    Args:
        scores (np.ndarray): M x L scores of the test nodes.
        predicted (np.ndarray): q x L predicted attributes.
        Zprime (np.ndarray): q x M prototypes.
        k (int): Ranking depth.

    Raises:
        InvalidK: If k is outside 1..M.
    """
    m = Zprime.shape[1]
    if not 1 <= k <= m:
        raise InvalidK(f"K = {k} outside 1..{m}")
    if scores.shape != (m, predicted.shape[1]):
        raise DimensionMismatch(f"scores {scores.shape} do not match {m} classes x {predicted.shape[1]} samples")
    distances = cdist(predicted.T, Zprime.T, "sqeuclidean")
    index = np.arange(m)
    return [
        np.lexsort((index, distances[j], -scores[:, j]))[:k].tolist()
        for j in range(predicted.shape[1])
    ]
