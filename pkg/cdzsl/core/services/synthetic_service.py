"""
Synthetic Service
-----------------
Generates planted zero-shot problems whose features and attributes share sparse codes:
x = D_x* a + noise and z = D_z* a.

Every class has a k-sparse class code over a pool of active atoms; samples perturb the
nonzero entries of their class code. The pool columns of D_x* and D_z* are orthonormal
whenever the pool fits in the signal dimension, so attributes are a norm-preserving linear
image of noise-free features and a dictionary pair that fits the seen views transfers to
new combinations of the same atoms. Seen class supports cover the whole pool. Seen and unseen
classes are disjoint, and every unseen prototype D_z* b lies at least `separation` away from
the other prototypes and from every seen class attribute.

Functions:
- `planted_dictionary()`: Unit-column dictionary with an orthonormal active pool.
- `generate_synthetic()`: Draw a problem and write it as a manifest directory.
"""

from pathlib import Path

import numpy as np

from cdzsl.core.exceptions import RejectionBudgetExceeded
from cdzsl.core.models.dataset import DatasetManifest, SynthConfig
from cdzsl.core.repositories.manifest_repository import ManifestRepository
from cdzsl.core.repositories.matrix_repository import MatrixRepository
from cdzsl.core.utils.helper import unit_columns
from cdzsl.core.utils.logger import logger

REJECTION_BUDGET = 100_000
MANIFEST_NAME = "manifest.cfg"


def planted_dictionary(rng: np.random.Generator, rows: int, atoms: int, pool: np.ndarray) -> np.ndarray:
    """
    Draws a rows x atoms dictionary with unit columns whose `pool` columns are orthonormal
    when `pool.size <= rows` (QR of a Gaussian block).
    """
    dictionary = unit_columns(rng.standard_normal((rows, atoms)))
    if pool.size <= rows:
        basis, _ = np.linalg.qr(rng.standard_normal((rows, pool.size)))
        dictionary[:, pool] = basis
    return dictionary


def _class_code(rng: np.random.Generator, support: np.ndarray, atoms: int) -> np.ndarray:
    code = np.zeros(atoms)
    code[support] = rng.uniform(0.5, 1.5, size=support.size) * rng.choice([-1.0, 1.0], size=support.size)
    return code


def _covering_supports(rng: np.random.Generator, pool: np.ndarray, k: int, count: int) -> list[np.ndarray]:
    """Supports of `count` classes; the first ceil(|pool| / k) of them partition a shuffled pool."""
    order = rng.permutation(pool)
    supports: list[np.ndarray] = []
    for start in range(0, order.size, k):
        chunk = order[start:start + k]
        if chunk.size < k:
            rest = np.setdiff1d(pool, chunk)
            chunk = np.concatenate([chunk, rng.choice(rest, size=k - chunk.size, replace=False)])
        supports.append(np.sort(chunk))
    while len(supports) < count:
        supports.append(np.sort(rng.choice(pool, size=k, replace=False)))
    order_of_classes = rng.permutation(len(supports))[:count]
    return [supports[i] for i in order_of_classes]


def _sample_codes(rng: np.random.Generator, class_codes: np.ndarray, labels: np.ndarray, jitter: float) -> np.ndarray:
    base = class_codes[:, labels]
    return base + jitter * rng.standard_normal(base.shape) * (base != 0.0)


def generate_synthetic(config: SynthConfig, directory: str | Path) -> DatasetManifest:
    """
    Draws a planted problem and writes its matrices and `manifest.cfg` into `directory`.

    Args:
        config (SynthConfig): Problem parameters.
        directory (str | Path): Output directory (created when missing).

    Returns:
        DatasetManifest: The written manifest (preprocessing disabled).

    Raises:
        RejectionBudgetExceeded: If the prototype separation is unreachable.
    """
    directory = Path(directory)
    rng = np.random.default_rng(config.seed)
    p, q, r, k = config.feature_dim, config.attribute_dim, config.atom_count, config.sparsity
    s, m = config.n_seen_classes, config.n_unseen

    pool = np.sort(rng.choice(r, size=config.pool_size, replace=False))
    d_x = planted_dictionary(rng, p, r, pool)
    d_z = planted_dictionary(rng, q, r, pool)

    seen_codes = np.column_stack([_class_code(rng, support, r) for support in _covering_supports(rng, pool, k, s)])
    taken = d_z @ seen_codes

    unseen_codes: list[np.ndarray] = []
    draws = 0
    while len(unseen_codes) < m:
        if draws >= REJECTION_BUDGET:
            raise RejectionBudgetExceeded(
                f"separation {config.separation} not reached for {m} prototypes in {REJECTION_BUDGET} draws"
            )
        draws += 1
        code = _class_code(rng, np.sort(rng.choice(pool, size=k, replace=False)), r)
        proto = d_z @ code
        if np.min(np.linalg.norm(taken - proto[:, None], axis=0)) >= config.separation:
            unseen_codes.append(code)
            taken = np.column_stack([taken, proto])
    B = np.column_stack(unseen_codes)

    seen_idx = np.arange(config.n_seen) % s
    A = _sample_codes(rng, seen_codes, seen_idx, config.jitter)
    X = d_x @ A + config.noise * rng.standard_normal((p, config.n_seen))
    Z = d_z @ A

    test_idx = np.arange(config.n_test) % m
    A_test = _sample_codes(rng, B, test_idx, config.jitter)
    X_test = d_x @ A_test + config.noise * rng.standard_normal((p, config.n_test))

    seen_ids = np.arange(s)
    unseen_ids = s + np.arange(m)
    matrices = {
        "seen_features": X,
        "seen_attributes": Z,
        "seen_labels": seen_ids[seen_idx][None, :].astype(np.float64),
        "unseen_prototypes": d_z @ B,
        "unseen_labels": unseen_ids[None, :].astype(np.float64),
        "test_features": X_test,
        "test_labels": unseen_ids[test_idx][None, :].astype(np.float64),
        "test_attributes": d_z @ A_test,
        "planted_dx": d_x,
        "planted_dz": d_z,
    }
    for name, matrix in matrices.items():
        MatrixRepository.write_matrix(directory / f"{name}.cdzm", matrix)
    (directory / "class_names.txt").write_text(
        "".join(f"unseen_{c}\n" for c in unseen_ids), encoding="utf-8"
    )

    manifest = DatasetManifest(
        root=directory,
        seen_features=Path("seen_features.cdzm"),
        seen_attributes=Path("seen_attributes.cdzm"),
        seen_labels=Path("seen_labels.cdzm"),
        unseen_prototypes=Path("unseen_prototypes.cdzm"),
        unseen_labels=Path("unseen_labels.cdzm"),
        unseen_class_names=Path("class_names.txt"),
        test_features=Path("test_features.cdzm"),
        test_labels=Path("test_labels.cdzm"),
        test_attributes=Path("test_attributes.cdzm"),
        normalize_features=False,
        normalize_attributes=False,
    )
    ManifestRepository.save_manifest(directory / MANIFEST_NAME, manifest)
    logger.info(
        "synthetic problem written",
        extra={"path": str(directory), "rejection_draws": draws, "n_seen": config.n_seen, "n_test": config.n_test},
    )
    return manifest
