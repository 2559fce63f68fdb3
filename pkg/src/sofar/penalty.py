"""Sparsity-inducing penalties, their proximal maps and null-model thresholds.

Two penalty kinds are supported: entrywise L1 and the rowwise (2,1) group
norm. An optional strictly positive weight matrix makes either penalty
adaptive; rowwise weights are stored as a full matrix with constant rows so
that both kinds share one value/prox signature.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["PenaltyKind", "Penalty", "adaptive_weights"]


class PenaltyKind(Enum):
    ENTRYWISE_L1 = "l1"
    ROWWISE_GROUP = "group"


@dataclass(frozen=True)
class Penalty:
    kind: PenaltyKind
    weights: np.ndarray | None = None  # strictly positive, same shape as argument

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("penalty weights must be strictly positive and finite")
            object.__setattr__(self, "weights", w)

    def _check_shape(self, m: np.ndarray) -> None:
        if self.weights is not None and self.weights.shape != m.shape:
            raise ValueError(
                f"weight shape {self.weights.shape} does not match argument {m.shape}"
            )

    def row_weights(self, n_rows: int) -> np.ndarray:
        """Per-row weights for the group norm (first column of the weight matrix)."""
        if self.weights is None:
            return np.ones(n_rows)
        return self.weights[:, 0]

    def value(self, m) -> float:
        """Penalty value: weighted L1 sum or weighted sum of row norms."""
        a = np.asarray(m, dtype=float)
        self._check_shape(a)
        if self.kind is PenaltyKind.ENTRYWISE_L1:
            w = self.weights if self.weights is not None else 1.0
            return float(np.sum(w * np.abs(a)))
        wr = self.row_weights(a.shape[0])
        return float(np.sum(wr * np.linalg.norm(a, axis=1)))

    def prox(self, m, t: float) -> np.ndarray:
        """Proximal map: argmin_z (1/2t)||z - m||_F^2 + value(z), t > 0.

        Entrywise soft-thresholding for L1; rowwise shrink-to-zero for the
        group norm. Produces exact zeros.
        """
        if t <= 0:
            raise ValueError("prox step t must be positive")
        a = np.asarray(m, dtype=float)
        self._check_shape(a)
        if self.kind is PenaltyKind.ENTRYWISE_L1:
            w = self.weights if self.weights is not None else 1.0
            return np.sign(a) * np.maximum(np.abs(a) - t * w, 0.0)
        wr = self.row_weights(a.shape[0])
        norms = np.linalg.norm(a, axis=1)
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = np.maximum(1.0 - t * wr[nz] / norms[nz], 0.0)
        return a * scale[:, None]

    def null_threshold(self, g) -> tuple[float, bool]:
        """Smallest lambda at which prox of the zero-solution gradient is zero.

        g is the gradient of the smooth loss at the zero solution. Returns
        (threshold, warned); warned is set when g is identically zero.
        """
        a = np.asarray(g, dtype=float)
        self._check_shape(a)
        if not np.any(a):
            return 0.0, True
        if self.kind is PenaltyKind.ENTRYWISE_L1:
            w = self.weights if self.weights is not None else np.ones_like(a)
            return float(np.max(np.abs(a) / w)), False
        wr = self.row_weights(a.shape[0])
        return float(np.max(np.linalg.norm(a, axis=1) / wr)), False


def adaptive_weights(init, floor: float = 1e-8, rowwise: bool = False) -> np.ndarray:
    """Reciprocal-magnitude weights from an initial estimate.

    Entrywise: w_ij = 1/max(|init_ij|, floor). Rowwise: every entry of row i
    is 1/max(||init row i||_2, floor), so the matrix is constant within rows.
    Entries zeroed by the initializer get weight 1/floor, i.e. an effectively
    infinite penalty.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    a = np.asarray(init, dtype=float)
    if rowwise:
        if a.ndim != 2:
            raise ValueError("rowwise weights require a 2-D initial estimate")
        norms = np.linalg.norm(a, axis=1)
        w = 1.0 / np.maximum(norms, floor)
        return np.repeat(w[:, None], a.shape[1], axis=1)
    return 1.0 / np.maximum(np.abs(a), floor)
