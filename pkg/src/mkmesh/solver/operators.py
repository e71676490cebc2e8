"""Global sparse operators and their spectra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..weights import OperatorKind, WeightSet

__all__ = ["GlobalOperator", "assemble", "spectrum", "SPECTRUM_BUDGET"]

SPECTRUM_BUDGET = 5000


@dataclass
class GlobalOperator:
    """N x N sparse matrix of a difference-form stencil operator."""

    matrix: sp.csr_matrix
    operator: OperatorKind
    method: str = ""
    label: str = ""

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, phi):
        return self.matrix @ phi

    def row_sums(self) -> np.ndarray:
        return self.matrix @ np.ones(self.n)


def assemble(weights: WeightSet, n: int = None, label: str = "", partial: bool = False) -> GlobalOperator:
    """Scatter per-node weights into a CSR matrix.

    Row i holds w_ji at column j and minus the (sequentially accumulated)
    row sum on the diagonal, so constant fields map to zero exactly.  With
    ``partial=True`` nodes without a stencil get empty rows (used for
    Dirichlet boundaries, which are overwritten afterwards).
    """
    st = weights.stencils
    n = len(st) if n is None else n
    centers = st.centers
    if len(np.unique(centers)) != len(centers) or np.any(centers >= n):
        raise ValueError("stencil centres are repeated or out of range")
    if not partial and len(centers) != n:
        raise ValueError(f"weights cover {len(centers)} of {n} nodes")
    order = np.argsort(centers)
    mask = st.mask[order]
    w = np.where(mask, weights.weights[order], 0.0)
    diag = -np.cumsum(w, axis=1)[:, -1]
    # neighbours first in stencil order, diagonal last: the row product with a
    # constant accumulates exactly the sum that produced the diagonal
    cols = np.concatenate([st.indices[order], centers[order][:, None]], axis=1)
    vals = np.concatenate([w, diag[:, None]], axis=1)
    keep = np.concatenate([mask, np.ones((len(centers), 1), dtype=bool)], axis=1)
    lengths = np.zeros(n, dtype=np.int64)
    lengths[centers[order]] = keep.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    mat = sp.csr_matrix((vals[keep], cols[keep], indptr), shape=(n, n))
    return GlobalOperator(mat, weights.operator, weights.method, label)


def spectrum(op, budget: int = SPECTRUM_BUDGET) -> np.ndarray:
    """All eigenvalues via a dense solve, ordered by real part then imaginary part."""
    mat = op.matrix if isinstance(op, GlobalOperator) else op
    n = mat.shape[0]
    if n > budget:
        raise ValueError(f"operator of size {n} exceeds the dense eigensolve budget {budget}")
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)
    ev = scipy.linalg.eigvals(dense)
    return ev[np.lexsort((ev.imag, ev.real))]
