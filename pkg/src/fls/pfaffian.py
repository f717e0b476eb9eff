"""Pfaffians of complex skew-symmetric matrices.

The Pfaffian is the kernel of every output-probability evaluation: a
vacuum/Fock expectation of a product of fermionic linear forms reduces to
the Pfaffian of its pair-contraction matrix.  The implementation is
skew-symmetric Gaussian elimination (Parlett-Reid tridiagonalization) with
partial pivoting, O(n^3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SkewMatrix", "pfaffian", "pfaffian_submatrix", "pfaffian_batch_small"]

_SKEW_TOL = 1e-10


@dataclass(frozen=True)
class SkewMatrix:
    """A complex skew-symmetric matrix, antisymmetrized at construction."""

    entries: np.ndarray

    def __init__(self, entries: np.ndarray):
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"square matrix required, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries")
        sym = np.max(np.abs(a + a.T)) if a.size else 0.0
        a = 0.5 * (a - a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "_input_sym_residual", float(sym))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def input_sym_residual(self) -> float:
        """Max |A + A^T| of the raw input, before antisymmetrization."""
        return self._input_sym_residual


def pfaffian(a) -> complex:
    """Pfaffian of a skew-symmetric matrix.

    Accepts a SkewMatrix or a raw array (assumed skew; not re-symmetrized).
    Odd dimension returns 0 by convention; singular input yields 0.
    """
    if isinstance(a, SkewMatrix):
        m = np.array(a.entries, dtype=complex)
    else:
        m = np.array(a, dtype=complex)
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n % 2 == 1:
        return 0.0 + 0.0j
    if n == 2:
        return complex(m[0, 1])
    pf = 1.0 + 0.0j
    for k in range(0, n - 1, 2):
        col = np.abs(m[k + 1:, k])
        p = k + 1 + int(np.argmax(col))
        if col[p - (k + 1)] == 0.0:
            return 0.0 + 0.0j
        if p != k + 1:
            # row/column swap flips the sign
            m[[k + 1, p], :] = m[[p, k + 1], :]
            m[:, [k + 1, p]] = m[:, [p, k + 1]]
            pf = -pf
        pivot = m[k, k + 1]
        pf *= pivot
        if k + 2 < n:
            tau = m[k + 2:, k] / pivot
            v = m[k + 2:, k + 1]
            m[k + 2:, k + 2:] += np.outer(v, tau) - np.outer(tau, v)
    return complex(pf)


def pfaffian_submatrix(a, idx) -> complex:
    """Pfaffian of the principal submatrix A[idx, idx].

    `idx` must be strictly increasing.  Empty selection returns 1 (empty
    Pfaffian); odd-length selection returns 0.
    """
    if isinstance(a, SkewMatrix):
        m = a.entries
    else:
        m = np.asarray(a, dtype=complex)
    idx = list(idx)
    if any(j <= i for i, j in zip(idx, idx[1:])):
        raise ValueError("index list must be strictly increasing")
    if idx and (idx[0] < 0 or idx[-1] >= m.shape[0]):
        raise IndexError("index out of range")
    if not idx:
        return 1.0 + 0.0j
    return pfaffian(m[np.ix_(idx, idx)])


def pfaffian_batch_small(g: np.ndarray) -> np.ndarray:
    """Closed-form Pfaffians of a batch of skew matrices, n in {0, 2, 4, 6}.

    `g` has shape (..., n, n).  Used by the vectorized trajectory engine at
    small mode counts; agrees with `pfaffian` (regression-tested).
    """
    n = g.shape[-1]
    if n == 0:
        return np.ones(g.shape[:-2], dtype=complex)
    if n == 2:
        return g[..., 0, 1].astype(complex)
    if n == 4:
        return (g[..., 0, 1] * g[..., 2, 3]
                - g[..., 0, 2] * g[..., 1, 3]
                + g[..., 0, 3] * g[..., 1, 2]).astype(complex)
    if n == 6:
        out = np.zeros(g.shape[:-2], dtype=complex)
        # expand along row 0: Pf(A) = sum_j (-1)^j a_0j Pf(A without rows/cols 0,j)
        rest = [1, 2, 3, 4, 5]
        for pos, j in enumerate(rest):
            keep = [r for r in rest if r != j]
            sub = g[..., keep, :][..., :, keep]
            pf4 = (sub[..., 0, 1] * sub[..., 2, 3]
                   - sub[..., 0, 2] * sub[..., 1, 3]
                   + sub[..., 0, 3] * sub[..., 1, 2])
            out += (-1.0) ** pos * g[..., 0, j] * pf4
        return out
    raise ValueError(f"closed forms available for n <= 6 only, got n={n}")
