"""Dense brute-force oracle: Jordan-Wigner operators, exact Lindblad
integration, measurement distributions, and distance metrics.

Everything here is exponential in L and exists to validate the efficient
paths at desk scale.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .model import Ec2Jump, LindbladOperator, LindbladSet, QuadraticHamiltonian

__all__ = [
    "DimensionTooLarge", "ToleranceNotMet", "majorana_dense", "majorana_ops",
    "dense_hamiltonian", "dense_lindblad_operator", "dense_ec2_operator",
    "fock_density", "unitary_evolve", "lindblad_evolve",
    "measure_distribution", "tvd", "verify_sparse_lemma", "majorana_monomial",
]

_MAX_L_OPS = 12
_MAX_L_EVOLVE = 10


class DimensionTooLarge(ValueError):
    pass


class ToleranceNotMet(RuntimeError):
    pass


@lru_cache(maxsize=16)
def _majorana_table(L: int) -> tuple[np.ndarray, ...]:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    out = []
    for n in range(L):
        for pauli in (x, y):
            op = np.eye(1, dtype=complex)
            for j in range(L):
                op = np.kron(op, z if j < n else (pauli if j == n else eye))
            op.setflags(write=False)
            out.append(op)
    return tuple(out)


def majorana_ops(L: int) -> tuple[np.ndarray, ...]:
    """All 2L dense Majorana operators (Jordan-Wigner, mode 0 leftmost)."""
    if L > _MAX_L_OPS:
        raise DimensionTooLarge(f"L = {L} exceeds dense-operator cap {_MAX_L_OPS}")
    return _majorana_table(L)


def majorana_dense(i: int, L: int) -> np.ndarray:
    """gamma_i as a 2^L x 2^L matrix, {gamma_i, gamma_j} = 2 delta_ij."""
    if not 0 <= i < 2 * L:
        raise IndexError(f"Majorana index {i} out of range for L = {L}")
    return majorana_ops(L)[i]


def majorana_monomial(indices, L: int) -> np.ndarray:
    """Ordered product gamma_{i1} ... gamma_{ik}."""
    g = majorana_ops(L)
    out = np.eye(2 ** L, dtype=complex)
    for i in indices:
        out = out @ g[i]
    return out


def dense_hamiltonian(alpha: np.ndarray, beta: np.ndarray, L: int) -> np.ndarray:
    """H = (i/2) alpha_ij gamma_i gamma_j + beta_i gamma_i."""
    g = majorana_ops(L)
    h = np.zeros((2 ** L, 2 ** L), dtype=complex)
    for i in range(2 * L):
        for j in range(2 * L):
            if alpha[i, j] != 0.0:
                h += 0.5j * alpha[i, j] * (g[i] @ g[j])
    for i in range(2 * L):
        if beta[i] != 0.0:
            h = h + beta[i] * g[i]
    return h


def dense_lindblad_operator(op: LindbladOperator, L: int | None = None) -> np.ndarray:
    L = op.L if L is None else L
    g = majorana_ops(L)
    dim = 2 ** L
    mat = op.d * np.eye(dim, dtype=complex)
    for i in range(2 * op.L):
        for j in range(2 * op.L):
            if op.a[i, j] != 0.0:
                mat += 0.5j * op.a[i, j] * (g[i] @ g[j])
    for i in range(2 * op.L):
        if op.b[i] != 0.0:
            mat = mat + op.b[i] * g[i]
    return mat


def dense_ec2_operator(jump: Ec2Jump, L: int) -> np.ndarray:
    """A = sqrt(rate) exp(-i G) with G from the jump's (alpha, beta)."""
    G = dense_hamiltonian(jump.g_alpha, jump.g_beta, L)
    return np.sqrt(jump.rate) * sla.expm(-1j * G)


def dense_set(lset: LindbladSet, L: int) -> list[np.ndarray]:
    mats = [dense_lindblad_operator(op, L) for op in lset.ops]
    mats += [dense_ec2_operator(j, L) for j in lset.ec2_jumps]
    return mats


def _config_index(bits) -> int:
    return int("".join(str(int(b)) for b in bits), 2)


def fock_density(bits, L: int) -> np.ndarray:
    """|r><r| for an occupation bit string (mode 0 = most significant bit)."""
    dim = 2 ** L
    rho = np.zeros((dim, dim), dtype=complex)
    k = _config_index(bits)
    rho[k, k] = 1.0
    return rho


def unitary_evolve(rho0: np.ndarray, h: QuadraticHamiltonian, t: float) -> np.ndarray:
    """exp(-iHt)-type evolution across the piecewise-constant schedule."""
    u = unitary_dense(h, t)
    return u @ rho0 @ u.conj().T


def unitary_dense(h: QuadraticHamiltonian, t: float) -> np.ndarray:
    if h.L > _MAX_L_EVOLVE:
        raise DimensionTooLarge(f"L = {h.L} exceeds dense-evolution cap {_MAX_L_EVOLVE}")
    u = np.eye(2 ** h.L, dtype=complex)
    for lo, hi, seg in h.segments_between(0.0, t):
        hd = dense_hamiltonian(seg.alpha, seg.beta, h.L)
        u = sla.expm(-1j * hd * (hi - lo)) @ u
    return u


def lindblad_evolve_dense(rho0: np.ndarray, h_dense: np.ndarray,
                          a_mats: list[np.ndarray], t0: float, t1: float,
                          rtol: float = 1e-8) -> np.ndarray:
    """One integration leg of the master equation with constant dense operators."""
    dim = rho0.shape[0]
    ada = [a.conj().T @ a for a in a_mats]

    def rhs(_, y):
        r = y.reshape(dim, dim)
        dr = -1j * (h_dense @ r - r @ h_dense)
        for a, s in zip(a_mats, ada):
            dr += a @ r @ a.conj().T - 0.5 * (s @ r + r @ s)
        return dr.ravel()

    sol = solve_ivp(rhs, (t0, t1), np.asarray(rho0, dtype=complex).ravel(),
                    method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise ToleranceNotMet(f"integrator failed on [{t0}, {t1}]: {sol.message}")
    rho = sol.y[:, -1].reshape(dim, dim)
    return 0.5 * (rho + rho.conj().T)


def lindblad_evolve(rho0: np.ndarray, h: QuadraticHamiltonian, lset: LindbladSet,
                    t: float, rtol: float = 1e-8) -> np.ndarray:
    """Integrate the master equation to time t (adaptive DOP853).

    Hermiticity is restored by symmetrization after each segment; trace
    preservation to 1e-8 is enforced (ToleranceNotMet otherwise).
    """
    L = h.L
    if L > _MAX_L_EVOLVE:
        raise DimensionTooLarge(f"L = {L} exceeds dense-evolution cap {_MAX_L_EVOLVE}")
    a_mats = dense_set(lset, L)
    rho = np.array(rho0, dtype=complex)
    for lo, hi, seg in h.segments_between(0.0, t):
        hd = dense_hamiltonian(seg.alpha, seg.beta, L)
        rho = lindblad_evolve_dense(rho, hd, a_mats, lo, hi, rtol)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > 1e-8:
        raise ToleranceNotMet(f"trace drifted to {tr}")
    return rho


def measure_distribution(rho: np.ndarray) -> dict[str, float]:
    """Diagonal of rho in the Fock basis, keyed by occupation bit strings."""
    dim = rho.shape[0]
    L = dim.bit_length() - 1
    diag = np.real(np.diag(rho))
    return {format(k, f"0{L}b"): float(diag[k]) for k in range(dim)}


def tvd(p: dict[str, float], q: dict[str, float]) -> float:
    """(1/2) sum |P - Q| over the union of supports."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def verify_sparse_lemma(o1: np.ndarray, o2: np.ndarray, k1: int, k2: int,
                        rho: np.ndarray) -> tuple[float, float]:
    """LHS and bound of the sparse-operator inequality.

    o1, o2 must be built from products of at most k1, k2 distinct Majoranas
    (so matrix elements vanish beyond Hamming distance k).  Returns
    (sum_r |<r|O1 rho O2|r>|, L^(k1+k2)/(k1! k2!) * ||O1||_max ||O2||_max).
    The polynomial count behind the bound assumes k <= L.
    """
    from math import factorial
    dim = rho.shape[0]
    L = dim.bit_length() - 1
    m = o1 @ rho @ o2
    lhs = float(np.sum(np.abs(np.diag(m))))
    bound = (float(L) ** (k1 + k2)) / (factorial(k1) * factorial(k2)) \
        * float(np.max(np.abs(o1))) * float(np.max(np.abs(o2)))
    return lhs, bound
