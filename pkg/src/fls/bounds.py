"""A-priori error bounds and timestep selection for the unravelings.

The trajectory average reproduces the Lindblad map up to a first-order
correction sum_a D1_a rho D2_a; summing the sparse-operator inequality over
the corrections gives

    eps <= (dt/2) * L^(2 k_m) / (k_m!)^2 * sum_a int ||D1_a|| ||D2_a|| dt'

with k_m = 8 for the noise-Hamiltonian schemes (EC1/EC3) and 4 for unitary
jumps (EC2).  Individual factor norms are bounded by submultiplicativity
and the triangle inequality over Majorana monomials (every monomial is
unitary, so a quadratic-linear operator has spectral norm at most the sum
of its coefficient magnitudes).

The mode count L in the prefactor is the system mode count for every
class: the first-order correction acts on the system state after the
ancillas are traced out, so its sparsity lives on system configurations.
The runtime model, by contrast, does charge the EC3 register enlargement
L -> L + t/dt.

Prefactor soundness: L^k/k! undercounts the Hamming ball that the
sparse-operator inequality actually sums over whenever L is small against
k (at L = 2, k = 8 it is 4e-5 against a true ball of 4).  The prefactor
used is max(L^(2k)/(k!)^2, B(L,k)^2) with B the exact ball count
(capped at 2^L): identical to the combinatorial form once L is large
against k, sound at desk scale.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .model import ClassTag, LindbladSet, QuadraticHamiltonian, ec1_partition

__all__ = [
    "CorrectionProfile", "UnclassifiedModel", "InfeasibleTarget",
    "correction_norms", "error_bound", "choose_dt", "runtime_estimate",
    "hamiltonian_norm_bound", "measure_sampling_scaling",
]

_DT_FLOOR_FACTOR = 1e-9


class UnclassifiedModel(ValueError):
    pass


class InfeasibleTarget(ValueError):
    pass


@dataclass(frozen=True)
class CorrectionProfile:
    """Per-term factor-norm bounds for the first-order correction.

    terms: tuple of (label, ||D1|| bound, ||D2|| bound).
    """

    class_tag: ClassTag
    k_m: int
    terms: tuple[tuple[str, float, float], ...]

    def total(self) -> float:
        return sum(n1 * n2 for _, n1, n2 in self.terms)


def hamiltonian_norm_bound(alpha: np.ndarray, beta: np.ndarray) -> float:
    iu = np.triu_indices(alpha.shape[0], 1)
    return float(np.sum(np.abs(alpha[iu])) + np.sum(np.abs(beta)))


def correction_norms(h_alpha: np.ndarray, h_beta: np.ndarray,
                     lset: LindbladSet, class_tag: ClassTag | None = None) -> CorrectionProfile:
    """Factor-norm bounds of every first-order correction term on one segment."""
    tag = class_tag if class_tag is not None else lset.class_tag
    hn = hamiltonian_norm_bound(h_alpha, h_beta)
    terms: list[tuple[str, float, float]] = []

    if tag == ClassTag.EC1:
        if lset.is_empty:
            return CorrectionProfile(tag, 8, ())
        pairs, herms = ec1_partition(lset.ops)
        # Hermitian self-pairs act like one representative of norm m/sqrt(2) on
        # each side; bounding with the full norm stays sound.
        ms = [op.norm_bound() for op in pairs] + [op.norm_bound() for op in herms]
        s2 = sum(m * m for m in ms)
        for i, mk in enumerate(ms):
            for j, mk2 in enumerate(ms):
                # four quadratic-in-rho combinations per (k, k') pair
                for lbl in ("dd*comm", "dA*comm", "Ad*comm", "AA*comm"):
                    terms.append((f"pair[{i},{j}]:{lbl}", 0.25 * mk * mk2, 2.0 * mk * mk2))
        for i, mk in enumerate(ms):
            v_k = 1.5 * mk * s2
            for lbl in ("A.V", "V.A", "Vd.Ad", "Ad.Vd"):
                terms.append((f"V[{i}]:{lbl}", mk, v_k))
        w = hn * s2 + s2 * s2
        terms.append(("W.rho", w, 1.0))
        terms.append(("rho.Wd", 1.0, w))
        return CorrectionProfile(tag, 8, tuple(terms))

    if tag == ClassTag.EC2:
        rates = [j.rate for j in lset.ec2_jumps]
        gtot = sum(rates)
        for i, r in enumerate(rates):
            sr = math.sqrt(r)
            c_k = gtot * sr + hn * sr
            terms.append((f"A.C[{i}]", sr, c_k))
            terms.append((f"Cd.Ad[{i}]", c_k, sr))
        for i, ri in enumerate(rates):
            for j, rj in enumerate(rates):
                m = math.sqrt(ri * rj)
                terms.append((f"AA[{i},{j}]", 0.5 * m, m))
        terms.append(("scalar", 0.5 * gtot * gtot, 1.0))
        return CorrectionProfile(tag, 4, tuple(terms))

    if tag == ClassTag.EC3:
        ms = [op.norm_bound() for op in lset.ops]
        s2 = sum(m * m for m in ms)
        for i, mi in enumerate(ms):
            for j, mj in enumerate(ms):
                terms.append((f"AdA[{i},{j}]", 0.25 * mi * mj, mj * mi))
                terms.append((f"AA[{i},{j}]", 0.5 * mi * mj, mj * mi))
        for i, mi in enumerate(ms):
            q_k = mi * s2 / 6.0
            terms.append((f"A.Q[{i}]", mi, q_k))
            terms.append((f"Qd.Ad[{i}]", q_k, mi))
        m_norm = hn * s2 / 3.0 + s2 * s2 / 8.0
        terms.append(("M.rho", m_norm, 1.0))
        terms.append(("rho.Md", 1.0, m_norm))
        return CorrectionProfile(tag, 8, tuple(terms))

    raise UnclassifiedModel(f"no correction profile for class {tag}")


def _integrated_correction(h: QuadraticHamiltonian, lset: LindbladSet,
                           t: float, class_tag: ClassTag | None = None) -> tuple[float, int]:
    """sum_a int_0^t ||D1|| ||D2|| dt' over the schedule, and k_m."""
    total = 0.0
    k_m = 8
    for lo, hi, seg in h.segments_between(0.0, t):
        prof = correction_norms(seg.alpha, seg.beta, lset, class_tag)
        total += (hi - lo) * prof.total()
        k_m = prof.k_m
    return total, k_m


def _hamming_ball(L: int, k: int) -> float:
    return float(sum(math.comb(L, j) for j in range(min(k, L) + 1)))


def _prefactor(L: int, k_m: int) -> float:
    printed = float(L) ** (2 * k_m) / (math.factorial(k_m) ** 2)
    return max(printed, _hamming_ball(L, k_m) ** 2)


def error_bound(h: QuadraticHamiltonian, lset: LindbladSet, t: float,
                dt: float, class_tag: ClassTag | None = None) -> float:
    """First-order TVD bound for timestep dt; exactly linear in dt."""
    integ, k_m = _integrated_correction(h, lset, t, class_tag)
    return 0.5 * dt * _prefactor(h.L, k_m) * integ


def choose_dt(h: QuadraticHamiltonian, lset: LindbladSet, t: float,
              target_epsilon: float, class_tag: ClassTag | None = None) -> float:
    """Largest dt with error_bound <= target, capped by the EC2 jump
    constraint and segment lengths; divides t exactly."""
    if not 0.0 < target_epsilon < 1.0:
        raise ValueError("target_epsilon must be in (0, 1)")
    integ, k_m = _integrated_correction(h, lset, t, class_tag)
    denom = 0.5 * _prefactor(h.L, k_m) * integ
    dt = t if denom == 0.0 else min(t, target_epsilon / denom)
    seg_min = min((s.t_end - s.t_start) for s in h.segments)
    dt = min(dt, seg_min)
    gtot = sum(j.rate for j in lset.ec2_jumps)
    if gtot > 0.0:
        dt = min(dt, 0.49 / gtot)
    if dt < _DT_FLOOR_FACTOR * t:
        raise InfeasibleTarget(f"required dt = {dt:.3e} underflows the 1e-9*t floor")
    n = int(math.ceil(t / dt - 1e-12))
    return t / max(1, n)


def runtime_estimate(L: int, t: float, dt: float, n_traj: int,
                     class_tag: ClassTag = ClassTag.EC1) -> float:
    """Operation-count model per the O(L^4) + O(L^3 t/dt) per-trajectory cost.

    EC3 substitutes L -> L + t/dt for the register enlargement.
    """
    if L <= 0 or t < 0 or dt <= 0 or n_traj <= 0:
        raise ValueError("positive inputs required")
    eff = L + t / dt if class_tag == ClassTag.EC3 else float(L)
    per_traj = eff ** 4 + (2.0 * eff) ** 3 * (t / dt)
    return float(n_traj) * per_traj


def measure_sampling_scaling(mode_counts=(4, 6, 8, 11, 16), n_substeps: int = 1024,
                             n_samples: int = 4, seed: int = 0, repeats: int = 3):
    """Wall-time scaling harness for the unitary-sampling pipeline.

    Workload per L: propagate a random n_substeps-segment schedule and draw
    n_samples configurations.  With n_substeps large the operation-count
    model c2 (2L)^3 n_substeps + c1 L^4 n_samples is propagation-dominated,
    so its predicted log-log slope over the range is very nearly 3.
    Propagation runs on the fixed-efficiency kernel (see fls._bench): BLAS
    throughput drifts by ~4x between 8x8 and 32x32 operands, which would
    mask the exponent on exactly this range.

    Returns (mode_counts, seconds, measured_slope, predicted_slope).
    """
    from . import _bench
    from .gaussian import GaussianPropagator
    from .sampler import build_handle, sample as draw

    rng = np.random.default_rng(seed)
    # warm the JIT outside the timed region
    warm = rng.normal(size=(2, 4, 4))
    _bench.chain_expm_product(warm - warm.swapaxes(-1, -2), 1e-3)

    times = []
    for L in mode_counts:
        n = 2 * L
        a = rng.normal(size=(n_substeps, n, n)) * (0.2 / n)
        a = a - a.swapaxes(-1, -2)
        occ = [k % 2 for k in range(L)]
        best = np.inf
        for rep in range(repeats):
            srng = np.random.default_rng(seed + L + rep)
            t0 = time.perf_counter()
            r = _bench.chain_expm_product(a, 1.0 / n_substeps)
            handle = build_handle(GaussianPropagator(r, 1.0), occ)
            for _ in range(n_samples):
                draw(handle, srng)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    ls = np.log(np.asarray(mode_counts, dtype=float))
    measured = float(np.polyfit(ls, np.log(times), 1)[0])
    model = [n_substeps * _bench.flops_per_step(2 * lv)
             + n_samples * (2.0 / 3.0) * 4.0 * (2 * lv) ** 4 for lv in mode_counts]
    predicted = float(np.polyfit(ls, np.log(model), 1)[0])
    return list(mode_counts), times, measured, predicted
