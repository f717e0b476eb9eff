"""Stochastic-trajectory unraveling of the Lindblad dynamics.

Three schemes, each replacing dissipation by randomness over free-fermion
unitaries whose average reproduces the master equation to O(dt):

  EC1  self-adjoint sets: Gaussian noise couples each (A, A^dag) partner
       pair into the Hamiltonian, H' = H + sum_k theta_k A_k + h.c. with
       theta_k = xi_{nk}/sqrt(dt), xi complex standard (E|xi|^2 = 1).
       Hermitian operators are self-paired and driven by one real standard
       Gaussian (the 1/sqrt(2)-splitting folded in).
  EC2  unitary jumps A_k = sqrt(rate_k) exp(-i G_k): per step, jump k fires
       with probability rate_k * dt at a uniform time inside the step and
       is applied before the step's Hamiltonian factor.
  EC3  linear operators: one fresh vacuum ancilla mode per step; the step
       Hamiltonian gains (f_nk / (2 sqrt(dt))) (A_k chi_n + h.c.) with
       chi_n = gamma_{2(L+n)} - i gamma_{2(L+n)+1} (an ancilla creator, so
       a system loss pairs with an ancilla gain) and f real standard
       Gaussians.  Ancilla outcomes are never measured.

Any linear terms (Hamiltonian beta, EC1 noise on linear operators, EC3
scalar parts) are removed by one shared reduction ancilla appended as the
last mode.  Per-trajectory streams come from a counter-based Philox
generator keyed by (master seed, trajectory index); results are identical
for any thread count or batching.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gaussian import GaussianPropagator, expm_skew
from .model import (ClassTag, Ec2Jump, FockConfiguration, LindbladOperator,
                    LindbladSet, QuadraticHamiltonian, ec1_partition)
from .pfaffian import pfaffian_batch_small
from .sampler import BatchSampler, backward_fermion_rows, build_handle, enumerate_distribution, sample

__all__ = [
    "TrajectoryPlan", "TrajectoryOutcome", "TrajectoryResult", "SimulationModel",
    "NotEC1", "NotEC3", "StepTooLarge", "UnsimulableClass",
    "ec1_step_generator", "ec2_step_unitary", "ec3_step_generator",
    "run_trajectories", "trajectory_rng",
]


class NotEC1(ValueError):
    pass


class NotEC3(ValueError):
    pass


class StepTooLarge(ValueError):
    pass


class UnsimulableClass(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryPlan:
    dt: float
    n_steps: int
    class_tag: ClassTag
    seed: int
    n_trajectories: int
    ancilla_count: int = 0

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps <= 0:
            raise ValueError("dt and n_steps must be positive")

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps

    @classmethod
    def for_time(cls, t: float, dt: float, class_tag: ClassTag, seed: int,
                 n_trajectories: int, needs_ancillas: bool = False) -> "TrajectoryPlan":
        n = max(1, round(t / dt))
        if abs(n * dt - t) > 1e-9 * max(1.0, t):
            n = int(math.ceil(t / dt))
        return cls(dt=t / n, n_steps=n, class_tag=class_tag, seed=seed,
                   n_trajectories=n_trajectories,
                   ancilla_count=n if needs_ancillas else 0)


@dataclass(frozen=True)
class TrajectoryOutcome:
    configuration: FockConfiguration
    trajectory_index: int


@dataclass
class TrajectoryResult:
    distribution: dict[str, float]
    stderr: dict[str, float]
    n_trajectories: int
    outcomes: Optional[list[TrajectoryOutcome]] = None
    noise_sum: float = 0.0
    noise_sq_sum: float = 0.0
    noise_count: int = 0


@dataclass(frozen=True)
class SimulationModel:
    hamiltonian: QuadraticHamiltonian
    lindblad: LindbladSet


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-trajectory stream (reproducible under parallelism)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


# ---------------------------------------------------------------------------
# Step generators


def ec1_step_generator(alpha: np.ndarray, beta: np.ndarray,
                       pair_ops: Sequence[LindbladOperator],
                       herm_ops: Sequence[LindbladOperator],
                       xi: Sequence[complex], g: Sequence[float],
                       dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Noise-dressed (alpha', beta') for one EC1 step.

    theta_k A_k + theta_k^* A_k^dag adds 2 Re(theta a_k) to alpha and
    2 Re(theta b_k) to beta (real by construction, so the result is a valid
    free-fermion generator).  xi are complex standard Gaussians for the
    (A, A^dag) pair representatives; g are real standard Gaussians for
    self-paired Hermitian operators (1/sqrt(2)-splitting folded in).  The
    scalar parts contribute a global phase and are dropped.
    """
    a_tot = np.array(alpha, dtype=float)
    b_tot = np.array(beta, dtype=float)
    rt = 1.0 / math.sqrt(dt)
    for op, x in zip(pair_ops, xi):
        th = x * rt
        m = op.a.shape[0]
        a_tot[:m, :m] += 2.0 * np.real(th * op.a)
        b_tot[:m] += 2.0 * np.real(th * op.b)
    for op, x in zip(herm_ops, g):
        th = x * rt
        m = op.a.shape[0]
        a_tot[:m, :m] += th * np.real(op.a)
        b_tot[:m] += th * np.real(op.b)
    return a_tot, b_tot


def ec2_step_unitary(rates: Sequence[float], dt: float, t_step: float,
                     u_time: float, u_choice: float):
    """Random jump recipe for one EC2 step.

    Returns (jump_index | None, t_jump).  Probabilities are rate_k * dt; the
    jump time is uniform inside the step.  StepTooLarge enforces
    sum(rate) * dt < 0.5.
    """
    tot = sum(rates) * dt
    if tot >= 0.5:
        raise StepTooLarge(f"sum(rates)*dt = {tot:.3f} >= 0.5; decrease dt")
    t_jump = t_step + u_time * dt
    acc = 0.0
    for k, r in enumerate(rates):
        acc += r * dt
        if u_choice < acc:
            return k, t_jump
    return None, t_jump


def ec3_step_generator(alpha: np.ndarray, beta: np.ndarray,
                       linear_ops: Sequence[LindbladOperator],
                       f: Sequence[float], step: int, dt: float,
                       L: int) -> tuple[np.ndarray, np.ndarray]:
    """Noise-dressed (alpha', beta') on the enlarged register for one EC3 step.

    alpha/beta must already have the enlarged shape; the step couples only
    to ancilla mode L + step.  f are real standard Gaussians.
    """
    a_tot = np.array(alpha, dtype=float)
    b_tot = np.array(beta, dtype=float)
    e = 2 * (L + step)
    o = e + 1
    if o >= a_tot.shape[0]:
        raise NotEC3("enlarged register too small for this step index")
    for op, fv in zip(linear_ops, f):
        if not op.is_linear:
            raise NotEC3("EC3 requires a = 0 for every operator")
        coef = fv / (2.0 * math.sqrt(dt))
        cb = coef * op.b
        idx = np.arange(2 * op.L)
        a_tot[idx, e] += 2.0 * np.imag(cb)
        a_tot[e, idx] -= 2.0 * np.imag(cb)
        a_tot[idx, o] += -2.0 * np.real(cb)
        a_tot[o, idx] -= -2.0 * np.real(cb)
        cd = coef * op.d
        b_tot[e] += 2.0 * np.real(cd)
        b_tot[o] += 2.0 * np.imag(cd)
    return a_tot, b_tot


# ---------------------------------------------------------------------------
# Trajectory assembly


@dataclass
class _Setup:
    """Precomputed layout shared by all trajectories.

    Each step's generator is supported on the `active` Majoranas only:
    system + the step's EC3 ancilla pair + the linear-reduction pair.  Step
    exponentials are computed on that block and scattered into the register.
    """

    L: int
    n_steps: int
    dt: float
    pair_ops: list
    herm_ops: list
    ec3_ops: list
    ec2_jumps: list
    n_ec3_anc: int
    has_linear: bool
    n_modes: int            # L + ancillas (+1 reduction mode if has_linear)
    n_active: int           # Majorana count of the per-step active block
    step_pieces: list       # per step: list of (duration, alpha_act, beta_act)
    ec2_r: list             # precomputed jump rotations on the active block
    noise_width: int
    n_meas: int

    @property
    def n_maj(self) -> int:
        return 2 * self.n_modes

    def active_indices(self, step: int) -> np.ndarray:
        idx = list(range(2 * self.L))
        if self.ec3_ops:
            e = 2 * (self.L + step)
            idx += [e, e + 1]
        if self.has_linear:
            idx += [self.n_maj - 2, self.n_maj - 1]
        return np.asarray(idx, dtype=np.intp)


def _embed_alpha_beta(alpha: np.ndarray, beta: np.ndarray, n_modes: int):
    out_a = np.zeros((2 * n_modes, 2 * n_modes))
    out_b = np.zeros(2 * n_modes)
    out_a[:alpha.shape[0], :alpha.shape[1]] = alpha
    out_b[:beta.shape[0]] = beta
    return out_a, out_b


def _attach_linear(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Fold beta into couplings to the last mode's odd Majorana (in place)."""
    n = alpha.shape[0]
    alpha[:, n - 1] += beta
    alpha[n - 1, :] -= beta
    alpha[n - 1, n - 1] = 0.0
    return alpha


def _build_setup(plan: TrajectoryPlan, model: SimulationModel,
                 groups: dict | None) -> _Setup:
    h = model.hamiltonian
    lset = model.lindblad
    L = h.L
    if groups is None:
        tag = plan.class_tag
        pair_ops: list = []
        herm_ops: list = []
        ec3_ops: list = []
        jumps = list(lset.ec2_jumps)
        if tag == ClassTag.EC1:
            if lset.ops:
                pair_ops, herm_ops = ec1_partition(lset.ops)
        elif tag == ClassTag.EC3:
            if not all(op.is_linear for op in lset.ops):
                raise NotEC3("EC3 tag on a set with quadratic parts")
            ec3_ops = list(lset.ops)
        elif tag == ClassTag.EC2:
            pass
        else:
            raise UnsimulableClass("no efficient unraveling for the general class")
    else:
        pair_ops = list(groups.get("ec1_pairs", []))
        herm_ops = list(groups.get("ec1_hermitian", []))
        ec3_ops = list(groups.get("ec3", []))
        jumps = list(groups.get("ec2", []))

    n_ec3_anc = plan.n_steps if ec3_ops else 0
    has_linear = (h.has_linear_term
                  or any(np.any(op.b != 0.0) for op in pair_ops + herm_ops)
                  or any(abs(op.d) > 0.0 for op in ec3_ops)
                  or any(np.any(j.g_beta != 0.0) for j in jumps))
    n_modes = L + n_ec3_anc + (1 if has_linear else 0)
    n_active = 2 * L + (2 if ec3_ops else 0) + (2 if has_linear else 0)

    # per-step Hamiltonian pieces on the active block (noise added on top)
    step_pieces = []
    for n in range(plan.n_steps):
        t0, t1 = n * plan.dt, (n + 1) * plan.dt
        pieces = []
        for lo, hi, seg in h.segments_between(t0, t1):
            a_act = np.zeros((n_active, n_active))
            b_act = np.zeros(n_active)
            a_act[:2 * L, :2 * L] = seg.alpha
            b_act[:2 * L] = seg.beta
            pieces.append((hi - lo, a_act, b_act))
        if not pieces:
            raise ValueError(f"Hamiltonian schedule does not cover step [{t0}, {t1}]")
        step_pieces.append(pieces)

    if jumps and max((sum(j.rate for j in jumps) * plan.dt), 0.0) >= 0.5:
        raise StepTooLarge("EC2 jump probability per step exceeds 0.5")
    ec2_r = []
    for j in jumps:
        a_act = np.zeros((n_active, n_active))
        b_act = np.zeros(n_active)
        a_act[:2 * L, :2 * L] = j.g_alpha
        b_act[:2 * L] = j.g_beta
        a_act = _attach_linear(a_act, b_act) if has_linear else a_act
        ec2_r.append(expm_skew(-2.0 * a_act))

    noise_width = 2 * len(pair_ops) + len(herm_ops) + len(ec3_ops)
    return _Setup(
        L=L, n_steps=plan.n_steps, dt=plan.dt,
        pair_ops=pair_ops, herm_ops=herm_ops, ec3_ops=ec3_ops, ec2_jumps=jumps,
        n_ec3_anc=n_ec3_anc, has_linear=has_linear, n_modes=n_modes,
        n_active=n_active, step_pieces=step_pieces, ec2_r=ec2_r,
        noise_width=noise_width, n_meas=L,
    )


def _step_alpha(setup: _Setup, noise_row: np.ndarray):
    """Noise contribution (alpha, beta) for one step in active coordinates.

    The EC3 ancilla pair always sits at active positions (2L, 2L+1); the
    reduction pair, when present, is the last two positions.
    """
    m = setup.n_active
    a_n = np.zeros((m, m))
    b_n = np.zeros(m)
    pos = 0
    rt = 1.0 / math.sqrt(setup.dt)
    for op in setup.pair_ops:
        xi = (noise_row[pos] + 1j * noise_row[pos + 1]) / math.sqrt(2.0)
        pos += 2
        th = xi * rt
        k = op.a.shape[0]
        a_n[:k, :k] += 2.0 * np.real(th * op.a)
        b_n[:k] += 2.0 * np.real(th * op.b)
    for op in setup.herm_ops:
        th = noise_row[pos] * rt
        pos += 1
        k = op.a.shape[0]
        a_n[:k, :k] += th * np.real(op.a)
        b_n[:k] += th * np.real(op.b)
    if setup.ec3_ops:
        e = 2 * setup.L
        o = e + 1
        for op in setup.ec3_ops:
            coef = noise_row[pos] / (2.0 * math.sqrt(setup.dt))
            pos += 1
            cb = coef * op.b
            k = 2 * op.L
            a_n[:k, e] += 2.0 * np.imag(cb)
            a_n[e, :k] -= 2.0 * np.imag(cb)
            a_n[:k, o] += -2.0 * np.real(cb)
            a_n[o, :k] -= -2.0 * np.real(cb)
            cd = coef * op.d
            b_n[e] += 2.0 * np.real(cd)
            b_n[o] += 2.0 * np.imag(cd)
    return a_n, b_n


def _run_one(setup: _Setup, plan: TrajectoryPlan, initial_occ: np.ndarray,
             index: int, mode: str):
    rng = trajectory_rng(plan.seed, index)
    noise = rng.normal(size=(setup.n_steps, setup.noise_width)) \
        if setup.noise_width else np.zeros((setup.n_steps, 0))
    ec2_u = rng.random(size=(setup.n_steps, 2)) if setup.ec2_jumps else None
    n_maj = setup.n_maj
    r = np.eye(n_maj)
    rates = [j.rate for j in setup.ec2_jumps]
    for n in range(setup.n_steps):
        act = setup.active_indices(n)
        if setup.ec2_jumps:
            k, _ = ec2_step_unitary(rates, setup.dt, n * setup.dt,
                                    ec2_u[n, 0], ec2_u[n, 1])
            if k is not None:
                r[:, act] = r[:, act] @ setup.ec2_r[k]
        a_n, b_n = _step_alpha(setup, noise[n])
        for dur, a_h, b_h in setup.step_pieces[n]:
            a_tot = a_h + a_n
            b_tot = b_h + b_n
            if setup.has_linear:
                a_tot = _attach_linear(a_tot, b_tot)
            r[:, act] = r[:, act] @ expm_skew(-2.0 * a_tot * dur)
    occ = list(initial_occ) + [0] * setup.n_ec3_anc
    if setup.has_linear:
        u = rng.random(size=1 + setup.n_meas)
        occ = occ + [1 if u[0] < 0.5 else 0]
        us = u[1:]
    else:
        us = rng.random(size=setup.n_meas)
    prop = GaussianPropagator(r, plan.t_final)
    handle = build_handle(prop, occ, n_meas=setup.n_meas)
    if mode == "average":
        dist = enumerate_distribution(handle)
        return dist, noise
    bits = []
    p_prev = 1.0
    for i in range(setup.n_meas):
        p1 = handle._marginal(bits + [1])
        cond = 0.0 if p_prev <= 0.0 else min(1.0, max(0.0, p1 / p_prev))
        bits.append(1 if us[i] < cond else 0)
        p_prev = p1 if bits[-1] else max(p_prev - p1, 0.0)
    return "".join(map(str, bits)), noise


def _run_batch(setup: _Setup, plan: TrajectoryPlan, initial_occ: np.ndarray,
               indices: np.ndarray, mode: str):
    """Vectorized path: same streams, same algebra, batched linalg."""
    bsz = len(indices)
    n_maj = setup.n_maj
    noise = np.empty((bsz, setup.n_steps, setup.noise_width))
    tail_w = 1 + setup.n_meas if setup.has_linear else setup.n_meas
    tail = np.empty((bsz, tail_w))
    for i, idx in enumerate(indices):
        rng = trajectory_rng(plan.seed, int(idx))
        if setup.noise_width:
            noise[i] = rng.normal(size=(setup.n_steps, setup.noise_width))
        tail[i] = rng.random(size=tail_w)

    r = np.broadcast_to(np.eye(n_maj), (bsz, n_maj, n_maj)).copy()
    n_act = setup.n_active
    rt = 1.0 / math.sqrt(setup.dt)
    for n in range(setup.n_steps):
        act = setup.active_indices(n)
        a_n = np.zeros((bsz, n_act, n_act))
        b_n = np.zeros((bsz, n_act))
        pos = 0
        for op in setup.pair_ops:
            xi = (noise[:, n, pos] + 1j * noise[:, n, pos + 1]) / math.sqrt(2.0)
            pos += 2
            th = (xi * rt)[:, None, None]
            m = op.a.shape[0]
            a_n[:, :m, :m] += 2.0 * np.real(th * op.a[None])
            b_n[:, :m] += 2.0 * np.real(th[:, :, 0] * op.b[None])
        for op in setup.herm_ops:
            th = (noise[:, n, pos] * rt)[:, None, None]
            pos += 1
            m = op.a.shape[0]
            a_n[:, :m, :m] += th * np.real(op.a)[None]
            b_n[:, :m] += th[:, :, 0] * np.real(op.b)[None]
        if setup.ec3_ops:
            e = 2 * setup.L
            o = e + 1
            for op in setup.ec3_ops:
                coef = (noise[:, n, pos] / (2.0 * math.sqrt(setup.dt)))[:, None]
                pos += 1
                cb = coef * op.b[None]
                m = 2 * op.L
                a_n[:, :m, e] += 2.0 * np.imag(cb)
                a_n[:, e, :m] -= 2.0 * np.imag(cb)
                a_n[:, :m, o] += -2.0 * np.real(cb)
                a_n[:, o, :m] -= -2.0 * np.real(cb)
                cd = coef[:, 0] * op.d
                b_n[:, e] += 2.0 * np.real(cd)
                b_n[:, o] += 2.0 * np.imag(cd)
        for dur, a_h, b_h in setup.step_pieces[n]:
            a_tot = a_n + a_h[None]
            b_tot = b_n + b_h[None]
            if setup.has_linear:
                a_tot[:, :, n_act - 1] += b_tot
                a_tot[:, n_act - 1, :] -= b_tot
                a_tot[:, n_act - 1, n_act - 1] = 0.0
            r[:, :, act] = r[:, :, act] @ expm_skew(-2.0 * a_tot * dur)

    base = list(initial_occ) + [0] * setup.n_ec3_anc
    if setup.has_linear:
        sector = (tail[:, 0] < 0.5).astype(int)
        occ = np.concatenate([np.tile(base, (bsz, 1)), sector[:, None]], axis=1)
        us = tail[:, 1:]
    else:
        occ = np.tile(base, (bsz, 1))
        us = tail
    sampler = BatchSampler(r, occ, setup.n_meas)
    if mode == "average":
        dists = _enumerate_batch(sampler)
        return dists, noise
    bits = sampler.sample(us)
    return bits, noise


def _enumerate_batch(sampler: BatchSampler) -> np.ndarray:
    """(B, 2^n) per-trajectory exact distributions (closed-form Pfaffians)."""
    n = sampler.n_meas
    b = sampler.b
    out = np.empty((b, 2 ** n))
    for k in range(2 ** n):
        bits = [int(c) for c in format(k, f"0{n}b")]
        tau = np.empty((b, 2 * n), dtype=np.intp)
        sites = np.empty((b, 2 * n), dtype=np.intp)
        for m, o in enumerate(bits):
            tau[:, 2 * m] = 1 if o else 0
            tau[:, 2 * m + 1] = 0 if o else 1
            sites[:, 2 * m] = m
            sites[:, 2 * m + 1] = m
        out[:, k] = np.clip(sampler._marginal(tau, sites), 0.0, 1.0)
    return out


def run_trajectories(plan: TrajectoryPlan, model: SimulationModel,
                     initial: FockConfiguration, mode: str = "sample",
                     n_threads: int = 1, keep_outcomes: bool = False,
                     groups: dict | None = None,
                     batch_size: int = 2048) -> TrajectoryResult:
    """Monte Carlo over stochastic unitary trajectories.

    mode="sample" draws one configuration per trajectory (the estimator of
    the paper's averaged output probabilities); mode="average" accumulates
    each trajectory's exact outcome distribution instead, which removes the
    multinomial noise (validation use; requires small L).

    Identical (seed, plan, model) give identical results for every
    n_threads and batch size.
    """
    setup = _build_setup(plan, model, groups)
    initial_occ = np.asarray(initial.occupations(), dtype=int)
    if initial.L != setup.L:
        raise ValueError("initial configuration length != system modes")
    n = plan.n_trajectories
    use_batch = (not setup.ec2_jumps) and setup.n_meas <= 3 and n >= 64

    L = setup.n_meas
    keys = [format(k, f"0{L}b") for k in range(2 ** L)]
    acc = np.zeros(2 ** L)
    outcomes: list[TrajectoryOutcome] = []
    noise_s = noise_sq = 0.0
    noise_cnt = 0

    def note_noise(block: np.ndarray):
        nonlocal noise_s, noise_sq, noise_cnt
        noise_s += float(np.sum(block))
        noise_sq += float(np.sum(block * block))
        noise_cnt += block.size

    if use_batch:
        chunks = [np.arange(s, min(s + batch_size, n)) for s in range(0, n, batch_size)]

        def work(ch):
            return _run_batch(setup, plan, initial_occ, ch, mode)

        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as ex:
                results = list(ex.map(work, chunks))
        else:
            results = [work(ch) for ch in chunks]
        for ch, (payload, noise) in zip(chunks, results):
            note_noise(noise)
            if mode == "average":
                acc += payload.sum(axis=0)
            else:
                idx = payload @ (2 ** np.arange(L - 1, -1, -1))
                np.add.at(acc, idx, 1.0)
                if keep_outcomes:
                    for i, row in zip(ch, payload):
                        outcomes.append(TrajectoryOutcome(
                            FockConfiguration.from_occupations(row), int(i)))
    else:
        def work_one(i):
            return _run_one(setup, plan, initial_occ, int(i), mode)

        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as ex:
                results = list(ex.map(work_one, range(n)))
        else:
            results = [work_one(i) for i in range(n)]
        for i, (payload, noise) in enumerate(results):
            note_noise(noise)
            if mode == "average":
                for k, key in enumerate(keys):
                    acc[k] += payload.get(key, 0.0)
            else:
                acc[int(payload, 2)] += 1.0
                if keep_outcomes:
                    outcomes.append(TrajectoryOutcome(FockConfiguration(payload), i))

    probs = acc / n
    dist = {k: float(p) for k, p in zip(keys, probs)}
    if mode == "average":
        stderr = {k: 0.0 for k in keys}  # residual noise is trajectory, not multinomial
    else:
        stderr = {k: float(np.sqrt(max(p * (1 - p), 0.0) / n)) for k, p in zip(keys, probs)}
    return TrajectoryResult(
        distribution=dist, stderr=stderr, n_trajectories=n,
        outcomes=outcomes if keep_outcomes else None,
        noise_sum=noise_s, noise_sq_sum=noise_sq, noise_count=noise_cnt,
    )
