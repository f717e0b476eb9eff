"""Domain types: quadratic Hamiltonians, quadratic-linear jump operators,
Fock configurations, and classification of jump-operator sets.

Conventions (0-based Majorana indices throughout):
    gamma_{2n}   = c_n + c_n^dag
    gamma_{2n+1} = -i (c_n - c_n^dag)
    H    = (i/2) sum_ij alpha_ij gamma_i gamma_j + sum_i beta_i gamma_i
    A    = (i/2) sum_ij a_ij gamma_i gamma_j + sum_i b_i gamma_i + d
with alpha real antisymmetric (2L x 2L), beta real (2L,), a complex
antisymmetric, b complex, d complex.  The symmetric part of a raw `a`
contributes only a scalar (gamma_i^2 = 1) and is folded into `d` at
construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ClassTag", "HamiltonianSegment", "QuadraticHamiltonian", "LindbladOperator",
    "Ec2Jump", "LindbladSet", "FockConfiguration", "ValidationReport",
    "AmbiguousClass", "validate_hamiltonian", "classify_set",
    "fock_operator_as_majorana", "operator_product", "scale_operator",
    "constant_hamiltonian", "hopping_alpha", "number_alpha",
    "ExperimentConfig", "load_config", "config_from_dict", "config_hash",
]

_ANTISYM_TOL = 1e-12
_PAIR_TOL = 1e-9


class ClassTag(Enum):
    EC1 = "EC1"
    EC2 = "EC2"
    EC3 = "EC3"
    GENERAL = "general"


class AmbiguousClass(ValueError):
    """Raised when a requested class tag contradicts the detected structure."""


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HamiltonianSegment:
    t_start: float
    t_end: float
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _freeze(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "beta", _freeze(np.asarray(self.beta, dtype=float)))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Piecewise-constant quadratic-linear Hamiltonian on L modes."""

    L: int
    segments: tuple[HamiltonianSegment, ...]

    def __init__(self, L: int, segments: Sequence[HamiltonianSegment]):
        object.__setattr__(self, "L", int(L))
        object.__setattr__(self, "segments", tuple(segments))

    @property
    def t_final(self) -> float:
        return self.segments[-1].t_end if self.segments else 0.0

    @property
    def has_linear_term(self) -> bool:
        return any(np.any(s.beta != 0.0) for s in self.segments)

    def at(self, t: float) -> HamiltonianSegment:
        """Segment containing time t (right-open intervals, last one closed)."""
        for s in self.segments:
            if s.t_start <= t < s.t_end:
                return s
        last = self.segments[-1]
        if abs(t - last.t_end) <= 1e-12 * max(1.0, abs(last.t_end)):
            return last
        raise ValueError(f"time {t} not covered by the schedule")

    def segments_between(self, t0: float, t1: float):
        """Yield (t_start, t_end, segment) pieces tiling [t0, t1]."""
        eps = 1e-12 * max(1.0, abs(t1))
        for s in self.segments:
            lo = max(t0, s.t_start)
            hi = min(t1, s.t_end)
            if hi - lo > eps:
                yield lo, hi, s


def constant_hamiltonian(L: int, alpha=None, beta=None, t_final: float = 1.0) -> QuadraticHamiltonian:
    """Single-segment Hamiltonian over [0, t_final]."""
    alpha = np.zeros((2 * L, 2 * L)) if alpha is None else np.asarray(alpha, dtype=float)
    beta = np.zeros(2 * L) if beta is None else np.asarray(beta, dtype=float)
    return QuadraticHamiltonian(L, [HamiltonianSegment(0.0, float(t_final), alpha, beta)])


def validate_hamiltonian(h: QuadraticHamiltonian) -> ValidationReport:
    """Check antisymmetry of every alpha, finiteness, and schedule tiling."""
    fails: list[str] = []
    n = 2 * h.L
    if not h.segments:
        fails.append("empty schedule")
    prev_end = 0.0
    for k, s in enumerate(h.segments):
        if s.alpha.shape != (n, n):
            fails.append(f"segment {k}: alpha shape {s.alpha.shape} != ({n}, {n})")
            continue
        if s.beta.shape != (n,):
            fails.append(f"segment {k}: beta shape {s.beta.shape} != ({n},)")
            continue
        if not (np.all(np.isfinite(s.alpha)) and np.all(np.isfinite(s.beta))):
            fails.append(f"segment {k}: non-finite entries")
        dev = float(np.max(np.abs(s.alpha + s.alpha.T))) if s.alpha.size else 0.0
        if dev > _ANTISYM_TOL:
            fails.append(f"segment {k}: alpha not antisymmetric (max |a+a^T| = {dev:.3e})")
        if s.t_end <= s.t_start:
            fails.append(f"segment {k}: non-positive duration")
        if abs(s.t_start - prev_end) > 1e-12 * max(1.0, abs(prev_end)):
            fails.append(f"segment {k}: schedule gap/overlap at t={s.t_start} (expected {prev_end})")
        prev_end = s.t_end
    return ValidationReport(ok=not fails, failures=tuple(fails))


@dataclass(frozen=True)
class LindbladOperator:
    """Quadratic-linear jump operator (a, b, d) on L modes.

    `a` is stored antisymmetrized; the diagonal of the symmetric residue is
    folded into `d` (gamma_i^2 = 1, off-diagonal symmetric parts cancel).
    """

    a: np.ndarray
    b: np.ndarray
    d: complex

    def __init__(self, a, b, d=0.0):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
            raise ValueError("need a (2L,2L) and b (2L,) of matching size")
        if a.shape[0] % 2:
            raise ValueError("Majorana dimension must be even")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.isfinite(d)):
            raise ValueError("non-finite entries")
        d = complex(d) + 0.5j * complex(np.trace(a))
        a = 0.5 * (a - a.T)
        object.__setattr__(self, "a", _freeze(a))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "d", d)

    @property
    def L(self) -> int:
        return self.a.shape[0] // 2

    @property
    def is_linear(self) -> bool:
        return not np.any(np.abs(self.a) > 0.0)

    def dagger(self) -> "LindbladOperator":
        # (gamma_i gamma_j)^dag = gamma_j gamma_i, so a -> conj(a) under dagger
        return LindbladOperator(np.conj(self.a), np.conj(self.b), np.conj(self.d))

    def coefficient_vector(self) -> np.ndarray:
        iu = np.triu_indices(2 * self.L, 1)
        return np.concatenate([self.a[iu], self.b, [self.d]])

    def norm_bound(self) -> float:
        """Triangle-inequality spectral-norm bound: each Majorana monomial is unitary."""
        iu = np.triu_indices(2 * self.L, 1)
        return float(np.sum(np.abs(self.a[iu])) + np.sum(np.abs(self.b)) + abs(self.d))


def scale_operator(op: LindbladOperator, c: complex) -> LindbladOperator:
    return LindbladOperator(c * op.a, c * op.b, c * op.d)


def operator_product(x: LindbladOperator, y: LindbladOperator) -> LindbladOperator:
    """Product of two LINEAR quadratic-linear operators (a = 0 on both).

    (b1.gamma + d1)(b2.gamma + d2) stays quadratic-linear:
        gamma_i gamma_j = delta_ij + antisymmetric part.
    Raises if either factor has a quadratic part (the product would be quartic).
    """
    if not (x.is_linear and y.is_linear):
        raise ValueError("operator_product requires linear factors")
    # b1_i b2_j gamma_i gamma_j -> (i/2) a_ij gamma_i gamma_j with a_ij = -i(b1_i b2_j - b1_j b2_i)
    outer = np.outer(x.b, y.b)
    a = -1j * (outer - outer.T)
    d = complex(np.dot(x.b, y.b)) + x.d * y.d
    b = x.d * y.b + y.d * x.b
    return LindbladOperator(a, b, d)


def fock_operator_as_majorana(kind: str, n: int, L: int) -> LindbladOperator:
    """Encoding of c_n ('annihilate') or c_n^dag ('create') as (a, b, d)."""
    if not 0 <= n < L:
        raise IndexError(f"mode index {n} out of range for L={L}")
    b = np.zeros(2 * L, dtype=complex)
    if kind == "annihilate":
        b[2 * n] = 0.5
        b[2 * n + 1] = 0.5j
    elif kind == "create":
        b[2 * n] = 0.5
        b[2 * n + 1] = -0.5j
    else:
        raise ValueError(f"kind must be 'create' or 'annihilate', got {kind!r}")
    return LindbladOperator(np.zeros((2 * L, 2 * L), dtype=complex), b, 0.0)


def hopping_alpha(L: int, i: int, j: int, J: float) -> np.ndarray:
    """alpha for J (c_i^dag c_j + c_j^dag c_i); the scalar residue is dropped."""
    cj = fock_operator_as_majorana("annihilate", j, L)
    cid = fock_operator_as_majorana("create", i, L)
    term = operator_product(cid, cj)  # c_i^dag c_j
    return np.real(J * (term.a + np.conj(term.a)))


def number_alpha(L: int, i: int, coeff: float = 1.0) -> np.ndarray:
    """alpha for coeff * c_i^dag c_i (the scalar 1/2 offset is dropped)."""
    cid = fock_operator_as_majorana("create", i, L)
    ci = fock_operator_as_majorana("annihilate", i, L)
    return np.real(coeff * operator_product(cid, ci).a)


@dataclass(frozen=True)
class Ec2Jump:
    """Unitary jump A = sqrt(rate) * exp(-i G), G quadratic-linear Hermitian."""

    rate: float
    g_alpha: np.ndarray
    g_beta: np.ndarray

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")
        object.__setattr__(self, "g_alpha", _freeze(np.asarray(self.g_alpha, dtype=float)))
        object.__setattr__(self, "g_beta", _freeze(np.asarray(self.g_beta, dtype=float)))


@dataclass(frozen=True)
class LindbladSet:
    """A classified set of jump operators.

    EC2 sets are declared through `ec2_jumps` (rate + generator per
    operator); the (a, b, d) parameterization cannot express exp(-iG).
    """

    ops: tuple[LindbladOperator, ...] = ()
    class_tag: ClassTag = ClassTag.GENERAL
    ec2_jumps: tuple[Ec2Jump, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "ec2_jumps", tuple(self.ec2_jumps))
        k_a = len(self.ops) + len(self.ec2_jumps)
        if self.ops:
            L = self.ops[0].L
        elif self.ec2_jumps:
            L = self.ec2_jumps[0].g_alpha.shape[0] // 2
        else:
            return
        if k_a > L * (L + 1):
            raise ValueError(f"k_A = {k_a} exceeds L(L+1) = {L * (L + 1)}; "
                             "reduce the set before constructing")

    @property
    def is_empty(self) -> bool:
        return not self.ops and not self.ec2_jumps


def _phase_aligned_match(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    """True if u = e^{i phi} v for some phase, within tol (same 2-norm assumed)."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < tol and nv < tol:
        return True
    if abs(nu - nv) > tol * max(1.0, nu, nv):
        return False
    ip = np.vdot(v, u)
    return abs(abs(ip) - nu * nv) <= tol * max(1.0, nu * nv)


def _merge_proportional(ops: list[LindbladOperator]) -> list[LindbladOperator]:
    """Merge operators equal up to phase in quadrature (set-splitting invariance)."""
    merged: list[LindbladOperator] = []
    vecs: list[np.ndarray] = []
    mags: list[float] = []
    for op in ops:
        v = op.coefficient_vector()
        nv = np.linalg.norm(v)
        placed = False
        for i, w in enumerate(vecs):
            if _phase_aligned_match(v / max(nv, 1e-300), w, _PAIR_TOL):
                mags[i] = float(np.hypot(mags[i], nv))
                placed = True
                break
        if not placed and nv > 0:
            vecs.append(v / nv)
            mags.append(float(nv))
            merged.append(op)
    out = []
    for op, m in zip(merged, mags):
        v = op.coefficient_vector()
        out.append(scale_operator(op, m / np.linalg.norm(v)))
    return out


def _is_self_adjoint_set(ops: Sequence[LindbladOperator]) -> bool:
    """Pairing into (A, A^dag) partners up to global phases, after merging."""
    try:
        ec1_partition(ops)
        return True
    except AmbiguousClass:
        return False


def ec1_partition(ops: Sequence[LindbladOperator]):
    """Split a self-adjoint set into (non-Hermitian A1 reps, Hermitian ops).

    Returns (pairs, hermitian): `pairs` holds one operator per (A, A^dag)
    partner pair; `hermitian` holds self-paired operators, to be driven by a
    real noise of doubled variance (the 1/sqrt(2)-splitting convention).
    """
    pool = _merge_proportional(list(ops))
    used = [False] * len(pool)
    pairs: list[LindbladOperator] = []
    herm: list[LindbladOperator] = []
    for i, op in enumerate(pool):
        if used[i]:
            continue
        v = op.coefficient_vector()
        nv = np.linalg.norm(v)
        if nv == 0:
            used[i] = True
            continue
        vd = op.dagger().coefficient_vector()
        if _phase_aligned_match(v / nv, vd / np.linalg.norm(vd), _PAIR_TOL):
            herm.append(op)
            used[i] = True
            continue
        for j in range(len(pool)):
            if j == i or used[j]:
                continue
            w = pool[j].coefficient_vector()
            nw = np.linalg.norm(w)
            if _phase_aligned_match(w / nw, vd / np.linalg.norm(vd), _PAIR_TOL) and \
                    abs(nw - nv) <= _PAIR_TOL * max(1.0, nw):
                pairs.append(op)
                used[i] = used[j] = True
                break
        else:
            raise AmbiguousClass("set is not self-adjoint: unpaired operator")
    return pairs, herm


def classify_set(ops: Sequence[LindbladOperator], hints: str = "auto",
                 ec2_jumps: Sequence[Ec2Jump] = ()) -> ClassTag:
    """Most specific class tag whose invariant holds.

    Precedence for auto detection: declared EC2 jumps win; a self-adjoint
    pairing gives EC1; an all-linear set gives EC3; otherwise general.  An
    explicit hint is verified against the detected structure and
    AmbiguousClass is raised on contradiction.
    """
    ops = list(ops)
    if ec2_jumps:
        if ops:
            raise AmbiguousClass("mixing ec2 jumps with (a,b,d) operators in one set")
        detected = ClassTag.EC2
    elif not ops:
        detected = ClassTag.EC1  # empty set: trivially self-adjoint
    elif _is_self_adjoint_set(ops):
        detected = ClassTag.EC1
    elif all(op.is_linear for op in ops):
        detected = ClassTag.EC3
    else:
        detected = ClassTag.GENERAL
    if hints == "auto":
        return detected
    want = ClassTag(hints) if not isinstance(hints, ClassTag) else hints
    if want == detected:
        return want
    # a weaker-than-detected hint is honored when its invariant still holds
    if want == ClassTag.GENERAL:
        return want
    if want == ClassTag.EC3 and ops and all(op.is_linear for op in ops):
        return want
    raise AmbiguousClass(f"hint {want.value} contradicts detected class {detected.value}")


@dataclass(frozen=True)
class FockConfiguration:
    """Occupation bit string over L modes."""

    bits: str

    def __post_init__(self):
        if not self.bits or any(c not in "01" for c in self.bits):
            raise ValueError(f"bits must be a nonempty 0/1 string, got {self.bits!r}")

    @classmethod
    def from_occupations(cls, occ: Sequence[int]) -> "FockConfiguration":
        return cls("".join("1" if o else "0" for o in occ))

    @property
    def L(self) -> int:
        return len(self.bits)

    @property
    def n_particles(self) -> int:
        return self.bits.count("1")

    def occupations(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.bits)


# ---------------------------------------------------------------------------
# JSON experiment schema


@dataclass(frozen=True)
class ExperimentConfig:
    L: int
    hamiltonian: QuadraticHamiltonian
    lindblad: LindbladSet
    initial: FockConfiguration
    t_final: float
    target_epsilon: float = 0.05
    seed: int = 0
    raw: dict = field(default_factory=dict, compare=False)


def _as_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(x[0], x[1])
    raise ValueError(f"complex values must be numbers or [re, im] pairs, got {x!r}")


def _complex_array(x, shape) -> np.ndarray:
    arr = np.asarray([[_as_complex(v) for v in row] for row in x], dtype=complex) \
        if len(shape) == 2 else np.asarray([_as_complex(v) for v in x], dtype=complex)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    return arr


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Parse and validate the JSON experiment schema."""
    def fail(path, msg):
        raise ValueError(f"config error at {path}: {msg}")

    for key in ("L", "hamiltonian", "initial", "t_final"):
        if key not in doc:
            fail(f"$.{key}", "missing required key")
    L = doc["L"]
    if not isinstance(L, int) or L <= 0:
        fail("$.L", "must be a positive integer")
    n = 2 * L
    segs = []
    for k, seg in enumerate(doc["hamiltonian"]):
        path = f"$.hamiltonian[{k}]"
        try:
            alpha = np.asarray(seg["alpha"], dtype=float) if "alpha" in seg else np.zeros((n, n))
            beta = np.asarray(seg["beta"], dtype=float) if "beta" in seg else np.zeros(n)
            segs.append(HamiltonianSegment(float(seg["t_start"]), float(seg["t_end"]), alpha, beta))
        except (KeyError, TypeError, ValueError) as e:
            fail(path, str(e))
        if segs[-1].alpha.shape != (n, n):
            fail(path + ".alpha", f"shape must be ({n}, {n})")
        if segs[-1].beta.shape != (n,):
            fail(path + ".beta", f"shape must be ({n},)")
    ham = QuadraticHamiltonian(L, segs)
    rep = validate_hamiltonian(ham)
    if not rep.ok:
        fail("$.hamiltonian", "; ".join(rep.failures))

    ops: list[LindbladOperator] = []
    jumps: list[Ec2Jump] = []
    for k, entry in enumerate(doc.get("lindblad", [])):
        path = f"$.lindblad[{k}]"
        try:
            if "rate" in entry or "generator" in entry:
                gen = entry.get("generator", {})
                g_alpha = np.asarray(gen["alpha"], dtype=float) if "alpha" in gen else np.zeros((n, n))
                g_beta = np.asarray(gen["beta"], dtype=float) if "beta" in gen else np.zeros(n)
                jumps.append(Ec2Jump(float(entry["rate"]), g_alpha, g_beta))
            else:
                a = _complex_array(entry["a"], (n, n)) if "a" in entry else np.zeros((n, n), complex)
                b = _complex_array(entry["b"], (n,)) if "b" in entry else np.zeros(n, complex)
                d = _as_complex(entry.get("d", 0.0))
                ops.append(LindbladOperator(a, b, d))
        except (KeyError, TypeError, ValueError) as e:
            fail(path, str(e))

    hint = doc.get("class", "auto")
    try:
        tag = classify_set(ops, hints=hint, ec2_jumps=jumps)
    except (AmbiguousClass, ValueError) as e:
        fail("$.class", str(e))
    lset = LindbladSet(ops=tuple(ops), class_tag=tag, ec2_jumps=tuple(jumps))

    initial = FockConfiguration(doc["initial"])
    if initial.L != L:
        fail("$.initial", f"bit string length {initial.L} != L = {L}")
    t_final = float(doc["t_final"])
    if abs(t_final - ham.t_final) > 1e-9 * max(1.0, t_final):
        fail("$.t_final", f"t_final = {t_final} does not match schedule end {ham.t_final}")
    return ExperimentConfig(
        L=L, hamiltonian=ham, lindblad=lset, initial=initial, t_final=t_final,
        target_epsilon=float(doc.get("target_epsilon", 0.05)),
        seed=int(doc.get("seed", 0)), raw=doc,
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        doc = json.load(fh)
    return config_from_dict(doc)


def config_hash(doc: dict) -> str:
    """Content digest of a config document (provenance stamp in outputs)."""
    import hashlib
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
