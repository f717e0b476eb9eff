"""Dissipative entangling-gate constructions and their error models.

A control-Z gate from the quantum Zeno blockade: hopping between the two
middle modes plus engineered pair loss at rate Gamma freezes every logical
state except |11>_L, which completes a full Rabi cycle and picks up the
phase -1 after t = pi/J.  Leakage errors follow the convention
survival = 1 - 2*eps, so the reported gate error is half the out-of-space
population deficit.

Encodings:
  four-mode   one species, qubit = mode pair, |0>_L = |01>, |1>_L = |10>;
              loss sqrt(Gamma) c_2 c_3 on the last pair (0-based modes).
  atom1       4 traps x 2 species; species-selective hopping on traps 1-2.
  atom2       state-independent hopping, three-step sequence with an
              instantaneous single-site phase gate in the middle.

The cold-atom schemes include the on-site interaction E = zeta * Gamma and
run in the particle-number sector {0, 2} of the 8-mode dense model (the
dynamics closes on it).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from .oracle import lindblad_evolve_dense, majorana_ops

__all__ = [
    "GateSpec", "CzGateResult", "simulate_cz", "leakage_nonhermitian",
    "total_error", "optimal_time", "sweep_hardness_diagram", "fig4b_rows",
]


@dataclass(frozen=True)
class GateSpec:
    """Zeno-gate parameters: hopping J, pair-loss rate Gamma, background
    rate Gamma_prime, interaction-to-loss ratio zeta = E/Gamma, phase-gate
    error eps0, and gate duration t (default pi/J)."""

    J: float = 1.0
    Gamma: float = 100.0
    Gamma_prime: float = 0.0
    zeta: float = 0.0
    eps0: float = 0.0
    t: float | None = None

    def __post_init__(self):
        if self.J <= 0 or self.Gamma <= 0:
            raise ValueError("J and Gamma must be positive")
        if self.Gamma_prime < 0 or self.eps0 < 0 or (self.t is not None and self.t < 0):
            raise ValueError("Gamma_prime, eps0, t must be nonnegative")

    @property
    def gamma_ratio(self) -> float:
        return self.Gamma / self.J

    @property
    def duration(self) -> float:
        return self.t if self.t is not None else math.pi / self.J


@dataclass
class CzGateResult:
    encoding: str
    basis_survival: dict[str, float]       # <i|rho_i|i> in the logical basis
    basis_leakage_error: dict[str, float]  # (1 - in-logical-space population)/2
    basis_out_of_space: dict[str, float]
    phase_11: float                        # arg <00|rho_probe|11>, ideal pi
    probe_fidelity: float                  # vs CZ acting on (|00>+|11>)/sqrt(2)
    process_overlap: np.ndarray            # 4x4 logical matrix of E(|s><s|)


def _annihilators(L: int) -> list[np.ndarray]:
    g = majorana_ops(L)
    return [0.5 * (g[2 * n] + 1j * g[2 * n + 1]) for n in range(L)]


def _sector(L: int, popcounts) -> np.ndarray:
    return np.array([k for k in range(2 ** L) if bin(k).count("1") in popcounts], dtype=int)


def _state_index(bits: str) -> int:
    return int(bits, 2)


def _encoding(encoding: str, spec: GateSpec):
    """Dense H, loss operators, logical basis states, and phase-gate factory."""
    if encoding == "four-mode":
        L = 4
        c = _annihilators(L)
        h = spec.J * (c[1].conj().T @ c[2] + c[2].conj().T @ c[1])
        losses = [math.sqrt(spec.Gamma) * (c[2] @ c[3])]
        logical = {"00": "0101", "01": "0110", "10": "1001", "11": "1010"}
        return L, h, losses, logical, None
    if encoding in ("atom1", "atom2"):
        L = 8  # mode = 2*trap + species
        c = _annihilators(L)

        def mode(trap, species):
            return 2 * trap + species

        e_int = spec.zeta * spec.Gamma
        h_int = np.zeros_like(c[0])
        for trap in range(4):
            n1 = c[mode(trap, 0)].conj().T @ c[mode(trap, 0)]
            n2 = c[mode(trap, 1)].conj().T @ c[mode(trap, 1)]
            h_int = h_int + e_int * (n1 @ n2)
        losses = [math.sqrt(spec.Gamma) * (c[mode(trap, 0)] @ c[mode(trap, 1)])
                  for trap in range(4)]
        if encoding == "atom1":
            hop = spec.J * (c[mode(1, 1)].conj().T @ c[mode(2, 1)]
                            + c[mode(2, 1)].conj().T @ c[mode(1, 1)])
        else:
            hop = sum(spec.J * (c[mode(1, s)].conj().T @ c[mode(2, s)]
                                + c[mode(2, s)].conj().T @ c[mode(1, s)])
                      for s in (0, 1))
        h = hop + h_int
        occ = {"00": [(1, 0), (3, 1)], "01": [(1, 0), (2, 1)],
               "10": [(0, 0), (3, 1)], "11": [(0, 0), (2, 1)]}
        logical = {}
        for key, locs in occ.items():
            bits = ["0"] * L
            for trap, sp in locs:
                bits[mode(trap, sp)] = "1"
            logical[key] = "".join(bits)

        def phase_gate():
            # e^{i pi} on the mu_1 occupation of trap 2 (instantaneous)
            n4 = c[mode(2, 0)].conj().T @ c[mode(2, 0)]
            return sla.expm(1j * math.pi * n4)

        return L, h, losses, logical, phase_gate
    raise ValueError(f"unknown encoding {encoding!r}")


def _evolve_logical(encoding: str, spec: GateSpec, rho: np.ndarray, L,
                    h, losses, phase_gate, sel: np.ndarray, rtol: float) -> np.ndarray:
    hs = h[np.ix_(sel, sel)]
    alist = [a[np.ix_(sel, sel)] for a in losses]
    if encoding == "atom2":
        t_half = math.pi / (2.0 * spec.J)
        rho = lindblad_evolve_dense(rho, hs, alist, 0.0, t_half, rtol)
        u = phase_gate()[np.ix_(sel, sel)]
        rho = u @ rho @ u.conj().T
        rho = lindblad_evolve_dense(rho, hs, alist, 0.0, t_half, rtol)
        return rho
    return lindblad_evolve_dense(rho, hs, alist, 0.0, spec.duration, rtol)


def simulate_cz(spec: GateSpec, encoding: str = "four-mode",
                rtol: float = 1e-9) -> CzGateResult:
    """Evolve the logical basis and the (|00>+|11>)/sqrt(2) probe under the
    full Lindblad gate model; returns survivals, leakage errors, the |11>
    phase, and the probe fidelity against the ideal control-Z."""
    L, h, losses, logical, phase_gate = _encoding(encoding, spec)
    sel = _sector(L, {0, 2})
    pos = {k: int(np.searchsorted(sel, _state_index(bits))) for k, bits in logical.items()}
    dim = len(sel)

    survival: dict[str, float] = {}
    leak_err: dict[str, float] = {}
    out_sp: dict[str, float] = {}
    for key in ("00", "01", "10", "11"):
        rho = np.zeros((dim, dim), dtype=complex)
        rho[pos[key], pos[key]] = 1.0
        rho = _evolve_logical(encoding, spec, rho, L, h, losses, phase_gate, sel, rtol)
        diag = np.real(np.diag(rho))
        p_log = float(sum(diag[pos[k]] for k in pos))
        survival[key] = float(diag[pos[key]])
        out_sp[key] = max(0.0, 1.0 - p_log)
        leak_err[key] = 0.5 * out_sp[key]

    # probe (|00> + |11>)/sqrt(2): phase and fidelity against CZ * probe
    psi = np.zeros(dim, dtype=complex)
    psi[pos["00"]] = 1.0 / math.sqrt(2)
    psi[pos["11"]] = 1.0 / math.sqrt(2)
    rho = np.outer(psi, psi.conj())
    rho = _evolve_logical(encoding, spec, rho, L, h, losses, phase_gate, sel, rtol)
    coh = complex(rho[pos["00"], pos["11"]])
    # relative phase of the |11> amplitude: <00|rho|11> = e^{-i phi}/2, ideal phi = pi
    phase_11 = float(np.mod(-np.angle(coh), 2.0 * math.pi))
    ideal = np.zeros(dim, dtype=complex)
    ideal[pos["00"]] = 1.0 / math.sqrt(2)
    ideal[pos["11"]] = -1.0 / math.sqrt(2)
    fidelity = float(np.real(ideal.conj() @ rho @ ideal))

    # full superposition probe: logical overlap matrix of the channel output
    s = np.zeros(dim, dtype=complex)
    for k in pos:
        s[pos[k]] = 0.5
    rho_s = _evolve_logical(encoding, spec, np.outer(s, s.conj()), L, h, losses,
                            phase_gate, sel, rtol)
    order = ("00", "01", "10", "11")
    overlap = np.array([[rho_s[pos[a], pos[b]] for b in order] for a in order])

    return CzGateResult(
        encoding=encoding, basis_survival=survival, basis_leakage_error=leak_err,
        basis_out_of_space=out_sp, phase_11=phase_11,
        probe_fidelity=fidelity, process_overlap=overlap,
    )


def leakage_nonhermitian(spec: GateSpec, which: str = "H_S") -> float:
    """Leakage error eps from the non-Hermitian leakage Hamiltonians,
    defined through survival = 1 - 2 eps.

    H_S  (2x2): blocked two-state model of the four-mode scheme,
                survival = |<00| exp(-i pi H_S / J) |00>|^2.
    H_S' (4x4): cold-atom model with interaction E = zeta*Gamma,
                survival = |<01| exp(-i H_S' t) |01>|^2 at t = pi/J.
    """
    j, gam = spec.J, spec.Gamma
    if which == "H_S":
        h = np.array([[0.0, j], [j, -0.5j * gam]], dtype=complex)
        s = sla.expm(-1j * math.pi * h / j)
        surv = abs(s[0, 0]) ** 2
    elif which == "H_S_prime":
        e = spec.zeta * gam
        z = e - 0.5j * gam
        h = np.array([
            [0.0, j, j, 0.0],
            [j, z, 0.0, j],
            [j, 0.0, z, j],
            [0.0, j, j, 0.0],
        ], dtype=complex)
        s = sla.expm(-1j * h * spec.duration)
        surv = abs(s[0, 0]) ** 2
    else:
        raise ValueError("which must be 'H_S' or 'H_S_prime'")
    return 0.5 * (1.0 - surv)


def total_error(spec: GateSpec) -> float:
    """eps0 + Gamma' t + 4 pi^2 / (Gamma t (1 + 4 zeta^2)) at t = spec.duration.

    The Zeno term is the half-deficit error of the non-Hermitian model
    (survival = 1 - 8 pi^2/(Gamma t)/(1+4 zeta^2) = 1 - 2 eps); with this
    convention the closed-form optimum below is its exact stationary point.
    """
    t = spec.duration
    if t <= 0:
        raise ValueError("gate duration must be positive")
    zeno = 4.0 * math.pi ** 2 / (spec.Gamma * t * (1.0 + 4.0 * spec.zeta ** 2))
    return spec.eps0 + spec.Gamma_prime * t + zeno


def optimal_time(spec: GateSpec) -> tuple[float, float]:
    """(t_opt, eps_min): t_opt = 2 pi / sqrt(Gamma Gamma' (1+4 zeta^2)),
    eps_min = eps0 + 4 pi sqrt(Gamma' / (Gamma (1+4 zeta^2)))."""
    if spec.Gamma_prime <= 0:
        raise ValueError("optimal_time requires Gamma_prime > 0")
    q = 1.0 + 4.0 * spec.zeta ** 2
    t_opt = 2.0 * math.pi / math.sqrt(spec.Gamma * spec.Gamma_prime * q)
    eps_min = spec.eps0 + 4.0 * math.pi * math.sqrt(spec.Gamma_prime / (spec.Gamma * q))
    return t_opt, eps_min


def sweep_hardness_diagram(ratios, p0: float):
    """Rows (ratio, min total error, regime label) for the loss/gain diagram.

    The minimum error over gate speed is sqrt(8 pi^2 Gamma'/Gamma), mirrored
    under Gamma <-> Gamma'; points with error <= p0 are fault-tolerance-hard,
    ratio 1 is the self-adjoint easy line, the rest is inconclusive.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must be in (0, 1)")
    rows = []
    for x in ratios:
        if x <= 0:
            raise ValueError("ratios must be positive")
        eps = math.sqrt(8.0 * math.pi ** 2 * min(x, 1.0 / x))
        if abs(x - 1.0) <= 1e-12:
            label = "EC1-easy"
        elif eps <= p0:
            label = "hard"
        else:
            label = "inconclusive"
        rows.append((float(x), float(eps), label))
    return rows


def fig4b_rows(table, gamma_prime: float, eps0: float = 0.0):
    """Minimum-error rows from tabulated (label, Gamma, zeta) inputs."""
    rows = []
    for label, gam, zeta in table:
        spec = GateSpec(J=1.0, Gamma=float(gam), Gamma_prime=gamma_prime,
                        zeta=float(zeta), eps0=eps0)
        _, eps_min = optimal_time(spec)
        rows.append((label, float(gam), float(zeta), eps_min))
    return rows
