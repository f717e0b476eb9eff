"""Command-line driver.

Commands: sample, simulate, oracle, compare, bound, gate-demo, sweep,
fig4b.  Distributions travel as CSV with a header row and a trailing
metadata comment (config hash + version); scalar reports are JSON on
stdout.  All stochastic commands are deterministic given (config, seed)
for any --threads value.

Exit codes: 0 success, 2 config/schema violation, 3 infeasible dimension.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bounds import InfeasibleTarget, choose_dt, error_bound, runtime_estimate
from .gates import GateSpec, fig4b_rows, simulate_cz, sweep_hardness_diagram
from .model import ClassTag, ExperimentConfig, config_hash, load_config
from .oracle import DimensionTooLarge, fock_density, lindblad_evolve, measure_distribution, tvd
from .sampler import enumerate_distribution, handle_for_hamiltonian, sample
from .unraveling import SimulationModel, TrajectoryPlan, run_trajectories, trajectory_rng

VERSION_TAG = f"fls-v{__version__}"


def _meta_line(cfg_digest: str) -> str:
    return f"# config={cfg_digest} version={VERSION_TAG}"


def _write_csv(path: str, header: list[str], rows, cfg_digest: str):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    lines.append(_meta_line(cfg_digest))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _read_distribution(path: str) -> dict[str, float]:
    dist: dict[str, float] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if parts[0] in ("bitstring", "configuration"):
                continue
            dist[parts[0]] = dist.get(parts[0], 0.0) + float(parts[1])
    return dist


def _load(args) -> tuple[ExperimentConfig, str]:
    cfg = load_config(args.config)
    if args.seed is not None:
        object.__setattr__(cfg, "seed", int(args.seed))
    return cfg, config_hash(cfg.raw)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("FLS_THREADS")
    return max(1, int(env)) if env else 1


def _plan_for(cfg: ExperimentConfig, args) -> TrajectoryPlan:
    tag = cfg.lindblad.class_tag
    if args.dt is not None and args.dt != "auto":
        dt = float(args.dt)
    else:
        eps = args.epsilon if getattr(args, "epsilon", None) else cfg.target_epsilon
        dt = choose_dt(cfg.hamiltonian, cfg.lindblad, cfg.t_final, eps)
    return TrajectoryPlan.for_time(
        cfg.t_final, dt, tag, cfg.seed, int(args.trajectories),
        needs_ancillas=(tag == ClassTag.EC3 and bool(cfg.lindblad.ops)),
    )


def cmd_sample(args) -> int:
    cfg, digest = _load(args)
    if not cfg.lindblad.is_empty:
        print("warning: sample uses only the Hamiltonian part; "
              "use `simulate` for dissipative dynamics", file=sys.stderr)
    handle = handle_for_hamiltonian(cfg.hamiltonian, cfg.initial, cfg.t_final)
    if args.dump_propagator:
        prop = handle.propagator
        rows = [tuple(row) for row in prop.R]
        trows = [tuple(f"{z.real:.17g}{z.imag:+.17g}j" for z in row) for row in prop.T]
        _write_csv(args.dump_propagator, [f"R{j}" for j in range(prop.R.shape[1])],
                   rows, digest)
        _write_csv(args.dump_propagator + ".T.csv",
                   [f"T{j}" for j in range(prop.T.shape[1])], trows, digest)
    if args.enumerate:
        dist = enumerate_distribution(handle)
        rows = [(bits, dist[bits]) for bits in sorted(dist)]
        _write_csv(args.out, ["bitstring", "probability"], rows, digest)
        return 0
    rng = trajectory_rng(cfg.seed, 0)
    rows = [(sample(handle, rng).bits,) for _ in range(int(args.n))]
    _write_csv(args.out, ["bitstring"], rows, digest)
    return 0


def cmd_simulate(args) -> int:
    cfg, digest = _load(args)
    plan = _plan_for(cfg, args)
    model = SimulationModel(cfg.hamiltonian, cfg.lindblad)
    res = run_trajectories(plan, model, cfg.initial, n_threads=_threads(args))
    rows = [(bits, res.distribution[bits], res.stderr[bits])
            for bits in sorted(res.distribution)]
    _write_csv(args.out, ["bitstring", "probability", "stderr"], rows, digest)
    return 0


def cmd_oracle(args) -> int:
    cfg, digest = _load(args)
    rho0 = fock_density(cfg.initial.occupations(), cfg.L)
    rho = lindblad_evolve(rho0, cfg.hamiltonian, cfg.lindblad, cfg.t_final)
    dist = measure_distribution(rho)
    rows = [(bits, dist[bits]) for bits in sorted(dist)]
    _write_csv(args.out, ["bitstring", "probability"], rows, digest)
    return 0


def cmd_compare(args) -> int:
    p = _read_distribution(args.dist_a)
    q = _read_distribution(args.dist_b)
    print(_fmt(tvd(p, q)))
    return 0


def cmd_bound(args) -> int:
    cfg, _ = _load(args)
    t = args.t if args.t is not None else cfg.t_final
    eps = args.epsilon if args.epsilon is not None else cfg.target_epsilon
    dt = choose_dt(cfg.hamiltonian, cfg.lindblad, t, eps)
    n_traj = int(args.trajectories)
    out = {
        "dt": dt,
        "n_steps": round(t / dt),
        "epsilon_bound": error_bound(cfg.hamiltonian, cfg.lindblad, t, dt),
        "runtime_estimate_ops": runtime_estimate(cfg.L, t, dt, n_traj,
                                                 cfg.lindblad.class_tag),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_gate_demo(args) -> int:
    scheme = {"zeno": "four-mode", "atom1": "atom1", "atom2": "atom2"}[args.scheme]
    spec = GateSpec(J=1.0, Gamma=float(args.gamma_ratio), zeta=float(args.zeta))
    res = simulate_cz(spec, encoding=scheme, rtol=float(args.rtol))
    out = {
        "scheme": args.scheme,
        "gamma_ratio": spec.gamma_ratio,
        "zeta": spec.zeta,
        "basis_survival": res.basis_survival,
        "basis_leakage_error": res.basis_leakage_error,
        "phase_11": res.phase_11,
        "probe_fidelity": res.probe_fidelity,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    ratios = np.logspace(float(args.log10_min), float(args.log10_max), int(args.points))
    ratios = sorted(set(list(ratios) + [1.0]))
    rows = sweep_hardness_diagram(ratios, float(args.p0))
    digest = config_hash({"p0": args.p0, "points": args.points})
    _write_csv(args.out, ["gamma_prime_over_gamma", "epsilon", "label"], rows, digest)
    return 0


def cmd_fig4b(args) -> int:
    table = []
    with open(args.table) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("label"):
                continue
            label, gam, zeta = line.split(",")
            table.append((label, float(gam), float(zeta)))
    rows = fig4b_rows(table, float(args.gamma_prime), float(args.eps0))
    digest = config_hash({"gamma_prime": args.gamma_prime, "table": table})
    _write_csv(args.out, ["label", "gamma", "zeta", "epsilon_min"], rows, digest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fls", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=VERSION_TAG)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out", default="-")

    sp = sub.add_parser("sample", help="draw unitary free-fermion samples")
    common(sp)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--enumerate", action="store_true",
                    help="emit the exact enumerated distribution instead of samples")
    sp.add_argument("--dump-propagator", dest="dump_propagator", default=None,
                    help="debug CSV dump of R (and T to <path>.T.csv)")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("simulate", help="trajectory unraveling of the Lindblad dynamics")
    common(sp)
    sp.add_argument("--trajectories", type=int, default=1000)
    sp.add_argument("--dt", default="auto")
    sp.add_argument("--epsilon", type=float, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle", help="exact dense distribution")
    common(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("compare", help="TVD between two distribution CSVs")
    sp.add_argument("dist_a")
    sp.add_argument("dist_b")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bound", help="timestep + error bound + runtime estimate")
    common(sp)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--trajectories", type=int, default=1000)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("gate-demo", help="dissipative control-Z gate summary")
    sp.add_argument("--scheme", choices=("zeno", "atom1", "atom2"), default="zeno")
    sp.add_argument("--gamma-ratio", dest="gamma_ratio", type=float, default=100.0)
    sp.add_argument("--zeta", type=float, default=0.0)
    sp.add_argument("--rtol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_gate_demo)

    sp = sub.add_parser("sweep", help="hardness-diagram minimum-error curve")
    sp.add_argument("--p0", type=float, required=True)
    sp.add_argument("--log10-min", dest="log10_min", type=float, default=-8.0)
    sp.add_argument("--log10-max", dest="log10_max", type=float, default=8.0)
    sp.add_argument("--points", type=int, default=65)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fig4b", help="minimum gate error from tabulated (Gamma, zeta)")
    sp.add_argument("--gamma-prime", dest="gamma_prime", type=float, required=True)
    sp.add_argument("--eps0", type=float, default=0.0)
    sp.add_argument("--table", required=True)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_fig4b)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except InfeasibleTarget as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        if isinstance(e, json.JSONDecodeError):
            print(f"error: config line {e.lineno}, column {e.colno}: {e.msg}", file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
