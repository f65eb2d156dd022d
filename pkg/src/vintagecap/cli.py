"""Command-line front end: simulation, optimization, value probes,
closed-loop runs, the audit suite, and report rendering."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audits
from .errors import VintagecapError
from .feedback import closed_loop_csv, closed_loop_solve, verification_gap
from .model import (
    CANONICAL_NAMES,
    CapitalState,
    ControlPath,
    VintageModel,
    builtin_state,
    canonical_instance,
    load_model,
)
from .optimize import objective_value, solve_finite_horizon
from .transport import solve_forward, steps_for
from .value import psi_infinity

__all__ = ["main", "run"]


def _load_model_arg(spec: str) -> VintageModel:
    if spec in CANONICAL_NAMES:
        return canonical_instance(spec)
    return load_model(spec)


def _load_state_arg(spec: str, model: VintageModel) -> CapitalState:
    if spec.startswith("builtin:"):
        spec = spec.split(":", 1)[1]
    if spec in ("ones", "zero", "bump"):
        return builtin_state(spec, model.grid)
    values = np.loadtxt(spec, delimiter=",", ndmin=1)
    return CapitalState(values, model.grid)


def _load_control_arg(spec: str, model: VintageModel,
                      n_steps: int) -> ControlPath:
    if spec == "zero":
        return ControlPath.zeros(model.grid, 0.0, n_steps)
    data = np.loadtxt(spec, delimiter=",", ndmin=2)
    if data.shape != (n_steps, model.n_cells + 1):
        raise VintagecapError(
            f"control file shape {data.shape} does not match "
            f"{n_steps} steps x {model.n_cells + 1} columns")
    return ControlPath(model.grid, 0.0, data[:, 0], data[:, 1:])


def _control_csv(path: Path, u: ControlPath) -> None:
    with open(path, "w") as fh:
        header = ",".join(["u0"] + [f"u1_{j}" for j in range(u.u1s.shape[1])])
        fh.write(header + "\n")
        for k in range(u.n_steps):
            row = [f"{u.u0s[k]:.17g}"] + [f"{v:.17g}" for v in u.u1s[k]]
            fh.write(",".join(row) + "\n")


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    model = _load_model_arg(args.model)
    x = _load_state_arg(args.x, model)
    n_steps = steps_for(args.horizon, model.dt)
    u = _load_control_arg(args.control, model, n_steps)
    traj = solve_forward(x, u, model)
    out = _outdir(args)
    traj.to_csv(out / "trajectory.csv")
    print(json.dumps({"final_h_norm": float(traj.h_norms()[-1]),
                      "steps": n_steps}))
    return 0


def _cmd_optimize(args) -> int:
    model = _load_model_arg(args.model)
    x = _load_state_arg(args.x, model)
    u, traj, report = solve_finite_horizon(x, args.horizon, model,
                                           tol=args.tol)
    out = _outdir(args)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    report.history_csv(out / "history.csv")
    _control_csv(out / "control.csv", u)
    traj.to_csv(out / "trajectory.csv")
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_value(args) -> int:
    model = _load_model_arg(args.model)
    x = _load_state_arg(args.x, model)
    probe = psi_infinity(x, model, tol=args.tol)
    out = _outdir(args)
    probe.to_json(out / "value_probe.json")
    probe.to_csv(out / "convergence.csv")
    print(json.dumps({"limit": probe.limit, "t_used": probe.t_used}))
    return 0


def _cmd_feedback(args) -> int:
    model = _load_model_arg(args.model)
    x = _load_state_arg(args.x, model)
    provider = audits.make_provider(model)
    horizon = args.horizon or 10.0 / model.lam
    traj, u = closed_loop_solve(x, horizon, provider, model)
    gaps = verification_gap(traj, u, provider, model)
    out = _outdir(args)
    closed_loop_csv(out / "closed_loop.csv", traj, u, gaps, model)
    cost = objective_value(x, u, model)
    print(json.dumps({"discounted_cost": cost,
                      "total_gap": float(np.sum(gaps)) * model.dt}))
    return 0


def _cmd_verify(args) -> int:
    model = _load_model_arg(args.model)
    results = audits.run_all(model, seed=args.seed, tol=args.tol)
    summary = {
        "audits": [r.to_dict() for r in results],
        "model": args.model,
        "seed": args.seed,
    }
    text = json.dumps(summary, indent=2)
    if args.out:
        out = _outdir(args)
        (out / "summary.json").write_text(text)
    print(text)
    return 0 if all(r.passed for r in results) else 1


def _render_figures(src: Path, out: Path) -> list[str]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    made = []
    traj_csv = src / "trajectory.csv"
    if traj_csv.exists():
        data = np.loadtxt(traj_csv, delimiter=",", skiprows=1)
        times = np.unique(data[:, 0])
        ages = np.unique(data[:, 1])
        grid = data[:, 2].reshape(len(times), len(ages))
        fig, ax = plt.subplots(figsize=(7, 4))
        mesh = ax.pcolormesh(ages, times, grid, shading="auto")
        fig.colorbar(mesh, ax=ax, label="capital density")
        ax.set_xlabel("age")
        ax.set_ylabel("time")
        fig.savefig(out / "trajectory.png", dpi=120)
        plt.close(fig)
        made.append("trajectory.png")
    conv_csv = src / "convergence.csv"
    if conv_csv.exists():
        data = np.loadtxt(conv_csv, delimiter=",", skiprows=1, ndmin=2)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(data[1:, 0], np.abs(data[1:, 2]), "o-")
        ax.set_xlabel("horizon")
        ax.set_ylabel("value delta")
        fig.savefig(out / "convergence.png", dpi=120)
        plt.close(fig)
        made.append("convergence.png")
    hist_csv = src / "history.csv"
    if hist_csv.exists():
        data = np.loadtxt(hist_csv, delimiter=",", skiprows=1, ndmin=2)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(data[:, 0], data[:, 2], "-")
        ax.set_xlabel("iteration")
        ax.set_ylabel("prox-gradient norm")
        fig.savefig(out / "optimizer_history.png", dpi=120)
        plt.close(fig)
        made.append("optimizer_history.png")
    cl_csv = src / "closed_loop.csv"
    if cl_csv.exists():
        data = np.loadtxt(cl_csv, delimiter=",", skiprows=1, ndmin=2)
        fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
        axes[0].plot(data[:, 0], data[:, 1], label="boundary investment")
        axes[0].plot(data[:, 0], data[:, 2], label="output rate")
        axes[0].legend()
        axes[1].plot(data[:, 0], data[:, 3], label="cost rate")
        axes[1].set_xlabel("time")
        axes[1].legend()
        fig.savefig(out / "closed_loop.png", dpi=120)
        plt.close(fig)
        made.append("closed_loop.png")
    return made


def _cmd_report(args) -> int:
    src = Path(args.indir or args.out or ".")
    out = _outdir(args)
    figures = _render_figures(src, out)
    lines = ["artifact,kind"]
    for name in sorted(p.name for p in src.glob("*.csv")):
        lines.append(f"{name},csv")
    for name in sorted(p.name for p in src.glob("*.json")):
        lines.append(f"{name},json")
    for name in figures:
        lines.append(f"{name},figure")
    (out / "report_summary.csv").write_text("\n".join(lines) + "\n")
    summary = {"figures": figures, "source": str(src)}
    summary_file = src / "summary.json"
    if summary_file.exists():
        summary["audits"] = json.loads(summary_file.read_text()).get("audits")
    print(json.dumps(summary, indent=2))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vintagecap",
        description="Boundary control of age-structured capital accumulation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, horizon_default=None):
        p.add_argument("--model", required=True,
                       help="canonical instance name or JSON config path")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--x", default="ones",
                       help="initial state: ones, zero, bump, or CSV path")
        p.add_argument("--horizon", type=float, default=horizon_default)

    p_sim = sub.add_parser("simulate", help="forward solve")
    common(p_sim, horizon_default=2.0)
    p_sim.add_argument("--control", default="zero",
                       help="control CSV path or 'zero'")
    p_sim.set_defaults(func=_cmd_simulate)

    p_opt = sub.add_parser("optimize", help="finite-horizon optimal control")
    common(p_opt, horizon_default=2.0)
    p_opt.set_defaults(func=_cmd_optimize)

    p_val = sub.add_parser("value", help="infinite-horizon value probe")
    common(p_val)
    p_val.set_defaults(func=_cmd_value)

    p_fb = sub.add_parser("feedback", help="closed-loop simulation")
    common(p_fb)
    p_fb.set_defaults(func=_cmd_feedback)

    p_ver = sub.add_parser("verify", help="run the audit suite")
    common(p_ver)
    p_ver.set_defaults(func=_cmd_verify)

    p_rep = sub.add_parser("report", help="aggregate outputs and render figures")
    p_rep.add_argument("--in", dest="indir", default=None,
                       help="directory with previously produced outputs")
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=_cmd_report)
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except VintagecapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
