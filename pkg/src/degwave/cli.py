"""Command line entry point: ``degwave <kind> --config <path> [--out <dir>]``.

Each experiment writes a CSV table and a plain-text summary into the output
directory.  Independent sweep points may run in worker processes (count from
``DEGWAVE_WORKERS``); results are always written in configuration order, so
outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import control, dynamics, hardy
from .config import KINDS, ExperimentConfig, load_config
from .errors import ConfigurationError, DegwaveError, NotControllableError
from .families import TestFunctionFamily
from .grid import build_grid
from .operator import assemble, eigen

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BELOW_THRESHOLD = 3
EXIT_NUMERICAL = 4

WORKERS_ENV = "DEGWAVE_WORKERS"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10e}"
    return str(x)


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _map(fn: Callable, tasks: Sequence) -> list:
    n = min(_workers(), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# experiments; each task function is module level so it can be pickled


def _hardy_task(args):
    alpha, mu, N, count, seed = args
    grid = build_grid(N)
    fam = TestFunctionFamily(alpha, count=count, seed=seed)
    p = hardy.Parameters(alpha, mu)
    rows = []
    for label, u in fam.sample(grid):
        reports = [hardy.check_generalized_hardy(u, alpha), hardy.check_poincare(u, alpha),
                   hardy.check_x2_bound(u, alpha), hardy.check_theorem_1_1(u, alpha)]
        if not p.is_critical:
            s = hardy.norm_equivalence_check(u, p)
            reports += [s.lower, s.upper]
        for r in reports:
            rows.append({"alpha": alpha, "mu": mu, "function": label, "inequality": r.name,
                         "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack,
                         "constant": r.constant_name, "constant_value": r.constant_used,
                         "tol": r.tol, "satisfied": r.satisfied})
    return rows


def run_hardy(cfg: ExperimentConfig):
    tasks = [(a, m, cfg.N, cfg.count, cfg.seed) for a, m in zip(cfg.alphas, cfg.mus)]
    rows = [r for part in _map(_hardy_task, tasks) for r in part]
    lines, ok = [], True
    for a in cfg.alphas:
        for name in dict.fromkeys(r["inequality"] for r in rows if r["alpha"] == a):
            sel = [r for r in rows if r["alpha"] == a and r["inequality"] == name]
            bad = sum(not r["satisfied"] for r in sel)
            ok &= bad == 0
            lines.append(f"alpha={a:g} {name}: {len(sel)} functions, min slack "
                         f"{min(r['slack'] for r in sel):.3e}, violations {bad}, "
                         f"constant {sel[0]['constant']} = {sel[0]['constant_value']:.6g}")
    return rows, lines, EXIT_OK if ok else EXIT_NUMERICAL


def _identity_task(args):
    alpha, mu, N, mode, T, dt = args
    grid = build_grid(N)
    op = assemble(hardy.Parameters(alpha, mu), grid)
    dec = eigen(op, mode)
    u0, v0 = dynamics.mode_data(dec, mode - 1)
    traj = dynamics.simulate(op.to_grid(u0), op.to_grid(v0), T, grid.h if dt is None else dt, op)
    terms = dynamics.multiplier_identity_terms(traj)
    return {"alpha": alpha, "mu": mu, "N": N, "dt": traj.dt, "T": traj.T,
            "trace_l2": terms.trace_l2, "multiplier_rhs": terms.rhs,
            "multiplier_residual": terms.residual,
            "equipartition_residual": dynamics.lemega_identity_residual(traj)}


def run_identities(cfg: ExperimentConfig):
    Ns = [max(4, cfg.N // 2 ** (cfg.levels - 1 - i)) for i in range(cfg.levels)]
    tasks = [(a, m, n, cfg.mode, cfg.T[0], None if cfg.dt_auto else cfg.dt)
             for a, m in zip(cfg.alphas, cfg.mus) for n in Ns]
    rows = _map(_identity_task, tasks)
    lines = []
    for i, r in enumerate(rows):
        prev = rows[i - 1] if i and rows[i - 1]["alpha"] == r["alpha"] else None
        for key in ("multiplier", "equipartition"):
            res = r[f"{key}_residual"]
            r[f"{key}_ratio"] = (prev[f"{key}_residual"] / res) if prev and res > 0 else ""
        lines.append(f"alpha={r['alpha']:g} mu={r['mu']:.6g} N={r['N']}: multiplier residual "
                     f"{r['multiplier_residual']:.3e}, equipartition residual "
                     f"{r['equipartition_residual']:.3e}")
    return rows, lines, EXIT_OK


def _observability_task(args):
    alpha, mu, N, K, T_list, modes, data, seed, dt = args
    op = assemble(hardy.Parameters(alpha, mu), build_grid(N))
    dec = eigen(op, max(K, modes))
    out = []
    for T in T_list:
        q = control.observability_quotients(op, dec, T, K, modes, data, seed, dt)
        bound = hardy.observability_constant(alpha, T)
        direct = hardy.direct_constant(alpha, T)
        out.append({"alpha": alpha, "mu": mu, "T": T, "bound": bound,
                    "constant": "(2-alpha)T-4", "min_quotient": float(np.min(q)),
                    "max_quotient": float(np.max(q)), "direct_bound": direct,
                    "direct_constant": "2T+4" if alpha < 1 else "2T+4C'_alpha",
                    "samples": int(q.size),
                    "satisfied": bool(float(np.min(q)) >= 0.95 * bound
                                      and float(np.max(q)) <= direct)})
    return out


def run_observability(cfg: ExperimentConfig):
    tasks = [(a, m, cfg.N, cfg.K, cfg.T, cfg.modes, cfg.data, cfg.seed,
              None if cfg.dt_auto else cfg.dt) for a, m in zip(cfg.alphas, cfg.mus)]
    rows = [r for part in _map(_observability_task, tasks) for r in part]
    lines = [f"alpha={r['alpha']:g} T={r['T']:g}: min quotient {r['min_quotient']:.4f} vs "
             f"(2-alpha)T-4 = {r['bound']:.4f}; max quotient {r['max_quotient']:.4f} vs "
             f"{r['direct_constant']} = {r['direct_bound']:.4f}" for r in rows]
    ok = all(r["satisfied"] for r in rows)
    return rows, lines, EXIT_OK if ok else EXIT_NUMERICAL


def run_hum(cfg: ExperimentConfig, out: Path):
    rows, lines, codes = [], [], []
    for a, m in zip(cfg.alphas, cfg.mus):
        op = assemble(hardy.Parameters(a, m), build_grid(cfg.N))
        y0 = op.grid.sample(lambda x: np.sin(cfg.mode * np.pi * x))
        y1 = op.grid.zeros()
        for T in cfg.T:
            below = T <= hardy.observability_time(a)
            base = {"alpha": a, "mu": m, "T": T, "N": cfg.N, "K": cfg.K}
            try:
                res = control.hum_solve(y0, y1, T, cfg.K, op, cg_tol=cfg.cg_tol,
                                        dt=cfg.dt, max_iter=cfg.max_iter)
            except NotControllableError as exc:
                rows.append({**base, "cg_iterations": exc.iterations, "cg_residual": exc.residual,
                             "final_state_energy_ratio": "", "gramian_min_eig_estimate": "",
                             "control_l2": "", "filtered_final_ratio": "", "below_threshold": below,
                             "status": "cg_failed"})
                lines.append(f"alpha={a:g} T={T:g}: {exc}")
                codes.append(EXIT_BELOW_THRESHOLD if below else EXIT_NUMERICAL)
                continue
            res.control.to_csv(out / f"control_alpha{a:g}_T{T:g}.csv")
            ok = res.final_state_energy_ratio <= cfg.target
            status = "below_threshold" if below else ("ok" if ok else "target_missed")
            rows.append({**base, "cg_iterations": res.cg_iterations,
                         "cg_residual": res.cg_residual,
                         "final_state_energy_ratio": res.final_state_energy_ratio,
                         "gramian_min_eig_estimate": res.gramian_min_eig_estimate,
                         "control_l2": res.control.l2_norm(),
                         "filtered_final_ratio": res.filtered_final_ratio, "below_threshold": below,
                         "status": status})
            lines.append(f"alpha={a:g} mu={m:.6g} T={T:g}: final_state_energy_ratio "
                         f"{res.final_state_energy_ratio:.3e} after {res.cg_iterations} CG "
                         f"iterations, Gramian min eigenvalue estimate "
                         f"{res.gramian_min_eig_estimate:.4f} (bound ((2-alpha)T-4)/2 = "
                         f"{hardy.observability_constant(a, T) / 2:.4f}) [{status}]")
            codes.append(EXIT_BELOW_THRESHOLD if below else (EXIT_OK if ok else EXIT_NUMERICAL))
    return rows, lines, max(codes) if codes else EXIT_OK


def run_eigen(cfg: ExperimentConfig):
    rows, lines = [], []
    for a, m in zip(cfg.alphas, cfg.mus):
        op = assemble(hardy.Parameters(a, m), build_grid(cfg.N))
        dec = eigen(op, cfg.modes)
        for k, lam in enumerate(dec.eigenvalues, start=1):
            ref = (k * np.pi) ** 2 if a == 0 and m == 0 else ""
            rows.append({"alpha": a, "mu": m, "k": k, "eigenvalue": lam, "reference": ref})
        lines.append(f"alpha={a:g} mu={m:.6g}: lambda_1 = {dec.eigenvalues[0]:.8f}")
    return rows, lines, EXIT_OK


# ---------------------------------------------------------------------------


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def run(cfg: ExperimentConfig, out_dir=None) -> int:
    """Execute ``cfg`` and write ``<kind>.csv`` and ``summary.txt`` into ``out_dir``."""
    out = Path(out_dir or cfg.out or "degwave_out")
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "hum":
        rows, lines, code = run_hum(cfg, out)
    else:
        runner = {"hardy": run_hardy, "identities": run_identities,
                  "observability": run_observability, "eigen": run_eigen}[cfg.kind]
        rows, lines, code = runner(cfg)
    _write_csv(out / f"{cfg.kind}.csv", rows)
    header = [f"kind={cfg.kind} N={cfg.N} K={cfg.K} seed={cfg.seed} mu={cfg.mu_spec}",
              "alpha=" + ",".join(f"{a:g}" for a in cfg.alphas),
              "T=" + ",".join(f"{t:g}" for t in cfg.T), f"exit_code={code}", ""]
    (out / "summary.txt").write_text("\n".join(header + lines) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="degwave", description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True, help="key=value or JSON configuration file")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.kind)
    except ConfigurationError as exc:
        print(f"degwave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = run(cfg, args.out)
    except ConfigurationError as exc:
        print(f"degwave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegwaveError as exc:
        print(f"degwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = Path(args.out or cfg.out or "degwave_out") / "summary.txt"
    print(summary.read_text(), end="")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
