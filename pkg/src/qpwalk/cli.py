"""Command-line entry point: ``qpwalk <command> [flags]``.

Every command writes its outputs plus a ``manifest.json`` into --out.
Exit codes: 2 bad parameters, 3 numeric guard (singular sampling), 4 failed invariant.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .cocycle import CocycleMapSpec, SingularSamplingError
from .model import GOLDEN, ParameterError, WalkParameters
from .output import matrix_to_json, read_config, spectrum_rows, write_csv, write_json

EXIT_VALIDATION, EXIT_NUMERIC, EXIT_INVARIANT = 2, 3, 4

DEFAULTS = {
    "lambda1": 0.5, "lambda2": 0.5, "t": 0.5, "phi": "golden", "theta": 0.0, "z_arg": None,
    "steps": 200000, "phases": 8, "eps": 0.0, "window": 512, "grid": 21, "seed": 0,
    "jobs": 1, "out": "out", "quick": False, "T": 4096,
}
INT_KEYS = {"steps", "phases", "window", "grid", "seed", "jobs", "T"}
FLOAT_KEYS = {"lambda1", "lambda2", "t", "theta", "eps", "z_arg"}


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def parse_phi(v) -> float:
    if isinstance(v, str) and v.strip().lower() == "golden":
        return GOLDEN
    return float(v)


def _coerce(key, v):
    if v is None or (isinstance(v, str) and v.lower() == "none"):
        return None
    if key in INT_KEYS:
        return int(v)
    if key in FLOAT_KEYS:
        return float(v)
    if key == "quick":
        return v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
    return v


def resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            cfg[k] = v
    out = {k: _coerce(k, v) for k, v in cfg.items() if k in DEFAULTS}
    out["phi"] = parse_phi(cfg["phi"])
    return out


def params_of(cfg) -> WalkParameters:
    return WalkParameters(lambda1=cfg["lambda1"], lambda2=cfg["lambda2"], t=cfg["t"],
                          phi=cfg["phi"], theta=cfg["theta"])


def _z_of(cfg, p):
    if cfg["z_arg"] is not None:
        return complex(math.cos(cfg["z_arg"]), math.sin(cfg["z_arg"]))
    from .spectrum import spectral_samples
    zs = spectral_samples(p, 3, min(cfg["window"], 512))
    return complex(zs[len(zs) // 2])


def write_manifest(out: Path, command: str, cfg: dict, files: list, wall: float):
    write_json(out / "manifest.json", {
        "command": command, "parameters": cfg, "seed": cfg["seed"], "tool_version": _tool_version(),
        "outputs": sorted(str(f) for f in files), "wall_time_s": round(wall, 3),
    })


# -- commands ----------------------------------------------------------------------

def cmd_evolve(cfg, out: Path):
    from .dynamics import transport
    rec = transport(params_of(cfg), cfg["T"])
    files = [write_csv(out / "transport.csv", ["T", "M2", "return_prob"], rec.rows()),
             write_json(out / "transport.json", {
                 "fitted_exponent": rec.fitted_exponent, "fit_residual": rec.fit_residual,
                 "norm_drift": rec.norm_drift, "outside_cone_mass": rec.outside_cone_mass})]
    return files, 0


def cmd_lyapunov(cfg, out: Path):
    from .lyapunov import DomainError, closed_form_le, estimate_le
    p = params_of(cfg)
    z = _z_of(cfg, p)
    est = estimate_le(CocycleMapSpec(p, z), cfg["eps"], cfg["steps"], cfg["phases"], cfg["seed"])
    try:
        closed = closed_form_le(p)
    except DomainError:
        closed = None
    files = [write_json(out / "lyapunov.json", {
        "z": z, "eps": est.eps, "LE": est.value, "LE_err": est.std_error, "n_steps": est.n_steps,
        "n_phases": est.n_phases, "per_phase": est.per_phase, "quarantine_hits": est.quarantine_hits,
        "closed_form_LE": closed})]
    return files, 0


def cmd_accel(cfg, out: Path):
    from .lyapunov import acceleration_at
    p = params_of(cfg)
    z = _z_of(cfg, p)
    acc = acceleration_at(CocycleMapSpec(p, z), cfg["eps"], n_steps=cfg["steps"],
                          n_phases=cfg["phases"], seed=cfg["seed"])
    files = [write_json(out / "acceleration.json", {
        "z": z, "eta": cfg["eps"], "omega": acc.omega, "eps_center": acc.eps_center,
        "eps_step": acc.eps_step, "quantization_residual": acc.quantization_residual,
        "LE_low": acc.le_low, "LE_high": acc.le_high})]
    return files, 0


def cmd_spectrum(cfg, out: Path):
    from .spectrum import truncation_spectrum
    w = truncation_spectrum(params_of(cfg), cfg["window"])
    return [write_csv(out / "spectrum.csv", ["re", "im", "arg"], spectrum_rows(w))], 0


def cmd_green(cfg, out: Path):
    from .spectrum import centered_window, green_function
    p = params_of(cfg)
    z = _z_of(cfg, p) if cfg["z_arg"] is not None else complex(math.cos(0.5), math.sin(0.5))
    win = centered_window(min(cfg["window"], 256))
    G = green_function(p, win, z=z)
    return [write_json(out / "green.json", {"window": list(win), "z": z, "G": matrix_to_json(G.G)})], 0


def cmd_duality(cfg, out: Path):
    from .duality import duality_residual
    rep = duality_residual(params_of(cfg), max(cfg["window"], 512))
    files = [write_json(out / "duality.json", {
        "median": rep.median, "max": rep.max, "residuals": rep.residuals, "xi": rep.xis,
        "eigenvalues": rep.eigenvalues, "source_residuals": rep.source_residuals, "flags": rep.flags})]
    return files, 0


def _grid_values(n: int) -> np.ndarray:
    return np.round(np.linspace(0.05, 0.95, n), 12)


def _phase_cell(job):
    from .lyapunov import Budget, classify_regime, predicted_regime
    l1, l2, t, phi, theta, budget = job
    p = WalkParameters(lambda1=l1, lambda2=l2, t=t, phi=phi, theta=theta)
    rep = classify_regime(p, budget=budget)
    chosen = [r for r in rep.per_z if r["regime"] == rep.regime] or rep.per_z
    z_arg = float(np.median([r["z_arg"] for r in chosen]))
    return (l1, l2, t, z_arg, rep.numeric_LE, rep.LE_err, rep.acceleration, rep.regime,
            rep.predicted_spectral_type or "", predicted_regime(p), rep.inconclusive)


def phase_diagram(t: float, grid: int = 21, quick: bool = False, jobs: int = 1, seed: int = 0,
                  phi: float = GOLDEN, theta: float = 0.0, steps: int | None = None):
    """Regime classification on a grid x grid lattice of (lambda1, lambda2) at fixed t."""
    from .lyapunov import Budget
    n_steps = steps if steps is not None else (20000 if quick else 200000)
    # quick mode also halves the number of spectral samples
    budget = Budget(n_steps=n_steps, n_z=8, seed=seed) if quick else Budget(n_steps=n_steps, seed=seed)
    vals = _grid_values(grid)
    jobs_list = [(float(a), float(b), t, phi, theta, budget) for a in vals for b in vals]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_phase_cell, jobs_list, chunksize=4))
    else:
        rows = [_phase_cell(j) for j in jobs_list]
    return rows


def distance_to_boundary(l1: float, l2: float, thr: float) -> float:
    """Distance to the union of the diagonal and the threshold corner lines."""
    d_diag = abs(l1 - l2) / math.sqrt(2)
    # corner boundary: {l1 = thr, l2 >= thr} and {l2 = thr, l1 >= thr}
    d1 = math.hypot(l1 - thr, max(thr - l2, 0.0))
    d2 = math.hypot(l2 - thr, max(thr - l1, 0.0))
    return min(d_diag, d1, d2)


def cmd_phase_diagram(cfg, out: Path):
    rows = phase_diagram(cfg["t"], cfg["grid"], cfg["quick"], cfg["jobs"], cfg["seed"], cfg["phi"],
                         cfg["theta"], None if cfg["quick"] else cfg["steps"])
    header = ["lambda1", "lambda2", "t", "z_arg", "LE", "LE_err", "omega", "regime", "predicted_type"]
    thr = abs(1 - cfg["t"] ** 2) / (1 + cfg["t"] ** 2)
    cells, match, total = [], 0, 0
    for r in rows:
        off = distance_to_boundary(r[0], r[1], thr) >= 0.05
        ok = r[7] == r[9]
        if off:
            total += 1
            match += ok
        cells.append({"lambda1": r[0], "lambda2": r[1], "regime": r[7], "predicted_regime": r[9],
                      "off_boundary": off, "inconclusive": r[10]})
    files = [write_csv(out / "phase_diagram.csv", header, [r[:9] for r in rows]),
             write_json(out / "phase_diagram.json", {
                 "t": cfg["t"], "threshold": thr, "grid": cfg["grid"], "cells": cells,
                 "off_boundary_cells": total, "off_boundary_match_fraction": match / max(total, 1)})]
    return files, 0


def cmd_verify(cfg, out: Path):
    from .verify import run_suite
    results = run_suite(quick=cfg["quick"])
    for r in results:
        print(r.line())
    files = [write_csv(out / "verify.csv", ["check", "observed", "tolerance", "passed"],
                       [(r.name, r.observed, r.tolerance, int(r.passed)) for r in results])]
    return files, (0 if all(r.passed for r in results) else EXIT_INVARIANT)


COMMANDS = {
    "evolve": cmd_evolve, "lyapunov": cmd_lyapunov, "accel": cmd_accel, "spectrum": cmd_spectrum,
    "green": cmd_green, "duality": cmd_duality, "phase-diagram": cmd_phase_diagram, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpwalk", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key=value file; flags override it")
    ap.add_argument("--lambda1", type=float)
    ap.add_argument("--lambda2", type=float)
    ap.add_argument("--t", type=float)
    ap.add_argument("--phi", help="rotation number or 'golden'")
    ap.add_argument("--theta", type=float)
    ap.add_argument("--z-arg", dest="z_arg", type=float, help="spectral parameter z = exp(i z_arg)")
    ap.add_argument("--steps", type=int)
    ap.add_argument("--phases", type=int)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--window", type=int)
    ap.add_argument("--grid", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--T", dest="T", type=int, help="evolution time for 'evolve'")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--out")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        params_of(cfg)
        out = Path(cfg["out"])
        files, code = COMMANDS[args.command](cfg, out)
    except (ParameterError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularSamplingError, ArithmeticError) as e:
        print(f"numeric guard: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(out, args.command, cfg, files, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
