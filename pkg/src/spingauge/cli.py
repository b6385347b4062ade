"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as sio
from .config import RunConfig
from .errors import (
    ConfigError,
    IncompatibleSymmetry,
    InvalidParams,
    NumericalFailure,
    SpinGaugeError,
    WrongSignature,
)
from .gauge import (
    build_gauge,
    compatibility_residual,
    coulomb_residual,
    frame_residuals,
    initial_data,
)
from .dsii import cross_validate, solve_dsii, to_phi
from .metrics import stability_sweep, write_sweep_csv
from .modified_system import (
    PsiState,
    SolverConfig,
    Trajectory,
    connection_from_psi,
    curl_residual,
    mass_identity_residual,
    masses,
    solve,
)
from .reconstruction import linf_difference, run_gauge_route, solve_direct
from .spectral import THREADS_ENV, Grid, SpectralWorkspace

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("simulate", "gauge-check", "dsii-compare", "oracle-compare", "stability-sweep")


def demo_names():
    return sorted(p.name[:-4] for p in resources.files("spingauge.demos").iterdir() if p.name.endswith(".cfg"))


def load_config(source: str, overrides: dict) -> RunConfig:
    if source.startswith("demo:"):
        name = source[5:]
        path = resources.files("spingauge.demos") / f"{name}.cfg"
        if not path.is_file():
            raise ConfigError(f"unknown demo {name!r}; available: {', '.join(demo_names())}")
        return RunConfig.from_text(path.read_text(encoding="utf-8"), overrides)
    return RunConfig.load(source, overrides)


# setup helpers -------------------------------------------------------------

def _grid(cfg):
    return Grid.square(cfg["grid.n"], cfg["grid.L"])


def _spin(cfg, grid, amplitude=None, twist=None):
    mu = cfg["signature.mu"]
    if cfg["data.kind"] == "constant":
        return initial_data("constant", grid, mu)
    amp = cfg["data.amplitude"] if amplitude is None else amplitude
    tw = complex(cfg["data.twist_re"], cfg["data.twist_im"]) if twist is None else twist
    params = dict(amplitude=amp, width=cfg["data.width"], twist=tw)
    if cfg["data.jitter"] > 0:
        rng = np.random.default_rng(cfg["seed"])
        j = cfg["data.jitter"] * rng.uniform(-1, 1, size=2)
        params["center"] = (grid.L1 / 2 + j[0], grid.L2 / 2 + j[1])
    return initial_data("bump", grid, mu, **params)


def _solver(cfg):
    return SolverConfig(cfg["solver.dt"], cfg["solver.T"], cfg["solver.dealias"],
                        cfg["solver.blowup_threshold"], cfg["solver.snapshot_stride"])


def _report_dict(report):
    return {
        "terminated": report.terminated,
        "reason": report.reason,
        "t_stop": report.t_stop,
        "steps": report.steps,
        "accumulator": report.accumulator,
        "stability_bound": report.stability_bound,
    }


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")


# commands ------------------------------------------------------------------

def cmd_simulate(cfg, out, ws):
    f = _spin(cfg, ws.grid)
    eps = cfg["signature.epsilon"]
    gd = build_gauge(ws, f, eps, substeps=cfg["gauge.substeps"])
    sc = _solver(cfg)
    diags = set(cfg["outputs.diagnostics"])
    if "reconstruction" in diags:
        run = run_gauge_route(ws, gd, sc, residuals=True)
        states, times, l4, report = run.states, run.times, run.l4, run.report
        spins = run.spins
    else:
        traj = solve(ws, PsiState.from_pair(gd.psi), sc)
        states, times, l4, report = traj.states, traj.times, traj.l4, traj.report
        spins = None
    sig = (f.mu, eps)
    if cfg["outputs.snapshots"]:
        snap = sio.ensure_dir(out / "snapshots")
        for k, st in enumerate(states):
            sio.write_snapshot(snap / f"psi_{k:06d}.snap", ws.grid, {"psi1": st.psi[0], "psi2": st.psi[1]}, st.t, sig)
            if spins is not None:
                g = spins[k]
                sio.write_snapshot(snap / f"spin_{k:06d}.snap", ws.grid, {"s0": g.s[0], "s1": g.s[1], "s2": g.s[2]}, st.t, sig)
    if "mass" in diags:
        rows = [(t, *masses(ws, st.psi)) for t, st in zip(times, states)]
        sio.write_csv(out / "mass.csv", ["t", "mass_1", "mass_2"], rows)
    if "accumulator" in diags:
        sio.write_csv(out / "accumulator.csv", ["t", "l4_accumulator"], zip(times, l4))
    if "residuals" in diags:
        rows = []
        for t, st in zip(times, states):
            conn = connection_from_psi(ws, st, dealias=False)
            rows.append((t, compatibility_residual(ws, st, conn.a1, conn.a2),
                         curl_residual(ws, st, conn), float(np.mean(conn.q12))))
        sio.write_csv(out / "residuals.csv", ["t", "compatibility", "curl", "mean_q12"], rows)
    if "mass_identity" in diags and len(states) >= 3:
        tr = Trajectory(states, np.asarray(times), np.asarray(l4), np.zeros(len(states)), report)
        tt, res = mass_identity_residual(ws, tr, sc.dealias)
        sio.write_csv(out / "mass_identity.csv", ["t", "residual_1", "residual_2"], [(t, *r) for t, r in zip(tt, res)])
    if spins is not None:
        rows = [(t, r["ds"], r["density"], r["constraints"]) for t, r in zip(times, run.residuals)]
        sio.write_csv(out / "reconstruction.csv", ["t", "ds", "density", "constraints"], rows)
    _write_json(out / "report.json", _report_dict(report))


def cmd_gauge_check(cfg, out, ws):
    f = _spin(cfg, ws.grid)
    gd = build_gauge(ws, f, cfg["signature.epsilon"], substeps=cfg["gauge.substeps"])
    div = ws.ifft(ws.d1 * ws.fft(gd.a1) + ws.d2 * ws.fft(gd.a2)).real
    c1, c2 = coulomb_residual(f, gd.frame, gd.a1, gd.a2)
    rep = {
        "frame": frame_residuals(f, gd.frame),
        "compatibility": compatibility_residual(ws, gd.psi, gd.a1, gd.a2),
        "coulomb_divergence": float(np.max(np.abs(div))),
        "connection_residual": [c1, c2],
        "holonomy": list(gd.frame.info["holonomy"]),
        "mean_q12": float(np.mean(gd.q12)),
    }
    _write_json(out / "gauge_report.json", rep)


def cmd_dsii_compare(cfg, out, ws):
    if cfg["signature.epsilon"] != -1:
        raise WrongSignature("dsii-compare needs signature.epsilon = -1")
    f = _spin(cfg, ws.grid)
    gd = build_gauge(ws, f, -1, substeps=cfg["gauge.substeps"])
    sc = _solver(cfg)
    st = PsiState.from_pair(gd.psi)
    tr = solve(ws, st, sc)
    cv = cross_validate(ws, tr, solve_dsii(ws, to_phi(st, 1), sc), solve_dsii(ws, to_phi(st, -1), sc))
    rows = zip(cv.times, cv.plus, cv.minus, cv.raw_plus, cv.raw_minus, tr.phase)
    sio.write_csv(out / "dsii.csv", ["t", "plus", "minus", "raw_plus", "raw_minus", "zero_mode_phase"], rows)


def cmd_oracle_compare(cfg, out, ws):
    f = _spin(cfg, ws.grid)
    eps = cfg["signature.epsilon"]
    gd = build_gauge(ws, f, eps, substeps=cfg["gauge.substeps"])
    sc = _solver(cfg)
    run = run_gauge_route(ws, gd, sc)
    every = sc.snapshot_stride * sc.dt / cfg["oracle.dt"]
    stride = int(round(every)) if abs(every - round(every)) < 1e-9 else None
    tt, snaps = solve_direct(ws, f, eps, cfg["oracle.dt"], sc.T, stride=stride)
    direct = {round(t, 12): s for t, s in zip(tt, snaps)}
    rows = []
    for t, g in zip(run.times, run.spins):
        key = round(t, 12)
        if key in direct:
            rows.append((t, linf_difference(g.s, direct[key])))
    sio.write_csv(out / "oracle.csv", ["t", "linf"], rows)


def cmd_stability_sweep(cfg, out, ws):
    grid = ws.grid
    eps = cfg["signature.epsilon"]
    rng = np.random.default_rng(cfg["seed"])
    phase = np.exp(2j * np.pi * rng.uniform())
    if cfg["sweep.base"] == "constant":
        base = initial_data("constant", grid, cfg["signature.mu"])

        def perturb(d):
            return _spin(cfg, grid, amplitude=d, twist=phase * complex(cfg["data.twist_re"], cfg["data.twist_im"]))
    else:
        base = _spin(cfg, grid)
        a = cfg["data.amplitude"]

        def perturb(d):
            return _spin(cfg, grid, amplitude=a * (1 + d))
    rows = stability_sweep(base, perturb, cfg["sweep.deltas"], eps, _solver(cfg),
                           substeps=cfg["gauge.substeps"], threads=ws.workers)
    write_sweep_csv(rows, out / "sweep.csv")


HANDLERS = {
    "simulate": cmd_simulate,
    "gauge-check": cmd_gauge_check,
    "dsii-compare": cmd_dsii_compare,
    "oracle-compare": cmd_oracle_compare,
    "stability-sweep": cmd_stability_sweep,
}


def build_parser():
    p = argparse.ArgumentParser(prog="spingauge", description="Coulomb-gauge pseudospectral toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="config file, or demo:NAME for a packaged demo")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=None, help=f"FFT threads (default ${THREADS_ENV} or 1)")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"command": args.command}
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, InvalidParams) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        out = sio.ensure_dir(args.out)
        (out / "config.cfg").write_text(cfg.to_text(), encoding="utf-8")
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    status, code = "ok", EXIT_OK
    try:
        ws = SpectralWorkspace(_grid(cfg), args.threads)
        HANDLERS[args.command](cfg, out, ws)
    except (ConfigError, InvalidParams, WrongSignature, IncompatibleSymmetry) as exc:
        status, code = f"config error: {exc}", EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        status, code = f"numerical failure: {type(exc).__name__}: {exc}", EXIT_NUMERIC
    except SpinGaugeError as exc:
        status, code = f"error: {type(exc).__name__}: {exc}", EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if code:
        print(status, file=sys.stderr)
    try:
        sio.write_manifest(out, cfg.sha256(), {"command": args.command, "status": status, "exit_code": code})
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
