"""Batch front-end: config-driven experiments with machine-readable output.

Configs are flat INI-style key-value text with sections; unknown sections
or keys are rejected.  Every run writes a manifest (config text and hash,
effective seed, package and dependency versions, tolerances) sufficient to
reproduce it; identical config and seed produce byte-identical artifacts.

Exit codes: 0 success, 1 config/validation failure, 2 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evolve import NumericsError, evolve
from .grid import Grid, GridFunction
from .mhd import IdealGasEos, PhysState
from .stability import StabilityError, check_stability, wang_yu_compare

EXPERIMENTS = ("stability-map", "symmetrize", "evolve", "energy-report",
               "compat", "nash-moser-demo")


class ConfigError(ValueError):
    pass


def _f(x):
    return float(x)


def _i(x):
    return int(x)


def _b(x):
    if x.lower() in ("true", "yes", "1"):
        return True
    if x.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {x!r}")


_GRID = {"n1": _i, "n2": _i, "L1": _f, "L2": _f}
_EOS = {"gamma": _f}
_PAIR = {"p_plus": _f, "u2_jump": _f, "H2_plus": _f, "H2_minus": _f,
         "S_plus": _f, "S_minus": _f}

SCHEMAS = {
    "stability-map": {
        "map": {"p_plus": _f, "S": _f, "u2_jump_max": _f, "u2_jump_n": _i,
                "H2_max": _f, "H2_n": _i, "k_margin": _f},
        "eos": _EOS,
    },
    "symmetrize": {
        "state": _PAIR,
        "eos": _EOS,
        "symmetrize": {"k_margin": _f, "collar_eps": _f, "n_collar": _i},
    },
    "evolve": {
        "grid": _GRID,
        "eos": _EOS,
        "state": _PAIR,
        "evolve": {"t_final": _f, "cfl": _f, "forcing_amplitude": _f,
                   "forcing_k2": _i, "forcing_ramp": _f,
                   "boundary_amplitude": _f, "boundary_k2": _i,
                   "write_checkpoint": _b, "checkpoint_count": _i,
                   "ledger": _b},
    },
    "energy-report": {
        "energy-report": {"run_dir": str},
    },
    "compat": {
        "grid": _GRID,
        "eos": _EOS,
        "state": _PAIR,
        "compat": {"amplitude": _f, "k2": _i, "order": _i, "T": _f,
                   "delta": _f, "fit_t_min": _f, "fit_t_max": _f,
                   "fit_points": _i},
    },
    "nash-moser-demo": {
        "grid": _GRID,
        "eos": _EOS,
        "state": _PAIR,
        "nash-moser": {"amplitude": _f, "k2": _i, "T": _f, "nt": _i,
                       "theta0": _f, "iterations": _i, "delta": _f},
    },
}

DEFAULTS = {
    "grid": {"n1": 48, "n2": 48, "L1": 2 * np.pi, "L2": 2 * np.pi},
    "eos": {"gamma": 5.0 / 3.0},
    "state": {"p_plus": 0.8, "u2_jump": 0.1, "H2_plus": 0.7,
              "H2_minus": 0.6, "S_plus": 0.0, "S_minus": 0.0},
}


def parse_config(text: str):
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys are case-sensitive
    cp.read_string(text)
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = dict(cp["run"])
    exp = run.pop("experiment", None)
    seed = int(run.pop("seed", "0"))
    if run:
        raise ConfigError(f"unknown keys in [run]: {sorted(run)}")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; "
                          f"choose from {EXPERIMENTS}")
    schema = SCHEMAS[exp]
    cfg = {}
    for section in cp.sections():
        if section == "run":
            continue
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for {exp}")
        cfg[section] = {}
        for key, raw in cp[section].items():
            if key not in schema[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            cfg[section][key] = schema[section][key](raw)
    return exp, seed, cfg


def _section(cfg, name):
    out = dict(DEFAULTS.get(name, {}))
    out.update(cfg.get(name, {}))
    return out


def _write_manifest(out: Path, experiment: str, seed: int, text: str,
                    extra: dict | None = None) -> None:
    manifest = {
        "experiment": experiment,
        "seed": seed,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "config_text": text,
        "package_version": __version__,
        "numpy_version": np.__version__,
    }
    manifest.update(extra or {})
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _pair_states(state_cfg, eos):
    p_plus = state_cfg["p_plus"]
    p_minus = p_plus + 0.5 * (state_cfg["H2_plus"] ** 2
                              - state_cfg["H2_minus"] ** 2)
    if p_minus <= 0:
        raise ConfigError("total-pressure balance forces p_minus <= 0")
    plus = PhysState(p=p_plus, u1=0.0, u2=+0.5 * state_cfg["u2_jump"],
                     H1=0.0, H2=state_cfg["H2_plus"],
                     S=state_cfg["S_plus"], side=+1)
    minus = PhysState(p=p_minus, u1=0.0, u2=-0.5 * state_cfg["u2_jump"],
                      H1=0.0, H2=state_cfg["H2_minus"],
                      S=state_cfg["S_minus"], side=-1)
    return plus, minus


# -- experiments --------------------------------------------------------------


def run_stability_map(cfg, seed, out: Path, verbosity: int) -> dict:
    eos = IdealGasEos(**_section(cfg, "eos"))
    m = {"p_plus": 1.0, "S": 0.0, "u2_jump_max": 3.0, "u2_jump_n": 61,
         "H2_max": 2.0, "H2_n": 61, "k_margin": 1e-3}
    m.update(cfg.get("map", {}))
    jumps = np.linspace(0.0, m["u2_jump_max"], m["u2_jump_n"])
    fields = np.linspace(0.0, m["H2_max"], m["H2_n"])
    rows = []
    from .mhd import alfven_speed, sound_speed
    for ju in jumps:
        for H2 in fields:
            plus = PhysState(p=m["p_plus"], u1=0, u2=+ju / 2, H1=0.0, H2=H2,
                             S=m["S"])
            minus = PhysState(p=m["p_plus"], u1=0, u2=-ju / 2, H1=0.0,
                              H2=H2, S=m["S"])
            rep = check_stability(plus, minus, eos, k=m["k_margin"])
            c = float(sound_speed(plus, eos))
            cA = float(alfven_speed(plus, eos))
            if 0.0 < cA < c:
                ours, sub, sup = wang_yu_compare(c, cA)
            else:
                ours = sub = sup = float("nan")
            rows.append((ju, H2, rep.margin_min, ours, sub, sup))
    _csv(out / "stability_map.csv",
         "param1,param2,margin,ours,wy_subsonic,wy_supersonic", rows)
    return {"rows": len(rows)}


def run_symmetrize(cfg, seed, out: Path, verbosity: int) -> dict:
    from .stability import (build_lambda, check_b0_positive,
                            extend_lambda)
    eos = IdealGasEos(**_section(cfg, "eos"))
    sc = {"k_margin": 1e-3, "collar_eps": 0.25, "n_collar": 33}
    sc.update(cfg.get("symmetrize", {}))
    plus, minus = _pair_states(_section(cfg, "state"), eos)
    lam = build_lambda(plus, minus, eos, k=sc["k_margin"])
    rep = check_stability(plus, minus, eos, k=sc["k_margin"])
    certs = [check_b0_positive(st, lv, eos)
             for st, lv in ((plus, lam.lam_plus), (minus, lam.lam_minus))]
    x1 = np.linspace(0.0, 4 * sc["collar_eps"], sc["n_collar"])
    field = extend_lambda(lam, x1, eps=sc["collar_eps"],
                          states=(plus, minus), eos=eos)
    coeff = ((np.asarray(plus.u2) - lam.lam_plus * np.asarray(plus.H2))
             - (np.asarray(minus.u2) - lam.lam_minus * np.asarray(minus.H2)))
    payload = {
        "lambda_plus": float(lam.lam_plus),
        "lambda_minus": float(lam.lam_minus),
        "stability_margin": rep.margin_min,
        "b0_min_eig_plus": certs[0].min_eig,
        "b0_min_eig_minus": certs[1].min_eig,
        "b0_positive": bool(certs[0].positive and certs[1].positive),
        "leading_coefficient": float(coeff),
        "collar_eps": sc["collar_eps"],
        "collar_max_abs_lambda": float(np.max(np.abs(field))),
    }
    (out / "symmetrizer.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return payload


def _scenario(cfg, eos):
    from .linearized import trivial_sheet_state
    st = _section(cfg, "state")
    g = _section(cfg, "grid")
    grid = Grid(n1=g["n1"], n2=g["n2"], L1=g["L1"], L2=g["L2"])
    basic = trivial_sheet_state(
        grid, eos, p_plus=st["p_plus"], u2_jump=st["u2_jump"],
        H2_plus=st["H2_plus"], H2_minus=st["H2_minus"],
        S_plus=st["S_plus"], S_minus=st["S_minus"])
    return grid, basic


def run_evolve(cfg, seed, out: Path, verbosity: int) -> dict:
    from .scenarios import ManufacturedBoundaryData, ManufacturedForcing
    eos = IdealGasEos(**_section(cfg, "eos"))
    grid, basic = _scenario(cfg, eos)
    ev = {"t_final": 0.4, "cfl": 0.4, "forcing_amplitude": 1.0,
          "forcing_k2": 2, "forcing_ramp": 0.2, "boundary_amplitude": 0.0,
          "boundary_k2": 2, "write_checkpoint": False,
          "checkpoint_count": 3, "ledger": True}
    ev.update(cfg.get("evolve", {}))
    forcing = None
    if ev["forcing_amplitude"] != 0.0:
        forcing = ManufacturedForcing(grid, amplitude=ev["forcing_amplitude"],
                                      k2=ev["forcing_k2"],
                                      ramp=ev["forcing_ramp"])
    bdata = None
    if ev["boundary_amplitude"] != 0.0:
        bdata = ManufacturedBoundaryData(grid,
                                         amplitude=ev["boundary_amplitude"],
                                         k2=ev["boundary_k2"])
    snap_times = None
    if ev["write_checkpoint"]:
        snap_times = list(np.linspace(0.0, ev["t_final"],
                                      ev["checkpoint_count"]))
    traj = evolve(basic, t_final=ev["t_final"], forcing=forcing, bdata=bdata,
                  cfl=ev["cfl"], ledger=ev["ledger"],
                  snapshot_times=snap_times)
    if ev["ledger"]:
        traj.ledger.to_csv(out / "energy_ledger.csv")
    _csv(out / "boundary_energy.csv", "t,boundary_energy,div_residual,"
         "hn_residual",
         zip(traj.times, traj.boundary_energy, traj.div_residual,
             traj.hn_residual))
    if ev["write_checkpoint"] and traj.snapshots is not None:
        for k, (ts, snap) in enumerate(zip(traj.snapshot_times,
                                           traj.snapshots)):
            for s, tag in ((0, "plus"), (1, "minus")):
                for comp in range(6):
                    gf = GridFunction(snap[s, comp], grid)
                    gf.save(out / f"checkpoint_{k:03d}_{tag}_c{comp}.cvsg")
        (out / "checkpoints.json").write_text(json.dumps({
            "times": [float(t) for t in traj.snapshot_times],
            "count": len(traj.snapshot_times),
            "state": _section(cfg, "state"),
            "grid": _section(cfg, "grid"),
            "eos": _section(cfg, "eos"),
        }, sort_keys=True, indent=1) + "\n")
    return {"steps": len(traj.times) - 1,
            "final_I": traj.ledger.rows[-1].I if ev["ledger"] else None,
            "cstar": traj.cstar}


def run_energy_report(cfg, seed, out: Path, verbosity: int) -> dict:
    """Recompute the norm ledger of checkpointed trajectory snapshots."""
    er = cfg.get("energy-report", {})
    run_dir = Path(er.get("run_dir", "."))
    meta = json.loads((run_dir / "checkpoints.json").read_text())
    eos = IdealGasEos(**meta["eos"])
    g = meta["grid"]
    grid = Grid(n1=g["n1"], n2=g["n2"], L1=g["L1"], L2=g["L2"])
    from .profiles import SigmaWeight
    sigma = SigmaWeight().value(grid.x1)[:, None]
    rows = []
    for k, t in enumerate(meta["times"]):
        V = np.empty((2, 6, grid.n1, grid.n2))
        for s, tag in ((0, "plus"), (1, "minus")):
            for comp in range(6):
                V[s, comp] = GridFunction.load(
                    run_dir / f"checkpoint_{k:03d}_{tag}_c{comp}.cvsg").values
        I = float(grid.integrate((V ** 2).sum(axis=(0, 1))))
        Isig = float(grid.integrate(((sigma * grid.d1(V)) ** 2)
                                    .sum(axis=(0, 1))))
        I2 = float(grid.integrate((grid.d2(V) ** 2).sum(axis=(0, 1))))
        d1Vn = grid.d1(V[:, (0, 1, 3)])
        I1n = float(grid.integrate((d1Vn ** 2).sum(axis=(0, 1))))
        rows.append((t, I, I1n, Isig, I2))
    _csv(out / "energy_report.csv", "t,I,I1n,Isigma,I2", rows)
    return {"snapshots": len(rows)}


def run_compat(cfg, seed, out: Path, verbosity: int) -> dict:
    from .compat import (build_approximate, check_compatibility, forcing_fa,
                         manufactured_initial_data, time_jet)
    eos = IdealGasEos(**_section(cfg, "eos"))
    g = _section(cfg, "grid")
    grid = Grid(n1=g["n1"], n2=g["n2"], L1=g["L1"], L2=g["L2"])
    st = _section(cfg, "state")
    cc = {"amplitude": 0.05, "k2": 1, "order": 2, "T": 1.0, "delta": 10.0,
          "fit_t_min": 1e-3, "fit_t_max": 1e-1, "fit_points": 11}
    cc.update(cfg.get("compat", {}))
    data = manufactured_initial_data(
        grid, eos, amplitude=cc["amplitude"], k2=cc["k2"], seed=seed,
        p_plus=st["p_plus"], u2_jump=st["u2_jump"], H2_plus=st["H2_plus"],
        H2_minus=st["H2_minus"])
    jet = time_jet(data, order=cc["order"])
    rep = check_compatibility(jet, order=cc["order"])
    approx = build_approximate(jet, T=cc["T"], delta=cc["delta"])
    F = forcing_fa(approx)
    ts = np.geomspace(cc["fit_t_min"], cc["fit_t_max"], cc["fit_points"])
    norms = [float(np.sqrt(grid.integrate((F(t) ** 2).sum(axis=(0, 1)))))
             for t in ts]
    slope = float(np.polyfit(np.log(ts), np.log(norms), 1)[0]) \
        if max(norms) > 0 else float("nan")
    _csv(out / "fa_scaling.csv", "t,fa_l2", zip(ts, norms))
    payload = {
        "compatible_up_to": rep.compatible_up_to(),
        "velocity_residuals": rep.velocity_residuals,
        "pressure_residuals": rep.pressure_residuals,
        "fa_slope": slope,
        "smallness": approx.smallness,
        "eos_gamma": eos.gamma,
    }
    (out / "compat_report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return payload


def run_nash_moser_demo(cfg, seed, out: Path, verbosity: int) -> dict:
    from .compat import (build_approximate, manufactured_initial_data,
                         time_jet)
    from .nashmoser import NashMoserConfig, NashMoserDriver
    eos = IdealGasEos(**_section(cfg, "eos"))
    g = _section(cfg, "grid")
    grid = Grid(n1=g["n1"], n2=g["n2"], L1=g["L1"], L2=g["L2"])
    st = _section(cfg, "state")
    nm = {"amplitude": 8e-6, "k2": 1, "T": 2.0, "nt": 65, "theta0": 2.0,
          "iterations": 5, "delta": 1e-3}
    nm.update(cfg.get("nash-moser", {}))
    data = manufactured_initial_data(
        grid, eos, amplitude=nm["amplitude"], k2=nm["k2"], seed=seed,
        p_plus=st["p_plus"], u2_jump=st["u2_jump"], H2_plus=st["H2_plus"],
        H2_minus=st["H2_minus"])
    jet = time_jet(data, order=2)
    approx = build_approximate(jet, T=nm["T"], delta=nm["delta"])
    tgrid = np.linspace(0.0, nm["T"], nm["nt"])
    driver = NashMoserDriver(approx, tgrid,
                             NashMoserConfig(theta0=nm["theta0"],
                                             iterations=nm["iterations"]))
    report = driver.run()
    with open(out / "iterates.jsonl", "w", newline="\n") as fh:
        for h in report["history"]:
            fh.write(json.dumps(h, sort_keys=True) + "\n")
    payload = {
        "initial_residual": report["initial_residual"],
        "final_residual": report["final_residual"],
        "residuals": report["residuals"],
        "stopped_early": report["stopped_early"],
    }
    (out / "nash_moser_report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return payload


RUNNERS = {
    "stability-map": run_stability_map,
    "symmetrize": run_symmetrize,
    "evolve": run_evolve,
    "energy-report": run_energy_report,
    "compat": run_compat,
    "nash-moser-demo": run_nash_moser_demo,
}


def run_experiment(config_path, out_dir, seed=None, verbosity=1) -> int:
    """Parse, validate, dispatch, and write artifacts; returns exit status."""
    try:
        text = Path(config_path).read_text()
        experiment, cfg_seed, cfg = parse_config(text)
        seed = cfg_seed if seed is None else int(seed)
    except (OSError, configparser.Error, ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.random.seed(seed)  # legacy consumers; module code uses default_rng
    try:
        summary = RUNNERS[experiment](cfg, seed, out, verbosity)
    except (NumericsError, StabilityError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out, experiment, seed, text,
                    {"summary_keys": sorted(k for k in summary)})
    if verbosity >= 1:
        print(json.dumps({"experiment": experiment, "out": str(out),
                          "summary": _jsonable(summary)}, sort_keys=True))
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cvsheet",
        description="current-vortex-sheet numerical laboratory")
    ap.add_argument("--config", required=True, help="experiment config file")
    ap.add_argument("--out", required=True, help="artifact output directory")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    ap.add_argument("--verbosity", type=int, choices=(0, 1, 2), default=1)
    args = ap.parse_args(argv)
    return run_experiment(args.config, args.out, seed=args.seed,
                          verbosity=args.verbosity)


if __name__ == "__main__":
    sys.exit(main())
