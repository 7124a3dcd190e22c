"""Command-line front end.

Subcommands: ``check``, ``synth``, ``sweep``, ``optimize-phi``, ``fit`` and
``simulate``.  Options may come from a JSON file (``--config``); flags given
on the command line take precedence.  Exit codes: 0 success, 1 usage or
input error, 2 failed assumption check, 3 numerical failure.
"""

import argparse
from dataclasses import dataclass, field
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .delayperf import (
    DetectorScan, fit_linear_sinusoid, optimize_phi, ripple_frequency, sweep_delay,
)
from .errors import (
    DelayLQGError, DivergenceError, DivergingCostError, DomainError, FitError,
    OptimizationError, SynthesisError,
)
from .lqgsynth import synthesize
from .mcsim import SimConfig, estimate_cost
from .plantmodel import (
    PRESETS, PlantSpec, SynthesisModel, build_synthesis_model, check_assumptions,
    classify_stability,
)

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_PHI = {"damped-cavity": 1.98, "harmonic": 0.0}
CONFIG_KEYS = (
    "preset", "gamma", "delta", "mass", "omega", "plant", "model", "phi",
    "h_min", "h_max", "h_step", "delay", "C1", "D12", "dt", "traj", "seed",
    "T_burn", "T_avg", "out", "method", "emit_plot", "jobs", "weighted",
    "per_trajectory",
)


class UsageError(DelayLQGError):
    pass


class AssumptionFailure(DelayLQGError):
    def __init__(self, report):
        self.report = report
        super().__init__("assumption check failed: " + (report.details or "see report"))


def fmt(x):
    """Fixed 12-significant-digit formatting for CSV output."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.12g}"


@dataclass
class RunConfig:
    preset: str = None
    gamma: float = 0.5
    delta: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    plant: dict = None
    model: dict = None
    phi: list = None
    h_min: float = 0.0
    h_max: float = 10.0
    h_step: float = 0.1
    delay: list = None
    C1: list = None
    D12: list = None
    dt: float = 1e-3
    traj: int = 64
    seed: int = 0
    T_burn: float = 20.0
    T_avg: float = 80.0
    out: str = "."
    method: str = "gramian"
    emit_plot: bool = False
    jobs: int = 1
    weighted: bool = False
    per_trajectory: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def weights(self):
        C1 = None if self.C1 is None else np.array(self.C1, float)
        D12 = None if self.D12 is None else np.array(self.D12, float).reshape(-1, 1)
        return C1, D12

    def plant_spec(self):
        if self.preset is not None:
            if self.preset == "damped-cavity":
                return PRESETS[self.preset](self.gamma, self.delta)
            if self.preset == "harmonic":
                return PRESETS[self.preset](self.mass, self.omega)
            raise UsageError(f"unknown preset {self.preset!r}")
        if self.plant is not None:
            return PlantSpec.from_dict(self.plant)
        return None

    def phis(self):
        if self.phi:
            return [float(p) for p in self.phi]
        return [DEFAULT_PHI.get(self.preset, 0.0)]

    def h_grid(self):
        if self.delay:
            h = np.array(sorted(float(d) for d in self.delay))
        else:
            if not self.h_step > 0 or self.h_max < self.h_min:
                raise UsageError("empty delay grid (need h-step > 0 and h-max >= h-min)")
            n = int(math.floor((self.h_max - self.h_min) / self.h_step + 1e-9))
            h = self.h_min + self.h_step * np.arange(n + 1)
        if h.size == 0:
            raise UsageError("empty delay grid")
        if np.any(h < 0):
            raise UsageError("delays must be nonnegative")
        return h

    def models(self):
        """One synthesis model per requested detector angle."""
        plant = self.plant_spec()
        C1, D12 = self.weights
        if plant is not None:
            return [build_synthesis_model(plant, p, C1, D12) for p in self.phis()]
        if self.model is not None:
            d = dict(self.model)
            if C1 is not None:
                d["C1"] = C1.tolist()
            if D12 is not None:
                d["D12"] = D12.tolist()
            return [SynthesisModel.from_dict(d)]
        raise UsageError("no plant given: use --preset, or 'plant'/'model' in the config file")


def load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    cfg = RunConfig()
    for key, val in data.items():
        key = key.replace("-", "_")
        if key in CONFIG_KEYS:
            setattr(cfg, key, val)
        else:
            cfg.extra[key] = val
    if isinstance(cfg.phi, (int, float)):
        cfg.phi = [cfg.phi]
    if isinstance(cfg.delay, (int, float)):
        cfg.delay = [cfg.delay]
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            setattr(cfg, key, val)
    if args.preset is not None:
        cfg.plant = cfg.model = None
    sources = sum(x is not None for x in (cfg.preset, cfg.plant, cfg.model))
    if sources > 1:
        raise UsageError("give exactly one plant source (preset, plant or model)")
    return cfg


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _require_assumptions(model):
    report = check_assumptions(model)
    if not report.passed:
        raise AssumptionFailure(report)
    return report


def _phi_tag(phi):
    return f"{phi:.6f}"


def cmd_check(cfg):
    status = EXIT_OK
    reports = []
    for model in cfg.models():
        report = check_assumptions(model)
        print(f"# {model.label}  phi={fmt(model.phi)}")
        print(report.format_text())
        reports.append({"phi": model.phi, "label": model.label, **report.to_dict()})
        if not report.passed:
            status = EXIT_ASSUMPTION
    print(json.dumps(reports, indent=2, sort_keys=True))
    if cfg.out and cfg.out != ".":
        with open(os.path.join(_ensure_out(cfg), "check.json"), "w") as fh:
            json.dump(reports, fh, indent=2, sort_keys=True)
    return status


def cmd_synth(cfg):
    out = []
    for model in cfg.models():
        _require_assumptions(model)
        g = synthesize(model)
        out.append({"phi": model.phi, "label": model.label, "model": model.to_dict(),
                    "gains": g.to_dict()})
    text = json.dumps(out, indent=2, sort_keys=True)
    print(text)
    with open(os.path.join(_ensure_out(cfg), "synth.json"), "w") as fh:
        fh.write(text + "\n")
    return EXIT_OK


def cmd_sweep(cfg):
    h = cfg.h_grid()
    models = cfg.models()
    outdir = _ensure_out(cfg)
    files = []
    for model in models:
        _require_assumptions(model)
        g = synthesize(model)
        curve = sweep_delay(model, g, h, cfg.method, weighted=cfg.weighted)
        stable = not math.isnan(g.J_unc)
        header = ["h", "J_opt"] + (["J_unc"] if stable else [])
        rows = [[hk, Jk] + ([g.J_unc] if stable else []) for hk, Jk in curve.rows()]
        path = os.path.join(outdir, f"sweep_phi_{_phi_tag(model.phi)}.csv")
        _write_csv(path, header, rows)
        files.append(path)
        print(f"phi={fmt(model.phi)}  J(0)={fmt(curve.J_values[0])}  "
              f"J({fmt(h[-1])})={fmt(curve.J_values[-1])}  -> {path}")
    if cfg.emit_plot:
        _emit_plot(outdir, "sweep", files)
    return EXIT_OK


def cmd_optimize_phi(cfg):
    plant = cfg.plant_spec()
    if plant is None:
        models = cfg.models()
        _require_assumptions(models[0])
        raise UsageError("optimize-phi needs a physical plant (preset or 'plant'), "
                         "not a fixed-angle generic model")
    h = cfg.h_grid()
    C1, D12 = cfg.weights
    ref_phi = cfg.phis()[0]
    _require_assumptions(build_synthesis_model(plant, ref_phi, C1, D12))
    scan = DetectorScan(plant, C1, D12)
    rows = []
    for hk in h:
        phi_opt, J_opt = optimize_phi(plant, C1, D12, hk, scan=scan)
        rows.append([hk, phi_opt, J_opt])
        print(f"h={fmt(hk)}  phi_opt={fmt(phi_opt)}  J_opt={fmt(J_opt)}")
    outdir = _ensure_out(cfg)
    path = os.path.join(outdir, "optimize_phi.csv")
    _write_csv(path, ["h", "phi_opt", "J_opt"], rows)
    if cfg.emit_plot:
        _emit_plot(outdir, "optimize_phi", [path])
    return EXIT_OK


def cmd_fit(cfg):
    h = cfg.h_grid()
    models = cfg.models()
    if classify_stability(models[0].A) != "marginal":
        raise FitError("plant not marginal: the linear-plus-ripple law applies to "
                       "oscillator plants only")
    omega = ripple_frequency(models[0].A)
    rows, fits = [], []
    for model in models:
        _require_assumptions(model)
        g = synthesize(model)
        curve = sweep_delay(model, g, h, cfg.method)
        fit = fit_linear_sinusoid(curve, omega)
        rel = fit.rms_residual / float(np.max(np.abs(curve.J_values)))
        rows.append([model.phi, fit.offset, fit.slope_A, fit.amplitude_B, fit.phase_theta,
                     fit.rms_residual, rel])
        fits.append({"phi": model.phi, **fit.to_dict(), "relative_residual": rel})
        print(f"phi={fmt(model.phi)}  offset={fmt(fit.offset)}  slope={fmt(fit.slope_A)}  "
              f"amplitude={fmt(fit.amplitude_B)}  phase={fmt(fit.phase_theta)}  "
              f"rms={fmt(fit.rms_residual)}")
    slopes = [f["slope_A"] for f in fits]
    amps = [f["amplitude_B"] for f in fits]
    spread = {
        "slope_rel_spread": (max(slopes) - min(slopes)) / max(abs(s) for s in slopes),
        "amplitude_rel_spread": (max(amps) - min(amps)) / max(max(amps), 1e-300),
    }
    print(f"slope spread={fmt(spread['slope_rel_spread'])}  "
          f"amplitude spread={fmt(spread['amplitude_rel_spread'])}")
    outdir = _ensure_out(cfg)
    _write_csv(os.path.join(outdir, "fit.csv"),
               ["phi", "offset", "slope_A", "amplitude_B", "phase_theta", "rms_residual",
                "relative_residual"], rows)
    with open(os.path.join(outdir, "fit.json"), "w") as fh:
        json.dump({"omega_ripple": omega, "fits": fits, **spread}, fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_simulate(cfg):
    if int(cfg.traj) < 1:
        raise UsageError("--traj must be at least 1")
    try:
        sim = SimConfig(dt=float(cfg.dt), T_burn=float(cfg.T_burn), T_avg=float(cfg.T_avg),
                        n_traj=int(cfg.traj), seed=int(cfg.seed))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    delays = [float(d) for d in cfg.delay] if cfg.delay else [0.0]
    model = cfg.models()[0]
    _require_assumptions(model)
    g = synthesize(model)
    outdir = _ensure_out(cfg)
    rows = []
    status = EXIT_OK
    for h in delays:
        est = estimate_cost(model, g, h, sim, jobs=int(cfg.jobs or 1))
        ok = est.agrees()
        rows.append([est.h, est.J_hat, est.stderr, est.J_formula, sim.n_traj, sim.dt,
                     est.J_weighted, int(ok)])
        print(f"{'PASS' if ok else 'FAIL'}  h={fmt(est.h)}  J_hat={fmt(est.J_hat)}  "
              f"stderr={fmt(est.stderr)}  J_formula={fmt(est.J_formula)}  "
              f"J_weighted={fmt(est.J_weighted)}  diverged={est.diverged}")
        if cfg.per_trajectory:
            _write_csv(os.path.join(outdir, f"simulate_traj_h_{fmt(est.h)}.csv"),
                       ["traj", "J_avg"], list(enumerate(est.per_trajectory)))
        if est.diverged:
            status = EXIT_NUMERIC
    _write_csv(os.path.join(outdir, "simulate.csv"),
               ["h", "J_hat", "stderr", "J_formula", "n_traj", "dt", "J_weighted", "agree"],
               rows)
    return status


_PLOT_TEMPLATE = '''"""Generated plot script; run with python after the CSV files exist."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = {files!r}
KIND = {kind!r}

fig, ax = plt.subplots()
for name in FILES:
    with open(os.path.join(HERE, name)) as fh:
        rows = list(csv.DictReader(fh))
    h = [float(r["h"]) for r in rows]
    if KIND == "sweep":
        ax.plot(h, [float(r["J_opt"]) for r in rows], label=name)
        if "J_unc" in rows[0]:
            ax.plot(h, [float(r["J_unc"]) for r in rows], "k--")
        ax.set_ylabel("J")
    else:
        ax.plot(h, [float(r["phi_opt"]) for r in rows], label=name)
        ax.set_ylabel("phi_opt")
ax.set_xlabel("h")
ax.legend()
fig.savefig(os.path.join(HERE, KIND + ".pdf"))
'''


def _emit_plot(outdir, kind, files):
    path = os.path.join(outdir, f"plot_{kind}.py")
    with open(path, "w") as fh:
        fh.write(_PLOT_TEMPLATE.format(files=[os.path.basename(f) for f in files], kind=kind))
    print(f"plot script -> {path}")


COMMANDS = {
    "check": cmd_check,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "optimize-phi": cmd_optimize_phi,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--gamma", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--mass", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--phi", type=float, action="append", help="detector angle (repeatable)")
    common.add_argument("--h-min", dest="h_min", type=float)
    common.add_argument("--h-max", dest="h_max", type=float)
    common.add_argument("--h-step", dest="h_step", type=float)
    common.add_argument("--delay", type=float, action="append", help="explicit delay (repeatable)")
    common.add_argument("--dt", type=float)
    common.add_argument("--traj", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--t-burn", dest="T_burn", type=float)
    common.add_argument("--t-avg", dest="T_avg", type=float)
    common.add_argument("--jobs", type=int, help="worker threads for Monte Carlo")
    common.add_argument("--out", help="output directory")
    common.add_argument("--method", choices=("gramian", "quadrature"))
    common.add_argument("--weighted", action="store_true",
                        help="scale the delay penalty by D12^T D12")
    common.add_argument("--per-trajectory", dest="per_trajectory", action="store_true")
    common.add_argument("--emit-plot", dest="emit_plot", action="store_true")

    parser = argparse.ArgumentParser(prog="delaylqg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except AssumptionFailure as exc:
        print(exc.report.format_text(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SynthesisError, DivergenceError, DivergingCostError, OptimizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, FitError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
