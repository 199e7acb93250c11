"""Seeded experiment construction, execution, sweeps, and serialization.

Timeseries go to plain CSV (17 significant digits, so reruns are
byte-identical); reports go to JSON with a mandatory schema_version field.
"""

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FitWindowError,
    compute_constants,
    check_absorbing_envelope,
    estimate_async_degree,
    fit_decay_rate,
    pairwise_gap,
)
from .grid import Grid, energy_functional, norm_l2, norm_l4, smooth_field
from .integrator import BlowUpError, IntegratorConfig, integrate
from .model import NetworkState, NeuronState, Parameters

__all__ = [
    "InitialCondition",
    "ExperimentSpec",
    "SweepSpec",
    "ExperimentResult",
    "generate_initial",
    "run_experiment",
    "run_sweep",
    "SCHEMA_VERSION",
    "MAX_PAIR_COLUMNS_M",
]

SCHEMA_VERSION = 1
COMPONENTS = ("u", "v", "w", "rho")
OBSERVABLES = ("norms", "energy", "gaps")
IC_MODES = ("uniform-random", "constant-offset", "from-file")

# beyond this neuron count only (max, mean) gap statistics are recorded
MAX_PAIR_COLUMNS_M = 16


@dataclass(frozen=True)
class InitialCondition:
    """How initial fields are built (all randomness flows from the run seed)."""

    mode: str = "uniform-random"
    amplitude: dict = field(
        default_factory=lambda: {c: (-1.0, 1.0) for c in COMPONENTS}
    )
    smoothing_passes: int = 0
    path: str = None     # only for mode "from-file"

    def __post_init__(self):
        if self.mode not in IC_MODES:
            raise ValueError("unknown initial-condition mode %r" % self.mode)
        amp = {}
        for comp in COMPONENTS:
            lo, hi = self.amplitude.get(comp, (-1.0, 1.0))
            lo, hi = float(lo), float(hi)
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError("bad amplitude box for %r: (%r, %r)" % (comp, lo, hi))
            amp[comp] = (lo, hi)
        object.__setattr__(self, "amplitude", amp)
        if self.smoothing_passes < 0:
            raise ValueError("smoothing_passes must be >= 0")
        if self.mode == "from-file" and not self.path:
            raise ValueError("mode 'from-file' needs a path")


@dataclass(frozen=True)
class ExperimentSpec:
    parameters: Parameters
    grid: Grid
    config: IntegratorConfig
    initial: InitialCondition = field(default_factory=InitialCondition)
    seed: int = 0
    observables: tuple = OBSERVABLES
    output_dir: str = "out"
    cstar: float = 1.0
    label: str = "run"

    def __post_init__(self):
        obs = tuple(self.observables)
        if not obs:
            raise ValueError("observable list must not be empty")
        for name in obs:
            if name not in OBSERVABLES:
                raise ValueError("unknown observable %r" % name)
        object.__setattr__(self, "observables", obs)
        if not self.cstar > 0:
            raise ValueError("cstar must be positive")

    def echo(self):
        """Self-contained description embedded in every report."""
        return {
            "parameters": dataclasses.asdict(self.parameters),
            "grid": {"cells": list(self.grid.cells), "extents": list(self.grid.extents)},
            "integrator": dataclasses.asdict(self.config),
            "initial": {
                "mode": self.initial.mode,
                "amplitude": {k: list(v) for k, v in self.initial.amplitude.items()},
                "smoothing_passes": self.initial.smoothing_passes,
                "path": self.initial.path,
            },
            "seed": self.seed,
            "observables": list(self.observables),
            "cstar": self.cstar,
            "label": self.label,
        }


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentSpec
    P_values: tuple
    Q_values: tuple
    seeds: tuple

    def __post_init__(self):
        for name in ("P_values", "Q_values", "seeds"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError("%s must not be empty" % name)
            object.__setattr__(self, name, vals)


@dataclass
class ExperimentResult:
    timeseries_path: Path
    report_path: Path
    report: dict


def generate_initial(spec, seed):
    """Deterministic initial network state for (spec, seed).

    uniform-random: per-component uniform samples in the amplitude box,
    then smoothing_passes diffusion passes; each neuron draws from its own
    substream.  constant-offset: neuron i gets the constant
    lo + (hi - lo) * i / (m - 1) per component.  from-file: loads an npz
    with array 'state' of shape (m, 4, *cells).
    """
    p, g, ic = spec.parameters, spec.grid, spec.initial
    neurons = []
    if ic.mode == "from-file":
        data = np.load(ic.path)["state"]
        if data.shape != (p.m, 4) + g.shape:
            raise ValueError("state array shape %s does not match (m, 4, cells)" % (data.shape,))
        for i in range(p.m):
            neurons.append(NeuronState(*[np.array(data[i, k]) for k in range(4)]))
        return NetworkState(neurons, 0.0)
    for i in range(p.m):
        fields = []
        if ic.mode == "uniform-random":
            rng = np.random.default_rng([seed, i])
            for comp in COMPONENTS:
                lo, hi = ic.amplitude[comp]
                f = rng.uniform(lo, hi, size=g.shape)
                if ic.smoothing_passes:
                    f = smooth_field(f, g, ic.smoothing_passes)
                fields.append(f)
        else:  # constant-offset
            frac = i / (p.m - 1) if p.m > 1 else 0.0
            for comp in COMPONENTS:
                lo, hi = ic.amplitude[comp]
                fields.append(np.full(g.shape, lo + (hi - lo) * frac))
        neurons.append(NeuronState(*fields))
    return NetworkState(neurons, 0.0)


def _pairs(m):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


def _header(spec):
    m = spec.parameters.m
    cols = ["t"]
    if "norms" in spec.observables:
        for i in range(m):
            cols += ["u%d_l2" % (i + 1), "v%d_l2" % (i + 1),
                     "w%d_l2" % (i + 1), "rho%d_l4" % (i + 1)]
    if "energy" in spec.observables:
        cols.append("energy")
    if "gaps" in spec.observables:
        if m <= MAX_PAIR_COLUMNS_M:
            cols += ["gap_%d_%d" % (i + 1, j + 1) for i, j in _pairs(m)]
        else:
            cols += ["gap_max", "gap_mean"]
    return cols


def _sample(t, net, spec, dc):
    g = spec.grid
    row = [t]
    if "norms" in spec.observables:
        for s in net.neurons:
            row += [norm_l2(s.u, g), norm_l2(s.v, g),
                    norm_l2(s.w, g), norm_l4(s.rho, g)]
    if "energy" in spec.observables:
        row.append(energy_functional(net, g, dc.C1))
    if "gaps" in spec.observables:
        gaps = [pairwise_gap(net, g, i, j) for i, j in _pairs(net.m)]
        if net.m <= MAX_PAIR_COLUMNS_M:
            row += gaps
        else:
            row += [max(gaps), sum(gaps) / len(gaps)]
    return row


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % x for x in row])


def _quasinorm_series(header, data, m):
    """Reassemble the quasi-norm from the recorded norm columns."""
    total = np.zeros(data.shape[0])
    for i in range(m):
        for name, power in (("u%d_l2", 2), ("v%d_l2", 2), ("w%d_l2", 2), ("rho%d_l4", 4)):
            total += data[:, header.index(name % (i + 1))] ** power
    return total


def run_experiment(spec, extra_observer=None):
    """Integrate one experiment; write a timeseries CSV and a JSON report."""
    outdir = Path(spec.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    p, g, cfg = spec.parameters, spec.grid, spec.config
    dc = compute_constants(p, g.measure, spec.cstar)
    net0 = generate_initial(spec, spec.seed)

    header = _header(spec)
    rows = []

    def observer(t, net):
        rows.append(_sample(t, net, spec, dc))
        if extra_observer is not None:
            extra_observer(t, net)

    observer(net0.t, net0)
    blowup = None
    try:
        integrate(net0, p, g, cfg, observer)
    except BlowUpError as err:
        blowup = err

    ts_path = outdir / ("%s_timeseries.csv" % spec.label)
    _write_csv(ts_path, header, rows)

    data = np.array(rows)
    report = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "spec": spec.echo(),
        "derived_constants": dc.as_dict(),
        "thresholds": {
            "P": p.P, "Pmin": dc.Pmin, "P_above": bool(p.P > dc.Pmin),
            "Q": p.Q, "Qmin": dc.Qmin, "Q_above": bool(p.Q >= dc.Qmin),
        },
        "pairs": {},
        "envelope": None,
        "degs_estimate": None,
        "verdict": None,
    }

    times = data[:, 0]
    gap_trajs = {}
    if "gaps" in spec.observables and p.m <= MAX_PAIR_COLUMNS_M:
        for i, j in _pairs(p.m):
            col = header.index("gap_%d_%d" % (i + 1, j + 1))
            gap_trajs[(i, j)] = data[:, col]

    for (i, j), gaps in gap_trajs.items():
        key = "%d-%d" % (i + 1, j + 1)
        if np.all(gaps == 0.0):
            report["pairs"][key] = {"rate": None, "window": None, "residual": None,
                                    "n_samples": 0, "decayed": None,
                                    "note": "gap identically zero"}
            continue
        try:
            fit = fit_decay_rate(times, np.maximum(gaps, 1e-300))
            report["pairs"][key] = {
                "rate": fit.rate, "window": list(fit.window),
                "residual": fit.residual, "n_samples": fit.n_samples,
                "decayed": fit.decayed,
            }
        except (FitWindowError, ValueError) as err:
            report["pairs"][key] = {"rate": None, "window": None, "residual": None,
                                    "n_samples": 0, "decayed": None, "note": str(err)}

    if "norms" in spec.observables and blowup is None:
        y = _quasinorm_series(header, data, p.m)
        env = check_absorbing_envelope(times, y, dc)
        report["envelope"] = {"passed": env.passed, "max_margin": env.max_margin,
                              "asymptote": dc.envelope_asymptote}

    if gap_trajs:
        report["degs_estimate"] = estimate_async_degree(gap_trajs)

    if blowup is not None:
        report["verdict"] = "diverged"
        report["blowup"] = {"t": blowup.t, "neuron": blowup.neuron,
                            "component": blowup.component}
    elif gap_trajs:
        all_gaps = np.array(list(gap_trajs.values()))
        if np.all(all_gaps == 0.0):
            report["verdict"] = "synchronized (trivial)"
        elif float(np.max(all_gaps[:, -1])) <= 1e-8:
            report["verdict"] = "synchronized"
        else:
            report["verdict"] = "not synchronized"
    else:
        report["verdict"] = "completed"

    rp_path = outdir / ("%s_report.json" % spec.label)
    with open(rp_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(ts_path, rp_path, report)


def _run_rate(report):
    """Scalar rate for one run: median of the fitted per-pair rates."""
    rates = [v["rate"] for v in report["pairs"].values() if v.get("rate") is not None]
    return float(np.median(rates)) if rates else None


def run_sweep(sweep):
    """Run the (P, Q) grid with replicate seeds; never abort on cell failures."""
    base = sweep.base
    outdir = Path(base.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = []
    for P in sweep.P_values:
        for Q in sweep.Q_values:
            cell = {"P": P, "Q": Q, "runs": [], "median_rate": None, "verdicts": []}
            rates = []
            for seed in sweep.seeds:
                label = "P%g_Q%g_seed%d" % (P, Q, seed)
                try:
                    spec = dataclasses.replace(
                        base,
                        parameters=dataclasses.replace(base.parameters, P=P, Q=Q),
                        seed=seed,
                        output_dir=str(outdir / "cells"),
                        label=label,
                    )
                    res = run_experiment(spec)
                    rate = _run_rate(res.report)
                    cell["runs"].append({"seed": seed, "rate": rate,
                                         "verdict": res.report["verdict"]})
                    cell["verdicts"].append(res.report["verdict"])
                    if rate is not None:
                        rates.append(rate)
                except Exception as err:  # noqa: BLE001 - recorded, not raised
                    cell["runs"].append({"seed": seed, "error": str(err)})
            if rates:
                cell["median_rate"] = float(np.median(rates))
            cells.append(cell)

    dc = compute_constants(base.parameters, base.grid.measure, base.cstar)
    report = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "base_spec": base.echo(),
        "Pmin": dc.Pmin,
        "Qmin": dc.Qmin,
        "cells": cells,
    }
    path = outdir / "sweep_report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path, report
