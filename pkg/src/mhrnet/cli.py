"""Command-line entry point: thresholds, simulate, sweep, estimate-cstar.

Exit codes: 0 success, 2 usage/config error, 3 numerical divergence.
"""

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from pathlib import Path

import yaml

from .analysis import compute_constants, estimate_gn_constant
from .grid import Grid
from .harness import (
    ExperimentSpec,
    InitialCondition,
    SweepSpec,
    run_experiment,
    run_sweep,
)
from .integrator import IntegratorConfig
from .model import Parameters

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


class ConfigError(Exception):
    pass


def load_config(path=None):
    """Load a YAML config; None loads the packaged all-ones default."""
    if path is None:
        text = resources.files("mhrnet").joinpath("data/default.yaml").read_text()
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config file not found: %s" % path)
        text = path.read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError("malformed config: %s" % err) from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping at top level")
    return cfg


def apply_overrides(cfg, pairs):
    """Apply dotted-path overrides like parameters.P=25 (values parse as YAML)."""
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError("override %r is not of the form key.path=value" % item)
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as err:
            raise ConfigError("cannot parse override value %r: %s" % (raw, err)) from err
        node = cfg
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError("override path %r crosses a non-mapping" % dotted)
        node[keys[-1]] = value
    return cfg


def build_parameters(cfg):
    section = cfg.get("parameters")
    if not isinstance(section, dict):
        raise ConfigError("config is missing the 'parameters' section")
    names = Parameters.field_names()
    missing = [n for n in names if n not in section]
    if missing:
        raise ConfigError("parameters section is missing field(s): %s" % ", ".join(missing))
    unknown = [k for k in section if k not in names]
    if unknown:
        raise ConfigError("unknown parameter field(s): %s" % ", ".join(unknown))
    try:
        return Parameters(**section)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def build_grid(cfg):
    section = cfg.get("grid")
    if not isinstance(section, dict):
        raise ConfigError("config is missing the 'grid' section")
    try:
        return Grid(tuple(section["cells"]), tuple(section["extents"]))
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError("bad grid section: %s" % err) from err


def build_spec(cfg, outdir=None, enforce_stability=True):
    p = build_parameters(cfg)
    g = build_grid(cfg)
    try:
        icfg = IntegratorConfig(enforce_stability=enforce_stability,
                                **cfg.get("integrator", {}))
        init_section = dict(cfg.get("initial", {}))
        init = InitialCondition(**init_section)
        spec = ExperimentSpec(
            parameters=p,
            grid=g,
            config=icfg,
            initial=init,
            seed=int(cfg.get("seed", 0)),
            observables=tuple(cfg.get("observables", ("norms", "energy", "gaps"))),
            output_dir=str(
                outdir
                or cfg.get("output_dir")
                or os.environ.get("MHRNET_OUTDIR", "out")
            ),
            cstar=float(cfg.get("cstar", 1.0)),
            label=str(cfg.get("label", "run")),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    return spec


def _check_writable(outdir):
    path = Path(outdir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.touch()
        probe.unlink()
    except OSError as err:
        raise ConfigError("output directory %s is not writable: %s" % (path, err)) from err


def cmd_thresholds(args):
    cfg = apply_overrides(load_config(args.config), args.set)
    p = build_parameters(cfg)
    g = build_grid(cfg)
    dc = compute_constants(p, g.measure, float(cfg.get("cstar", 1.0)))
    rows = [
        ("C1", dc.C1), ("C2", dc.C2), ("lambda", dc.lam), ("M", dc.M),
        ("K", dc.K), ("Cmult", dc.Cmult), ("Pmin", dc.Pmin), ("Qmin", dc.Qmin),
        ("xi(P)", dc.xi), ("kappa", dc.kappa),
        ("envelope asymptote", dc.envelope_asymptote),
        ("cstar (input)", dc.cstar), ("|Omega|", dc.omega_measure),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print("%-*s  %.12g" % (width, name, value))
    if args.dump:
        with open(args.dump, "w") as fh:
            json.dump(dc.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_simulate(args):
    cfg = apply_overrides(load_config(args.config), args.set)
    spec = build_spec(cfg, outdir=args.outdir,
                      enforce_stability=not args.no_stability_guard)
    _check_writable(spec.output_dir)
    result = run_experiment(spec)
    print("verdict: %s" % result.report["verdict"])
    print("timeseries: %s" % result.timeseries_path)
    print("report: %s" % result.report_path)
    if result.report["verdict"] == "diverged":
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sweep(args):
    cfg = apply_overrides(load_config(args.config), args.set)
    section = cfg.get("sweep")
    if not isinstance(section, dict):
        raise ConfigError("config is missing the 'sweep' section")
    base = build_spec(cfg, outdir=args.outdir)
    _check_writable(base.output_dir)
    try:
        sweep = SweepSpec(
            base=base,
            P_values=tuple(section.get("P", ())),
            Q_values=tuple(section.get("Q", ())),
            seeds=tuple(section.get("seeds", ())),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    path, report = run_sweep(sweep)
    print("sweep report: %s" % path)
    print("Pmin=%.6g Qmin=%.6g" % (report["Pmin"], report["Qmin"]))
    return EXIT_OK


def cmd_estimate_cstar(args):
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    try:
        g = Grid(tuple(args.cells), tuple(args.extent))
    except ValueError as err:
        raise ConfigError(str(err)) from err
    value = estimate_gn_constant(g, n_samples=args.samples, seed=args.seed)
    print("%.12g" % value)
    return EXIT_OK


def _parser():
    parser = argparse.ArgumentParser(
        prog="mhrnet",
        description="Memristive diffusive Hindmarsh-Rose network simulator",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config (default: packaged all-ones scenario)")
    common.add_argument("-s", "--set", action="append", metavar="KEY.PATH=VALUE",
                        help="override a config value by dotted path")

    p = sub.add_parser("thresholds", parents=[common],
                       help="print all derived constants and coupling thresholds")
    p.add_argument("--dump", help="also write the constants as JSON to this file")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("simulate", parents=[common], help="run one experiment")
    p.add_argument("--outdir", help="output directory (overrides config / $MHRNET_OUTDIR)")
    p.add_argument("--no-stability-guard", action="store_true",
                   help="skip the explicit-scheme stability check")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="run a (P, Q) coupling sweep")
    p.add_argument("--outdir", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate-cstar",
                       help="empirical interpolation-constant estimate for a grid")
    p.add_argument("--cells", type=int, nargs="+", required=True)
    p.add_argument("--extent", type=float, nargs="+", default=None)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_cstar)

    return parser


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code not in (0, None) else 0
    if getattr(args, "command", None) == "estimate-cstar" and args.extent is None:
        args.extent = [1.0] * len(args.cells)
    try:
        from .integrator import BlowUpError
        try:
            return args.func(args)
        except BlowUpError:
            return EXIT_DIVERGED
    except (ConfigError, ValueError) as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
