"""``qbattery`` command line: charge, sweep, compare and wigner runs to CSV/JSON (+ SVG)."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as exp
from .config import ConfigError, SimConfig
from .metrics import MetricSeries
from .ode import IntegratorError
from .output import Table, module_versions, serialize
from .plotting import PlotError, PlotSpec, write_svg
from .states import TruncationError, charger_label

EXIT_OK, EXIT_CONFIG, EXIT_TRUNCATION, EXIT_INTEGRATOR, EXIT_IO = 0, 2, 3, 4, 5
SWEEP_KINDS = ("fock", "thermal", "dissipation", "heatmap")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--out", metavar="PATH", help="output file (default: config output.path, else stdout)")
    common.add_argument("--plot", choices=["svg", "none"], help="also render an SVG next to the output")

    parser = argparse.ArgumentParser(prog="qbattery", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    charge = sub.add_parser("charge", parents=[common], help="metric time series of one charger")
    sw = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    sw.add_argument("kind", choices=SWEEP_KINDS)
    compare = sub.add_parser("compare", parents=[common], help="four chargers at equal mean occupation")
    wg = sub.add_parser("wigner", parents=[common], help="Wigner function of the battery state")
    wg.add_argument("--tau", type=float, help="time of the snapshot (default from config, pi)")
    for p in (charge, sw, compare, wg):
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="config overrides, dotted keys allowed (charger.kind=thermal)")
    return parser


def load_config(args) -> SimConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = SimConfig.from_json(text, list(args.overrides))
    if args.plot:
        cfg = cfg.replace(output={**cfg.output, "plot": args.plot})
    if args.out:
        cfg = cfg.replace(output={**cfg.output, "path": args.out})
    return cfg


def _header(cfg: SimConfig, command: str, extra: dict) -> dict:
    prov = {"command": command, "config": cfg.doc, "versions": module_versions(),
            "integrator_tolerances": {"rel_tol": cfg.integrator_rel_tol, "abs_tol": cfg.abs_tol}}
    prov.update(extra)
    return prov


def series_table(series: MetricSeries, prov: dict) -> Table:
    return Table(MetricSeries.COLUMNS, list(series.rows()), prov)


def _emit(table: Table, cfg: SimConfig, path: str | None, plot: PlotSpec | None) -> None:
    text = serialize(table, cfg.output["format"])
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if plot is not None and cfg.output["plot"] == "svg":
        if path is None:
            raise ConfigError("plot output needs a file path (--out)")
        write_svg(Path(path).with_suffix(".svg"), table, plot)


def _sibling(path: str | None, tag: str) -> str | None:
    if path is None:
        return None
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}"))


def cmd_charge(cfg: SimConfig) -> Table:
    start = time.perf_counter()
    sim = exp.simulate(cfg)
    prov = _header(cfg, "charge", {"charger": charger_label(sim.charger), "n_max": sim.n_max,
                                   "initial_mean_occupation": sim.initial_mean,
                                   "wall_time_s": round(time.perf_counter() - start, 3)})
    table = series_table(sim.series, prov)
    _emit(table, cfg, cfg.output["path"], PlotSpec("line", "tau", ("E", "xi"), title="charging"))
    return table


_SWEEP_PLOTS = {
    "fock": PlotSpec("markers", "n", ("E_max",), title="maximum stored energy"),
    "thermal": PlotSpec("line", "n_th", ("xi_max",), group="n", logx=True, title="peak ergotropy"),
    "dissipation": PlotSpec("line", "gamma", ("xi_max",), group="n", logx=True, title="peak ergotropy"),
    "heatmap": PlotSpec("heatmap", "n_th", ("gamma",), value="xi_max", logx=True, logy=True,
                        title="peak ergotropy"),
}


def run_sweep(kind: str, cfg: SimConfig) -> exp.SweepResult:
    fn = {"fock": exp.fock_sweep, "thermal": exp.thermal_broadening_sweep,
          "dissipation": exp.dissipation_sweep, "heatmap": exp.thermal_dissipation_heatmap}[kind]
    return fn(cfg)


def cmd_sweep(kind: str, cfg: SimConfig) -> Table:
    result = run_sweep(kind, cfg)
    extra = {k: v for k, v in result.provenance.items() if k not in ("config", "version", "integrator")}
    table = Table(result.columns, result.rows(), _header(cfg, f"sweep {kind}", extra))
    _emit(table, cfg, cfg.output["path"], _SWEEP_PLOTS[kind])
    return table


def cmd_compare(cfg: SimConfig) -> Table:
    comp = exp.gaussian_comparison(cfg)
    extra = {k: v for k, v in comp.provenance.items() if k not in ("config", "version", "integrator")}
    path = cfg.output["path"]
    long_rows = []
    for kind, series in comp.series.items():
        prov = _header(cfg, f"compare {kind}", {**extra, "charger": extra["chargers"][kind]})
        if path is not None:
            _emit(series_table(series, prov), cfg, _sibling(path, kind), None)
        long_rows.extend((kind, t, s) for t, s in zip(series.times, series.snr))
    summary = Table(exp.Comparison.SUMMARY_COLUMNS, comp.summary_rows(), _header(cfg, "compare", extra))
    snr_plot = PlotSpec("line", "tau", ("snr",), group="charger", title="signal-to-noise ratio")
    _emit(summary, cfg, path, None)
    if path is not None and cfg.output["plot"] == "svg":
        write_svg(Path(path).with_suffix(".svg"), Table(("charger", "tau", "snr"), long_rows), snr_plot)
    return summary


def cmd_wigner(cfg: SimConfig, tau: float | None = None) -> Table:
    start = time.perf_counter()
    tau = cfg.tau if tau is None else tau
    from .metrics import wigner

    charger = cfg.charger
    rho = exp.reduced_battery_at(cfg, charger, tau)
    axis = cfg.wigner_axis
    w = wigner(rho, axis, axis)
    X, P = np.meshgrid(axis, axis, indexing="ij")
    rows = list(zip(X.ravel().tolist(), P.ravel().tolist(), w.ravel().tolist()))
    prov = _header(cfg, "wigner", {"charger": charger_label(charger), "tau": tau,
                                   "wall_time_s": round(time.perf_counter() - start, 3)})
    table = Table(("x", "p", "W"), rows, prov)
    _emit(table, cfg, cfg.output["path"], PlotSpec("heatmap", "x", ("p",), value="W", title="Wigner function"))
    return table


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # overrides may be interleaved with options; argparse leaves the later ones over
    stray = [x for x in extra if x.startswith("-") or "=" not in x]
    if stray:
        parser.error(f"unrecognized arguments: {' '.join(stray)}")
    args.overrides = list(args.overrides) + extra
    try:
        cfg = load_config(args)
        if args.command == "charge":
            cmd_charge(cfg)
        elif args.command == "sweep":
            cmd_sweep(args.kind, cfg)
        elif args.command == "compare":
            cmd_compare(cfg)
        else:
            cmd_wigner(cfg, args.tau)
    except TruncationError as exc:
        print(f"qbattery: truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except IntegratorError as exc:
        print(f"qbattery: integrator error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except (ConfigError, PlotError, ValueError) as exc:
        print(f"qbattery: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qbattery: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
