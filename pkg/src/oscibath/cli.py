"""Command-line front end.

Subcommands: ``simulate`` (scenario -> time-series CSV), ``analyze``
(CSV -> key = value report), ``sweep`` (one scenario field over several
values, concurrent via --jobs), ``demo`` (bundled fig2/fig4 scenarios run
end to end).

Exit codes: 0 success, 1 configuration or file-format error, 2 integration
failure, 3 analysis inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import (
    AmbiguousPeriod,
    AnalysisError,
    NoOscillation,
    TooFewPeaks,
    TooShort,
    eigenfrequency_candidates,
    envelope,
    extract_period,
    nearest_candidate,
    synchronization_metrics,
)
from .coefficients import OutOfRange, make_provider
from .csvio import CsvSchemaError, read_timeseries_csv, write_timeseries_csv
from .integrator import IntegratorError, integrate_coupled
from .model import InvalidConfig, SimulationConfig, TimeSeries
from .scenario import (
    DEMO_FIG4_BETAS,
    apply_override,
    build_config,
    demo_fig2_scenario,
    demo_fig4_scenario,
    read_sections,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTEGRATION = 2
EXIT_INCONCLUSIVE = 3

_SUMMARY_COLUMNS = ("value", "period_1", "period_2", "modulation_depth_1",
                    "modulation_depth_2", "phase_lock_score", "status", "file")


def _err(message: str) -> None:
    print(f"oscibath: {message}", file=sys.stderr)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _run_config(config: SimulationConfig) -> TimeSeries:
    providers = [make_provider(pc) for pc in config.provider_config]
    return integrate_coupled(config, providers)


def _simulation_summary(series: TimeSeries, output_path: str) -> list[str]:
    diag = series.diagnostics
    lines = [
        f"steps_accepted = {diag['steps_accepted']}",
        f"steps_rejected = {diag['steps_rejected']}",
        f"rhs_evaluations = {diag['rhs_evaluations']}",
    ]
    for i, residual in enumerate(diag.get("consistency_residuals", ()), start=1):
        lines.append(f"consistency_residual_{i} = {residual:.6g}")
    neg = diag.get("negative_excursions", {})
    lines.append(f"negative_excursions = {neg.get('count', 0)}")
    lines.append(f"most_negative_n = {neg.get('most_negative', 0.0):.6g}")
    lines.append(f"wrote = {output_path}")
    return lines


def _default_window(t: np.ndarray) -> tuple[float, float]:
    # Late half of the run: past the coefficient transient for every bundled
    # scenario, and long enough for several oscillation periods.
    return (float(t[0] + (t[-1] - t[0]) / 2.0), float(t[-1]))


def _analysis_lines(t: np.ndarray, channels: np.ndarray, *,
                    do_period: bool, do_envelope: bool,
                    sync_pair: tuple[int, int] | None,
                    window: tuple[float, float], atol: float,
                    config: SimulationConfig | None = None
                    ) -> tuple[list[str], int]:
    """key = value report lines for the requested metrics, plus an exit code."""
    lines: list[str] = [f"window = {window[0]:.6g}:{window[1]:.6g}"]
    code = EXIT_OK
    n_osc = channels.shape[0]

    def sfx(i: int) -> str:
        return "" if n_osc == 1 else f"_{i}"

    in_window = (t >= window[0]) & (t <= window[1])

    if do_period:
        for i in range(1, n_osc + 1):
            x = channels[i - 1]
            std = float(x[in_window].std()) if in_window.any() else 0.0
            try:
                report = extract_period(t, x, window, atol=atol)
            except NoOscillation as exc:
                lines.append(f"is_stationary{sfx(i)} = true")
                lines.append(f"mean_level{sfx(i)} = "
                             f"{exc.report.mean_level:.6g} ± {exc.residual_std:.2g}")
                _err(f"channel {i}: {exc}")
                code = max(code, EXIT_INCONCLUSIVE)
                continue
            except (AmbiguousPeriod, TooShort) as exc:
                _err(f"channel {i}: {exc}")
                code = max(code, EXIT_INCONCLUSIVE)
                continue
            lines.append(f"period{sfx(i)} = {report.period:.6g} "
                         f"± {report.period_uncertainty:.2g}")
            lines.append(f"mean_level{sfx(i)} = {report.mean_level:.6g} ± {std:.2g}")
            lines.append(f"amplitude{sfx(i)} = {report.amplitude:.6g}")
            lines.append(f"is_stationary{sfx(i)} = false")

    if do_envelope:
        for i in range(1, n_osc + 1):
            try:
                report = envelope(t, channels[i - 1], window)
            except TooFewPeaks as exc:
                _err(f"channel {i}: {exc}")
                code = max(code, EXIT_INCONCLUSIVE)
                continue
            lines.append(f"modulation_depth{sfx(i)} = "
                         f"{report.modulation_depth:.6g}")
            lines.append(f"n_peaks{sfx(i)} = {len(report.peak_times)}")

    if sync_pair is not None:
        a, b = sync_pair
        try:
            sync = synchronization_metrics(t, channels[a - 1], channels[b - 1],
                                           window, atol=atol)
        except AnalysisError as exc:
            _err(f"sync {a},{b}: {exc}")
            code = max(code, EXIT_INCONCLUSIVE)
        else:
            lines.append(f"period_ratio = {sync.period_ratio:.6g} "
                         f"± {sync.ratio_uncertainty:.2g}")
            lines.append(f"phase_lock_score = {sync.phase_lock_score:.6g}")
            if config is not None:
                candidates = eigenfrequency_candidates(config)
                for idx, period in ((a, sync.period_a), (b, sync.period_b)):
                    family, value = nearest_candidate(2.0 * np.pi / period,
                                                      candidates)
                    lines.append(f"nearest_frequency_{idx} = "
                                 f"{family} {value:.6g}")
    return lines, code


def cmd_simulate(scenario_path: str, output_path: str) -> int:
    try:
        config = build_config(read_sections(
            Path(scenario_path).read_text(encoding="utf-8")))
        series = _run_config(config)
    except (OSError, InvalidConfig) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (IntegratorError, OutOfRange) as exc:
        _err(f"integration failed: {exc}")
        return EXIT_INTEGRATION
    write_timeseries_csv(series, output_path)
    for line in _simulation_summary(series, output_path):
        print(line)
    return EXIT_OK


def _parse_window(raw: str) -> tuple[float, float]:
    try:
        lo, hi = raw.split(":")
        window = (float(lo), float(hi))
    except ValueError:
        raise InvalidConfig(f"--window must be t_a:t_b, got {raw!r}") from None
    if not window[0] < window[1]:
        raise InvalidConfig("--window start must precede end")
    return window


def _parse_pair(raw: str, n_osc: int) -> tuple[int, int]:
    try:
        a, b = (int(part) for part in raw.split(","))
    except ValueError:
        raise InvalidConfig(f"--sync must be a,b, got {raw!r}") from None
    if not (1 <= a <= n_osc and 1 <= b <= n_osc):
        raise InvalidConfig(f"--sync channel out of range 1..{n_osc}")
    return a, b


def cmd_analyze(csv_path: str, *, do_period: bool, do_envelope: bool,
                sync: str | None, window: str | None,
                scenario: str | None) -> int:
    try:
        data = read_timeseries_csv(csv_path)
    except (OSError, CsvSchemaError) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    config = None
    try:
        if scenario is not None:
            config = build_config(read_sections(
                Path(scenario).read_text(encoding="utf-8")))
        pair = _parse_pair(sync, data.n_oscillators) if sync else None
        win = _parse_window(window) if window else _default_window(data.t)
    except (OSError, InvalidConfig) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    if not (do_period or do_envelope or pair):
        do_period = True

    lines, code = _analysis_lines(
        data.t, data.n, do_period=do_period, do_envelope=do_envelope,
        sync_pair=pair, window=win, atol=1e-12, config=config)
    for line in lines:
        print(line)
    return code


def _sweep_worker(task) -> dict[str, str]:
    sections, param, token, csv_path = task
    row = {column: "" for column in _SUMMARY_COLUMNS}
    row["value"] = token
    try:
        config = build_config(apply_override(sections, param, token))
        series = _run_config(config)
        write_timeseries_csv(series, csv_path)
    except (InvalidConfig, IntegratorError, OutOfRange, ValueError) as exc:
        row["status"] = f"failed: {exc}"
        return row

    row["status"] = "ok"
    row["file"] = Path(csv_path).name
    window = _default_window(series.t)
    periods = []
    for i in range(series.n_oscillators):
        try:
            report = extract_period(series.t, series.n[i], window,
                                    atol=config.atol)
            periods.append(report.period)
            if i < 2:
                row[f"period_{i + 1}"] = _fmt(report.period)
        except AnalysisError:
            periods.append(None)
        try:
            if i < 2:
                env = envelope(series.t, series.n[i], window)
                row[f"modulation_depth_{i + 1}"] = _fmt(env.modulation_depth)
        except AnalysisError:
            pass
    if series.n_oscillators >= 2:
        try:
            sync = synchronization_metrics(series.t, series.n[0], series.n[1],
                                           window, atol=config.atol)
            row["phase_lock_score"] = _fmt(sync.phase_lock_score)
        except AnalysisError:
            pass
    return row


def cmd_sweep(scenario_path: str, output_dir: str, *, param: str,
              values: str, jobs: int) -> int:
    try:
        sections = read_sections(Path(scenario_path).read_text(encoding="utf-8"))
    except (OSError, InvalidConfig) as exc:
        _err(str(exc))
        return EXIT_CONFIG

    tokens = [token.strip() for token in values.split(",") if token.strip()]
    if not tokens:
        _err("--values is empty")
        return EXIT_CONFIG

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(sections, param, token, str(out_dir / f"sweep_{i:03d}.csv"))
             for i, token in enumerate(tokens)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(task) for task in tasks]

    summary_path = out_dir / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=_SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    for row in rows:
        print(f"{param} = {row['value']}: {row['status']}")
    print(f"wrote = {summary_path}")
    return EXIT_OK if any(row["status"] == "ok" for row in rows) else EXIT_CONFIG


def _demo_run(scenario_text: str, stem: str, out_dir: Path, *,
              do_envelope: bool, do_sync: bool) -> tuple[int, dict[str, str]]:
    """Write scenario + CSV + report for one demo run; return (code, summary row)."""
    (out_dir / f"{stem}.scn").write_text(scenario_text, encoding="utf-8")
    config = build_config(read_sections(scenario_text))
    try:
        series = _run_config(config)
    except (IntegratorError, OutOfRange) as exc:
        _err(f"integration failed: {exc}")
        return EXIT_INTEGRATION, {}
    csv_path = out_dir / f"{stem}.csv"
    write_timeseries_csv(series, csv_path)
    for line in _simulation_summary(series, str(csv_path)):
        print(line)

    pair = (1, 2) if (do_sync and series.n_oscillators >= 2) else None
    lines, code = _analysis_lines(
        series.t, series.n, do_period=True, do_envelope=do_envelope,
        sync_pair=pair, window=_default_window(series.t), atol=config.atol,
        config=config)
    report_path = out_dir / f"{stem}_report.txt"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)

    row = {column: "" for column in _SUMMARY_COLUMNS}
    row["status"] = "ok"
    row["file"] = csv_path.name
    for line in lines:
        key, _, rest = line.partition(" = ")
        value = rest.split(" ±")[0].strip()
        if key in ("period_1", "period_2", "modulation_depth_1",
                   "modulation_depth_2", "phase_lock_score"):
            row[key] = value
    return code, row


def cmd_demo(name: str, output_dir: str) -> int:
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if name == "fig2":
        code, _ = _demo_run(demo_fig2_scenario(), "fig2", out_dir,
                            do_envelope=False, do_sync=False)
        return code
    if name == "fig4":
        worst = EXIT_OK
        rows = []
        for beta in DEMO_FIG4_BETAS:
            stem = f"fig4_beta{beta}"
            code, row = _demo_run(demo_fig4_scenario(beta), stem, out_dir,
                                  do_envelope=True, do_sync=True)
            worst = max(worst, code)
            if row:
                row["value"] = beta
                rows.append(row)
        summary_path = out_dir / "fig4_summary.csv"
        with summary_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=_SUMMARY_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote = {summary_path}")
        return worst
    _err(f"unknown demo '{name}' (available: fig2, fig4)")
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscibath",
        description="Integrate occupation-number master equations with "
                    "time-dependent friction/diffusion and analyze the "
                    "late-time oscillations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario to a CSV")
    p_sim.add_argument("scenario")
    p_sim.add_argument("output")

    p_ana = sub.add_parser("analyze", help="report metrics from a CSV")
    p_ana.add_argument("csv")
    p_ana.add_argument("--period", action="store_true")
    p_ana.add_argument("--envelope", action="store_true")
    p_ana.add_argument("--sync", metavar="A,B")
    p_ana.add_argument("--window", metavar="TA:TB")
    p_ana.add_argument("--scenario", metavar="PATH",
                       help="scenario of the run; enables eigenfrequency "
                            "candidate reporting for --sync")

    p_sw = sub.add_parser("sweep", help="run a scenario over several values "
                                        "of one field")
    p_sw.add_argument("scenario")
    p_sw.add_argument("output_dir")
    p_sw.add_argument("--param", required=True, metavar="DOTTED.KEY")
    p_sw.add_argument("--values", required=True, metavar="V1,V2,...")
    p_sw.add_argument("--jobs", type=int, default=1)

    p_demo = sub.add_parser("demo", help="run a bundled demo scenario")
    p_demo.add_argument("name", choices=("fig2", "fig4"))
    p_demo.add_argument("output_dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.output)
    if args.command == "analyze":
        return cmd_analyze(args.csv, do_period=args.period,
                           do_envelope=args.envelope, sync=args.sync,
                           window=args.window, scenario=args.scenario)
    if args.command == "sweep":
        return cmd_sweep(args.scenario, args.output_dir, param=args.param,
                         values=args.values, jobs=args.jobs)
    if args.command == "demo":
        return cmd_demo(args.name, args.output_dir)
    raise AssertionError(f"unhandled command {args.command}")


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
