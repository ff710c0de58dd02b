from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import NoReturn
from typing import TYPE_CHECKING

import numpy as np

from battery_xkf.battery_model import BatteryParams
from battery_xkf.battery_model import BatteryState
from battery_xkf.battery_model import load_params
from battery_xkf.battery_model import NoiseSpec
from battery_xkf.battery_model import simulate
from battery_xkf.battery_model import SimulationLog
from battery_xkf.errors import InputError
from battery_xkf.estimators import FILTER_NAMES
from battery_xkf.estimators import KalmanConfig
from battery_xkf.estimators import make_filter
from battery_xkf.estimators import ObserverGain
from battery_xkf.estimators import run_filter
from battery_xkf.frames import STREAM_HEADER
from battery_xkf.frames import stream_checksum
from battery_xkf.harness.cycles import generate_dst_like
from battery_xkf.harness.cycles import generate_fuds_like
from battery_xkf.harness.cycles import ingest_cycle_csv
from battery_xkf.harness.cycles import save_cycle_csv
from battery_xkf.harness.experiment import compute_metrics
from battery_xkf.harness.experiment import exit_status
from battery_xkf.harness.experiment import FilterResult
from battery_xkf.harness.experiment import load_experiment_config
from battery_xkf.harness.experiment import run_experiment
from battery_xkf.harness.experiment import run_temperature_study
from battery_xkf.harness.experiment import write_metrics_csv
from battery_xkf.identification import fit_parameters
from battery_xkf.identification import FitSearch
from battery_xkf.identification import match_noise_covariances
from battery_xkf.identification import model_frame
from battery_xkf.keyvalue import read_key_values
from battery_xkf.keyvalue import write_key_values
from battery_xkf.ocv_curve import builtin_curve
from battery_xkf.ocv_curve import load_ocv_csv

if TYPE_CHECKING:
    from collections.abc import Sequence

    from battery_xkf.harness.cycles import DriveCycle
    from battery_xkf.ocv_curve import OcvCurve

_logger = logging.getLogger("battery_xkf")

EXIT_OK = 0
EXIT_INPUT = 1


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit code 2 means every filter failed
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _triple(value: str) -> tuple[float, float, float]:
    try:
        items = [float(item) for item in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {value!r}") from None
    if len(items) == 1:
        items *= 3
    if len(items) != 3:
        raise argparse.ArgumentTypeError(f"expected 1 or 3 numbers, got {value!r}")
    return (items[0], items[1], items[2])


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", type=Path, help="params file; reference cell values if omitted")
    parser.add_argument("--ocv", type=Path, help="OCV curve CSV; built-in curve if omitted")
    parser.add_argument("--temperature", type=float, default=20.0, help="built-in curve")


def _add_cycle_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cycle", type=Path, help="drive cycle CSV (t_s,current_a)")
    parser.add_argument("--generator", choices=("dst", "fuds"), default="dst")
    parser.add_argument("--duration", type=float, default=3600.0, help="seconds")
    parser.add_argument("--peak", type=float, default=2.23, help="amperes")
    parser.add_argument("--dt", type=float, default=1.0, help="seconds")
    parser.add_argument("--cycle-seed", type=int, default=0)


def _add_kalman_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k1", type=float, default=0.0)
    parser.add_argument("--k2", type=float, default=0.0)
    parser.add_argument("--k3", type=float, default=2.0)
    parser.add_argument("--kf-process-std", type=_triple, default=(0.01, 0.01, 0.01))
    parser.add_argument("--kf-measurement-std", type=float, default=0.04)
    parser.add_argument("--p0", type=_triple, default=(1e-2, 1e-2, 0.25), help="diagonal")
    parser.add_argument("--riccati", choices=("split", "euler"), default="split")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="battery-xkf", description="State-of-charge estimation experiments."
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="simulate the plant over a drive cycle")
    _add_model_args(sim)
    _add_cycle_args(sim)
    sim.add_argument("--soc0", type=float, default=1.0)
    sim.add_argument("--process-std", type=_triple, default=(0.0, 0.0, 0.0))
    sim.add_argument("--measurement-std", type=float, default=0.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--method", choices=("euler", "exact"), default="euler")
    sim.add_argument("--cutoff", type=float, help="stop below this terminal voltage")
    sim.add_argument("--out", type=Path, required=True, help="log CSV")

    est = commands.add_parser("estimate", help="run one filter over a logged data set")
    est.add_argument("--data", type=Path, required=True, help="log CSV")
    est.add_argument("--filter", choices=FILTER_NAMES, default="xkf")
    _add_model_args(est)
    _add_kalman_args(est)
    est.add_argument("--soc0", type=float, default=0.6, help="initial estimate")
    est.add_argument("--threshold", type=float, default=0.02)
    est.add_argument("--jitter", action="store_true", help="UKF Cholesky retry")
    est.add_argument("--out", type=Path, required=True, help="trace CSV")

    compare = commands.add_parser("compare", help="run the filter bank from a config file")
    compare.add_argument("--config", type=Path, required=True)
    compare.add_argument("--out", type=Path, help="overrides output_dir")

    temp = commands.add_parser("tempstudy", help="matched vs mismatched OCV curve")
    temp.add_argument("--config", type=Path, required=True)
    temp.add_argument("--truth-temperature", type=float, default=40.0)
    temp.add_argument("--filter-temperature", type=float, default=20.0)
    temp.add_argument("--truth-ocv", type=Path)
    temp.add_argument("--filter-ocv", type=Path)
    temp.add_argument("--filter", choices=FILTER_NAMES, default="xkf")
    temp.add_argument("--out", type=Path, help="overrides output_dir")

    fit = commands.add_parser("fit", help="identify model parameters from a log")
    fit.add_argument("--data", type=Path, required=True, help="log CSV")
    fit.add_argument("--ocv", type=Path)
    fit.add_argument("--temperature", type=float, default=20.0)
    fit.add_argument("--initial-soc", type=float, default=1.0)
    fit.add_argument("--capacity-ah", type=float, default=2.23)
    fit.add_argument("--refinements", type=int, default=2)
    fit.add_argument("--match-noise", action="store_true")
    fit.add_argument("--kf-process-std", type=_triple, default=(1e-5, 1e-5, 0.01))
    fit.add_argument("--kf-measurement-std", type=float, default=0.04)
    fit.add_argument("--out", type=Path, required=True, help="report directory")

    gen = commands.add_parser("gen-cycle", help="write a generated drive cycle")
    gen.add_argument("kind", choices=("dst", "fuds"))
    gen.add_argument("--duration", type=float, default=3600.0)
    gen.add_argument("--peak", type=float, default=2.23)
    gen.add_argument("--dt", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)
    return parser


def _curve(ocv: Path | None, temperature_c: float) -> OcvCurve:
    return builtin_curve(temperature_c) if ocv is None else load_ocv_csv(ocv)


def _params(path: Path | None) -> BatteryParams:
    return BatteryParams.reference_cell() if path is None else load_params(path)


def _generated_cycle(kind: str, args: argparse.Namespace, seed: int) -> DriveCycle:
    if kind == "fuds":
        return generate_fuds_like(args.duration, args.peak, args.dt, seed=seed)
    return generate_dst_like(args.duration, args.peak, args.dt)


def _simulate(args: argparse.Namespace) -> int:
    cycle = (
        ingest_cycle_csv(args.cycle)
        if args.cycle is not None
        else _generated_cycle(args.generator, args, args.cycle_seed)
    )
    log = simulate(
        _params(args.params),
        _curve(args.ocv, args.temperature),
        cycle,
        BatteryState(0.0, 0.0, args.soc0),
        NoiseSpec(args.process_std, args.measurement_std, args.seed),
        method=args.method,
        cutoff_v=args.cutoff,
    )
    log.to_csv(args.out)
    _logger.info("wrote %d samples to %s", len(log), args.out)
    return EXIT_OK


def _estimate(args: argparse.Namespace) -> int:
    log = SimulationLog.read_csv(args.data)
    cfg = KalmanConfig.from_std(
        args.kf_process_std, args.kf_measurement_std, args.p0, riccati=args.riccati
    )
    filt = make_filter(
        args.filter,
        _params(args.params),
        _curve(args.ocv, args.temperature),
        log.dt_s,
        BatteryState(0.0, 0.0, args.soc0),
        gain=ObserverGain(args.k1, args.k2, args.k3),
        cfg=cfg,
        jitter=args.jitter,
    )
    run = run_filter(filt, log)
    checksum = stream_checksum(log.currents, log.voltages)
    run.trace.to_csv(args.out, header_line=f"{STREAM_HEADER}{checksum}")
    scored = len(run.trace) > 0 and bool(np.all(np.isfinite(run.trace.column("soc_true"))))
    if run.failed_at is None and scored:
        metrics = compute_metrics(run.trace, args.threshold)
        write_metrics_csv(
            [(args.filter, FilterResult(run, metrics))],
            args.out.with_name(f"{args.out.stem}.metrics.csv"),
        )
    return exit_status({args.filter: FilterResult(run, None)})


def _compare(args: argparse.Namespace) -> int:
    overrides = {} if args.out is None else {"output_dir": str(args.out)}
    cfg = load_experiment_config(args.config, **overrides)
    result = run_experiment(cfg)
    for name in result.failed:
        _logger.error("%s failed at step %s", name, result[name].failed_at)
    return exit_status(result.filters)


def _tempstudy(args: argparse.Namespace) -> int:
    overrides = {} if args.out is None else {"output_dir": str(args.out)}
    cfg = load_experiment_config(args.config, **overrides)
    study = run_temperature_study(
        cfg,
        _curve(args.truth_ocv, args.truth_temperature),
        _curve(args.filter_ocv, args.filter_temperature),
        filter_name=args.filter,
    )
    return exit_status({"matched": study.matched, "mismatched": study.mismatched})


def _fit(args: argparse.Namespace) -> int:
    log = SimulationLog.read_csv(args.data)
    curve = _curve(args.ocv, args.temperature)
    report = fit_parameters(
        log,
        curve,
        FitSearch(refinements=args.refinements),
        initial_soc=args.initial_soc,
        capacity_as=args.capacity_ah * 3600.0,
    )
    report.save(args.out)
    model_frame(log, curve, report.params, args.initial_soc).to_csv(args.out / "model.csv")
    _logger.info("fitted rms %.6g V", report.rms_v)
    if not args.match_noise:
        return EXIT_OK

    cfg = KalmanConfig.from_std(
        args.kf_process_std, args.kf_measurement_std, p0_diag=(1e-6, 1e-6, 1e-4)
    )
    filt = make_filter(
        "xkf",
        report.params,
        curve,
        log.dt_s,
        BatteryState(0.0, 0.0, args.initial_soc),
        cfg=cfg,
    )
    run = run_filter(filt, log)
    if run.failed_at is not None:
        _logger.error("xkf failed at step %d, no covariance matching", run.failed_at)
        return exit_status({"xkf": FilterResult(run, None)})
    matched = match_noise_covariances(
        run.innovations, run.h_rows, run.p_priors, cfg.r_cov, cfg.q_cov
    )
    path = args.out / "fit_report.txt"
    values: dict[str, object] = dict(read_key_values(path))
    values.update(
        {
            "matched_r_cov": matched.r_cov,
            "matched_q_scale": matched.q_scale,
            "matched_q_diag": tuple(float(v) for v in np.diag(matched.q_cov)),
            "matched_iterations": matched.iterations,
            "matched_converged": matched.converged,
        }
    )
    write_key_values(values, path)
    return EXIT_OK


def _gen_cycle(args: argparse.Namespace) -> int:
    cycle = _generated_cycle(args.kind, args, args.seed)
    save_cycle_csv(cycle, args.out)
    return EXIT_OK


_COMMANDS = {
    "simulate": _simulate,
    "estimate": _estimate,
    "compare": _compare,
    "tempstudy": _tempstudy,
    "fit": _fit,
    "gen-cycle": _gen_cycle,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    _logger.setLevel(level)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, FileNotFoundError) as exc:
        _logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
