"""
Command-line entry point of the beable simulator.

    python main.py simulate --scenario scenarios/ex1.cfg --trials 1000 --seed 7 --out out/ex1
    python main.py overlap --d-over-lambda 0 0.25 1 5 --numeric
    python main.py convergence --scenario scenarios/ex2.cfg --T-values 1 2 4
    python main.py stats --out out/ex1
"""

import argparse
import json
import math
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from config.config import Config
from config.scenario_config import (DEFAULT_EMIT, EMIT_FLAGS, RunSettings, ScenarioConfig, load_scenario_file,
                                    parse_emit, parse_pairs)
from models.emitter import EmitterParams
from models.errors import BeableSimulationError, ConfigError
from models.run_result import RunConfig, TimeGrid
from models.spacetime_event import DetectionKind
from physics.abl import NO_PHOTON, PHOTON, ABLEngine
from physics.photon_wave import normalization_discrepancy, overlap_closed_form, overlap_numeric, wavelength
from physics.scenarios import build_scenario
from simulation.convergence import convergence_study
from simulation.result_writer import ResultWriter, dump_json, load_run
from simulation.statistics import recompute_statistics
from simulation.trial_runner import run_trials
from utils.logger import safe_unicode_text, setup_logger

logger = setup_logger('BeableCLI')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# overlap oracle regime: narrow line, photon fully emitted
OVERLAP_GAMMA = 1.0
OVERLAP_OMEGA = 1e8
OVERLAP_TIME = 30.0


def _run_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--scenario', help='scenario file (INI with unit-suffixed keys)')
    parent.add_argument('--kind', choices=['ex1', 'ex2', 'ex3', 'ex4', 'ex5'],
                        help='built-in scenario when no file is given')
    parent.add_argument('--trials', type=int, help='number of Monte Carlo trials')
    parent.add_argument('--seed', type=int, help='master seed; trial i uses stream i')
    parent.add_argument('--out', help='output directory')
    parent.add_argument('--grid', help='beable time grid start:stop:steps')
    parent.add_argument('--mode', choices=['attributed', 'exact'], help='posterior attribution mode')
    parent.add_argument('--detector', choices=['ideal', 'grid'], help='late-time detector model')
    parent.add_argument('--cell', type=float, help='grid cell size L (m)')
    parent.add_argument('--cutoff', type=float, help='grid cutoff frequency (Hz)')
    parent.add_argument('--pairs', help="beable pairs, e.g. 'atom:excited,object:state:obj0'")
    parent.add_argument('--emit', help=f"comma separated subset of {','.join(EMIT_FLAGS)}")
    parent.add_argument('--workers', type=int, help='worker processes')
    parent.add_argument('--format', choices=['csv', 'json'], default='json', help='stdout format')
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='beables',
        description='Monte Carlo simulator of light-cone conditioned beables for photodetection toy models.')
    sub = parser.add_subparsers(dest='command', required=True)
    run = _run_options()

    sub.add_parser('simulate', parents=[run], help='sample records and extract transition statistics')
    sub.add_parser('beables', parents=[run], help='as simulate, also writing beable trajectories')
    sub.add_parser('abl', parents=[run], help='ABL beables post-selected on the late-time outcome')

    conv = sub.add_parser('convergence', parents=[run], help='convergence in plane time and cell size')
    conv.add_argument('--T-values', dest='T_values', type=float, nargs='+', default=[])
    conv.add_argument('--L-values', dest='L_values', type=float, nargs='+', default=[])

    overlap = sub.add_parser('overlap', help='closed-form vs numeric photon overlap')
    overlap.add_argument('--d-over-lambda', dest='ratios', type=float, nargs='+', default=[0.0, 0.25, 0.5, 1.0, 5.0])
    overlap.add_argument('--numeric', action='store_true', help='also evaluate the quadrature')
    overlap.add_argument('--format', choices=['csv', 'json'], default='csv')

    stats = sub.add_parser('stats', help='recompute statistics from an output directory')
    stats.add_argument('--out', required=True)
    stats.add_argument('--format', choices=['csv', 'json'], default='json')
    return parser


def build_run_config(args: argparse.Namespace, extra_emit: Sequence[str] = ()) -> RunConfig:
    """Scenario file (or built-in kind) first, then command-line overrides."""
    if args.scenario:
        scenario, settings = load_scenario_file(args.scenario)
    else:
        scenario, settings = ScenarioConfig.defaults(args.kind or 'ex1'), RunSettings()
    scenario = scenario.with_overrides(mode=args.mode, detector_mode=args.detector,
                                       cell_size=args.cell, cutoff_freq=args.cutoff)

    grid_text = args.grid or settings.grid
    emit = parse_emit(args.emit) if args.emit else (settings.emit or None)
    pairs = parse_pairs(args.pairs) if args.pairs else (settings.pairs or ())
    values: Dict[str, Any] = {
        'trials': args.trials or settings.trials or Config.DEFAULT_TRIALS,
        'seed': args.seed if args.seed is not None else (settings.seed if settings.seed is not None
                                                          else Config.DEFAULT_SEED),
        'time_grid': TimeGrid.parse(grid_text) if grid_text else None,
        'outputs': args.out or settings.outputs or Config.OUTPUT_DIR,
        'workers': args.workers or settings.workers or Config.WORKERS,
        'pairs': pairs,
    }
    if emit is not None:
        values['emit'] = emit
    if extra_emit:
        values['emit'] = tuple(dict.fromkeys(tuple(values.get('emit', DEFAULT_EMIT)) + tuple(extra_emit)))
    return RunConfig(scenario, **values)


def _print_table(frame: pd.DataFrame, fmt: str) -> None:
    if fmt == 'json':
        print(frame.to_json(orient='records', double_precision=15))
    else:
        print(frame.to_csv(index=False, float_format='%.12g', lineterminator='\n'), end='')


def _print_mapping(data: Dict[str, Any], fmt: str) -> None:
    if fmt == 'json':
        print(json.dumps(data, indent=2, sort_keys=True, default=str))
    else:
        _print_table(pd.DataFrame({'key': list(data), 'value': [json.dumps(v, default=str) for v in data.values()]}), 'csv')


def cmd_simulate(args: argparse.Namespace, extra_emit: Sequence[str] = ()) -> int:
    cfg = build_run_config(args, extra_emit)
    stats = run_trials(cfg)
    _print_mapping(stats.to_dict(), args.format)
    return EXIT_OK


def cmd_abl(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    if cfg.scenario.detection_kind != DetectionKind.MOMENTUM:
        raise ConfigError("abl needs a momentum-detection scenario (ex5)")
    scenario = build_scenario(cfg.scenario)
    engine = ABLEngine(scenario)
    stats = run_trials(cfg)
    expected = scenario.born_weights()
    report: Dict[str, Any] = {'outcome_frequencies': stats.outcome_frequencies, 'branch_weights': expected}
    if 'object' in scenario.sites:
        report['object_distribution'] = {label: engine.state_distribution('object', 0.0, label)
                                         for label in (PHOTON, NO_PHOTON)}
    _print_mapping(report, args.format)
    return EXIT_OK


def cmd_overlap(args: argparse.Namespace) -> int:
    emitter = EmitterParams(OVERLAP_GAMMA, OVERLAP_OMEGA)
    lam = wavelength(emitter)
    norm = -math.expm1(-OVERLAP_GAMMA * OVERLAP_TIME)
    k2_ratio = normalization_discrepancy(emitter)
    logger.info(f"📐 K² over the Γ/2πc literature value: {k2_ratio:.6f}")
    rows = []
    for ratio in args.ratios:
        if ratio < 0:
            raise ConfigError(f"d/λ must be non-negative, got {ratio}")
        row: Dict[str, Any] = {'d_over_lambda': ratio, 'closed_form': overlap_closed_form(ratio * lam, lam),
                               'normalization_ratio': k2_ratio}
        if args.numeric:
            value = overlap_numeric(emitter, ratio * lam, OVERLAP_TIME) / norm
            row.update({'numeric_re': value.real, 'numeric_im': value.imag,
                        'relative_error': abs(value.real - row['closed_form']) / max(abs(row['closed_form']), 1e-300)})
        rows.append(row)
    _print_table(pd.DataFrame(rows), args.format)
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    result = convergence_study(cfg, args.T_values, args.L_values)
    writer = ResultWriter(cfg.outputs)
    writer.write_table(result.table, 'convergence.csv')
    dump_json({'version': Config.VERSION, 'seed': cfg.seed, 'config': cfg.to_dict(),
               'convergence': result.to_dict()}, writer.out_dir / 'convergence.json')
    _print_table(result.table, args.format)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    stats = recompute_statistics(load_run(args.out))
    _print_mapping(stats.to_dict(), args.format)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if not Config.validate():
        logger.error(safe_unicode_text("❌ Invalid environment configuration"))
        return EXIT_CONFIG
    handlers = {
        'simulate': cmd_simulate,
        'beables': lambda a: cmd_simulate(a, extra_emit=('trajectories',)),
        'abl': cmd_abl,
        'overlap': cmd_overlap,
        'convergence': cmd_convergence,
        'stats': cmd_stats,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        logger.error(safe_unicode_text(f"❌ Configuration error: {e}"))
        return EXIT_CONFIG
    except (BeableSimulationError, OSError, ValueError, KeyError) as e:
        logger.error(safe_unicode_text(f"❌ {args.command} failed: {e}"))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
