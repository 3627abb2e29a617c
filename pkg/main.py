"""
Main entry point for etreg, the event-triggered output regulation simulator.

Sub-commands:
    simulate  run one scenario and write trace, trigger log, condition and metrics CSVs
    sweep     run a scenario over lists of delta (and sigma) values and write sweep.csv
    verify    check the design data of a scenario and print a report
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from src.controllers.hybridsim import NonFiniteStateError
from src.controllers.scenario_runner import ScenarioRunner
from src.models.enums import ControllerMode, SimStatus
from src.utils.scenario import (
    ScenarioError,
    ScenarioParseError,
    Scenario,
    load_scenario,
    parse_float_list,
)


EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ZENO_GUARD = 2
EXIT_MAX_TRIGGERS = 3
EXIT_NON_FINITE = 4
EXIT_VERIFY_FAILED = 5

STATUS_EXIT_CODES = {
    SimStatus.COMPLETED: EXIT_OK,
    SimStatus.ZENO_GUARD: EXIT_ZENO_GUARD,
    SimStatus.MAX_TRIGGERS: EXIT_MAX_TRIGGERS,
}


def setup_logging(debug: bool = False) -> None:
    """Configure logging for the application.

    Args:
        debug: Enable debug level logging if True
    """
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr),
            logging.FileHandler('etreg.log')
        ]
    )


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments.

    Returns:
        Parsed command line arguments
    """
    parser = argparse.ArgumentParser(
        prog="etreg",
        description="Event-triggered global robust practical output regulation simulator"
    )
    parser.add_argument(
        '--debug',
        action='store_true',
        help='Enable debug logging'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    def add_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('scenario', type=Path, help='Scenario TOML file')
        sub.add_argument(
            '--out',
            type=Path,
            default=None,
            help='Output directory (default: $ETREG_OUT, then the scenario [output] dir, then ./out)'
        )
        sub.add_argument(
            '--paper-literal',
            action='store_true',
            help='Form the first checked coordinate as xi_hat_2 + rho_1(e)'
        )
        sub.add_argument(
            '--controller-mode',
            choices=[mode.value for mode in ControllerMode],
            default=None,
            help='Propagate the controller continuously or with the exact zero-order-hold map'
        )

    add_common(commands.add_parser('simulate', help='Run one scenario'))

    sweep = commands.add_parser('sweep', help='Run a scenario over delta/sigma values')
    add_common(sweep)
    sweep.add_argument('--delta', required=True, help='Comma-separated delta values, e.g. 0.1,0.01')
    sweep.add_argument('--sigma', default=None, help='Comma-separated sigma values (default: scenario sigma)')
    sweep.add_argument('--jobs', type=int, default=None, help='Worker processes (default: CPU count)')

    add_common(commands.add_parser('verify', help='Check design data and print a report'))

    return parser.parse_args(argv)


def resolve_out_dir(args: argparse.Namespace) -> Optional[Path]:
    """--out wins over $ETREG_OUT; None leaves the choice to the scenario."""
    if args.out is not None:
        return args.out
    env_out = os.environ.get('ETREG_OUT')
    return Path(env_out) if env_out else None


def apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    """Apply CLI flags that change scenario fields."""
    changes = {}
    if args.paper_literal:
        changes['paper_literal_vartheta1'] = True
    if args.controller_mode is not None:
        changes['controller_mode'] = ControllerMode(args.controller_mode)
    return scenario.with_overrides(**changes) if changes else scenario


def cmd_simulate(runner: ScenarioRunner) -> int:
    logger = logging.getLogger(__name__)
    outcome = runner.simulate()
    status = outcome.result.status
    if status is not SimStatus.COMPLETED:
        logger.warning(f"Run ended early with status {status}")
    print(f"status={status} triggers={outcome.metrics.trigger_count_total} "
          f"tail_sup_error={outcome.metrics.tail_sup_error!r}")
    return STATUS_EXIT_CODES[status]


def cmd_sweep(runner: ScenarioRunner, deltas: List[float], sigmas: Optional[List[float]]) -> int:
    rows = runner.sweep(deltas, sigmas)
    for row in rows:
        print(f"delta={row.delta!r} sigma={row.sigma!r} status={row.status} triggers={row.trigger_count} "
              f"tail_sup_error={row.tail_sup_error!r} min_dwell={row.min_dwell!r}")
    return EXIT_OK if all(row.ok for row in rows) else EXIT_INVALID


def cmd_verify(runner: ScenarioRunner) -> int:
    logger = logging.getLogger(__name__)
    report = runner.verify()
    for line in report.lines():
        print(line)
    if not report.ok:
        logger.error(f"Verification failed: {report.first_failure.name}: {report.first_failure.detail}")
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point.

    Returns:
        int: Exit code (0 for success, non-zero for error)
    """
    # Parse command line arguments
    args = parse_arguments(argv)

    # Setup logging
    setup_logging(debug=args.debug)
    logger = logging.getLogger(__name__)

    try:
        scenario = apply_overrides(load_scenario(args.scenario), args)
        logger.info(f"Scenario '{scenario.name}' loaded from {args.scenario}")

        if args.command == 'sweep':
            deltas = parse_float_list(args.delta)
            sigmas = parse_float_list(args.sigma) if args.sigma else None
            if args.jobs is not None and args.jobs < 1:
                raise ScenarioParseError("--jobs must be at least 1", field="jobs")
            runner = ScenarioRunner(scenario, out_dir=resolve_out_dir(args), jobs=args.jobs)
            return cmd_sweep(runner, deltas, sigmas)

        runner = ScenarioRunner(scenario, out_dir=resolve_out_dir(args))
        if args.command == 'verify':
            return cmd_verify(runner)
        return cmd_simulate(runner)

    except ScenarioError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    except NonFiniteStateError as e:
        logger.error(f"NonFiniteState: {e}")
        return EXIT_NON_FINITE
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INVALID
    except Exception as e:
        logger.error(f"Unexpected error: {type(e).__name__}: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
