"""Command line for the switch-optimal motion planners."""
import argparse
import logging
import sys

import routes
from app import configure_logging, db, load_settings
from services.algebra import GROUPS
from services.controllability import Family
from services.planning_service import PlanningService

logger = logging.getLogger(__name__)

PLANNER_FAMILIES = [f.value for f in Family if f not in (Family.UNCONTROLLABLE, Family.OUT_OF_CATALOG)]
LOCAL_FAMILIES = ['S2', 'SO3', 'T2', 'T5']


def build_parser():
    parser = argparse.ArgumentParser(prog='lie-planner', description=__doc__)
    parser.add_argument('--log-level', help='Override LIE_PLANNER_LOG_LEVEL')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('classify', help='Classify a system into its canonical family')
    p.add_argument('system', help='System spec: JSON file or inline JSON')
    p.set_defaults(handler=routes.cmd_classify)

    p = commands.add_parser('plan', help='Plan a motion from the identity to a target')
    p.add_argument('system', help='System spec: JSON file or inline JSON')
    p.add_argument('--target', required=True, help='Target spec: JSON file or inline JSON')
    p.add_argument('--traj', help='Write the sampled trajectory as CSV')
    p.add_argument('--svg', help='Write a figure of the trajectory as SVG')
    p.add_argument('--force', action='store_true', help='Evaluate the inverse outside its domain')
    p.add_argument('--paper-literal', action='store_true', help='Use the formulas exactly as printed')
    p.add_argument('--dt', type=float, default=0.01, help='Trajectory sampling interval')
    p.set_defaults(handler=routes.cmd_plan)

    p = commands.add_parser('fuzz', help='Round-trip fuzz of a canonical family')
    p.add_argument('--family', required=True, choices=PLANNER_FAMILIES)
    p.add_argument('--systems', type=int, default=100)
    p.add_argument('--targets', type=int, default=100)
    p.add_argument('--seed', type=int, help='Defaults to LIE_PLANNER_SEED')
    p.add_argument('--paper-literal', action='store_true')
    p.set_defaults(handler=routes.cmd_fuzz)

    p = commands.add_parser('demo', help='Reproduce one of the demo scenarios')
    p.add_argument('figure', type=int)
    p.add_argument('--out', default='demo_output')
    p.add_argument('--dt', type=float, default=0.01)
    p.set_defaults(handler=routes.cmd_demo)

    p = commands.add_parser('impossibility', help='Scan the four-switch sequences for a pure translation')
    p.add_argument('--beta', type=float, default=1.0)
    p.add_argument('--t3-bound', type=float, default=100.0)
    p.add_argument('--grid', type=int, default=401)
    p.add_argument('--order', choices=['2121', '1212'], default='2121')
    p.set_defaults(handler=routes.cmd_impossibility)

    p = commands.add_parser('tightness', help='Measure how conservative a local domain is')
    p.add_argument('--family', required=True, choices=LOCAL_FAMILIES)
    p.add_argument('--system', help='Canonical system spec; sampled when omitted')
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--seed', type=int)
    p.set_defaults(handler=routes.cmd_tightness)

    p = commands.add_parser('exp-check', help='Compare closed-form exponentials with the series oracle')
    p.add_argument('--group', required=True, choices=list(GROUPS))
    p.add_argument('--samples', type=int, default=10000)
    p.add_argument('--seed', type=int)
    p.set_defaults(handler=routes.cmd_exp_check)

    p = commands.add_parser('runs', help='Show recent runs from the ledger')
    p.add_argument('--hours', type=float, default=24.0)
    p.set_defaults(handler=routes.cmd_runs)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except ValueError as e:
        routes.fail(str(e))
        return routes.EXIT_INPUT
    configure_logging(args.log_level or settings.log_level)

    if settings.ledger_enabled and not db.enabled:
        try:
            db.init(settings.database_url)
        except Exception as e:
            # planning runs without the ledger
            logger.error(f"Run ledger unavailable: {str(e)}", exc_info=True)
            db.close()

    service = PlanningService(settings)
    return args.handler(args, service)


if __name__ == '__main__':
    sys.exit(main())
