"""
Main entry point of the weighted geometry verification toolkit
Command line: verify, solve, probe and list
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from config_loader import get_config
from exceptions import ScenarioError
from reporting import emit
from scenario_loader import load_scenario, shipped_scenarios
from scenario_runner import run
from settings import (
    BASIS_KINDS,
    BOUNDARY_CHECK_IDS,
    EXIT_CHECK_FAILURE,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERIC_FAILURE,
    EXIT_PASS,
    FIELD_PRESETS,
    IDENTITY_IDS,
    INTERVAL_FAMILIES,
    LINEARIZATION_CHECK_IDS,
    MODEL_NAMES,
    PROBE_HYPOTHESES,
    REPORT_FORMATS,
    SOLVER_TASKS,
    TOOL_NAME,
    WEIGHTED_CHECK_IDS,
)

logger = logging.getLogger(__name__)


def build_parser(config) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=TOOL_NAME, description=config.APP_TITLE)
    p.add_argument("-v", "--verbose", action="count", default=0, help="INFO with -v, DEBUG with -vv")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_command(name, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--scenario", required=True,
                         help="scenario file, or the name of a shipped scenario")
        cmd.add_argument("--resolution", type=int, default=None, help="quadrature nodes and basis size")
        cmd.add_argument("--tolerance", type=float, default=None, help="identity tolerance")
        cmd.add_argument("--format", choices=REPORT_FORMATS, default=config.OUTPUT_FORMAT)
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out", default=None, help="write the report here instead of stdout")
        cmd.add_argument("--timing", action="store_true", help="record wall time in the report")
        cmd.add_argument("--ledger", default=config.LEDGER_PATH or None,
                         help="SQLite file archiving the run")
        return cmd

    scenario_command("verify", "run the scenario's checks and its solver task")
    solve = scenario_command("solve", "run the solver task only")
    solve.add_argument("--task", choices=[t for t in SOLVER_TASKS if t != "probe"], default=None)
    scenario_command("probe", "run the nonexistence probe ladder")

    listing = sub.add_parser("list", help="print the registries")
    listing.add_argument("--format", choices=["text", "json"], default="text")
    return p


def resolve_scenario_path(value: str) -> Path:
    path = Path(value)
    if path.is_file():
        return path
    for shipped in shipped_scenarios():
        if shipped.stem == value:
            return shipped
    return path


def registries() -> dict:
    return {
        "models": MODEL_NAMES,
        "densities": FIELD_PRESETS,
        "identities": IDENTITY_IDS,
        "weighted": WEIGHTED_CHECK_IDS,
        "linearization": LINEARIZATION_CHECK_IDS,
        "boundary": BOUNDARY_CHECK_IDS,
        "bases": BASIS_KINDS,
        "interval_families": INTERVAL_FAMILIES,
        "solver_tasks": SOLVER_TASKS,
        "probe_hypotheses": PROBE_HYPOTHESES,
        "scenarios": [p.stem for p in shipped_scenarios()],
    }


def list_registries(fmt: str, config) -> str:
    data = registries()
    info = config.get_info_dict()
    if fmt == "json":
        return json.dumps(dict(data, config=info), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    lines = []
    for key, values in data.items():
        lines.append(f"{key}:")
        lines.extend(f"  {v}" for v in values)
    for section, entries in info.items():
        lines.append(f"{section}:")
        lines.extend(f"  {name}: {value}" for name, value in entries.items())
    return "\n".join(lines) + "\n"


def write_output(payload: bytes, out) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        logger.info(f"Report written to {path}")
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()


def archive(report, ledger: str) -> None:
    from database import get_session, init_database, record_run
    Path(ledger).parent.mkdir(parents=True, exist_ok=True)
    session = get_session(init_database(ledger))
    try:
        record_run(session, report)
    finally:
        session.close()


def exit_code(report) -> int:
    if report.numeric_failure:
        return EXIT_NUMERIC_FAILURE
    return EXIT_PASS if report.passed else EXIT_CHECK_FAILURE


def execute(args, config) -> int:
    try:
        scenario = load_scenario(resolve_scenario_path(args.scenario), config)
        scenario = scenario.with_overrides(args.resolution, args.tolerance, args.seed)
        if args.command == "verify":
            report = run(scenario, config, timing=args.timing)
        elif args.command == "solve":
            if scenario.solver is None:
                raise ScenarioError(f"Scenario '{scenario.name}' has no [solver] section")
            task = args.task or (scenario.solver["task"] if scenario.solver["task"] != "probe" else "eigen")
            report = run(scenario, config, checks=False, task=task, timing=args.timing)
        else:
            if scenario.solver is None:
                raise ScenarioError(f"Scenario '{scenario.name}' has no [solver] section")
            report = run(scenario, config, checks=False, task="probe", timing=args.timing)
    except (ScenarioError, ValueError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR

    write_output(emit(report, args.format, config), args.out)
    if args.ledger:
        archive(report, args.ledger)
    return exit_code(report)


def main(argv=None) -> int:
    try:
        config = get_config()
    except FileNotFoundError as e:
        print(f"Error loading configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    parser = build_parser(config)
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s - %(name)s - %(message)s", stream=sys.stderr)

    if args.command == "list":
        sys.stdout.write(list_registries(args.format, config))
        return EXIT_PASS
    return execute(args, config)


if __name__ == "__main__":
    sys.exit(main())
