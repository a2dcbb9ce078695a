"""
CatSynth command-line entry point.

Usage:
    python src/CatSynth.py run --config scenario.json [--out DIR] [--seed N]
    python src/CatSynth.py sweep-theta --config scenario.json --workers 4
    python src/CatSynth.py fig1 --config scenario.json
    python src/CatSynth.py tomo --config scenario.json --seed 7
    python src/CatSynth.py wigner --config scenario.json --cutoff 12

Exit codes: 0 success, 2 config error, 3 stage failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

from settings_manager import SETTINGS_FILE, ConfigError, load_config
from scenario_runner import StageError, read_version, run_fig1, run_scenario, run_tomography, run_wigner, sweep_theta

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

_COMMANDS = {
    "run": "herald, then every stage the config enables",
    "sweep-theta": "one run per half-wave-plate angle plus a summary CSV",
    "fig1": "best-fit fidelity of the core state along the mixing ratio",
    "tomo": "herald, sample homodyne data and reconstruct the state",
    "wigner": "herald and tabulate the Wigner function",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=SETTINGS_FILE, help="scenario config JSON (default: %(default)s)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="sampling seed (overrides seed)")
    common.add_argument("--workers", type=int, help="worker threads (overrides workers)")
    common.add_argument("--cutoff", type=int, help="Fock cutoff per mode (overrides scenario.cutoff)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")

    parser = argparse.ArgumentParser(prog="CatSynth", description="Heralded squeezed-cat synthesis simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {read_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args.config, output_dir=args.out, seed=args.seed,
                             workers=args.workers, cutoff=args.cutoff)
        if args.command == "tomo" and config.tomography is None:
            raise ConfigError("the tomo command needs a 'tomography' block")
        if args.command == "sweep-theta" and not config.thetas_deg:
            raise ConfigError("the sweep-theta command needs a 'sweep' block")
    except ConfigError as e:
        logger.error("config error: %s", e)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            manifest = run_scenario(config)
        elif args.command == "sweep-theta":
            manifest = sweep_theta(config)
        elif args.command == "fig1":
            manifest = run_fig1(config)
        elif args.command == "tomo":
            manifest = run_tomography(config)
        else:
            manifest = run_wigner(config)
    except StageError as e:
        print(f"stage '{e.stage}' failed: {e.cause}", file=sys.stderr)
        return EXIT_STAGE

    print(f"{len(manifest.files)} file(s) written to {config.output_dir}")
    if manifest.failures:
        print(f"{len(manifest.failures)} run(s) failed; see manifest.json", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
