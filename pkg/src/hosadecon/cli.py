"""
hosadecon CLI - blind ultrasonic deconvolution from the command line
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml
from rich import box
from rich.console import Console
from rich.markup import escape
from rich.table import Table
from rich.theme import Theme

from .core.config import PipelineConfig, Settings, TraceFormat, resolve_value
from .core.errors import ConfigError, HosaDeconError
from .core.logging import configure_logging
from .stages.pipeline_runner import STAGE_ORDER, PipelineRunner

THEME = Theme(
    {
        "primary": "bright_cyan",
        "success": "bright_green",
        "warning": "yellow",
        "error": "red",
        "muted": "dim white",
    }
)

# Console with the shared theme
console = Console(theme=THEME, highlight=False)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

COMMAND_STAGES = {
    "synth": ["synth"],
    "estimate-pulse": ["estimate-pulse"],
    "deconvolve": ["deconvolve"],
    "metrics": ["metrics"],
    "pipeline": list(STAGE_ORDER),
}


class HosaDeconCLI:
    """Subcommands for each processing step plus the full pipeline"""

    def __init__(self, console: Console = console):
        self.console = console
        # markup below names these styles
        self.console.push_theme(THEME)

    def create_argument_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="JSON or YAML config file")
        common.add_argument("-o", "--output", help="Output directory")
        common.add_argument("--manifest", help="Dataset manifest to process")
        common.add_argument("--jobs", type=int, help="Worker threads for per-line work")
        common.add_argument("--seed", type=int, help="Random seed of the dataset")
        common.add_argument(
            "--format",
            choices=[f.value for f in TraceFormat],
            help="Series file format (default: binary_f32le)",
        )
        common.add_argument(
            "--use-true-pulse",
            action="store_true",
            help="Deconvolve with the stored ground-truth pulse",
        )
        common.add_argument(
            "-v", "--verbose", action="store_true", help="Debug logging"
        )
        common.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

        parser = argparse.ArgumentParser(
            prog="hosadecon",
            description="hosadecon - blind deconvolution of ultrasonic RF traces",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  hosadecon pipeline -o run1 --seed 7        # Synthetic data end to end
  hosadecon estimate-pulse --manifest data/manifest.json -o run2
  hosadecon deconvolve -o run2 --use-true-pulse --jobs 4
            """,
        )
        sub = parser.add_subparsers(dest="command", required=True)

        synth = sub.add_parser(
            "synth", parents=[common], help="Write a synthetic dataset"
        )
        synth.add_argument("--lines", type=int, help="Number of lines (default 30)")
        synth.add_argument("--snr-db", help="Noise level in dB, or 'inf'")

        estimate = sub.add_parser(
            "estimate-pulse", parents=[common], help="Blind pulse estimation"
        )
        estimate.add_argument("--ensemble", type=int, help="Traces used (default 16)")

        sub.add_parser("deconvolve", parents=[common], help="Deconvolve every line")
        sub.add_parser("metrics", parents=[common], help="Axial-resolution gain")

        pipeline = sub.add_parser(
            "pipeline", parents=[common], help="All steps in sequence"
        )
        pipeline.add_argument("--lines", type=int, help="Number of synthetic lines")
        pipeline.add_argument("--snr-db", help="Noise level in dB, or 'inf'")
        pipeline.add_argument(
            "--no-synth",
            action="store_true",
            help="Process an existing manifest instead of synthesizing",
        )
        return parser

    def load_config_file(self, path: str) -> Dict[str, Any]:
        """Read a config file; YAML is a superset of JSON, so both parse"""
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = yaml.safe_load(handle) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return data

    def create_config_from_args(self, args: argparse.Namespace) -> PipelineConfig:
        """Config file, then flags on top; environment fills what is left"""
        data = self.load_config_file(args.config) if args.config else {}
        data = {**data, "synth": dict(data.get("synth") or {})}
        data["hosa"] = dict(data.get("hosa") or {})

        overrides = {
            "output_dir": args.output,
            "manifest": args.manifest,
            "jobs": args.jobs,
            "seed": args.seed,
            "trace_format": args.format,
            "n_lines": getattr(args, "lines", None),
        }
        for key, flag in overrides.items():
            value = resolve_value(flag, data.get(key))
            if value is not None:
                data[key] = value
        if args.use_true_pulse:
            data["use_true_pulse"] = True

        snr_db = getattr(args, "snr_db", None)
        if snr_db is not None:
            data["synth"]["snr_db"] = snr_db
        ensemble = getattr(args, "ensemble", None)
        if ensemble is not None:
            data["hosa"]["ensemble"] = ensemble

        data["run_synth"] = args.command == "synth" or (
            args.command == "pipeline" and not args.no_synth
        )
        return PipelineConfig.from_dict(data)

    def show_summary(self, summary: Dict[str, Any]):
        """One table row per reported value"""
        table = Table(box=box.SIMPLE, show_header=True, header_style="primary")
        table.add_column("Stage")
        table.add_column("Result")
        table.add_column("Value", justify="right")
        for stage, results in summary["stages"].items():
            for key, value in results.items():
                if isinstance(value, list):
                    value = f"{len(value)} entries"
                elif isinstance(value, float):
                    value = f"{value:.4g}"
                table.add_row(stage, key, escape(str(value)))
        self.console.print(table)

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse arguments, run the selected stages, return the exit code"""
        parser = self.create_argument_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)

        level = Settings().log_level
        if args.verbose:
            level = "DEBUG"
        elif args.quiet:
            level = "WARNING"
        configure_logging(level, console=Console(stderr=True))

        try:
            config = self.create_config_from_args(args)
            runner = PipelineRunner(config, stages=COMMAND_STAGES[args.command])
            with self.console.status(
                f"[primary]Running {args.command}...[/]", spinner="dots"
            ):
                summary = runner.run()
        except KeyboardInterrupt:
            self.console.print("\n[muted]Cancelled[/]")
            return EXIT_FAILURE
        except ConfigError as e:
            self.console.print(f"[error]Error: {escape(str(e))}[/]")
            return EXIT_USAGE
        except (HosaDeconError, OSError) as e:
            self.console.print(f"[error]Error: {escape(str(e))}[/]")
            return EXIT_FAILURE

        if not args.quiet:
            self.show_summary(summary)
        self.console.print(
            f"[success]✓[/] {args.command} finished in "
            f"{escape(str(Path(config.output_dir)))}"
        )
        return EXIT_OK


def main(argv: Optional[List[str]] = None):
    """Entry point"""
    cli = HosaDeconCLI()
    sys.exit(cli.run(argv))


if __name__ == "__main__":
    main()
