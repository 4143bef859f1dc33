"""Command-line front end: ``ppthq <command> [--flags]``.

Exit status is 0 when every scenario passes, 1 when any fails (the failing
scenario ids go to stderr), 2 for invalid flags and 3 when a requested size
exceeds a capacity limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import campaigns
from .errors import DimensionLimitError, DomainError
from .linalg import matrix_to_dict
from .states import build_family_state

COMMANDS = ("family", "verify-duality", "verify-behavior", "verify-sequential", "verify-multicopy", "full-suite")

# frozen CSV column order: verification columns, then the family-only ones
CSV_COLUMNS = campaigns.VERIFY_FIELDS + tuple(
    f for f in campaigns.FAMILY_FIELDS if f not in campaigns.VERIFY_FIELDS
)

_DEFAULTS = {
    "family": {"d": 4},
    "verify-duality": {"d": 9, "trials": 1000},
    "verify-behavior": {"d": 4, "trials": 200, "settings": 4, "outcomes": 4},
    "verify-sequential": {"d": 4, "trials": 100, "settings": 2, "outcomes": 2, "chain_len": 3},
    "verify-multicopy": {"d": 4, "trials": 50, "settings": 4, "outcomes": 4, "copies": 2},
    "full-suite": {},
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    d: int = 4
    seed: int = 0
    trials: int = 100
    settings: int = 2
    outcomes: int = 2
    chain_len: int = 3
    copies: int = 2
    output_path: Path | None = None
    format: str = "json"
    dump_state: Path | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.trials < 1:
            raise UsageError("--trials must be at least 1")
        if not 1 <= self.settings <= 4:
            raise UsageError("--settings must be in 1..4")
        if not 2 <= self.outcomes <= 4:
            raise UsageError("--outcomes must be in 2..4")
        if self.chain_len < 1:
            raise UsageError("--chain-len must be at least 1")
        if self.copies < 1:
            raise UsageError("--copies must be at least 1")
        if self.command == "verify-duality":
            if self.d < 2:
                raise UsageError("--d must be at least 2 for verify-duality")
        elif self.command != "full-suite" and (self.d % 2 or not 4 <= self.d <= 64):
            raise UsageError("--d must be even and in 4..64")


def execute(config: RunConfig) -> list[dict]:
    """Run the configured campaign and return its reports in scenario order."""
    c = config
    if c.command == "family":
        report = campaigns.family_report(c.d)
        if c.dump_state is not None:
            mat = build_family_state(c.d).state.mat
            c.dump_state.write_text(json.dumps(matrix_to_dict(mat)))
        return [report]
    if c.command == "verify-duality":
        return [campaigns.verify_duality(c.d, c.trials, c.seed)]
    if c.command == "verify-behavior":
        return [campaigns.verify_behavior(c.d, c.trials, c.seed, c.settings, c.outcomes)]
    if c.command == "verify-sequential":
        return [campaigns.verify_sequential(c.d, c.trials, c.seed, c.settings, c.outcomes, c.chain_len)]
    if c.command == "verify-multicopy":
        return [campaigns.verify_multicopy(c.d, c.copies, c.trials, c.seed, c.settings, c.outcomes)]
    return campaigns.full_suite(c.seed)


def render(config: RunConfig, reports: list[dict]) -> str:
    if config.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in CSV_COLUMNS})
        return buf.getvalue()
    doc = {
        "command": config.command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "reports": reports,
    }
    return json.dumps(doc, indent=2) + "\n"


def run(config: RunConfig, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        config.validate()
        reports = execute(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 2
    except DimensionLimitError as exc:
        print(f"capacity error: dimension {exc.dim} exceeds limit {exc.limit}", file=stderr)
        return 3
    except DomainError as exc:
        print(f"usage error: {exc}", file=stderr)
        return 2

    text = render(config, reports)
    if config.output_path is None:
        stdout.write(text)
    else:
        config.output_path.write_text(text)

    failing = [r["scenario_id"] for r in reports if not r["pass"]]
    if failing:
        print("failing scenarios: " + ", ".join(failing), file=stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppthq",
        description="Verify that PPT states admit low-Schmidt-number hidden quantum models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--d", type=int, help="local dimension (total matrix dim for verify-duality)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int)
        p.add_argument("--settings", type=int, help="maximum settings per party (or per step)")
        p.add_argument("--outcomes", type=int, help="maximum outcomes per setting (or per step)")
        p.add_argument("--chain-len", type=int)
        p.add_argument("--copies", type=int)
        p.add_argument("--output", type=Path, help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "family":
            p.add_argument("--dump-state", type=Path, help="also write the state matrix as JSON")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = dict(_DEFAULTS[args.command])
    for key in ("d", "trials", "settings", "outcomes", "chain_len", "copies"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    return RunConfig(
        command=args.command,
        seed=args.seed,
        output_path=args.output,
        format=args.format,
        dump_state=getattr(args, "dump_state", None),
        **values,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
