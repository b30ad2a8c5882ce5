"""Drive the full CLI battery on every builtin model.

Runs `condstop example <name>` for each shipped model, once human-readable
and once as JSON, checks the two runs agree on the model digest, and checks
the JSON report is byte-stable across repeated runs (timing aside).  Exit
status is the number of failing runs.

Usage:
    python scripts/run_builtin_examples.py
    python scripts/run_builtin_examples.py two-state --show-json
"""

import argparse
import json
import sys
from contextlib import redirect_stdout
from io import StringIO

from condstop import BUILTIN_MODELS
from condstop.cli import main as cli_main


def run_cli(argv):
    buf = StringIO()
    with redirect_stdout(buf):
        code = cli_main(argv)
    return code, buf.getvalue()


def stable_json(argv):
    """Run twice, drop the timing field, return (report, byte_stable)."""
    _, first = run_cli(argv)
    _, second = run_cli(argv)
    a, b = json.loads(first), json.loads(second)
    a.pop("timing_seconds", None)
    b.pop("timing_seconds", None)
    return a, json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "names",
        nargs="*",
        default=sorted(BUILTIN_MODELS),
        help="builtin model names (default: all)",
    )
    parser.add_argument(
        "--show-json", action="store_true", help="also print each JSON report"
    )
    args = parser.parse_args(argv)

    failures = 0
    for name in args.names:
        print(f"=== {name} ===")
        code, text = run_cli(["example", name])
        print(text, end="")
        if code != 0:
            print(f"FAIL: exit code {code}")
            failures += 1
            continue
        report, stable = stable_json(["example", name, "--json"])
        digest_line = next(
            line for line in text.splitlines() if line.startswith("model digest:")
        )
        if not report["model_digest"].startswith(digest_line.split()[-1]):
            print("FAIL: human and JSON runs disagree on the model digest")
            failures += 1
        if not stable:
            print("FAIL: JSON report not byte-stable across runs")
            failures += 1
        if args.show_json:
            print(json.dumps(report, sort_keys=True, indent=2))
        print()
    print(f"{len(args.names)} batteries, {failures} failures")
    return failures


if __name__ == "__main__":
    sys.exit(main())
