"""Refreeze tests/golden/sample_run from the bundled sample trace.

    python scripts/update_golden.py

Only run this after an intentional change to pipeline output; the test
suite compares fresh runs byte-for-byte against these files.
"""

import shutil
from pathlib import Path

from click.testing import CliRunner

from provfaas import data_path
from provfaas.cli import main

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden" / "sample_run"


def run():
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    args = ["run", "--config", str(data_path("default.toml")),
            "--log", str(data_path("sample_trace.jsonl")), "--out-dir", str(GOLDEN)]
    res = CliRunner().invoke(main, args)
    if res.exit_code != 0:
        raise SystemExit(res.output)
    print(res.output, end="")


if __name__ == "__main__":
    run()
