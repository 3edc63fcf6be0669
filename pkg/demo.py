#!/usr/bin/env python3
"""
slicesched Demo Script - Walk through the command line tools
"""

import subprocess
import sys
import time
from pathlib import Path

OUT = "results/demo"


def run_command(cmd, description):
    """Run a command and time it"""
    print(f"\n🔄 {description}")
    print(f"Running: {' '.join(cmd)}")

    start_time = time.time()
    result = subprocess.run(cmd, capture_output=True, text=True)
    elapsed = time.time() - start_time

    if result.returncode == 0:
        print(f"✅ Completed in {elapsed:.1f}s")
        if result.stdout:
            print(result.stdout.strip())
    else:
        print(f"❌ Failed after {elapsed:.1f}s (exit {result.returncode})")
        if result.stderr:
            print(result.stderr.strip())
        return False

    return True


def main():
    print("📡 slicesched Demo")
    print("=" * 50)

    if not Path("pyproject.toml").exists():
        print("❌ Please run from the slicesched project directory")
        return 1

    cli = [sys.executable, "-m", "utils.cli"]
    steps = [
        (cli + ["validate-config", "config/experiment.yaml"], "🧾 Checking the experiment file"),
        (cli + ["gen-trace", f"{OUT}/small.mmch", "--antennas", "64", "--users", "16",
                "--ttis", "20", "--clusters", "4,4,4,4"], "📶 Writing a channel trace"),
        (cli + ["run", "--preset", "small-hc-loose", "--scheduler", "drs", "--ttis", "20",
                "--trace", f"{OUT}/small.mmch", "--output-dir", OUT], "🏃 Running DRS on the trace"),
        (cli + ["compare", "--preset", "small-hc-loose", "--ttis", "20",
                "--schedulers", "greedy,gp,dro,drs", "--plot", "--output-dir", OUT],
         "⚖️  Comparing schedulers on identical channels"),
        (cli + ["bench", "--preset", "small-hc-loose", "--scheduler", "dro_para",
                "--repetitions", "10", "--output-dir", OUT], "⏱️  Timing parallel DRO decisions"),
    ]

    total_start = time.time()
    Path(OUT).mkdir(parents=True, exist_ok=True)
    for cmd, desc in steps:
        if not run_command(cmd, desc):
            print(f"❌ Demo failed at: {desc}")
            return 1
        time.sleep(0.5)

    total_elapsed = time.time() - total_start
    print("\n" + "=" * 50)
    print(f"🎉 Demo finished in {total_elapsed:.1f}s")
    print(f"📁 Results in {OUT}/ (open comparison.html in a browser)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
