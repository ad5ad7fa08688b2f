# scripts/run_bundled_configs.py
"""Runs every bundled config through the CLI, one subprocess per command, and reports exit codes."""
import subprocess
import sys
import os

# Add project root to the Python path
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.append(ROOT)
from config import CONFIG_DIR, OUTPUT_DIR

# Which commands make sense for each bundled config
PLAN = {
    "example63.json": ["qdp", "backup", "bound"],
    "selfloop.json": ["qdp", "backup", "bound"],
    "uniform_bound.json": ["qdp", "bound"],
    "fig2_chain.json": ["qtd"],
    "fig3_gaussian.json": ["qdp", "qtd", "field", "trajectory"],
    "fig3_dirac.json": ["qdp", "qtd", "field"],
    "fig3_det_half.json": ["qdp", "qtd", "field"],
}


def run_command(command: str, config_name: str) -> int:
    """Runs one CLI command and returns its exit code; stderr is echoed on failure."""
    out_dir = os.path.join(ROOT, OUTPUT_DIR, os.path.splitext(config_name)[0], command)
    args = [sys.executable, os.path.join(ROOT, "main.py"), command,
            "--config", os.path.join(ROOT, CONFIG_DIR, config_name), "--out", out_dir]
    print(f"🚀 {command} on {config_name}...")
    result = subprocess.run(args, capture_output=True, text=True)
    if result.returncode == 0:
        print(f"✅ {command} on {config_name} complete -> {out_dir}")
    else:
        print(f"❌ ERROR: {command} on {config_name} exited with {result.returncode}")
        print(result.stderr)
    return result.returncode


def main() -> int:
    failures = []
    for config_name, commands in PLAN.items():
        for command in commands:
            code = run_command(command, config_name)
            if code != 0:
                failures.append((config_name, command, code))
    print("-" * 30)
    if failures:
        for config_name, command, code in failures:
            print(f"{config_name} / {command}: exit {code}")
        return 1
    print("All bundled configs ran successfully.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
