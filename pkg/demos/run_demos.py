"""Run the sample configs through the command-line runner and list the reports.

Usage: python3 demos/run_demos.py [config ...]
"""
import pathlib
import subprocess
import sys

HERE = pathlib.Path(__file__).resolve().parent
COMMANDS = {
    "validate_desk.ini": "validate-params",
    "field_check.ini": "field-check",
    "sweep_small.ini": "dissipation-sweep",
    "hom_step_small.ini": "hom-step",
}


def main(names):
    for name in names or COMMANDS:
        cfg = HERE / "configs" / name
        cmd = ["homlab", COMMANDS[name], "--config", str(cfg)]
        print("$", " ".join(cmd), flush=True)
        code = subprocess.call(cmd, cwd=HERE)
        print(f"  exit {code}")
    for path in sorted((HERE / "out").rglob("*")):
        if path.is_file():
            print(" ", path.relative_to(HERE))


if __name__ == "__main__":
    main(sys.argv[1:])
