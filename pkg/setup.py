#!/usr/bin/env python3
"""
Install helper for the beable simulator.

Installs requirements.txt into the running interpreter, checks the scientific
stack imports, prepares .env and the log/output directories, and finishes with
a smoke check that every shipped scenario file parses and builds.
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent
MIN_PYTHON = (3, 9)
# import name -> distribution name in requirements.txt
STACK = {
    'dotenv': 'python-dotenv',
    'numpy': 'numpy',
    'pandas': 'pandas',
    'scipy': 'scipy',
    'colorlog': 'colorlog',
    'pytest': 'pytest',
    'hypothesis': 'hypothesis',
}


def pip(*args):
    """Run pip in this interpreter; (ok, output)."""
    proc = subprocess.run([sys.executable, '-m', 'pip', *args], capture_output=True, text=True)
    return proc.returncode == 0, (proc.stdout if proc.returncode == 0 else proc.stderr)


def install_requirements():
    print("📦 Installing requirements.txt ...")
    ok, output = pip('install', '-r', str(ROOT / 'requirements.txt'))
    if not ok:
        print(f"❌ pip failed:\n{output.strip()}")
    return ok


def check_stack():
    print("\n🔍 Checking the numerical stack...")
    missing = []
    for module, dist in STACK.items():
        try:
            imported = __import__(module)
        except ImportError as e:
            print(f"❌ {dist}: {e}")
            missing.append(dist)
            continue
        print(f"✅ {dist} {getattr(imported, '__version__', '')}".rstrip())
    return not missing


def prepare_environment():
    print("\n📝 Preparing .env, logs/ and out/ ...")
    template, env = ROOT / '.env.example', ROOT / '.env'
    if env.exists():
        print("✅ .env already present, left untouched")
    elif template.exists():
        env.write_text(template.read_text())
        print("✅ .env created from .env.example")
    else:
        print("⚠️  .env.example missing; Config falls back to its defaults")
    for name in ('logs', 'out'):
        (ROOT / name).mkdir(exist_ok=True)
    return True


def smoke_check_scenarios():
    """Parse and build every scenarios/*.cfg."""
    print("\n🔭 Building shipped scenarios...")
    sys.path.insert(0, str(ROOT))
    from config.scenario_config import load_scenario_file
    from models.errors import BeableSimulationError
    from physics.scenarios import build_scenario

    ok = True
    for path in sorted((ROOT / 'scenarios').glob('*.cfg')):
        try:
            scenario, settings = load_scenario_file(str(path))
            built = build_scenario(scenario)
        except BeableSimulationError as e:
            print(f"❌ {path.name}: {e}")
            ok = False
            continue
        print(f"✅ {path.name}: {built} ({settings.trials or 'default'} trials)")
    return ok


def main():
    print("🔭 Beable Simulator Setup")
    print("=" * 50)
    if sys.version_info < MIN_PYTHON:
        print(f"❌ Python {'.'.join(map(str, MIN_PYTHON))}+ is required, found {sys.version.split()[0]}")
        sys.exit(1)

    for step in (install_requirements, check_stack, prepare_environment, smoke_check_scenarios):
        if not step():
            print(f"\n❌ Setup stopped at {step.__name__}")
            sys.exit(1)

    print("\n" + "=" * 50)
    print("🎉 Ready. Try:")
    print("   python -m pytest -m 'not slow'")
    print("   python main.py simulate --scenario scenarios/ex1.cfg --out out/ex1")
    print("   python main.py overlap --numeric")


if __name__ == "__main__":
    main()
