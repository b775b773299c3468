"""Shared, memoized scenario runs for the test modules."""
from landauer_cm.config import parse_config
from landauer_cm.runner import run_scenario, run_sweep

_CACHE = {}
ACCEPTANCE_LINES = []


def preset_run(preset, extra=""):
    key = ("run", preset, extra)
    if key not in _CACHE:
        _CACHE[key] = run_scenario(parse_config(extra, preset=preset), write=False)
    return _CACHE[key]


def preset_sweep(preset, extra=""):
    key = ("sweep", preset, extra)
    if key not in _CACHE:
        _CACHE[key] = run_sweep(parse_config(extra, preset=preset), write=False, workers=1)
    return _CACHE[key]


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
