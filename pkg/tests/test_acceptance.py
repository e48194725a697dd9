"""Acceptance criteria at reference resolution.

Each criterion runs the named experiments of ``configs/`` through the CLI
driver, prints one PASS/FAIL line and asserts.  Experiments shared by several
criteria run once per session.  Run directly with ``python tests/test_acceptance.py``.
"""
import tempfile
import time
from pathlib import Path

import pytest

from hardylab.cli import execute, load_config

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
_CACHE = {}


def _run(name):
    if name not in _CACHE:
        cfg = load_config(CONFIGS / f"{name}.json")
        t0 = time.perf_counter()
        res = execute(cfg, tempfile.mkdtemp(prefix=f"acceptance_{name}_"))
        _CACHE[name] = (res, time.perf_counter() - t0)
    return _CACHE[name]


def _select(names, keep=lambda a: True):
    out = []
    for name in names:
        res, _ = _run(name)
        out += [(name, a) for a in res.assertions if keep(a)]
    return out


def _verdict(capsys, number, title, checks, extra=()):
    """Print one line per criterion: PASS/FAIL with the failing (or the last) assertion."""
    failed = [(n, a) for n, a in checks if not a.passed]
    extra_failed = [msg for ok, msg in extra if not ok]
    ok = bool(checks) and not failed and not extra_failed
    if failed:
        n, a = failed[0]
        detail = f"{n}: {a.describe()}" + (f" (+{len(failed) - 1} more)" if len(failed) > 1 else "")
    elif extra_failed:
        detail = extra_failed[0]
    else:
        detail = f"{len(checks)} assertions" + "".join(f"; {msg}" for _, msg in extra)
    with capsys.disabled():
        print(f"\ncriterion {number:2d} [{title}]: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_01_reproducing_property(capsys):
    checks = _select(["repro_ball"], lambda a: a.name in ("max_error", "order"))
    wall = _run("repro_ball")[1]
    _verdict(capsys, 1, "reproducing property", checks, [(wall <= 120, f"runtime {wall:.1f} s <= 120 s")])


def test_criterion_02_constant_reproduction(capsys):
    checks = _select(["repro_ball", "repro_complex_ellipsoid"], lambda a: a.name == "constant_error")
    _verdict(capsys, 2, "constant reproduction", checks)


def test_criterion_03_ball_leray_equals_szego(capsys):
    checks = _select(["identities_ball"], lambda a: a.name == "ball_kernel_deviation")
    _verdict(capsys, 3, "ball Cauchy-Leray = Szego", checks)


def test_criterion_04_flow_invariants(capsys):
    checks = _select(["flow_ball"])
    wall = _run("flow_ball")[1]
    _verdict(capsys, 4, "flow invariants", checks, [(wall <= 60, f"runtime {wall:.1f} s <= 60 s")])


def test_criterion_05_kernel_estimates(capsys):
    checks = _select(["kernel_ball", "kernel_perturbed"])
    _verdict(capsys, 5, "kernel estimates", checks)


def test_criterion_06_projection_identities(capsys):
    names = ("CS_minus_S", "SC_minus_C", "self_adjoint", "idempotence")
    checks = _select(["identities_ball", "identities_perturbed"], lambda a: a.name.startswith(names))
    walls = [_run(n)[1] for n in ("identities_ball", "identities_perturbed")]
    _verdict(capsys, 6, "projection identities", checks, [(max(walls) <= 600, f"runtime {max(walls):.1f} s <= 600 s")])


def test_criterion_07_hardy_characterizations(capsys):
    checks = _select(["identities_ball", "identities_perturbed"], lambda a: a.name.startswith(("hardy[", "separation[")))
    n_holo = sum(a.name.startswith("hardy[") for _, a in checks)
    _verdict(capsys, 7, "Hardy characterizations", checks, [(n_holo == 20, f"{n_holo} holomorphic trace checks")])


def test_criterion_08_density(capsys):
    checks = _select(["density_ball"])
    _verdict(capsys, 8, "density of approximants", checks)


def test_criterion_09_norm_equivalences(capsys):
    checks = _select(["norms_ball", "norms_perturbed"])
    _verdict(capsys, 9, "norm equivalences", checks)


def test_criterion_10_weighted_projections(capsys):
    checks = _select(["szego_ball", "szego_perturbed"])
    _verdict(capsys, 10, "weighted projections", checks)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
