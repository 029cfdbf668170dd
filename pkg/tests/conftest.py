import time

import pytest

from potentia.scenarios import BUILTINS, builtin_config, run_scenario

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def builtin_runs():
    """Every builtin scenario run once with its shipped config: id -> (report, seconds)."""
    out = {}
    for sid in BUILTINS:
        t0 = time.perf_counter()
        rep = run_scenario(builtin_config(sid))
        out[sid] = (rep, time.perf_counter() - t0)
    return out


@pytest.fixture
def record_ac():
    def record(ac: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE[ac] = (bool(ok), detail)
        print(f"{ac} {'PASS' if ok else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(_ACCEPTANCE, key=lambda k: int(k[2:])):
        ok, detail = _ACCEPTANCE[ac]
        terminalreporter.write_line(f"{ac} {'PASS' if ok else 'FAIL'} {detail}")
