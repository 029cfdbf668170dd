import pytest

from potentia.plotting import emit_plots
from potentia.report import SCHEMA, write_report
from potentia.scenarios import BUILTINS, list_scenarios


def test_catalog():
    ids = [sid for sid, _ in list_scenarios()]
    assert ids == list(BUILTINS)
    assert len(set(ids)) == len(ids) == 10


@pytest.mark.parametrize("sid", BUILTINS)
def test_builtin_passes_and_writes(sid, builtin_runs, tmp_path):
    rep, _ = builtin_runs[sid]
    assert rep.exit_code == 0, rep.summary()
    assert rep.gates
    paths = write_report(rep, tmp_path)
    assert all(p.read_text().startswith(SCHEMA) for p in paths)
    emit_plots(tmp_path / "report.csv")


def regime_of(rep):
    (g,) = [g for g in rep.gates if g.name == "regime"]
    return g.detail


def test_regime_classes(builtin_runs):
    assert regime_of(builtin_runs["expkill_indicator_ball"][0]) == "classified zero"
    assert regime_of(builtin_runs["expkill_indicator_quadrant"][0]) == "classified infinite"
    assert regime_of(builtin_runs["consumption_utility"][0]) == "classified zero"
