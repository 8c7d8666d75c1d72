import json

import pytest

from nordfluid.cli import SCENARIOS, main, parse_config
from nordfluid.errors import InvalidConfig, UnknownScenario
from nordfluid.solver import DIAGNOSTIC_COLUMNS


@pytest.mark.parametrize("doc, path", [
    ({"solver": {"T": "one"}}, "solver.T"),
    ({"grid": {"pts": 64}}, "grid.pts"),
    ({"dependence": {"scales": [1e-2, -1.0]}}, "dependence.scales[1]"),
    ({"solver": {"cfl": 0.9}}, "solver.cfl"),
    ({"grid": {"extent": 2.0}}, "grid.extent"),
    ({"seed": 1.5}, "seed"),
])
def test_invalid_config_reports_path(doc, path):
    with pytest.raises(InvalidConfig) as info:
        parse_config(doc)
    assert path in str(info.value)


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        parse_config({"scenario": "no-such-thing"})


def test_empty_config_selects_suite():
    cfg = parse_config({})
    assert cfg.scenario is None and cfg.canonical
    assert cfg.grid.points == 512 and cfg.solver.T == 1.0


def _write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_main_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", _write(tmp_path, {"scenario": "nope"})]) == 2
    assert main(["run", "--config", _write(tmp_path, {"solver": {"T": -1}})]) == 2
    err = capsys.readouterr().err
    assert "solver.T" in err


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIOS)
    assert len(SCENARIOS) == 8


def test_background_scenario_passes_and_reruns_identically(tmp_path, capsys):
    cfg = _write(tmp_path, {"scenario": "background-residual"})
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        outs.append((out / "background.csv").read_bytes())
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] is True
    assert outs[0] == outs[1]
    assert "PASS background-residual" in capsys.readouterr().out


def test_gaussian_pulse_diagnostics_header(tmp_path):
    cfg = _write(tmp_path, {"scenario": "gaussian-pulse-1d", "samples": 200})
    out = tmp_path / "pulse"
    main(["run", "--config", cfg, "--out", str(out)])
    first = (out / "diagnostics.csv").read_text().splitlines()[0]
    assert first == ",".join(DIAGNOSTIC_COLUMNS)
