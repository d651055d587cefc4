from __future__ import annotations

import json
from pathlib import Path

import pytest

from anisomult.cli import main
from anisomult.errors import ValidationError
from anisomult.scenario import load_config, validate_appendices, validate_scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, record):
    path = tmp_path / name
    path.write_text(json.dumps(record))
    return str(path)


@pytest.fixture(scope="module")
def adversarial_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("adv")
    code = main(["verify-appendices", str(CONFIGS / "appendices_adversarial.json"), "--out", str(out),
                 "--workers", "4"])
    return code, out


# ---------------------------------------------------------------- validation


@pytest.mark.parametrize("name", ["fefferman.json", "beals.json"])
def test_shipped_scenarios_validate(name):
    sc = validate_scenario(load_config(CONFIGS / name))
    assert sc.dimension == 1 and sc.p


def test_degenerate_exponent_names_field(tmp_path, capsys):
    rec = load_config(CONFIGS / "beals.json")
    rec["p"] = ["4/3", "2"]
    code = main(["run", _write(tmp_path, "bad.json", rec), "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == 2 and "p[1]" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("field,value", [("schema_version", 7), ("dimension", 3), ("expect", "maybe")])
def test_bad_fields_rejected(field, value):
    rec = load_config(CONFIGS / "fefferman.json")
    rec[field] = value
    with pytest.raises(ValidationError, match=field):
        validate_scenario(rec)


def test_too_few_synthesis_stages():
    rec = load_config(CONFIGS / "fefferman.json")
    rec["synthesis"]["stages"] = 2
    with pytest.raises(ValidationError, match="synthesis.stages"):
        validate_scenario(rec)


def test_trimmed_order_list_rejected(tmp_path, capsys):
    rec = load_config(CONFIGS / "appendices.json")
    rec["slopes"]["orders"] = [2, 4]
    with pytest.raises(ValidationError, match="slopes.orders"):
        validate_appendices(rec)
    code = main(["verify-appendices", _write(tmp_path, "a.json", rec), "--out", str(tmp_path / "o")])
    assert code == 2 and "slopes.orders" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


# ---------------------------------------------------------------- runs


def test_beals_scenario_is_bounded(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "beals.json"), "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [v["functional_verdict"] for v in summary["verdicts"]] == ["bounded", "bounded"]
    assert summary["verdicts"][1]["conjugate"] and summary["verdicts"][1]["p_run"] == "4/3"
    assert "conjugate" in out
    for sub in ("p_4_3", "p_4"):
        assert (tmp_path / sub / "probe.csv").exists()
        assert not (tmp_path / sub / "stages.csv").exists()


def _small_fefferman(tmp_path, name):
    rec = load_config(CONFIGS / "fefferman.json")
    rec["synthesis"]["stages"] = 3
    rec["tolerance"]["min_stages"] = 3
    rec["tolerance"]["slope"] = 1.0
    return _write(tmp_path, name, rec)


def test_runs_are_bit_reproducible(tmp_path):
    cfg = _small_fefferman(tmp_path, "small.json")
    for tag in ("a", "b"):
        main(["run", cfg, "--out", str(tmp_path / tag)])
    for name in ("probe.csv", "stages.csv", "certificates.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    # summary.json lists artifact paths, which carry the output directory
    a = (tmp_path / "a" / "summary.json").read_text().replace(str(tmp_path / "a"), "OUT")
    b = (tmp_path / "b" / "summary.json").read_text().replace(str(tmp_path / "b"), "OUT")
    assert a == b


def test_report_on_run(tmp_path, capsys):
    cfg = _small_fefferman(tmp_path, "small.json")
    main(["run", cfg, "--out", str(tmp_path / "r")])
    capsys.readouterr()
    code = main(["report", str(tmp_path / "r")])
    text = capsys.readouterr().out
    assert code in (0, 1)
    assert "scenario fefferman" in text and "routes_agree: ok" in text and "identity: ok" in text


def test_report_needs_run_directory(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2


# ---------------------------------------------------------------- appendices and bump


def test_adversarial_scale_names_overlap_condition(adversarial_run, capsys):
    code, out = adversarial_run
    assert code == 1
    index = json.loads((out / "appendices.json").read_text())
    assert not index["checks"]["lattice_overlap"] and not index["checks"]["z_lower_bound"]
    rep = json.loads((out / "z_lower_bound.json").read_text())
    assert "lattice overlap condition violated" in rep["detail"]["cause"]
    main(["report", str(out)])
    text = capsys.readouterr().out
    assert "z_lower_bound: FAIL" in text and "lattice overlap condition violated" in text


def test_bump_build(tmp_path, capsys):
    dest = tmp_path / "b" / "bump.csv"
    assert main(["bump", "build", "--out", str(dest)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["h"] == pytest.approx(9.4) and info["overlap_bound"] <= 1 / 3
    assert info["leakage"] < 1e-12
    lines = dest.read_text().splitlines()
    assert len(lines) > 100


def test_help_lists_verbs(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for verb in ("run", "verify-appendices", "bump", "report"):
        assert verb in text
