import json
import subprocess
import sys

import pytest

from conftest import BASE_ONTOLOGY, DEF_A, HIRING, MINIMAL_SPEC, hiring_cards, write_card
from aits.canonical import decode
from aits.cli import main

CLOCK = "2026-01-01T00:00:00Z"
ONTO = str(HIRING / "reference.aitso")
SPEC = str(HIRING / "screener.aits")
EXT = str(HIRING / "employment.aitsx")


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for var in ("AITS_ONTOLOGY", "AITS_CATALOGUE", "AITS_OUTPUT_DIR", "AITS_TIMEOUT_SECONDS",
                "AITS_MAX_PARALLEL_TOOLS", "AITS_GAP_THRESHOLD", "AITS_SUBJECT"):
        monkeypatch.delenv(var, raising=False)


def run(*argv):
    return main(list(argv))


def usage_exit(*argv):
    with pytest.raises(SystemExit) as info:
        main(list(argv))
    return info.value.code


def test_usage_errors():
    assert usage_exit("frobnicate") == 64
    assert usage_exit() == 64
    assert usage_exit("run", SPEC, "--scenario", "nope", "--mode", "assessment") == 64
    assert usage_exit("dsl", "check") == 64


def test_dsl_commands(tmp_path, capsys):
    spec = tmp_path / "s.aits"
    spec.write_text("# note\n" + MINIMAL_SPEC)
    assert run("dsl", "check", str(spec)) == 0
    assert run("dsl", "hash", str(spec)) == 0
    assert capsys.readouterr().out.splitlines()[-1] == \
        "b427ee90e740eed9e04f86a5c3fa8e17c22fc8b9b293543cfd2528187957b11c"
    assert run("dsl", "fmt", "--write", str(spec)) == 0
    assert spec.read_text().startswith('sandbox "s" version "1.0" {\n  system_type classifier\n')
    assert run("dsl", "merge", SPEC, EXT) == 0
    out = capsys.readouterr().out
    assert "# applied extensions: employment" in out and "fair.dpd <= 0.08" in out

    bad = tmp_path / "bad.aits"
    bad.write_text('sandbox "s" version "1.0" {')
    assert run("dsl", "check", str(bad)) == 10
    assert "1:28" in capsys.readouterr().err


def test_onto_check(tmp_path, capsys):
    assert run("onto", "check", ONTO) == 0
    assert "ok: 22 triples" in capsys.readouterr().out
    cyc = tmp_path / "c.aitso"
    cyc.write_text("R.1 subRequirementOf R.2\nR.2 subRequirementOf R.1\n")
    assert run("onto", "check", str(cyc)) == 1
    assert "cycle" in capsys.readouterr().out
    assert run("onto", "check") == 15  # no ontology configured


def test_resolve(capsys):
    assert run("resolve", SPEC, "--req", "AIA.Art15", "--ontology", ONTO) == 0
    lines = capsys.readouterr().out.split()
    assert "robust.flip_rate" in lines and "gen.toxicity" not in lines


def test_cards_lint(tmp_path, capsys):
    ok = write_card(tmp_path, "t1", {"m.a": DEF_A})
    bad = write_card(tmp_path, "t2", {"m.a": "def:" + "9" * 16})
    onto = tmp_path / "o.aitso"
    onto.write_text(BASE_ONTOLOGY)
    assert run("cards", "lint", str(ok), "--ontology", str(onto)) == 0
    assert run("cards", "lint", str(ok), str(bad), "--ontology", str(onto)) == 1
    assert "definition mismatch" in capsys.readouterr().out


def test_plan_and_run_pass(tmp_path, capsys):
    hiring_cards(tmp_path / "cards")
    common = ["--ontology", ONTO, "--catalogue", str(tmp_path / "cards"), "--output-dir", str(tmp_path / "out")]
    assert run("plan", SPEC, "--ext", EXT, *common) == 0
    plan = json.loads((tmp_path / "out" / "plan.json").read_text())
    assert plan["gaps"] == [] and len(plan["assignments"]) == 5

    assert run("run", SPEC, "--ext", EXT, "--scenario", "regulatory_sandbox", "--mode", "assessment",
               "--clock", CLOCK, *common) == 0
    report = decode((tmp_path / "out" / "report.json").read_bytes())
    assert report["scenario"] == "regulatory_sandbox"
    assert {v["verdict"] for v in report["verdicts"]} == {"pass"}
    assert run("verify-chain", "--output-dir", str(tmp_path / "out")) == 0

    log = tmp_path / "out" / "evidence.ndjson"
    log.write_bytes(log.read_bytes().replace(b"0.05", b"0.04", 1))
    assert run("verify-chain", str(log)) == 1
    assert "broken at index" in capsys.readouterr().out


def test_run_with_empty_catalogue(tmp_path):
    out = tmp_path / "out"
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment",
               "--ontology", ONTO, "--output-dir", str(out)) == 2
    report = decode((out / "report.json").read_bytes())
    assert {v["verdict"] for v in report["verdicts"]} == {"unassessed"}
    assert report["gaps"] and {g["reason"] for g in report["gaps"]} == {"no_supporting_tool"}


def test_run_engine_error_writes_error_json(tmp_path):
    onto = tmp_path / "o.aitso"
    onto.write_text(BASE_ONTOLOGY + "m.a hasDefinition def:2\n")
    out = tmp_path / "out"
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment",
               "--ontology", str(onto), "--output-dir", str(out)) == 11
    err = json.loads((out / "error.json").read_text())
    assert err["exit_code"] == 11 and err["findings"][0]["code"] == "duplicate_definition"
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment", "--ontology", ONTO,
               "--clock", "yesterday", "--output-dir", str(out)) == 15


def test_development_mode_never_exits_one(tmp_path, capsys):
    hiring_cards(tmp_path / "cards", fail_dpd=True)
    common = ["--ontology", ONTO, "--catalogue", str(tmp_path / "cards"), "--clock", CLOCK]
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment",
               "--output-dir", str(tmp_path / "a"), *common) == 1
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "development",
               "--output-dir", str(tmp_path / "d"), *common) == 0
    assert "preliminary" in capsys.readouterr().out


def test_config_file_and_env(tmp_path, monkeypatch):
    hiring_cards(tmp_path / "cards")
    (tmp_path / "aits.toml").write_text(f'ontology = "{ONTO}"\ncatalogue = ["cards"]\noutput_dir = "cfg-out"\n')
    monkeypatch.setenv("AITS_OUTPUT_DIR", str(tmp_path / "env-out"))
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment") == 0
    assert (tmp_path / "env-out" / "report.json").exists()
    assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "assessment",
               "--output-dir", str(tmp_path / "flag-out")) == 0
    assert (tmp_path / "flag-out" / "report.json").exists()
    assert not (tmp_path / "cfg-out").exists()


def test_map_flow(tmp_path, capsys):
    onto = tmp_path / "o.aitso"
    onto.write_text(BASE_ONTOLOGY + 'm.a label "demographic parity difference"\n')
    write_card(tmp_path / "cards", "t", {"m.a": DEF_A}, {
        "extra": [{"event": "evidence", "metric_id": "demographic parity difference", "value": 0.2}]})
    spec = tmp_path / "s.aits"
    spec.write_text(MINIMAL_SPEC)
    common = ["--ontology", str(onto), "--catalogue", str(tmp_path / "cards"), "--output-dir", str(tmp_path / "out")]
    assert run("run", str(spec), "--scenario", "self_assessment", "--mode", "assessment", *common) == 2
    assert run("map", "list", *common) == 0
    assert "'demographic parity difference' -> m.a [exact_label_match] pending" in capsys.readouterr().out
    assert run("map", "approve", "demographic parity difference", "m.b", "--yes", *common) == 1
    assert run("map", "approve", "demographic parity difference", "m.a", "--yes", *common) == 0
    # second run re-routes the approved id, so R.1 is now assessed
    assert run("run", str(spec), "--scenario", "self_assessment", "--mode", "assessment", *common) == 0
    assert run("verify-chain", *common) == 0


def test_aggregate(tmp_path, capsys):
    hiring_cards(tmp_path / "cards")
    common = ["--ontology", ONTO, "--catalogue", str(tmp_path / "cards"), "--clock", CLOCK]
    for i in range(3):
        assert run("run", SPEC, "--scenario", "self_assessment", "--mode", "development",
                   "--output-dir", str(tmp_path / "reports" / f"r{i}"), *common) == 0
    assert run("aggregate", str(tmp_path / "reports"), "--policy", "strict",
               "--out", str(tmp_path / "signal.json")) == 0
    signal = json.loads((tmp_path / "signal.json").read_text())
    assert signal["report_count"] == 3 and signal["preliminary_reports"] == 3

    r = tmp_path / "reports" / "r0" / "report.json"
    doc = json.loads(r.read_text())
    doc["verdicts"][0]["bindings"][0]["observed"] = 1.0
    r.write_text(json.dumps(doc))
    assert run("aggregate", str(tmp_path / "reports")) == 14


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "aits", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify-chain" in out.stdout
