import json

import pytest

from weirdc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_boolean_branch_program_is_stuck_with_empty_trace(capsys):
    code, out, _ = run(capsys, "run", "--lang", "imp", "corpus/lemma-a1.imp")
    assert code == 0
    assert out.strip() == "# terminal: stuck"


def test_run_with_arguments(capsys, tmp_path):
    f = tmp_path / "p.imp"
    f.write_text("(output (+ x 1))")
    code, out, _ = run(capsys, "run", "--lang", "imp", "--arg", "x=4", str(f))
    assert code == 0
    assert out.splitlines() == ["5", "# terminal: halted"]


def test_compile_then_run_agrees(capsys, tmp_path):
    f = tmp_path / "p.imp"
    f.write_text("(seq (output true) (output 5))")
    code, out, _ = run(capsys, "compile", "--from", "imp", "--to", "toya", str(f))
    assert code == 0
    g = tmp_path / "p.toya"
    g.write_text(out)
    code, out, _ = run(capsys, "run", "--lang", "toya", str(g))
    assert code == 0
    assert out.splitlines() == ["1", "5", "# terminal: halted"]


def test_parse_error_exits_2(capsys, tmp_path):
    f = tmp_path / "bad.imp"
    f.write_text("(seq (output 1)")
    code, _, err = run(capsys, "parse", "--lang", "imp", str(f))
    assert code == 2
    assert err.startswith("weirdc: error:")


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "run", "--lang", "cobol", "x")[0] == 2
    assert run(capsys, "run", "--lang", "imp", "no/such/file.imp")[0] == 2
    assert run(capsys, "fixture", "run", "no-such-fixture")[0] == 2
    assert run(capsys, "--budget", "0", "fixture", "list")[0] == 2
    assert run(capsys)[0] == 2


def test_help_exits_0(capsys):
    assert run(capsys, "--help")[0] == 0


def test_dop_fixture_reports_its_checks(capsys):
    code, out, _ = run(capsys, "fixture", "run", "dop-division")
    assert "FAIL main(3,4) trace: expected [3, 4, 1, 2], got [3, 4, 1, 1]" in out
    assert "ok   verdict: expected \"Certified\", got \"Certified\"" in out
    assert code == 1


def test_passing_fixture_exits_0(capsys):
    code, out, _ = run(capsys, "fixture", "run", "rop-loop")
    assert code == 0
    assert "FAIL" not in out


DOP = ["classify", "--mode", "texploit", "--component", "corpus/dop-J.imp", "--attack", "corpus/dop-attack.toyc",
       "--stage", "imp->toyc", "--property", "r-ge-y", "--source-class", "imp-contexts"]
DOP_INPUTS = ["--input-domain", "x=1:4", "--input-domain", "y=0:8", "--input-domain", "a=0:0",
              "--input-domain", "b=0:0", "--input-domain", "d=0:0", "--input-domain", "r=0:0"]


def test_classify_bound_zero_is_unknown_not_an_error(capsys):
    code, out, _ = run(capsys, *DOP, "--bound", "0")
    assert code == 0
    assert out.splitlines()[0] == "verdict: UnknownAtBound"


def test_classify_dop_certifies(capsys):
    code, out, _ = run(capsys, *DOP, *DOP_INPUTS, "--expect", "Certified")
    assert code == 0
    assert out.splitlines()[0] == "verdict: Certified"
    code, _, _ = run(capsys, *DOP, *DOP_INPUTS, "--expect", "RefutedUpToBound")
    assert code == 1


def test_fsm_classify_and_gap(capsys):
    args = ["--ifsm", "corpus/fsm-lock.ifsm", "--gamma", "corpus/fsm-lock.gamma"]
    code, out, _ = run(capsys, "fsm", "classify", "--cpu", "corpus/fsm-lock.cpu", *args)
    assert code == 0
    assert "M Weird" in out and "T Transitory" in out
    code, out, _ = run(capsys, "fsm", "gap", "--cpu", "corpus/fsm-lock-gap.cpu", *args)
    assert code == 0
    assert "C0 2 CU" in out


def test_findpass(capsys):
    code, out, _ = run(capsys, "fixture", "findpass", "--password", "cabd")
    assert code == 0
    assert out.splitlines()[0] == "recovered: cabd"
    assert run(capsys, "fixture", "findpass", "--password", "xyz")[0] == 2


def test_check_stage_relation(capsys):
    code, out, _ = run(capsys, "check-stage", "--stage", "imp->toyc", "--check", "relation")
    assert code == 0
    lines = out.splitlines()
    assert "true -> 1" in lines and "false -> 0" in lines
    code, out, _ = run(capsys, "check-stage", "--stage", "imp->toyc", "--check", "relation", "--json")
    rep = json.loads(out.splitlines()[0])
    assert {"target": "1", "sources": ["true", "1"]} in rep["noninjective"]


def test_check_stage_reports_the_boolean_branch_counterexample(capsys):
    code, out, _ = run(capsys, "check-stage", "--stage", "imp->toyc", "--check", "correct",
                       "--program", "corpus/lemma-a1.imp", "--expect", "fail")
    assert code == 0
    assert out.startswith("correct-whole imp->toyc: 1 counterexample(s)")
    assert run(capsys, "check-stage", "--stage", "imp->toyc", "--check", "correct",
               "--program", "corpus/lemma-a1.imp")[0] == 1


def test_check_stage_random_preservation(capsys):
    code, out, _ = run(capsys, "check-stage", "--stage", "toya->toyh", "--check", "correct", "--programs", "10")
    assert code == 0
    assert out.strip() == "correct-whole toya->toyh: 0 counterexample(s)"


@pytest.mark.parametrize("argv", [
    ["fixture", "run", "fsm-lock", "--json"],
    ["wm-sample", "--component", "corpus/output-neg.imp", "--json"],
    ["fixture", "list"],
])
def test_identical_invocations_give_identical_output(capsys, argv):
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert first


def test_json_output_is_json_lines(capsys):
    _, out, _ = run(capsys, "fixture", "run", "lemma-a1", "--json")
    for line in out.splitlines():
        json.loads(line)


def test_wm_sample_negative_domain(capsys):
    code, out, _ = run(capsys, "wm-sample", "--component", "corpus/output-neg.imp", "--domain=-2:2")
    assert code == 0
    assert "-1 halted" in out and "-2 halted" in out
    assert "1 halted" not in out.replace("-1 halted", "")
