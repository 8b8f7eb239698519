import json

import pytest

from scucnr.caseio import write_case
from scucnr.cli import main
from scucnr.fixtures import corridor4, corridor4_high, triangle3


@pytest.fixture
def tri3_file(tmp_path):
    path = tmp_path / "tri3.json"
    write_case(triangle3(), path)
    return path


@pytest.fixture
def hi_file(tmp_path):
    path = tmp_path / "corridor4_hi.json"
    write_case(corridor4_high(), path)
    return path


def test_solve_converged_writes_reports(tri3_file, tmp_path, capsys):
    out = tmp_path / "runs"
    code = main(["solve", "--case", str(tri3_file), "--method", "ad_scuc",
                 "--out", str(out)])
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "schedule.csv").exists()
    assert (out / "timings.json").exists()
    assert "status=converged" in capsys.readouterr().out


def test_solve_infeasible_exits_2(hi_file, tmp_path, capsys):
    code = main(["solve", "--case", str(hi_file), "--method", "td_scuc",
                 "--out", str(tmp_path / "r")])
    assert code == 2
    assert "no feasible schedule" in capsys.readouterr().err


def test_solve_with_switching_succeeds_where_plain_fails(hi_file, tmp_path):
    out = tmp_path / "cnr"
    code = main(["solve", "--case", str(hi_file), "--method", "td_scuc_cnr",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["switches"] == [{"contingency": 3, "period": 2, "branch": 2}]


def test_unswitchable_network_exits_2(tmp_path):
    # external corridor rated below the load: no switch plan can save the
    # direct-line outage, so even the switching method proves infeasibility
    case_file = tmp_path / "dead.json"
    write_case(corridor4((80.0, 130.0), external_emergency=80.0), case_file)
    code = main(["solve", "--case", str(case_file), "--method", "td_scuc_cnr",
                 "--out", str(tmp_path / "r")])
    assert code == 2


def test_iteration_cap_exits_3(hi_file, tmp_path, capsys):
    code = main(["solve", "--case", str(hi_file), "--method", "td_scuc",
                 "--max-iter", "1", "--out", str(tmp_path / "r")])
    assert code == 3
    assert "without converging" in capsys.readouterr().err


def test_verify_clean_run(tri3_file, tmp_path, capsys):
    out = tmp_path / "runs"
    assert main(["solve", "--case", str(tri3_file), "--method", "ad_scuc",
                 "--out", str(out)]) == 0
    code = main(["verify", "--case", str(tri3_file),
                 "--result", str(out / "report.json")])
    assert code == 0
    assert "secure" in capsys.readouterr().out


def test_verify_tampered_schedule_exits_3(tmp_path, capsys):
    from scucnr.fixtures import triangle3_tight
    case_file = tmp_path / "tight.json"
    write_case(triangle3_tight(), case_file)
    out = tmp_path / "runs"
    assert main(["solve", "--case", str(case_file), "--method", "td_scuc",
                 "--out", str(out)]) == 0
    report_path = out / "report.json"
    doc = json.loads(report_path.read_text())
    gpos = doc["solution"]["generator_ids"].index(2)
    gpos1 = doc["solution"]["generator_ids"].index(1)
    moved = doc["solution"]["p"][gpos][0]
    doc["solution"]["p"][gpos][0] = 0.0
    doc["solution"]["p"][gpos1][0] += moved
    report_path.write_text(json.dumps(doc))
    code = main(["verify", "--case", str(case_file), "--result", str(report_path)])
    assert code == 3
    err = capsys.readouterr().err
    assert "contingency 1" in err and "period 1" in err


def test_usage_errors_exit_1(tri3_file, capsys):
    assert main(["solve", "--case", str(tri3_file)]) == 1          # missing --method
    assert main(["solve", "--case", str(tri3_file), "--method", "bogus"]) == 1
    assert main(["solve", "--nonsense"]) == 1
    capsys.readouterr()


def test_missing_case_file_exits_1(tmp_path, capsys):
    code = main(["solve", "--case", str(tmp_path / "ghost.json"),
                 "--method", "ad_scuc"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_help_lists_flags_with_defaults(capsys):
    assert main(["solve", "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--case", "--method", "--out", "--zmax", "--cbce-size",
                 "--max-iter", "--slack-tol", "--milp-gap", "--workers",
                 "--angle-span", "--enumerate-kr"):
        assert flag in text
    assert "50" in text      # max-iter default
    assert "20" in text      # cbce-size default
    assert "1e-06" in text   # slack tolerance default


def test_gen_fixture_roundtrip(tmp_path, capsys):
    target = tmp_path / "gen" / "case7.json"
    code = main(["gen-fixture", "--seed", "7", "--out", str(target)])
    assert code == 0
    assert target.exists()
    again = tmp_path / "case7b.json"
    assert main(["gen-fixture", "--seed", "7", "--out", str(again)]) == 0
    assert target.read_bytes() == again.read_bytes()
    other = tmp_path / "case8.json"
    assert main(["gen-fixture", "--seed", "8", "--out", str(other)]) == 0
    assert other.read_bytes() != target.read_bytes()
    code = main(["solve", "--case", str(target), "--method", "ad_scuc",
                 "--out", str(tmp_path / "r")])
    assert code in (0, 2, 3)  # generated cases are valid input regardless


def test_same_args_same_outputs(hi_file, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"rep{i}"
        code = main(["solve", "--case", str(hi_file), "--method", "ad_scuc_cnr",
                     "--out", str(out)])
        assert code == 0
        outs.append(((out / "report.json").read_bytes(),
                     (out / "schedule.csv").read_bytes()))
    assert outs[0] == outs[1]
