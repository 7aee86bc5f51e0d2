import json
import subprocess
import sys

import pytest

from logrank.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_VERIFY, main
from logrank.extension import ksp_instance, unit_square

from conftest import CORPUS


def call(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_rank(capsys):
    code, out, err = call(capsys, "rank", CORPUS / "identity4.csv")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["rank"] == 4 and doc["bound_holds"]
    assert "rank 4" in err


def test_find_rect(capsys):
    code, out, _ = call(capsys, "find-rect", CORPUS / "rand8x8_d1.csv", "--seed", 3, "--samples", 8)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["mono"]["area"] >= 1


def test_protocol_with_pair_and_tree(capsys):
    code, out, _ = call(capsys, "protocol", CORPUS / "rand6x6_d2.json", "--tree", "--pair", 1, 2,
                        "--jobs", 1)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert "tree" in doc and "transcript" in doc and doc["stats"]["leaves"] >= 1


def test_nnmf(capsys):
    code, out, _ = call(capsys, "nnmf", CORPUS / "rank2_example.csv", "--jobs", 1)
    assert code == EXIT_OK
    assert json.loads(out)["inner_dim"] >= 1


def test_slack_and_xc(capsys, tmp_path):
    path = tmp_path / "sq.json"
    path.write_text(unit_square().dumps())
    code, out, _ = call(capsys, "slack", path)
    assert code == EXIT_OK and json.loads(out)["rank"] == 3
    code, out, _ = call(capsys, "xc", path, "--jobs", 1)
    doc = json.loads(out)
    assert code == EXIT_OK and doc["witnesses_ok"] and doc["slack_rank"] == 3


def test_ksp_gen_explicit(capsys):
    code, out, _ = call(capsys, "ksp-gen", "--sets", "1;1;1", "--N", 1, "--pack", 1)
    assert code == EXIT_OK
    assert len(json.loads(out)["vertices"]) == 4


def test_ksp_gen_needs_sets_or_n(capsys):
    code, _, err = call(capsys, "ksp-gen", "--N", 3, "--pack", 1)
    assert code == EXIT_INPUT and "error" in err


def test_oracle(capsys):
    code, out, _ = call(capsys, "oracle", "mono", CORPUS / "identity4.csv")
    assert code == EXIT_OK and json.loads(out)["area"] == 4
    code, out, _ = call(capsys, "oracle", "sheppard", "--u", "1,0", "--v", "0,1", "--trials", 20000)
    assert code == EXIT_OK and abs(json.loads(out)["estimate"] - 0.25) < 0.02


def test_bad_input(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,x\n")
    assert call(capsys, "rank", bad)[0] == EXIT_INPUT
    assert call(capsys, "rank", tmp_path / "missing.csv")[0] == EXIT_INPUT
    neg = tmp_path / "neg.csv"
    neg.write_text("1,-1\n")
    assert call(capsys, "rank", neg)[0] == EXIT_INPUT


def test_slack_error_exit(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(ksp_instance(2, 1, 2, [[1], [1]]).dumps())
    assert call(capsys, "slack", path, "--delta", 1)[0] == EXIT_INPUT


def test_budget_exhausted(capsys):
    code, _, err = call(capsys, "protocol", CORPUS / "identity4.csv", "--budget", 1)
    assert code == EXIT_BUDGET and "nodes" in err


def test_out_and_text_format(capsys, tmp_path):
    out_path = tmp_path / "r.txt"
    code, out, _ = call(capsys, "rank", CORPUS / "ones5x7.csv", "--format", "text", "--out", out_path)
    assert code == EXIT_OK and out == ""
    assert "rank: 1" in out_path.read_text()


def test_byte_identical_runs():
    argv = [sys.executable, "-m", "logrank", "protocol", str(CORPUS / "rand10x12_d2.json"),
            "--seed", "5", "--tree"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and a


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_BUDGET) == (0, 2, 3, 4)


def test_verification_failure_exit(capsys, monkeypatch):
    import logrank.cli as cli
    from logrank.protocol import VerificationError

    def broken(tree, jobs=1):
        raise VerificationError("forced", (0, 0))

    monkeypatch.setattr(cli, "verify_all", broken)
    code, _, err = call(capsys, "protocol", CORPUS / "identity4.csv")
    assert code == EXIT_VERIFY and "(0, 0)" in err
