"""Tests for the ``fjwb`` command line and its exit codes."""

import json

import pytest

from fj_workbench.advanced.flowspace import GeneralizedGeodesic
from fj_workbench.cli import main

CAT = "[[2, 1], [1, 1]]"


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch, tmp_path):
    monkeypatch.setenv("FJWB_ENV_PATH", str(tmp_path / "missing.env"))
    monkeypatch.setenv("FJWB_LOG_FILE", "")
    monkeypatch.delenv("FJWB_PRIME_CAP", raising=False)


def _output(capsys):
    return json.loads(capsys.readouterr().out)


def test_analyze(capsys):
    assert main(["analyze", "--matrix", CAT, "--L", "3"]) == 0
    report = _output(capsys)
    assert report["i_k"] == {"1": "1", "2": "5", "3": "16"}
    assert report["K"] == "80"
    assert report["root_of_unity_eigenvalue"] is False


def test_analyze_reads_whitespace_rows(tmp_path, capsys):
    path = tmp_path / "cat.txt"
    path.write_text("2 1\n1 1\n")
    assert main(["analyze", "--matrix", str(path), "--L", "1"]) == 0
    assert _output(capsys)["i_k"] == {"1": "1"}


def test_missing_argument_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 1


def test_malformed_matrix_is_a_usage_error():
    assert main(["analyze", "--matrix", "[[2, 1], [1, x]]"]) == 1


def test_dirichlet(capsys):
    assert main(["dirichlet", "--K", "5", "--lower", "2"]) == 0
    assert _output(capsys)["primes"] == ["11", "31"]


def test_prime_search_cap(monkeypatch):
    monkeypatch.setenv("FJWB_PRIME_CAP", "1")
    assert main(["dirichlet", "--K", "5", "--lower", "2"]) == 3


def test_certify_refuses_unipotent_matrix(capsys):
    assert main(["certify", "--matrix", "[[1, 1], [0, 1]]", "--L", "2", "--eps", "1/2"]) == 1
    assert '"error": "EigenvalueRootOfUnity"' in capsys.readouterr().err


def test_hyperelem_lemmas_hold(capsys):
    assert main(["hyperelem", "--s", "6", "--r", "72"]) == 0
    report = _output(capsys)
    assert report["mode"] == "exhaustive"
    assert report["lemma_hyp_elm"]["falsifiers"] == []
    assert report["lemma_prime_power"]["falsifiers"] == []


def test_torsion_of_a_scalar_pack(capsys):
    pack = {"mode": "matrices", "ring": "QQ", "ranks": {"0": 1}, "phi": {"0": [[2]]}, "phi_inv": {"0": [["1/2"]]}}
    assert main(["torsion", json.dumps(pack)]) == 0
    assert _output(capsys)["determinant"] == "2"


def test_flow_periodicity(capsys):
    c = GeneralizedGeodesic.line((0.0, 0.0), (3.0, 4.0)).to_dict()
    assert main(["flow", "periodic", "--args", json.dumps({"c": c, "gamma": 5})]) == 0
    assert _output(capsys) == {"periodic": True}


def test_verify_rejects_unknown_schema(tmp_path):
    path = tmp_path / "cert.json"
    path.write_text(json.dumps({"schema": "other"}))
    assert main(["verify", str(path)]) == 1
