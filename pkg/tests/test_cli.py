import json

import pytest

from lieclass.cli import main
from lieclass.construct import default_specs, example_n2_matrices
from lieclass.io import matrix_to_json


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def n2_system_doc():
    A3, C0 = example_n2_matrices(trace_free=True)
    return {"schema": "lieclass-v1", "m": 4,
            "C": {"type": "conj_exp", "A": matrix_to_json(A3), "C0": matrix_to_json(C0)}}


@pytest.fixture
def corpus(tmp_path, capsys):
    rc, out, _ = run(capsys, "construct", "--defaults", "--out", tmp_path / "fx")
    assert rc == 0
    return [p for p in out.split()]


def test_construct_defaults_writes_every_fixture(corpus):
    assert len(corpus) == len(default_specs())


def test_fixtures_replay_through_classify(corpus, capsys):
    for path in corpus:
        doc = json.loads(open(path).read())
        rc, out, _ = run(capsys, "classify", path)
        assert rc == 0
        rep = json.loads(out)
        assert rep["theorem_case"] == doc["expected"]["theorem_case"]


def test_n2_system_classifies_as_xa2(tmp_path, capsys):
    rc, out, err = run(capsys, "classify", write(tmp_path / "n2.json", n2_system_doc()))
    assert rc == 0
    rep = json.loads(out)
    assert rep["theorem_case"] == "xa2" and rep["optimal_case"] == "XA_plus_case2"
    assert "theorem case: xa2" in err


def test_constant_diagonal_is_flagged(tmp_path, capsys):
    doc = {"schema": "lieclass-v1", "m": 2, "C": {"type": "polynomial", "coeffs": [[["1", "0"], ["0", "-1"]]]}}
    rc, out, _ = run(capsys, "classify", write(tmp_path / "diag.json", doc))
    rep = json.loads(out)
    assert rc == 0 and rep["irreducibility"]["status"] == "ConstantEquivalent"
    # no generator moves x except along X3
    assert all(g["k"][:2] == ["0", "0"] for g in rep["algebra"]["basis"])


def test_truncated_json_is_a_schema_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"m": 2, "C": {"type": "polyn')
    rc, _, err = run(capsys, "classify", p)
    assert rc == 2 and "schema error" in err


def test_missing_file_is_a_schema_error(tmp_path, capsys):
    rc, _, err = run(capsys, "classify", tmp_path / "nope.json")
    assert rc == 2


def test_bad_interval_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit):
        main(["classify", "x.json", "--interval", "1,0"])
    with pytest.raises(SystemExit):
        main(["classify", "x.json", "--tol-abs", "-1"])


def test_case_a_spec_writes_fixture(tmp_path, capsys):
    spec = {"case": "a", "m": 2, "matrices": {"A3": [["0", "1"], ["0", "0"]], "C0": [["1", "0"], ["1", "-1"]]}}
    rc, out, _ = run(capsys, "construct", write(tmp_path / "case_a.json", spec), "--out", tmp_path / "fx")
    assert rc == 0
    doc = json.loads((tmp_path / "fx" / "case_a.json").read_text())
    assert doc["expected"]["theorem_case"] == "a" and doc["config"]["command"] == "construct"


def test_m3_case_b_spec_is_rejected(tmp_path, capsys):
    spec = {"case": "b", "m": 3, "matrices": {
        "A2": [["0", "0", "0"], ["0", "2", "0"], ["0", "0", "4"]],
        "A3": [["0", "0", "0"], ["1", "0", "0"], ["0", "1", "0"]],
        "C0": [["0", "0", "0"], ["0", "0", "0"], ["1", "0", "0"]]}}
    rc, _, err = run(capsys, "construct", write(tmp_path / "b3.json", spec), "--out", tmp_path)
    assert rc == 1 and "A3C0-C0A3!=0" in err


def test_odd_xa2_spec_is_rejected(tmp_path, capsys):
    spec = {"case": "xa2", "m": 3, "matrices": {
        "A3": [["0", "0", "0"], ["1", "0", "0"], ["0", "0", "0"]],
        "C0": [["0", "0", "0"], ["0", "0", "0"], ["1", "0", "0"]]}}
    rc, _, err = run(capsys, "construct", write(tmp_path / "x3.json", spec), "--out", tmp_path)
    assert rc == 1 and "m even" in err


def test_construct_honors_corpus_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LIECLASS_CORPUS", str(tmp_path / "env"))
    rc, _, _ = run(capsys, "construct", "--defaults")
    assert rc == 0
    assert {p.name for p in (tmp_path / "env").iterdir()} == {f"{n}.json" for n, _ in default_specs()}


# -- verify ----------------------------------------------------------------

def _verify_doc(delta=0):
    A3, _ = example_n2_matrices(trace_free=True)
    A = [[str(v) for v in row] for row in A3]
    if delta:
        A[0][0] = str(delta)
    return {"system": n2_system_doc(), "generators": [{"k": ["0", "0", "1"], "A": A}]}


def test_verify_exact_generator_has_zero_residual(tmp_path, capsys):
    rc, out, err = run(capsys, "verify", write(tmp_path / "v.json", _verify_doc()), "--grid", 21)
    row = json.loads(out)["residuals"][0]
    assert rc == 0 and row["max_residual"] == 0 and row["admitted"]
    assert "admitted" in err


def test_verify_perturbed_generator_is_not_admitted(tmp_path, capsys):
    rc, out, err = run(capsys, "verify", write(tmp_path / "v.json", _verify_doc(delta=1)), "--grid", 21)
    row = json.loads(out)["residuals"][0]
    assert rc == 0 and row["max_residual"] > 0 and not row["admitted"]
    assert "NOT admitted" in err


def test_verify_oracle(tmp_path, capsys):
    rc, out, _ = run(capsys, "verify", write(tmp_path / "v.json", _verify_doc()), "--oracle",
                     "--interval", "0,2", "--grid", 11)
    assert rc == 0 and json.loads(out)["oracle"]["max_deviation"] <= 1e-8


# -- determinism and audit trail ------------------------------------------

def test_outputs_are_byte_identical(tmp_path, capsys):
    src = write(tmp_path / "n2.json", n2_system_doc())
    outs = []
    for name in ("r1.json", "r2.json"):
        assert run(capsys, "classify", src, "--mode", "exact", "--out", tmp_path / name)[0] == 0
        outs.append((tmp_path / name).read_bytes())
    # the config names the output path, so compare with it removed
    docs = [json.loads(b) for b in outs]
    for d in docs:
        d["config"].pop("out")
    assert docs[0] == docs[1]
    assert run(capsys, "classify", src, "--mode", "exact")[1] == run(capsys, "classify", src, "--mode", "exact")[1]


def test_out_writes_text_summary(tmp_path, capsys):
    src = write(tmp_path / "n2.json", n2_system_doc())
    rc, out, _ = run(capsys, "classify", src, "--out", tmp_path / "rep.json")
    assert rc == 0 and (tmp_path / "rep.txt").read_text() == out


def test_config_is_embedded(tmp_path, capsys):
    src = write(tmp_path / "n2.json", n2_system_doc())
    _, out, _ = run(capsys, "classify", src, "--tol-abs", "1e-7", "--grid", 33)
    cfg = json.loads(out)["config"]
    assert cfg["tol_abs"] == 1e-7 and cfg["grid"] == 33 and cfg["input"] == src


# -- transform and solve ---------------------------------------------------

def test_transform_trace_normalize(tmp_path, capsys):
    doc = {"schema": "lieclass-v1", "m": 2, "C": {"type": "polynomial", "coeffs": [[["1", "0"], ["0", "1"]]]}}
    rc, out, _ = run(capsys, "transform", write(tmp_path / "c.json", doc), "--grid", 17)
    res = json.loads(out)
    assert rc == 0 and res["transform"]["change"] == "trace-cosh"
    vals = res["C"]["values"]
    assert len(vals) == 17
    assert max(abs(float(v[0][0]) + float(v[1][1])) for v in vals) <= 1e-10


def test_transform_point_change(tmp_path, capsys):
    doc = {"schema": "lieclass-v1", "m": 1, "C": {"type": "polynomial", "coeffs": [[["0"]], [["1"]]]}}
    rc, out, _ = run(capsys, "transform", write(tmp_path / "c.json", doc), "--op", "point-change",
                     "--change", "shift", "--param", "0.5")
    assert rc == 0 and json.loads(out)["transform"]["params"] == {"a": 0.5}


def test_solve_sylvester_and_commutant(tmp_path, capsys):
    doc = {"A": [["1", "0"], ["0", "2"]], "B": [["1", "0"], ["0", "3"]], "Q": [["0", "0"], ["0", "1"]]}
    rc, out, _ = run(capsys, "solve", write(tmp_path / "s.json", doc))
    res = json.loads(out)
    assert rc == 0 and res["feasible"] and res["particular"][1][1] == "-1"
    assert len(res["homogeneous"]) == 1
    rc, out, _ = run(capsys, "solve", write(tmp_path / "c.json", {"commutant": [["0", "1"], ["-1", "0"]]}))
    assert rc == 0 and len(json.loads(out)["commutant_basis"]) == 2


def test_solve_missing_field(tmp_path, capsys):
    rc, _, err = run(capsys, "solve", write(tmp_path / "s.json", {"A": [["1"]]}))
    assert rc == 2 and "$.B" in err
