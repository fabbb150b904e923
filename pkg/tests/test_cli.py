import json

import pytest

from stonelab import cli, lab
from stonelab.errors import InvariantViolation
from stonelab.generators import path_graph
from stonelab.structures import dump_structure, load_structure, with_marks


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_pair_exact(capsys):
    code, out, _ = run(capsys, "pair", "--structure", "cycle:4", "--formula", "E(x1,x2)", "--formula", "x = x")
    assert code == 0
    data = json.loads(out)
    assert data[0]["formula"] == "E(x1,x2)" and data[0]["mode"] == "exact"
    assert data[1]["value"] == 1


def test_pair_from_file(capsys, tmp_path):
    sfile = tmp_path / "s.json"
    dump_structure(path_graph(5), sfile)
    ffile = tmp_path / "f.txt"
    ffile.write_text("E(x1,x2)\n\nexists y. E(x,y)\n")
    code, out, _ = run(capsys, "pair", "--structure", str(sfile), "--formulas", str(ffile))
    assert code == 0 and len(json.loads(out)) == 2


def test_sample_defaults(capsys):
    code, out, _ = run(capsys, "sample", "--structure", "cycle:10", "--formula", "x1 = x2", "--seed", "42")
    data = json.loads(out)[0]
    assert code == 0 and data["mode"] == "sampled" and data["samples"] == 10000


def test_converge_and_theory(capsys, tmp_path):
    table = tmp_path / "t.csv"
    code, _, _ = run(capsys, "converge", "--family", "path", "--sizes", "200,400,800",
                     "--formula", "dist<=2(x1,x2)", "--formula", "exists y. E(x,y)", "--out", str(table))
    assert code == 0
    assert table.read_text().startswith("n,formula_id,value,mode,ci_halfwidth,verdict\n")
    code, out, _ = run(capsys, "theory", "--table", str(table))
    lines = out.splitlines()
    assert code == 0 and len(lines) == 2
    assert lines[0].startswith("!(Qm x1. Qm x2.")


def test_types_and_reweight(capsys):
    code, out, _ = run(capsys, "types", "--structure", "path:5", "--radius", "1")
    classes = json.loads(out)["classes"]
    assert code == 0 and len(classes) == 2
    code, out, _ = run(capsys, "reweight", "--structure", "path:5", "--radius", "1", "--targets", "[0, 1]")
    assert code == 0
    s = json.loads(out)
    assert s["weights"][0] in (0, "0")


def test_skeleton(capsys):
    code, out, _ = run(capsys, "skeleton", "--structure", "star:9", "--radius", "1", "--eps", "1/5")
    data = json.loads(out)
    assert code == 0 and data["skeleton"] == [0] and data["residual"] is True


def test_mark_encode_eliminate(capsys, tmp_path):
    code, out, _ = run(capsys, "mark", "--structure", "star:3", "--structure", "star:7", "--radii", "1",
                       "--eps", "1/3")
    data = json.loads(out)
    assert code == 0 and data["monotone"] == {"1": True}
    marked = tmp_path / "m.json"
    marked.write_text(json.dumps(data["plans"][1]["structure"]))
    enc = tmp_path / "enc.json"
    code, _, _ = run(capsys, "encode", "--structure", str(marked), "--out", str(enc))
    assert code == 0
    payload = json.loads(enc.read_text())
    assert payload["m"] == 1 and payload["theory"] == {"E": []}
    code, out, _ = run(capsys, "eliminate", "--theory", str(enc), "--formula", "E(x1,x2)")
    assert code == 0 and "N_E_I10_f1" in out
    code, out2, _ = run(capsys, "eliminate", "--structure", str(marked), "--formula", "E(x1,x2)")
    assert out2 == out


def test_eliminate_needs_source(capsys):
    code, _, err = run(capsys, "eliminate", "--formula", "E(x,y)")
    assert code == 1 and "theory" in err


def test_pipeline(capsys):
    code, out, _ = run(capsys, "pipeline", "--family", "star", "--sizes", "8,16", "--radius", "1",
                       "--eps", "2/n", "--formula", "E(x1,x2)")
    data = json.loads(out)
    assert code == 0 and data["ok"] and len(data["rows"]) == 2


def test_subdivision(capsys):
    code, out, _ = run(capsys, "subdivision", "--structure", "cycle:6", "--N", "3", "--p", "1")
    data = json.loads(out)
    assert code == 0 and data["found"] and len(data["witness"]["paths"]) == 3


def test_mtp_and_qm(capsys):
    code, out, _ = run(capsys, "mtp", "--structure", "path:6", "--phi", "true", "--psi", "true")
    assert code == 0 and json.loads(out)["holds"]
    code, out, _ = run(capsys, "qm", "--structure", "complete:3", "--formula", "E(x,y)")
    assert code == 0 and json.loads(out)["Phi_qm"] is True


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["pair"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "pair", "--structure", "nope:3", "--formula", "x = x")
    assert code == 1 and "graph spec" in err
    code, _, _ = run(capsys, "pair", "--structure", "cycle:4", "--formula", "E(x1,")
    assert code == 1
    code, _, _ = run(capsys, "qm", "--structure", "cycle:4", "--formula", "E(x,y)", "--formula", "x = y")
    assert code == 1
    code, _, _ = run(capsys, "mark", "--structure", "star:3", "--radii", "1", "--eps", "1/n")
    assert code == 1


def test_budget_exit_code(capsys):
    code, _, err = run(capsys, "pair", "--structure", "cycle:30", "--formula", "exists z. E(x,z) & E(z,y)",
                       "--budget", "100")
    assert code == 2 and "budget" in err
    code, _, _ = run(capsys, "types", "--structure", "star:20", "--radius", "1")
    assert code == 2


def test_invariant_exit_code(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantViolation("forced")
    monkeypatch.setattr(lab, "mass_transport_check", broken)
    code, _, err = run(capsys, "mtp", "--structure", "path:4", "--phi", "true", "--psi", "true")
    assert code == 3 and "invariant" in err


def test_out_file_round_trip(capsys, tmp_path):
    target = tmp_path / "w.json"
    code, _, _ = run(capsys, "reweight", "--structure", "path:5", "--radius", "1", "--targets", '["1/2", "1/2"]',
                     "--out", str(target))
    assert code == 0
    assert sum(load_structure(target).weight_vector) == 1


def test_marked_structure_file(capsys, tmp_path):
    f = tmp_path / "marked.json"
    dump_structure(with_marks(path_graph(3), {"M1": [1]}), f)
    code, out, _ = run(capsys, "encode", "--structure", str(f))
    assert code == 0 and json.loads(out)["structure"]["relations"]["E"] == []
