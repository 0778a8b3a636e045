import csv
import io
import json

import numpy as np
import pytest

from berglab import __version__
from berglab import cli
from berglab import kernel as ker
from berglab import normalization as nrm
from berglab.errors import DegenerateGramError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    return lines[0], list(csv.reader(io.StringIO("\n".join(lines[1:]))))


def test_constants(capsys):
    code, out, _ = run(["constants", "--n-max", "60", "--table-n", "3"], capsys)
    assert code == 0
    prov, rows = _table(out)
    assert f"berglab={__version__}" in prov and "seed=0" in prov
    assert rows[0][:3] == ["n", "m", "j_ball"]
    assert rows[1][:5] == ["2", "2", "9/2*pi^2", "4*pi^2", "false"]


def test_invariants_closed_form_and_check(capsys):
    code, out, _ = run(["invariants", "--domain", "ball", "--closed-form", "--check"], capsys)
    assert code == 0
    _, rows = _table(out)
    J = [float(r[rows[0].index("J")]) for r in rows[1:]]
    assert np.allclose(J, 4.5 * np.pi ** 2, rtol=1e-12)


def test_output_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sandwich", "--delta", "0.1,0.01", "--samples", "20000", "--seed", "4"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    prov, rows = _table(a.read_text())
    assert "samples=20000" in prov and "seed=4" in prov
    assert len(rows) == 3


def test_check_failure_exit_code(capsys):
    code, _, err = run(["sandwich", "--delta", "0.3,0.1", "--samples", "20000", "--check"],
                       capsys)
    assert code == 4 and "check failed" in err


def test_invalid_config_exit_codes(tmp_path, capsys):
    assert run(["headline", "--n", "2", "--m", "3"], capsys)[0] == 2
    assert run(["invariants", "--n", "0"], capsys)[0] == 2
    assert run(["invariants", "--points", "2,0"], capsys)[0] == 2
    assert run(["sandwich", "--delta", "1.5"], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"n": 2, "bogus": 1}))
    assert run(["sandwich", "--config", str(bad)], capsys)[0] == 2
    bad.write_text("{not json")
    assert run(["sandwich", "--config", str(bad)], capsys)[0] == 2


def test_config_file_values(tmp_path, capsys):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"experiment": "sandwich", "delta": [0.01], "samples": 5000,
                                   "seed": 2, "epsilon_hat": 0.99}))
    code, out, _ = run(["sandwich", "--config", str(cfgfile), "--check"], capsys)
    assert code == 0
    _, rows = _table(out)
    assert rows[1][:2] == ["0.01", "0.99"] and rows[1][5] == "2"


def test_numeric_degeneracy_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise DegenerateGramError("forced")
    monkeypatch.setattr(ker, "build_kernel", boom)
    assert run(["invariants", "--domain", "ball"], capsys)[0] == 3


def test_normalize_command(tmp_path, capsys):
    src = tmp_path / "raw.json"
    src.write_text(nrm.random_raw(3, 2, 1).to_json())
    out = tmp_path / "res.json"
    assert cli.main(["normalize", "--input", str(src), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["normal_form_residual"] < 1e-10 and doc["round_trip_error"] < 1e-9
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "m": 2, "linear_parts": [[[0, 1], [0, 0]], [[0, 2], [0, 0]]],
                               "quadratic_parts": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]] * 2}))
    assert cli.main(["normalize", "--input", str(bad)]) == 2


def test_plot_script(tmp_path, capsys):
    out, plot = tmp_path / "s.csv", tmp_path / "s.gp"
    code = cli.main(["sandwich", "--delta", "0.1", "--samples", "5000", "--out", str(out),
                     "--plot-script", str(plot)])
    assert code == 0
    text = plot.read_text()
    assert str(out) in text and text.startswith("set datafile separator")


def test_ramadanov_dilation_check(capsys):
    code, out, _ = run(["ramadanov", "--s", "1,2", "--samples", "300000", "--degree", "6",
                        "--check"], capsys)
    assert code == 0
    _, rows = _table(out)
    assert len(rows) == 3


def test_localization_small_budget(capsys):
    code, out, _ = run(["localization", "--t", "0.5,0.9", "--samples", "300000",
                        "--degree", "6"], capsys)
    assert code == 0
    _, rows = _table(out)
    assert rows[0] == ["t", "K_full", "K_cut", "ratio", "deviation"]


def test_headline_small(capsys):
    code, out, _ = run(["headline", "--delta", "0.5,0.1", "--samples", "200000",
                        "--degree", "6"], capsys)
    assert code == 0
    _, rows = _table(out)
    assert rows[1][-1] == "false"  # origin not yet inside at delta = 0.5
    assert rows[-1][0] == "product-model"
    assert float(rows[-1][2]) == pytest.approx(4 * np.pi ** 2, rel=1e-10)
