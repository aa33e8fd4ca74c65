import csv
import io
import json
import subprocess
import sys

import pytest

from petbox.cli import EXIT_ASSERT, EXIT_CAP, EXIT_CONFIG, EXIT_OK, build_function, main


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- pet -------------------------------------------------------------------------


def test_pet_prints_directions(capsys):
    code, out, _ = run(capsys, ["pet", "--family", "e1*(z^2+z); e2*(z^2+z)", "--dim", "2", "--target", "2"])
    assert code == EXIT_OK
    assert "step 1: type (0, 2) m=2" in out
    assert out.count("C_") == 7
    assert "descendence: ok" in out


def test_pet_json_export(capsys, tmp_path):
    dest = tmp_path / "trace.json"
    code, _, _ = run(capsys, ["pet", "--family", "z^2", "--out", str(dest)])
    assert code == EXIT_OK
    data = json.loads(dest.read_text())
    assert data["directions"] == ["2*h1"]
    assert data["descendence_violations"] == []


def test_pet_from_config(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"family": ["z", "z^2"], "dim": 1})
    code, out, _ = run(capsys, ["pet", "--config", cfg])
    assert code == EXIT_OK
    assert "function order: [1, 0] (base 2)" in out


def test_pet_parse_error_exits_config(capsys):
    code, _, err = run(capsys, ["pet", "--family", "z^2 + * z"])
    assert code == EXIT_CONFIG
    assert "position 6" in err or "6" in err


def test_pet_degenerate_family_exits_config(capsys):
    code, _, _ = run(capsys, ["pet", "--family", "z^2; z^2 + 1"])
    assert code == EXIT_CONFIG


def test_pet_member_cap_exits_cap(capsys):
    code, _, err = run(capsys, ["pet", "--family", "z^3; 2*z^3", "--max-states", "500"])
    assert code == EXIT_CAP
    assert "cap exceeded" in err


def test_missing_family_and_bad_config(capsys, tmp_path):
    assert run(capsys, ["pet"])[0] == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert run(capsys, ["norm", "--config", str(bad)])[0] == EXIT_CONFIG
    assert run(capsys, ["norm", "--config", str(tmp_path / "missing.json")])[0] == EXIT_CONFIG
    assert run(capsys, ["norm", "--config", write_cfg(tmp_path, {"dim": 1})])[0] == EXIT_CONFIG


# -- norm and count-op -----------------------------------------------------------------


def test_norm_indicator_with_direct_check(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 8, "s": 2, "H": 2, "check_direct": True})
    code, out, _ = run(capsys, ["norm", "--config", cfg])
    assert code == EXIT_OK
    (row,) = rows_of(out)
    assert row["agree"] == "true"
    assert float(row["power"]) > 0


def test_norm_zero_function(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 2, "N": 4, "function": "zero", "s": 1, "H": 1})
    code, out, _ = run(capsys, ["norm", "--config", cfg])
    assert code == EXIT_OK
    assert float(rows_of(out)[0]["power"]) == 0


def test_norm_explicit_boxes_and_cap(capsys, tmp_path):
    boxes = [[[[1], 2]], [[[2], 1]]]
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 6, "boxes": boxes, "function": "random_pm1(3)"})
    code, out, _ = run(capsys, ["norm", "--config", cfg])
    assert code == EXIT_OK and rows_of(out)[0]["s"] == "2"
    big = write_cfg(tmp_path, {"dim": 2, "N": 4, "s": 1, "H": 200}, "big.json")
    assert run(capsys, ["norm", "--config", big, "--max-states", "1000"])[0] == EXIT_CAP


def test_count_op_example(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 10, "K": 3, "family": ["z", "z^2"]})
    code, out, _ = run(capsys, ["count-op", "--config", cfg])
    assert code == EXIT_OK
    assert float(rows_of(out)[0]["value_re"]) == pytest.approx(16 / 3)


def test_function_constructors():
    f = build_function("random_pm1(7)", 5, 1, 0, 0)
    g = build_function({"kind": "random_pm1", "seed": 7}, 5, 1, 99, 0)
    assert (f.values == g.values).all()
    h = build_function("random_pm1", 5, 1, 1, 0)
    h2 = build_function("random_pm1", 5, 1, 1, 1)
    assert not (h.values == h2.values).all()
    pts = build_function({"kind": "points", "dim": 1, "points": [[[2], [1.0, 0.0]]]}, 5, 1, 0, 0)
    assert pts((2,)) == 1
    with pytest.raises(Exception):
        build_function("unknown_kind", 5, 1, 0, 0)


# -- theorem and concatenation checks --------------------------------------------------


def test_theorem15_small(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 16, "K": 1, "family": ["z^2"], "functions": "progression_hull"})
    code, out, _ = run(capsys, ["theorem15-check", "--config", cfg])
    rows = rows_of(out)
    assert code == EXIT_OK
    assert [r["j"] for r in rows] == ["0", "1"]
    assert all(r["pass"] == "true" for r in rows)
    assert float(rows[0]["delta"]) == pytest.approx(1.0)


def test_theorem15_caps(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 128, "K": 1, "family": ["z^2"]})
    assert run(capsys, ["theorem15-check", "--config", cfg])[0] == EXIT_CONFIG
    cfg = write_cfg(tmp_path, {"dim": 1, "N": 8, "K": 1, "family": ["z^3"]}, "deg.json")
    assert run(capsys, ["theorem15-check", "--config", cfg])[0] == EXIT_CONFIG


def test_concat_check(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 2, "N": 8, "H": 2, "C": "e1*h1*h2 + e2*h1"})
    code, out, _ = run(capsys, ["concat-check", "--config", cfg])
    assert code == EXIT_OK
    (row,) = rows_of(out)
    assert row["target_box"] == "[1, 0]*[+-8] + [0, 1]*[+-4]"
    assert float(row["lhs"]) > 0 and float(row["rhs"]) > 0


# -- equidist sweeps ------------------------------------------------------------------------


def test_equidist_linear_sweep(capsys, tmp_path):
    consts = tmp_path / "consts.json"
    cfg = write_cfg(tmp_path, {"kind": "linear", "ells": [1, 2], "hmax": 3, "Ms": [1, 2], "fixtures_out": str(consts)})
    code, out, _ = run(capsys, ["equidist-sweep", "--config", cfg])
    assert code == EXIT_OK
    rows = rows_of(out)
    assert len(rows) == 6 * 2 + 36 * 2
    assert set(json.loads(consts.read_text())["linear_C"]) == {"1", "2"}


def test_equidist_empty_sweep_is_header_only(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"kind": "linear", "ells": []})
    code, out, _ = run(capsys, ["equidist-sweep", "--config", cfg])
    assert code == EXIT_OK
    assert out == "params,ell,h,M,count,bound,ratio\n"


def test_equidist_density_and_multilinear(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"kind": "density", "l": 1, "t": 3, "H": 5, "etas": ["1/10", "1/5"]})
    code, out, _ = run(capsys, ["equidist-sweep", "--config", cfg])
    assert code == EXIT_OK and len(rows_of(out)) == 2
    pts = [{"t": 3, "ell": 3, "H": 2, "M": 2, "eta": "1/4"}]
    cfg = write_cfg(tmp_path, {"kind": "multilinear", "points": pts}, "m.json")
    code, out, _ = run(capsys, ["equidist-sweep", "--config", cfg])
    assert code == EXIT_OK
    assert rows_of(out)[0]["count"] == "138/15625"


def test_equidist_unknown_kind(capsys, tmp_path):
    assert run(capsys, ["equidist-sweep", "--config", write_cfg(tmp_path, {"kind": "nope"})])[0] == EXIT_CONFIG


def test_equidist_sample_mode_runs(capsys, tmp_path):
    cfg = write_cfg(tmp_path, {"kind": "density", "l": 1, "t": 3, "H": 20, "etas": ["1/10"], "samples": 2000})
    code, out, _ = run(capsys, ["equidist-sweep", "--config", cfg, "--sample", "--seed", "11"])
    assert code == EXIT_OK
    assert float(rows_of(out)[0]["std_error"]) > 0


# -- determinism and entry points -------------------------------------------------------------


@pytest.mark.parametrize(
    "cmd,cfg",
    [
        ("norm", {"dim": 2, "N": 6, "s": 2, "H": 1, "function": "random_unimodular"}),
        ("count-op", {"dim": 1, "N": 8, "K": 2, "family": ["z", "2*z"], "functions": "random_bounded"}),
        ("equidist-sweep", {"kind": "density", "l": 1, "t": 3, "H": 10, "etas": ["1/10"], "samples": 500, "mode": "sample"}),
    ],
)
def test_repeated_runs_are_byte_identical(tmp_path, cmd, cfg):
    path = write_cfg(tmp_path, cfg)
    outs = []
    for i in range(2):
        dest = tmp_path / f"out{i}.csv"
        assert main([cmd, "--config", path, "--seed", "42", "--out", str(dest)]) == EXIT_OK
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "other.csv"
    main([cmd, "--config", path, "--seed", "43", "--out", str(other)])
    if "random" in json.dumps(cfg) or cfg.get("mode") == "sample":
        assert other.read_bytes() != outs[0]


def test_seed_range(capsys):
    assert run(capsys, ["norm", "--seed", "-1"])[0] == EXIT_CONFIG


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "petbox", "pet", "--family", "z^2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "C_1 = 2*h1" in res.stdout


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_CAP) == (0, 1, 2, 3)
