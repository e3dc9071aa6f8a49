import json

import numpy as np
import pytest

from fracperim import __version__
from fracperim.cli import run
from fracperim.io import load_set, load_space, save_set
from fracperim.space import IndicatorSet


def call(capsys, *argv):
    try:
        code = run(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = call(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_cantor_pipeline(tmp_path, capsys):
    prefix = str(tmp_path / "c")
    assert call(capsys, "gen", "cantor", "--a", "1/4", "--depth", "3", "--raster", "256", "--out", prefix)[0] == 0
    sp = load_space(prefix + ".space.json")
    E = load_set(prefix + ".set.json", sp)
    assert sp.n == 256 and 0 < E.count < 256
    gen = json.loads(open(prefix + ".report.json").read())
    assert gen["version"] == __version__ and gen["config"]["a"] == "1/4"
    rep = report(capsys, "--no-timing", "energy", "--space", prefix + ".space.json", "--set",
                 prefix + ".set.json", "--s", "0.5", "--mode", "interval-1d")
    assert rep["perimeter"] > 0 and rep["runtime_ms"] is None
    # ordered pairs (i, j) with exactly one of them in E
    assert rep["pair_count"] == 2 * E.count * (256 - E.count)
    rep = report(capsys, "codim", "--space", prefix + ".space.json", "--set", prefix + ".set.json",
                 "--what", "frac", "--family", "cantor", "--a", "1/4", "--depths", "8,9,10",
                 "--s-grid", "0.3:0.7:0.1")
    lo, hi = rep["fractional"]["bracket"] if "fractional" in rep else rep["bracket"]
    assert lo <= 0.5 <= hi


def test_codim_mink_with_csv(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    call(capsys, "gen", "grid", "--dim", "1", "--n", "512", "--out", prefix)
    sp = load_space(prefix + ".space.json")
    save_set(IndicatorSet(sp, sp.points[:, 0] < 0.5), tmp_path / "half.json")
    out_csv = tmp_path / "m.csv"
    rep = report(capsys, "codim", "--space", prefix + ".space.json", "--set", str(tmp_path / "half.json"),
                 "--what", "mink", "--t-grid=-0.2:1.4:0.1", "--scales", "0.01,0.2", "--csv", str(out_csv))
    assert json.dumps(rep)
    lines = out_csv.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["t", "scale", "content"] and len(lines) > 10


def test_minimize_pipeline(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    call(capsys, "gen", "grid", "--dim", "2", "--n", "12", "--out", prefix)
    sp = load_space(prefix + ".space.json")
    om = IndicatorSet(sp, np.hypot(*(sp.points - 0.5).T) < 0.2)
    save_set(om, tmp_path / "om.json")
    save_set(IndicatorSet(sp, sp.points[:, 0] < 0.5), tmp_path / "F.json")
    args = ["--no-timing", "minimize", "--space", prefix + ".space.json", "--omega", str(tmp_path / "om.json"),
            "--exterior", str(tmp_path / "F.json"), "--s", "0.5", "--out-set", str(tmp_path / "E.json")]
    first = call(capsys, *args)
    second = call(capsys, *args)
    assert first[0] == 0 and first[1] == second[1]
    rep = json.loads(first[1])
    E = load_set(tmp_path / "E.json", sp)
    assert rep["energy"] >= 0
    assert not np.any(E.mask & ~om.mask & (sp.points[:, 0] >= 0.5))


def test_minimize_oracle(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    call(capsys, "gen", "grid", "--dim", "1", "--n", "24", "--out", prefix)
    sp = load_space(prefix + ".space.json")
    x = sp.points[:, 0]
    save_set(IndicatorSet(sp, (x > 0.3) & (x < 0.7)), tmp_path / "om.json")
    save_set(IndicatorSet(sp, x < 0.5), tmp_path / "F.json")
    rep = report(capsys, "minimize", "--space", prefix + ".space.json", "--omega", str(tmp_path / "om.json"),
                 "--exterior", str(tmp_path / "F.json"), "--s", "0.3", "--oracle")
    assert rep["oracle"]["same_set"] is True
    assert rep["oracle"]["relative_energy_difference"] <= 1e-12


def test_hypfill(tmp_path, capsys):
    prefix = str(tmp_path / "g")
    call(capsys, "gen", "grid", "--dim", "1", "--n", "256", "--out", prefix)
    out = tmp_path / "f.json"
    code, _, err = call(capsys, "hypfill", "--space", prefix + ".space.json", "--levels", "6", "--verify",
                        "--out", str(out), "--csv", str(tmp_path / "r.csv"))
    assert code == 0, err
    rep = json.loads(out.read_text())
    assert rep["version"] == __version__
    assert (tmp_path / "r.csv").read_text().startswith("zeta,")


def test_koch_gen(tmp_path, capsys):
    prefix = str(tmp_path / "k")
    assert call(capsys, "gen", "koch", "--depth", "2", "--n", "64", "--out", prefix)[0] == 0
    assert load_space(prefix + ".space.json").n == 64 * 64


def test_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        prefix = str(tmp_path / f"c{k}")
        call(capsys, "--no-timing", "gen", "cantor", "--a", "1/5", "--depth", "4", "--raster", "128",
             "--out", prefix)
        code, out, _ = call(capsys, "--no-timing", "energy", "--space", prefix + ".space.json",
                            "--set", prefix + ".set.json", "--s", "0.4")
        assert code == 0
        outs.append(json.loads(out)["perimeter"])
        outs.append(open(prefix + ".set.json").read())
    assert outs[0] == outs[2] and outs[1] == outs[3]


def test_exit_codes(tmp_path, capsys):
    assert call(capsys, "reproduce", "no-such-recipe")[0] == 1
    assert call(capsys, "gen", "cantor", "--a", "1/2", "--depth", "3")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"weights": [1, 1],\n "resolution_h": }')
    code, _, err = call(capsys, "energy", "--space", str(bad), "--set", str(bad), "--s", "0.5")
    assert code == 1 and "line 2" in err
    code, _, err = call(capsys, "energy", "--space", str(tmp_path / "missing.json"), "--set", "x", "--s", "0.5")
    assert code == 1 and "error" in err
    prefix = str(tmp_path / "g")
    call(capsys, "gen", "grid", "--dim", "1", "--n", "16", "--out", prefix)
    code, _, err = call(capsys, "energy", "--space", prefix + ".space.json", "--set", prefix + ".set.json",
                        "--s", "1.5")
    assert code == 1
    code, _, err = call(capsys, "codim", "--space", prefix + ".space.json", "--set", prefix + ".set.json",
                        "--what", "frac")
    assert code == 1 and "--family" in err


def test_reproduce_hypfill(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, err = call(capsys, "reproduce", "hypfill-verify", "--out", str(out))
    assert code == 0
    assert "PASS" in err and "FAIL" not in err
    rep = json.loads(out.read_text())
    assert rep["recipe"] == "hypfill-verify" and rep["passed"] is True
