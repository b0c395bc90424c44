import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from whardy.cli import EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, SCHEMAS, load_schema, main, read_config_file

FIXTURES = Path(__file__).parent / "fixtures"


def run(*argv):
    return main([str(a) for a in argv])


def validate(name, path):
    jsonschema.validate(json.loads(Path(path).read_text()), load_schema(name))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    base = ["--Ng", 256, "--seed", 7]
    assert run("fixture", *base, "--kind", "molecule", "--out", d / "mol.hlgf") == EXIT_OK
    assert run("fixture", *base, "--kind", "zero", "--out", d / "zero.hlgf") == EXIT_OK
    assert run("decompose", "--input", d / "mol.hlgf", "--N", 4, "--out", d / "dec.json") == EXIT_OK
    return d


def test_schemas_are_published():
    for name in SCHEMAS:
        jsonschema.Draft202012Validator.check_schema(load_schema(name))
    with pytest.raises(KeyError):
        load_schema("nothing")


def test_filters_default_passes(tmp_path):
    assert run("filters", "--out", f"{tmp_path}/") == EXIT_OK
    validate("filters", tmp_path / "manifest.json")
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["passed"] and m["seed"] == 0


def test_filters_jmax_beyond_nyquist(capsys):
    assert run("filters", "--jmax", 9) == EXIT_USAGE
    assert "maximal admissible j_max is 6" in capsys.readouterr().err


def test_filters_tolerance_below_rounding(capsys, tmp_path):
    # residuals sit at a few 1e-16 in double precision, so 1e-17 must fail
    assert run("filters", "--tol", 1e-17, "--out", f"{tmp_path}/") == EXIT_TOLERANCE
    err = capsys.readouterr().err
    assert "residual" in err.lower()
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert not m["passed"]
    validate("filters", tmp_path / "manifest.json")


def test_decompose_molecule(workdir):
    validate("decomposition", workdir / "dec.json")
    d = json.loads((workdir / "dec.json").read_text())
    assert d["certificate"]["valid"] and d["atoms"] and d["params"]["seed"] == 0
    assert (workdir / "dec.blob").exists()


def test_decompose_zero(workdir):
    out = workdir / "zdec.json"
    assert run("decompose", "--input", workdir / "zero.hlgf", "--N", 4, "--out", out) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["atoms"] == [] and d["blocks"] == []
    assert d["certificate"]["reconstruction"]["l2"] == 0
    validate("decomposition", out)


def test_decompose_moment_floor(workdir, capsys):
    code = run("decompose", "--input", workdir / "mol.hlgf", "--N", 4, "--p", 0.5, "--s", 0, "--out", workdir / "bad.json")
    assert code == EXIT_USAGE
    assert "s ≥ max{⌊n(q_ω/p−1)⌋, −1}" in capsys.readouterr().err


def test_verify_round_trip(workdir):
    out = workdir / "cert.json"
    assert run("verify", "--dec", workdir / "dec.json", "--input", workdir / "mol.hlgf", "--out", out) == EXIT_OK
    validate("certificate", out)
    assert json.loads(out.read_text())["valid"]


def test_verify_hand_edited_lambda(workdir, tmp_path, capsys):
    d = json.loads((workdir / "dec.json").read_text())
    d["atoms"][0]["lambda"] *= 2
    (tmp_path / "dec.json").write_text(json.dumps(d))
    shutil.copy(workdir / "dec.blob", tmp_path / "dec.blob")
    out = tmp_path / "cert.json"
    assert run("verify", "--dec", tmp_path / "dec.json", "--input", workdir / "mol.hlgf", "--out", out) == EXIT_TOLERANCE
    cert = json.loads(out.read_text())
    # the stored atom is unchanged, so only the reconstruction notices the edit
    assert not cert["reconstruction"]["ok"] and cert["failed"] == 0
    assert "reconstruction" in capsys.readouterr().err


def test_verify_foreign_fixture(tmp_path):
    out = tmp_path / "cert.json"
    code = run(
        "verify", "--dec", FIXTURES / "haar_decomposition.json", "--input", FIXTURES / "haar_input.json", "--out", out
    )
    assert code == EXIT_OK
    validate("certificate", out)


def test_verify_missing_file(capsys):
    assert run("verify", "--dec", "/nonexistent.json", "--input", "/nonexistent.hlgf") == EXIT_USAGE


def test_opbench(tmp_path):
    out = tmp_path / "bench"
    code = run(
        "opbench", "--Ng", 256, "--op", "damped-riesz:delta=1,eps=1", "--source", "hpw:p=1,w=const",
        "--target", "lpw:p=1,w=const", "--family", "molecules:6", "--out", out,
    )
    assert code == EXIT_OK
    validate("opbench", out / "opbench.json")
    assert (out / "opbench_256.csv").read_text().startswith("input_id,source_norm,target_norm,ratio\n")
    assert (out / "opbench_512.csv").exists()


def test_opbench_drift_limit(tmp_path, capsys):
    code = run(
        "opbench", "--Ng", 128, "--op", "identity", "--source", "lpw:p=1", "--target", "lpw:p=1",
        "--family", "molecules:3", "--max-drift", 0, "--out", tmp_path,
    )
    assert code == EXIT_TOLERANCE
    assert "drift" in capsys.readouterr().err


def test_weights_and_calibrate(tmp_path):
    assert run("weights", "--Ng", 256, "--weight", "power:0.5", "--out", tmp_path / "w.json") == EXIT_OK
    validate("weights", tmp_path / "w.json")
    w = json.loads((tmp_path / "w.json").read_text())
    assert abs(w["critical_index"] - 1.5) < 0.1
    assert run("calibrate", "--Ng", 512, "--out", tmp_path / "c.json") == EXIT_OK
    validate("calibration", tmp_path / "c.json")
    assert run("calibrate", "--Ng", 512, "--target", 1e-20, "--out", tmp_path / "e.json") == EXIT_TOLERANCE
    validate("calibration", tmp_path / "e.json")
    assert "error" in json.loads((tmp_path / "e.json").read_text())


def test_energy_csv(workdir, capsys):
    assert run("energy", "--input", workdir / "mol.hlgf") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "j,l2,linf" and len(lines) > 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\nNg = 256\nseed = 3   # inline comment\nweight = power:0.5\n")
    assert read_config_file(cfg) == {"Ng": 256, "seed": 3, "weight": "power:0.5"}
    assert run("weights", "--config", cfg, "--out", tmp_path / "w.json") == EXIT_OK
    w = json.loads((tmp_path / "w.json").read_text())
    assert w["seed"] == 3 and w["grid"]["N_g"] == 256
    # flags override the file
    assert run("weights", "--config", cfg, "--seed", 9, "--out", tmp_path / "w9.json") == EXIT_OK
    assert json.loads((tmp_path / "w9.json").read_text())["seed"] == 9
    cfg.write_text("colour = blue\n")
    assert run("weights", "--config", cfg) == EXIT_USAGE
    assert "unknown config key" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert run("filters", "--Ng", 1000) == EXIT_USAGE
    assert run("frobnicate") == EXIT_USAGE
    assert run("weights", "--weight", "zigzag") == EXIT_USAGE
    assert run("opbench", "--op", "identity", "--source", "lpw:p=1", "--target", "lpw:p=1", "--refine", 1) == EXIT_USAGE


def test_thread_variable(monkeypatch, capsys):
    monkeypatch.setenv("HARDY_THREADS", "many")
    assert run("weights", "--Ng", 64) == EXIT_USAGE
    assert "HARDY_THREADS" in capsys.readouterr().err


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.is_file()}


@pytest.mark.parametrize("threads", ["1", "4"])
def test_outputs_are_byte_identical(tmp_path, monkeypatch, threads):
    monkeypatch.setenv("HARDY_THREADS", threads)
    snaps = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        base = ["--Ng", 256, "--seed", 11]
        assert run("fixture", *base, "--kind", "mixed:5", "--out", d / "f.hlgf") == EXIT_OK
        assert run("decompose", "--input", d / "f.hlgf", "--N", 4, "--out", d / "dec.json") == EXIT_OK
        assert run("verify", "--dec", d / "dec.json", "--input", d / "f.hlgf", "--out", d / "cert.json") == EXIT_OK
        assert run("filters", *base, "--out", d / "manifest.json") == EXIT_OK
        assert run("weights", *base, "--weight", "power:0.3", "--out", d / "w.json") == EXIT_OK
        assert run("calibrate", *base, "--out", d / "cal.json") == EXIT_OK
        assert run(
            "opbench", *base, "--op", "local-fractional:alpha=0.5", "--source", "hpw:p=1",
            "--target", "lpw:p=2", "--family", "molecules:4", "--out", d / "bench",
        ) == EXIT_OK
        assert run("energy", "--input", d / "f.hlgf", "--out", d / "energy.csv") == EXIT_OK
        snap = _snapshot(d)
        snap.update({f"bench/{k}": v for k, v in _snapshot(d / "bench").items()})
        snaps.append(snap)
    assert snaps[0].keys() == snaps[1].keys()
    for name in snaps[0]:
        assert snaps[0][name] == snaps[1][name], name


def test_console_script(tmp_path):
    exe = shutil.which("whardy")
    cmd = [exe] if exe else [sys.executable, "-m", "whardy.cli"]
    res = subprocess.run(cmd + ["filters", "--Ng", "256"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["passed"]
    res = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "kernels" in res.stdout
