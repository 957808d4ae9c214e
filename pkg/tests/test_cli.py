import json
import warnings

import pytest

from quadroll import cli

warnings.filterwarnings("ignore", message="Using `httpx`")

HYP = {"kind": "hyperboloid", "a1": 4.0, "a2": -1.0, "a3": 1.0}


def write_cfg(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_identities_roundtrip_and_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    cfg = write_cfg(tmp_path, "id.json",
                    {"quadric": HYP, "sweep": {"samples": 1000, "rng_seed": 7}})
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert cli.main(["identities", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["identities", "--config", cfg, "--out", str(out2)]) == 0
    b1 = (out1 / "report.json").read_bytes()
    b2 = (out2 / "report.json").read_bytes()
    assert b1 == b2


def test_invalid_config_exits_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "bad.json",
                    {"quadric": {"kind": "hyperboloid", "a1": 4.0, "a2": 1.0,
                                 "a3": 1.0}})
    assert cli.main(["identities", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "a2 < 0" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert cli.main(["identities", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 1


def test_tol_scale_zero_exits_2(tmp_path):
    cfg = write_cfg(tmp_path, "id.json",
                    {"quadric": HYP, "sweep": {"samples": 500, "rng_seed": 7}})
    assert cli.main(["identities", "--config", cfg, "--out", str(tmp_path),
                     "--tol-scale", "0"]) == 2


def test_transform_writes_meshes(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    cfg = write_cfg(tmp_path, "tr.json", {
        "quadric": HYP, "z": 0.4,
        "grid": {"u0_min": 1.4, "u0_max": 2.0, "v0_min": -0.6, "v0_max": 0.0,
                 "nu": 9, "nv": 9},
        "seed": {"type": "trivial"}, "riccati": {"v1_init": 0.8},
        "outputs": {"report_path": "tr.json", "mesh_path": "patch"}})
    assert cli.main(["transform", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tr.json").exists()
    seed_csv = (tmp_path / "patch_seed.csv").read_text().splitlines()
    leaf_csv = (tmp_path / "patch_leaf.csv").read_text().splitlines()
    assert seed_csv[0] == "u0,v0,x,y,z,u1,v1"
    assert len(seed_csv) == 1 + 81
    assert len(leaf_csv) == 1 + 81
    # z = 0 rejected with a field-level message
    cfg0 = write_cfg(tmp_path, "tr0.json", {
        "quadric": HYP, "z": 0.0,
        "grid": {"u0_min": 1.4, "u0_max": 2.0, "v0_min": -0.6, "v0_max": 0.0,
                 "nu": 9, "nv": 9}})
    assert cli.main(["transform", "--config", cfg0, "--out", str(tmp_path)]) == 1


def test_env_var_overrides_out_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, "id.json",
                    {"quadric": HYP, "sweep": {"samples": 300, "rng_seed": 7}})
    env_dir = tmp_path / "envout"
    monkeypatch.setenv(cli.OUT_ENV, str(env_dir))
    assert cli.main(["identities", "--config", cfg, "--out",
                     str(tmp_path / "flagout")]) == 0
    assert (env_dir / "report.json").exists()
    assert not (tmp_path / "flagout" / "report.json").exists()


def test_archimedes_n_flag(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    assert cli.main(["archimedes", "--n", "1000", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "archimedes.json").read_text())
    assert rep["pass"] is True
    assert cli.main(["archimedes", "--n", "1", "--out", str(tmp_path)]) == 1


def test_seed_flag_changes_hash(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    cfg = write_cfg(tmp_path, "id.json",
                    {"quadric": HYP, "sweep": {"samples": 300, "rng_seed": 7}})
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert cli.main(["identities", "--config", cfg, "--out", str(out1)]) == 0
    assert cli.main(["identities", "--config", cfg, "--out", str(out2),
                     "--seed", "8"]) == 0
    r1 = json.loads((out1 / "report.json").read_text())
    r2 = json.loads((out2 / "report.json").read_text())
    assert r1["meta"]["config_hash"] != r2["meta"]["config_hash"]
