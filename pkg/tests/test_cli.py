import json
import os

import pytest
import yaml

from strongweak import __version__
from strongweak.cli import config_hash, main, parse_range, set_path
from strongweak.errors import ConfigError

SMALL_TOF = {
    "scenario": "tof",
    "seed": 42,
    "output_dir": "tof_small",
    "grid": {"x_min": -150.0, "x_max": 150.0, "n_points": 2048},
    "potential": {"kind": "free"},
    "state": {"gamma": 0.25, "center": -30.0, "momentum": 5.0},
    "propagation": {"dt": 1.0e-3, "t_max": 24.0, "record_stride": 40},
    "protocol": {"detectors": [30.0], "tolerance": 1.0e-6, "n_events": 20000, "bins": 20,
                 "coverage_min": 0.9},
}

SPIN = {
    "scenario": "spin",
    "output_dir": "spin_small",
    "protocol": {"alpha": [0.5, 1.5], "phi": {"start": 0.0, "stop": 3.0, "num": 7}},
}


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("STRONGWEAK_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def write_config(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


class TestRun:
    def test_missing_grid_is_a_config_error(self, out_root, capsys):
        cfg = {k: v for k, v in SMALL_TOF.items() if k != "grid"}
        assert main(["run", write_config(out_root / "c.yaml", cfg)]) == 2
        assert "'grid'" in capsys.readouterr().err

    def test_unknown_scenario(self, out_root, capsys):
        assert main(["run", write_config(out_root / "c.yaml", {"scenario": "nope"})]) == 2
        assert "scenario" in capsys.readouterr().err

    def test_unreadable_config(self, out_root):
        assert main(["run", str(out_root / "absent.yaml")]) == 2

    def test_degenerate_angle_names_its_location(self, out_root, capsys):
        cfg = dict(SPIN, protocol=dict(SPIN["protocol"], alpha=[0.0]))
        assert main(["run", write_config(out_root / "c.yaml", cfg)]) == 1
        assert "spin.weak_spin_from_intensities" in capsys.readouterr().err

    def test_spin_run_writes_hashed_csv_and_manifest(self, out_root):
        path = write_config(out_root / "c.yaml", SPIN)
        assert main(["run", path]) == 0
        out = out_root / "spin_small"
        digest = config_hash(SPIN)
        first = (out / "sweep.csv").read_text().splitlines()[0]
        assert first == f"# config_hash: {digest}"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["passed"] and manifest["config_hash"] == digest
        assert manifest["version"] == __version__

    def test_tof_outputs_are_byte_identical_across_runs(self, out_root):
        path = write_config(out_root / "c.yaml", SMALL_TOF)
        assert main(["run", path, "--output-dir", "a"]) == 0
        assert main(["run", path, "--output-dir", "b"]) == 0
        names = sorted(n for n in os.listdir(out_root / "a") if n.endswith(".csv"))
        assert "click_estimate.csv" in names
        digest = config_hash(SMALL_TOF)
        for n in names:
            a = (out_root / "a" / n).read_bytes()
            assert a == (out_root / "b" / n).read_bytes()
            assert a.startswith(f"# config_hash: {digest}\n".encode())

    def test_verify_writes_nothing(self, out_root, capsys):
        assert main(["verify", write_config(out_root / "c.yaml", SPIN)]) == 0
        assert "all checks passed" in capsys.readouterr().out
        assert not (out_root / "spin_small").exists()

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestScan:
    def test_points_and_manifest(self, out_root):
        path = write_config(out_root / "c.yaml", SPIN)
        rc = main(["scan", path, "--param", "protocol.alpha=0.5,1.0,2.0", "--workers", "1"])
        assert rc == 0
        base = out_root / "spin_small"
        summary = json.loads((base / "scan_manifest.json").read_text())
        assert [p["overrides"]["protocol.alpha"] for p in summary["points"]] == [0.5, 1.0, 2.0]
        for p in summary["points"]:
            assert (base / p["directory"] / "sweep.csv").exists()

    def test_scan_needs_a_parameter(self, out_root):
        assert main(["scan", write_config(out_root / "c.yaml", SPIN)]) == 2


class TestHelpers:
    def test_parse_range(self):
        assert parse_range("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert parse_range("2:3:1") == [2.0]
        assert parse_range("1, 2.5,x") == [1, 2.5, "x"]
        with pytest.raises(ConfigError):
            parse_range("a:b:3")
        with pytest.raises(ConfigError):
            parse_range("0:1:0")

    def test_set_path_creates_and_indexes(self):
        cfg = {"protocol": {"detectors": [1.0, 2.0]}}
        set_path(cfg, "protocol.detectors.1", 5.0)
        set_path(cfg, "state.gamma", 0.5)
        assert cfg == {"protocol": {"detectors": [1.0, 5.0]}, "state": {"gamma": 0.5}}

    def test_hash_ignores_output_dir(self):
        assert config_hash(SPIN) == config_hash(dict(SPIN, output_dir="elsewhere"))
        assert config_hash(SPIN) != config_hash(dict(SPIN, seed=1))

    def test_shipped_configs_parse(self):
        from strongweak.scenarios import validate
        here = os.path.join(os.path.dirname(__import__("strongweak").__file__), "configs")
        for name in os.listdir(here):
            with open(os.path.join(here, name)) as fh:
                validate(yaml.safe_load(fh))
