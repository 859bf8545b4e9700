import json

from xlbeam.cli import main

DESK_ARRAY = {"n_antennas": 128, "n_rf": 4, "wavelength": 0.003}
DESK_PATHS = {"count": 3, "gain_vars": [1.0, 0.01, 0.01],
              "angle_range": [-0.866, 0.866], "range_range": [1.0, 20.0]}


def write_config(tmp_path, name, payload) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def sweep_config(trials=12, **extra):
    cfgdict = {
        "experiment": "gain_vs_snr",
        "array": DESK_ARRAY,
        "codebook": {"q": 128, "s": 3},
        "paths": DESK_PATHS,
        "schemes": ["thbt", "hfbs"],
        "snr_grid_db": [10],
        "trials": trials,
        "seed": 3,
    }
    cfgdict.update(extra)
    return cfgdict


class TestSweep:
    def test_runs_and_writes_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "cfg.json", sweep_config())
        out = tmp_path / "results"
        assert main(["--config", cfg, "--out", str(out), "sweep", "--svg"]) == 0
        assert (out / "gain_vs_snr.csv").exists()
        assert (out / "gain_vs_snr.svg").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 3
        assert "gain_vs_snr.csv" in manifest["outputs"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", sweep_config())
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["--config", cfg, "--out", str(out), "sweep"]) == 0
            outs.append((out / "gain_vs_snr.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", sweep_config())
        blobs = []
        for name, threads in (("t1", "1"), ("t2", "2")):
            out = tmp_path / name
            assert main(["--config", cfg, "--threads", threads, "--out",
                         str(out), "sweep"]) == 0
            blobs.append((out / "gain_vs_snr.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_cli_overrides(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", sweep_config(trials=50))
        out = tmp_path / "o"
        assert main(["--config", cfg, "--trials", "6", "--seed", "11", "--out",
                     str(out), "sweep"]) == 0
        text = (out / "gain_vs_snr.csv").read_text()
        assert ",6," in text              # trials column reflects the override
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 11

    def test_unknown_experiment_is_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "cfg.json", sweep_config(experiment="nope"))
        assert main(["--config", cfg, "--out", str(tmp_path / "x"), "sweep"]) == 2
        assert "unknown experiment" in capsys.readouterr().err


class TestConfigErrors:
    def test_missing_key_path_reported(self, tmp_path, capsys):
        bad = sweep_config()
        del bad["codebook"]["s"]
        cfg = write_config(tmp_path, "cfg.json", bad)
        assert main(["--config", cfg, "--out", str(tmp_path / "x"), "sweep"]) == 2
        assert "codebook.s" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "none.json"), "sweep"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_missing_scenario_key_in_train(self, tmp_path, capsys):
        cfgdict = {"scenario": {"n_antennas": 128, "n_rf": 4,
                                "wavelength": 0.003, "snr_db": 10},
                   "codebook": {"q": 128, "s": 3}}
        cfg = write_config(tmp_path, "cfg.json", cfgdict)
        assert main(["--config", cfg, "--out", str(tmp_path / "x"), "train"]) == 2
        assert "scenario.paths.count" in capsys.readouterr().err


class TestSingleRuns:
    def _scenario(self):
        return {"scenario": {**DESK_ARRAY, "paths": DESK_PATHS, "snr_db": 10,
                             "seed": 2},
                "codebook": {"q": 128, "s": 3}}

    def test_train(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "cfg.json", self._scenario())
        out = tmp_path / "res"
        assert main(["--config", cfg, "--out", str(out), "train",
                     "--powers"]) == 0
        result = json.loads((out / "train_result.json").read_text())
        assert result["pilots"] == 32
        assert 0.0 <= result["gain"] <= 1.0
        powers = (out / "train_powers.csv").read_text().splitlines()
        assert powers[0] == "p,power"
        assert len(powers) == 1 + 128 * 3 + 128

    def test_refine(self, tmp_path):
        cfgdict = self._scenario()
        cfgdict["scenario"]["paths"] = {"count": 1, "gain_vars": [1.0],
                                        "angle_range": [-0.5, 0.5],
                                        "range_range": [2.0, 10.0]}
        cfgdict["coarse"] = {"omega": 0.0, "range_m": 5.0}
        cfg = write_config(tmp_path, "cfg.json", cfgdict)
        out = tmp_path / "res"
        assert main(["--config", cfg, "--out", str(out), "refine"]) == 0
        result = json.loads((out / "refine_result.json").read_text())
        assert result["pilots"] == 1

    def test_track(self, tmp_path):
        cfgdict = {
            "array": DESK_ARRAY, "snr_db": 10, "seed": 4,
            "trajectory": {"start": [8.0, 8.0], "velocity": [-0.5, -0.5],
                           "dt": 0.05, "blocks": 12},
            "tracker": {"innovation_gate": 13.8},
            "tracking_channel": {"fading": False, "n_nlos": 0},
        }
        cfg = write_config(tmp_path, "cfg.json", cfgdict)
        out = tmp_path / "res"
        assert main(["--config", cfg, "--out", str(out), "track"]) == 0
        lines = (out / "track_blocks.csv").read_text().splitlines()
        assert lines[0].startswith("t_s,truth_x,truth_y,pred_x")
        assert len(lines) == 13

    def test_codebook(self, tmp_path):
        cfgdict = {"array": DESK_ARRAY, "codebook": {"q": 128, "s": 3}}
        cfg = write_config(tmp_path, "cfg.json", cfgdict)
        out = tmp_path / "res"
        assert main(["--config", cfg, "--out", str(out), "codebook",
                     "--columns"]) == 0
        meta = json.loads((out / "codebook_meta.json").read_text())
        assert meta["columns"] == 128 * 3 + 128
        lines = (out / "codebook_columns.csv").read_text().splitlines()
        assert lines[0] == "p,kind,q,s,theta,distance_m"
        assert len(lines) == 1 + meta["columns"]

    def test_report(self, tmp_path):
        cfgdict = {"array": {"n_antennas": 512, "n_rf": 4, "wavelength": 0.003},
                   "codebook": {"q": 512, "s": 11}}
        cfg = write_config(tmp_path, "cfg.json", cfgdict)
        out = tmp_path / "res"
        assert main(["--config", cfg, "--out", str(out), "report",
                     "--no-measure"]) == 0
        text = (out / "overheads.csv").read_text()
        assert "training,hfbs,Q*(S+1),\"\"" not in text   # no stray quoting
        assert "6144" in text and "548" in text and "129" in text
