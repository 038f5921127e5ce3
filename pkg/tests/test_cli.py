import csv
import json
import shutil
import subprocess
import sys

import pytest
import yaml

from nbbo_frames.cli import main
from nbbo_frames.config import ConfigError, config_from_dict, config_to_dict, dump_config, load_config
from nbbo_frames.scenarios import SCENARIO_DIR, scenario_path

SHIPPED = ["paper_network", "aurora_pair", "race_calibration", "synthetic_nj"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def paper_copy(tmp_path):
    """Editable copy of the shipped exchange-network scenario and its events file."""
    for name in ("paper_network.scenario", "flip_pair.events.csv"):
        shutil.copy(SCENARIO_DIR / name, tmp_path / name)
    return tmp_path / "paper_network.scenario"


def edit(path, **changes):
    raw = yaml.safe_load(path.read_text())
    for k, v in changes.items():
        if v is None:
            raw.pop(k, None)
        else:
            raw[k] = v
    path.write_text(yaml.safe_dump(raw, allow_unicode=True))
    return path


class TestReport:
    def test_latency_rows(self, capsys):
        code, out, _ = run(capsys, "report", "--config", scenario_path("paper_network"))
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "pair, distance_km, light_us, fiber_us"
        assert "Mahwah–Carteret, 43, 143, 215" in lines
        assert "Mahwah–Secaucus, 34, 113, 170" in lines
        assert "Carteret–Secaucus, 27, 90, 135" in lines
        row = next(line for line in lines if line.startswith("NJ cluster–Aurora"))
        _, d, lt, ft = [x.strip() for x in row.split(",")]
        assert d == "1180" and abs(int(lt) - 3940) <= 5 and abs(int(ft) - 5900) <= 10

    def test_csv_outputs(self, capsys, tmp_path):
        code, _, _ = run(capsys, "report", "--config", scenario_path("paper_network"), "--out", tmp_path)
        assert code == 0
        with (tmp_path / "latency_budget.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["pair", "distance_km", "light_us", "fiber_us", "link_us"]
        with (tmp_path / "timescales.csv").open() as fh:
            ts = list(csv.reader(fh))
        assert ts[0] == ["distance_km", "light_us", "fiber_us", "sip_us", "direct_us", "hft_us"]
        assert len(ts) > 100

    def test_no_links_header_only(self, capsys, paper_copy):
        raw = yaml.safe_load(paper_copy.read_text())
        raw["network"]["links"] = []
        paper_copy.write_text(yaml.safe_dump(raw, allow_unicode=True))
        code, out, _ = run(capsys, "report", "--config", paper_copy)
        assert code == 0 and out.splitlines() == ["pair, distance_km, light_us, fiber_us"]


class TestSimulate:
    def test_frame_flip_window(self, capsys, tmp_path):
        code, out, _ = run(capsys, "simulate", "--config", scenario_path("paper_network"), "--out", tmp_path)
        assert code == 0
        div = json.loads((tmp_path / "divergence.json").read_text())
        w = div["arrival_order__vs__lab_frame"]["windows"]
        assert len(w) == 1 and w[0]["start_us"] == 50.0
        assert w[0]["end_us"] == pytest.approx(215.1488, abs=1e-4)
        header = (tmp_path / "nbbo_arrival_order.csv").read_text().splitlines()[0]
        assert header == "t_us,bid_ticks,bid_venue,ask_ticks,ask_venue,crossed"
        es = json.loads((tmp_path / "es_conditions.json").read_text())
        assert es["es1"] and es["es2"]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {p.name for p in tmp_path.iterdir()} - {"manifest.json"}

    def test_deterministic(self, capsys, tmp_path):
        for d in ("a", "b"):
            assert run(capsys, "simulate", "--config", scenario_path("synthetic_nj"), "--out", tmp_path / d)[0] == 0
        assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()

    def test_seed_flag_changes_synthetic_output(self, capsys, tmp_path):
        run(capsys, "simulate", "--config", scenario_path("synthetic_nj"), "--out", tmp_path / "a")
        run(capsys, "simulate", "--config", scenario_path("synthetic_nj"), "--out", tmp_path / "b", "--seed", 7)
        a = json.loads((tmp_path / "a/manifest.json").read_text())
        b = json.loads((tmp_path / "b/manifest.json").read_text())
        assert a["config_hash"] != b["config_hash"]
        assert a["outputs"]["arrivals.csv"] != b["outputs"]["arrivals.csv"]

    def test_missing_seed(self, capsys, paper_copy, tmp_path):
        edit(paper_copy, seed=None)
        code, _, err = run(capsys, "simulate", "--config", paper_copy, "--out", tmp_path / "o")
        assert code == 2 and "seed" in err

    def test_zero_horizon(self, capsys, paper_copy, tmp_path):
        edit(paper_copy, horizon_us=0.0)
        code, _, _ = run(capsys, "simulate", "--config", paper_copy, "--out", tmp_path / "o")
        assert code == 0
        series = (tmp_path / "o/nbbo_lab_frame.csv").read_text().splitlines()
        assert len(series) == 1
        assert json.loads((tmp_path / "o/manifest.json").read_text())["outputs"]

    def test_convention_filter(self, capsys, tmp_path):
        code, _, _ = run(
            capsys, "simulate", "--config", scenario_path("paper_network"), "--out", tmp_path,
            "--convention", "lab_frame", "--convention", "arrival_order",
        )
        assert code == 0
        assert sorted(p.name for p in tmp_path.glob("nbbo_*.csv")) == ["nbbo_arrival_order.csv", "nbbo_lab_frame.csv"]
        code, _, err = run(capsys, "simulate", "--config", scenario_path("paper_network"), "--out", tmp_path,
                           "--convention", "nope")
        assert code == 2

    def test_bad_field_reports_line(self, capsys, paper_copy, tmp_path):
        text = paper_copy.read_text().replace("horizon_us: 1000.0", "horizon_us: soon")
        paper_copy.write_text(text)
        code, _, err = run(capsys, "simulate", "--config", paper_copy, "--out", tmp_path / "o")
        assert code == 2 and "line" in err and "horizon_us" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", "--config", tmp_path / "none.scenario", "--out", tmp_path)
        assert code == 2


class TestFlip:
    def test_fixture_pair(self, capsys):
        code, out, _ = run(capsys, "flip", "--config", scenario_path("paper_network"), "alpha", "beta")
        assert code == 0
        assert "spacelike" in out and "speed = 0.270792c" in out

    def test_equal_ids(self, capsys):
        assert run(capsys, "flip", "--config", scenario_path("paper_network"), "alpha", "alpha")[0] == 2

    def test_unknown_id(self, capsys):
        code, _, err = run(capsys, "flip", "--config", scenario_path("paper_network"), "alpha", "gamma")
        assert code == 2 and "gamma" in err

    def test_timelike(self, capsys, paper_copy):
        events = paper_copy.parent / "flip_pair.events.csv"
        events.write_text(events.read_text().replace("MAHWAH,50", "MAHWAH,5000"))
        code, _, err = run(capsys, "flip", "--config", paper_copy, "alpha", "beta")
        assert code == 3 and "timelike" in err and "d/c" in err

    def test_aurora_pair_spacelike(self, capsys):
        code, out, _ = run(capsys, "flip", "--config", scenario_path("aurora_pair"), "alpha", "beta")
        assert code == 0 and "spacelike" in out


class TestRaces:
    def test_calibration(self, capsys, tmp_path):
        code, out, _ = run(capsys, "races", "--config", scenario_path("race_calibration"), "--out", tmp_path)
        assert code == 0
        assert "race window 1108 µs, feed ratio 56.4:1" in out
        summary = json.loads((tmp_path / "race_summary.json").read_text())
        assert summary["window_us"] == 1108 and summary["feed_ratio"] > 50
        assert 0.9 < summary["fast_win_fraction"] < 1.0
        header = (tmp_path / "races.csv").read_text().splitlines()[0]
        assert header == "trigger_id,trigger_venue,stale_id,stale_venue,t_us,window_us,winner,improvement_ticks,profit"

    def test_missing_feeds(self, capsys, paper_copy):
        edit(paper_copy, feeds=None)
        code, _, err = run(capsys, "races", "--config", paper_copy)
        assert code == 2 and "feeds" in err


class TestConfigRoundTrip:
    @pytest.mark.parametrize("name", SHIPPED)
    def test_dict_round_trip(self, name):
        cfg = load_config(scenario_path(name))
        again = config_from_dict(config_to_dict(cfg), cfg.base_dir)
        assert again == cfg
        assert config_to_dict(again) == config_to_dict(cfg)

    @pytest.mark.parametrize("name", SHIPPED)
    def test_text_round_trip(self, name, tmp_path):
        cfg = load_config(scenario_path(name))
        p = tmp_path / "x.scenario"
        p.write_text(dump_config(cfg))
        assert config_from_dict(config_to_dict(load_config(p)), cfg.base_dir) == cfg

    def test_digest_tracks_seed(self):
        cfg = load_config(scenario_path("synthetic_nj"))
        assert cfg.digest() == load_config(scenario_path("synthetic_nj")).digest()
        assert cfg.digest() != cfg.with_seed(cfg.seed + 1).digest()

    def test_no_conventions(self):
        raw = config_to_dict(load_config(scenario_path("paper_network")))
        raw["conventions"] = []
        with pytest.raises(ConfigError):
            config_from_dict(raw).validate()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nbbo_frames", "report", "--config", str(scenario_path("paper_network"))],
        capture_output=True, text=True, check=True,
    )
    assert "Mahwah–Carteret, 43, 143, 215" in proc.stdout
