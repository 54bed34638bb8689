import csv
import subprocess
import sys
from pathlib import Path

import pytest

from battle_episodes import harness
from battle_episodes.cli import main
from battle_episodes.config import ConfigError, ExperimentConfig, dump_config, load_config
from battle_episodes.harness import run_experiment, run_game, run_scenario, summarize

ROOT = Path(__file__).resolve().parent.parent
SMALL = ExperimentConfig(games=2, turns=75, seeds=(1, 2))


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------ config

def test_default_file_matches_defaults():
    assert load_config(ROOT / "configs" / "default.ini") == ExperimentConfig()


def test_dump_round_trips(tmp_path):
    cfg = ExperimentConfig(games=3, seeds=(7, 8, 9), wave_first_turn=50)
    p = tmp_path / "c.ini"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


@pytest.mark.parametrize("text", [
    "[world]\nmap_width = 10\n",
    "[nowhere]\nx = 1\n",
    "[experiment]\nbogus = 1\n",
    "[experiment]\ngames = many\n",
    "[experiment]\ngames = 3\nseeds = 1 2\n",
    "[analogy]\nprobability_cutoff = 2\n",
    "[unit.Dragon]\nattack = 9\n",
    "no section header\n",
])
def test_bad_configs_are_rejected(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


# ------------------------------------------------------------------ runs

def test_game_rows_and_shared_growth():
    base = run_game(SMALL, "baseline", 1, 1)
    hist = run_game(SMALL, "histories", 1, 1)
    assert len(base.metrics) == SMALL.turns + 1
    # both conditions follow the same default policy until invasions start
    first = SMALL.wave_first_turn
    assert base.metrics[:first] == hist.metrics[:first]
    assert all(d.phase == "Growth" for d in base.decisions if d.turn < first)


def test_experiment_outputs(tmp_path):
    results = run_experiment(SMALL, tmp_path)
    assert len(results) == 4 and not any(r.error for r in results)
    for cond in ("baseline", "histories"):
        for g in (1, 2):
            assert len(rows(tmp_path / f"metrics_{cond}_{g}.csv")) == SMALL.turns + 1
            assert (tmp_path / "gpools" / f"{cond}_{g}" / "DefenseFailure" / "pool.facts").exists()
    manifest = rows(tmp_path / "cases" / "manifest.csv")
    assert len(manifest) == sum(r.episode_count for r in results)
    assert all((tmp_path / "cases" / m["case-file"]).exists() for m in manifest)
    summary = {r["condition"]: r for r in rows(tmp_path / "summary.csv")}
    assert int(summary["baseline"]["episodes"]) == sum(r.episode_count for r in results if r.condition == "baseline")
    assert not (tmp_path / "errors.csv").exists()


def test_failed_run_is_recorded(tmp_path, monkeypatch):
    real = harness.run_game

    def flaky(cfg, condition, game, seed):
        if condition == "histories" and game == 2:
            raise RuntimeError("boom")
        return real(cfg, condition, game, seed)

    monkeypatch.setattr(harness, "run_game", flaky)
    results = run_experiment(SMALL, tmp_path)
    assert [r.error is not None for r in results] == [False, False, False, True]
    (err,) = rows(tmp_path / "errors.csv")
    assert err["condition"] == "histories" and "boom" in err["error"]
    assert (tmp_path / "summary.csv").exists()


def test_summarize_needs_metrics(tmp_path):
    with pytest.raises(FileNotFoundError):
        summarize(tmp_path)


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        run_scenario("four-attacker", "baseline")


def test_scenario_case_counts():
    assert len(run_scenario("three-attacker", "baseline").cases) == 3
    assert len(run_scenario("three-attacker", "histories").cases) == 1


# ------------------------------------------------------------------ cli

def test_cli_scenario(tmp_path, capsys):
    assert main(["scenario", "--name", "three-attacker", "--condition", "baseline", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[1] for line in out] == ["Success", "Success", "Failure"]
    assert len(list((tmp_path / "cases").glob("*.case"))) == 3


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "small.ini"
    cfg.write_text("[experiment]\ngames = 1\nturns = 65\nseeds = 4\n")
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--condition", "histories", "--out", str(out)]) == 0
    first = capsys.readouterr().out
    assert first.startswith("condition,games,episodes")
    assert main(["summarize", "--in", str(out)]) == 0
    assert capsys.readouterr().out == first


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[world]\nmap_width = 3\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "map must be at least" in capsys.readouterr().err
    assert main(["summarize", "--in", str(tmp_path / "missing")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "battle_episodes", "scenario", "--name", "single-attack",
         "--condition", "histories", "--out", str(tmp_path)],
        capture_output=True, text=True, check=True,
    )
    assert proc.stdout.startswith("E1 Success")
