"""End-to-end tests against the installed simulator CLI over real pipes."""

import csv
import subprocess
import sys

import yaml

from conftest import CONFIG_DIR


def run_cli(*args, timeout=600):
    proc = subprocess.run(
        ["relaysim", *args], capture_output=True, text=True, timeout=timeout
    )
    assert proc.returncode == 0, f"relaysim {' '.join(args)} failed:\n{proc.stderr}\n{proc.stdout}"
    return proc


def tiny_env_config(tmp_path, **tweaks):
    with open(CONFIG_DIR / "skewed_high.yaml") as fh:
        raw = yaml.safe_load(fh)
    raw["arrivals"]["l_to_r"]["count"] = 400
    raw["arrivals"]["r_to_l"]["count"] = 100
    raw.update(tweaks)
    path = tmp_path / "env.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_zero_agent_matches_none_policy(tmp_path):
    config = tiny_env_config(tmp_path)
    agent_out = tmp_path / "agent_run"
    run_cli(
        "serve-agent", "--config", str(config),
        "--agent-cmd", f"{sys.executable} -m relayagent.zero",
        "--seed", "3", "--out", str(agent_out),
    )
    baseline_out = tmp_path / "baseline"
    run_cli(
        "run", "--config", str(config), "--seed", "3", "--policy", "none",
        "--out", str(baseline_out),
    )
    agent_trace = (agent_out / "trace_ep0_seed3.csv").read_bytes()
    baseline_trace = next(baseline_out.glob("trace_*.csv")).read_bytes()
    assert agent_trace == baseline_trace


def test_short_training_session_over_stdio(tmp_path):
    config = tiny_env_config(tmp_path)
    out = tmp_path / "train_out"
    agent_out = tmp_path / "agent_files"
    run_cli(
        "serve-agent", "--config", str(config),
        "--agent-cmd",
        f"{sys.executable} -m relayagent.train --profile skewed --agent-seed 1 "
        f"--env-seed 3 --out {agent_out}",
        "--out", str(out),
    )
    assert (agent_out / "checkpoint.pt").exists()
    with open(agent_out / "learning_curve.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows, "learning curve is empty"
    trace = out / "trace_ep0_seed3.csv"
    assert trace.exists()
    # Trace validates through the simulator's own checker.
    run_cli("validate-trace", str(trace))


def test_evaluation_from_checkpoint(tmp_path):
    config = tiny_env_config(tmp_path)
    agent_out = tmp_path / "agent_files"
    run_cli(
        "serve-agent", "--config", str(config),
        "--agent-cmd",
        f"{sys.executable} -m relayagent.train --profile skewed --agent-seed 1 "
        f"--env-seed 3 --out {agent_out}",
    )
    eval_out = tmp_path / "eval_out"
    run_cli(
        "serve-agent", "--config", str(config),
        "--agent-cmd",
        f"{sys.executable} -m relayagent.evaluate --checkpoint {agent_out / 'checkpoint.pt'} "
        f"--env-seeds 3,4",
        "--out", str(eval_out),
    )
    traces = sorted(p.name for p in eval_out.glob("trace_*.csv"))
    assert traces == ["trace_ep0_seed3.csv", "trace_ep1_seed4.csv"]

    # Deterministic rollouts: rerunning seed 3 reproduces the trace.
    again = tmp_path / "eval_again"
    run_cli(
        "serve-agent", "--config", str(config),
        "--agent-cmd",
        f"{sys.executable} -m relayagent.evaluate --checkpoint {agent_out / 'checkpoint.pt'} "
        f"--env-seeds 3",
        "--out", str(again),
    )
    assert (again / "trace_ep0_seed3.csv").read_bytes() == (eval_out / "trace_ep0_seed3.csv").read_bytes()


def test_plot_generates_figures(tmp_path):
    config = tiny_env_config(tmp_path)
    out = tmp_path / "runs"
    run_cli("run", "--config", str(config), "--seeds", "0..2", "--out", str(out))
    figures = tmp_path / "figures"
    proc = subprocess.run(
        [sys.executable, "-m", "relayagent.plot", str(out), "--out", str(figures)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    names = sorted(p.name for p in figures.glob("*.png"))
    assert names == [
        "fortune_over_time.png",
        "lost_fees_over_time.png",
        "swap_fees_over_time.png",
    ]


def test_plot_sweep_chart(tmp_path):
    config = tiny_env_config(tmp_path)
    out = tmp_path / "sweep_out"
    run_cli(
        "sweep", "--config", str(config), "--param", "fees.relay_prop",
        "--values", "0.003,0.01", "--seed", "0", "--out", str(out),
    )
    sweep_csv = next(out.glob("sweep_*.csv"))
    figures = tmp_path / "figures"
    proc = subprocess.run(
        [sys.executable, "-m", "relayagent.plot", str(out), "--out", str(figures),
         "--sweep", str(sweep_csv)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (figures / "final_fortune_vs_value.png").exists()


def test_plot_empty_directory_fails(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    proc = subprocess.run(
        [sys.executable, "-m", "relayagent.plot", str(empty)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "no trace CSVs" in proc.stderr


def test_plot_missing_columns_fails(tmp_path):
    bad = tmp_path / "trace_bad_seed0.csv"
    bad.write_text("time,wrong\n0.0,1.0\n")
    proc = subprocess.run(
        [sys.executable, "-m", "relayagent.plot", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode != 0
    assert "missing columns" in proc.stderr
