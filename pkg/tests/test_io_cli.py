import json
import subprocess
import sys

import numpy as np
import pytest

from cqbandit import cli
from cqbandit.algorithm import run
from cqbandit.dual import Schedule
from cqbandit.experiment import (
    ConfigError,
    ExperimentConfig,
    config_from_string,
    config_to_string,
    preset_instance,
    run_experiment,
    run_replications,
)
from cqbandit.instances import InstanceError
from cqbandit.io import instance_from_string, instance_to_string, read_trajectory_csv, write_trajectory_csv

MAB_FILE = """\
[meta]
name = mab-file
K = 1
T = 500
delta = auto

[contexts]
p = 1.0

[onehot]
J = 4

[reward]
theta_star = 0.1 0.2 0.4 0.7

[cost.1]
kind = shifted-bernoulli
prob = 0 0.4 0.5 0.2
shift = 0.5
"""


def test_instance_file_matches_preset():
    inst = instance_from_string(MAB_FILE)
    ref = preset_instance("mab", 500)
    assert inst.T == 500 and inst.delta == 0.5
    np.testing.assert_array_equal(inst.mean_costs, ref.mean_costs)
    np.testing.assert_array_equal(inst.mean_rewards, ref.mean_rewards)


@pytest.mark.parametrize("name", ["mab", "ward", "linear", "linear-cost"])
def test_instance_round_trip(name):
    inst = preset_instance(name, 123)
    back = instance_from_string(instance_to_string(inst))
    assert (back.T, back.K, back.J, back.d) == (inst.T, inst.K, inst.J, inst.d)
    np.testing.assert_array_equal(back.features.phi, inst.features.phi)
    np.testing.assert_array_equal(back.mean_costs, inst.mean_costs)
    np.testing.assert_array_equal(back.reward.theta_star, inst.reward.theta_star)
    assert back.delta == inst.delta


@pytest.mark.parametrize("text", [
    MAB_FILE.replace("K = 1", "K = 2"),
    MAB_FILE.replace("prob = 0 0.4 0.5 0.2", "prob = 0 0.4 0.5"),
    MAB_FILE.replace("[reward]", "[rewards]"),
    MAB_FILE.replace("p = 1.0", "p = 0.5"),
    MAB_FILE.replace("theta_star = 0.1 0.2 0.4 0.7", "theta_star = 0.1 0.2 0.4 1.7"),
    MAB_FILE.replace("kind = shifted-bernoulli", "kind = poisson"),
    "not an ini file",
])
def test_instance_file_errors(text):
    with pytest.raises(InstanceError):
        instance_from_string(text)


def test_trajectory_csv_schema(tmp_path, ward):
    inst = ward.with_horizon(50)
    tr = run(inst, "pessimistic-optimistic", Schedule.for_instance("experiment-ward", inst), 0, trace=True)
    path = tmp_path / "t.csv"
    write_trajectory_csv(tr, path)
    cols = read_trajectory_csv(path)
    expected = ["t", "context", "action", "reward", "cost_1", "cost_2", "cost_3", "q_1", "q_2", "q_3",
                "cum_reward", "cum_cost_1", "cum_cost_2", "cum_cost_3", "beta_sqrt", "theta_err"]
    assert list(cols) == expected
    np.testing.assert_array_equal(cols["action"], tr.action)
    np.testing.assert_array_equal(cols["q_2"], tr.q[:, 1])
    np.testing.assert_array_equal(cols["cum_cost_1"], np.cumsum(tr.cost[:, 0]))


def test_config_round_trip_and_errors():
    cfg = ExperimentConfig(instance="ward", schedule="experiment-ward", T=300, seeds=[3, 1], delta=0.04, trace_confidence=True)
    assert config_from_string(config_to_string(cfg)) == cfg
    with pytest.raises(ConfigError):
        config_from_string("[experiment]\nfrobnicate = 1\n")
    with pytest.raises(ConfigError):
        config_from_string("[experiment]\npolicy = greedy\n")
    with pytest.raises(ConfigError):
        config_from_string("[experiment]\ndelta = 0\n")
    with pytest.raises(ConfigError):
        config_from_string("[other]\n")


def test_workers_do_not_change_results(mab):
    inst = mab.with_horizon(300)
    sched = Schedule.for_instance("experiment-mab", inst)
    a = run_replications(inst, "pessimistic-optimistic", sched, range(4), workers=1)
    b = run_replications(inst, "pessimistic-optimistic", sched, range(4), workers=2)
    np.testing.assert_array_equal(a.action, b.action)
    np.testing.assert_array_equal(a.seeds, b.seeds)


def test_run_experiment_is_byte_deterministic(tmp_path):
    cfg = ExperimentConfig(instance="ward", schedule="experiment-ward", T=400, n_replications=3, workers=1)
    s1 = run_experiment(cfg, tmp_path / "a")
    s2 = run_experiment(cfg, tmp_path / "b")
    assert s1 == s2
    for name in ("aggregate.csv", "summary.json", "trajectory_seed2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "aggregate.csv").read_text().splitlines()[0]
    assert header == "tau,regret,regret_stderr,violation,viol_freq_1,viol_freq_2,viol_freq_3"


# -- command line -----------------------------------------------------------


def _config(tmp_path, **extra):
    body = {"instance": "mab", "T": "300", "n_replications": "2", "workers": "1", "output_dir": str(tmp_path / "out")}
    body.update(extra)
    path = tmp_path / "exp.ini"
    path.write_text("[experiment]\n" + "".join(f"{k} = {v}\n" for k, v in body.items()))
    return path


def test_cli_run(tmp_path, capsys):
    assert cli.main(["run", str(_config(tmp_path)), "--T", "200"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["T"] == 200 and summary["n_runs"] == 2
    assert (tmp_path / "out" / "trajectory_seed1.csv").exists()


def test_cli_run_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 1
    assert cli.main(["run", str(_config(tmp_path)), "--delta", "0"]) == 2
    assert cli.main(["run", str(_config(tmp_path, schedule="theory-main", instance="linear")), "--delta", "0.5"]) == 0
    assert cli.main(["run", str(_config(tmp_path, policy="greedy"))]) == 2


def test_cli_baseline(capsys):
    assert cli.main(["baseline", "mab"]) == 0
    out = capsys.readouterr().out
    assert "objective: 0.7" in out and "delta_star: 0.5" in out and "0,0,0,0,1" in out
    assert cli.main(["baseline", "mab", "--eps", "0.6"]) == 2
    assert cli.main(["baseline", "no-such-file.ini"]) == 1


def test_cli_instance_validate(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(MAB_FILE)
    assert cli.main(["instance", "validate", str(good)]) == 0
    assert "ok: mab-file" in capsys.readouterr().out
    bad = tmp_path / "bad.ini"
    bad.write_text(MAB_FILE.replace("p = 1.0", "p = 0.3"))
    assert cli.main(["instance", "validate", str(bad)]) == 2


@pytest.mark.parametrize("argv", [["verify", "bogus"], ["frobnicate"], ["baseline"], ["baseline", "mab", "--eps", "-1"]])
def test_cli_usage_errors(argv):
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 64


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "cqbandit.cli", "baseline", "mab"], capture_output=True, text=True)
    assert res.returncode == 0 and "status: optimal" in res.stdout
