import numpy as np
import pytest

from cqbandit.algorithm import Trajectory, TrajectoryBatch
from cqbandit.metrics import (
    MetricsError,
    aggregate,
    first_zero_violation_round,
    loglog_slope,
    pathwise_violation_freq,
    queue_at,
    queue_stats,
    regret_curve,
    violation_curve,
)


def fake(cost, mean_reward=None, q=None, seed=0):
    cost = np.asarray(cost, dtype=float)
    if cost.ndim == 1:
        cost = cost[:, None]
    T, K = cost.shape
    mr = np.zeros(T) if mean_reward is None else np.asarray(mean_reward, dtype=float)
    q = np.zeros((T, K)) if q is None else np.asarray(q, dtype=float).reshape(T, K)
    z = np.zeros(T, dtype=np.int64)
    return Trajectory(z, z, mr.copy(), cost, mr, cost.copy(), q, seed, "p", "s", "fake")


def test_loglog_slope_examples():
    t = np.arange(1, 10_001, dtype=float)
    assert loglog_slope(np.sqrt(t), (10, 10_000)) == pytest.approx(0.5)
    assert loglog_slope(3 * t, (1, 10_000)) == pytest.approx(1.0)
    with pytest.raises(MetricsError):
        loglog_slope(t - 5, (1, 100))
    with pytest.raises(MetricsError):
        loglog_slope(t, (100, 20_000))


def test_regret_curve_and_stderr():
    a = fake(np.zeros(3), [0.5, 0.5, 0.5], seed=0)
    b = fake(np.zeros(3), [0.7, 0.7, 0.7], seed=1)
    reg, se = regret_curve([a, b], 0.7)
    np.testing.assert_allclose(reg, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(se, np.std([[0.5, 1.0, 1.5], [0.7, 1.4, 2.1]], axis=0, ddof=1) / np.sqrt(2))
    _, se1 = regret_curve(a, 0.7)
    assert np.all(se1 == 0)


def test_violation_takes_positive_part_per_constraint():
    tr = fake(np.array([[3.0, -5.0]]))
    assert violation_curve(tr)[0] == 3.0
    a = fake([1.0, -1.0], seed=0)
    b = fake([-3.0, 1.0], seed=1)
    np.testing.assert_allclose(violation_curve([a, b]), [0.0, 0.0])
    np.testing.assert_allclose(pathwise_violation_freq([a, b], 0), [0.5, 0.0])
    with pytest.raises(MetricsError):
        pathwise_violation_freq(a, 1)


def test_first_zero_violation_round():
    assert first_zero_violation_round(np.array([1.0, 0.0, 0.5, 0.0, 0.0])) == 4
    assert first_zero_violation_round(np.zeros(4)) == 1
    assert first_zero_violation_round(np.array([0.0, 1.0])) is None


def test_queue_statistic_of_sqrt_queue_is_flat():
    T = 20_000
    s = np.arange(2, T + 2)
    tr = fake(np.zeros(T), q=2.0 * np.sqrt(s))  # Q(s+1) stored at index s-1
    Q = queue_at(tr)
    assert Q[0, 0, 0] == 0.0
    assert queue_stats(tr, 100)[0] == pytest.approx(2.0)
    half = fake(np.zeros(T // 2), q=2.0 * np.sqrt(np.arange(2, T // 2 + 2)))
    assert queue_stats(tr, 100)[0] / queue_stats(half, 100)[0] == pytest.approx(1.0)
    with pytest.raises(MetricsError):
        queue_stats(tr, T + 2)


def test_aggregate_summary():
    runs = TrajectoryBatch.stack([fake(np.full(2000, -0.1), np.full(2000, 0.5), seed=s) for s in range(3)])
    agg = aggregate(runs, 0.6, t_min=10)
    summ = agg.summary(10)
    assert summ["final_regret"] == pytest.approx(200.0)
    assert summ["regret_loglog_slope"] == pytest.approx(1.0)
    assert summ["zero_violation_from"] == 1
    assert summ["final_violation_freq"] == [0.0]


def test_as_batch_rejects_mixed_instances():
    with pytest.raises(MetricsError):
        regret_curve([fake(np.zeros(3)), fake(np.zeros(4))], 0.5)
