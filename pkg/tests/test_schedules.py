import itertools
import math

import numpy as np
import pytest

from textless.schedules import (
    LrrtReport, NoUsableRange, ScheduleConfig, analyze_lrrt, lr_at, lr_curve, multistep_preset,
    oclr_preset, run_lr_range_test,
)


def noisy_quadratic(lam, seed=0, sigma=0.1):
    """Gradient descent on 0.5*lam*(w - xi)^2 with a fresh target xi per step."""
    state = {"w": 1.0}

    def step(xi, lr):
        w = state["w"]
        loss = 0.5 * lam * (w - xi) ** 2
        state["w"] = w - lr * lam * (w - xi)
        return loss

    rng = np.random.default_rng(seed)
    return step, (rng.normal(0, sigma) for _ in itertools.count())


def test_multistep_preset_values():
    s = multistep_preset()
    assert s.milestones == (50_000, 75_000, 100_000, 125_000, 150_000)
    assert lr_at(s, 0) == 4e-4 and lr_at(s, 49_999) == 4e-4
    assert lr_at(s, 50_000) == 2e-4
    assert lr_at(s, 150_000) == 4e-4 / 2 ** 5 == 1.25e-5


def test_oclr_preset_values():
    s = oclr_preset()
    curve = lr_curve(s)
    assert curve[:, 1].max() == 4e-3
    assert lr_at(s, 4500) == 4e-3  # middle of the 9000-step cycle
    assert lr_at(s, 0) == s.base_lr == 4e-3 / 25
    assert lr_at(s, 9000) == s.base_lr
    assert lr_at(s, 30_000) == s.final_lr
    # rises then falls within the cycle, then decays monotonically
    lrs = curve[:, 1]
    assert np.all(np.diff(lrs[:4501]) >= 0) and np.all(np.diff(lrs[4500:]) <= 1e-18)


def test_cyclic_and_restarts():
    s = ScheduleConfig(kind="cyclic", total_steps=10_000, base_lr=1e-4, max_lr=1e-3,
                       step_size=2000)
    assert lr_at(s, 0) == 1e-4 and lr_at(s, 2000) == 1e-3 and math.isclose(lr_at(s, 4000), 1e-4)
    r = ScheduleConfig(kind="cosine_restarts", total_steps=10_000, base_lr=1e-5, max_lr=1e-3,
                       t0=100, t_mult=2)
    assert lr_at(r, 0) == 1e-3 and lr_at(r, 100) == 1e-3 and lr_at(r, 300) == 1e-3
    assert lr_at(r, 50) < 1e-3


def test_schedule_purity_and_bounds():
    s = oclr_preset(1000)
    a = [lr_at(s, k) for k in range(1001)]
    b = [lr_at(s, k) for k in reversed(range(1001))][::-1]
    assert a == b
    with pytest.raises(ValueError):
        lr_at(s, 1001)
    with pytest.raises(ValueError):
        ScheduleConfig(kind="nope")
    with pytest.raises(ValueError):
        ScheduleConfig(milestones=(5, 3))


@pytest.mark.parametrize("lam", [0.5, 5.0, 50.0])
@pytest.mark.parametrize("rate", [1, 5, 50])
def test_lrrt_detects_stability_bound(lam, rate):
    step, data = noisy_quadratic(lam)
    rep = run_lr_range_test(step, data, 1e-4, 1e2, rate)
    assert rep.exploded
    bound = 2.0 / lam
    assert bound / 2 <= rep.explosion_lr <= 2 * bound
    assert rep.suggested_max_lr < rep.explosion_lr
    assert all(r[0] == rate * (i + 1) for i, r in enumerate(rep.records))


def test_lrrt_zero_gradient_guard():
    rep = run_lr_range_test(lambda b, lr: 1.0, itertools.repeat(None), 1e-5, 1.0, num_lrs=50)
    assert not rep.exploded and rep.suggested_max_lr == 1.0


def test_lrrt_more_records_at_finer_rates():
    counts = []
    for rate in (1, 5, 50):
        step, data = noisy_quadratic(5.0)
        rep = run_lr_range_test(step, data, 1e-4, 1e2, rate)
        counts.append(rep.records[-1][0])
    # the explosion is reached after rate * levels steps
    assert counts[0] < counts[1] < counts[2]


def _report(lrs, losses):
    rep = LrrtReport()
    rep.records = [(i + 1, lr, l, l) for i, (lr, l) in enumerate(zip(lrs, losses))]
    return rep


def test_analyze_v_shape():
    lrs = np.logspace(-5, 0, 101)
    x = np.log10(lrs)
    # steepest descent at 1e-3 (cubic-free smooth curve with inflection there)
    losses = 2.0 - np.tanh(2.0 * (x + 3.0)) + 0.5 * np.maximum(x + 1.0, 0) ** 2
    got = analyze_lrrt(_report(lrs, losses))
    assert math.isclose(got, 1e-3, rel_tol=0.06)


def test_analyze_errors_and_explosion_guard():
    lrs = np.logspace(-5, 0, 50)
    with pytest.raises(NoUsableRange):
        analyze_lrrt(_report(lrs, np.exp(np.linspace(0, 5, 50))))
    # plateau, descent, explosion
    x = np.log10(lrs)
    losses = np.where(x < -3, 2.0, np.where(x < -1.5, 2.0 - (x + 3), 0.5 + 30 * (x + 1.5) ** 2))
    rep = _report(lrs, losses)
    rep.exploded, rep.explosion_lr = True, float(lrs[-5])
    assert analyze_lrrt(rep) < rep.explosion_lr
