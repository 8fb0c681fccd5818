"""Simulator: chain statistics, exact limits, determinism, cross-checks."""
import numpy as np
import pytest

from gearq.channel import build_half_channel, symmetric_composite
from gearq.coded import coded_metrics
from gearq.protocols import ProtocolParams, harq_metrics, uncoded_metrics
from gearq.sim import SimConfig, ge_run, ge_step, pooled_estimate, simulate


def half(eps, r=0.3, eg=0.0, eb=1.0):
    return build_half_channel(r, eg, eb, eps)


def cfg(scheme="uncoded", eps=0.3, T=10, seed=0, horizon=20_000, **kw):
    params_kw = {}
    for key in ("M", "N", "gamma_over_rho"):
        if key in kw:
            params_kw[key] = kw.pop(key)
    p = ProtocolParams(k=5, T=T, scheme=scheme, **params_kw)
    h = half(eps)
    return SimConfig(params=p, fwd=h, rev=h, seed=seed, horizon=horizon, **kw)


def test_ge_step_absorbing():
    h = build_half_channel(0.3, 0.0, 1.0, 0.0)     # q = 0: G absorbing
    state = 0
    rng = np.random.default_rng(0)
    for _ in range(100):
        state, _ = ge_step(h, state, rng.random(), rng.random())
        assert state == 0


def test_ge_step_memoryless_iid():
    # r = 0 with constant erasure rate: i.i.d. erasures
    h = build_half_channel(0.0, 0.4, 0.4, 0.4)
    _, erased = ge_run(h, 200_000, seed=1)
    assert erased.mean() == pytest.approx(0.4, abs=0.005)


def test_ge_run_stationary_fraction():
    h = build_half_channel(0.3, 0.0, 1.0, 0.5)      # q = 0.3: pi_G = 0.5
    states, erased = ge_run(h, 1_000_000, seed=2)
    assert (states == 0).mean() == pytest.approx(0.5, abs=0.005)
    # per-slot erasure rate converges to eps within 3 sigma
    assert erased.mean() == pytest.approx(0.5, abs=0.0015)


def test_error_free_exactness():
    st = simulate(cfg(eps=0.0, horizon=10_000))
    assert st.tau_mean_hat == 1.0
    assert st.delay_mean_hat == 5.0
    assert st.tau_stderr == 0.0


def test_determinism():
    a = simulate(cfg(seed=7))
    b = simulate(cfg(seed=7))
    assert a == b
    c = simulate(cfg(seed=8))
    assert c != a


def test_sample_floors():
    st = simulate(cfg(eps=0.5, horizon=5_000))
    assert st.tau_mean_hat >= 1.0
    assert st.delay_mean_hat >= 5.0
    assert st.delivered == 5_000


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(horizon=10)
    with pytest.raises(ValueError):
        cfg(init_mode="whatever")


def test_feedback_erasures_hurt():
    # same forward channel, reverse erasures on vs off, paired seeds
    p = ProtocolParams(k=5, T=10)
    fwd = half(0.3)
    noisy = [
        simulate(SimConfig(params=p, fwd=fwd, rev=half(0.3), seed=s, horizon=30_000))
        for s in range(4)
    ]
    clean = [
        simulate(SimConfig(params=p, fwd=fwd, rev=half(0.0), seed=s, horizon=30_000))
        for s in range(4)
    ]
    assert np.mean([s.throughput_hat for s in clean]) > np.mean(
        [s.throughput_hat for s in noisy]
    )
    assert np.mean([s.delay_mean_hat for s in clean]) < np.mean(
        [s.delay_mean_hat for s in noisy]
    )


def test_uncoded_equals_constant_harq():
    # constant per-attempt rates at the nominal value: identical draws
    base = cfg(seed=3, horizon=20_000)
    combined = cfg(scheme="harq", gamma_over_rho=3.0, seed=3, horizon=20_000,
                   eps_B_override=1.0)
    a, b = simulate(base), simulate(combined)
    assert a.tau_mean_hat == b.tau_mean_hat
    assert a.delay_mean_hat == b.delay_mean_hat


@pytest.mark.parametrize("scheme,eps", [("uncoded", 0.3), ("harq", 0.3)])
def test_sim_matches_analysis_quick(scheme, eps):
    ch = symmetric_composite(0.3, 0.0, 1.0, eps)
    if scheme == "uncoded":
        ana = uncoded_metrics(ch, ProtocolParams(k=5, T=10))
        stats = [simulate(cfg(seed=s, horizon=50_000)) for s in range(6)]
    else:
        ana = harq_metrics(
            ch, ProtocolParams(k=5, T=10, scheme="harq", gamma_over_rho=3.0)
        )
        stats = [
            simulate(cfg(scheme="harq", gamma_over_rho=3.0, seed=s, horizon=50_000))
            for s in range(6)
        ]
    tm, ts, dm, ds = pooled_estimate(stats)
    assert abs(ana.tau_mean - tm) <= 4 * ts
    assert abs(ana.delay_mean - dm) <= 4 * ds


def test_coded_sim_error_free():
    st = simulate(cfg(scheme="coded", eps=0.0, M=5, N=4, horizon=5_000))
    assert st.tau_mean_hat == 5.0
    assert st.delay_mean_hat == 9.0


def test_coded_sim_matches_analysis_quick():
    eps = 0.3
    ch = symmetric_composite(0.3, 0.0, 1.0, eps)
    p = ProtocolParams(k=5, T=10, scheme="coded", M=5, N=4)
    ana = coded_metrics(ch, p)
    stats = [
        simulate(cfg(scheme="coded", eps=eps, M=5, N=4, seed=s, horizon=20_000))
        for s in range(6)
    ]
    tm, ts, dm, ds = pooled_estimate(stats)
    assert abs(ana.frame_tau_mean - tm) <= 4 * ts
    assert abs(ana.delay_mean - dm) <= 4 * ds


def test_coded_sim_determinism_and_floors():
    a = simulate(cfg(scheme="coded", eps=0.4, M=5, N=4, seed=11, horizon=5_000))
    b = simulate(cfg(scheme="coded", eps=0.4, M=5, N=4, seed=11, horizon=5_000))
    assert a == b
    assert a.tau_mean_hat >= 5.0
    assert a.delay_mean_hat >= 9.0
