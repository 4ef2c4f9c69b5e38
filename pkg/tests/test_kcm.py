import math

import numpy as np
import pytest

from kcmlab.bootstrap import Region
from kcmlab.family import UpdateFamily, builtin
from kcmlab.kcm import (EVENT_DTYPE, KcmParams, estimate_tau0, read_event_log, replay_violations,
                        simulate, stationarity_check, write_event_log)


def params(name="fa1f", q=0.2, side=16, t=20.0, seed=3):
    fam = name if isinstance(name, UpdateFamily) else builtin(name)
    return KcmParams(fam, q, Region.torus(side), t, seed)


def independent_replay(traj):
    """Check each flip against the rules directly; returns the replayed final state."""
    fam = traj.params.family
    W, H = traj.initial.shape
    cur = traj.initial.copy()
    for rec in traj.events:
        x, y = divmod(int(rec["site"]), H)
        assert cur[x, y] != rec["new"]
        assert any(all(cur[(x + dx) % W, (y + dy) % H] == 0 for dx, dy in r) for r in fam.rules)
        cur[x, y] = rec["new"]
    return cur


def test_params_validation():
    with pytest.raises(ValueError):
        KcmParams(builtin("fa1f"), 0.0, Region.torus(8), 1.0)
    with pytest.raises(ValueError):
        KcmParams(builtin("fa1f"), 0.5, Region.box(0, 0, 7, 7), 1.0)
    with pytest.raises(ValueError):
        KcmParams(builtin("anisotropic"), 0.5, Region.torus(4), 1.0)


def test_determinism():
    a = simulate(params(), trial=2)
    b = simulate(params(), trial=2)
    assert np.array_equal(a.events, b.events) and np.array_equal(a.final, b.final)
    c = simulate(params(), trial=3)
    assert not np.array_equal(a.events, c.events)


@pytest.mark.parametrize("name", ["fa1f", "east2d", "fa2f", "duarte"])
def test_every_flip_has_a_witness(name):
    traj = simulate(params(name, q=0.3, t=15.0))
    assert traj.n_events > 0 and traj.witness_violations == 0
    assert np.array_equal(independent_replay(traj), traj.final)


def test_east2d_flips_need_west_or_south_vacancy():
    traj = simulate(params("east2d", q=0.3, t=15.0))
    W, H = traj.initial.shape
    cur = traj.initial.copy()
    for rec in traj.events:
        x, y = divmod(int(rec["site"]), H)
        assert cur[(x - 1) % W, y] == 0 or cur[x, (y - 1) % H] == 0
        cur[x, y] = rec["new"]


def test_tampered_log_is_caught():
    traj = simulate(params())
    traj.events["new"][5] ^= 1
    assert replay_violations(traj) > 0


def test_event_log_round_trip(tmp_path):
    traj = simulate(params(t=5.0))
    path = tmp_path / "events.bin"
    write_event_log(path, traj)
    assert path.stat().st_size == 13 * traj.n_events
    assert EVENT_DTYPE.itemsize == 13
    back = read_event_log(path)
    assert np.array_equal(back, traj.events)


def test_flux_accounting():
    traj = simulate(params(side=32, t=50.0))
    # 1 -> 0 creates a vacancy
    vac = lambda s: int((s == 0).sum())  # noqa: E731
    assert traj.flips_10 - traj.flips_01 == vac(traj.final) - vac(traj.initial)
    assert traj.flips_01 + traj.flips_10 == traj.n_events <= traj.legal <= traj.rings
    tot = traj.flips_01 + traj.flips_10
    assert abs(traj.flips_01 - traj.flips_10) <= 3 * math.sqrt(tot)


def test_near_full_vacancy():
    traj = simulate(params(q=0.999, side=32, t=1.0))
    assert abs((traj.initial == 0).mean() - 0.999) < 0.005


def test_tau_fraction_zero_matches_q():
    est = estimate_tau0(params(q=0.2, side=16, t=200.0), 1000)
    sigma = math.sqrt(0.2 * 0.8 / 1000)
    assert abs(est.fraction_zero - 0.2) <= 3 * sigma
    assert est.censored == 0 and not est.lower_bound_only


def test_tau_parallel_matches_serial():
    p = params(q=0.2, side=16, t=200.0)
    a = estimate_tau0(p, 40)
    b = estimate_tau0(p, 40, jobs=3)
    assert np.array_equal(a.taus, b.taus)


def test_tau_censoring_flag():
    est = estimate_tau0(params("fa2f", q=0.05, side=16, t=0.01), 30)
    assert est.censored > 0 and est.lower_bound_only and est.note.startswith("lower bound")


def test_fa1f_tau_trend():
    lo = estimate_tau0(params(q=0.1, side=32, t=2000.0, seed=1), 300)
    hi = estimate_tau0(params(q=0.2, side=32, t=2000.0, seed=1), 300)
    assert lo.mean - hi.mean > 3 * math.hypot(lo.stderr, hi.stderr)


def test_stationarity_fa1f():
    rep = stationarity_check(params(side=32, t=50.0), trials=4)
    assert rep.passed and rep.status == "ok"
    assert abs(rep.flux_z) < 3


def test_stationarity_single_rule():
    fam = UpdateFamily.from_rules([[(1, 0)]], "e1")
    rep = stationarity_check(params(fam, q=0.3, side=32, t=50.0), trials=4)
    assert rep.passed


def test_zero_horizon():
    rep = stationarity_check(params(), burn_in=5.0, horizon=5.0)
    assert rep.status == "insufficient data" and not rep.passed
    with pytest.raises(ValueError):
        stationarity_check(params(), burn_in=5.0, horizon=4.0)
