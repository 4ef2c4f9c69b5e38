"""Continuous-time KCM on a torus, started from the product measure.

Convention: ``state[x] = 1`` means occupied and ``0`` means empty.  A site
may be resampled (occupied with probability ``p = 1 - q``) only when some
rule ``X`` has every site of ``X + x`` empty.

Clock rings are drawn in aggregate: the waiting time to the next ring on
the whole torus is Exp(N) and the ringing site is uniform.  Rings at
sites whose constraint fails are discarded but still advance time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .bootstrap import Region, trial_rng
from .family import UpdateFamily

EVENT_DTYPE = np.dtype([("site", "<u4"), ("time", "<f8"), ("new", "u1")])

# counters layout
_RINGS, _LEGAL, _F01, _F10, _EVENTS, _OVERFLOW = range(6)


@njit(cache=True, nogil=True)
def _witness(state, W, H, x, y, rx, ry, rptr):
    for r in range(rptr.shape[0] - 1):
        ok = True
        for k in range(rptr[r], rptr[r + 1]):
            if state[((x + rx[k]) % W) * H + (y + ry[k]) % H] != 0:
                ok = False
                break
        if ok:
            return r
    return -1


@njit(cache=True, nogil=True)
def _kernel(state, W, H, rx, ry, rptr, p, t_end, t_lo, rng, stop_origin,
            log_site, log_time, log_new, log_rule, snap_times, snaps, counters, acc):
    """Run the dynamics in place; returns tau_0 (or -1.0 if not reached)."""
    N = W * H
    vac = 0
    for i in range(N):
        if state[i] == 0:
            vac += 1
    if stop_origin and state[0] == 0:
        return 0.0
    cap = log_site.shape[0]
    n_snap = snap_times.shape[0]
    si = 0
    t = 0.0
    scale = 1.0 / N
    while True:
        dt = rng.exponential(scale)
        t_next = t + dt
        stop = t_next > t_end
        if stop:
            t_next = t_end
        a = t if t > t_lo else t_lo
        if t_next > a:
            acc[0] += vac * (t_next - a)
        while si < n_snap and snap_times[si] < t_next:
            for i in range(N):
                snaps[si, i] = state[i]
            si += 1
        if stop:
            break
        t = t_next
        s = rng.integers(0, N)
        counters[_RINGS] += 1
        x = s // H
        y = s - x * H
        r = _witness(state, W, H, x, y, rx, ry, rptr)
        if r < 0:
            continue
        counters[_LEGAL] += 1
        new = 1 if rng.random() < p else 0
        old = state[s]
        if new == old:
            continue
        state[s] = new
        if new == 1:
            counters[_F01] += 1
            vac -= 1
        else:
            counters[_F10] += 1
            vac += 1
        e = counters[_EVENTS]
        if e < cap:
            log_site[e] = s
            log_time[e] = t
            log_new[e] = new
            log_rule[e] = r
        else:
            counters[_OVERFLOW] = 1
        counters[_EVENTS] = e + 1
        if stop_origin and s == 0 and new == 0:
            return t
    while si < n_snap:
        for i in range(N):
            snaps[si, i] = state[i]
        si += 1
    return -1.0


def _encode(family: UpdateFamily):
    rx, ry, ptr = [], [], [0]
    for rule in family.rules:
        for dx, dy in rule:
            rx.append(dx)
            ry.append(dy)
        ptr.append(len(rx))
    return (np.array(rx, dtype=np.int64), np.array(ry, dtype=np.int64),
            np.array(ptr, dtype=np.int64))


@dataclass
class KcmParams:
    family: UpdateFamily
    q: float
    region: Region
    t_max: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if self.region.kind != "torus":
            raise ValueError("the KCM runs on a torus")
        side = min(self.region.shape)
        if side < 2 * self.family.radius + 1:
            raise ValueError("torus side must be at least 2*radius + 1")
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")

    @property
    def p(self) -> float:
        return 1.0 - self.q


@dataclass
class Trajectory:
    params: KcmParams
    initial: np.ndarray
    final: np.ndarray
    events: np.ndarray  # EVENT_DTYPE records
    rules: np.ndarray  # witness rule index per event
    rings: int
    legal: int
    flips_01: int
    flips_10: int
    vacancy_avg: float
    witness_violations: int = 0

    @property
    def n_events(self) -> int:
        return len(self.events)


def _sample_initial(rng, N, p) -> np.ndarray:
    return (rng.random(N) < p).astype(np.uint8)


def _capacity(N, t) -> int:
    m = N * t
    return int(m + 6 * math.sqrt(m + 1) + 1024)


def simulate(params: KcmParams, trial: int = 0, log: bool = True, check: bool = True) -> Trajectory:
    W, H = params.region.shape
    N = W * H
    rx, ry, ptr = _encode(params.family)
    cap = _capacity(N, params.t_max) if log else 0
    while True:
        rng = trial_rng(params.seed, trial)
        state = _sample_initial(rng, N, params.p)
        initial = state.copy()
        buf_site = np.zeros(cap, dtype=np.uint32)
        buf_time = np.zeros(cap, dtype=np.float64)
        buf_new = np.zeros(cap, dtype=np.uint8)
        buf_rule = np.zeros(cap, dtype=np.int32)
        counters = np.zeros(6, dtype=np.int64)
        acc = np.zeros(1)
        _kernel(state, W, H, rx, ry, ptr, params.p, float(params.t_max), 0.0, rng, False,
                buf_site, buf_time, buf_new, buf_rule, np.zeros(0), np.zeros((0, N), np.uint8),
                counters, acc)
        if not log or not counters[_OVERFLOW]:
            break
        cap *= 2
    n = int(counters[_EVENTS]) if log else 0
    ev = np.zeros(n, dtype=EVENT_DTYPE)
    ev["site"], ev["time"], ev["new"] = buf_site[:n], buf_time[:n], buf_new[:n]
    avg = acc[0] / (N * params.t_max) if params.t_max > 0 else float("nan")
    traj = Trajectory(params, initial.reshape(W, H), state.reshape(W, H), ev, buf_rule[:n].copy(),
                      int(counters[_RINGS]), int(counters[_LEGAL]), int(counters[_F01]),
                      int(counters[_F10]), avg)
    if check and log:
        traj.witness_violations = replay_violations(traj)
        if traj.witness_violations:
            raise AssertionError(f"{traj.witness_violations} flips without a constraint witness")
    return traj


def replay_violations(traj: Trajectory) -> int:
    """Replay the event log and count flips whose witness rule was not empty."""
    fam = traj.params.family
    W, H = traj.initial.shape
    cur = traj.initial.copy()
    bad = 0
    for (site, _, new), r in zip(traj.events.tolist(), traj.rules.tolist()):
        x, y = divmod(site, H)
        ok = cur[x, y] != new and all(cur[(x + dx) % W, (y + dy) % H] == 0 for dx, dy in fam.rules[r])
        if not ok:
            bad += 1
        cur[x, y] = new
    if not np.array_equal(cur, traj.final):
        bad += 1
    return bad


def write_event_log(path, traj: Trajectory) -> None:
    """Little-endian records (site u32, time f64, new u8), 13 bytes each."""
    traj.events.astype(EVENT_DTYPE).tofile(path)


def read_event_log(path) -> np.ndarray:
    return np.fromfile(path, dtype=EVENT_DTYPE)


# ----------------------------------------------------------------------------
# hitting time of the origin


@dataclass
class TauEstimate:
    mean: float
    stderr: float
    trials: int
    censored: int
    fraction_zero: float
    t_max: float
    taus: np.ndarray = field(repr=False, default=None)

    @property
    def lower_bound_only(self) -> bool:
        """Censored trials enter at t_max, so the mean only bounds from below."""
        return self.censored > 0

    @property
    def note(self) -> str:
        if self.censored == self.trials:
            return "lower bound only (all censored)"
        if self.censored:
            return "lower bound only"
        return ""


def _tau_trial(params: KcmParams, trial: int) -> float:
    W, H = params.region.shape
    N = W * H
    rx, ry, ptr = _encode(params.family)
    rng = trial_rng(params.seed, trial)
    state = _sample_initial(rng, N, params.p)
    e32 = np.zeros(0, dtype=np.uint32)
    t = _kernel(state, W, H, rx, ry, ptr, params.p, float(params.t_max), 0.0, rng, True,
                e32, np.zeros(0), np.zeros(0, np.uint8), np.zeros(0, np.int32),
                np.zeros(0), np.zeros((0, N), np.uint8), np.zeros(6, np.int64), np.zeros(1))
    return float(t)


def _map_trials(fn, params, trials, jobs):
    if jobs <= 1:
        return [fn(params, k) for k in range(trials)]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda k: fn(params, k), range(trials)))


def estimate_tau0(params: KcmParams, trials: int, jobs: int = 1) -> TauEstimate:
    """Mean first time the origin is empty, from fresh stationary starts."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    raw = np.array(_map_trials(_tau_trial, params, trials, jobs))
    censored = raw < 0
    taus = np.where(censored, params.t_max, raw)
    sd = taus.std(ddof=1) if trials > 1 else float("nan")
    return TauEstimate(float(taus.mean()), float(sd / math.sqrt(trials)), trials,
                       int(censored.sum()), float((raw == 0).mean()), params.t_max, taus)


# ----------------------------------------------------------------------------
# stationarity diagnostics


@dataclass
class StationarityReport:
    q: float
    trials: int
    burn_in: float
    horizon: float
    density: float = float("nan")
    sigma: float = float("nan")
    batch_sigma: float = float("nan")
    chi2: float = float("nan")
    chi2_dof: int = 0
    flips_01: int = 0
    flips_10: int = 0
    witness_violations: int = 0
    status: str = "ok"

    @property
    def z(self) -> float:
        return (self.density - self.q) / self.sigma

    @property
    def density_ok(self) -> bool:
        return self.status == "ok" and abs(self.density - self.q) <= 3 * self.sigma

    @property
    def flux_z(self) -> float:
        tot = self.flips_01 + self.flips_10
        return (self.flips_01 - self.flips_10) / math.sqrt(tot) if tot else 0.0

    @property
    def chi2_ok(self) -> bool:
        if not self.chi2_dof:
            return True
        return abs(self.chi2 - self.chi2_dof) <= 3 * math.sqrt(2 * self.chi2_dof)

    @property
    def passed(self) -> bool:
        return self.density_ok and self.witness_violations == 0

    def summary(self) -> str:
        if self.status != "ok":
            return self.status
        return (f"density={self.density:.5f} q={self.q} sigma={self.sigma:.2e} z={self.z:+.2f} "
                f"chi2={self.chi2:.1f}/{self.chi2_dof} flux_z={self.flux_z:+.2f} "
                f"violations={self.witness_violations} {'PASS' if self.passed else 'FAIL'}")


def _stat_trial(params: KcmParams, trial: int, burn_in: float, snap_times: np.ndarray):
    W, H = params.region.shape
    N = W * H
    rx, ry, ptr = _encode(params.family)
    cap = _capacity(N, params.t_max)
    while True:
        rng = trial_rng(params.seed, trial)
        state = _sample_initial(rng, N, params.p)
        initial = state.copy()
        bufs = (np.zeros(cap, np.uint32), np.zeros(cap), np.zeros(cap, np.uint8), np.zeros(cap, np.int32))
        snaps = np.zeros((len(snap_times), N), np.uint8)
        counters = np.zeros(6, np.int64)
        acc = np.zeros(1)
        _kernel(state, W, H, rx, ry, ptr, params.p, float(params.t_max), float(burn_in), rng, False,
                *bufs, snap_times, snaps, counters, acc)
        if not counters[_OVERFLOW]:
            break
        cap *= 2
    n = int(counters[_EVENTS])
    ev = np.zeros(n, dtype=EVENT_DTYPE)
    ev["site"], ev["time"], ev["new"] = bufs[0][:n], bufs[1][:n], bufs[2][:n]
    traj = Trajectory(params, initial.reshape(W, H), state.reshape(W, H), ev, bufs[3][:n].copy(),
                      int(counters[_RINGS]), int(counters[_LEGAL]), int(counters[_F01]),
                      int(counters[_F10]), float("nan"))
    density = acc[0] / (N * (params.t_max - burn_in))
    return density, snaps, traj.flips_01, traj.flips_10, replay_violations(traj)


def _binom_pmf(K, q):
    return np.array([math.comb(K, k) * q ** k * (1 - q) ** (K - k) for k in range(K + 1)])


def stationarity_check(params: KcmParams, burn_in: float = 0.0, horizon: Optional[float] = None,
                       trials: int = 1, snapshots: int = 8, jobs: int = 1) -> StationarityReport:
    """Time-averaged vacancy density over [burn_in, horizon] against q.

    The 3-sigma test uses sigma = sqrt(q(1-q)/(N*trials)), the spread of a
    single independent snapshot; time averaging only shrinks the true spread.
    The chi-square compares per-site empty counts over equally spaced
    snapshots with Binomial(snapshots, q).
    """
    horizon = params.t_max if horizon is None else horizon
    if horizon < burn_in:
        raise ValueError("horizon must not precede burn_in")
    rep = StationarityReport(params.q, trials, burn_in, horizon)
    if horizon == burn_in:
        rep.status = "insufficient data"
        return rep
    p2 = KcmParams(params.family, params.q, params.region, horizon, params.seed)
    N = params.region.size
    snap_times = np.linspace(burn_in, horizon, snapshots + 1)[1:] if snapshots else np.zeros(0)
    out = _map_trials(lambda pp, k: _stat_trial(pp, k, burn_in, snap_times), p2, trials, jobs)
    dens = np.array([o[0] for o in out])
    rep.density = float(dens.mean())
    rep.sigma = math.sqrt(params.q * (1 - params.q) / (N * trials))
    if trials > 1:
        rep.batch_sigma = float(dens.std(ddof=1) / math.sqrt(trials))
    rep.flips_01 = sum(o[2] for o in out)
    rep.flips_10 = sum(o[3] for o in out)
    rep.witness_violations = sum(o[4] for o in out)
    if snapshots:
        counts = np.concatenate([(1 - o[1]).sum(axis=0) for o in out])
        obs = np.bincount(counts, minlength=snapshots + 1).astype(float)
        exp = _binom_pmf(snapshots, params.q) * len(counts)
        # pool sparse bins into their neighbours
        o_b, e_b, o_acc, e_acc = [], [], 0.0, 0.0
        for o, e in zip(obs, exp):
            o_acc += o
            e_acc += e
            if e_acc >= 5:
                o_b.append(o_acc)
                e_b.append(e_acc)
                o_acc = e_acc = 0.0
        if e_acc and e_b:
            o_b[-1] += o_acc
            e_b[-1] += e_acc
        o_b, e_b = np.array(o_b), np.array(e_b)
        if len(e_b) > 1:
            rep.chi2 = float(((o_b - e_b) ** 2 / e_b).sum())
            rep.chi2_dof = len(e_b) - 1
    return rep
