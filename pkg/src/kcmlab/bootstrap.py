"""Finite-region bootstrap closures and infection-time estimation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .family import UpdateFamily

Site = tuple[int, int]


@dataclass(frozen=True)
class Region:
    """A finite box (inclusive corners) or a torus, with optional restriction.

    Array index ``[i, j]`` corresponds to the site ``(x0 + i, y0 + j)``; on a
    torus the origin sits at index ``[0, 0]``.
    """

    kind: str
    x0: int = 0
    y0: int = 0
    x1: int = 0
    y1: int = 0
    restriction: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @classmethod
    def box(cls, x0, y0, x1, y1, restriction=None):
        if x1 < x0 or y1 < y0:
            raise ValueError("empty box")
        return cls("box", x0, y0, x1, y1, restriction)

    @classmethod
    def torus(cls, width, height=None):
        height = width if height is None else height
        if width < 1 or height < 1:
            raise ValueError("torus dimensions must be >= 1")
        return cls("torus", 0, 0, width - 1, height - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x1 - self.x0 + 1, self.y1 - self.y0 + 1)

    @property
    def size(self) -> int:
        w, h = self.shape
        return w * h

    def index(self, site: Site) -> tuple[int, int]:
        x, y = site
        if self.kind == "torus":
            w, h = self.shape
            return (x % w, y % h)
        if not (self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1):
            raise IndexError(f"site {site} outside region")
        return (x - self.x0, y - self.y0)

    def contains(self, site: Site) -> bool:
        if self.kind == "torus":
            return True
        x, y = site
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def sites(self):
        for i in range(self.x1 - self.x0 + 1):
            for j in range(self.y1 - self.y0 + 1):
                yield (self.x0 + i, self.y0 + j)

    def with_restriction(self, mask: np.ndarray) -> "Region":
        if mask.shape != self.shape:
            raise ValueError("restriction mask shape mismatch")
        return Region(self.kind, self.x0, self.y0, self.x1, self.y1, mask.astype(bool))


@dataclass
class Configuration:
    region: Region
    infected: np.ndarray

    def __post_init__(self):
        self.infected = np.asarray(self.infected, dtype=bool)
        if self.infected.shape != self.region.shape:
            raise ValueError("bitset shape does not match region")

    @classmethod
    def empty(cls, region: Region):
        return cls(region, np.zeros(region.shape, dtype=bool))

    @classmethod
    def from_sites(cls, region: Region, sites: Iterable[Site]):
        arr = np.zeros(region.shape, dtype=bool)
        for s in sites:
            arr[region.index(s)] = True
        return cls(region, arr)

    def sites(self) -> set[Site]:
        ii, jj = np.nonzero(self.infected)
        return {(int(i) + self.region.x0, int(j) + self.region.y0) for i, j in zip(ii, jj)}

    def __contains__(self, site: Site) -> bool:
        return self.region.contains(site) and bool(self.infected[self.region.index(site)])

    def copy(self):
        return Configuration(self.region, self.infected.copy())


@dataclass
class ClosureResult:
    final: Configuration
    rounds: int
    first_infection_time: dict
    round_of: np.ndarray = field(repr=False)


ExteriorFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _padded(family, region, infected, exterior: Optional[ExteriorFn]):
    r = family.radius
    w, h = region.shape
    pad = np.zeros((w + 2 * r, h + 2 * r), dtype=bool)
    if exterior is not None:
        xs = np.arange(region.x0 - r, region.x1 + r + 1)[:, None]
        ys = np.arange(region.y0 - r, region.y1 + r + 1)[None, :]
        pad[:] = exterior(xs + 0 * ys, ys + 0 * xs)
    pad[r : r + w, r : r + h] = infected
    return pad, r


def _query_times(region, round_of, query):
    out = {}
    for s in query:
        t = int(round_of[region.index(s)]) if region.contains(s) else -1
        out[tuple(s)] = None if t < 0 else t
    return out


def closure(
    family: UpdateFamily,
    config: Configuration,
    query: Iterable[Site] = (),
    exterior: Optional[ExteriorFn] = None,
    stop_at: Optional[Site] = None,
    max_rounds: Optional[int] = None,
) -> ClosureResult:
    """Closure of the infected set under the synchronous bootstrap rounds.

    Sites outside a box are permanently healthy unless ``exterior`` maps
    their coordinates to True (pinned infected).  Sites outside the
    region's restriction never change state.  Only sites adjacent (through
    reversed rule offsets) to the previous round's new infections are
    re-examined, but every round is evaluated against the previous round's
    state so round numbers match the synchronous process exactly.
    """
    region = config.region
    w, h = region.shape
    torus = region.kind == "torus"
    if torus:
        inf = config.infected.copy()
        r = 0
    else:
        inf, r = _padded(family, region, config.infected, exterior)
    view = inf[r : r + w, r : r + h]
    updatable = np.ones((w, h), dtype=bool)
    if region.restriction is not None:
        updatable &= region.restriction
    round_of = np.where(config.infected, 0, -1).astype(np.int32)

    rules = [np.array(rule, dtype=np.int64) for rule in family.rules]
    rev = np.array(sorted({(-dx, -dy) for rule in family.rules for dx, dy in rule}), dtype=np.int64)
    stop_idx = region.index(stop_at) if stop_at is not None else None

    def satisfied(ci, cj):
        ok = np.zeros(ci.shape, dtype=bool)
        for rule in rules:
            good = np.ones(ci.shape, dtype=bool)
            for dx, dy in rule:
                if torus:
                    good &= inf[(ci + dx) % w, (cj + dy) % h]
                else:
                    good &= inf[ci + r + dx, cj + r + dy]
            ok |= good
        return ok

    ci, cj = np.nonzero(updatable & ~view)
    t = 0
    if stop_idx is not None and view[stop_idx]:
        ci = ci[:0]
        cj = cj[:0]
    while ci.size and (max_rounds is None or t < max_rounds):
        new = satisfied(ci, cj)
        ni, nj = ci[new], cj[new]
        if ni.size == 0:
            break
        t += 1
        view[ni, nj] = True
        round_of[ni, nj] = t
        if stop_idx is not None and view[stop_idx]:
            break
        ci = (ni[:, None] + rev[None, :, 0]).ravel()
        cj = (nj[:, None] + rev[None, :, 1]).ravel()
        if torus:
            ci %= w
            cj %= h
        else:
            keep = (ci >= 0) & (ci < w) & (cj >= 0) & (cj < h)
            ci, cj = ci[keep], cj[keep]
        flat = np.unique(ci * h + cj)
        ci, cj = flat // h, flat % h
        keep = updatable[ci, cj] & ~view[ci, cj]
        ci, cj = ci[keep], cj[keep]
    final = Configuration(region, view.copy())
    return ClosureResult(final, t, _query_times(region, round_of, query), round_of)


def closure_naive(
    family: UpdateFamily,
    config: Configuration,
    query: Iterable[Site] = (),
    exterior: Optional[ExteriorFn] = None,
) -> ClosureResult:
    """Reference oracle: sweep every site each round until nothing changes."""
    region = config.region
    w, h = region.shape
    A = config.sites()
    times = {s: 0 for s in A}
    allowed = None
    if region.restriction is not None:
        allowed = {s for s in region.sites() if region.restriction[region.index(s)]}

    outside = set()
    if region.kind == "box" and exterior is not None:
        r = family.radius
        xs, ys = np.meshgrid(
            np.arange(region.x0 - r, region.x1 + r + 1),
            np.arange(region.y0 - r, region.y1 + r + 1),
            indexing="ij",
        )
        xs, ys = xs.ravel(), ys.ravel()
        pin = np.asarray(exterior(xs, ys), dtype=bool)
        outside = {
            (int(a), int(b)) for a, b, p in zip(xs, ys, pin)
            if p and not region.contains((int(a), int(b)))
        }

    torus = region.kind == "torus"
    known = A | outside
    todo = [x for x in region.sites() if x not in A and (allowed is None or x in allowed)]
    t = 0
    while True:
        new = set()
        for x, y in todo:
            for rule in family.rules:
                if torus:
                    ok = all(((x + dx) % w, (y + dy) % h) in known for dx, dy in rule)
                else:
                    ok = all((x + dx, y + dy) in known for dx, dy in rule)
                if ok:
                    new.add((x, y))
                    break
        if not new:
            break
        t += 1
        for s in new:
            times[s] = t
        A |= new
        known |= new
        todo = [x for x in todo if x not in new]
    final = Configuration.from_sites(region, A)
    round_of = np.full(region.shape, -1, dtype=np.int32)
    for s, ts in times.items():
        round_of[region.index(s)] = ts
    return ClosureResult(final, t, _query_times(region, round_of, query), round_of)


# ----------------------------------------------------------------------------
# half-plane probes


@dataclass
class HalfPlaneProbe:
    plus: bool
    minus: bool
    plus_advance: int
    minus_advance: int
    enlarged: bool
    window_radius: int
    line_span: int

    @property
    def both(self) -> bool:
        return self.plus and self.minus


class HalfPlaneFrame:
    """Lattice bookkeeping for probes of the half-plane {<x,u> < 0}.

    ``height(x) = <x,u>`` and ``along(x) = <x,e>`` with ``e = (u_y, -u_x)``
    the step along the boundary line towards its "+" side (right of u).
    """

    def __init__(self, family: UpdateFamily, u, window_radius: int, line_span: int):
        a, b = int(u[0]), int(u[1])
        self.a, self.b = a, b
        self.n = a * a + b * b
        self.step = (b, -a)
        self.R = int(window_radius)
        self.span = int(line_span)
        rad = family.radius
        margin = 2 * rad
        up = self.R + 4 * rad * max(abs(a), abs(b)) + 1
        low = -(rad + 1) * max(abs(a), abs(b), 1)
        kmin = -(self.span + margin)
        kmax = self.R + self.span + margin
        corners = []
        for hh in (low, up):
            for k in (kmin, kmax):
                s = k * self.n
                # invert: x = (a*h + b*s)/n, y = (b*h - a*s)/n
                corners.append(((a * hh + b * s) / self.n, (b * hh - a * s) / self.n))
        xs = [c[0] for c in corners]
        ys = [c[1] for c in corners]
        self.region = Region.box(
            int(np.floor(min(xs))), int(np.floor(min(ys))), int(np.ceil(max(xs))), int(np.ceil(max(ys)))
        )

    def height(self, x, y):
        return self.a * x + self.b * y

    def along(self, x, y):
        return self.b * x - self.a * y

    def exterior(self, xs, ys):
        return self.height(xs, ys) < 0

    def window_sites(self) -> list[Site]:
        """Sites with 0 <= height <= R and 0 <= along <= R*n."""
        out = []
        reg = self.region
        for x in range(reg.x0, reg.x1 + 1):
            for y in range(reg.y0, reg.y1 + 1):
                hh = self.height(x, y)
                s = self.along(x, y)
                if 0 <= hh <= self.R and 0 <= s <= self.R * self.n:
                    out.append((x, y))
        out.sort(key=lambda p: (self.along(*p), self.height(*p), p))
        return out

    def line_site(self, k: int) -> Site:
        return (k * self.step[0], k * self.step[1])

    def seed(self, extra: Iterable[Site]) -> Configuration:
        reg = self.region
        xs = np.arange(reg.x0, reg.x1 + 1)[:, None]
        ys = np.arange(reg.y0, reg.y1 + 1)[None, :]
        base = self.height(xs, ys) < 0
        cfg = Configuration(reg, base)
        for s in extra:
            cfg.infected[reg.index(s)] = True
        return cfg

    def evaluate(self, final: Configuration, initial: Configuration) -> HalfPlaneProbe:
        plus = 0
        for k in range(self.R + 1, self.R + self.span + 1):
            if self.line_site(k) in final:
                plus += 1
            else:
                break
        minus = 0
        for k in range(-1, -self.span - 1, -1):
            if self.line_site(k) in final:
                minus += 1
            else:
                break
        enlarged = bool((final.infected & ~initial.infected).any())
        return HalfPlaneProbe(
            plus >= self.span, minus >= self.span, plus, minus, enlarged, self.R, self.span
        )


def half_plane_fills(
    family: UpdateFamily,
    u,
    extra: Iterable[Site] = (),
    window_radius: int = 8,
    line_span: int = 64,
    frame: Optional[HalfPlaneFrame] = None,
    naive: bool = False,
) -> HalfPlaneProbe:
    """Seed the half-plane {<x,u> < 0} plus ``extra`` and report line advance.

    The half-plane is pinned infected outside the working box, so the probe
    behaves like the infinite half-plane near the window.
    """
    frame = frame or HalfPlaneFrame(family, u, window_radius, line_span)
    init = frame.seed(extra)
    if naive:
        res = closure_naive(family, init, exterior=frame.exterior)
    else:
        res = closure(family, init, exterior=frame.exterior)
    return frame.evaluate(res.final, init)


# ----------------------------------------------------------------------------
# typical infection time


@dataclass
class TUEstimate:
    q: float
    trials: int
    median_rounds: Optional[int]
    ci_low: Optional[float]
    ci_high: Optional[float]
    censored: int
    seed: int
    torus: tuple[int, int]
    t_max: int
    times: np.ndarray = field(repr=False)

    @property
    def exceeds_t_max(self) -> bool:
        return self.median_rounds is None


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, trial) pair."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _lower_median(times: np.ndarray, cap: int):
    """Smallest t with empirical P(T <= t) >= 1/2; None if that exceeds cap."""
    s = np.sort(times)
    k = (len(s) + 1) // 2 - 1
    v = s[k]
    return None if v > cap else int(v)


def infection_round(family: UpdateFamily, q: float, region: Region, rng, t_max: int) -> int:
    """Round at which the origin is first infected, or t_max + 1 if censored."""
    if q >= 1:
        return 0
    infected = rng.random(region.shape) < q
    cfg = Configuration(region, infected)
    res = closure(family, cfg, query=[(0, 0)], stop_at=(0, 0), max_rounds=t_max)
    t = res.first_infection_time[(0, 0)]
    return t_max + 1 if t is None else t


def estimate_T_U(
    family: UpdateFamily,
    q: float,
    region: Region,
    trials: int,
    t_max: int,
    seed: int = 0,
    n_boot: int = 1000,
    jobs: int = 1,
) -> TUEstimate:
    """Empirical median infection time of the origin under Bernoulli(q) seeding."""
    if not (0 < q <= 1):
        raise ValueError("q must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if region.kind != "torus":
        raise ValueError("estimate_T_U runs on a torus")

    def one(k):
        return infection_round(family, q, region, trial_rng(seed, k), t_max)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as ex:
            times = np.array(list(ex.map(one, range(trials))), dtype=np.int64)
    else:
        times = np.array([one(k) for k in range(trials)], dtype=np.int64)
    censored = int((times > t_max).sum())
    med = _lower_median(times, t_max)
    ci_low = ci_high = None
    if med is not None:
        brng = np.random.default_rng(np.random.SeedSequence([int(seed), 2**31 - 1]))
        idx = brng.integers(0, trials, size=(n_boot, trials))
        meds = np.sort(times[idx], axis=1)[:, (trials + 1) // 2 - 1]
        ci_low, ci_high = (float(v) for v in np.percentile(meds, [2.5, 97.5]))
    return TUEstimate(q, trials, med, ci_low, ci_high, censored, seed, region.shape, t_max, times)
