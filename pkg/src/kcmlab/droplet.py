"""Strips, helping sets and half-rings, checked by restricted closure.

Geometry is exact.  A half-ring lives in the frame of the semicircle
midpoint ``u`` (primitive) and ``u_perp = u.perp()``.  For a lattice point
``x`` we use the integer coordinates ``sigma = <x,u>`` and ``tau = <x,u_perp>``.
A v-strip is the closed parallelogram

    low <= <x,v> <= low + width*<u,v>,   top - length*|u|^2 <= tau <= top

so its long sides are perpendicular to ``v`` and its short sides parallel
to ``u``.  ``width`` counts translates by the vector ``u`` and ``length``
counts the ``u_perp`` vector, so ``R + w*u`` is a lattice translate for
integer ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .bootstrap import Configuration, Region, closure, closure_naive
from .difficulty import direction_difficulty, family_difficulties
from .family import UpdateFamily
from .geometry import (
    Direction,
    candidate_midpoints,
    classify_tri,
    free_semicircle_midpoint,
    is_unstable,
    quasi_stable_directions,
    stable_set,
)

F = Fraction
Point = tuple  # pair of Fractions or ints


class DropletError(ValueError):
    """Geometric infeasibility or missing voracious data."""


def _egcd(a: int, b: int):
    if b == 0:
        return (a, 1, 0) if a >= 0 else (-a, -1, 0)
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def _dot(p, q):
    return p[0] * q[0] + p[1] * q[1]


def _solve(v, c, w, d) -> Point:
    """The point x with <x,v> = c and <x,w> = d."""
    det = v[0] * w[1] - v[1] * w[0]
    if det == 0:
        raise DropletError("parallel constraint lines")
    return (F(c * w[1] - v[1] * d) / det, F(v[0] * d - c * w[0]) / det)


def _ge(X, Y, a, b, c) -> np.ndarray:
    """Exact a*X + b*Y >= c for integer grids and rational c."""
    c = F(c)
    return (a * X + b * Y) * c.denominator >= c.numerator


def _le(X, Y, a, b, c) -> np.ndarray:
    c = F(c)
    return (a * X + b * Y) * c.denominator <= c.numerator


def _fmt(p) -> str:
    return f"({p[0]},{p[1]})"


# ----------------------------------------------------------------------------
# strips


@dataclass(frozen=True)
class LineSegment:
    """Lattice-line segment ``<x,v> = level`` with tau in [tau_lo, tau_hi]."""

    v: Direction
    u: Direction
    level: int
    tau_lo: F
    tau_hi: F

    @property
    def step(self) -> tuple:
        return tuple(self.v.perp())

    def points(self, lam=0) -> list:
        """Lattice points at distance >= lam from both endpoints, by increasing tau."""
        v, up = self.v, self.u.perp()
        g, a, b = _egcd(v.x, v.y)
        x0 = (a * self.level * g, b * self.level * g)  # g = +-1 for primitive v
        p = self.step
        dtau = _dot(p, up)  # = <v,u> > 0
        t0 = _dot(x0, up)
        k_lo = math.ceil((self.tau_lo - t0) / F(dtau))
        k_hi = math.floor((self.tau_hi - t0) / F(dtau))
        lam2 = F(lam) ** 2 * dtau * dtau
        nv = v.norm2
        out = []
        for k in range(k_lo, k_hi + 1):
            tau = t0 + k * dtau
            if lam:
                d_lo = tau - self.tau_lo
                d_hi = self.tau_hi - tau
                if d_lo < 0 or d_hi < 0 or d_lo * d_lo * nv < lam2 or d_hi * d_hi * nv < lam2:
                    continue
            out.append((x0[0] + k * p[0], x0[1] + k * p[1]))
        return out

    def endpoints(self):
        up = self.u.perp()
        return _solve(self.v, self.level, up, self.tau_lo), _solve(self.v, self.level, up, self.tau_hi)


@dataclass(frozen=True)
class VStrip:
    v: Direction
    u: Direction
    low: F
    width: F
    top: F
    length: F

    @property
    def n(self) -> int:
        return self.u.norm2

    @property
    def uv(self) -> int:
        return self.u.dot(self.v)

    @property
    def high(self) -> F:
        return self.low + self.width * self.uv

    @property
    def bottom(self) -> F:
        return self.top - self.length * self.n

    def corners(self) -> list:
        """Vertices in the order bottom-left, bottom-right, top-right, top-left."""
        up = self.u.perp()
        return [
            _solve(self.v, self.low, up, self.bottom),
            _solve(self.v, self.high, up, self.bottom),
            _solve(self.v, self.high, up, self.top),
            _solve(self.v, self.low, up, self.top),
        ]

    def contains(self, X, Y) -> np.ndarray:
        v, up = self.v, self.u.perp()
        return (
            _ge(X, Y, v.x, v.y, self.low)
            & _le(X, Y, v.x, v.y, self.high)
            & _ge(X, Y, up.x, up.y, self.bottom)
            & _le(X, Y, up.x, up.y, self.top)
        )

    def translate(self, t) -> "VStrip":
        return replace(self, low=self.low + _dot(t, self.v), top=self.top + _dot(t, self.u.perp()))

    def shift(self, s) -> "VStrip":
        """Translate by s*u."""
        return replace(self, low=self.low + F(s) * self.uv)

    @property
    def area(self) -> F:
        return self.width * self.length * self.n

    def plus_boundary(self):
        return (self.high, self.bottom, self.top)

    def _first_level(self, moving_tau: bool) -> LineSegment:
        c = math.floor(self.high) + 1
        while True:
            if moving_tau:
                delta = F(c - self.high, self.v.norm2) * self.v.dot(self.u.perp())
            else:
                delta = 0
            seg = LineSegment(self.v, self.u, c, self.bottom + delta, self.top + delta)
            if seg.points():
                return seg
            c += 1
            if c > self.high + 64 * self.v.norm2:
                raise DropletError(f"strip for {self.v} too short to carry lattice points")

    def ext_boundary(self) -> LineSegment:
        """Translate of the + side along v that first meets a new lattice point."""
        return self._first_level(moving_tau=True)

    def next_shift(self) -> F:
        """Least s > 0 such that shift(s) contains a lattice point not in the strip."""
        seg = self._first_level(moving_tau=False)
        return (seg.level - self.high) / self.uv

    def describe(self) -> str:
        return f"v={self.v} " + " ".join(_fmt(c) for c in self.corners())


# ----------------------------------------------------------------------------
# half-rings


@dataclass
class HalfRing:
    kind: str
    u: Direction
    strips: list
    width: F
    length: F
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.strips)

    @property
    def directions(self) -> list:
        return [s.v for s in self.strips]

    def shift(self, s) -> "HalfRing":
        return HalfRing(
            self.kind, self.u, [t.shift(s) for t in self.strips], self.width, self.length,
            [t.shift(s) for t in self.left], [t.shift(s) for t in self.right],
        )

    def pieces(self) -> list:
        return list(self.strips) + list(self.left)

    def plain_mask(self, X, Y) -> np.ndarray:
        out = np.zeros(X.shape, dtype=bool)
        for s in self.strips:
            out |= s.contains(X, Y)
        return out

    def mask(self, X, Y) -> np.ndarray:
        """Lattice points of the ring (its generalised version for that kind)."""
        if self.kind != "generalized":
            return self.plain_mask(X, Y)
        out = np.zeros(X.shape, dtype=bool)
        for s, l, r in zip(self.strips, self.left, self.right):
            out |= (s.contains(X, Y) & ~r.contains(X, Y)) | l.contains(X, Y)
        return out

    def core_mask(self, X, Y) -> np.ndarray:
        return self.mask(X, Y) & self.plain_mask(X, Y)

    def strip_of(self, site) -> Optional[int]:
        X, Y = np.array([site[0]]), np.array([site[1]])
        for i, s in enumerate(self.strips):
            if s.contains(X, Y)[0]:
                return i
        for i, s in enumerate(self.left):
            if s.contains(X, Y)[0]:
                return i
        return None

    def strips_of(self, site) -> list:
        """Indices of every strip containing ``site``; corners are shared."""
        X, Y = np.array([site[0]]), np.array([site[1]])
        return [i for i, s in enumerate(self.strips) if s.contains(X, Y)[0]]

    def next_shift(self) -> F:
        return min(s.next_shift() for s in self.strips)

    def advance_shifts(self, total) -> list:
        """Cumulative shifts R, R*, R**, ... up to ``total`` (inclusive)."""
        total = F(total)
        out = [F(0)]
        while out[-1] < total:
            out.append(min(out[-1] + self.shift(out[-1]).next_shift(), total))
        return out

    def corners(self) -> list:
        return [c for p in self.pieces() for c in p.corners()]

    def serialize(self) -> str:
        lines = [f"kind: {self.kind}", f"u: {self.u}", f"width: {self.width}",
                 f"length: {self.length}", f"strips: {self.m}"]
        for i, s in enumerate(self.strips):
            lines.append(f"strip {i}: {s.describe()}")
        for i, (l, r) in enumerate(zip(self.left, self.right)):
            lines.append(f"left {i}: {l.describe()}")
            lines.append(f"right {i}: {r.describe()}")
        return "\n".join(lines) + "\n"


def _bbox(points, pad) -> tuple:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return (math.floor(min(xs)) - pad, math.floor(min(ys)) - pad,
            math.ceil(max(xs)) + pad, math.ceil(max(ys)) + pad)


def _grid(box):
    x0, y0, x1, y1 = box
    return np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1), indexing="ij")


def build_half_ring(
    family: UpdateFamily,
    u,
    kind: str = "plain",
    w=6,
    length=40,
    anchor=(0, 0),
    first_length=None,
    S=None,
) -> HalfRing:
    """Stack one v-strip per quasi-stable direction, clockwise from the top.

    ``anchor`` is the top corner of the first strip on its minus side.
    """
    if kind not in ("plain", "elongated", "generalized"):
        raise DropletError(f"unknown ring kind {kind!r}")
    u = u if isinstance(u, Direction) else Direction.of(*u)
    w, length = F(w), F(length)
    if w <= 0 or length <= 0:
        raise DropletError("width and length must be positive")
    dirs = quasi_stable_directions(family, u, S)
    if not dirs:
        raise DropletError("no quasi-stable directions in the semicircle")
    up = u.perp()
    first = length
    if kind == "elongated":
        first = F(first_length) if first_length is not None else 2 * length
        if first <= length:
            raise DropletError("elongated ring needs a longer first strip")
    a = (F(anchor[0]), F(anchor[1]))
    strips = []
    top = _dot(a, up)
    low = _dot(a, dirs[0])
    for i, v in enumerate(dirs):
        ln = first if i == 0 else length
        if i > 0:
            corner = _solve(strips[-1].v, strips[-1].low, up, strips[-1].bottom)
            low = _dot(corner, v)
            top = strips[-1].bottom
        strips.append(VStrip(v, u, F(low), w, F(top), ln))
    ring = HalfRing(kind, u, strips, w, length)
    if kind == "generalized":
        for s in strips:
            ring.right.append(VStrip(s.v, u, s.low, w / 3, s.top, s.length / 3))
            ring.left.append(VStrip(s.v, u, s.high, w / 3, s.top, s.length / 3))
    check_ring(ring)
    return ring


def check_ring(ring: HalfRing) -> None:
    """Consecutive strips share a short side; others are disjoint."""
    strips = ring.strips
    for i in range(len(strips) - 1):
        a, b = strips[i].corners(), strips[i + 1].corners()
        if a[0] != b[3] or a[1] != b[2]:
            raise DropletError(f"strips {i} and {i + 1} do not share a short side")
    box = _bbox(ring.corners(), 1)
    X, Y = _grid(box)
    pieces = [(f"strip {i}", s) for i, s in enumerate(strips)]
    pieces += [(f"left {i}", s) for i, s in enumerate(ring.left)]
    masks = [p.contains(X, Y) for _, p in pieces]
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            if not (masks[i] & masks[j]).any():
                continue
            ni, nj = pieces[i][0], pieces[j][0]
            ki, kj = int(ni.split()[1]), int(nj.split()[1])
            if abs(ki - kj) <= 1 and _touch_only(pieces[i][1], pieces[j][1], X, Y, masks[i] & masks[j]):
                continue
            raise DropletError(f"{ni} and {nj} overlap")


def _touch_only(a: VStrip, b: VStrip, X, Y, both) -> bool:
    """Shared lattice points all lie on a common side of the two pieces."""
    up = a.u.perp()
    tau = up.x * X + up.y * Y
    for t in (a.top, a.bottom):
        if t in (b.top, b.bottom) and (tau[both] == t).all():
            return True
    if a.v == b.v:
        lev = a.v.x * X + a.v.y * Y
        for c in (a.low, a.high):
            if c in (b.low, b.high) and (lev[both] == c).all():
                return True
    return False


# ----------------------------------------------------------------------------
# neighbourhoods


def _seg_dist2(px, py, a, b):
    ax, ay = float(a[0]), float(a[1])
    dx, dy = float(b[0]) - ax, float(b[1]) - ay
    ll = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / ll, 0.0, 1.0)
    ex, ey = px - ax - t * dx, py - ay - t * dy
    return ex * ex + ey * ey


def _seg_dist2_exact(p, a, b) -> F:
    dx, dy = b[0] - a[0], b[1] - a[1]
    ll = dx * dx + dy * dy
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / ll
    t = min(max(t, F(0)), F(1))
    ex, ey = p[0] - a[0] - t * dx, p[1] - a[1] - t * dy
    return ex * ex + ey * ey


def neighbourhood(pieces: Sequence[VStrip], X, Y, lam) -> np.ndarray:
    """Lattice points within Euclidean distance ``lam`` of the union of pieces.

    Floats decide clear cases; points within 1e-6 of the threshold are
    decided exactly.
    """
    lam = F(lam)
    lam2 = float(lam * lam)
    out = np.zeros(X.shape, dtype=bool)
    fx, fy = X.astype(float), Y.astype(float)
    for s in pieces:
        inside = s.contains(X, Y)
        c = s.corners()
        d2 = np.minimum.reduce([_seg_dist2(fx, fy, c[k], c[(k + 1) % 4]) for k in range(4)])
        d2[inside] = 0.0
        close = np.abs(d2 - lam2) <= 1e-6 * (1 + lam2)
        out |= (d2 < lam2) & ~close
        for i, j in zip(*np.nonzero(close & ~out)):
            p = (F(int(X[i, j])), F(int(Y[i, j])))
            e = min(_seg_dist2_exact(p, c[k], c[(k + 1) % 4]) for k in range(4))
            if e <= lam * lam:
                out[i, j] = True
    return out


# ----------------------------------------------------------------------------
# voracious and helping sets


@dataclass(frozen=True)
class Voracious:
    v: Direction
    Z: tuple
    T: tuple
    b: tuple
    lam: Optional[int]
    alpha_v: int
    status: str

    @property
    def found(self) -> bool:
        return self.status in ("found", "empty")


def _test_strip(family, v, u, lam) -> VStrip:
    rad = family.radius
    w = max(4, 2 * rad)
    length = 4 * lam + 8 * rad
    return VStrip(v, u, F(0), F(w), F(0), F(length))


def _strip_fills(family, strip: VStrip, Z, lam) -> bool:
    ext = strip.ext_boundary()
    pts = ext.points(lam)
    if not pts:
        return False
    for p in pts:
        seeds = [(z[0] + p[0], z[1] + p[1]) for z in Z]
        box = _bbox(strip.corners() + [tuple(map(F, s)) for s in seeds], int(lam) + 1)
        X, Y = _grid(box)
        U = neighbourhood([strip], X, Y, lam)
        init = strip.contains(X, Y)
        for s in seeds:
            init[s[0] - box[0], s[1] - box[1]] = True
        init &= U
        reg = Region.box(*box).with_restriction(U)
        res = closure(family, Configuration(reg, init))
        if not all(res.final.infected[q[0] - box[0], q[1] - box[1]] for q in pts):
            return False
    return True


def find_voracious(
    family: UpdateFamily,
    v,
    alpha_v: Optional[int] = None,
    u=None,
    lam_cap: int = 32,
    bound: int = 4,
    window_radius: Optional[int] = None,
    line_span: int = 64,
    budget: Optional[int] = None,
) -> Voracious:
    """Voracious set Z_v with one translate (T_v = {0}) and period b = v_perp.

    The margin lambda is escalated over 2, 4, 8, ... until every placement
    on the external boundary of a test strip fills that boundary.
    """
    v = v if isinstance(v, Direction) else Direction.of(*v)
    u = v if u is None else (u if isinstance(u, Direction) else Direction.of(*u))
    b = tuple(v.perp())
    if is_unstable(family, v):
        cands = [()]
        alpha = 0
    else:
        dd = direction_difficulty(family, v, bound, window_radius, line_span, budget)
        if not dd.value.is_finite:
            raise DropletError(f"direction {v}: no voracious set found within bound {bound}")
        alpha = dd.value.k
        cands = []
        for c in (dd.certificate, dd.plus_certificate, dd.minus_certificate):
            if c is not None and tuple(c) not in cands:
                cands.append(tuple(c))
        union = tuple(sorted(set(dd.plus_certificate) | set(dd.minus_certificate)))
        if union not in cands:
            cands.append(union)
    if alpha_v is not None and alpha_v != alpha:
        raise DropletError(f"direction {v}: difficulty {alpha} differs from supplied {alpha_v}")
    lam = 2
    while lam <= lam_cap:
        strip = _test_strip(family, v, u, lam)
        for Z in cands:
            if _strip_fills(family, strip, Z, lam):
                status = "empty" if not Z else "found"
                return Voracious(v, Z, ((0, 0),), b, lam, alpha, status)
        lam *= 2
    return Voracious(v, cands[0], ((0, 0),), b, None, alpha, "undetermined at cap")


@dataclass(frozen=True)
class HelpingSet:
    strip_index: int
    step: int
    vor: Voracious
    x: tuple
    ks: tuple
    sites: frozenset

    def expected_sites(self) -> frozenset:
        out = set()
        for a, k in zip(self.vor.T, self.ks):
            base = (a[0] + k * self.vor.b[0] + self.x[0], a[1] + k * self.vor.b[1] + self.x[1])
            out.update((z[0] + base[0], z[1] + base[1]) for z in self.vor.Z)
        return frozenset(out)

    def anchors(self) -> list:
        return [(a[0] + k * self.vor.b[0] + self.x[0], a[1] + k * self.vor.b[1] + self.x[1])
                for a, k in zip(self.vor.T, self.ks)]


def make_helping(vor: Voracious, strip: VStrip, strip_index: int, step: int, lam,
                 placement="middle", rng=None) -> Optional[HelpingSet]:
    """Helping set for ``strip``; None when its external boundary is too short."""
    ext = strip.ext_boundary()
    line = ext.points()
    pts = ext.points(lam)
    if not pts:
        return None
    if rng is not None:
        p = pts[int(rng.integers(len(pts)))]
    elif placement == "low":
        p = pts[0]
    elif placement == "high":
        p = pts[-1]
    else:
        p = pts[len(pts) // 2]
    x = line[0]
    b = vor.b
    k = _dot((p[0] - x[0], p[1] - x[1]), b) // _dot(b, b)
    h = HelpingSet(strip_index, step, vor, x, (k,), frozenset())
    return replace(h, sites=h.expected_sites())


def plan_helping(ring: HalfRing, vors: dict, lam, total=None, placement="middle", rng=None) -> list:
    """Helping sets for every strip of each translate R, R*, ... up to ``total``."""
    total = ring.width if total is None else total
    shifts = ring.advance_shifts(total)
    out = []
    for j, s in enumerate(shifts[:-1]):
        moved = ring.shift(s)
        for i, strip in enumerate(moved.strips):
            h = make_helping(vors[strip.v], strip, i, j, lam, placement, rng)
            if h is not None:
                out.append(h)
    return out


# ----------------------------------------------------------------------------
# spreading checks


@dataclass
class SpreadReport:
    mode: str
    passed: bool
    lam: int
    steps: int
    witnesses: list = field(default_factory=list)
    witness_strips: list = field(default_factory=list)
    failed_step: Optional[int] = None
    naive_checked: bool = False
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def serialize(self, limit: int = 20) -> str:
        lines = [f"mode: {self.mode}", f"status: {self.status}", f"lambda: {self.lam}",
                 f"steps: {self.steps}", f"naive_checked: {self.naive_checked}"]
        if self.failed_step is not None:
            lines.append(f"failed_step: {self.failed_step}")
        for n in self.notes:
            lines.append(f"note: {n}")
        if self.witnesses:
            lines.append(f"witnesses: {len(self.witnesses)}")
            for s, i in list(zip(self.witnesses, self.witness_strips))[:limit]:
                lines.append(f"  {_fmt(s)} strip {i}")
        return "\n".join(lines) + "\n"


def _restricted_run(family, pieces, seed_mask_fn, extra_sites, target_fn, lam, naive):
    corners = [c for p in pieces for c in p.corners()]
    corners += [tuple(map(F, s)) for s in extra_sites]
    box = _bbox(corners, int(math.ceil(lam)) + 1)
    X, Y = _grid(box)
    U = neighbourhood(pieces, X, Y, lam)
    init = seed_mask_fn(X, Y).copy()
    for s in extra_sites:
        if box[0] <= s[0] <= box[2] and box[1] <= s[1] <= box[3]:
            init[s[0] - box[0], s[1] - box[1]] = True
    init &= U
    reg = Region.box(*box).with_restriction(U)
    cfg = Configuration(reg, init)
    res = closure(family, cfg)
    target = target_fn(X, Y)
    missing = target & ~res.final.infected
    wit = [(int(X[i, j]), int(Y[i, j])) for i, j in zip(*np.nonzero(missing))]
    checked = False
    if not wit and naive:
        ref = closure_naive(family, cfg)
        if not np.array_equal(ref.final.infected, res.final.infected):
            raise AssertionError("restricted closure disagrees with the naive fixpoint")
        checked = True
    return wit, checked


def verify_spread(family: UpdateFamily, ring: HalfRing, helping: list, mode: str, lam,
                  naive: bool = True) -> SpreadReport:
    """Seed the ring and helping sites, close inside the lam-neighbourhood, test the target."""
    if mode not in ("advance-one", "advance-width", "corollary", "generalized"):
        raise ValueError(f"unknown mode {mode!r}")
    by_step: dict = {}
    for h in helping:
        by_step.setdefault(h.step, set()).update(h.sites)

    def fail(rep, target_ring, wit, step=None):
        rep.passed = False
        rep.witnesses = sorted(wit)
        rep.witness_strips = [target_ring.strip_of(s) for s in rep.witnesses]
        rep.failed_step = step
        return rep

    if mode == "generalized":
        if ring.kind != "generalized":
            raise ValueError("generalized mode needs a generalized ring")
        kappa = ring.width
        moved = ring.shift(kappa)
        sites = set().union(*by_step.values()) if by_step else set()
        rep = SpreadReport(mode, True, lam, 1)
        outside = _outside_count(ring, moved, sites)
        if outside:
            rep.notes.append(f"{outside} helping sites outside R^g and its translate")
        wit, checked = _restricted_run(
            family, ring.pieces() + moved.pieces(), ring.core_mask, sites, moved.core_mask, lam, naive)
        rep.naive_checked = checked
        return fail(rep, moved, wit) if wit else rep

    if mode == "corollary":
        target = ring.shift(ring.width)
        sites = set().union(*by_step.values()) if by_step else set()
        rep = SpreadReport(mode, True, lam, 1)
        wit, checked = _restricted_run(
            family, ring.strips + target.strips, ring.plain_mask, sites, target.plain_mask, lam, naive)
        rep.naive_checked = checked
        return fail(rep, target, wit) if wit else rep

    shifts = ring.advance_shifts(ring.width)
    if mode == "advance-one":
        shifts = shifts[:2]
    rep = SpreadReport(mode, True, lam, len(shifts) - 1)
    checked = True
    for j in range(len(shifts) - 1):
        cur, nxt = ring.shift(shifts[j]), ring.shift(shifts[j + 1])
        wit, ok = _restricted_run(
            family, cur.strips + nxt.strips, cur.plain_mask, by_step.get(j, set()),
            nxt.plain_mask, lam, naive)
        if wit:
            return fail(rep, nxt, wit, j)
        checked = checked and ok
    rep.naive_checked = checked
    return rep


def _outside_count(ring, moved, sites) -> int:
    if not sites:
        return 0
    pts = sorted(sites)
    X = np.array([p[0] for p in pts])
    Y = np.array([p[1] for p in pts])
    inside = ring.mask(X, Y) | moved.mask(X, Y)
    return int((~inside).sum())


@dataclass
class DropletRun:
    u: Direction
    ring: HalfRing
    voracious: dict
    helping: list
    report: SpreadReport
    feasible: bool

    @property
    def status(self) -> str:
        return "PASS" if (self.report.passed and self.feasible) else "FAIL"


def default_semicircle(family: UpdateFamily) -> Direction:
    """Midpoint of the semicircle attaining alpha (critical) or a stable-free one."""
    S = stable_set(family)
    label = classify_tri(family, S)
    if label.tri == "supercritical":
        return free_semicircle_midpoint(S)
    if label.tri == "subcritical":
        raise DropletError("no admissible semicircle for a subcritical family")
    rep = family_difficulties(family)
    return rep.alpha_midpoint


def droplet_check(
    family: UpdateFamily,
    u=None,
    kind: str = "plain",
    w=6,
    length=40,
    mode: str = "advance-width",
    anchor=(0, 0),
    first_length=None,
    lam_cap: int = 32,
    drop_strip: Optional[int] = None,
    placement: str = "middle",
    rng=None,
    naive: bool = True,
    vors: Optional[dict] = None,
) -> DropletRun:
    """Build ring, voracious and helping sets, then verify with lambda escalation."""
    u = default_semicircle(family) if u is None else u
    u = u if isinstance(u, Direction) else Direction.of(*u)
    ring = build_half_ring(family, u, kind, w, length, anchor, first_length)
    if vors is None:
        vors = {v: find_voracious(family, v, u=u, lam_cap=lam_cap) for v in ring.directions}
    missing = [str(v) for v in ring.directions if not vors[v].found]
    if missing:
        rep = SpreadReport(mode, False, lam_cap, 0,
                           notes=[f"voracious set undetermined at cap for {', '.join(missing)}"])
        return DropletRun(u, ring, vors, [], rep, False)
    lam = max([2] + [vors[v].lam for v in ring.directions])
    total = ring.width
    first = None
    while True:
        helping = plan_helping(ring, vors, lam, total, placement, rng)
        if drop_strip is not None:
            helping = [h for h in helping if h.strip_index != drop_strip]
        rep = verify_spread(family, ring, helping, mode, lam, naive)
        if rep.passed:
            break
        first = first or (rep, helping)
        if lam * 2 > lam_cap:
            # witnesses from the smallest margin are the informative ones
            rep, helping = first
            lam = rep.lam
            rep.notes.append(f"no pass with lambda escalated up to {lam_cap}")
            break
        lam *= 2
    feasible = ring.width >= lam and ring.length >= lam
    if not feasible:
        rep.notes.append(f"infeasible: width or length below lambda={lam}")
    return DropletRun(u, ring, vors, helping, rep, feasible)


# ----------------------------------------------------------------------------
# supercritical rectangles


@dataclass
class RectangleReport:
    family: str
    rooted: Optional[str]
    v: Optional[Direction]
    n1: int
    n2: int
    left: Optional[bool]
    right: Optional[bool]
    left_witnesses: list = field(default_factory=list)
    right_witnesses: list = field(default_factory=list)
    status: str = "ok"

    @property
    def expected_right(self) -> bool:
        return self.rooted == "unrooted"

    @property
    def passed(self) -> bool:
        """Left growth always, right growth exactly when unrooted."""
        return self.status == "ok" and bool(self.left) and self.right == self.expected_right

    def serialize(self, limit: int = 10) -> str:
        if self.status != "ok":
            return f"family: {self.family}\nstatus: {self.status}\n"
        lines = [f"family: {self.family}", f"class: supercritical {self.rooted}", f"v: {self.v}",
                 f"n1: {self.n1}", f"n2: {self.n2}",
                 f"left: {'PASS' if self.left else 'FAIL'}",
                 f"right: {'PASS' if self.right else 'FAIL'}"]
        for name, wit in (("left", self.left_witnesses), ("right", self.right_witnesses)):
            if wit:
                lines.append(f"{name}_witnesses: " + " ".join(_fmt(s) for s in wit[:limit]))
        return "\n".join(lines) + "\n"


def _unrooted_axis(S) -> Optional[Direction]:
    for m in candidate_midpoints(S):
        if all(not S.arc_meets_semicircle(x) and not S.points_in_semicircle(x) for x in (m, -m)):
            return m
    return None


def verify_supercritical_rectangle(family: UpdateFamily, n1: int = 8, n2: int = 8,
                                   margin: Optional[int] = None) -> RectangleReport:
    """Check V_(-1,0) (and V_(1,0) when unrooted) inside the closure of V_(0,0)."""
    S = stable_set(family)
    label = classify_tri(family, S)
    if label.tri != "supercritical":
        raise ValueError("rectangle growth applies to supercritical families")
    rad = family.radius
    if min(n1, n2) < rad:
        return RectangleReport(family.name, label.rooted, None, n1, n2, None, None,
                               status="inconclusive: n1, n2 below the rule radius")
    if label.rooted == "rooted":
        v = -free_semicircle_midpoint(S)
    else:
        v = _unrooted_axis(S) or Direction(1, 0)
    vp = v.perp()
    nv = v.norm2
    pad = (n1 + n2) * max(abs(v.x), abs(v.y)) + 2 * rad if margin is None else margin
    corners = []
    for a in (-1, 2):
        for b in (0, 1):
            corners.append((a * n1 * v.x + b * n2 * vp.x, a * n1 * v.y + b * n2 * vp.y))
    box = _bbox(corners, pad)
    X, Y = _grid(box)

    def block(k):
        A = v.x * X + v.y * Y - k * n1 * nv
        B = vp.x * X + vp.y * Y
        return (A >= 0) & (A < n1 * nv) & (B >= 0) & (B < n2 * nv)

    reg = Region.box(*box)
    res = closure(family, Configuration(reg, block(0)))
    out = {}
    for k in (-1, 1):
        miss = block(k) & ~res.final.infected
        out[k] = [(int(X[i, j]), int(Y[i, j])) for i, j in zip(*np.nonzero(miss))]
    return RectangleReport(family.name, label.rooted, v, n1, n2, not out[-1], not out[1],
                           out[-1], out[1])
