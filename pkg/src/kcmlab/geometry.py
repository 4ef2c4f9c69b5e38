"""Exact geometry of rational directions on the unit circle.

Directions are primitive integer vectors.  Angular order uses a piecewise
rational pseudo-angle (quadrant index plus a ratio inside the quadrant), so
every comparison is exact integer/rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .family import UpdateFamily


@dataclass(frozen=True, order=True)
class Direction:
    x: int
    y: int

    def __post_init__(self):
        if self.x == 0 and self.y == 0:
            raise ValueError("zero direction")
        if math.gcd(self.x, self.y) != 1:
            raise ValueError(f"({self.x},{self.y}) is not primitive")

    @classmethod
    def of(cls, x: int, y: int) -> "Direction":
        g = math.gcd(int(x), int(y))
        if g == 0:
            raise ValueError("zero direction")
        return cls(int(x) // g, int(y) // g)

    def __neg__(self):
        return Direction(-self.x, -self.y)

    def perp(self) -> "Direction":
        """Counterclockwise rotation by a quarter turn."""
        return Direction(-self.y, self.x)

    def dot(self, other) -> int:
        return self.x * other[0] + self.y * other[1]

    def cross(self, other) -> int:
        return self.x * other[1] - self.y * other[0]

    def __iter__(self):
        yield self.x
        yield self.y

    def __getitem__(self, i):
        return (self.x, self.y)[i]

    @property
    def norm2(self) -> int:
        return self.x * self.x + self.y * self.y

    def __str__(self):
        return f"({self.x},{self.y})"


def pseudo_angle(d) -> Fraction:
    """Exact monotone surrogate of the polar angle, valued in [0, 4)."""
    x, y = d[0], d[1]
    if x > 0 and y >= 0:
        return Fraction(y, x + y)
    if x <= 0 and y > 0:
        return 1 + Fraction(-x, y - x)
    if x < 0 and y <= 0:
        return 2 + Fraction(-y, -x - y)
    return 3 + Fraction(x, x - y)


def rel_angle(a, b) -> Fraction:
    """Pseudo-angle swept counterclockwise from ``a`` to ``b``, in [0, 4)."""
    return (pseudo_angle(b) - pseudo_angle(a)) % 4


def sort_ccw(dirs):
    return sorted(set(dirs), key=pseudo_angle)


def gap_midpoint(a: Direction, b: Direction) -> Direction:
    """A rational direction strictly inside the ccw open arc from a to b."""
    if a == b:
        return -a
    r = rel_angle(a, b)
    if r < 2:
        return Direction.of(a.x + b.x, a.y + b.y)
    if r == 2:
        return a.perp()
    return Direction.of(-(a.x + b.x), -(a.y + b.y))


@dataclass(frozen=True)
class Arc:
    """Counterclockwise arc from ``start`` to ``end``.

    ``full`` marks the whole circle; a single point has start == end with
    both endpoints closed.
    """

    start: Direction
    end: Direction
    closed_start: bool = True
    closed_end: bool = True
    full: bool = False

    @classmethod
    def full_circle(cls):
        d = Direction(1, 0)
        return cls(d, d, True, True, True)

    @property
    def is_point(self) -> bool:
        return not self.full and self.start == self.end

    def contains(self, d: Direction) -> bool:
        if self.full:
            return True
        if d == self.start:
            return self.closed_start
        if d == self.end:
            return self.closed_end
        if self.is_point:
            return False
        return 0 < rel_angle(self.start, d) < rel_angle(self.start, self.end)

    def midpoint(self) -> Direction:
        return gap_midpoint(self.start, self.end)

    def __str__(self):
        if self.full:
            return "full"
        lb = "[" if self.closed_start else "("
        rb = "]" if self.closed_end else ")"
        return f"arc {lb}{self.start},{self.end}{rb}"


def is_unstable(family: UpdateFamily, u) -> bool:
    """True iff some rule lies strictly inside the half-plane <x,u> < 0."""
    ux, uy = u[0], u[1]
    return any(all(dx * ux + dy * uy < 0 for dx, dy in rule) for rule in family.rules)


def _perps(offsets) -> list[Direction]:
    out = set()
    for dx, dy in offsets:
        p = Direction.of(-dy, dx)
        out.add(p)
        out.add(-p)
    return sort_ccw(out)


def unstable_arc(rule) -> Optional[Arc]:
    """The open arc {u : <x,u> < 0 for all x in rule}, or None if empty."""
    events = _perps(rule)
    for i, a in enumerate(events):
        b = events[(i + 1) % len(events)]
        m = gap_midpoint(a, b)
        if all(dx * m.x + dy * m.y < 0 for dx, dy in rule):
            return Arc(a, b, False, False)
    return None


def critical_directions(family: UpdateFamily) -> list[Direction]:
    return _perps(family.offsets)


@dataclass
class StableSet:
    """S(U) as disjoint closed arcs plus isolated directions."""

    arcs: list[Arc] = field(default_factory=list)
    isolated: list[Direction] = field(default_factory=list)

    @property
    def full(self) -> bool:
        return any(a.full for a in self.arcs)

    @property
    def empty(self) -> bool:
        return not self.arcs and not self.isolated

    def contains(self, d: Direction) -> bool:
        return d in self.isolated or any(a.contains(d) for a in self.arcs)

    def components(self) -> list[Arc]:
        """All components as arcs (points as degenerate arcs), sorted ccw."""
        comps = list(self.arcs) + [Arc(p, p) for p in self.isolated]
        return sorted(comps, key=lambda a: pseudo_angle(a.start))

    def events(self) -> list[Direction]:
        """Arc endpoints and isolated points, closed under negation."""
        ev = set(self.isolated)
        for a in self.arcs:
            if not a.full:
                ev.update((a.start, a.end))
        ev.update([-d for d in ev])
        return sort_ccw(ev)

    def arc_meets_semicircle(self, mid: Direction, closed: bool = False) -> bool:
        """Whether a nondegenerate arc meets the semicircle centred at ``mid``."""
        for a in self.arcs:
            if a.full:
                return True
            inside = (lambda d: d.dot(mid) >= 0) if closed else (lambda d: d.dot(mid) > 0)
            if inside(a.start) or inside(a.end) or a.contains(mid):
                return True
        return False

    def points_in_semicircle(self, mid: Direction, closed: bool = False):
        if closed:
            return [p for p in self.isolated if p.dot(mid) >= 0]
        return [p for p in self.isolated if p.dot(mid) > 0]

    def serialize(self) -> str:
        lines = []
        for comp in self.components():
            if comp.full:
                lines.append("full")
            elif comp.is_point:
                lines.append(f"point {comp.start}")
            else:
                lines.append(f"arc [{comp.start},{comp.end}]")
        return "\n".join(lines) + ("\n" if lines else "")

    def __str__(self):
        s = self.serialize().strip().replace("\n", "; ")
        return s or "empty"


def parse_stable_set(text: str) -> StableSet:
    def pt(s):
        x, y = s.strip().strip("()").split(",")
        return Direction(int(x), int(y))

    out = StableSet()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "full":
            out.arcs.append(Arc.full_circle())
        elif line.startswith("point"):
            out.isolated.append(pt(line[5:]))
        elif line.startswith("arc"):
            body = line[3:].strip().strip("[]")
            a, b = body.split("),(")
            out.arcs.append(Arc(pt(a + ")"), pt("(" + b)))
        else:
            raise ValueError(f"bad stable-set line {line!r}")
    return out


def stable_set(family: UpdateFamily) -> StableSet:
    """Exact S(U): the complement of the union of the rules' unstable arcs.

    Stability is constant on the open gaps between consecutive critical
    directions (perpendiculars of offsets), so it suffices to test each
    critical direction and one rational point in each gap.
    """
    crit = critical_directions(family)
    n = len(crit)
    point_stable = [not is_unstable(family, d) for d in crit]
    gap_stable = [
        not is_unstable(family, gap_midpoint(crit[i], crit[(i + 1) % n])) for i in range(n)
    ]
    if all(point_stable) and all(gap_stable):
        return StableSet([Arc.full_circle()], [])
    # rotate so that we start right after an unstable element
    # elements in circular order: p0, g0, p1, g1, ...
    elems = []
    for i in range(n):
        elems.append(("p", i, point_stable[i]))
        elems.append(("g", i, gap_stable[i]))
    k = next(j for j, e in enumerate(elems) if not e[2])
    elems = elems[k + 1 :] + elems[: k + 1]
    out = StableSet()
    run: list = []
    for e in elems + [("end", -1, False)]:
        if e[2]:
            run.append(e)
            continue
        if run:
            # a run always starts and ends with a point (the unstable set is open)
            first, last = run[0], run[-1]
            a, b = crit[first[1]], crit[last[1]]
            if len(run) == 1:
                out.isolated.append(a)
            else:
                out.arcs.append(Arc(a, b))
            run = []
    out.arcs.sort(key=lambda a: pseudo_angle(a.start))
    out.isolated = sort_ccw(out.isolated)
    return out


@dataclass(frozen=True)
class ClassLabel:
    tri: str
    rooted: Optional[str] = None

    def __post_init__(self):
        assert self.tri in ("supercritical", "critical", "subcritical")
        assert (self.rooted is not None) == (self.tri == "supercritical")

    def __str__(self):
        return f"{self.tri} {self.rooted}" if self.rooted else self.tri


def _components_gaps(comps: list[Arc]):
    """Open complementary gaps (end_i -> start_{i+1}) between sorted components."""
    out = []
    for i, c in enumerate(comps):
        nxt = comps[(i + 1) % len(comps)]
        out.append((c.end, nxt.start))
    return out


def _gap_at_least_half(a: Direction, b: Direction, single: bool) -> bool:
    if single and a == b:
        return True
    return rel_angle(a, b) >= 2


def free_semicircle_midpoint(S: StableSet, arcs_only: bool = False) -> Optional[Direction]:
    """Midpoint of an open semicircle missing S (or only its arcs), if any."""
    comps = S.arcs if arcs_only else S.components()
    if S.full:
        return None
    if not comps:
        return Direction(1, 0)
    gaps = _components_gaps(comps)
    best = None
    for a, b in gaps:
        if _gap_at_least_half(a, b, len(comps) == 1):
            r = 4 if (a == b and len(comps) == 1) else rel_angle(a, b)
            if best is None or r > best[0]:
                best = (r, a, b)
    if best is None:
        return None
    _, a, b = best
    return gap_midpoint(a, b)


def classify_tri(family: UpdateFamily, S: Optional[StableSet] = None) -> ClassLabel:
    S = stable_set(family) if S is None else S
    if free_semicircle_midpoint(S) is not None:
        return ClassLabel("supercritical", "rooted" if _has_non_opposite(S) else "unrooted")
    if free_semicircle_midpoint(S, arcs_only=True) is not None:
        return ClassLabel("critical")
    return ClassLabel("subcritical")


def _has_non_opposite(S: StableSet) -> bool:
    if S.arcs:
        return True
    pts = S.isolated
    return any(pts[i] != -pts[j] for i in range(len(pts)) for j in range(i + 1, len(pts)))


def candidate_midpoints(S: StableSet) -> list[Direction]:
    """Midpoints of semicircles covering every distinct semicircle content.

    The content of the semicircle centred at m changes only when m crosses
    a direction perpendicular to a stable-set event.
    """
    ev = S.events()
    if not ev:
        return [Direction(1, 0)]
    pts = sort_ccw([d.perp() for d in ev] + [-d.perp() for d in ev])
    mids = list(pts)
    for i, a in enumerate(pts):
        mids.append(gap_midpoint(a, pts[(i + 1) % len(pts)]))
    return sort_ccw(mids)


def reflect(v: Direction, u: Direction) -> Direction:
    """Reflection of v across the line spanned by u."""
    k = 2 * v.dot(u)
    n = u.norm2
    return Direction.of(k * u.x - n * v.x, k * u.y - n * v.y)


class SemicircleError(ValueError):
    pass


def quasi_stable_directions(family: UpdateFamily, u: Direction, S: Optional[StableSet] = None):
    """Quasi-stable directions inside the open semicircle centred at u, clockwise.

    Only members of the open semicircle are returned; the boundary
    directions +-u_perp are excluded.
    """
    S = stable_set(family) if S is None else S
    if S.arc_meets_semicircle(u):
        raise SemicircleError("semicircle not admissible: infinite stable intersection")
    base = {u} | set(S.isolated) | set(critical_directions(family))
    out = set()
    for d in base:
        for c in (d, reflect(d, u)):
            if c.dot(u) > 0:
                out.add(c)
    top = u.perp()
    return sorted(out, key=lambda d: rel_angle(d, top))
