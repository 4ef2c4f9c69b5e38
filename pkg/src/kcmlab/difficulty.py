"""Bounded brute-force difficulties of directions and families.

The oracle searches for a small set ``Z`` such that the half-plane
``{<x,u> < 0}`` together with ``Z`` infects a long stretch of the boundary
line on each side.  It certifies upper bounds only; a failed search is
reported as ``exceeds(bound)``, never as a proof of infinite difficulty.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from .bootstrap import HalfPlaneFrame, closure, closure_naive
from .family import UpdateFamily
from .geometry import Direction, StableSet, candidate_midpoints, classify_tri, is_unstable, stable_set

DEFAULT_BOUND = 4
DEFAULT_LINE_SPAN = 64
DEFAULT_BUDGET = 200_000


def default_window(family: UpdateFamily) -> int:
    return 8 * family.radius


def default_budget() -> int:
    return int(os.environ.get("KCMLAB_BUDGET", DEFAULT_BUDGET))


@dataclass(frozen=True)
class DifficultyValue:
    """Either ``finite(k)`` or ``exceeds(bound)``."""

    k: Optional[int] = None
    bound: Optional[int] = None

    def __post_init__(self):
        if (self.k is None) == (self.bound is None):
            raise ValueError("exactly one of k / bound must be set")

    @classmethod
    def finite(cls, k: int):
        return cls(k=int(k))

    @classmethod
    def exceeds(cls, bound: int):
        return cls(bound=int(bound))

    @property
    def is_finite(self) -> bool:
        return self.k is not None

    @property
    def lower(self) -> int:
        """Certified lower bound under the bounded-search semantics."""
        return self.k if self.is_finite else self.bound + 1

    def _key(self):
        return self.k if self.is_finite else math.inf

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __gt__(self, other):
        return self._key() > other._key()

    def __ge__(self, other):
        return self._key() >= other._key()

    def __str__(self):
        return str(self.k) if self.is_finite else f">{self.bound}"


def vmax(values, default):
    out = default
    for v in values:
        if v > out:
            out = v
    return out


class OracleBudgetExhausted(RuntimeError):
    def __init__(self, direction, enumerated, size_reached, plus_k, minus_k):
        super().__init__(
            f"oracle budget exhausted for direction {direction} after {enumerated} sets "
            f"(size {size_reached}; plus={plus_k}, minus={minus_k})"
        )
        self.direction = direction
        self.enumerated = enumerated
        self.size_reached = size_reached
        self.plus_k = plus_k
        self.minus_k = minus_k


@dataclass
class DirectionDifficulty:
    direction: Direction
    value: DifficultyValue
    plus_k: Optional[int]
    minus_k: Optional[int]
    plus_certificate: Optional[tuple]
    minus_certificate: Optional[tuple]
    enumerated: int
    validated: bool = False

    @property
    def certificate(self) -> Optional[tuple]:
        """A smallest set certifying the reported (one-sided minimum) value."""
        if not self.value.is_finite:
            return None
        if self.plus_k is not None and self.plus_k == self.value.k:
            return self.plus_certificate
        return self.minus_certificate


def direction_difficulty(
    family: UpdateFamily,
    u,
    bound: int = DEFAULT_BOUND,
    window_radius: Optional[int] = None,
    line_span: int = DEFAULT_LINE_SPAN,
    budget: Optional[int] = None,
    validate: bool = True,
) -> DirectionDifficulty:
    """Search Z in size-then-lexicographic order for one-sided line certificates.

    Sets are canonicalised under translation along the boundary line: the
    element with the smallest line coordinate is taken in one period.
    """
    u = u if isinstance(u, Direction) else Direction.of(*u)
    if bound < 1:
        raise ValueError("bound must be >= 1")
    R = default_window(family) if window_radius is None else int(window_radius)
    budget = default_budget() if budget is None else budget
    if is_unstable(family, u):
        return DirectionDifficulty(u, DifficultyValue.finite(0), 0, 0, (), (), 0, True)
    frame = HalfPlaneFrame(family, u, R, line_span)
    window = frame.window_sites()
    n = frame.n
    firsts = [i for i, s in enumerate(window) if frame.along(*s) < n]
    plus_k = minus_k = None
    plus_cert = minus_cert = None
    enumerated = 0
    for k in range(1, bound + 1):
        for i in firsts:
            for rest in combinations(range(i + 1, len(window)), k - 1):
                enumerated += 1
                if enumerated > budget:
                    raise OracleBudgetExhausted(u, enumerated - 1, k, plus_k, minus_k)
                Z = (window[i],) + tuple(window[j] for j in rest)
                init = frame.seed(Z)
                res = closure(family, init, exterior=frame.exterior)
                probe = frame.evaluate(res.final, init)
                if probe.plus and plus_k is None:
                    plus_k, plus_cert = k, Z
                if probe.minus and minus_k is None:
                    minus_k, minus_cert = k, Z
                if plus_k is not None and minus_k is not None:
                    break
            if plus_k is not None and minus_k is not None:
                break
        if plus_k is not None and minus_k is not None:
            break
    if plus_k is not None and minus_k is not None:
        value = DifficultyValue.finite(min(plus_k, minus_k))
    else:
        value = DifficultyValue.exceeds(bound)
    out = DirectionDifficulty(u, value, plus_k, minus_k, plus_cert, minus_cert, enumerated)
    if validate and value.is_finite:
        out.validated = validate_certificate(family, u, out, frame)
        if not out.validated:
            raise AssertionError(f"naive closure rejected certificate for {u}")
    return out


def validate_certificate(family, u, result: DirectionDifficulty, frame: HalfPlaneFrame) -> bool:
    """Re-run each certificate through the unoptimised fixpoint loop."""
    probes = {}
    for cert, side in ((result.plus_certificate, "plus"), (result.minus_certificate, "minus")):
        if cert is None:
            continue
        if cert not in probes:
            init = frame.seed(cert)
            res = closure_naive(family, init, exterior=frame.exterior)
            probes[cert] = frame.evaluate(res.final, init)
        if not getattr(probes[cert], side):
            return False
    return True


def alpha_of_direction(family, u, bound=DEFAULT_BOUND, window_radius=None,
                       line_span=DEFAULT_LINE_SPAN, budget=None) -> DifficultyValue:
    return direction_difficulty(family, u, bound, window_radius, line_span, budget).value


@dataclass
class DifficultyReport:
    family: str
    tri: str
    rooted: Optional[str]
    stable: StableSet
    per_direction: dict = field(default_factory=dict)
    alpha: DifficultyValue = DifficultyValue.finite(0)
    beta: DifficultyValue = DifficultyValue.finite(0)
    alpha_midpoint: Optional[Direction] = None
    beta_midpoint: Optional[Direction] = None
    critical_label: Optional[str] = None
    balanced: Optional[bool] = None
    search_bound: int = DEFAULT_BOUND
    window_radius: int = 8
    line_span: int = DEFAULT_LINE_SPAN

    def value_of(self, d: Direction) -> DifficultyValue:
        if d in self.per_direction:
            return self.per_direction[d].value
        if self.stable.contains(d):
            return DifficultyValue.exceeds(self.search_bound)
        return DifficultyValue.finite(0)

    def summary(self) -> str:
        parts = [self.tri]
        if self.rooted:
            parts.append(self.rooted)
        parts.append(f"alpha={self.alpha}")
        parts.append(f"beta={self.beta}")
        if self.critical_label:
            parts.append(self.critical_label)
        if self.balanced is not None:
            parts.append("balanced" if self.balanced else "unbalanced")
        return ", ".join(parts)

    def to_csv(self) -> str:
        lines = ["direction,value,plus_k,minus_k,certificate"]
        for d in sorted(self.per_direction, key=lambda x: (x.x, x.y)):
            r = self.per_direction[d]
            cert = " ".join(f"{x},{y}" for x, y in (r.certificate or ()))
            pk = "" if r.plus_k is None else r.plus_k
            mk = "" if r.minus_k is None else r.minus_k
            lines.append(f"\"{d}\",{r.value},{pk},{mk},\"{cert}\"")
        return "\n".join(lines) + "\n"


def _semicircle_max(S: StableSet, mid: Direction, value, bound, both: bool, closed: bool = False):
    mids = (mid, -mid) if both else (mid,)
    if any(S.arc_meets_semicircle(m, closed) for m in mids):
        return DifficultyValue.exceeds(bound)
    pts = set()
    for m in mids:
        pts.update(S.points_in_semicircle(m, closed))
    return vmax((value(p) for p in pts), DifficultyValue.finite(0))


def family_difficulties(
    family: UpdateFamily,
    bound: int = DEFAULT_BOUND,
    window_radius: Optional[int] = None,
    line_span: int = DEFAULT_LINE_SPAN,
    budget: Optional[int] = None,
    validate: bool = True,
) -> DifficultyReport:
    S = stable_set(family)
    label = classify_tri(family, S)
    if label.tri == "subcritical":
        raise ValueError("difficulties are defined here for critical and supercritical families")
    R = default_window(family) if window_radius is None else int(window_radius)
    rep = DifficultyReport(family.name, label.tri, label.rooted, S,
                           search_bound=bound, window_radius=R, line_span=line_span)
    for p in S.isolated:
        rep.per_direction[p] = direction_difficulty(family, p, bound, R, line_span, budget, validate)

    mids = candidate_midpoints(S)
    best_a = best_b = None
    for m in mids:
        a = _semicircle_max(S, m, rep.value_of, bound, both=False)
        if best_a is None or a < best_a[0]:
            best_a = (a, m)
        b = _semicircle_max(S, m, rep.value_of, bound, both=True)
        if best_b is None or b < best_b[0]:
            best_b = (b, m)
    rep.alpha, rep.alpha_midpoint = best_a
    rep.beta, rep.beta_midpoint = best_b

    if label.tri == "critical":
        rep.balanced = rep.alpha.is_finite and any(
            _semicircle_max(S, m, rep.value_of, bound, both=False, closed=True) <= rep.alpha
            for m in mids
        )
        rep.critical_label = critical_label(rep.alpha, rep.beta)
    return rep


def critical_label(alpha: DifficultyValue, beta: DifficultyValue) -> str:
    """alpha-rooted iff beta >= 2 alpha; 'undecided' when bounds cannot tell."""
    if not alpha.is_finite:
        return "undecided"
    if beta.is_finite:
        return "alpha-rooted" if beta.k >= 2 * alpha.k else "beta-unrooted"
    if beta.lower >= 2 * alpha.k:
        return "alpha-rooted"
    return "undecided"
