from fractions import Fraction as F

import numpy as np
import pytest

from kcmlab.droplet import (DropletError, LineSegment, VStrip, build_half_ring, droplet_check,
                            find_voracious, neighbourhood, plan_helping, verify_spread,
                            verify_supercritical_rectangle)
from kcmlab.family import UpdateFamily, builtin
from kcmlab.geometry import Direction, quasi_stable_directions

D = Direction.of


@pytest.fixture(scope="module")
def duarte_vors():
    fam = builtin("duarte")
    return {D(1, 0): find_voracious(fam, (1, 0))}


@pytest.fixture(scope="module")
def fa2f_diag():
    fam = builtin("fa2f")
    ring = build_half_ring(fam, (1, 1), "plain", 4, 20)
    return fam, {v: find_voracious(fam, v, u=D(1, 1)) for v in ring.directions}


def test_voracious_duarte(duarte_vors):
    vor = duarte_vors[D(1, 0)]
    assert vor.found and vor.Z == ((0, 0),) and vor.T == ((0, 0),)
    assert vor.b == (0, 1) and vor.alpha_v == 1 and vor.lam == 2


def test_voracious_fa2f_single_site():
    vor = find_voracious(builtin("fa2f"), (1, 0))
    assert len(vor.Z) == 1 and vor.alpha_v == 1


def test_voracious_unstable_is_empty():
    vor = find_voracious(builtin("fa1f"), (1, 0))
    assert vor.status == "empty" and vor.Z == ()


def test_voracious_rejects_wrong_alpha():
    with pytest.raises(DropletError):
        find_voracious(builtin("duarte"), (1, 0), alpha_v=2)


def test_line_segment_margin():
    seg = LineSegment(D(0, 1), D(1, 1), 7, F(-79), F(1))
    assert len(seg.points()) == 81
    assert len(seg.points(2)) == 77
    a, b = seg.endpoints()
    assert a[1] == 7 and b[1] == 7


def test_strip_contains_and_area():
    s = VStrip(D(1, 0), D(1, 0), F(0), F(6), F(0), F(40))
    X, Y = np.meshgrid(np.arange(-2, 10), np.arange(-45, 3), indexing="ij")
    assert s.contains(X, Y).sum() == 7 * 41
    assert s.area == 240
    assert s.shift(2).low == 2 and s.translate((1, 3)).top == 3


def test_ring_strip_count_matches_quasi_stable():
    fam = builtin("duarte")
    ring = build_half_ring(fam, (1, 0), "plain", 6, 40)
    assert ring.m == len(quasi_stable_directions(fam, D(1, 0))) == 1


def test_ring_shape_invariants():
    ring = build_half_ring(builtin("fa2f"), (1, 1), "plain", 6, 40)
    assert ring.directions == [D(0, 1), D(1, 1), D(1, 0)]
    for a, b in zip(ring.strips, ring.strips[1:]):
        ca, cb = a.corners(), b.corners()
        assert ca[0] == cb[3] and ca[1] == cb[2]
    assert all(s.area == 6 * 40 * 2 for s in ring.strips)


def test_generalized_ring_exchange():
    ring = build_half_ring(builtin("fa2f"), (1, 1), "generalized", 8, 40)
    for s, l, r in zip(ring.strips, ring.left, ring.right):
        assert l.area == r.area == s.area / 9
        assert l.low == s.high and r.low == s.low
    box = (-20, -180, 200, 30)
    X, Y = np.meshgrid(np.arange(box[0], box[2] + 1), np.arange(box[1], box[3] + 1), indexing="ij")
    core = ring.core_mask(X, Y)
    assert not (core & ~ring.plain_mask(X, Y)).any()
    assert not (core & ~ring.mask(X, Y)).any()


def test_elongated_first_strip():
    ring = build_half_ring(builtin("duarte"), (1, 0), "elongated", 6, 40)
    assert ring.strips[0].length == 80
    with pytest.raises(DropletError):
        build_half_ring(builtin("duarte"), (1, 0), "elongated", 6, 40, first_length=30)


def test_bad_ring_parameters():
    with pytest.raises(DropletError):
        build_half_ring(builtin("duarte"), (1, 0), "plain", 0, 40)
    with pytest.raises(DropletError):
        build_half_ring(builtin("duarte"), (1, 0), "twisted", 6, 40)


def test_neighbourhood_contains_pieces():
    s = VStrip(D(1, 0), D(1, 0), F(0), F(4), F(0), F(10))
    X, Y = np.meshgrid(np.arange(-5, 10), np.arange(-16, 6), indexing="ij")
    N = neighbourhood([s], X, Y, 2)
    assert not (s.contains(X, Y) & ~N).any()
    assert N[X == -2].any() and not N[X == -3].any()


@pytest.mark.parametrize("mode", ["advance-one", "advance-width", "corollary"])
def test_duarte_modes_pass(mode, duarte_vors):
    run = droplet_check(builtin("duarte"), (1, 0), "plain", 6, 40, mode, vors=duarte_vors)
    assert run.status == "PASS" and run.report.naive_checked


def test_duarte_generalized_and_elongated(duarte_vors):
    fam = builtin("duarte")
    assert droplet_check(fam, (1, 0), "generalized", 6, 40, "generalized", vors=duarte_vors).status == "PASS"
    assert droplet_check(fam, (1, 0), "elongated", 6, 40, "advance-width", vors=duarte_vors).status == "PASS"


def test_missing_helping_set_fails_on_strip(duarte_vors):
    run = droplet_check(builtin("duarte"), (1, 0), "plain", 6, 40, drop_strip=0, vors=duarte_vors)
    assert run.status == "FAIL"
    assert run.report.witnesses and set(run.report.witness_strips) == {0}
    # witnesses sit on the external boundary of the first translate
    ext = run.ring.strips[0].ext_boundary()
    assert set(run.report.witnesses) <= set(ext.points())


def test_fa2f_drop_each_stable_strip(fa2f_diag):
    fam, vors = fa2f_diag
    for i in (0, 2):  # strip 1 has the unstable direction (1,1)
        run = droplet_check(fam, (1, 1), "plain", 4, 20, drop_strip=i, vors=vors, naive=False)
        rep = run.report
        assert run.status == "FAIL" and rep.witnesses
        target = run.ring.shift(run.ring.advance_shifts(4)[rep.failed_step + 1])
        # a witness at a shared corner is labelled with the first strip holding it
        assert all(i in target.strips_of(s) for s in rep.witnesses)


def test_unstable_only_ring_passes():
    run = droplet_check(builtin("fa1f"), (1, 0), "plain", 6, 20, "advance-width")
    assert run.status == "PASS"
    assert all(not h.sites for h in run.helping)


def test_infeasible_ring_fails_with_witness(duarte_vors):
    run = droplet_check(builtin("duarte"), (1, 0), "plain", 1, 3, vors=duarte_vors)
    assert run.status == "FAIL" and run.report.witnesses
    assert any("infeasible" in n for n in run.report.notes)


def test_verify_spread_rejects_unknown_mode(duarte_vors):
    ring = build_half_ring(builtin("duarte"), (1, 0), "plain", 6, 40)
    with pytest.raises(ValueError):
        verify_spread(builtin("duarte"), ring, [], "sideways", 2)
    with pytest.raises(ValueError):
        verify_spread(builtin("duarte"), ring, [], "generalized", 2)


def test_helping_sites_are_translates(duarte_vors):
    ring = build_half_ring(builtin("duarte"), (1, 0), "plain", 6, 40)
    hs = plan_helping(ring, duarte_vors, 2)
    assert len(hs) == 6
    for h in hs:
        assert h.sites == h.expected_sites()
        (k,) = h.ks
        assert h.anchors() == [(h.x[0], h.x[1] + k)]


CONFIGS = [(name, u, w, l, drop)
           for name, u in [("duarte", (1, 0)), ("fa2f", (1, 1)), ("fa2f", (1, 0)),
                           ("anisotropic", (1, 0)), ("fa1f", (1, 0))]
           for w, l in [(4, 20), (6, 30)]
           for drop in (None, 0)]


@pytest.fixture(scope="module")
def vor_cache():
    return {}


@pytest.mark.parametrize("name,u,w,l,drop", CONFIGS)
def test_advance_width_agrees_with_corollary(name, u, w, l, drop, vor_cache):
    fam = builtin(name)
    if (name, u) not in vor_cache:
        ring = build_half_ring(fam, u, "plain", w, l)
        vor_cache[(name, u)] = {v: find_voracious(fam, v, u=D(*u)) for v in ring.directions}
    vors = vor_cache[(name, u)]
    a = droplet_check(fam, u, "plain", w, l, "advance-width", drop_strip=drop, vors=vors, naive=False)
    b = droplet_check(fam, u, "plain", w, l, "corollary", drop_strip=drop, vors=vors, naive=False)
    assert a.status == b.status


def test_rectangles():
    fa1f = verify_supercritical_rectangle(builtin("fa1f"))
    assert fa1f.left and fa1f.right and fa1f.passed
    east = verify_supercritical_rectangle(builtin("east2d"))
    assert east.left and not east.right and east.passed
    assert east.right_witnesses


def test_rectangle_inconclusive_below_radius():
    fam = UpdateFamily.from_rules([[(-2, 0)]])
    rep = verify_supercritical_rectangle(fam, 1, 1)
    assert rep.status.startswith("inconclusive") and not rep.passed


def test_rectangle_rejects_critical():
    with pytest.raises(ValueError):
        verify_supercritical_rectangle(builtin("duarte"))
