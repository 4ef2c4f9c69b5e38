import numpy as np
from hypothesis import strategies as st

from kcmlab.family import UpdateFamily

OFFSETS = [(dx, dy) for dx in range(-2, 3) for dy in range(-2, 3) if (dx, dy) != (0, 0)]


@st.composite
def families(draw, max_rules=4, max_size=3):
    n = draw(st.integers(1, max_rules))
    rules = set()
    for _ in range(n):
        rule = draw(st.lists(st.sampled_from(OFFSETS), min_size=1, max_size=max_size, unique=True))
        rules.add(tuple(sorted(rule)))
    return UpdateFamily.from_rules(sorted(rules), "random")


@st.composite
def directions(draw, r=6):
    x = draw(st.integers(-r, r))
    y = draw(st.integers(-r, r))
    if (x, y) == (0, 0):
        x = 1
    from math import gcd

    g = gcd(x, y)
    return (x // g, y // g)


def random_mask(seed, shape, density):
    return np.random.default_rng(seed).random(shape) < density


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
