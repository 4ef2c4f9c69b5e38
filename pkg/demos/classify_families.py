"""Classify every built-in family and print its difficulty report."""

import time

from kcmlab.difficulty import family_difficulties
from kcmlab.family import BUILTIN_NAMES, builtin
from kcmlab.geometry import stable_set


def main():
    for name in BUILTIN_NAMES:
        fam = builtin(name)
        t0 = time.perf_counter()
        rep = family_difficulties(fam)
        print(f"{name:16s} S = {stable_set(fam)}")
        print(f"{'':16s} {rep.summary()}  ({time.perf_counter() - t0:.1f}s)")
        for d, r in rep.per_direction.items():
            print(f"{'':16s}   alpha{d} = {r.value}  certificate {r.certificate}")


if __name__ == "__main__":
    main()
