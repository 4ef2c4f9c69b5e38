"""Grow a Duarte droplet by one width and show what happens without help."""

from kcmlab.droplet import droplet_check
from kcmlab.family import builtin


def main():
    fam = builtin("duarte")
    for mode in ("advance-one", "advance-width", "corollary"):
        run = droplet_check(fam, (1, 0), "plain", 6, 40, mode)
        print(f"{mode:14s} {run.status}  lambda={run.report.lam} steps={run.report.steps}")
    gen = droplet_check(fam, (1, 0), "generalized", 6, 40, "generalized")
    print(f"{'generalized':14s} {gen.status}")

    bare = droplet_check(fam, (1, 0), "plain", 6, 40, drop_strip=0)
    print(f"\nwithout helping sets: {bare.status}")
    print(bare.report.serialize(limit=5))


if __name__ == "__main__":
    main()
