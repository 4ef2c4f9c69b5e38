"""Relaxation times of the East and FA-1f chains on eight sites."""

import numpy as np

from kcmlab.chains import east_scaling_table, log_slopes, verify_hitting_bound


def main():
    qs = [0.5, 0.4, 0.3, 0.2, 0.15, 0.1]
    tab = east_scaling_table(qs, n=8)
    print(" q      T_East      T_FA1f")
    for q, e, f in zip(qs, tab["east"], tab["fa1f"]):
        print(f"{q:4.2f} {e:11.3f} {f:11.3f}")
    print("local exponents d log T / d log(1/q):")
    print("  East ", np.round(log_slopes(qs, tab["east"]), 3))
    print("  FA-1f", np.round(log_slopes(qs, tab["fa1f"]), 3))
    r = verify_hitting_bound(8, 0.2)
    print(f"\nE(tau) = {r.mean_hitting:.2f} <= T_rel/q = {r.bound:.2f}")


if __name__ == "__main__":
    main()
