"""Persistence time of the origin for FA-1f and the two-dimensional East model."""

from kcmlab.bootstrap import Region
from kcmlab.family import builtin
from kcmlab.kcm import KcmParams, estimate_tau0, stationarity_check


def main():
    torus = Region.torus(64)
    for q in (0.3, 0.2, 0.15):
        for name in ("fa1f", "east2d"):
            est = estimate_tau0(KcmParams(builtin(name), q, torus, 20000.0, seed=1), 300)
            print(f"q={q:4.2f} {name:7s} E(tau0) = {est.mean:8.2f} +- {est.stderr:.2f} {est.note}")
    st = stationarity_check(KcmParams(builtin("fa1f"), 0.2, torus, 100.0, seed=1), trials=4)
    print("\nstationarity:", st.summary())


if __name__ == "__main__":
    main()
