"""Exact spectral analysis of East and FA-1f chains on [n].

Standard chains are binary: site x is empty (state 0) with probability
``q_x`` and occupied otherwise.  Generalised chains carry an arbitrary
finite state space per site with law ``nu_x`` and a good event ``S^g_x``;
the constraint tests whether neighbours are in their good events.

East: c_x = 1{w_{x+1} good} for x < n, c_n = 1.
FA-1f: c_1 = 1{w_2 good}, c_x = max of both neighbours, c_n = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

STATE_CAP = 2 ** 16
DENSE_LIMIT = 4096
EIG_TOL = 1e-10


class ChainSizeError(ValueError):
    pass


@dataclass
class ChainSpec:
    kind: str
    nus: list  # per-site probability vectors
    good: list  # per-site boolean masks

    def __post_init__(self):
        if self.kind not in ("east", "fa1f"):
            raise ValueError(f"unknown chain kind {self.kind!r}")
        if len(self.nus) != len(self.good) or not self.nus:
            raise ValueError("need one law and one good event per site")
        self.nus = [np.asarray(v, dtype=float) for v in self.nus]
        self.good = [np.asarray(g, dtype=bool) for g in self.good]
        for v, g in zip(self.nus, self.good):
            if v.shape != g.shape or v.ndim != 1:
                raise ValueError("law and good event shapes differ")
            if (v <= 0).any():
                raise ValueError("site laws must be strictly positive")
            if abs(v.sum() - 1) > 1e-12:
                raise ValueError("site laws must sum to one")
            if not g.any():
                raise ValueError("good events must have positive probability")

    @classmethod
    def standard(cls, kind: str, n: int, q) -> "ChainSpec":
        qs = np.broadcast_to(np.asarray(q, dtype=float), (n,))
        return cls(kind, [np.array([x, 1 - x]) for x in qs], [np.array([True, False])] * n)

    @property
    def n(self) -> int:
        return len(self.nus)

    @property
    def sizes(self) -> tuple:
        return tuple(len(v) for v in self.nus)

    @property
    def q_sites(self) -> np.ndarray:
        return np.array([v[g].sum() for v, g in zip(self.nus, self.good)])

    @property
    def q(self) -> float:
        return float(self.q_sites.min())

    @property
    def alpha(self) -> np.ndarray:
        return 1 - self.q_sites

    @property
    def state_count(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def is_binary_standard(self) -> bool:
        return all(len(v) == 2 and g[0] and not g[1] for v, g in zip(self.nus, self.good))

    def projected(self) -> "ChainSpec":
        """The standard chain followed by the indicators of the good events."""
        return ChainSpec.standard(self.kind, self.n, self.q_sites)

    def digest(self) -> str:
        return " ".join(f"{x:.6g}" for x in self.q_sites)


def random_spec(kind: str, rng: np.random.Generator, n_max: int = 6, s_max: int = 3,
                n_min: int = 1) -> ChainSpec:
    n = int(rng.integers(n_min, n_max + 1))
    nus, good = [], []
    for _ in range(n):
        k = int(rng.integers(2, s_max + 1))
        w = rng.uniform(0.05, 1.0, size=k)
        nus.append(w / w.sum())
        g = rng.random(k) < 0.5
        if g.all():
            g[int(rng.integers(k))] = False
        if not g.any():
            g[int(rng.integers(k))] = True
        good.append(g)
    return ChainSpec(kind, nus, good)


# ----------------------------------------------------------------------------
# generator


def _digits(spec: ChainSpec) -> np.ndarray:
    """All states as rows of digits; site 0 is the most significant."""
    grids = np.meshgrid(*[np.arange(s) for s in spec.sizes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _strides(sizes) -> np.ndarray:
    out = np.ones(len(sizes), dtype=np.int64)
    for i in range(len(sizes) - 2, -1, -1):
        out[i] = out[i + 1] * sizes[i + 1]
    return out


def constraints(spec: ChainSpec, digits: Optional[np.ndarray] = None) -> np.ndarray:
    """Boolean array (states, n) of c_x."""
    D = _digits(spec) if digits is None else digits
    G = np.stack([spec.good[x][D[:, x]] for x in range(spec.n)], axis=1)
    n = spec.n
    C = np.ones_like(G)
    for x in range(n - 1):
        if spec.kind == "east" or x == 0:
            C[:, x] = G[:, x + 1]
        else:
            C[:, x] = G[:, x - 1] | G[:, x + 1]
    return C


def stationary(spec: ChainSpec, digits: Optional[np.ndarray] = None) -> np.ndarray:
    D = _digits(spec) if digits is None else digits
    pi = np.ones(len(D))
    for x in range(spec.n):
        pi *= spec.nus[x][D[:, x]]
    return pi


def build_generator(spec: ChainSpec, cap: int = STATE_CAP, check: bool = True) -> sp.csr_matrix:
    """Sparse rate matrix: resample site x from nu_x at rate one when c_x = 1."""
    M = spec.state_count
    if M > cap:
        raise ChainSizeError(f"{M} states exceed the cap of {cap}")
    D = _digits(spec)
    C = constraints(spec, D)
    strides = _strides(spec.sizes)
    idx = np.arange(M)
    rows, cols, vals = [], [], []
    for x in range(spec.n):
        on = C[:, x]
        for s, w in enumerate(spec.nus[x]):
            sel = on & (D[:, x] != s)
            r = idx[sel]
            rows.append(r)
            cols.append(r + (s - D[sel, x]) * strides[x])
            vals.append(np.full(len(r), w))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sp.coo_matrix((vals, (rows, cols)), shape=(M, M)).tocsr()
    L = L - sp.diags(np.asarray(L.sum(axis=1)).ravel())
    L = L.tocsr()
    if check:
        res = detailed_balance_residual(L, stationary(spec, D))
        if res > 1e-12:
            raise AssertionError(f"detailed balance residual {res:.3e}")
    return L


def detailed_balance_residual(L, pi) -> float:
    F = sp.diags(pi) @ L
    diff = (F - F.T).tocoo()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


# ----------------------------------------------------------------------------
# spectra


@dataclass
class SpectralReport:
    gap: float
    relaxation_time: float
    state_count: int
    method: str
    tolerance: float = EIG_TOL
    vector: Optional[np.ndarray] = field(default=None, repr=False)


def _symmetrized(L, pi):
    s = np.sqrt(pi)
    return sp.diags(s) @ L @ sp.diags(1 / s)


def relaxation_time(spec: ChainSpec, dense_limit: int = DENSE_LIMIT, tol: float = EIG_TOL,
                    L=None) -> SpectralReport:
    """Inverse spectral gap of -L via its nu-symmetrised form."""
    L = build_generator(spec) if L is None else L
    pi = stationary(spec)
    M = L.shape[0]
    if M == 1:
        raise ValueError("a single state has no gap")
    A = -_symmetrized(L, pi)
    A = (A + A.T) / 2
    if M <= dense_limit:
        w, V = sla.eigh(A.toarray(), subset_by_index=[0, 1], driver="evr")
        gap, vec, method = float(w[1]), V[:, 1], "dense"
    else:
        # Lanczos on rho - A with the stationary vector deflated: the top
        # eigenvalue is rho - gap, and rho bounds the spectrum by Gershgorin.
        phi = np.sqrt(pi)
        rho = float(2 * np.abs(A.diagonal()).max()) + 1.0
        A = A.tocsr()

        def mv(x):
            x = np.ravel(x)
            return rho * x - A @ x - rho * phi * (phi @ x)

        op = spla.LinearOperator((M, M), matvec=mv, dtype=float)
        w, V = spla.eigsh(op, k=1, which="LA", tol=tol, maxiter=50 * M)
        gap, vec, method = float(rho - w[0]), V[:, 0], "shifted-lanczos"
        res = np.linalg.norm(A @ vec - gap * vec)
        if res > 1e-6 * max(1.0, gap):
            raise RuntimeError(f"iterative eigensolve did not converge (residual {res:.2e})")
    f = vec / np.sqrt(pi)
    return SpectralReport(gap, 1.0 / gap, M, method, tol, f)


# ----------------------------------------------------------------------------
# variance and Dirichlet form


def variance(spec: ChainSpec, f: np.ndarray) -> float:
    pi = stationary(spec)
    m = pi @ f
    return float(pi @ (f - m) ** 2)


def dirichlet(spec: ChainSpec, f: np.ndarray) -> float:
    """sum_x nu(c_x Var_x f), computed site by site on the product tensor."""
    sizes = spec.sizes
    T = np.asarray(f, dtype=float).reshape(sizes)
    D = _digits(spec)
    C = constraints(spec, D)
    pi = stationary(spec, D).reshape(sizes)
    total = 0.0
    for x in range(spec.n):
        shape = [1] * spec.n
        shape[x] = sizes[x]
        w = spec.nus[x].reshape(shape)
        mean = (T * w).sum(axis=x, keepdims=True)
        var_x = ((T - mean) ** 2 * w).sum(axis=x, keepdims=True)
        # c_x does not depend on site x, and pi / nu_x is the law of the rest
        c = C[:, x].reshape(sizes)
        rest = pi / w
        total += float((np.take(c, [0], axis=x) * np.take(rest, [0], axis=x) * var_x).sum())
    return total


# ----------------------------------------------------------------------------
# verification reports


@dataclass
class PoincareReport:
    kind: str
    n: int
    q: float
    T_std: float
    T_gen: float
    trials: int
    violations: int
    witness: Optional[np.ndarray] = field(default=None, repr=False)
    worst_ratio: float = 0.0  # max Var / (T_std D / q)
    gap_bound_ok: bool = True
    unscaled_violations: int = 0  # Var <= T_std * D (not asserted)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.gap_bound_ok


def verify_poincare(spec: ChainSpec, trials: int = 20, seed: int = 0, slack: float = 1e-9) -> PoincareReport:
    """Random-function check of Var f <= (1/q) T_std sum_x nu(c_x Var_x f)."""
    rng = np.random.default_rng(seed)
    std = relaxation_time(spec.projected())
    gen = relaxation_time(spec)
    q = spec.q
    rep = PoincareReport(spec.kind, spec.n, q, std.relaxation_time, gen.relaxation_time, trials, 0)
    funcs = [rng.standard_normal(spec.state_count) for _ in range(trials)]
    funcs.append(gen.vector)
    for f in funcs:
        var = variance(spec, f)
        dir_ = dirichlet(spec, f)
        bound = std.relaxation_time * dir_ / q
        rep.worst_ratio = max(rep.worst_ratio, var / bound if bound > 0 else math.inf)
        if var > bound + slack * max(1.0, bound):
            rep.violations += 1
            if rep.witness is None:
                rep.witness = f
        if var > std.relaxation_time * dir_ + slack * max(1.0, bound):
            rep.unscaled_violations += 1
    rep.gap_bound_ok = gen.relaxation_time <= std.relaxation_time / q * (1 + slack)
    return rep


@dataclass
class ScalingReport:
    kind: str
    n: int
    q: float
    levels: int
    T_std: float
    T_projected: float
    T_gen: float
    homogeneous_equal: bool
    method: str

    @property
    def bound(self) -> float:
        return self.T_std / self.q

    @property
    def margin(self) -> float:
        return self.bound - self.T_gen

    @property
    def inequality_ok(self) -> bool:
        return self.T_gen <= self.bound * (1 + 1e-9)

    @property
    def near_unconstrained(self) -> bool:
        """T_gen within a factor 2 of the free-spin value 1."""
        return 0.5 <= self.T_gen <= 2.0


def discretized_uniform(kind: str, n: int, q: float, max_levels: int = 64) -> ChainSpec:
    """Uniform law on L levels of [0,1]; the good event is the lowest q*L levels."""
    fr = Fraction(q).limit_denominator(max_levels)
    if abs(float(fr) - q) > 1e-12:
        raise ValueError(f"q={q} is not a multiple of 1/L for L <= {max_levels}")
    L, k = fr.denominator, fr.numerator
    if L == 1:
        L, k = 2, 2 * k
    nu = np.full(L, 1.0 / L)
    g = np.arange(L) < k
    return ChainSpec(kind, [nu] * n, [g] * n)


def verify_scaling_reduction(n: int, q: float, kind: str = "east") -> ScalingReport:
    """Finite-state consequences of the uniform-variable reduction.

    The projected chain of a homogeneous spec is the standard chain, so the
    two relaxation times coincide; the generalised chain obeys
    T_gen <= T(n, q) / q.
    """
    if n > 10:
        raise ValueError("n must be <= 10")
    gen = discretized_uniform(kind, n, q)
    std_spec = ChainSpec.standard(kind, n, q)
    proj = gen.projected()
    same = (build_generator(proj) != build_generator(std_spec)).nnz == 0
    T_std = relaxation_time(std_spec).relaxation_time
    T_proj = relaxation_time(proj).relaxation_time
    g = relaxation_time(gen)
    equal = same and abs(T_proj - T_std) <= 1e-8 * T_std
    return ScalingReport(kind, n, q, len(gen.nus[0]), T_std, T_proj, g.relaxation_time, equal, g.method)


@dataclass
class HittingReport:
    n: int
    q: float
    mean_hitting: float
    relaxation_time: float

    @property
    def bound(self) -> float:
        return self.relaxation_time / self.q

    @property
    def margin(self) -> float:
        return self.bound - self.mean_hitting

    @property
    def holds(self) -> bool:
        return self.mean_hitting <= self.bound

    @property
    def strict(self) -> bool:
        return self.mean_hitting < self.bound


def mean_hitting_time(spec: ChainSpec, site: int = 0) -> float:
    """E_pi of the hitting time of {site x is in its good event}, by a linear solve."""
    L = build_generator(spec)
    D = _digits(spec)
    pi = stationary(spec, D)
    inA = spec.good[site][D[:, site]]
    B = np.nonzero(~inA)[0]
    if len(B) == 0:
        return 0.0
    LBB = L[B][:, B].tocsc()
    h = spla.spsolve(LBB, -np.ones(len(B)))
    if not np.all(np.isfinite(h)):
        raise np.linalg.LinAlgError("singular hitting-time system")
    return float(pi[B] @ h)


def verify_hitting_bound(n: int, q: float) -> HittingReport:
    """E(tau) <= T_rel / q for the first site of the standard East chain."""
    if n > 8:
        raise ValueError("n must be <= 8")
    spec = ChainSpec.standard("east", n, q)
    return HittingReport(n, q, mean_hitting_time(spec, 0), relaxation_time(spec).relaxation_time)


def east_scaling_table(qs: Sequence[float], n: int = 8, kinds=("east", "fa1f")) -> dict:
    return {k: [relaxation_time(ChainSpec.standard(k, n, q)).relaxation_time for q in qs] for k in kinds}


def log_slopes(qs: Sequence[float], T: Sequence[float]) -> np.ndarray:
    """Slopes of log T against log(1/q), in order of decreasing q."""
    x = np.log(1 / np.asarray(qs, dtype=float))
    y = np.log(np.asarray(T, dtype=float))
    return np.diff(y) / np.diff(x)
