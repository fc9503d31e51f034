"""The r-regular majorant f* and the per-function comparison inequalities.

For a positive observable f and r > 1 the majorant is

    f*(x) = max_z r^{-d(x,z)} f(z),

computed here in log domain by max-plus relaxation along the edges, so that
r^{-d} is never formed.  The ``verify_*`` functions evaluate both sides of
each inequality used to upgrade an MLSI to an LSI and return the margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ReversibleChain, dirichlet, entropy, expectation, observable, sparsity
from .errors import NotRegular, TwoPointRegime, WitnessNotFound
from .functional import h_constant


@dataclass(frozen=True)
class Margin:
    """Both sides of an inequality ``lhs <= rhs``.

    ``scale`` is an optional floor for the normaliser of :attr:`relative`,
    for sides that are computed as a cancelling sum of larger terms.
    """

    lhs: float
    rhs: float
    scale: float = 0.0

    @property
    def absolute(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), self.scale)
        return 0.0 if scale == 0 else (self.rhs - self.lhs) / scale

    def holds(self, rtol: float = 1e-12) -> bool:
        return self.relative >= -rtol


@dataclass(frozen=True, eq=False)
class RegularizationResult:
    f_star: np.ndarray
    log_f_star: np.ndarray
    r: float
    t_map: np.ndarray
    active_set: np.ndarray


def is_regular(chain: ReversibleChain, f, r: float, rtol: float = 1e-12) -> bool:
    """f(x) <= r f(y) on every edge (up to a relative ``rtol``)."""
    f = observable(f, chain)
    return bool(np.all(f[chain.src] <= r * f[chain.dst] * (1 + rtol)))


def default_r(chain: ReversibleChain) -> float:
    """r = 4 / p^2, the regularity scale that makes kappa <= 4/3."""
    p = sparsity(chain)
    if p > 0.5:
        raise TwoPointRegime(f"sparsity {p!r} > 1/2")
    return 4.0 / p**2


def regularize(chain: ReversibleChain, f, r: float) -> RegularizationResult:
    """Smallest-index argmax majorant by Bellman-Ford relaxation in (max, +).

    T(x) = x whenever f(x) already attains f*(x); otherwise the smallest
    state index among the maximisers.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    f = observable(f, chain)
    lf = np.log(f)
    n, logr = chain.n, math.log(r)
    order = np.argsort(chain.dst, kind="stable")
    src, dst = chain.src[order], chain.dst[order]
    heads = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
    targets = dst[heads]
    val = lf.copy()
    origin = np.arange(n)
    for _ in range(n):
        cand = val[src] - logr
        best = np.maximum.reduceat(cand, heads)
        tied = np.where(cand == np.repeat(best, np.diff(np.r_[heads, len(cand)])), origin[src], n)
        best_origin = np.minimum.reduceat(tied, heads)
        cur, cur_origin = val[targets], origin[targets]
        upd = (best > cur) | (
            (best == cur) & (cur_origin != targets) & (best_origin < cur_origin)
        )
        if not upd.any():
            break
        val[targets[upd]] = best[upd]
        origin[targets[upd]] = best_origin[upd]
    active = np.flatnonzero(origin != np.arange(n))
    # f* = f exactly off the active set, not exp(log f)
    f_star = f.copy()
    f_star[active] = np.exp(val[active])
    return RegularizationResult(f_star, val, float(r), origin, active)


def t_map_properties(reg: RegularizationResult) -> dict[str, bool]:
    """Structural facts about T: idempotence, fixed points and its image."""
    T = reg.t_map
    n = len(T)
    in_a = np.zeros(n, dtype=bool)
    in_a[reg.active_set] = True
    complement = np.flatnonzero(~in_a)
    return {
        "idempotent": bool(np.array_equal(T[T], T)),
        "fixes_complement": bool(np.array_equal(T[complement], complement)),
        "active_into_complement": bool(not in_a[T[reg.active_set]].any()),
        "image_is_complement": bool(np.array_equal(np.unique(T), complement)),
    }


def kappa(chain: ReversibleChain, r: float) -> float:
    """max over e' of (1/c(e')) sum_e c(e) r^{-d(e,e')}.

    Uses d(e,e') = 1 + d(head e, tail e') for e != e', which reduces the
    |E|^2 sum to an n x n one.
    """
    if r <= 1:
        raise ValueError("r must exceed 1")
    c = chain.conductance
    D = chain.distances.vertex_dist
    inflow = np.bincount(chain.dst, weights=c, minlength=chain.n)
    decay = np.exp(-(1.0 + D) * math.log(r))
    S = inflow @ decay
    tail, head = chain.src, chain.dst
    self_term = c * decay[head, tail]
    k = (S[tail] - self_term + c) / c
    return float(k.max())


def verify_lemma_r(chain: ReversibleChain, f, r: float) -> Margin:
    """E(f, log f) <= H(r) E(sqrt f, sqrt f) for r-regular f."""
    f = observable(f, chain)
    if not is_regular(chain, f, r):
        raise NotRegular(f"observable is not {r}-regular")
    s = np.sqrt(f)
    return Margin(dirichlet(chain, f, np.log(f)), h_constant(r) * dirichlet(chain, s, s))


def _star(chain, f, reg):
    return reg if reg is not None else regularize(chain, f, default_r(chain))


def verify_dirichlet_comparison(
    chain: ReversibleChain, f, reg: RegularizationResult | None = None
) -> tuple[Margin, Margin]:
    """E(sqrt f*, sqrt f*) <= 4/3 E(sqrt f, sqrt f) and the same for E(f, log f).

    ``reg`` may carry a precomputed majorant of f at r = 4/p^2.
    """
    f = observable(f, chain)
    reg = _star(chain, f, reg)
    s, ss = np.sqrt(f), np.sqrt(reg.f_star)
    return (
        Margin(dirichlet(chain, ss, ss), 4 / 3 * dirichlet(chain, s, s)),
        Margin(
            dirichlet(chain, reg.f_star, reg.log_f_star),
            4 / 3 * dirichlet(chain, f, np.log(f)),
        ),
    )


def verify_entropy_comparison(
    chain: ReversibleChain, f, reg: RegularizationResult | None = None
) -> Margin:
    f = observable(f, chain)
    reg = _star(chain, f, reg)
    return Margin(entropy(chain, f), 2 * entropy(chain, reg.f_star))


def verify_entropy_lemmas(
    chain: ReversibleChain, f, reg: RegularizationResult | None = None
) -> tuple[Margin, Margin]:
    """5 Ent f <= 6 Ent f* + 6 log 6 E[f* - f] and 3 log 6 E[f* - f] <= Ent f."""
    f = observable(f, chain)
    reg = _star(chain, f, reg)
    ent, ent_star = entropy(chain, f), entropy(chain, reg.f_star)
    excess = expectation(chain, reg.f_star - f)
    l6 = math.log(6)
    return (
        Margin(5 * ent, 6 * ent_star + 6 * l6 * excess),
        Margin(3 * l6 * excess, ent),
    )


@dataclass(frozen=True)
class LocalWitness:
    edge: int
    witness: int
    distance: int
    low_slack: float
    high_slack: float


def verify_local_lemma(
    chain: ReversibleChain, f, r: float, reg: RegularizationResult | None = None
) -> list[LocalWitness]:
    """Witness edges e' for the local comparison of f and f* on every edge.

    For e = (x, y) with f*(x) <= f*(y), e' = (x', y') must satisfy
    r^{-d(e,e')} f(x') <= f*(x) <= f*(y) <= r^{-d(e,e')} f(y').  Comparisons
    are done on logarithms; slacks are log-ratios.
    """
    f = observable(f, chain)
    if reg is None:
        reg = regularize(chain, f, r)
    lf, ls, T = np.log(f), reg.log_f_star, reg.t_map
    logr = math.log(r)
    dist = chain.distances
    D = dist.vertex_dist
    table = []
    for k, (x, y) in enumerate(chain.edges):
        if ls[x] > ls[y]:
            continue
        if T[y] == y:
            kk = k
        else:
            yy = T[y]
            preds = chain.src[chain.dst == yy]
            xx = int(preds[D[y, preds] == D[y, yy] - 1].min())
            kk = chain.edge_index[(xx, int(yy))]
        x2, y2 = chain.src[kk], chain.dst[kk]
        d = dist.edge_distance(k, kk)
        low = ls[x] - (lf[x2] - d * logr)
        high = (lf[y2] - d * logr) - ls[y]
        tol = 1e-12 * (1.0 + abs(ls[y]) + d * logr)
        if low < -tol or high < -tol:
            raise WitnessNotFound(f"edge {(x, y)}: candidate {(int(x2), int(y2))} fails")
        table.append(LocalWitness(k, kk, d, float(low), float(high)))
    return table


def dual_function(chain: ReversibleChain, reg: RegularizationResult) -> np.ndarray:
    """h(y) = sum over x in A with T(x) = y of (pi(x)/pi(y)) r^{-d(x,y)}; h = -1 on A.

    With this h, E[f* - f] = E[f h].
    """
    T, A = reg.t_map, reg.active_set
    pi = chain.pi
    h = np.zeros(chain.n)
    D = chain.distances.vertex_dist
    w = pi[A] / pi[T[A]] * np.exp(-D[A, T[A]] * math.log(reg.r))
    np.add.at(h, T[A], w)
    h[A] = -1.0
    return h
