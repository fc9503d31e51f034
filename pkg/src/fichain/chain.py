"""Finite reversible Markov generators and the forms built on them.

A chain is stored as a dense off-diagonal rate matrix together with its
reversing measure and the list of allowed (directed) transitions.  All the
quadratic quantities (Dirichlet form, variance, entropy) are evaluated as
sums over that edge list, so the cost is O(|E|) per call.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Hashable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DetailedBalanceViolated,
    InvalidObservable,
    NonpositiveRates,
    NotIrreducible,
    SupportNotSymmetric,
)

TOL_REV = 1e-10
_PI_SUM_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DistanceTables:
    """Graph distances on the support of a chain.

    ``vertex_dist[x, y]`` is the BFS distance on (X, E).  ``edge_dist[i, j]``
    is the length-minus-one of the shortest walk whose first step is edge
    ``i`` and whose last step is edge ``j``; it is not symmetric.
    """

    vertex_dist: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    def edge_distance(self, i: int, j: int) -> int:
        if i == j:
            return 0
        return 1 + int(self.vertex_dist[self.dst[i], self.src[j]])

    @cached_property
    def edge_dist(self) -> np.ndarray:
        # a walk of length l >= 2 starting with e and ending with e' is the
        # edge e, a walk head(e) -> tail(e') and the edge e'
        d = 1 + self.vertex_dist[np.ix_(self.dst, self.src)]
        np.fill_diagonal(d, 0)
        return _readonly(d)


@dataclass(frozen=True, eq=False)
class ReversibleChain:
    """Irreducible generator ``rates`` reversible with respect to ``pi``.

    Build instances with :func:`build_chain`; the constructor does no
    validation.  Edges are listed in row-major order of the rate matrix.
    """

    states: tuple
    rates: np.ndarray
    pi: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    source: dict | None = field(default=None)

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @cached_property
    def conductance(self) -> np.ndarray:
        """c(x, y) = pi(x) Q(x, y) for every edge, in edge order."""
        return _readonly(self.pi[self.src] * self.rates[self.src, self.dst])

    @cached_property
    def total_rates(self) -> np.ndarray:
        return _readonly(self.rates.sum(axis=1))

    @cached_property
    def degrees(self) -> np.ndarray:
        return _readonly(np.bincount(self.src, minlength=self.n))

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """n x |E| matrix with +1 at (tail, e) and -1 at (head, e)."""
        m = self.n_edges
        cols = np.concatenate([np.arange(m), np.arange(m)])
        rows = np.concatenate([self.src, self.dst])
        vals = np.concatenate([np.ones(m), -np.ones(m)])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, m))

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def _state_index(self) -> dict[Hashable, int]:
        return {s: i for i, s in enumerate(self.states)}

    def index(self, state: Hashable) -> int:
        return self._state_index[state]

    @cached_property
    def distances(self) -> DistanceTables:
        adj = sparse.csr_matrix(
            (np.ones(self.n_edges), (self.src, self.dst)), shape=(self.n, self.n)
        )
        d = csgraph.shortest_path(adj, method="D", unweighted=True)
        return DistanceTables(_readonly(d.astype(np.int64)), self.src, self.dst)


def _as_label(s: Any) -> Hashable:
    if isinstance(s, list):
        return tuple(_as_label(t) for t in s)
    return s


def _propagate_pi(rates: np.ndarray) -> np.ndarray:
    # detailed balance along a BFS tree, in log domain
    n = len(rates)
    logpi = np.full(n, np.nan)
    logpi[0] = 0.0
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in np.flatnonzero(rates[x] > 0):
            if np.isnan(logpi[y]):
                logpi[y] = logpi[x] + np.log(rates[x, y]) - np.log(rates[y, x])
                queue.append(y)
    logpi -= logpi.max()
    pi = np.exp(logpi)
    return pi / pi.sum()


def build_chain(
    rates,
    pi=None,
    states: Sequence | None = None,
    tol_rev: float = TOL_REV,
    source: dict | None = None,
) -> ReversibleChain:
    """Validate ``rates`` and return the reversible chain it generates.

    Diagonal entries of ``rates`` are ignored.  When ``pi`` is omitted it is
    obtained by propagating detailed balance along a spanning tree and then
    checked on every remaining edge.
    """
    q = np.array(rates, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
        raise NonpositiveRates(f"rates must be an n x n matrix with n >= 2, got {q.shape}")
    n = q.shape[0]
    np.fill_diagonal(q, 0.0)
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise NonpositiveRates("off-diagonal rates must be finite and nonnegative")
    support = q > 0
    if np.any(support != support.T):
        x, y = np.argwhere(support != support.T)[0]
        raise SupportNotSymmetric(f"Q({x},{y}) > 0 but Q({y},{x}) == 0 or vice versa")
    n_comp, _ = csgraph.connected_components(
        sparse.csr_matrix(support), directed=True, connection="strong"
    )
    if n_comp != 1:
        raise NotIrreducible(f"support graph has {n_comp} strongly connected components")

    if pi is None:
        p = _propagate_pi(q)
    else:
        p = np.array(pi, dtype=float)
        if p.shape != (n,) or not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise DetailedBalanceViolated("pi must be a strictly positive vector of length n")
        if abs(p.sum() - 1.0) > _PI_SUM_TOL:
            raise DetailedBalanceViolated(f"pi sums to {p.sum()!r}, not 1")
        p = p / p.sum()

    flow = p[:, None] * q
    gap = np.abs(flow - flow.T)
    scale = np.maximum(flow, flow.T)
    bad = gap > tol_rev * scale
    if np.any(bad):
        x, y = np.argwhere(bad)[0]
        raise DetailedBalanceViolated(
            f"pi(x)Q(x,y) = {flow[x, y]!r} but pi(y)Q(y,x) = {flow[y, x]!r} at ({x},{y})"
        )

    src, dst = np.nonzero(support)
    if states is None:
        labels = tuple(range(n))
    else:
        labels = tuple(_as_label(s) for s in states)
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("states must be n distinct labels")
    chain = ReversibleChain(
        states=labels,
        rates=_readonly(q),
        pi=_readonly(p),
        src=_readonly(src.astype(np.int64)),
        dst=_readonly(dst.astype(np.int64)),
        source=source,
    )
    # out-probabilities are >= p and sum to 1, so no vertex has more than 1/p neighbours
    assert chain.degrees.max() * sparsity(chain) <= 1 + 1e-9
    return chain


def observable(f, chain: ReversibleChain | None = None) -> np.ndarray:
    """Return ``f`` as a float array after checking it is strictly positive."""
    v = np.asarray(f, dtype=float)
    if v.ndim != 1 or (chain is not None and len(v) != chain.n):
        raise InvalidObservable(f"observable has shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v < np.finfo(float).tiny):
        raise InvalidObservable("observable entries must be finite, normal and > 0")
    return v


def total_rate(chain: ReversibleChain, x: Hashable) -> float:
    return float(chain.total_rates[chain.index(x)])


def sparsity(chain: ReversibleChain) -> float:
    """min over edges of Q(x,y) / max(Q(x), Q(y,x))."""
    q = chain.rates
    fwd = q[chain.src, chain.dst]
    denom = np.maximum(chain.total_rates[chain.src], q[chain.dst, chain.src])
    return float(np.min(fwd / denom))


def expectation(chain: ReversibleChain, f) -> float:
    return float((chain.pi * np.asarray(f, dtype=float)).sum())


# Row-wise kernels.  The public single-observable functions call these with a
# one-row batch so that batched and single evaluations agree bit for bit.


def entropy_rows(pi: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Ent of every row of ``F`` as m * E[phi(f/m)], phi(t) = t log t - t + 1.

    The phi form is a sum of nonnegative terms and stays accurate for
    nearly constant rows, where E[f log f] - m log m cancels.
    """
    m = (pi * F).sum(axis=1)
    d = F / m[:, None] - 1.0
    ent = m * (pi * ((1.0 + d) * np.log1p(d) - d)).sum(axis=1)
    return np.maximum(ent, 0.0)


def dirichlet_rows(chain: ReversibleChain, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    da = A[:, chain.src] - A[:, chain.dst]
    db = B[:, chain.src] - B[:, chain.dst]
    return 0.5 * (chain.conductance * (da * db)).sum(axis=1)


def dirichlet(chain: ReversibleChain, f, g) -> float:
    f = np.asarray(f, dtype=float)[None, :]
    g = np.asarray(g, dtype=float)[None, :]
    return float(dirichlet_rows(chain, f, g)[0])


def variance(chain: ReversibleChain, f) -> float:
    f = np.asarray(f, dtype=float)
    m = expectation(chain, f)
    # centred form avoids E[f^2] - E[f]^2 cancellation
    return float((chain.pi * (f - m) ** 2).sum())


def entropy(chain: ReversibleChain, f) -> float:
    f = observable(f, chain)
    return float(entropy_rows(chain.pi, f[None, :])[0])


def distances(chain: ReversibleChain) -> DistanceTables:
    return chain.distances
