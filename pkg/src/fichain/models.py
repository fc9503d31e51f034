"""Builders for the example chains: graph walks, Lamplighter, Zero-Range, trivial.

Every builder returns a :class:`~fichain.chain.ReversibleChain` whose stationary
measure was computed (not assumed) by :func:`~fichain.chain.build_chain`.
Model specs in JSON form are turned into chains by :func:`chain_from_spec`.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import networkx as nx
import numpy as np

from .chain import ReversibleChain, build_chain
from .errors import (
    Disconnected,
    GNotStochastic,
    ModelError,
    NotSymmetric,
    RatesViolateIncrements,
    Reducible,
    SpecError,
    StateSpaceTooLarge,
)

DEFAULT_STATE_CAP = 20_000


def state_cap() -> int:
    return int(os.environ.get("FICHAIN_STATE_CAP", DEFAULT_STATE_CAP))


def _check_cap(size: int, cap: int | None) -> None:
    cap = state_cap() if cap is None else cap
    if size > cap:
        raise StateSpaceTooLarge(f"{size} states exceeds the cap of {cap}")


@dataclass(frozen=True)
class GraphSpec:
    """Simple connected graph on vertices 0..vertices-1."""

    vertices: int
    edges: tuple[tuple[int, int], ...]
    name: str | None = None

    @classmethod
    def named(cls, name: str) -> "GraphSpec":
        """Parse ``cycle:n``, ``path:n``, ``complete:n`` or ``torus:n:d``."""
        kind, *args = name.split(":")
        try:
            nums = [int(a) for a in args]
        except ValueError:
            raise SpecError(f"bad graph name {name!r}") from None
        if kind == "cycle" and len(nums) == 1 and nums[0] >= 3:
            g = nx.cycle_graph(nums[0])
        elif kind == "path" and len(nums) == 1 and nums[0] >= 2:
            g = nx.path_graph(nums[0])
        elif kind == "complete" and len(nums) == 1 and nums[0] >= 2:
            g = nx.complete_graph(nums[0])
        elif kind == "torus" and len(nums) == 2 and nums[0] >= 2 and nums[1] >= 1:
            g = nx.grid_graph(dim=[nums[0]] * nums[1], periodic=True)
            g = nx.convert_node_labels_to_integers(g, ordering="sorted")
        else:
            raise SpecError(f"bad graph name {name!r}")
        return cls.from_networkx(g, name=name)

    @classmethod
    def from_networkx(cls, g: nx.Graph, name: str | None = None) -> "GraphSpec":
        g = nx.Graph(g)
        g.remove_edges_from(nx.selfloop_edges(g))
        nodes = sorted(g.nodes)
        relabel = {v: i for i, v in enumerate(nodes)}
        edges = sorted(tuple(sorted((relabel[a], relabel[b]))) for a, b in g.edges)
        return cls(len(nodes), tuple(edges), name)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.vertices))
        g.add_edges_from(self.edges)
        return g

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.vertices, self.vertices))
        for i, j in self.edges:
            if i == j:
                raise ModelError("graphs must not have self-loops")
            a[i, j] = a[j, i] = 1.0
        return a


def _graph(g: GraphSpec | str) -> GraphSpec:
    g = GraphSpec.named(g) if isinstance(g, str) else g
    if g.vertices < 2 or not nx.is_connected(g.to_networkx()):
        raise Disconnected(f"graph {g.name or g.edges} is not connected")
    return g


def build_graph_walk(g: GraphSpec | str) -> ReversibleChain:
    """Simple random walk: jump to a uniform neighbour at total rate 1."""
    g = _graph(g)
    a = g.adjacency()
    deg = a.sum(axis=1)
    source = {"type": "graph_walk", "graph": g.name} if g.name else None
    return build_chain(a / deg[:, None], states=range(g.vertices), source=source)


def build_lamplighter(g: GraphSpec | str, cap: int | None = None) -> ReversibleChain:
    """Lamplighter chain on V x {0,1}^V.

    States are (vertex, lamps) with lamps a tuple of bits, ordered vertex-major
    and then by the lamp configuration read as a binary integer (bit j is the
    lamp at vertex j).  The current lamp flips at rate 1/2; the walker moves to
    each neighbour at rate 1/(2 deg).
    """
    g = _graph(g)
    nv = g.vertices
    _check_cap(nv * 2**nv, cap)
    a = g.adjacency()
    deg = a.sum(axis=1)
    nconf = 2**nv
    size = nv * nconf
    q = np.zeros((size, size))
    conf = np.arange(nconf)
    for i in range(nv):
        base = i * nconf
        q[base + conf, base + (conf ^ (1 << i))] = 0.5
        for j in np.flatnonzero(a[i]):
            q[base + conf, j * nconf + conf] = 0.5 / deg[i]
    states = [(i, tuple((s >> j) & 1 for j in range(nv))) for i in range(nv) for s in range(nconf)]
    source = {"type": "lamplighter", "graph": g.name} if g.name else None
    return build_chain(q, states=states, source=source)


def build_trivial(pi) -> ReversibleChain:
    """The one-jump chain Q(x, y) = pi(y)."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or len(pi) < 2 or np.any(pi <= 0):
        raise ModelError("pi must be a strictly positive vector with at least two entries")
    pi = pi / pi.sum()
    return build_chain(
        np.tile(pi, (len(pi), 1)), pi, source={"type": "trivial", "pi": pi.tolist()}
    )


def spectral_gap_of_G(G) -> float:
    """1 - (second largest eigenvalue) of a symmetric stochastic kernel."""
    G = _stochastic(G)
    if not np.allclose(G, G.T, rtol=0, atol=1e-12):
        raise NotSymmetric("G must be symmetric")
    if not nx.is_connected(nx.from_numpy_array((G > 0).astype(int))):
        raise Reducible("G is reducible")
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    return float(1.0 - ev[-2])


def graph_spectral_gap(g: GraphSpec | str) -> float:
    """Spectral gap of the simple-random-walk kernel of a graph.

    For irregular graphs the kernel is not symmetric; it is diagonalised in
    L^2(deg) instead.
    """
    g = _graph(g)
    a = g.adjacency()
    s = 1.0 / np.sqrt(a.sum(axis=1))
    ev = np.linalg.eigvalsh(s[:, None] * a * s[None, :])
    return float(1.0 - ev[-2])


def _stochastic(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise GNotStochastic("G must be square")
    if np.any(G < 0) or not np.allclose(G.sum(axis=1), 1.0, rtol=0, atol=1e-12):
        raise GNotStochastic("G must be nonnegative with unit row sums")
    return G


@dataclass
class ZrpSpec:
    """Zero-Range Process: m particles on n sites, destinations drawn from G.

    ``rate_functions[i][k - 1]`` is r_i(k) for k = 1..m; r_i(0) = 0.  When
    ``delta`` / ``Delta`` are given they are checked against the increments
    r_i(k+1) - r_i(k) for k = 0..m-1, otherwise they are filled in.
    """

    n: int
    m: int
    G: np.ndarray
    rate_functions: list[list[float]]
    delta: float | None = None
    Delta: float | None = None
    source: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ModelError("need n >= 1 sites and m >= 1 particles")
        self.G = _stochastic(self.G)
        if self.G.shape != (self.n, self.n):
            raise GNotStochastic(f"G must be {self.n} x {self.n}")
        tables = [list(map(float, t)) for t in self.rate_functions]
        if len(tables) != self.n or any(len(t) < self.m for t in tables):
            raise ModelError("need one rate table of length >= m per site")
        self.rate_functions = [t[: self.m] for t in tables]
        incs = np.diff(np.column_stack([np.zeros(self.n), np.array(self.rate_functions)]), axis=1)
        lo, hi = float(incs.min()), float(incs.max())
        if self.delta is None:
            self.delta = lo
        if self.Delta is None:
            self.Delta = hi
        if lo < self.delta - 1e-12 or hi > self.Delta + 1e-12 or self.delta <= 0:
            raise RatesViolateIncrements(
                f"increments lie in [{lo}, {hi}], declared [{self.delta}, {self.Delta}]"
            )

    @classmethod
    def mean_field(cls, n: int, m: int, rates: Sequence[float] | None = None, **kw) -> "ZrpSpec":
        """G_ij = 1/n; ``rates`` is one table shared by all sites (default r(k)=k)."""
        table = list(rates) if rates is not None else [float(k) for k in range(1, m + 1)]
        return cls(n, m, np.full((n, n), 1.0 / n), [table] * n, **kw)


def zrp_ls_upper_bound(spec: ZrpSpec, gamma: float = 1.0) -> float:
    """40 Delta / (gamma delta^2) log(Delta m n / delta).

    With gamma = 1 this is the mean-field log-Sobolev bound; for another
    symmetric G pass its spectral gap.
    """
    d, D = spec.delta, spec.Delta
    return 40.0 * D / (gamma * d**2) * math.log(D * spec.m * spec.n / d)


def zrp_states(n: int, m: int) -> list[tuple[int, ...]]:
    """Occupation vectors summing to m, in colex order."""
    states = [
        tuple(b - a - 1 for a, b in zip((-1,) + c, c + (n + m - 1,)))
        for c in itertools.combinations(range(n + m - 1), n - 1)
    ]
    return sorted(states, key=lambda x: x[::-1])


def zrp_product_measure(spec: ZrpSpec, states) -> np.ndarray:
    """pi(x) proportional to prod_i prod_{k<=x_i} 1/r_i(k), normalised by brute force."""
    logr = [np.concatenate([[0.0], np.cumsum(np.log(t))]) for t in spec.rate_functions]
    logw = np.array([-sum(logr[i][xi] for i, xi in enumerate(x)) for x in states])
    w = np.exp(logw - logw.max())
    return w / w.sum()


def build_zrp(spec: ZrpSpec, cap: int | None = None) -> ReversibleChain:
    n, m, G = spec.n, spec.m, spec.G
    if n < 2:
        raise ModelError("a ZRP needs at least two sites")
    _check_cap(math.comb(m + n - 1, n - 1), cap)
    if not np.allclose(G, G.T, rtol=0, atol=1e-12):
        raise NotSymmetric("the reversible ZRP needs a symmetric G")
    states = zrp_states(n, m)
    index = {x: k for k, x in enumerate(states)}
    q = np.zeros((len(states), len(states)))
    for k, x in enumerate(states):
        for i in range(n):
            if x[i] == 0:
                continue
            rate = spec.rate_functions[i][x[i] - 1]
            for j in range(n):
                if j == i or G[i, j] == 0:
                    continue
                y = list(x)
                y[i] -= 1
                y[j] += 1
                assert sum(y) == m
                q[k, index[tuple(y)]] += rate * G[i, j]
    chain = build_chain(q, states=states, source=spec.source)
    oracle = zrp_product_measure(spec, states)
    if not np.allclose(chain.pi, oracle, rtol=1e-10, atol=0):
        raise AssertionError("ZRP stationary measure disagrees with the product form")
    return chain


def random_reversible_chain(
    n: int, rng: np.random.Generator, edge_prob: float = 0.4
) -> ReversibleChain:
    """Random irreducible reversible chain on n states.

    The support is a random spanning tree plus independent extra edges;
    conductances and pi are log-uniform over two decades.
    """
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        edges.add((min(a, b), max(a, b)))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < edge_prob:
                edges.add((a, b))
    pi = np.exp(rng.uniform(-np.log(10), np.log(10), n))
    pi /= pi.sum()
    q = np.zeros((n, n))
    for a, b in sorted(edges):
        c = np.exp(rng.uniform(-np.log(10), np.log(10)))
        q[a, b] = c / pi[a]
        q[b, a] = c / pi[b]
    return build_chain(q, source={"type": "random", "n": n})


def _rate_table(spec: dict[str, Any], m: int) -> list[float]:
    kind = spec.get("kind", "linear")
    if kind == "linear":
        slope = float(spec.get("slope", 1.0))
        return [slope * k for k in range(1, m + 1)]
    if kind == "affine":
        a, b = float(spec["intercept"]), float(spec["slope"])
        return [a + b * k for k in range(1, m + 1)]
    if kind == "table":
        return [float(v) for v in spec["values"]]
    raise SpecError(f"unknown rate kind {kind!r}")


def chain_from_spec(spec: dict[str, Any], cap: int | None = None) -> ReversibleChain:
    """Build a chain from an explicit or model-family spec document."""
    try:
        kind = spec["type"]
        if kind == "explicit":
            return build_chain(
                spec["rates"], spec.get("pi"), spec.get("states"), source=spec.get("source")
            )
        if kind == "graph_walk":
            return build_graph_walk(spec["graph"])
        if kind == "lamplighter":
            return build_lamplighter(spec["graph"], cap)
        if kind == "trivial":
            return build_trivial(spec["pi"])
        if kind == "zrp":
            n, m = int(spec["n"]), int(spec["m"])
            G = spec.get("G", "mean_field")
            if G == "mean_field":
                G = np.full((n, n), 1.0 / n)
            elif isinstance(G, str):
                G = _graph_kernel(G, n)
            rates = spec.get("rates", {"kind": "linear", "slope": 1.0})
            if isinstance(rates, list):
                tables = [_rate_table(r, m) for r in rates]
            else:
                tables = [_rate_table(rates, m)] * n
            zspec = ZrpSpec(
                n, m, np.asarray(G, dtype=float), tables,
                spec.get("delta"), spec.get("Delta"), source=dict(spec),
            )
            return build_zrp(zspec, cap)
    except KeyError as exc:
        raise SpecError(f"spec is missing field {exc.args[0]!r}") from None
    raise SpecError(f"unknown chain type {spec.get('type')!r}")


def _graph_kernel(name: str, n: int) -> np.ndarray:
    g = _graph(name)
    if g.vertices != n:
        raise SpecError(f"graph {name} has {g.vertices} vertices, ZRP has n={n}")
    a = g.adjacency()
    deg = a.sum(axis=1)
    if np.any(deg != deg[0]):
        raise NotSymmetric("SRW kernel of an irregular graph is not symmetric")
    return a / deg[:, None]


def _jsonable_label(s):
    if isinstance(s, tuple):
        return [_jsonable_label(t) for t in s]
    if isinstance(s, np.integer):
        return int(s)
    return s


def explicit_spec(chain: ReversibleChain) -> dict[str, Any]:
    """Serialise a chain to the explicit chain-spec document."""
    doc: dict[str, Any] = {
        "type": "explicit",
        "states": [_jsonable_label(s) for s in chain.states],
        "rates": chain.rates.tolist(),
        "pi": chain.pi.tolist(),
    }
    if chain.source is not None:
        doc["source"] = chain.source
    return doc


def describe(chain: ReversibleChain) -> dict[str, Any]:
    return {"source": chain.source, "n_states": chain.n, "n_edges": chain.n_edges}
