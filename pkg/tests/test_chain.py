from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fichain.chain import (
    build_chain,
    dirichlet,
    distances,
    entropy,
    observable,
    sparsity,
    total_rate,
    variance,
)
from fichain.errors import (
    DetailedBalanceViolated,
    InvalidObservable,
    NonpositiveRates,
    NotIrreducible,
    SupportNotSymmetric,
)
from fichain.functional import h_constant
from fichain.models import build_lamplighter, build_zrp, random_reversible_chain, ZrpSpec


def test_build_two_point_symmetric(two_point):
    assert np.allclose(two_point.pi, [0.5, 0.5])


def test_build_two_point_asymmetric():
    c = build_chain([[0, 1], [2, 0]])
    assert np.allclose(c.pi, [2 / 3, 1 / 3], rtol=1e-14)


def test_build_rejects_one_way_edge():
    with pytest.raises(SupportNotSymmetric):
        build_chain([[0, 1], [0, 0]])


def test_build_other_errors():
    with pytest.raises(NotIrreducible):
        build_chain([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    with pytest.raises(NonpositiveRates):
        build_chain([[0, -1], [1, 0]])
    with pytest.raises(NonpositiveRates):
        build_chain([[0, np.nan], [1, 0]])
    # 3-cycle with a nonzero circulation is not reversible
    with pytest.raises(DetailedBalanceViolated):
        build_chain([[0, 2, 1], [1, 0, 2], [2, 1, 0]])
    with pytest.raises(DetailedBalanceViolated):
        build_chain([[0, 1], [1, 0]], pi=[0.3, 0.7])


def test_diagonal_ignored():
    c = build_chain([[5, 1], [2, -3]])
    assert np.allclose(c.pi, [2 / 3, 1 / 3])
    assert c.rates[0, 0] == 0


def test_chain_is_immutable(two_point):
    with pytest.raises(ValueError):
        two_point.rates[0, 1] = 3.0


def test_total_rate(two_point, lamp3, zrp33):
    assert total_rate(two_point, 0) == 1
    assert np.allclose(lamp3.total_rates, 1.0)
    for x in zrp33.states:
        # mean field: Q(x) = sum_i r_i(x_i)(1 - G_ii) with r(k) = k
        assert total_rate(zrp33, x) == pytest.approx(sum(x) * (1 - 1 / 3), rel=1e-12)


def test_sparsity_examples(two_point, lamp3):
    assert sparsity(two_point) == 1
    assert sparsity(lamp3) == pytest.approx(0.25, rel=1e-14)
    spec = ZrpSpec.mean_field(3, 3)
    z = build_zrp(spec)
    assert sparsity(z) >= spec.delta / (spec.Delta * 3 * 3)


def test_dirichlet_examples(two_point):
    assert dirichlet(two_point, [0, 1], [0, 1]) == pytest.approx(0.5)
    assert dirichlet(two_point, [2, 2], [0, 1]) == 0


def test_entropy_and_variance_examples(two_point):
    expected = 0.5 * (1.5 * np.log(1.5) + 0.5 * np.log(0.5))
    assert entropy(two_point, [1.5, 0.5]) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.13082, abs=1e-5)
    assert entropy(two_point, [3.0, 3.0]) == 0
    assert variance(two_point, [0, 1]) == pytest.approx(0.25)
    assert variance(two_point, [4, 4]) == 0


def test_observable_validation():
    for bad in ([1.0, 0.0], [1.0, -1.0], [1.0, np.inf], [1.0, 1e-320]):
        with pytest.raises(InvalidObservable):
            observable(bad)


def test_distance_examples(two_point, path3):
    d = distances(two_point)
    assert d.edge_distance(0, 0) == 0
    assert d.edge_distance(0, 1) == 1
    p = distances(path3)
    e12 = path3.edge_index[(0, 1)]
    e23 = path3.edge_index[(1, 2)]
    assert p.edge_distance(e12, e23) == 1


def _line_digraph_bfs(chain):
    """d(e, e') by BFS on the line digraph: e -> e' when head(e) = tail(e')."""
    m = chain.n_edges
    succ = [[j for j in range(m) if chain.src[j] == chain.dst[i]] for i in range(m)]
    out = np.full((m, m), -1)
    for s in range(m):
        out[s, s] = 0
        seen = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in succ[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    q.append(v)
        for v, k in seen.items():
            if v != s:
                out[s, v] = k
    return out


@pytest.mark.parametrize("seed", range(6))
def test_edge_distance_matches_line_digraph_bfs(seed):
    rng = np.random.default_rng(seed)
    c = random_reversible_chain(int(rng.integers(3, 10)), rng)
    assert c.n_edges <= 200
    assert np.array_equal(c.distances.edge_dist, _line_digraph_bfs(c))


def test_edge_distance_lamplighter_bfs(lamp3):
    assert np.array_equal(lamp3.distances.edge_dist, _line_digraph_bfs(lamp3))


def test_edge_distance_metric_properties(lamp3):
    D = lamp3.distances.edge_dist
    assert np.all((D == 0) == np.eye(len(D), dtype=bool))
    # triangle inequality through every middle edge
    for k in range(len(D)):
        assert np.all(D <= D[:, [k]] + D[[k], :])


def test_vertex_distance_is_metric(lamp3):
    V = lamp3.distances.vertex_dist
    assert np.array_equal(V, V.T)
    for k in range(lamp3.n):
        assert np.all(V <= V[:, [k]] + V[[k], :])


chains = st.integers(0, 10_000).map(
    lambda s: random_reversible_chain(int(np.random.default_rng(s).integers(2, 9)), np.random.default_rng(s))
)


@settings(max_examples=60, deadline=None)
@given(chains, st.integers(0, 2**32 - 1))
def test_detailed_balance_and_forms(chain, seed):
    rng = np.random.default_rng(seed)
    flow = chain.pi[:, None] * chain.rates
    assert np.allclose(flow, flow.T, rtol=1e-10, atol=0)
    f = np.exp(rng.uniform(-3, 3, chain.n))
    g = rng.normal(size=chain.n)
    a, b = rng.uniform(0.1, 5), rng.normal()
    assert dirichlet(chain, f, f) >= 0
    assert dirichlet(chain, f, g) == pytest.approx(dirichlet(chain, g, f), rel=1e-12, abs=1e-300)
    assert dirichlet(chain, a * f + b, g) == pytest.approx(a * dirichlet(chain, f, g), rel=1e-9, abs=1e-12)
    assert entropy(chain, a * f) == pytest.approx(a * entropy(chain, f), rel=1e-10, abs=1e-15)
    assert variance(chain, f + b) == pytest.approx(variance(chain, f), rel=1e-9, abs=1e-15)
    s = np.sqrt(f)
    lhs, rhs = 4 * dirichlet(chain, s, s), dirichlet(chain, f, np.log(f))
    assert lhs <= rhs + 1e-12 * max(lhs, rhs)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_pointwise_regularity_identity(u, v):
    if abs(u / v - 1) < 1e-6:
        return
    lhs = (u - v) * np.log(u / v)
    rhs = h_constant(u / v) * (np.sqrt(u) - np.sqrt(v)) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_dirichlet_zero_iff_constant(lamp3):
    rng = np.random.default_rng(0)
    assert dirichlet(lamp3, np.full(lamp3.n, 2.0), np.full(lamp3.n, 2.0)) == 0
    f = np.ones(lamp3.n)
    f[rng.integers(lamp3.n)] = 1.5
    assert dirichlet(lamp3, f, f) > 0


def test_degree_bound(lamp3):
    assert lamp3.degrees.max() <= 1 / sparsity(lamp3) + 1e-12
