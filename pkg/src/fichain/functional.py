"""Poincare, modified log-Sobolev and log-Sobolev constants.

``t_rel`` is exact (symmetrised eigendecomposition).  The two entropy
constants are suprema of non-convex ratios; ``estimate_tls`` and
``estimate_tmls`` return the best ratio found by a multistart gradient
ascent, which is always a valid lower bound.  The module also carries the
closed-form constants used by the upgrade bound and the trivial-chain oracle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .chain import (
    ReversibleChain,
    dirichlet_rows,
    entropy,
    entropy_rows,
    expectation,
    observable,
    sparsity,
)
from .errors import (
    AllStartsDegenerate,
    DegeneratePiStar,
    DegenerateSpectrum,
    DualConstraintViolated,
    TwoPointRegime,
)

EXACT = "exact"
LOWER = "certified_lower_bound"
UPPER = "analytic_upper_bound"

_VAR_FLOOR = 1e-14
_CONVERGED_RTOL = 0.005
_GAP_START_SCALE = 1e-3


@dataclass
class ConstantEstimate:
    value: float
    kind: str
    witness: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.kind == EXACT or bool(self.meta.get("converged", False))

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "kind": self.kind,
            "witness": None if self.witness is None else self.witness.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ConstantEstimate":
        w = d.get("witness")
        return cls(
            value=d["value"],
            kind=d["kind"],
            witness=None if w is None else np.asarray(w, dtype=float),
            meta=dict(d.get("meta", {})),
        )


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 32
    max_iters: int = 10_000
    tol_opt: float = 1e-10
    seed: int = 42

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "OptimizerConfig":
        unknown = set(d) - {"starts", "max_iters", "tol_opt", "seed"}
        if unknown:
            raise ValueError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**d)


def _symmetrized(chain: ReversibleChain) -> np.ndarray:
    # D^{1/2} (-Q) D^{-1/2}, D = diag(pi): self-adjointness of -Q on L^2(pi)
    gen = chain.rates - np.diag(chain.total_rates)
    s = np.sqrt(chain.pi)
    sym = -(s[:, None] * gen / s[None, :])
    return 0.5 * (sym + sym.T)


def t_rel(chain: ReversibleChain) -> ConstantEstimate:
    """Inverse spectral gap of -Q on L^2(pi)."""
    ev = np.linalg.eigvalsh(_symmetrized(chain))
    gap = float(ev[1])
    if gap < 1e-13:
        raise DegenerateSpectrum(f"spectral gap {gap!r} is numerically zero")
    return ConstantEstimate(1.0 / gap, EXACT, meta={"gap": gap})


# --- ratio objectives, evaluated for a batch of log-observables (rows of G) ---


def _normalize(G: np.ndarray, pi: np.ndarray) -> np.ndarray:
    # E[f] = 1 for f = exp(g)
    top = G.max(axis=1, keepdims=True)
    return G - (top + np.log(np.exp(G - top) @ pi)[:, None])


def _ratio_rows(chain: ReversibleChain, F: np.ndarray, kind: str) -> np.ndarray:
    ent = entropy_rows(chain.pi, F)
    if kind == "ls":
        S = np.sqrt(F)
        D = dirichlet_rows(chain, S, S)
    else:
        D = dirichlet_rows(chain, F, np.log(F))
    with np.errstate(divide="ignore", invalid="ignore"):
        return ent / D


def _ratio_and_grad(chain: ReversibleChain, G: np.ndarray, kind: str):
    """Ent(f)/D(f) and its gradient in g, for each row g of ``G`` (f = e^g).

    D is E(sqrt f, sqrt f) for ``kind == "ls"`` and E(f, log f) for "mls".
    The value is computed exactly as :func:`ls_ratio` / :func:`mls_ratio`
    would compute it at f.
    """
    pi, c, src, dst = chain.pi, chain.conductance, chain.src, chain.dst
    B = chain.incidence
    # search iterates may underflow; non-finite rows are rejected by the caller
    with np.errstate(all="ignore"):
        F = np.exp(G)
        L = np.log(F)
        ent = entropy_rows(pi, F)
        m = (pi * F).sum(axis=1)
        ent_grad = pi * F * (L - np.log(m)[:, None])
        if kind == "ls":
            S = np.sqrt(F)
            D = dirichlet_rows(chain, S, S)
            w = c * (S[:, src] - S[:, dst])
            D_grad = 0.5 * S * (B @ w.T).T
        else:
            D = dirichlet_rows(chain, F, L)
            a = 0.5 * c * (L[:, src] - L[:, dst])
            b = 0.5 * c * (F[:, src] - F[:, dst])
            D_grad = F * (B @ a.T).T + (B @ b.T).T
        R = ent / D
        grad = (ent_grad - R[:, None] * D_grad) / D[:, None]
    # witnesses must be valid observables (normal, positive floats)
    R[~(F >= np.finfo(float).tiny).all(axis=1)] = np.nan
    return R, grad


def ratio_gradient(chain: ReversibleChain, g, kind: str) -> tuple[float, np.ndarray]:
    """Objective value and analytic gradient at a single log-observable ``g``."""
    R, grad = _ratio_and_grad(chain, np.atleast_2d(np.asarray(g, dtype=float)), kind)
    return float(R[0]), grad[0]


def ls_ratio(chain: ReversibleChain, f) -> float:
    """Ent(f) / E(sqrt f, sqrt f)."""
    f = observable(f, chain)
    return float(_ratio_rows(chain, f[None, :], "ls")[0])


def mls_ratio(chain: ReversibleChain, f) -> float:
    """Ent(f) / E(f, log f)."""
    f = observable(f, chain)
    return float(_ratio_rows(chain, f[None, :], "mls")[0])


_RATIOS = {"ls": ls_ratio, "mls": mls_ratio}


def _degenerate(G: np.ndarray, pi: np.ndarray) -> np.ndarray:
    F = np.exp(G)
    m = F @ pi
    var = ((F - m[:, None]) ** 2) @ pi
    return ~(var >= _VAR_FLOOR)


def _gap_direction(chain: ReversibleChain) -> np.ndarray:
    _, vecs = np.linalg.eigh(_symmetrized(chain))
    phi = vecs[:, 1] / np.sqrt(chain.pi)
    return phi / np.abs(phi).max()


def _initial_points(chain: ReversibleChain, rngs, initial) -> np.ndarray:
    n, S = chain.n, len(rngs)
    G = np.stack([rng.uniform(-2.0, 2.0, n) for rng in rngs]) if S else np.zeros((0, n))
    # the first two starts sit next to the constants along the slowest mode,
    # where both ratios approach their perturbative limits
    phi = _gap_direction(chain)
    for i, sign in zip(range(min(S, 2)), (1.0, -1.0)):
        G[i] = sign * _GAP_START_SCALE * phi
    if initial is not None:
        init = np.atleast_2d(np.asarray(initial, dtype=float))
        G[: len(init)] = init[:S]
    return _normalize(G, chain.pi)


def _ascend(chain: ReversibleChain, kind: str, config: OptimizerConfig, initial=None):
    n, pi = chain.n, chain.pi
    S = config.starts
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(S)]
    G = _initial_points(chain, rngs, initial)
    reperturbed = np.zeros(S, dtype=np.int64)

    def reperturb(G, rows):
        for i in np.flatnonzero(rows):
            G[i] += rngs[i].uniform(-2.0, 2.0, n)
            reperturbed[i] += 1
        return _normalize(G, pi)

    for _ in range(8):
        bad = _degenerate(G, pi)
        if not bad.any():
            break
        G = reperturb(G, bad)
    R, grad = _ratio_and_grad(chain, G, kind)
    ok = np.isfinite(R) & ~_degenerate(G, pi)
    R = np.where(ok, R, -np.inf)

    best_R = R.copy()
    best_G = G.copy()
    gmax = np.abs(np.where(ok[:, None], grad, 0.0)).max(axis=1) if S else np.zeros(0)
    step = np.where(gmax > 0, 0.5 / np.maximum(gmax, 1e-300), 1.0)
    active = ok.copy()
    iters = np.zeros(S, dtype=np.int64)
    status = np.where(ok, "max_iters", "degenerate").astype(object)

    for _ in range(config.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iters[idx] += 1
        P = _normalize(G[idx] + step[idx, None] * grad[idx], pi)
        flat = _degenerate(P, pi)
        if flat.any():
            sub = np.zeros(S, dtype=bool)
            sub[idx[flat]] = True
            Gtmp = G.copy()
            Gtmp[sub] = P[flat]
            Gtmp = reperturb(Gtmp, sub)
            P[flat] = Gtmp[sub]
        Rp, gp = _ratio_and_grad(chain, P, kind)
        Rp = np.where(np.isfinite(Rp), Rp, -np.inf)
        forced = flat & np.isfinite(Rp)
        better = (Rp > R[idx]) | forced
        acc = idx[better]
        rel = (Rp[better] - R[acc]) / np.abs(Rp[better])
        G[acc], R[acc], grad[acc] = P[better], Rp[better], gp[better]
        step[acc] *= 1.5
        rej = idx[~better]
        step[rej] *= 0.5
        improved = R[acc] > best_R[acc]
        best_R[acc[improved]] = R[acc[improved]]
        best_G[acc[improved]] = G[acc[improved]]
        done = acc[(rel < config.tol_opt) & ~forced[better]]
        active[done] = False
        status[done] = "tol"
        gnorm = np.abs(grad[rej]).max(axis=1)
        stalled = rej[step[rej] * gnorm < 1e-15]
        active[stalled] = False
        status[stalled] = "step"

    return best_R, best_G, iters, status, reperturbed


def _estimate(chain, kind, config, initial) -> ConstantEstimate:
    config = config or OptimizerConfig()
    best_R, best_G, iters, status, reperturbed = _ascend(chain, kind, config, initial)
    finite = np.isfinite(best_R)
    if not finite.any():
        raise AllStartsDegenerate("every start collapsed to a constant function")
    i = int(np.argmax(np.where(finite, best_R, -np.inf)))
    witness = np.exp(best_G[i])
    value = _RATIOS[kind](chain, witness)
    top = np.sort(best_R[finite])[::-1]
    k = max(1, math.ceil(len(best_R) / 4))
    head = top[:k]
    converged = len(head) == k and (head[0] - head[-1]) <= _CONVERGED_RTOL * head[0]
    meta = {
        "objective": kind,
        "starts": config.starts,
        "max_iters": config.max_iters,
        "tol_opt": config.tol_opt,
        "seed": config.seed,
        "best_start": i,
        "iterations": iters.tolist(),
        "stop": [str(s) for s in status],
        "reperturbed": reperturbed.tolist(),
        "start_values": [float(v) if np.isfinite(v) else None for v in best_R],
        "converged": bool(converged),
    }
    return ConstantEstimate(value, LOWER, witness, meta)


def estimate_tls(chain: ReversibleChain, config: OptimizerConfig | None = None, initial=None):
    """Best lower bound on t_LS: sup of Ent(f)/E(sqrt f, sqrt f) over visited f.

    ``initial`` optionally overrides the first rows of the starting points
    (as log-observables).  The returned value is the ratio at the witness.
    """
    return _estimate(chain, "ls", config, initial)


def estimate_tmls(chain: ReversibleChain, config: OptimizerConfig | None = None, initial=None):
    """Best lower bound on t_MLS: sup of Ent(f)/E(f, log f) over visited f."""
    return _estimate(chain, "mls", config, initial)


def h_constant(r: float) -> float:
    """((sqrt r + 1)/(sqrt r - 1)) log r, extended by continuity with H(1) = 4.

    Defined for every r > 0 and symmetric under r -> 1/r.
    """
    if r <= 0:
        raise ValueError("H is defined on (0, inf)")
    if r == 1:
        return 4.0
    s = math.sqrt(r)
    u = (r - 1) / (s + 1)  # = s - 1 without cancellation
    return (s + 1) * 2 * math.log1p(u) / u


def theorem1_upper_bound(chain: ReversibleChain, tmls_value: float) -> float:
    """20 t_MLS log(1/p), the log-Sobolev bound obtained by upgrading the MLSI."""
    p = sparsity(chain)
    if p > 0.5:
        raise TwoPointRegime(f"sparsity {p!r} > 1/2; use the two-point oracle")
    return 20.0 * tmls_value * math.log(1.0 / p)


def poor_upper_bound(chain: ReversibleChain) -> float:
    """t_REL log(1/pi_min - 1) / (1 - 2 pi_min): the classical bound on t_LS."""
    pmin = float(chain.pi.min())
    if pmin >= 0.5:
        raise DegeneratePiStar("pi_min >= 1/2 only for symmetric two-point chains")
    return t_rel(chain).value * math.log(1.0 / pmin - 1.0) / (1.0 - 2.0 * pmin)


def trivial_tls(pi) -> float:
    """Exact t_LS of the chain Q(x, y) = pi(y)."""
    pmin = float(np.min(pi))
    if math.isclose(pmin, 0.5, rel_tol=0, abs_tol=1e-12):
        return 2.0
    return math.log(1.0 / pmin - 1.0) / (1.0 - 2.0 * pmin)


def two_point_tls(chain: ReversibleChain) -> float:
    """Exact t_LS of any two-state chain (a time change of the trivial chain)."""
    if chain.n != 2:
        raise ValueError("two_point_tls needs exactly two states")
    lam = chain.rates[0, 1] + chain.rates[1, 0]
    return trivial_tls(chain.pi) / lam


def entropy_dual_gap(chain: ReversibleChain, g, h) -> float:
    """Ent(g) - E[g h] for a dual certificate h with E[e^h] <= 1."""
    g = observable(g, chain)
    h = np.asarray(h, dtype=float)
    z = expectation(chain, np.exp(h))
    if z > 1 + 1e-12:
        raise DualConstraintViolated(f"E[exp(h)] = {z!r} > 1")
    return entropy(chain, g) - expectation(chain, g * h)
