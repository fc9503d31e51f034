"""Sampled verification of the regularization inequalities on one chain.

``run_suite`` draws random positive observables (log-uniform, plus spiked
ones where a single coordinate is multiplied by 10^3) and evaluates every
requested check on each of them.  Results are collected in a
:class:`VerificationReport`, which serialises losslessly to JSON.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

import numpy as np

from .chain import ReversibleChain, dirichlet, entropy, expectation, sparsity
from .errors import TwoPointRegime, WitnessNotFound
from .functional import ConstantEstimate, OptimizerConfig, estimate_tmls, h_constant
from .models import describe
from .regularization import (
    Margin,
    default_r,
    dual_function,
    kappa,
    regularize,
    t_map_properties,
    verify_dirichlet_comparison,
    verify_entropy_comparison,
    verify_entropy_lemmas,
    verify_lemma_r,
    verify_local_lemma,
)

log = logging.getLogger(__name__)

CHECKS = (
    "lsi_vs_mlsi",
    "lemma_r",
    "dirichlet_comparison",
    "entropy_comparison",
    "entropy_lemmas",
    "local_lemma",
    "t_map",
    "h_bound",
    "kappa",
    "varentropy",
    "pipeline",
)
# checks that need r = 4/p^2 and therefore p <= 1/2
_NEEDS_DEFAULT_R = {
    "dirichlet_comparison", "entropy_comparison", "entropy_lemmas", "local_lemma",
    "t_map", "h_bound", "kappa", "pipeline",
}
TOLERANCE = 1e-12
SPIKE_FACTOR = 1e3
LEMMA_R_EXTRA = 2.0


@dataclass
class CheckRecord:
    name: str
    samples: int
    min_margin: float | None
    tolerance: float
    passed: bool
    detail: str | None = None


@dataclass
class VerificationReport:
    chain: dict[str, Any]
    seed: int
    samples: int
    checks: list[CheckRecord]
    estimates: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["passed"] = self.passed
        if self.timings is None:
            del d["timings"]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VerificationReport":
        return cls(
            chain=d["chain"],
            seed=d["seed"],
            samples=d["samples"],
            checks=[CheckRecord(**c) for c in d["checks"]],
            estimates=d.get("estimates", {}),
            timings=d.get("timings"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))


def sample_observables(n: int, count: int, seed: int, spike_every: int = 4) -> list[np.ndarray]:
    """f = exp(g), g uniform on [-3, 3]; every ``spike_every``-th sample also
    has one random coordinate multiplied by 10^3."""
    out = []
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(ss)
        f = np.exp(rng.uniform(-3.0, 3.0, n))
        if spike_every and i % spike_every == spike_every - 1:
            f[rng.integers(n)] *= SPIKE_FACTOR
        out.append(f)
    return out


def _parse_checks(checks: str | Iterable[str]) -> list[str]:
    if isinstance(checks, str):
        checks = [c.strip() for c in checks.split(",") if c.strip()]
    checks = list(checks)
    if checks == ["all"]:
        return list(CHECKS)
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    return [c for c in CHECKS if c in checks]


def _varentropy_margins(chain: ReversibleChain, f: np.ndarray, rng) -> list[Margin]:
    ent = entropy(chain, f)
    m = expectation(chain, f)
    w = np.exp(rng.uniform(-3.0, 3.0, chain.n))
    certificates = [
        np.log(f / m),
        np.log(w / expectation(chain, w)),
        np.log((1 + 5 * f / m) / 6),
        np.zeros(chain.n),
    ]
    # E[f h] cancels for nearly constant f; its rounding error scales with E[f |h|]
    return [
        Margin(expectation(chain, f * h), ent, expectation(chain, f * np.abs(h)))
        for h in certificates
    ]


def _per_sample(chain, name, f, r, reg, t_mls, rng) -> list[Margin]:
    if name == "lsi_vs_mlsi":
        s = np.sqrt(f)
        return [Margin(4 * dirichlet(chain, s, s), dirichlet(chain, f, np.log(f)))]
    if name == "lemma_r":
        rs = [LEMMA_R_EXTRA] + ([r] if r is not None else [])
        return [verify_lemma_r(chain, regularize(chain, f, rr).f_star, rr) for rr in rs]
    if name == "dirichlet_comparison":
        return list(verify_dirichlet_comparison(chain, f, reg=reg))
    if name == "entropy_comparison":
        return [verify_entropy_comparison(chain, f, reg=reg)]
    if name == "entropy_lemmas":
        return list(verify_entropy_lemmas(chain, f, reg=reg))
    if name == "local_lemma":
        table = verify_local_lemma(chain, f, r, reg=reg)
        # slacks are log-ratios, i.e. already relative
        return [Margin(0.0, min(min(w.low_slack, w.high_slack) for w in table))] if table else []
    if name == "t_map":
        props = t_map_properties(reg)
        # T(A) = A^c fails whenever some fixed point is not the argmax of an
        # active state (e.g. f constant); the image of T is what equals A^c
        keep = ("idempotent", "fixes_complement", "active_into_complement", "image_is_complement")
        return [Margin(0.0, 0.0 if props[k] else -1.0) for k in keep]
    if name == "h_bound":
        h = dual_function(chain, reg)
        comp = np.ones(chain.n, dtype=bool)
        comp[reg.active_set] = False
        # E[f* - f] = E[f h], compared as E[f*] against E[f] + E[f h] so the
        # scale is E[f*] rather than a difference that may round to zero
        star = expectation(chain, reg.f_star)
        identity = expectation(chain, f) + expectation(chain, f * h)
        return [
            Margin(float(h[comp].max()), 1 / 3),
            Margin(expectation(chain, 6.0 ** (3 * h)), 1.0),
            Margin(star, identity),
            Margin(identity, star),
        ]
    if name == "varentropy":
        return _varentropy_margins(chain, f, rng)
    if name == "pipeline":
        H = h_constant(r)
        fs, ls = reg.f_star, reg.log_f_star
        ss, s = np.sqrt(fs), np.sqrt(f)
        e_star = entropy(chain, fs)
        d_mls = dirichlet(chain, fs, ls)
        d_ls_star = dirichlet(chain, ss, ss)
        return [
            Margin(entropy(chain, f), 2 * e_star),
            Margin(2 * e_star, 2 * t_mls * d_mls),
            Margin(2 * t_mls * d_mls, 2 * t_mls * H * d_ls_star),
            Margin(2 * t_mls * H * d_ls_star, 8 / 3 * t_mls * H * dirichlet(chain, s, s)),
        ]
    raise ValueError(name)


def run_suite(
    chain: ReversibleChain,
    checks: str | Iterable[str] = "all",
    samples: int = 500,
    seed: int = 42,
    config: OptimizerConfig | None = None,
    timings: bool = False,
    tmls: ConstantEstimate | None = None,
) -> VerificationReport:
    """Run the selected checks over ``samples`` random observables.

    ``tmls`` supplies the MLSI estimate used by the pipeline check; when it
    is omitted it is estimated with ``config``.
    """
    names = _parse_checks(checks)
    observables = sample_observables(chain.n, samples, seed)
    if samples == 0:
        log.warning("samples=0: per-observable checks pass vacuously")
    p = sparsity(chain)
    try:
        r = default_r(chain)
    except TwoPointRegime:
        r = None
    estimates: dict[str, Any] = {"sparsity": p, "r": r}
    clock: dict[str, float] = {}
    t_mls = None
    if "pipeline" in names and r is not None and samples:
        t0 = time.perf_counter()
        est = tmls or estimate_tmls(chain, config)
        t_mls = est.value
        estimates["t_mls"] = est.to_dict()
        clock["estimate_tmls"] = time.perf_counter() - t0

    regs = None
    records = []
    for name in names:
        t0 = time.perf_counter()
        if r is None and name in _NEEDS_DEFAULT_R:
            records.append(CheckRecord(name, 0, None, TOLERANCE, True, f"skipped: sparsity {p} > 1/2"))
            continue
        if name == "kappa":
            m = Margin(kappa(chain, r), 4 / 3)
            records.append(CheckRecord(name, 1, m.relative, TOLERANCE, m.holds(TOLERANCE)))
            clock[name] = time.perf_counter() - t0
            continue
        if regs is None and r is not None:
            regs = [regularize(chain, f, r) for f in observables]
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence([seed, 1]).spawn(samples)]
        worst = math.inf
        try:
            for i, f in enumerate(observables):
                reg = regs[i] if regs is not None else None
                for m in _per_sample(chain, name, f, r, reg, t_mls, rngs[i]):
                    worst = min(worst, m.relative)
        except WitnessNotFound as exc:
            records.append(CheckRecord(name, samples, None, TOLERANCE, False, str(exc)))
            continue
        min_margin = None if worst == math.inf else worst
        ok = min_margin is None or min_margin >= -TOLERANCE
        records.append(CheckRecord(name, samples, min_margin, TOLERANCE, ok))
        clock[name] = time.perf_counter() - t0
    return VerificationReport(
        chain=describe(chain),
        seed=seed,
        samples=samples,
        checks=records,
        estimates=estimates,
        timings=clock if timings else None,
    )
