"""Exchangeable sequences of joint states and their de Finetti mixtures.

Mixing measures are finitely supported: a :class:`Mixture` is a weighted
list of single-system states.  The pipeline mirrors the proof of the
representation theorem at desk scale:

* :func:`generate_exchangeable` builds ``sum_k w_k w_k^{(x)n}``;
* :func:`induced_classical` measures a frame on every system, giving a
  symmetric classical distribution over frame outcomes;
* :func:`recover_mixture` fits a mixture to a joint state over a finite
  candidate support;
* :func:`certify_support` evaluates the tail probability used to exclude
  pseudo-states from the support.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .composite import (
    JointState,
    ProductSpace,
    TENSOR_LIMIT,
    check_nonsignalling,
    is_symmetric,
    power,
    tensor_coordinates,
)
from .core import TestSpace
from .errors import (
    NotSymmetric,
    SignallingState,
    SizeLimitExceeded,
    ZeroProbabilityObservation,
)
from .simplex_lsq import simplex_lsq, unique_minimizer
from .statespace import (
    EQ_TOL,
    Frame,
    SpanVector,
    State,
    frame_coordinates,
    is_state,
    random_state,
    vertices,
)

log = logging.getLogger(__name__)

PRUNE_TOL = 1e-10

__all__ = [
    "Mixture",
    "ClassicalDist",
    "Finding",
    "ExchangeabilityReport",
    "RecoveryResult",
    "Certificate",
    "check_exchangeable",
    "generate_exchangeable",
    "generate_prefix",
    "induced_classical",
    "recover_mixture",
    "certify_support",
    "posterior_update",
    "predictive",
    "condition_on_prefix",
]


@dataclass(frozen=True, eq=False)
class Mixture:
    """Finitely supported probability measure over states of one space.

    Components closer than ``1e-9`` in every coordinate are merged and
    their weights added.
    """

    space: TestSpace
    components: tuple[tuple[float, State], ...]

    def __post_init__(self):
        merged: list[list] = []
        for w, s in self.components:
            w = float(w)
            if not isinstance(s, State):
                s = State(self.space, s)
            if s.space != self.space:
                raise ValueError("mixture component lives on a different space")
            if not 0.0 < w <= 1.0 + EQ_TOL:
                raise ValueError(f"mixture weight {w} outside (0, 1]")
            for item in merged:
                if item[1].allclose(s):
                    item[0] += w
                    break
            else:
                merged.append([w, s])
        if not merged:
            raise ValueError("empty mixture")
        total = sum(w for w, _ in merged)
        if abs(total - 1.0) > EQ_TOL:
            raise ValueError(f"mixture weights sum to {total!r}")
        object.__setattr__(self, "components", tuple((w, s) for w, s in merged))

    @classmethod
    def from_arrays(cls, space: TestSpace, weights, states) -> "Mixture":
        return cls(space, tuple(zip(weights, states)))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def states(self) -> list[State]:
        return [s for _, s in self.components]

    def mean(self) -> State:
        return State(self.space, self.weights @ np.array([s.probs for s in self.states]))

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True, eq=False)
class ClassicalDist:
    """Probability table over sequences of frame outcomes ``{0..d-1}^n``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.min() < 0:
            raise ValueError("negative probability in classical table")
        if abs(t.sum() - 1.0) > EQ_TOL:
            raise ValueError(f"classical table sums to {t.sum()!r}")
        object.__setattr__(self, "table", t)

    @property
    def n(self) -> int:
        return self.table.ndim

    @property
    def d(self) -> int:
        return self.table.shape[0]

    def marginal(self) -> "ClassicalDist":
        """Drop the last system."""
        return ClassicalDist(self.table.sum(axis=-1))

    def symmetry_deviation(self) -> float:
        t = self.table
        return max(
            (float(np.max(np.abs(np.swapaxes(t, i, i + 1) - t))) for i in range(t.ndim - 1)),
            default=0.0,
        )


# -- exchangeability --------------------------------------------------------

class Finding(NamedTuple):
    clause: int  # 1 symmetry, 2 nonsignalling, 3 marginal consistency
    n: int
    deviation: float
    detail: str


_CLAUSE_NAMES = {1: "symmetry", 2: "nonsignalling", 3: "marginal consistency"}


@dataclass
class ExchangeabilityReport:
    """Outcome of checking a finite prefix; a pass means *prefix-consistent*
    only, since exchangeability quantifies over every ``n``."""

    passed: bool
    length: int
    worst: float
    failures: list[Finding] = field(default_factory=list)

    @property
    def label(self) -> str:
        return "prefix-consistent" if self.passed else "not exchangeable"

    def __bool__(self):
        return self.passed

    def lines(self) -> list[str]:
        if self.passed:
            return [f"{self.label}: {self.length} states, worst deviation {self.worst:.3e}"]
        return [
            f"exchangeability clause {f.clause} ({_CLAUSE_NAMES[f.clause]}): "
            f"{f.detail} {f.deviation:.1e} at n={f.n}"
            for f in self.failures
        ]

    def to_doc(self) -> dict:
        return {
            "passed": self.passed,
            "label": self.label,
            "length": self.length,
            "worst": self.worst,
            "failures": [f._asdict() for f in self.failures],
        }


def check_exchangeable(prefix: Sequence[JointState], tol: float = EQ_TOL) -> ExchangeabilityReport:
    """Check symmetry, nonsignalling and marginal consistency on a prefix.

    ``prefix[k]`` must be a joint state on ``k + 1`` copies of one space.
    """
    prefix = list(prefix)
    if not prefix:
        raise ValueError("empty prefix")
    base = prefix[0].product.factors[0]
    failures = []
    worst = 0.0
    for k, js in enumerate(prefix):
        n = k + 1
        if js.product != power(base, n):
            raise ValueError(f"state {n} does not live on {n} copies of the first space")
        ok, dev = is_symmetric(js, tol)
        worst = max(worst, dev)
        if not ok:
            failures.append(Finding(1, n, dev, "permutation mismatch"))
        ns = check_nonsignalling(js, tol)
        worst = max(worst, ns.worst)
        if not ns:
            v = max(ns.violations, key=lambda v: v.magnitude)
            failures.append(
                Finding(2, n, v.magnitude, f"system {v.source[0] + 1} signals, deviation")
            )
    for k in range(len(prefix) - 1):
        lower, upper = prefix[k].tensor, prefix[k + 1].tensor
        dev = 0.0
        for s in base.tests:
            summed = upper[..., list(s)].sum(axis=-1)
            dev = max(dev, float(np.max(np.abs(summed - lower))))
        worst = max(worst, dev)
        if dev > tol:
            failures.append(Finding(3, k + 1, dev, "marginal mismatch"))
    return ExchangeabilityReport(not failures, len(prefix), worst, failures)


def generate_exchangeable(mixture: Mixture, n: int) -> JointState:
    """``sum_k w_k * state_k (x) ... (x) state_k`` with ``n`` factors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = mixture.space.n_outcomes ** n
    if size > TENSOR_LIMIT:
        raise SizeLimitExceeded(f"joint tensor would have {size} entries (limit {TENSOR_LIMIT})")
    total = np.zeros((mixture.space.n_outcomes,) * n)
    for w, s in mixture.components:
        total += w * _tensor_power(s.probs, n)
    return JointState(power(mixture.space, n), total)


def generate_prefix(mixture: Mixture, length: int) -> list[JointState]:
    return [generate_exchangeable(mixture, n) for n in range(1, length + 1)]


def _tensor_power(v: np.ndarray, n: int) -> np.ndarray:
    t = np.asarray(v, dtype=float)
    for _ in range(n - 1):
        t = np.multiply.outer(t, v)
    return t


def induced_classical(frame: Frame, js: JointState, tol: float = EQ_TOL) -> ClassicalDist:
    """Distribution of frame outcome sequences when every system is measured
    with ``frame``."""
    table = np.array(tensor_coordinates(frame, js, tol))
    if table.min() < -tol:
        raise ValueError(f"frame probability {table.min():.3e} is negative")
    table[table < 0] = 0.0
    return ClassicalDist(table)


# -- recovery ---------------------------------------------------------------

@dataclass
class RecoveryResult:
    mixture: Mixture
    residual: float
    unique: bool
    candidates: list[State]
    weights: np.ndarray  # over candidates, before pruning

    def to_doc(self) -> dict:
        return {
            "residual": self.residual,
            "unique": self.unique,
            "components": [
                {"weight": w, "probs": s.probs.tolist()} for w, s in self.mixture.components
            ],
        }


def _dedupe(states: Iterable[State]) -> list[State]:
    out: list[State] = []
    for s in states:
        if not any(s.allclose(t) for t in out):
            out.append(s)
    return out


def recover_mixture(
    js: JointState,
    support: Sequence[State] | None = None,
    *,
    include_vertices: bool = True,
    n_random: int = 0,
    seed: int = 42,
    tol: float = EQ_TOL,
) -> RecoveryResult:
    """Fit ``js`` by a mixture of ``n``-fold powers of candidate states.

    Candidates are the vertices of the state polytope (unless disabled),
    then ``support``, then ``n_random`` random interior states.  Weights solve
    a least-squares problem over the simplex on the full tensor.  ``unique``
    reports whether the optimal weights are the only ones achieving the fit
    over this candidate set, which is a finite-``n`` stand-in for uniqueness
    of the mixing measure.
    """
    if not js.product.homogeneous():
        raise ValueError("recovery needs identical factors")
    ok, dev = is_symmetric(js, tol)
    if not ok:
        raise NotSymmetric(dev)
    ns = check_nonsignalling(js, tol)
    if not ns:
        v = ns.violations[0]
        raise SignallingState(v.source, v.affected, v.magnitude)
    space = js.product.factors[0]
    candidates: list[State] = []
    verts = None
    if include_vertices:
        verts = vertices(space)
        candidates.extend(verts)
    if support:
        candidates.extend(support)
    if n_random:
        rng = np.random.default_rng(seed)
        verts = verts or vertices(space)
        candidates.extend(random_state(space, rng, verts) for _ in range(n_random))
    candidates = _dedupe(candidates)
    if not candidates:
        raise ValueError("no candidate states for recovery")
    n = js.n
    A = np.column_stack([_tensor_power(s.probs, n).reshape(-1) for s in candidates])
    b = js.tensor.reshape(-1)
    fit = simplex_lsq(A, b)
    if not fit.converged:
        log.warning("simplex least squares hit the iteration limit")
    w = fit.weights.copy()
    w[w < PRUNE_TOL] = 0.0
    w /= w.sum()
    unique = unique_minimizer(A, w)
    kept = [(float(wk), s) for wk, s in zip(w, candidates) if wk > 0]
    mixture = Mixture(space, tuple(kept))
    residual = float(np.linalg.norm(A @ w - b))
    return RecoveryResult(mixture, residual, unique, candidates, fit.weights)


# -- support certification --------------------------------------------------

@dataclass
class Certificate:
    value: float  # probability that the outcome never occurs in n runs
    n: int
    exceeds_one: bool
    component_is_state: list[bool]


def certify_support(
    components: Sequence[tuple[float, object]],
    e: int,
    test: Sequence[int],
    n: int,
    frame: Frame | None = None,
) -> Certificate:
    """Probability that outcome ``e`` never shows up when ``test`` is run on
    each of ``n`` systems, for a mixture of (possibly pseudo-) states.

    Each component contributes ``w * (sum of its values on test minus e)^n``.
    A genuine mixture gives at most one; a pseudo-state that is negative on
    ``e`` makes the value grow without bound in even ``n``.  When ``frame`` is
    given, each component must have frame values in ``[0, 1]`` summing to one.
    """
    if n < 0 or n % 2:
        raise ValueError("n must be a non-negative even number")
    if e not in test:
        raise ValueError(f"outcome {e} is not in the given test")
    others = [f for f in test if f != e]
    value = 0.0
    flags = []
    for w, v in components:
        if isinstance(v, (State, SpanVector)):
            space, coeffs = v.space, v.probs
        else:
            space, coeffs = None, np.asarray(v, dtype=float)
        if frame is not None:
            p = frame_coordinates(frame, coeffs)
            if p.min() < -EQ_TOL or p.max() > 1 + EQ_TOL or abs(p.sum() - 1) > EQ_TOL:
                raise ValueError("component frame values must lie in [0, 1] and sum to one")
            space = frame.space
        if space is not None:
            flags.append(bool(is_state(space, coeffs)))
        else:
            flags.append(bool(coeffs.min() >= -EQ_TOL))
        value += float(w) * float(np.sum(coeffs[others])) ** n
    return Certificate(value, n, value > 1.0, flags)


# -- Bayesian updating ------------------------------------------------------

def _likelihoods(mixture: Mixture, observations) -> np.ndarray:
    space = mixture.space
    like = np.ones(len(mixture))
    for test, outcome in observations:
        if outcome not in space.tests[test]:
            raise ValueError(
                f"outcome {space.outcomes[outcome]!r} is not in test {test}"
            )
        like *= np.array([s.probs[outcome] for s in mixture.states])
    return like


def posterior_update(mixture: Mixture, observations: Sequence[tuple[int, int]]) -> Mixture:
    """Condition the mixing weights on observed ``(test, outcome)`` pairs.

    New weights are ``w_k * prod_j state_k(e_j)``, renormalised; components
    whose weight drops to zero are removed.
    """
    joint = mixture.weights * _likelihoods(mixture, observations)
    evidence = float(joint.sum())
    if evidence <= 1e-12:
        raise ZeroProbabilityObservation(
            f"observed sequence has predictive probability {evidence:.3e}"
        )
    post = joint / evidence
    kept = tuple((float(w), s) for w, s in zip(post, mixture.states) if w > 0)
    return Mixture(mixture.space, kept)


def predictive(mixture: Mixture) -> State:
    """Predictive state for the next system: the mixture's barycentre."""
    return mixture.mean()


def condition_on_prefix(js: JointState, observations: Sequence[tuple[int, int]]) -> State:
    """State of the last system of ``js`` given outcomes on all the others.

    ``observations[i]`` is the ``(test, outcome)`` seen on system ``i``; the
    joint state must have exactly one more system than there are
    observations.
    """
    if len(observations) != js.n - 1:
        raise ValueError("need one observation per system except the last")
    index = tuple(o for _, o in observations)
    row = js.tensor[index]
    last = js.product.factors[-1]
    p = float(row[list(last.tests[0])].sum())
    if p <= 1e-12:
        raise ZeroProbabilityObservation(f"observed sequence has probability {p:.3e}")
    return State(last, row / p)
