"""Cartesian products of test spaces and joint states on them.

A joint state on ``A_1 x ... x A_n`` is a dense array of shape
``(|E_1|, ..., |E_n|)``; axis ``i`` belongs to system ``i`` (0-based in code,
so C order keeps system 1 slowest-varying when flattened).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import TestSpace
from .errors import SignallingState, SizeLimitExceeded, ZeroProbabilityOutcome
from .statespace import EQ_TOL, Frame, State, build_frame

TENSOR_LIMIT = 10**7
ENTRY_TOL = 1e-12

__all__ = [
    "ProductSpace",
    "JointState",
    "Violation",
    "NonsignallingReport",
    "product",
    "power",
    "direct_product",
    "check_nonsignalling",
    "full_nonsignalling_deviations",
    "marginal",
    "conditional",
    "tensor_coordinates",
    "tensor_reconstruct",
    "permute",
    "is_symmetric",
    "symmetrize",
]


@dataclass(frozen=True)
class ProductSpace:
    factors: tuple[TestSpace, ...]

    def __post_init__(self):
        flat = []
        for f in self.factors:
            flat.extend(f.factors if isinstance(f, ProductSpace) else (f,))
        if not flat:
            raise ValueError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(flat))

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.n_outcomes for f in self.factors)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def outcomes(self):
        """Iterate over product outcomes as index tuples, system 1 slowest."""
        return itertools.product(*(range(k) for k in self.shape))

    def tests(self):
        """Iterate over product tests ``s_1 x ... x s_n`` as tuples of tests."""
        return itertools.product(*(f.tests for f in self.factors))

    def homogeneous(self) -> bool:
        return all(f == self.factors[0] for f in self.factors)


def product(*factors) -> ProductSpace:
    """Flat Cartesian product; nested products are spliced in place."""
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = tuple(factors[0])
    for f in factors:
        if isinstance(f, TestSpace):
            f.checked()
    return ProductSpace(tuple(factors))


def power(space: TestSpace, n: int) -> ProductSpace:
    if n < 1:
        raise ValueError("power needs n >= 1")
    return ProductSpace((space,) * n)


def _check_size(shape):
    size = math.prod(shape)
    if size > TENSOR_LIMIT:
        raise SizeLimitExceeded(f"joint tensor would have {size} entries (limit {TENSOR_LIMIT})")


def _contract(tensor: np.ndarray, axis: int, matrix: np.ndarray) -> np.ndarray:
    """Apply ``matrix`` (rows x |E_axis|) along ``axis``, keeping axis order."""
    out = np.tensordot(matrix, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class JointState:
    """Probability tensor on a product space, normalised on every product test.

    Signalling tensors are accepted; operations that need the nonsignalling
    property check it themselves.
    """

    product: ProductSpace
    tensor: np.ndarray
    tol: float = field(default=EQ_TOL, repr=False)

    def __post_init__(self):
        shape = self.product.shape
        _check_size(shape)
        t = np.asarray(self.tensor, dtype=float)
        if t.size != math.prod(shape):
            raise ValueError(f"tensor has {t.size} entries, expected {math.prod(shape)}")
        t = t.reshape(shape).copy()
        if t.min() < -ENTRY_TOL or t.max() > 1 + ENTRY_TOL:
            raise ValueError("joint probabilities outside [0, 1]")
        t = np.clip(t, 0.0, 1.0)
        sums = t
        for axis, f in enumerate(self.product.factors):
            sums = _contract(sums, axis, f.incidence())
        dev = float(np.max(np.abs(sums - 1.0)))
        if dev > self.tol:
            raise ValueError(f"joint state not normalised on some product test (deviation {dev:.3e})")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def n(self) -> int:
        return self.product.n

    def __getitem__(self, outcome):
        return float(self.tensor[tuple(outcome)])

    def allclose(self, other: "JointState", atol: float = EQ_TOL) -> bool:
        return self.product == other.product and bool(
            np.allclose(self.tensor, other.tensor, rtol=0.0, atol=atol)
        )


def direct_product(states: Sequence[State]) -> JointState:
    states = list(states)
    if not states:
        raise ValueError("direct product of no states")
    t = np.asarray(states[0].probs)
    for s in states[1:]:
        t = np.multiply.outer(t, s.probs)
    return JointState(ProductSpace(tuple(s.space for s in states)), t)


# -- nonsignalling ----------------------------------------------------------

class Violation(NamedTuple):
    source: tuple[int, ...]  # systems summed out under different tests
    affected: tuple[int, ...]  # systems whose statistics change
    magnitude: float


@dataclass
class NonsignallingReport:
    passed: bool
    violations: list[Violation]
    worst: float

    def __bool__(self):
        return self.passed

    def to_doc(self) -> dict:
        return {
            "passed": self.passed,
            "worst": self.worst,
            "violations": [
                {
                    "source": [i + 1 for i in v.source],
                    "affected": [i + 1 for i in v.affected],
                    "magnitude": v.magnitude,
                }
                for v in self.violations
            ],
        }


def _split_deviation(js: JointState, alpha: Sequence[int]) -> float:
    """Largest disagreement between sums over different test tuples on ``alpha``.

    Contracting each axis in ``alpha`` with its test incidence gives one
    slice per test tuple; nonsignalling requires all slices to coincide.
    """
    t = js.tensor
    for axis in alpha:
        t = _contract(t, axis, js.product.factors[axis].incidence())
    if not alpha:
        return 0.0
    spread = t.max(axis=tuple(alpha)) - t.min(axis=tuple(alpha))
    return float(spread.max()) if spread.size else 0.0


def full_nonsignalling_deviations(js: JointState) -> dict[tuple[int, ...], float]:
    """Deviation for every nonempty proper subset of systems, straight from
    the definition (exponential in ``n``)."""
    n = js.n
    out = {}
    for k in range(1, n):
        for alpha in itertools.combinations(range(n), k):
            out[alpha] = _split_deviation(js, alpha)
    return out


def check_nonsignalling(js: JointState, tol: float = EQ_TOL) -> NonsignallingReport:
    """Check the n-fold nonsignalling condition.

    Only single-system sums are examined: if summing out any one system is
    independent of its test for all fixed outcomes elsewhere, then summing
    out any subset is too (swap the tests one system at a time).
    """
    violations = []
    worst = 0.0
    if js.n > 1:
        for i in range(js.n):
            dev = _split_deviation(js, (i,))
            worst = max(worst, dev)
            if dev > tol:
                rest = tuple(j for j in range(js.n) if j != i)
                violations.append(Violation((i,), rest, dev))
    return NonsignallingReport(not violations, violations, worst)


def marginal(js: JointState, keep: Sequence[int], tol: float = EQ_TOL) -> JointState:
    """Marginal on the systems ``keep`` (0-based, any order; result follows
    the original system order).

    Each discarded system is summed over its first test.  Raises
    :class:`SignallingState` if a different choice of tests on the discarded
    systems would change the result.
    """
    keep = sorted(set(keep))
    if not keep or keep[0] < 0 or keep[-1] >= js.n:
        raise ValueError(f"invalid systems to keep: {keep}")
    drop = tuple(i for i in range(js.n) if i not in keep)
    if not drop:
        return js
    dev = _split_deviation(js, drop)
    if dev > tol:
        raise SignallingState(drop, tuple(keep), dev)
    t = js.tensor
    for axis in drop:
        first = js.product.factors[axis].incidence()[:1]
        t = _contract(t, axis, first)
    t = t.reshape([js.product.shape[i] for i in keep])
    return JointState(ProductSpace(tuple(js.product.factors[i] for i in keep)), t)


def conditional(js: JointState, e: int, tol: float = EQ_TOL) -> State:
    """State of system 2 given outcome ``e`` on system 1 of a bipartite state."""
    if js.n != 2:
        raise ValueError("conditional states are defined for two systems")
    report = check_nonsignalling(js, tol)
    if not report:
        v = report.violations[0]
        raise SignallingState(v.source, v.affected, v.magnitude)
    p_e = marginal(js, [0], tol).tensor[e]
    if p_e <= 1e-12:
        raise ZeroProbabilityOutcome(
            f"outcome {js.product.factors[0].outcomes[e]!r} has marginal probability {p_e:.3e}"
        )
    return State(js.product.factors[1], js.tensor[e] / p_e)


# -- frame coordinates ------------------------------------------------------

def _frames(js_or_product, frame) -> list[Frame]:
    prod = js_or_product.product if isinstance(js_or_product, JointState) else js_or_product
    if frame is None:
        return [build_frame(f) for f in prod.factors]
    if isinstance(frame, Frame):
        frames = [frame] * prod.n
    else:
        frames = list(frame)
    for f, space in zip(frames, prod.factors):
        if f.space != space:
            raise ValueError("frame does not belong to the matching factor")
    if len(frames) != prod.n:
        raise ValueError("need one frame per factor")
    return frames


def tensor_coordinates(frame, js: JointState, tol: float = EQ_TOL) -> np.ndarray:
    """Values ``(a_{i_1} x ... x a_{i_n})(js)`` as an array of shape ``(d_1, ..., d_n)``.

    ``frame`` is one :class:`Frame` shared by all factors, a list with one per
    factor, or ``None`` to build them.
    """
    report = check_nonsignalling(js, tol)
    if not report:
        v = report.violations[0]
        raise SignallingState(v.source, v.affected, v.magnitude)
    t = js.tensor
    for axis, f in enumerate(_frames(js, frame)):
        t = _contract(t, axis, f.matrix)
    return t


def tensor_reconstruct(frame, coords: np.ndarray, prod: ProductSpace) -> np.ndarray:
    """Inverse of :func:`tensor_coordinates`; returns the raw outcome tensor."""
    t = np.asarray(coords, dtype=float)
    for axis, f in enumerate(_frames(prod, frame)):
        t = _contract(t, axis, f.inverse_matrix)
    return t


# -- permutations -----------------------------------------------------------

def _require_homogeneous(js: JointState):
    if not js.product.homogeneous():
        raise ValueError("permutations need identical factors")


def permute(js: JointState, pi: Sequence[int]) -> JointState:
    """Entry ``(e_1..e_n)`` of the result is entry ``(e_{pi(1)}..e_{pi(n)})``
    of ``js`` (0-based ``pi``).

    ``permute(permute(js, pi), sigma) == permute(js, [sigma[pi[k]] for k])``.
    """
    _require_homogeneous(js)
    pi = list(pi)
    if sorted(pi) != list(range(js.n)):
        raise ValueError(f"not a permutation of {js.n} systems: {pi}")
    inverse = np.argsort(pi)
    return JointState(js.product, np.transpose(js.tensor, inverse))


def is_symmetric(js: JointState, tol: float = EQ_TOL) -> tuple[bool, float]:
    """Invariance under adjacent transpositions, which generate all permutations."""
    _require_homogeneous(js)
    worst = 0.0
    for i in range(js.n - 1):
        swapped = np.swapaxes(js.tensor, i, i + 1)
        worst = max(worst, float(np.max(np.abs(swapped - js.tensor))))
    return worst <= tol, worst


def symmetrize(js: JointState) -> JointState:
    _require_homogeneous(js)
    if js.n > 6:
        raise SizeLimitExceeded("symmetrize averages over n! permutations; n <= 6")
    perms = list(itertools.permutations(range(js.n)))
    acc = np.zeros_like(js.tensor)
    for p in perms:
        acc += np.transpose(js.tensor, p)
    return JointState(js.product, acc / len(perms))
