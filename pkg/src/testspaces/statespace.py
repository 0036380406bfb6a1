"""States, the spaces V(A) and V*(A), the state polytope and frames.

Everything is expressed in the outcome-indexed coordinate space ``R^E``.
States and span vectors are points of ``R^E``; functionals are covectors in
``R^E`` acting by the dot product.  Two covectors that agree on the linear
span of the state polytope represent the same functional.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import null_space, qr
from scipy.optimize import linprog

from .core import TestSpace
from .errors import EmptyStateSpace, FrameError, SizeLimitExceeded

EQ_TOL = 1e-9
CLAMP_TOL = 1e-12
VERTEX_LIMIT = 24
COND_LIMIT = 1e10

__all__ = [
    "State",
    "SpanVector",
    "Functional",
    "Frame",
    "PolytopeConstraints",
    "StateCheck",
    "polytope_constraints",
    "dimension",
    "vertices",
    "unit_functional",
    "build_frame",
    "frame_coordinates",
    "inverse_coordinates",
    "is_state",
    "random_state",
    "frame_to_doc",
]


def _as_vector(space: TestSpace, values) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape != (space.n_outcomes,):
        raise ValueError(
            f"expected {space.n_outcomes} outcome coordinates, got {v.shape[0]}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("coordinates must be finite")
    return v


@dataclass(frozen=True, eq=False)
class State:
    """A probability assignment normalised on every test.

    Entries within ``1e-12`` of ``[0, 1]`` are clamped; anything further out,
    or a test that does not sum to one within ``tol``, raises ``ValueError``.
    """

    space: TestSpace
    probs: np.ndarray
    tol: float = field(default=EQ_TOL, repr=False)

    def __post_init__(self):
        p = _as_vector(self.space, self.probs)
        if p.min() < -CLAMP_TOL or p.max() > 1 + CLAMP_TOL:
            raise ValueError(f"probabilities outside [0, 1]: {p}")
        p = np.clip(p, 0.0, 1.0)
        sums = self.space.incidence() @ p
        bad = np.flatnonzero(np.abs(sums - 1.0) > self.tol)
        if bad.size:
            j = int(bad[0])
            raise ValueError(f"test {j} sums to {sums[j]!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __call__(self, e: int) -> float:
        return float(self.probs[e])

    def allclose(self, other, atol: float = EQ_TOL) -> bool:
        other = other.probs if isinstance(other, (State, SpanVector)) else other
        return bool(np.allclose(self.probs, other, rtol=0.0, atol=atol))

    def as_span_vector(self) -> "SpanVector":
        return SpanVector(self.space, self.probs)


@dataclass(frozen=True, eq=False)
class SpanVector:
    """An element of the linear span of the state polytope."""

    space: TestSpace
    coeffs: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.space, self.coeffs)
        g = _geometry(self.space)
        dev = float(np.max(np.abs(g.span_constraints @ v))) if g.span_constraints.size else 0.0
        scale = max(1.0, float(np.max(np.abs(v))))
        if dev > EQ_TOL * scale:
            raise ValueError(f"vector is not in the span of the states (deviation {dev:.3e})")
        v.setflags(write=False)
        object.__setattr__(self, "coeffs", v)

    @property
    def probs(self) -> np.ndarray:
        return self.coeffs

    def __call__(self, e: int) -> float:
        return float(self.coeffs[e])

    def __add__(self, other):
        return SpanVector(self.space, self.coeffs + _coeffs(other))

    def __sub__(self, other):
        return SpanVector(self.space, self.coeffs - _coeffs(other))

    def __mul__(self, r: float):
        return SpanVector(self.space, r * self.coeffs)

    __rmul__ = __mul__

    def to_state(self) -> State:
        return State(self.space, self.coeffs)


def _coeffs(v) -> np.ndarray:
    if isinstance(v, State):
        return v.probs
    if isinstance(v, SpanVector):
        return v.coeffs
    return np.asarray(v, dtype=float)


@dataclass(frozen=True, eq=False)
class Functional:
    space: TestSpace
    covector: np.ndarray

    def __post_init__(self):
        c = _as_vector(self.space, self.covector)
        c.setflags(write=False)
        object.__setattr__(self, "covector", c)

    def __call__(self, v) -> float:
        return float(self.covector @ _coeffs(v))

    def on_span(self) -> np.ndarray:
        """Coordinates of the functional restricted to the span of the states."""
        return self.covector @ _geometry(self.space).span_basis

    def equivalent(self, other: "Functional", atol: float = EQ_TOL) -> bool:
        return bool(np.allclose(self.on_span(), other.on_span(), rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class Frame:
    """Informationally complete set of ``d`` functionals summing to the unit."""

    space: TestSpace
    members: tuple[Functional, ...]
    d: int
    shift: float
    _inverse: np.ndarray = field(repr=False, default=None)

    @property
    def matrix(self) -> np.ndarray:
        """``d x |E|`` array whose rows are the member covectors."""
        return np.array([a.covector for a in self.members])

    @property
    def inverse_matrix(self) -> np.ndarray:
        """``|E| x d`` map from frame coordinates back into the span."""
        return self._inverse


@dataclass(frozen=True)
class PolytopeConstraints:
    """``eq_matrix @ x == eq_rhs`` and ``ub_matrix @ x <= ub_rhs``."""

    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    ub_matrix: np.ndarray
    ub_rhs: np.ndarray

    def contains(self, x, tol: float = EQ_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(np.abs(self.eq_matrix @ x - self.eq_rhs) <= tol)
            and np.all(self.ub_matrix @ x <= self.ub_rhs + tol)
        )


class StateCheck(NamedTuple):
    is_state: bool
    outcome: int | None = None  # an outcome with negative value
    test: int | None = None  # a test that does not sum to one
    value: float | None = None

    def __bool__(self):
        return self.is_state


# -- polytope geometry ------------------------------------------------------

def polytope_constraints(space: TestSpace) -> PolytopeConstraints:
    n = space.n_outcomes
    return PolytopeConstraints(
        eq_matrix=space.incidence(),
        eq_rhs=np.ones(space.n_tests),
        ub_matrix=-np.eye(n),
        ub_rhs=np.zeros(n),
    )


def _lp(objective, space: TestSpace):
    """Minimise ``objective @ x`` over the state polytope."""
    cons = polytope_constraints(space)
    res = linprog(
        objective,
        A_eq=cons.eq_matrix,
        b_eq=cons.eq_rhs,
        bounds=[(0, None)] * space.n_outcomes,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res


@dataclass(frozen=True)
class _Geometry:
    zero_outcomes: tuple[int, ...]
    span_basis: np.ndarray  # |E| x d, orthonormal columns
    span_constraints: np.ndarray  # rows vanish exactly on the span


@functools.lru_cache(maxsize=256)
def _geometry(space: TestSpace) -> _Geometry:
    n = space.n_outcomes
    res = _lp(np.zeros(n), space)
    if res.status == 2:
        raise EmptyStateSpace(f"no state exists on {space}")
    if res.status != 0:
        raise RuntimeError(f"feasibility LP failed: {res.message}")
    zero = []
    for e in range(n):
        obj = np.zeros(n)
        obj[e] = -1.0
        r = _lp(obj, space)
        if -r.fun <= EQ_TOL:
            zero.append(e)
    # span of the states: all test sums equal and zero outcomes vanish
    inc = space.incidence()
    rows = [inc[j] - inc[0] for j in range(1, space.n_tests)]
    for e in zero:
        row = np.zeros(n)
        row[e] = 1.0
        rows.append(row)
    constraints = np.array(rows) if rows else np.zeros((0, n))
    basis = null_space(constraints) if rows else np.eye(n)
    if constraints.size:
        # orthonormal rows describing the same subspace, for scale-free checks
        constraints = null_space(basis.T).T
    return _Geometry(tuple(zero), basis, constraints)


def dimension(space: TestSpace) -> int:
    """Dimension of the linear span of all states on ``space``."""
    return _geometry(space).span_basis.shape[1]


def unit_functional(space: TestSpace) -> Functional:
    """The functional equal to one on every state (indicator of any test)."""
    return Functional(space, space.incidence()[0])


def vertices(space: TestSpace) -> list[State]:
    """Extreme points of the state polytope, sorted lexicographically.

    Brute force over basic feasible solutions: every vertex of
    ``{x >= 0, T x = 1}`` is supported on a linearly independent set of
    columns of the incidence matrix ``T``.
    """
    n = space.n_outcomes
    if n > VERTEX_LIMIT:
        raise SizeLimitExceeded(f"vertex enumeration limited to {VERTEX_LIMIT} outcomes, got {n}")
    g = _geometry(space)
    inc = space.incidence()
    rank = np.linalg.matrix_rank(inc)
    candidates = [e for e in range(n) if e not in g.zero_outcomes]
    ones = np.ones(space.n_tests)
    found = {}
    for k in range(1, rank + 1):
        for support in itertools.combinations(candidates, k):
            cols = inc[:, support]
            if np.linalg.matrix_rank(cols) < k:
                continue
            x_s, *_ = np.linalg.lstsq(cols, ones, rcond=None)
            if np.max(np.abs(cols @ x_s - ones)) > EQ_TOL or np.min(x_s) <= EQ_TOL:
                continue
            x = np.zeros(n)
            x[list(support)] = x_s
            x = np.round(x, 12)
            found.setdefault(tuple(x), x)
    return [State(space, found[key]) for key in sorted(found)]


def random_state(space: TestSpace, rng: np.random.Generator, verts=None) -> State:
    """Random convex combination of the vertices (flat Dirichlet weights)."""
    verts = vertices(space) if verts is None else verts
    w = rng.dirichlet(np.ones(len(verts)))
    p = w @ np.array([v.probs for v in verts])
    return State(space, p)


# -- frames -----------------------------------------------------------------

def _frame_from_pivots(space: TestSpace, pivots: Sequence[int]) -> Frame:
    g = _geometry(space)
    basis = g.span_basis
    d = basis.shape[1]
    n = space.n_outcomes
    indicator = np.eye(n)
    b = [indicator[e] for e in pivots]
    u = space.incidence()[0]
    if d == 1:
        # only the unit functional remains; no shift is needed
        members = [u]
        c = 0.0
    else:
        # expand u in the chosen basis to find an element that can absorb it
        b_span = np.array(b) @ basis
        gamma = np.linalg.solve(b_span.T, u @ basis)
        last = d - 1
        if abs(gamma[last]) < 1e-9 * np.max(np.abs(gamma)):
            last = int(np.argmax(np.abs(gamma)))
        order = [i for i in range(d) if i != last] + [last]
        b = [b[i] for i in order]
        b_tilde = b[:-1] + [u - np.sum(b[:-1], axis=0)]
        mins = [_lp(bt, space).fun for bt in b_tilde]
        c = float(min(mins))
        scale = 1.0 - d * c
        if scale <= 0:
            raise FrameError(f"degenerate shift: 1 - d*c = {scale}")
        members = [(bt - c * u) / scale for bt in b_tilde]
    matrix = np.array(members)
    gram = matrix @ basis
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise FrameError(f"frame is ill-conditioned (condition number {cond:.3e})")
    inverse = basis @ np.linalg.inv(gram)
    return Frame(
        space=space,
        members=tuple(Functional(space, m) for m in members),
        d=d,
        shift=c,
        _inverse=inverse,
    )


@functools.lru_cache(maxsize=256)
def build_frame(space: TestSpace) -> Frame:
    """Construct an informationally complete frame for ``space``.

    Start from ``d`` outcome indicators that are independent on the span
    (pivoted QR), replace one by ``u`` minus the others so the set sums to
    the unit functional, find the smallest value ``c`` any of them takes on
    a state (one LP each), then shift and rescale:
    ``a_i = (b_i - c u) / (1 - d c)``.
    """
    basis = _geometry(space).span_basis
    d = basis.shape[1]
    _, _, piv = qr(basis.T, pivoting=True)
    attempts = [list(piv[:d]), list(piv[::-1][:d])]
    last_error = None
    for pivots in attempts:
        if np.linalg.matrix_rank(basis[pivots]) < d:
            continue
        try:
            return _frame_from_pivots(space, pivots)
        except FrameError as exc:
            last_error = exc
    raise last_error or FrameError("no independent set of outcome indicators found")


def frame_coordinates(frame: Frame, v) -> np.ndarray:
    return frame.matrix @ _coeffs(v)


def inverse_coordinates(frame: Frame, p) -> SpanVector:
    p = np.asarray(p, dtype=float)
    if p.shape != (frame.d,):
        raise ValueError(f"expected {frame.d} frame coordinates, got shape {p.shape}")
    return SpanVector(frame.space, frame.inverse_matrix @ p)


def is_state(space: TestSpace, v, tol: float = EQ_TOL) -> StateCheck:
    x = _coeffs(v)
    neg = np.flatnonzero(x < -tol)
    if neg.size:
        e = int(neg[np.argmin(x[neg])])
        return StateCheck(False, outcome=e, value=float(x[e]))
    sums = space.incidence() @ x
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        j = int(bad[0])
        return StateCheck(False, test=j, value=float(sums[j]))
    return StateCheck(True)


def frame_to_doc(frame: Frame) -> dict:
    return {
        "d": frame.d,
        "c": frame.shift,
        "members": [a.covector.tolist() for a in frame.members],
    }
