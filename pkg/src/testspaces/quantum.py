"""Density operators, projective tests and the bridge to finite test spaces.

Multi-system operators act on ``(C^d)^{(x)n}`` with system 1 as the most
significant tensor factor, matching the joint-state axis order.
"""
from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .composite import JointState, power
from .core import TestSpace
from .definetti import recover_mixture
from .statespace import EQ_TOL, State

__all__ = [
    "DensityOperator",
    "ProjectiveTest",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "IDENTITY2",
    "pauli_test",
    "basis_test",
    "born",
    "partial_trace",
    "permute_systems",
    "is_symmetric_quantum",
    "local_test_space",
    "local_state",
    "embed_local",
    "rebit_state",
    "rebit_counterexample",
    "RebitReport",
    "density_to_doc",
    "density_from_doc",
]

IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density operator must be a square matrix")
        if not np.allclose(m, m.conj().T, rtol=0, atol=EQ_TOL):
            raise ValueError("density operator is not self-adjoint")
        if abs(np.trace(m) - 1) > EQ_TOL:
            raise ValueError(f"trace is {np.trace(m).real!r}, not 1")
        if np.linalg.eigvalsh(m).min() < -EQ_TOL:
            raise ValueError("density operator has a negative eigenvalue")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(np.kron(self.matrix, other.matrix))

    def expectation(self, observable) -> float:
        return float(np.real(np.trace(self.matrix @ observable)))

    def is_real(self, tol: float = EQ_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix.imag)) <= tol)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def pure(cls, psi) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))


@dataclass(frozen=True, eq=False)
class ProjectiveTest:
    projectors: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        ps = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        if not ps:
            raise ValueError("a test needs at least one projector")
        dim = ps[0].shape[0]
        for p in ps:
            if p.shape != (dim, dim):
                raise ValueError("projectors of different dimensions")
            if not np.allclose(p, p.conj().T, atol=EQ_TOL) or not np.allclose(p @ p, p, atol=EQ_TOL):
                raise ValueError("not a self-adjoint idempotent")
        if not np.allclose(sum(ps), np.eye(dim), atol=EQ_TOL):
            raise ValueError("projectors do not sum to the identity")
        for p, q in itertools.combinations(ps, 2):
            if not np.allclose(p @ q, 0, atol=EQ_TOL):
                raise ValueError("projectors are not mutually orthogonal")
        object.__setattr__(self, "projectors", ps)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self):
        return len(self.projectors)


def basis_test(vectors, name: str = "") -> ProjectiveTest:
    """Rank-one test from an orthonormal basis given as columns or a list."""
    vecs = [np.asarray(v, dtype=complex) for v in vectors]
    return ProjectiveTest(tuple(np.outer(v, v.conj()) for v in vecs), name)


def pauli_test(axis: str) -> ProjectiveTest:
    """Spin measurement along ``x``, ``y`` or ``z``: projectors ``(I +- sigma)/2``."""
    sigma = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[axis]
    return ProjectiveTest(((IDENTITY2 + sigma) / 2, (IDENTITY2 - sigma) / 2), axis)


def born(rho: DensityOperator, test: ProjectiveTest) -> np.ndarray:
    if rho.dim != test.dim:
        raise ValueError(f"state has dimension {rho.dim}, test {test.dim}")
    p = np.array([np.real(np.trace(rho.matrix @ q)) for q in test.projectors])
    return p


def _n_systems(rho: DensityOperator, local_dim: int) -> int:
    n = round(math.log(rho.dim, local_dim)) if rho.dim > 1 else 0
    if local_dim ** n != rho.dim:
        raise ValueError(f"dimension {rho.dim} is not a power of {local_dim}")
    return n


def partial_trace(rho: DensityOperator, discard: Sequence[int], local_dim: int = 2) -> DensityOperator:
    """Trace out the 0-based systems in ``discard``."""
    n = _n_systems(rho, local_dim)
    discard = sorted(set(discard))
    if any(i < 0 or i >= n for i in discard) or len(discard) >= n:
        raise ValueError(f"cannot discard systems {discard} of {n}")
    keep = [i for i in range(n) if i not in discard]
    t = rho.matrix.reshape((local_dim,) * (2 * n))
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise ValueError("too many systems")
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in discard:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    k = local_dim ** len(keep)
    return DensityOperator(reduced.reshape(k, k))


def permute_systems(rho: DensityOperator, pi: Sequence[int], local_dim: int = 2) -> np.ndarray:
    """``S_pi rho S_pi^dagger``; system ``k`` of the result is system
    ``pi[k]`` of ``rho``."""
    n = _n_systems(rho, local_dim)
    t = rho.matrix.reshape((local_dim,) * (2 * n))
    axes = list(pi) + [n + p for p in pi]
    d = local_dim**n
    return np.transpose(t, axes).reshape(d, d)


def is_symmetric_quantum(rho: DensityOperator, local_dim: int = 2, tol: float = EQ_TOL) -> bool:
    n = _n_systems(rho, local_dim)
    for i in range(n - 1):
        pi = list(range(n))
        pi[i], pi[i + 1] = pi[i + 1], pi[i]
        if np.max(np.abs(permute_systems(rho, pi, local_dim) - rho.matrix)) > tol:
            return False
    return True


# -- embedding into product test spaces -------------------------------------

def local_test_space(tests: Sequence[ProjectiveTest]) -> TestSpace:
    """One outcome per (test, projector) pair, labelled ``"<test>:<j>"``."""
    labels = []
    idx_tests = []
    for t_idx, test in enumerate(tests):
        name = test.name or f"t{t_idx + 1}"
        start = len(labels)
        labels.extend(f"{name}:{j}" for j in range(len(test)))
        idx_tests.append(tuple(range(start, len(labels))))
    return TestSpace(tuple(labels), tuple(idx_tests)).checked()


def _projectors(tests):
    dim = tests[0].dim
    for t in tests:
        if t.dim != dim:
            raise ValueError("tests act on different dimensions")
    return [q for t in tests for q in t.projectors], dim


def local_state(rho: DensityOperator, tests: Sequence[ProjectiveTest]) -> State:
    """Single-system Born statistics as a state on :func:`local_test_space`."""
    projs, dim = _projectors(tests)
    if rho.dim != dim:
        raise ValueError(f"state has dimension {rho.dim}, tests {dim}")
    p = np.array([np.real(np.trace(rho.matrix @ q)) for q in projs])
    return State(local_test_space(tests), np.clip(p, 0.0, 1.0))


def embed_local(rho: DensityOperator, tests: Sequence[ProjectiveTest]) -> JointState:
    """Statistics of all product projectors ``Q_1 (x) ... (x) Q_n`` drawn from
    ``tests`` on each system, as a joint state on ``T^{x n}``."""
    projs, dim = _projectors(tests)
    n = _n_systems(rho, dim)
    k = len(projs)
    if 3 * n > 52:
        raise ValueError("too many systems to embed")
    letters = string.ascii_letters
    rows, cols, outs = letters[:n], letters[n : 2 * n], letters[2 * n : 3 * n]
    # Tr(rho Q_1 (x) ... (x) Q_n) = sum rho[r, c] * prod_i Q_i[c_i, r_i]
    terms = [rows + cols] + [outs[i] + cols[i] + rows[i] for i in range(n)]
    stack = np.array(projs)
    t = rho.matrix.reshape((dim,) * (2 * n))
    probs = np.einsum(",".join(terms) + "->" + outs, t, *([stack] * n), optimize=True)
    probs = np.real(probs).reshape((k,) * n)
    return JointState(power(local_test_space(tests), n), np.clip(probs, 0.0, 1.0))


# -- real quantum theory ----------------------------------------------------

def rebit_state(theta: float) -> DensityOperator:
    """Pure real single-rebit state at angle ``theta`` on the x-z Bloch circle."""
    return DensityOperator(
        (IDENTITY2 + math.cos(theta) * PAULI_Z + math.sin(theta) * PAULI_X) / 2
    )


def _y_states(n: int) -> DensityOperator:
    plus = (IDENTITY2 + PAULI_Y) / 2
    minus = (IDENTITY2 - PAULI_Y) / 2
    a = np.array([[1.0 + 0j]])
    b = np.array([[1.0 + 0j]])
    for _ in range(n):
        a = np.kron(a, plus)
        b = np.kron(b, minus)
    return DensityOperator(0.5 * a + 0.5 * b)


@dataclass
class RebitReport:
    n: int
    grid: int
    is_real: bool
    is_symmetric: bool
    trace_consistency: float  # worst |omega^m - Tr_last omega^{m+1}| for m < n
    embedding_deviation: float  # x/z statistics vs. maximally mixed
    correlator: float  # Tr((sigma_y (x) sigma_y) omega^2)
    best_real_correlator: float
    gap: float
    recovery_residual: float
    recovered_maximally_mixed: bool
    recovered_weight: float

    def to_doc(self) -> dict:
        return dict(self.__dict__)


def rebit_counterexample(n: int = 2, grid: int = 16) -> RebitReport:
    """Exchangeable two-branch sigma_y mixture that real quantum theory cannot
    decompose into real product states.

    Restricted to the x and z tests available to rebits, the joint statistics
    coincide with those of the maximally mixed product state and recover as
    such; the joint sigma_y correlator is 1 while every mixture of products
    of real single-rebit states gives 0.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    if grid < 8:
        raise ValueError("grid resolution must be at least 8")
    omegas = {m: _y_states(m) for m in range(1, n + 1)}
    top = omegas[n]
    consistency = 0.0
    for m in range(1, n):
        traced = partial_trace(omegas[m + 1], [m])
        consistency = max(consistency, float(np.max(np.abs(traced.matrix - omegas[m].matrix))))

    tests = [pauli_test("x"), pauli_test("z")]
    embedded = embed_local(top, tests)
    mixed = embed_local(DensityOperator.maximally_mixed(2**n), tests)
    embedding_deviation = float(np.max(np.abs(embedded.tensor - mixed.tensor)))

    two = partial_trace(top, range(2, n)) if n > 2 else top
    yy = np.kron(PAULI_Y, PAULI_Y)
    correlator = two.expectation(yy)
    # mixtures of real products are linear in the weights, so the best one
    # sits on a single component: Tr(sigma_y rho)^2
    circle = [rebit_state(2 * math.pi * j / grid) for j in range(grid)]
    real_states = circle + [DensityOperator.maximally_mixed(2)]
    best = max(s.tensor(s).expectation(yy) for s in real_states)

    support = [local_state(s, tests) for s in real_states]
    rec = recover_mixture(embedded, support)
    target = local_state(DensityOperator.maximally_mixed(2), tests)
    comps = rec.mixture.components
    hit = len(comps) == 1 and comps[0][1].allclose(target)
    return RebitReport(
        n=n,
        grid=grid,
        is_real=top.is_real(),
        is_symmetric=is_symmetric_quantum(top),
        trace_consistency=consistency,
        embedding_deviation=embedding_deviation,
        correlator=correlator,
        best_real_correlator=best,
        gap=correlator - best,
        recovery_residual=rec.residual,
        recovered_maximally_mixed=hit,
        recovered_weight=float(comps[0][0]) if hit else 0.0,
    )


def density_to_doc(rho: DensityOperator) -> dict:
    return {"dim": rho.dim, "re": rho.matrix.real.tolist(), "im": rho.matrix.imag.tolist()}


def density_from_doc(doc) -> DensityOperator:
    try:
        m = np.array(doc["re"], dtype=float) + 1j * np.array(doc.get("im", 0.0), dtype=float)
        dim = int(doc["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed density operator document: {exc}") from exc
    if m.shape != (dim, dim):
        raise ValueError(f"matrix shape {m.shape} does not match dim {dim}")
    return DensityOperator(m)
