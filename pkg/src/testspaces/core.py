"""Finite test spaces: construction, validation, JSON I/O and Greechie diagrams.

A test space is a set of outcomes ``E`` together with a covering family of
tests ``S``; each test is a set of mutually exclusive, exhaustive outcomes.
Outcomes are addressed by their position in ``TestSpace.outcomes`` and tests
are tuples of those positions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidSpace, SpaceParseError

__all__ = [
    "TestSpace",
    "OutcomeRef",
    "validate",
    "make_classical",
    "make_process",
    "make_fig1",
    "export_greechie",
    "read_space",
    "write_space",
    "space_from_doc",
    "space_to_doc",
]


@dataclass(frozen=True)
class TestSpace:
    """Outcome labels plus tests given as index tuples.

    Construction does not enforce validity, so that :func:`validate` can
    report on broken inputs; use :meth:`checked` for a validated instance.
    """

    __test__ = False  # keep pytest from collecting this class

    outcomes: tuple[str, ...]
    tests: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(str(o) for o in self.outcomes))
        object.__setattr__(
            self, "tests", tuple(tuple(int(i) for i in t) for t in self.tests)
        )

    @classmethod
    def from_labels(cls, outcomes: Sequence[str], tests: Iterable[Iterable[str]]):
        index = {label: i for i, label in enumerate(outcomes)}
        try:
            idx_tests = [tuple(index[label] for label in t) for t in tests]
        except KeyError as exc:
            raise InvalidSpace([f"unknown outcome label {exc.args[0]!r} in a test"])
        return cls(tuple(outcomes), tuple(idx_tests)).checked()

    def checked(self) -> "TestSpace":
        problems = validate(self)
        if problems:
            raise InvalidSpace(problems)
        return self

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    @property
    def n_tests(self) -> int:
        return len(self.tests)

    def index(self, label: str) -> int:
        return self.outcomes.index(label)

    def incidence(self) -> np.ndarray:
        """Test-by-outcome 0/1 matrix; row ``j`` is the indicator of test ``j``."""
        m = np.zeros((self.n_tests, self.n_outcomes))
        for j, t in enumerate(self.tests):
            m[j, list(t)] = 1.0
        return m

    def tests_containing(self, e: int) -> list[int]:
        return [j for j, t in enumerate(self.tests) if e in t]

    def __str__(self):
        tests = ", ".join(
            "{" + ",".join(self.outcomes[i] for i in t) + "}" for t in self.tests
        )
        return "({" + ",".join(self.outcomes) + "}, {" + tests + "})"


@dataclass(frozen=True)
class OutcomeRef:
    space: TestSpace
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.space.n_outcomes:
            raise IndexError(
                f"outcome index {self.index} out of range for "
                f"{self.space.n_outcomes} outcomes"
            )

    @property
    def label(self) -> str:
        return self.space.outcomes[self.index]


def validate(space: TestSpace) -> list[str]:
    """Return every invariant violation of ``space``; empty when valid."""
    problems = []
    seen = {}
    for i, label in enumerate(space.outcomes):
        if label in seen:
            problems.append(
                f"duplicate outcome label {label!r} at positions {seen[label]} and {i}"
            )
        else:
            seen[label] = i
    if not space.tests:
        problems.append("no tests")
    n = space.n_outcomes
    covered = set()
    for j, t in enumerate(space.tests):
        if not t:
            problems.append(f"test {j} is empty")
        if len(set(t)) != len(t):
            problems.append(f"test {j} repeats an outcome")
        bad = [i for i in t if not 0 <= i < n]
        if bad:
            problems.append(f"test {j} refers to outcome indices out of range: {bad}")
        covered.update(i for i in t if 0 <= i < n)
    for i in range(n):
        if i not in covered:
            problems.append(f"outcome {space.outcomes[i]} not covered by any test")
    return problems


def make_classical(d: int) -> TestSpace:
    """A single test with outcomes ``x1..xd``."""
    if d < 1:
        raise ValueError("classical test space needs at least one outcome")
    labels = tuple(f"x{i}" for i in range(1, d + 1))
    return TestSpace(labels, (tuple(range(d)),))


def make_process(d: int, k: int) -> TestSpace:
    """Test space of a classical process with ``k`` inputs and ``d`` outputs.

    Outcome ``(x, y)`` means input ``y`` was chosen and output ``x`` seen; it
    is labelled ``"x|y"`` and stored at position ``(y - 1) * d + (x - 1)``.
    Test ``y - 1`` collects every output for input ``y``.
    """
    if d < 1 or k < 1:
        raise ValueError("process test space needs d >= 1 and k >= 1")
    labels = tuple(f"{x}|{y}" for y in range(1, k + 1) for x in range(1, d + 1))
    tests = tuple(tuple(range(y * d, (y + 1) * d)) for y in range(k))
    return TestSpace(labels, tests)


def make_fig1() -> TestSpace:
    """The seven-outcome, three-test example space with overlapping tests."""
    return TestSpace.from_labels(
        list("abcdefg"), [list("abcd"), list("aeg"), list("bef")]
    )


# -- Greechie diagrams ------------------------------------------------------

_PALETTE = (
    "red", "blue", "darkgreen", "orange", "purple", "brown",
    "magenta", "cyan", "olive", "navy", "teal", "maroon",
)


def _test_color(j: int) -> str:
    if j < len(_PALETTE):
        return _PALETTE[j]
    # deterministic fallback beyond the named palette
    hue = (j * 0.618033988749895) % 1.0
    return f"{hue:.3f} 0.850 0.800"


def _quote(s: str) -> str:
    return '"{}"'.format(s.replace("\\", "\\\\").replace('"', r"\""))


def export_greechie(space: TestSpace) -> str:
    """Render ``space`` as an undirected DOT graph.

    Each outcome is a node; each test becomes a chain of edges through its
    outcomes (in the order listed) drawn in its own colour.
    """
    space.checked()
    lines = ["graph greechie {", "  node [shape=circle];"]
    for label in space.outcomes:
        lines.append(f"  {_quote(label)};")
    for j, test in enumerate(space.tests):
        color = _test_color(j)
        for a, b in zip(test, test[1:]):
            lines.append(
                "  {} -- {} [color={}, penwidth=2, label={}];".format(
                    _quote(space.outcomes[a]),
                    _quote(space.outcomes[b]),
                    _quote(color),
                    _quote(f"s{j + 1}"),
                )
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- JSON documents ---------------------------------------------------------

def space_to_doc(space: TestSpace) -> dict:
    return {
        "outcomes": list(space.outcomes),
        "tests": [[space.outcomes[i] for i in t] for t in space.tests],
    }


def space_from_doc(doc, location: str = "", check: bool = True) -> TestSpace:
    """Build a space from its JSON object; ``check=False`` skips the
    cover/emptiness invariants so that :func:`validate` can report them."""
    if not isinstance(doc, dict):
        raise SpaceParseError("test space must be a JSON object", location or "/")
    for key in ("outcomes", "tests"):
        if key not in doc:
            raise SpaceParseError(f"missing key {key!r}", location or "/")
    outcomes = doc["outcomes"]
    tests = doc["tests"]
    if not isinstance(outcomes, list) or not all(isinstance(o, str) for o in outcomes):
        raise SpaceParseError("'outcomes' must be an array of strings", f"{location}/outcomes")
    index = {}
    for i, label in enumerate(outcomes):
        if label in index:
            raise SpaceParseError(
                f"duplicate outcome label {label!r}", f"{location}/outcomes/{i}"
            )
        index[label] = i
    if not isinstance(tests, list):
        raise SpaceParseError("'tests' must be an array of arrays", f"{location}/tests")
    idx_tests = []
    for j, t in enumerate(tests):
        if not isinstance(t, list):
            raise SpaceParseError("each test must be an array of strings", f"{location}/tests/{j}")
        members = []
        for m, label in enumerate(t):
            if label not in index:
                raise SpaceParseError(
                    f"unknown outcome {label!r} in test", f"{location}/tests/{j}/{m}"
                )
            members.append(index[label])
        idx_tests.append(tuple(members))
    space = TestSpace(tuple(outcomes), tuple(idx_tests))
    problems = validate(space) if check else []
    if problems:
        raise SpaceParseError("; ".join(problems), location or "/")
    return space


def read_space(text: str, check: bool = True) -> TestSpace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceParseError(f"malformed JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}")
    return space_from_doc(doc, check=check)


def write_space(space: TestSpace) -> str:
    return json.dumps(space_to_doc(space), indent=2) + "\n"
