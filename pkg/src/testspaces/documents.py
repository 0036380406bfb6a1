"""JSON documents for states, joint states and mixtures.

Wherever a test space is expected, a document may hold either the space
object itself or a path to a space file, resolved relative to the file that
refers to it.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .composite import JointState, ProductSpace
from .core import TestSpace, space_from_doc, space_to_doc
from .definetti import Mixture
from .errors import SpaceParseError
from .statespace import State

__all__ = [
    "load_json",
    "resolve_space",
    "state_to_doc",
    "state_from_doc",
    "joint_to_doc",
    "joint_from_doc",
    "mixture_to_doc",
    "mixture_from_doc",
]


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpaceParseError(f"cannot read file: {exc.strerror}", str(path))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceParseError(
            f"malformed JSON: {exc.msg}", f"{path}: line {exc.lineno} column {exc.colno}"
        )


def resolve_space(ref, base: Path | None = None, location: str = "") -> TestSpace:
    if isinstance(ref, str):
        path = Path(ref)
        if base is not None and not path.is_absolute():
            path = base / path
        return space_from_doc(load_json(path), str(path))
    return space_from_doc(ref, location)


def _floats(values, location) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise SpaceParseError("expected an array of numbers", location)
    if arr.ndim != 1:
        raise SpaceParseError("expected a flat array of numbers", location)
    return arr


def state_to_doc(state: State) -> dict:
    return {"space": space_to_doc(state.space), "probs": state.probs.tolist()}


def state_from_doc(doc, base: Path | None = None) -> State:
    if not isinstance(doc, dict) or "space" not in doc or "probs" not in doc:
        raise SpaceParseError("state document needs 'space' and 'probs'", "/")
    space = resolve_space(doc["space"], base, "/space")
    try:
        return State(space, _floats(doc["probs"], "/probs"))
    except ValueError as exc:
        raise SpaceParseError(str(exc), "/probs")


def joint_to_doc(js: JointState) -> dict:
    return {
        "factors": [space_to_doc(f) for f in js.product.factors],
        "tensor": js.tensor.reshape(-1).tolist(),
    }


def joint_from_doc(doc, base: Path | None = None) -> JointState:
    if not isinstance(doc, dict) or "factors" not in doc or "tensor" not in doc:
        raise SpaceParseError("joint-state document needs 'factors' and 'tensor'", "/")
    factors = tuple(
        resolve_space(f, base, f"/factors/{i}") for i, f in enumerate(doc["factors"])
    )
    if not factors:
        raise SpaceParseError("at least one factor is required", "/factors")
    try:
        return JointState(ProductSpace(factors), _floats(doc["tensor"], "/tensor"))
    except ValueError as exc:
        raise SpaceParseError(str(exc), "/tensor")


def mixture_to_doc(mixture: Mixture) -> dict:
    return {
        "space": space_to_doc(mixture.space),
        "components": [
            {"weight": w, "probs": s.probs.tolist()} for w, s in mixture.components
        ],
    }


def mixture_from_doc(doc, base: Path | None = None) -> Mixture:
    if not isinstance(doc, dict) or "space" not in doc or "components" not in doc:
        raise SpaceParseError("mixture document needs 'space' and 'components'", "/")
    space = resolve_space(doc["space"], base, "/space")
    comps = []
    for i, c in enumerate(doc["components"]):
        loc = f"/components/{i}"
        if not isinstance(c, dict) or "weight" not in c or "probs" not in c:
            raise SpaceParseError("component needs 'weight' and 'probs'", loc)
        try:
            comps.append((float(c["weight"]), State(space, _floats(c["probs"], loc + "/probs"))))
        except ValueError as exc:
            raise SpaceParseError(str(exc), loc)
    try:
        return Mixture(space, tuple(comps))
    except ValueError as exc:
        raise SpaceParseError(str(exc), "/components")
