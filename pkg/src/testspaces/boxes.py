"""Two-party boxes on ``process(2, 2) x process(2, 2)``.

Inputs and outputs are 0-based bits here; outcome ``(output a, input x)``
of a process space sits at index ``2 * x + a``.
"""
from __future__ import annotations

import numpy as np

from .composite import JointState, power
from .core import make_process


def box(table) -> JointState:
    """Joint state from ``table[a, b, x, y] = P(a, b | x, y)``."""
    table = np.asarray(table, dtype=float)
    d, _, k, _ = table.shape
    space = make_process(d, k)
    t = np.zeros((d * k, d * k))
    for a in range(d):
        for b in range(d):
            for x in range(k):
                for y in range(k):
                    t[x * d + a, y * d + b] = table[a, b, x, y]
    return JointState(power(space, 2), t)


def pr_box() -> JointState:
    """``P(ab|xy) = 1/2`` when ``a xor b == x and y``."""
    table = np.zeros((2, 2, 2, 2))
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        if a ^ b == x & y:
            table[a, b, x, y] = 0.5
    return box(table)


def signalling_box() -> JointState:
    """System 2 outputs system 1's input; system 1 outputs a fair coin."""
    table = np.zeros((2, 2, 2, 2))
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        if b == x:
            table[a, b, x, y] = 0.5
    return box(table)


def local_deterministic_box(fa, fb) -> JointState:
    """Product of deterministic responses ``a = fa[x]`` and ``b = fb[y]``."""
    table = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            table[fa[x], fb[y], x, y] = 1.0
    return box(table)
