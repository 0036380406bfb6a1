"""Acceptance criteria 1 to 9.

Every criterion prints a single ``criterion N: PASS|FAIL ...`` line.  Under
pytest the lines are collected into a summary section at the end of the run;
``python3 tests/test_acceptance.py`` prints them directly.
"""
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import vertices_by_active_sets  # noqa: E402

from testspaces import (  # noqa: E402
    JointState,
    Mixture,
    SignallingState,
    SpanVector,
    State,
    build_frame,
    certify_support,
    check_exchangeable,
    condition_on_prefix,
    dimension,
    direct_product,
    generate_exchangeable,
    generate_prefix,
    induced_classical,
    make_classical,
    make_fig1,
    make_process,
    marginal,
    posterior_update,
    power,
    predictive,
    product,
    random_state,
    recover_mixture,
    tensor_coordinates,
    tensor_reconstruct,
    vertices,
)
from testspaces.boxes import signalling_box  # noqa: E402
from testspaces.quantum import (  # noqa: E402
    DensityOperator,
    embed_local,
    local_state,
    partial_trace,
    pauli_test,
    rebit_counterexample,
)
from testspaces.statespace import _geometry  # noqa: E402

SEED = 42

BUILTIN = (
    [(f"classical({d})", make_classical(d)) for d in range(1, 6)]
    + [(f"process({d},{k})", make_process(d, k)) for d in range(1, 4) for k in range(1, 4)]
    + [("fig1", make_fig1())]
)


def expected_dimension(name):
    if name.startswith("classical"):
        return int(name[10:-1])
    if name.startswith("process"):
        d, k = (int(x) for x in name[8:-1].split(","))
        return k * (d - 1) + 1
    return 5


def verdict(number, passed, detail):
    return f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def report(record, number, passed, detail):
    line = verdict(number, passed, detail)
    record(line)
    print(line)
    assert passed, line


# -- 1 ---------------------------------------------------------------------

def criterion_1():
    build_frame.cache_clear()
    _geometry.cache_clear()
    start = time.perf_counter()
    worst = 0.0
    failures = []
    for name, space in BUILTIN:
        frame = build_frame(space)
        verts = np.array(vertices_by_active_sets(space))
        values = verts @ frame.matrix.T
        rank_oracle = np.linalg.matrix_rank(verts)
        independent = np.linalg.matrix_rank(values) == frame.d
        sums = np.abs(values.sum(axis=1) - 1).max()
        low = max(0.0, -values.min())
        high = max(0.0, values.max() - 1)
        worst = max(worst, sums, low, high)
        ok = (
            frame.d == dimension(space) == rank_oracle == expected_dimension(name)
            and independent
            and sums <= 1e-9
            and low <= 1e-9
            and high <= 1e-9
        )
        if not ok:
            failures.append(name)
    elapsed = time.perf_counter() - start
    passed = not failures and elapsed < 5.0
    detail = f"{len(BUILTIN)} spaces, worst violation {worst:.1e}, {elapsed:.2f}s"
    if failures:
        detail += f", failing: {', '.join(failures)}"
    return passed, detail


# -- 2 ---------------------------------------------------------------------

def products():
    out = [(f"{name}^2", power(space, 2)) for name, space in BUILTIN]
    out.append(("fig1^3", power(make_fig1(), 3)))
    out.append(
        ("classical(3) x process(2,2) x fig1",
         product(make_classical(3), make_process(2, 2), make_fig1()))
    )
    return out


def random_nonsignalling(prod, rng, verts):
    k = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    tensor = np.zeros(prod.shape)
    for wk in w:
        comps = [random_state(f, rng, v) for f, v in zip(prod.factors, verts)]
        tensor += wk * direct_product(comps).tensor
    return JointState(prod, tensor)


def criterion_2():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    count = 0
    for _, prod in products():
        verts = [vertices(f) for f in prod.factors]
        frames = [build_frame(f) for f in prod.factors]
        for _ in range(50):
            js = random_nonsignalling(prod, rng, verts)
            coords = tensor_coordinates(frames, js)
            back = tensor_reconstruct(frames, coords, prod)
            worst = max(worst, float(np.max(np.abs(back - js.tensor))))
            count += 1
    return worst <= 1e-9, f"{count} states on {len(products())} products, max error {worst:.1e}"


# -- 3 ---------------------------------------------------------------------

ROUND_TRIP_SPACES = [
    make_fig1(), make_process(2, 2), make_classical(3), make_process(3, 2), make_process(2, 3),
]


def criterion_3():
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst_exch = worst_res = worst_weight = 0.0
    unique_runs = runs = 0
    for i in range(20):
        space = ROUND_TRIP_SPACES[i % len(ROUND_TRIP_SPACES)]
        verts = vertices(space)
        k = int(rng.integers(1, min(3, len(verts)) + 1))
        picks = rng.choice(len(verts), size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        planted = Mixture(space, tuple((float(a), verts[j]) for a, j in zip(w, picks)))
        prefix = generate_prefix(planted, 4)
        rep = check_exchangeable(prefix)
        worst_exch = max(worst_exch, rep.worst if rep.passed else math.inf)
        for n in (2, 3, 4):
            res = recover_mixture(prefix[n - 1])
            runs += 1
            worst_res = max(worst_res, res.residual)
            if res.unique:
                unique_runs += 1
                got = np.zeros(len(verts))
                for wk, s in res.mixture.components:
                    idx = [j for j, v in enumerate(verts) if v.allclose(s)]
                    if not idx:  # a component off the vertex set cannot match
                        got[:] = math.inf
                        break
                    got[idx[0]] += wk
                want = np.zeros(len(verts))
                want[picks] = w
                worst_weight = max(worst_weight, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - start
    passed = worst_exch <= 1e-10 and worst_res <= 1e-7 and worst_weight <= 1e-5 and elapsed < 60
    return passed, (
        f"20 mixtures x n=2..4: exchangeable worst {worst_exch:.1e}, residual {worst_res:.1e}, "
        f"weight error {worst_weight:.1e} over {unique_runs}/{runs} unique fits, {elapsed:.2f}s"
    )


# -- 4 ---------------------------------------------------------------------

def criterion_4():
    rng = np.random.default_rng(SEED)
    c3 = make_classical(3)
    frame = build_frame(c3)
    indicator = np.allclose(frame.matrix, np.eye(3), atol=1e-12)
    worst = 0.0
    for n in (1, 2, 3):
        t = rng.dirichlet(np.ones(3**n)).reshape((3,) * n)
        js = JointState(power(c3, n), t)
        worst = max(worst, float(np.max(np.abs(induced_classical(frame, js).table - t))))
    t = np.zeros((3, 3, 3))
    t[0, 0, 0] = t[1, 1, 1] = 0.5
    res = recover_mixture(JointState(power(c3, 3), t))
    comps = sorted(res.mixture.components, key=lambda c: -c[1].probs[0])
    two_points = (
        len(comps) == 2
        and comps[0][1].allclose(State(c3, [1, 0, 0]))
        and comps[1][1].allclose(State(c3, [0, 1, 0]))
        and all(abs(w - 0.5) <= 1e-6 for w, _ in comps)
    )
    passed = indicator and worst <= 1e-12 and two_points
    weights = ", ".join(f"{w:.9f}" for w, _ in comps)
    return passed, (
        f"indicator frame {indicator}, identity error {worst:.1e}, "
        f"recovered {len(comps)} point masses with weights [{weights}]"
    )


# -- 5 ---------------------------------------------------------------------

def criterion_5():
    c2 = make_classical(2)
    comps = [(0.1, SpanVector(c2, [-0.25, 1.25])), (0.9, State(c2, [0.5, 0.5]))]
    values = []
    worst = 0.0
    for n in range(12, 31, 2):
        cert = certify_support(comps, 0, (0, 1), n)
        exact = Fraction(1, 10) * Fraction(5, 4) ** n + Fraction(9, 10) * Fraction(1, 2) ** n
        worst = max(worst, abs(cert.value - float(exact)))
        values.append(cert.value)
    monotone = all(b > a for a, b in zip(values, values[1:]))
    passed = values[0] > 1 and monotone and worst <= 1e-12
    return passed, (
        f"value {values[0]:.6f} at n=12, {values[-1]:.6f} at n=30, monotone {monotone}, "
        f"arithmetic error {worst:.1e}"
    )


# -- 6 ---------------------------------------------------------------------

POSTERIOR_SPACES = [make_classical(2), make_classical(3), make_process(2, 2), make_fig1()]


def criterion_6():
    rng = np.random.default_rng(SEED)
    batch_gap = pred_gap = 0.0
    for i in range(20):
        space = POSTERIOR_SPACES[i % len(POSTERIOR_SPACES)]
        verts = vertices(space)
        k = int(rng.integers(2, 5))
        w = rng.dirichlet(np.ones(k))
        mix = Mixture(space, tuple((float(a), random_state(space, rng, verts)) for a in w))
        m = int(rng.integers(1, 4))
        obs = []
        for _ in range(m):
            test = int(rng.integers(space.n_tests))
            outcome = int(rng.choice(space.tests[test]))
            obs.append((test, outcome))
        batch = posterior_update(mix, obs)
        seq = mix
        for o in obs:
            seq = posterior_update(seq, [o])
        batch_gap = max(batch_gap, float(np.max(np.abs(batch.weights - seq.weights))))
        direct = condition_on_prefix(generate_exchangeable(mix, m + 1), obs)
        pred_gap = max(pred_gap, float(np.max(np.abs(predictive(batch).probs - direct.probs))))
    passed = batch_gap <= 1e-12 and pred_gap <= 1e-10
    return passed, (
        f"20 cases: batch vs sequential {batch_gap:.1e}, predictive vs conditioning {pred_gap:.1e}"
    )


# -- 7 ---------------------------------------------------------------------

def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m))


def criterion_7():
    rng = np.random.default_rng(SEED)
    tests = [pauli_test("x"), pauli_test("y"), pauli_test("z")]
    fact = comm = 0.0
    for _ in range(20):
        a, b = random_density(rng, 2), random_density(rng, 2)
        lhs = embed_local(a.tensor(b), tests).tensor
        rhs = direct_product([local_state(a, tests), local_state(b, tests)]).tensor
        fact = max(fact, float(np.max(np.abs(lhs - rhs))))
        rho = random_density(rng, 4)
        js = embed_local(rho, tests)
        for keep, drop in (([0], [1]), ([1], [0])):
            m = marginal(js, keep).tensor
            e = embed_local(partial_trace(rho, drop), tests).tensor
            comm = max(comm, float(np.max(np.abs(m - e))))
    passed = fact <= 1e-9 and comm <= 1e-9
    return passed, f"20 samples: factorization {fact:.1e}, partial trace vs marginal {comm:.1e}"


# -- 8 ---------------------------------------------------------------------

def criterion_8():
    start = time.perf_counter()
    rep = rebit_counterexample(2, 16)
    elapsed = time.perf_counter() - start
    passed = (
        abs(rep.correlator - 1.0) <= 1e-9
        and abs(rep.best_real_correlator) <= 1e-9
        and abs(rep.gap - 1.0) <= 1e-9
        and rep.recovered_maximally_mixed
        and rep.recovery_residual <= 1e-9
        and elapsed < 10
    )
    return passed, (
        f"correlator {rep.correlator:.12f}, best real {rep.best_real_correlator:.12f}, "
        f"recovery residual {rep.recovery_residual:.1e}, {elapsed:.2f}s"
    )


# -- 9 ---------------------------------------------------------------------

def criterion_9():
    sb = signalling_box()
    raised = None
    try:
        marginal(sb, [1])
    except SignallingState as exc:
        raised = exc
    affected_ok = raised is not None and raised.source == (0,) and raised.affected == (1,)
    try:
        m = marginal(sb, [0]).tensor
        unaffected_ok = bool(np.allclose(m, 0.5, atol=1e-12))
    except SignallingState:
        unaffected_ok = False
    passed = affected_ok and unaffected_ok
    mag = f"{raised.magnitude:.2f}" if raised is not None else "none"
    return passed, (
        f"marginal on system 2 raised {affected_ok} (deviation {mag}), "
        f"marginal on system 1 accepted {unaffected_ok}"
    )


CRITERIA = [
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9,
]


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number, acceptance_record):
    passed, detail = CRITERIA[number - 1]()
    report(acceptance_record, number, passed, detail)


if __name__ == "__main__":
    ok = True
    for number, check in enumerate(CRITERIA, start=1):
        passed, detail = check()
        ok &= passed
        print(verdict(number, passed, detail))
    sys.exit(0 if ok else 1)
