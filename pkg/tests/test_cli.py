import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from testspaces import make_classical, make_fig1, make_process
from testspaces.boxes import signalling_box
from testspaces.cli import main
from testspaces.core import write_space
from testspaces.definetti import Mixture, generate_exchangeable, generate_prefix
from testspaces.documents import joint_to_doc, mixture_to_doc
from testspaces.statespace import State, vertices


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out)


@pytest.fixture
def fig1_file(tmp_path):
    p = tmp_path / "fig1.space.json"
    p.write_text(write_space(make_fig1()))
    return p


@pytest.fixture
def fig1_mixture():
    fig = make_fig1()
    verts = vertices(fig)
    return Mixture(fig, ((0.3, verts[0]), (0.7, verts[-1])))


def dump(path, doc):
    path.write_text(json.dumps(doc))
    return path


# -- validate / dim / frame / greechie ----------------------------------------

def test_validate_fig1(capsys, fig1_file):
    code, out, _ = run(capsys, "validate", fig1_file)
    assert code == 0
    assert out.strip() == "valid: 7 outcomes, 3 tests"


def test_validate_reports_violations(capsys, tmp_path):
    p = dump(tmp_path / "bad.json", {"outcomes": ["a", "b"], "tests": [["a"]]})
    code, out, _ = run(capsys, "validate", p)
    assert code == 1
    assert "outcome b not covered by any test" in out
    code, doc = run_json(capsys, "validate", p)
    assert code == 1 and doc["valid"] is False


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("{not json", "malformed JSON"),
        ('{"outcomes": ["a", "a"], "tests": [["a"]]}', "duplicate"),
        ('{"outcomes": ["a"], "tests": [["z"]]}', "'z'"),
        ('{"outcomes": ["a"]}', "tests"),
    ],
)
def test_parse_errors_exit_two(capsys, tmp_path, text, fragment):
    p = tmp_path / "broken.json"
    p.write_text(text)
    code, _, err = run(capsys, "validate", p)
    assert code == 2
    assert fragment in err


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, err = run(capsys, "dim", tmp_path / "nope.json")
    assert code == 2 and "cannot read" in err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-verb"])
    assert exc.value.code == 2


@pytest.mark.parametrize(
    "space, d", [(make_fig1(), 5), (make_process(3, 3), 7), (make_classical(4), 4)]
)
def test_dim(capsys, tmp_path, space, d):
    p = tmp_path / "s.json"
    p.write_text(write_space(space))
    code, out, _ = run(capsys, "dim", p)
    assert code == 0 and out.strip() == f"dimension: {d}"
    assert run_json(capsys, "dim", p) == (0, {"dimension": d})


def test_frame_json(capsys, fig1_file):
    code, doc = run_json(capsys, "frame", fig1_file)
    assert code == 0
    assert doc["d"] == 5 and len(doc["members"]) == 5
    total = np.sum([m for m in doc["members"]], axis=0)
    for v in vertices(make_fig1()):
        assert abs(total @ v.probs - 1) <= 1e-9
    code, out, _ = run(capsys, "frame", fig1_file)
    assert out.splitlines()[0].startswith("d = 5")


def test_greechie_stdout_and_file(capsys, fig1_file, tmp_path):
    code, out, _ = run(capsys, "greechie", fig1_file)
    assert code == 0 and out.startswith("graph greechie {")
    target = tmp_path / "fig1.dot"
    code, out2, _ = run(capsys, "greechie", fig1_file, "-o", target)
    assert code == 0 and out2 == "" and target.read_text() == out


# -- check-ns ------------------------------------------------------------------

def test_check_ns_signalling_names_split(capsys, tmp_path):
    p = dump(tmp_path / "signalling.json", joint_to_doc(signalling_box()))
    code, out, _ = run(capsys, "check-ns", p)
    assert code == 1
    assert "systems {2} affected by test choice on system {1}" in out
    code, doc = run_json(capsys, "check-ns", p)
    assert code == 1 and doc["passed"] is False
    splits = {(tuple(v["source"]), tuple(v["affected"])) for v in doc["violations"]}
    assert splits == {((1,), (2,))}


def test_check_ns_passes_on_exchangeable(capsys, tmp_path, fig1_mixture):
    p = dump(tmp_path / "j.json", joint_to_doc(generate_exchangeable(fig1_mixture, 2)))
    code, out, _ = run(capsys, "check-ns", p)
    assert code == 0 and out.startswith("nonsignalling: pass")


def test_check_ns_space_by_reference(capsys, tmp_path):
    (tmp_path / "cl.json").write_text(write_space(make_classical(2)))
    doc = {"factors": ["cl.json", "cl.json"], "tensor": [0.5, 0, 0, 0.5]}
    code, _, _ = run(capsys, "check-ns", dump(tmp_path / "j.json", doc))
    assert code == 0


def test_check_ns_bad_tensor(capsys, tmp_path):
    doc = joint_to_doc(signalling_box())
    doc["tensor"] = doc["tensor"][:-1]
    code, _, err = run(capsys, "check-ns", dump(tmp_path / "j.json", doc))
    assert code == 2 and "/tensor" in err


# -- check-exchangeable --------------------------------------------------------

def test_check_exchangeable_prefix(capsys, tmp_path, fig1_mixture):
    files = []
    for k, js in enumerate(generate_prefix(fig1_mixture, 3), start=1):
        files.append(dump(tmp_path / f"w{k}.json", joint_to_doc(js)))
    code, out, _ = run(capsys, "check-exchangeable", *files)
    assert code == 0 and "prefix-consistent" in out


def test_check_exchangeable_marginal_mismatch(capsys, tmp_path):
    c2 = make_classical(2)
    a = Mixture(c2, ((0.4, State(c2, [0.9, 0.1])), (0.6, State(c2, [0.2, 0.8]))))
    w1, w2, w3 = generate_prefix(a, 3)
    t = w2.tensor.copy()
    t[0, 0] += 0.05
    t /= t.sum()
    bad = joint_to_doc(w2)
    bad["tensor"] = t.reshape(-1).tolist()
    files = [
        dump(tmp_path / "w1.json", joint_to_doc(w1)),
        dump(tmp_path / "w2.json", bad),
        dump(tmp_path / "w3.json", joint_to_doc(w3)),
    ]
    code, out, _ = run(capsys, "check-exchangeable", *files)
    assert code == 1
    assert "exchangeability clause 3 (marginal consistency): marginal mismatch 2.5e-02 at n=1" in out
    assert "exchangeability clause 3 (marginal consistency): marginal mismatch 3.1e-02 at n=2" in out
    code, doc = run_json(capsys, "check-exchangeable", *files)
    assert code == 1 and doc["passed"] is False


# -- recover -------------------------------------------------------------------

def test_recover_joint_n3(capsys, tmp_path, fig1_mixture):
    p = dump(tmp_path / "joint.json", joint_to_doc(generate_exchangeable(fig1_mixture, 3)))
    code, out, _ = run(capsys, "recover", p, "--n", 3)
    assert code == 0
    residual = float(out.splitlines()[0].split(":")[1])
    assert residual <= 1e-7
    code, doc = run_json(capsys, "recover", p, "--n", 3)
    assert code == 0 and doc["residual"] <= 1e-7
    if doc["unique"]:
        weights = sorted(c["weight"] for c in doc["components"])
        np.testing.assert_allclose(weights, [0.3, 0.7], atol=1e-5)


def test_recover_from_mixture_file(capsys, tmp_path, fig1_mixture):
    p = dump(tmp_path / "mix.json", mixture_to_doc(fig1_mixture))
    code, doc = run_json(capsys, "recover", p, "--n", 2)
    assert code == 0 and doc["residual"] <= 1e-7
    code, _, err = run(capsys, "recover", p)
    assert code == 2 and "--n" in err


def test_recover_with_support_file(capsys, tmp_path):
    c2 = make_classical(2)
    s = State(c2, [0.25, 0.75])
    p = dump(tmp_path / "mix.json", mixture_to_doc(Mixture(c2, ((1.0, s),))))
    sup = dump(tmp_path / "support.json", {"states": [[0.25, 0.75]]})
    code, doc = run_json(capsys, "recover", p, "--n", 3, "--support", sup)
    assert code == 0 and doc["unique"] is True
    assert len(doc["components"]) == 1
    np.testing.assert_allclose(doc["components"][0]["probs"], [0.25, 0.75], atol=1e-9)


def test_recover_rejects_non_symmetric(capsys, tmp_path):
    c2 = make_classical(2)
    doc = {"factors": [json.loads(write_space(c2))] * 2, "tensor": [0.2, 0.3, 0.1, 0.4]}
    code, out, _ = run(capsys, "recover", dump(tmp_path / "j.json", doc))
    assert code == 1 and "clause 1" in out


# -- posterior -----------------------------------------------------------------

def test_posterior(capsys, tmp_path):
    c2 = make_classical(2)
    mix = Mixture(c2, ((0.5, State(c2, [0.8, 0.2])), (0.5, State(c2, [0.3, 0.7]))))
    m = dump(tmp_path / "mix.json", mixture_to_doc(mix))
    obs = dump(tmp_path / "obs.json", {"observations": [{"test": 0, "outcome": "x1"}] * 2})
    code, doc = run_json(capsys, "posterior", m, obs)
    assert code == 0
    w = [c["weight"] for c in doc["components"]]
    np.testing.assert_allclose(w, [0.64 / 0.73, 0.09 / 0.73], atol=1e-12)


def test_posterior_errors(capsys, tmp_path):
    c2 = make_classical(2)
    mix = Mixture(c2, ((1.0, State(c2, [1.0, 0.0])),))
    m = dump(tmp_path / "mix.json", mixture_to_doc(mix))
    impossible = dump(tmp_path / "o1.json", {"observations": [{"test": 0, "outcome": "x2"}]})
    assert run(capsys, "posterior", m, impossible)[0] == 1
    unknown = dump(tmp_path / "o2.json", {"observations": [{"test": 0, "outcome": "q"}]})
    assert run(capsys, "posterior", m, unknown)[0] == 2
    bad_test = dump(tmp_path / "o3.json", {"observations": [{"test": 5, "outcome": "x1"}]})
    assert run(capsys, "posterior", m, bad_test)[0] == 2


# -- demos and output agreement --------------------------------------------------

@pytest.mark.parametrize("name", ["pr-box", "fig1", "rebit"])
def test_demos_pass_and_agree(capsys, name):
    code, out, _ = run(capsys, "demo", name)
    assert code == 0 and out
    jcode, doc = run_json(capsys, "demo", name)
    assert jcode == code and doc["passed"] is True


def test_demo_rebit_four_and_odd(capsys):
    code, doc = run_json(capsys, "demo", "rebit", "--n", 4, "--grid", 8)
    assert code == 0 and abs(doc["correlator"] - 1) <= 1e-9
    code, _, err = run(capsys, "demo", "rebit", "--n", 3)
    assert code == 2 and "even" in err


def test_console_script(fig1_file):
    exe = shutil.which("testspaces")
    cmd = [exe] if exe else [sys.executable, "-m", "testspaces.cli"]
    proc = subprocess.run(cmd + ["validate", str(fig1_file)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "valid: 7 outcomes, 3 tests"
