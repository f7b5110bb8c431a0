import json
import subprocess
import sys

import numpy as np
import pytest

from vako import cli, variation
from vako.flow import PhasePath

from clihelp import DATA, check_golden, run


def load_csv(path, n=3, k=2):
    return cli.read_csv(path, n, k)


def test_solve_ivp_heisenberg(tmp_path):
    out = tmp_path / "ivp.csv"
    code, stdout, _ = run("solve-ivp", DATA / "heisenberg.json", "--out", out)
    assert code == 0
    path = load_csv(out)
    assert np.allclose(path.q[-1], [1.0, 0.0, 0.0], atol=1e-9)
    assert json.loads(stdout)["steps"] == 200
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_solve_ivp_flags_override(tmp_path):
    out = tmp_path / "ivp.csv"
    code, _, _ = run("solve-ivp", DATA / "flat3_plane.json", "--q0", "1,1,1", "--p0", "0.5,0,-1",
                     "--steps", "20", "--out", out)
    assert code == 0
    path = load_csv(out, 3, 3)
    assert len(path) == 21 and np.allclose(path.p, [0.5, 0.0, -1.0])
    assert np.allclose(path.q[-1], [1.5, 1.0, 0.0])


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    path = PhasePath(np.linspace(0, 1, 6), rng.normal(size=(6, 3)), rng.normal(size=(6, 3)),
                     rng.normal(size=(6, 2)), rng.normal(size=6))
    f = tmp_path / "x.csv"
    cli.write_csv(f, path, 3, 2)
    back = load_csv(f)
    for a, b in ((path.q, back.q), (path.p, back.p), (path.u, back.u), (path.H, back.H)):
        assert np.array_equal(a, b)


def test_malformed_file_creates_no_output(tmp_path):
    out = tmp_path / "never.csv"
    code, stdout, stderr = run("solve-ivp", DATA / "malformed.json", "--out", out)
    assert code == 2 and not out.exists()
    assert json.loads(stdout)["error"] == "input" and "ivp/steps" in stderr


@pytest.mark.parametrize("args", [
    ("solve-ivp", DATA / "truncated.json"),
    ("solve-ivp", DATA / "does-not-exist.json"),
    ("solve-ivp", DATA / "heisenberg.json", "--q0", "1,2"),
    ("solve-ivp", DATA / "heisenberg.json", "--q0", "a,b,c"),
    ("solve-bvp", DATA / "quartic.json"),
    ("check-critical", DATA / "heisenberg.json", "--trajectory", DATA / "heisenberg.json"),
])
def test_input_errors(args):
    assert run(*args)[0] == 2


def test_unknown_builtin(tmp_path):
    f = tmp_path / "p.json"
    f.write_text('{"problem": {"builtin": "klein-bottle"}}')
    code, stdout, _ = run("legendre-check", f)
    assert code == 2 and "klein-bottle" in json.loads(stdout)["message"]


def test_bvp_dimension_mismatch(tmp_path):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"problem": {"builtin": "heisenberg"},
                             "bvp": {"P": {"whole": {}}, "Q": {"point": [0, 1]}}}))
    assert run("solve-bvp", f)[0] == 2


def test_solve_bvp_default(tmp_path):
    code, stdout, _ = run("solve-bvp", DATA / "heisenberg.json", "--out", tmp_path)
    assert code == 0
    sols = json.loads(stdout)["solutions"]
    assert len(sols) == 1 and sols[0]["action"] == pytest.approx(0.5, abs=1e-6)
    assert (tmp_path / "solutions.json").read_text() == stdout
    assert (tmp_path / "solution_000.csv").exists()


def test_solve_bvp_plane_to_point():
    code, stdout, _ = run("solve-bvp", DATA / "flat3_plane.json")
    sol = json.loads(stdout)["solutions"][0]
    assert code == 0 and max(sol["residuals"]) <= 1e-10
    assert np.allclose(sol["p0"], [0.0, 0.0, 1.0], atol=1e-10)


def test_no_solution_exit_code():
    code, stdout, _ = run("solve-bvp", DATA / "unreachable.json")
    assert code == 4 and json.loads(stdout)["best_residual"] == pytest.approx(1.0)


def test_check_critical_round_trip(tmp_path):
    assert run("solve-bvp", DATA / "martinet.json", "--out", tmp_path)[0] == 0
    traj = tmp_path / "solution_000.csv"
    code, stdout, _ = run("check-critical", DATA / "martinet.json", "--trajectory", traj)
    rep = json.loads(stdout)
    assert code == 0 and rep["first_variation_max"] <= 1e-4 and rep["el_residual_max"] <= 1e-4

    # hand-edit: bend the path by a horizontal-compatible field of amplitude 1e-2
    path = load_csv(traj)
    from vako import problems
    prob = problems.builtin("martinet").problem
    field = variation.variation_basis(prob, path.curve).fields[3]
    bent = PhasePath(path.times, path.q + 1e-2 * field, path.p, path.u, path.H)
    edited = tmp_path / "edited.csv"
    cli.write_csv(edited, bent, 3, 2)
    code, stdout, _ = run("check-critical", DATA / "martinet.json", "--trajectory", edited)
    assert code == 0 and json.loads(stdout)["first_variation_max"] >= 1e-3


def test_check_critical_non_horizontal(tmp_path):
    t = np.linspace(0, 1, 51)
    q = np.column_stack([0 * t, 0 * t, t])
    path = PhasePath(t, q, np.zeros_like(q), np.zeros((51, 2)), np.zeros(51))
    f = tmp_path / "vertical.csv"
    cli.write_csv(f, path, 3, 2)
    code, stdout, _ = run("check-critical", DATA / "heisenberg.json", "--trajectory", f)
    assert code == 3 and json.loads(stdout)["error"] == "NonHorizontal"


def test_check_critical_eps_range(tmp_path):
    assert run("check-critical", DATA / "heisenberg.json", "--trajectory", tmp_path / "x.csv",
               "--eps", "0.5")[0] == 2


def test_abnormal_commands(tmp_path):
    code, stdout, _ = run("abnormal", DATA / "martinet.json", "--line-probe")
    rep = json.loads(stdout)
    assert code == 0 and rep["verdict"] == "singular" and rep["basis_dimension"] == 1
    assert rep["oracle_agreement_angle"] <= 1e-3
    code, stdout, _ = run("abnormal", DATA / "flat3_plane.json", "--line-probe")
    assert code == 0 and json.loads(stdout)["verdict"] == "regular"
    run("solve-bvp", DATA / "heisenberg.json", "--out", tmp_path)
    code, stdout, _ = run("abnormal", DATA / "heisenberg.json", "--trajectory", tmp_path / "solution_000.csv")
    assert code == 0 and json.loads(stdout)["verdict"] == "regular"


def test_legendre_check():
    code, stdout, _ = run("legendre-check", DATA / "heisenberg.json", "--samples", "50")
    rep = json.loads(stdout)
    assert code == 0 and rep["samples"] == 50
    assert max(rep["involution_max_dev"], rep["mutual_inverse_max_dev"], rep["envelope_max_dev"]) <= 1e-7
    code, stdout, _ = run("legendre-check", DATA / "flat3_plane.json", "--samples", "50")
    assert json.loads(stdout)["involution_max_dev"] <= 1e-10


def test_legendre_check_non_hyper_regular():
    code, stdout, stderr = run("legendre-check", DATA / "quartic.json")
    assert code == 3 and json.loads(stdout)["error"] == "NotHyperRegular" and stderr


def test_inline_matches_builtin():
    a = json.loads(run("solve-bvp", DATA / "heisenberg_inline.json")[1])["solutions"][0]
    assert a["action"] == pytest.approx(1.0118576926637837, abs=1e-8)


def test_json_serializer():
    text = cli.dumps({"b": [1, 2.5, np.float64(0.1)], "a": np.array([1e-300, -0.0]), "c": None,
                      "d": float("nan"), "e": True})
    assert text == ('{"a": [1e-300, -0], "b": [1, 2.5, 0.10000000000000001], '
                    '"c": null, "d": null, "e": true}\n')


def test_threads_env_does_not_change_output(monkeypatch):
    base = run("solve-bvp", DATA / "flat3_plane.json")[1]
    monkeypatch.setenv("VAKO_THREADS", "2")
    assert run("solve-bvp", DATA / "flat3_plane.json")[1] == base


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "vako.cli", "legendre-check", str(DATA / "quartic.json")],
                         capture_output=True, text=True)
    assert res.returncode == 3


def test_golden_files(tmp_path):
    code, stdout, _ = run("solve-ivp", DATA / "heisenberg.json", "--out", tmp_path / "ivp.csv")
    assert code == 0
    check_golden("ivp_heisenberg.json", stdout)
    check_golden("ivp_heisenberg.csv", (tmp_path / "ivp.csv").read_bytes())
    code, stdout, _ = run("solve-bvp", DATA / "flat3_plane.json", "--out", tmp_path / "bvp")
    assert code == 0
    check_golden("bvp_flat3_plane.json", (tmp_path / "bvp" / "solutions.json").read_bytes())
    check_golden("bvp_flat3_plane_000.csv", (tmp_path / "bvp" / "solution_000.csv").read_bytes())
    code, stdout, _ = run("legendre-check", DATA / "heisenberg.json")
    check_golden("legendre_heisenberg.json", stdout)
    code, stdout, _ = run("abnormal", DATA / "martinet.json", "--line-probe")
    check_golden("abnormal_martinet.json", stdout)
