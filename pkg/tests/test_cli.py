import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from concurv.cli import COMMANDS, ExperimentReport, main, run

SPEC_OPS = {
    "build_graph", "shortest_path_metric", "product", "family", "find_hairs", "is_lipschitz",
    "enumerate_extremal_fields", "variance", "log_moment", "subgaussian_constant", "structure_checks",
    "odd_cycle_optimality", "tree_conjecture_search", "ball", "level_set", "iso_function",
    "caterpillar_counterexample", "tripod_examples", "midpoints_hat", "midpoints_tilde", "is_convex",
    "convex_closure", "iterated_midpoint_counterexample", "bm_curvature", "phi_injection_check",
    "wasserstein", "is_cyclically_monotone", "max_entropy_optimal_plan", "partition",
    "everybody_is_large_check", "interpolate", "entropy", "displacement_convexity_slack",
    "weak_curvature_bounds", "strong_convexity_characterization", "acyclic_optimal_transport",
    "tail_bound", "empirical_tail", "permutation_variance", "level_set_bounds", "sn_bounds_report",
    "expander_midpoints", "exact_midpoint_law", "mc_teleport_walk", "power_law_graph", "suite",
}

MU_A = '{"{1}": "1/2", "{2}": "1/2"}'
MU_B = '{"{3,4}": "1/2", "{1,3,4}": "1/2"}'

# one invocation per command; together they must reach every operation in the table
SAMPLES = {
    "sigma": [["sigma", "complete:2"], ["sigma", '{"n": 3, "edges": [[0, 1], [1, 2]]}'], ["sigma", "product:l1:complete=2,complete=2"]],
    "cvar": [["cvar", "cycle:5"]],
    "structure": [["structure", "path:4", "--t", "1"]],
    "iso": [["iso", "path:4", "--d", "1", "--set", "0", "--field", '{"0": 0, "1": 1, "2": 2, "3": 3}', "--r", "1"]],
    "counterexample": [
        ["counterexample", "caterpillar", "--k", "2"],
        ["counterexample", "tripod", "--k", "2"],
        ["counterexample", "iterated"],
    ],
    "midpoints": [["midpoints", "hypercube:3", "--a", "0", "--b", "7"], ["midpoints", "hypercube:3", "--a", "0", "--b", "3"]],
    "closure": [["closure", "hypercube:3", "--S", "1,2"]],
    "bm-scan": [["bm-scan", "hypercube:4", "--samples", "50"]],
    "phi": [["phi", "hypercube:4", "--S", "0,1", "--T", "14,15"]],
    "ot": [
        ["ot", "hypercube:4", "--muA", MU_A, "--muB", MU_B, "--max-entropy", "--forest"],
        ["ot", "hypercube:3", "--muA", '{"{}": 1}', "--muB", '{"{1,2}": "1/3", "{1,3}": "1/3", "{2,3}": "1/3"}'],
    ],
    "convexity-check": [["convexity-check", "hypercube:4", "--muA", MU_A, "--muB", MU_B]],
    "strong-convexity": [["strong-convexity", "cycle:6"]],
    "weak-curvature": [["weak-curvature", "hypercube:4", "--muA", MU_A, "--muB", MU_B]],
    "bounds": [
        ["bounds", "tail", "--space", "path:4", "--h", "1", "2"],
        ["bounds", "perm", "--n", "3"],
        ["bounds", "levels", "--n", "4", "--r", "0"],
        ["bounds", "sn", "--n", "3"],
    ],
    "expander": [["expander", "petersen", "--S", "0,1", "--T", "5,7"]],
    "geodesic-law": [
        ["geodesic-law", "cycle:6", "--mc", "--steps", "100000"],
        ["geodesic-law", "power_law:30:2.5:1"],
    ],
    "odd-cycle": [["odd-cycle", "--n", "5", "--tpoints", "40"]],
    "tree-search": [["tree-search", "--trials", "5", "--max-n", "6"]],
    "root-search": [["root-search", "path:4"]],
    "suite": [["suite", "paper-examples", "--only", "1"]],
}


def _called_names(argv):
    names = set()

    def prof(frame, event, arg):
        if event == "call":
            names.add(frame.f_code.co_name)

    sys.setprofile(prof)
    try:
        rep, code = run(argv)
    finally:
        sys.setprofile(None)
    return names, rep, code


def test_command_table_covers_every_operation():
    declared = set().union(*(ops for _, ops in COMMANDS.values()))
    assert SPEC_OPS - {"suite"} <= declared
    assert set(SAMPLES) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_declared_operations_are_reached(command, capsys):
    reached = set()
    for argv in SAMPLES[command]:
        names, rep, code = _called_names(argv)
        assert code in (0, 1), argv
        assert rep is not None
        reached |= names
    missing = [op for op in COMMANDS[command][1] if op != "suite" and op not in reached]
    assert not missing


def test_sigma_complete_2(capsys):
    rep, code = run(["sigma", "complete:2"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    val = out["quantities"]["sigma2"]["value"]
    assert abs(float(val) - 0.25) < 1e-6


def test_caterpillar_certificates(capsys):
    rep, code = run(["counterexample", "caterpillar", "--k", "4", "--n", "1"])
    assert code == 0
    for name, cert in rep.certificates.items():
        assert cert["anchor"]


@pytest.mark.parametrize(
    "argv",
    [["sigma", "badname"], ["nosuchcommand"], ["sigma", "missing_file.json"], ["bounds", "perm"], ["ot", "path:3", "--muA", "{bad", "--muB", "{}"]],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_certificate_failure_exits_1(capsys):
    assert main(["bounds", "perm", "--n", "5"]) == 1


def _strip_time(text):
    data = json.loads(text)
    data.pop("wall_time", None)
    return json.dumps(data, sort_keys=True)


@pytest.mark.parametrize(
    "argv",
    [
        ["bm-scan", "hypercube:4", "--samples", "40", "--seed", "5"],
        ["geodesic-law", "cycle:6", "--mc", "--steps", "100000", "--seed", "9"],
        ["tree-search", "--trials", "4", "--max-n", "6", "--seed", "2"],
    ],
)
def test_same_seed_same_report(argv, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(argv + ["--out", str(out)]) in (0, 1)
    first = out.read_text()
    assert main(argv + ["--out", str(out)]) in (0, 1)
    assert _strip_time(first) == _strip_time(out.read_text())


def test_different_seed_changes_random_output(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["geodesic-law", "cycle:6", "--mc", "--steps", "100000", "--seed", "1", "--out", str(a)])
    main(["geodesic-law", "cycle:6", "--mc", "--steps", "100000", "--seed", "2", "--out", str(b)])
    assert _strip_time(a.read_text()) != _strip_time(b.read_text())


@pytest.mark.parametrize("argv", [s[0] for s in SAMPLES.values()][:12])
def test_report_json_round_trip(argv, capsys):
    rep, _ = run(argv)
    text = rep.to_json()
    assert ExperimentReport.from_json(text).to_json() == text


def test_rationals_serialize_as_strings(capsys):
    rep, _ = run(["cvar", "cycle:5"])
    text = rep.to_json()
    assert '"14/25"' in text


def test_input_digests_present(tmp_path, capsys):
    f = tmp_path / "field.json"
    f.write_text(json.dumps({"0": 0, "1": 1, "2": 2, "3": 3}))
    rep, code = run(["structure", "path:4", str(f)])
    assert code == 0
    assert any(re.fullmatch(r"[0-9a-f]{64}", str(v)) for v in rep.inputs.values())


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "concurv", "sigma", "complete:2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["certificates"]
    proc = subprocess.run([sys.executable, "-m", "concurv", "sigma", "badname"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "Traceback" not in proc.stderr
