import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from feedaudit.cli import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, load_schema, main


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_identical_policies_pass(tmp_path, capsys):
    code, out, _ = run(["audit", "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdict"] == "PASS"
    jsonschema.validate(report, load_schema("report"))


def test_far_filter_exits_one(tmp_path, capsys):
    cfg = write(tmp_path, """
seed = 17
[audit]
m = 30
alpha = 0.01
[filter]
kind = "parametric"
theta = [3.0, 1.0]
[baseline]
kind = "parametric"
theta = [0.0, 1.0]
""")
    code, out, _ = run(["audit", "--config", cfg, "--out-dir", str(tmp_path / "o")], capsys)
    assert code == EXIT_FAIL
    assert json.loads(out)["verdict"] == "FAIL"
    rows = list(csv.DictReader((tmp_path / "o" / "results.csv").open()))
    assert rows[0]["verdict"] == "FAIL"
    assert list(rows[0]) == ["input_id", "shuffle_bit", "theta_prime_0", "theta_prime_1", "theta_dprime_0",
                             "theta_dprime_1", "stat_prime", "stat_dprime", "tau", "verdict", "flags"]


def test_missing_binary_exits_two(tmp_path, capsys):
    cfg = write(tmp_path, """
[filter]
kind = "subprocess"
command = ["/no/such/platform-binary"]
""")
    code, _, err = run(["audit", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_ERROR
    payload = json.loads(err)
    assert payload["error"]["type"] == "source-error"
    assert payload["error"]["source"] == "filter"


def test_subprocess_black_box_via_config(tmp_path, capsys):
    family = json.dumps({"id": "gaussian-mean-var"})
    source = json.dumps({"kind": "parametric", "theta": [0.0, 1.0]})
    cfg = write(tmp_path, f"""
[audit]
n = 4
alpha = 0.001
[filter]
kind = "subprocess"
command = [{json.dumps(sys.executable)}, "-m", "feedaudit.blackbox", "--family", {json.dumps(family)},
           "--source", {json.dumps(source)}, "--seed", "0"]
""")
    code, _, err = run(["audit", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code in (EXIT_PASS, EXIT_FAIL), err
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["results"]) == 4
    assert report["config"]["filter_source"] == "filter"


@pytest.mark.parametrize("text, needle", [
    ("colour = 'red'\n", "colour"),
    ("[audit]\nalpha = 2.0\n", "audit/alpha"),
    ("[audit]\nwindow = 3\n", "window"),
    ("[filter]\nkind = 'parametric'\n", "theta"),
    ("[family]\nid = 'poisson'\n", "family"),
    ("this is not toml", "TOML"),
])
def test_bad_configs_exit_two(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    code, _, err = run(["audit", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_ERROR
    payload = json.loads(err)
    assert payload["error"]["type"] == "config-error"
    assert needle in payload["error"]["message"]


def test_domain_errors_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, "[filter]\nkind = 'parametric'\ntheta = [0.0, -1.0]\n")
    code, _, err = run(["audit", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_ERROR
    assert "error" in json.loads(err)


def test_usage_errors_are_machine_readable(capsys):
    code, _, err = run(["explode"], capsys)
    assert code == EXIT_ERROR
    assert json.loads(err)["error"]["type"] == "usage-error"
    code, _, err = run(["audit", "--config", "/nonexistent.toml"], capsys)
    assert code == EXIT_ERROR
    assert "not found" in json.loads(err)["error"]["message"]


def test_flags_override_file(tmp_path, capsys):
    cfg = write(tmp_path, "seed = 3\nformat = 'csv'\n[audit]\nn = 2\n")
    run(["audit", "--config", cfg, "--seed", "8", "--format", "json", "--out-dir", str(tmp_path)], capsys)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["seed"] == 8
    assert (tmp_path / "results.json").exists()
    assert not (tmp_path / "results.csv").exists()


def test_audit_csv_byte_identical_across_jobs(tmp_path, capsys):
    cfg = write(tmp_path, """
seed = 5
[audit]
n = 25
alpha = 0.001
[filter]
kind = "parametric"
theta = [0.4, 1.3]
""")
    outs = []
    for jobs, sub in [(1, "a"), (1, "b"), (4, "c")]:
        run(["audit", "--config", cfg, "--jobs", str(jobs), "--out-dir", str(tmp_path / sub)], capsys)
        outs.append((tmp_path / sub / "results.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_heatmap_default_grid_rows(tmp_path, capsys):
    code, out, _ = run(["heatmap", "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    rows = list(csv.DictReader((tmp_path / "heatmap.csv").open()))
    assert len(rows) == 19 * 31
    summary = json.loads((tmp_path / "heatmap_summary.json").read_text())
    assert summary["shape"] == [19, 31]
    jsonschema.validate(summary, load_schema("summary"))


def test_heatmap_csv_identical_across_jobs(tmp_path, capsys):
    cfg = write(tmp_path, """
[heatmap]
mu = {start = -0.4, stop = 0.4, step = 0.2}
sigma2 = [0.8, 1.0, 1.2]
trials = 300
""")
    blobs = []
    for jobs in (1, 3):
        out = tmp_path / f"j{jobs}"
        run(["heatmap", "--config", cfg, "--jobs", str(jobs), "--out-dir", str(out)], capsys)
        blobs.append((out / "heatmap.csv").read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[0].count(b"\n") == 1 + 3 * 5


def test_fpr_command_summary(tmp_path, capsys):
    cfg = write(tmp_path, "[fpr]\nm_values = [1000]\ntrials = 10000\nalpha = 0.01\n")
    code, _, _ = run(["fpr", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    summary = json.loads((tmp_path / "fpr_summary.json").read_text())
    assert summary["max_fpr"] <= 0.02
    jsonschema.validate(summary, load_schema("summary"))


def test_prop2_default(tmp_path, capsys):
    code, _, _ = run(["prop2", "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    summary = json.loads((tmp_path / "prop2_summary.json").read_text())
    assert summary["status"] == "ok"
    assert summary["measured_cost"] <= 0.01
    jsonschema.validate(summary, load_schema("summary"))


def test_cost_command(tmp_path, capsys):
    cfg = write(tmp_path, """
[cost]
revenue = {peak_distance = 5.0}
mu = {start = 0.0, stop = 5.0, step = 0.5}
sigma2 = [0.8, 1.0, 1.4]
trials = 300
""")
    code, _, _ = run(["cost", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    summary = json.loads((tmp_path / "cost_summary.json").read_text())
    assert summary["cost"] > 0
    rows = list(csv.DictReader((tmp_path / "cost.csv").open()))
    assert len(rows) == 33


def test_validate_family_command(tmp_path, capsys):
    cfg = write(tmp_path, "[family]\nid = 'bernoulli'\n")
    code, _, _ = run(["validate-family", "--config", cfg, "--out-dir", str(tmp_path)], capsys)
    assert code == EXIT_PASS
    rows = {r["condition"]: r for r in csv.DictReader((tmp_path / "validate_family.csv").open())}
    assert rows["fisher-positive-definite"]["passed"] == "False"
    assert json.loads(rows["fisher-positive-definite"]["witness"]) == [0.0]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "feedaudit", "validate-family", "--out-dir", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"] is True
