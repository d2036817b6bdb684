import json
import subprocess
import sys


from damplab.cli import doubling, main
from damplab.config import parse_config
from damplab.runner import run

SMALL_RES = {"kind": "resolvent-sweep", "q": [16, 32, 64], "grid": {"n_min": 256}}
SMALL_DECAY = {"kind": "decay-run", "T": 40, "data": {"k": [2]}, "grid": {"n": 64}}


def _listing(path):
    return sorted(p.name for p in path.iterdir())


def test_resolvent_file_contract(tmp_path):
    m = run(parse_config(json.dumps(SMALL_RES)), jobs=1, out=tmp_path)
    assert {"points.csv", "fit.json", "norm_vs_q.svg", "manifest.json"} <= set(m.files)
    assert _listing(tmp_path) == m.files
    head = (tmp_path / "points.csv").read_text().splitlines()[0]
    assert head == "q,E,k,beta,sigma,variant,n,scheme,norm,method,residual"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config_hash"] == parse_config(json.dumps(SMALL_RES)).config_hash()
    assert man["passed"] == m.passed and set(man["checks"]) == set(m.checks)
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["reference_exponent"] == 0.5 and "grid_doubling_change" in fit


def test_decay_file_contract(tmp_path):
    m = run(parse_config(json.dumps(SMALL_DECAY)), jobs=1, out=tmp_path)
    assert {"energy.csv", "fit.json", "energy_vs_t.svg", "manifest.json"} <= set(m.files)
    assert _listing(tmp_path) == m.files
    assert (tmp_path / "energy.csv").read_text().startswith("t,energy,energy_sqrt_times_t_alpha\n")


def test_lemmas_and_esmall(tmp_path):
    cfg = parse_config('{"kind": "lemma-certify", "q": [16, 32, 64], "cases": ["1", "4"]}')
    m = run(cfg, jobs=1, out=tmp_path / "l")
    assert (tmp_path / "l" / "checks.csv").read_text().startswith("lemma,q,E,beta,case,lhs,rhs,ratio,pass\n")
    assert m.checks["wu_roundoff_exact"]
    e = run(parse_config('{"kind": "esmall-probe", "q": [16, 32, 64]}'), jobs=1, out=tmp_path / "e")
    fit = json.loads((tmp_path / "e" / "fit.json").read_text())
    assert set(fit["uniform"]) == {"E=0", "E=0.1", "E=0.25"}
    assert "uniform_bound_at_E=0" in e.checks


def test_determinism_across_job_counts(tmp_path):
    cfg = parse_config(json.dumps(SMALL_RES))
    run(cfg, jobs=1, out=tmp_path / "a")
    run(cfg, jobs=3, out=tmp_path / "b")
    for name in ("points.csv", "modes.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rerun_clears_previous_outputs(tmp_path):
    run(parse_config(json.dumps(SMALL_RES)), jobs=1, out=tmp_path)
    m = run(parse_config(json.dumps(SMALL_DECAY)), jobs=1, out=tmp_path)
    assert _listing(tmp_path) == m.files


def test_worker_failure_is_aggregated(tmp_path):
    # q below the 2-d minimum makes every worker raise; the run still writes a manifest
    cfg = parse_config('{"kind": "resolvent-sweep", "q": [2, 3]}')
    m = run(cfg, jobs=1, out=tmp_path)
    assert not m.passed and len(m.errors) == 2 and not m.checks["no_worker_failures"]
    assert "manifest.json" in _listing(tmp_path)


def test_doubling():
    assert doubling(16, 1024) == [16, 32, 64, 128, 256, 512, 1024]
    assert doubling(16, 100) == [16, 32, 64]


def test_cli_overrides_and_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"T": 40, "data": {"k": [1]}, "grid": {"n": 64}}))
    code = main(["decay", "--config", str(cfg), "--beta", "1", "--out", str(tmp_path / "o"), "--jobs", "1"])
    out = capsys.readouterr().out
    assert code == (0 if "FAIL" not in out else 1)
    saved = json.loads((tmp_path / "o" / "config.json").read_text())
    assert saved["beta"] == 1.0 and saved["kind"] == "decay-run"


def test_cli_q_range_and_bad_config(tmp_path, capsys):
    code = main(["esmall", "--q-min", "16", "--q-max", "64", "--out", str(tmp_path / "e"), "--jobs", "1"])
    saved = json.loads((tmp_path / "e" / "config.json").read_text())
    assert saved["q"] == [16.0, 32.0, 64.0] and code in (0, 1)
    bad = tmp_path / "bad.json"
    bad.write_text('{"sigma": 3.5}')
    assert main(["resolvent", "--config", str(bad)]) == 2
    assert "sigma out of (0, π)" in capsys.readouterr().err
    bad.write_text('{"kind": "decay-run"}')
    assert main(["resolvent", "--config", str(bad)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "damplab", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "resolvent" in r.stdout
