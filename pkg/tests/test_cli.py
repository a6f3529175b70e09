import json
import os

from pavlov_cycle.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# thresholds


def test_thresholds_h_table(capsys):
    code, out, _ = run_cli(capsys, "thresholds", "--series", "h", "--quiet")
    assert code == 0
    rows = dict()
    lines = out.strip().splitlines()
    assert lines[0] == "ell,root,bound"
    for line in lines[1:]:
        ell, root, bound = line.split(",")
        rows[int(ell)] = (root, bound)
    assert rows[1] == ("none", "none")
    assert {ell: float(b) for ell, (_, b) in rows.items() if b != "none"} == {
        4: 0.897,
        5: 0.877,
        6: 0.871,
        7: 0.870,
        8: 0.869,
    }


def test_thresholds_f_table(capsys):
    code, out, _ = run_cli(capsys, "thresholds", "--series", "f", "--lmax", "7", "--quiet")
    assert code == 0
    bounds = {}
    for line in out.strip().splitlines()[1:]:
        ell, root, bound = line.split(",")
        if bound != "none":
            bounds[int(ell)] = float(bound)
    assert bounds == {3: 0.689, 4: 0.805, 5: 0.850, 6: 0.865, 7: 0.869}


# ---------------------------------------------------------------------------
# weights


def test_weights_feasible_writes_table(capsys, tmp_path):
    out_path = str(tmp_path / "table.csv")
    code, out, _ = run_cli(
        capsys, "weights", "--p", "0.9", "--strategy", "rp", "--out", out_path, "--quiet"
    )
    assert code == 0
    assert "feasible=True" in out
    lines = open(out_path).read().splitlines()
    assert lines[0] == "ell,w_hat,w,margin"
    assert len(lines) == 101  # n defaults to 100


def test_weights_infeasible_exits_2(capsys):
    code, _, err = run_cli(capsys, "weights", "--p", "0.5", "--strategy", "rp", "--quiet")
    assert code == 2
    assert "infeasible" in err


def test_weights_srp_near_its_threshold(capsys):
    code, out, _ = run_cli(capsys, "weights", "--p", "0.70", "--strategy", "srp", "--quiet")
    assert code == 0
    assert "feasible=True" in out


# ---------------------------------------------------------------------------
# simulate


def test_simulate_already_absorbed(capsys):
    code, out, _ = run_cli(
        capsys, "simulate", "--n", "10", "--p", "1", "--init", "all-cooperate", "--quiet"
    )
    assert code == 0
    assert "outcome=all_plus steps=0" in out


def test_simulate_deterministic(capsys):
    args = ("simulate", "--n", "30", "--p", "0.8", "--strategy", "rp", "--seed", "5", "--quiet")
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_simulate_trace_file(capsys, tmp_path):
    trace = str(tmp_path / "trace.csv")
    code, out, _ = run_cli(
        capsys,
        "simulate", "--n", "20", "--p", "0.9", "--seed", "3",
        "--trace", trace, "--trace-every", "50", "--quiet",
    )
    assert code == 0
    lines = open(trace).read().splitlines()
    assert lines[0] == "step,minus_count,coop_fraction,minus_runs,plus_runs,longest_minus,longest_plus"
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "20"
    last = lines[-1].split(",")
    assert "outcome=all_plus" in out
    assert last[1] == "0"


def test_simulate_bad_init(capsys):
    code, _, err = run_cli(capsys, "simulate", "--n", "10", "--init", "zebra", "--quiet")
    assert code == 1
    assert "unknown init" in err


def test_config_echo_on_stderr(capsys):
    code, _, err = run_cli(capsys, "simulate", "--n", "10", "--init", "all-cooperate")
    assert code == 0
    echoed = json.loads(err.strip().splitlines()[0])
    assert echoed["command"] == "simulate"
    assert echoed["n"] == 10
    assert echoed["max_steps"] == 43_000_000  # default spelled out


# ---------------------------------------------------------------------------
# sweep


def _write_config(tmp_path, **overrides):
    cfg = {
        "strategy": "rp",
        "n_list": [20],
        "p_list": [0.3, 1.0],
        "reps": 4,
        "max_steps": 4000,
        "master_seed": 7,
        "init": "all-defect",
    }
    cfg.update(overrides)
    path = str(tmp_path / "config.json")
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return path


def test_sweep_outputs(capsys, tmp_path):
    cfg = _write_config(tmp_path)
    out_dir = str(tmp_path / "out")
    code, out, _ = run_cli(capsys, "sweep", "--config", cfg, "--out-dir", out_dir, "--quiet")
    assert code == 0
    for name in ("records.csv", "summary.csv", "charts.svg", "resolved_config.json"):
        assert os.path.exists(os.path.join(out_dir, name)), name
    resolved = json.load(open(os.path.join(out_dir, "resolved_config.json")))
    assert resolved["master_seed"] == 7
    assert resolved["init"] == "all-defect"
    records = open(os.path.join(out_dir, "records.csv")).read().splitlines()
    assert len(records) == 1 + 2 * 4


def test_sweep_reruns_byte_identical(capsys, tmp_path):
    cfg = _write_config(tmp_path)
    d1, d2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert run_cli(capsys, "sweep", "--config", cfg, "--out-dir", d1, "--quiet")[0] == 0
    assert run_cli(capsys, "sweep", "--config", cfg, "--out-dir", d2, "--threads", "2", "--quiet")[0] == 0
    for name in ("records.csv", "summary.csv", "charts.svg"):
        a = open(os.path.join(d1, name), "rb").read()
        b = open(os.path.join(d2, name), "rb").read()
        assert a == b, name


def test_sweep_unknown_key(capsys, tmp_path):
    cfg = _write_config(tmp_path, typo_key=1)
    code, _, err = run_cli(capsys, "sweep", "--config", cfg, "--out-dir", str(tmp_path / "x"), "--quiet")
    assert code == 1
    assert "typo_key" in err


def test_sweep_missing_config_file(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "sweep", "--config", str(tmp_path / "none.json"), "--out-dir", str(tmp_path / "x"), "--quiet"
    )
    assert code == 1


# ---------------------------------------------------------------------------
# meanfield and defect-time


def test_meanfield_writes_trajectory(capsys, tmp_path):
    out = str(tmp_path / "traj.csv")
    code, text, _ = run_cli(
        capsys, "meanfield", "--p", "0.02", "--tau-end", "2", "--L", "16",
        "--out", out, "--csv-cols", "4", "--quiet",
    )
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "tau,P_0,P_1,P_2,P_3,P_4,sum_tail"
    assert "max_tail_sum=" in text


def test_meanfield_rejects_big_dt(capsys):
    code, _, err = run_cli(capsys, "meanfield", "--p", "0.02", "--dt", "0.5", "--quiet")
    assert code == 1


def test_defect_time_output(capsys):
    code, out, _ = run_cli(capsys, "defect-time", "--n", "30", "--reps", "20", "--seed", "1", "--quiet")
    assert code == 0
    assert "expected=435.0" in out  # 30*29/2


# ---------------------------------------------------------------------------
# front-end behaviour


def test_usage_error_exit_1(capsys):
    code, _, err = run_cli(capsys, "simulate")  # --n missing
    assert code == 1


def test_unknown_command_exit_1(capsys):
    assert run_cli(capsys, "frobnicate")[0] == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main(["simulate", "--help"]) == 0


def test_help_documents_defaults(capsys):
    main(["weights", "--help"])
    out = capsys.readouterr().out
    assert "1e-4" in out  # omega default
    main(["meanfield", "--help"])
    out = capsys.readouterr().out
    assert "1e-3" in out and "64" in out
    main(["simulate", "--help"])
    out = capsys.readouterr().out
    assert "43000000" in out


def test_trace_and_meanfield_outputs_byte_identical(capsys, tmp_path):
    t1, t2 = str(tmp_path / "t1.csv"), str(tmp_path / "t2.csv")
    for t in (t1, t2):
        assert run_cli(
            capsys, "simulate", "--n", "25", "--p", "0.85", "--seed", "9",
            "--trace", t, "--trace-every", "100", "--quiet",
        )[0] == 0
    assert open(t1, "rb").read() == open(t2, "rb").read()

    m1, m2 = str(tmp_path / "m1.csv"), str(tmp_path / "m2.csv")
    for m in (m1, m2):
        assert run_cli(
            capsys, "meanfield", "--p", "0.02", "--tau-end", "1", "--L", "16",
            "--out", m, "--quiet",
        )[0] == 0
    assert open(m1, "rb").read() == open(m2, "rb").read()
