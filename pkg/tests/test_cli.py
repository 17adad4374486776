"""The `css` command line tool: subcommands, exit codes, output files."""

import csv
import json

import numpy as np
import pytest

from cssel.cli import EXIT_INVALID, EXIT_OK, EXIT_SOLVER, build_parser, main
from cssel.oracle import (
    ideal_risk,
    min_weighted_risk,
    proxy_noise_variance,
    vote_splitting_interval,
)


def write_xy(tmp_path, seed=0, n=40, p=4, header=True):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = 2.0 * X[:, 0] + 0.5 * rng.standard_normal(n)
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    with open(xp, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j}" for j in range(p)])
        w.writerows(X.tolist())
    with open(yp, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["y"])
        w.writerows([[v] for v in y.tolist()])
    return xp, yp, X, y


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_parser_requires_subcommand_and_flags():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args([])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--x", "x.csv"])  # missing --y/--out
    with pytest.raises(SystemExit):
        build_parser().parse_args(
            ["run", "--x", "a", "--y", "b", "--out", "o", "--tau", "0.5", "--top", "2"]
        )


def test_run_writes_result_files(tmp_path, monkeypatch):
    monkeypatch.delenv("CSS_SEED", raising=False)
    xp, yp, _, _ = write_xy(tmp_path)
    out = tmp_path / "out"
    code = run_cli(
        "run", "--x", xp, "--y", yp, "--out", out,
        "--lambda", "0.25", "--B", "4", "--tau", "0.5",
    )
    assert code == EXIT_OK
    with open(out / "css_result.json") as fh:
        doc = json.load(fh)
    assert doc["B"] == 4 and doc["seed"] == 0 and doc["scheme"] == "weighted"
    assert doc["columns"] == [0, 1, 2, 3]
    assert doc["selection"]["mode"] == "tau"
    assert 0 in [c[0] for c in doc["clusters"] if c]  # singleton layout
    with open(out / "css_result.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["feature", "cluster", "pi_hat", "theta_hat", "weight"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3"]


def test_run_top_selection_block(tmp_path):
    xp, yp, _, _ = write_xy(tmp_path, seed=1)
    out = tmp_path / "out"
    code = run_cli(
        "run", "--x", xp, "--y", yp, "--out", out,
        "--lambda", "0.25", "--B", "4", "--top", "1", "--seed", "3",
    )
    assert code == EXIT_OK
    with open(out / "css_result.json") as fh:
        doc = json.load(fh)
    sel = doc["selection"]
    assert sel["mode"] == "top" and sel["s"] == 1
    assert sel["defined"] is True
    assert sel["clusters"] == [0]  # the real signal wins


def test_run_auto_cluster_merges_near_duplicates(tmp_path):
    rng = np.random.default_rng(2)
    n = 60
    z = rng.standard_normal(n)
    X = np.column_stack(
        [z + 0.05 * rng.standard_normal(n), z + 0.05 * rng.standard_normal(n),
         rng.standard_normal(n)]
    )
    y = z + 0.3 * rng.standard_normal(n)
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    np.savetxt(xp, X, delimiter=",")
    np.savetxt(yp, y[:, None], delimiter=",")
    out = tmp_path / "out"
    code = run_cli(
        "run", "--x", xp, "--y", yp, "--out", out,
        "--auto-cluster", "--cutoff", "0.3", "--lambda", "0.2", "--B", "4",
        "--seed", "0",
    )
    assert code == EXIT_OK
    with open(out / "css_result.json") as fh:
        doc = json.load(fh)
    assert [0, 1] in doc["clusters"]


def test_run_with_clusters_file_reports_original_indexes(tmp_path):
    xp, yp, _, _ = write_xy(tmp_path, seed=3, p=4)
    cj = tmp_path / "clusters.json"
    cj.write_text(
        json.dumps({"clusters": [[0, 1], [3]], "screened_columns": [2]})
    )
    out = tmp_path / "out"
    code = run_cli(
        "run", "--x", xp, "--y", yp, "--out", out, "--clusters", cj,
        "--lambda", "0.25", "--B", "4", "--seed", "0",
    )
    assert code == EXIT_OK
    with open(out / "css_result.json") as fh:
        doc = json.load(fh)
    assert doc["columns"] == [0, 1, 3]  # screened column 2 dropped
    assert doc["clusters"] == [[0, 1], [3]]
    with open(out / "css_result.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["0", "1", "3"]


def test_exit_code_2_on_invalid_input(tmp_path, capsys):
    missing = run_cli(
        "run", "--x", tmp_path / "nope.csv", "--y", tmp_path / "nope2.csv",
        "--out", tmp_path / "o",
    )
    assert missing == EXIT_INVALID
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n1\noops\n")
    yp = tmp_path / "y.csv"
    yp.write_text("y\n1\n2\n")
    assert run_cli("run", "--x", bad, "--y", yp, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "non-numeric value" in err
    xp, yp, _, _ = write_xy(tmp_path, seed=4)
    assert (
        run_cli(
            "run", "--x", xp, "--y", yp, "--out", tmp_path / "o",
            "--lambda", "0.2", "--B", "2", "--tau", "1.5",
        )
        == EXIT_INVALID
    )


def test_exit_code_3_on_solver_failure(tmp_path, capsys):
    xp, yp, X, _ = write_xy(tmp_path, seed=5)
    Xz = X.copy()
    Xz[:, 2] = 0.0  # zero norm on every half sample
    np.savetxt(xp, Xz, delimiter=",")
    code = run_cli(
        "run", "--x", xp, "--y", yp, "--out", tmp_path / "o",
        "--lambda", "0.2", "--B", "2", "--seed", "0",
    )
    assert code == EXIT_SOLVER
    err = capsys.readouterr().err
    assert "solver failure" in err and "pair 0" in err


def test_css_seed_env_var_sets_the_default(tmp_path, monkeypatch):
    xp, yp, _, _ = write_xy(tmp_path, seed=6)
    out_env, out_flag = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv("CSS_SEED", "7")
    assert run_cli(
        "run", "--x", xp, "--y", yp, "--out", out_env,
        "--lambda", "0.25", "--B", "4",
    ) == EXIT_OK
    monkeypatch.delenv("CSS_SEED")
    assert run_cli(
        "run", "--x", xp, "--y", yp, "--out", out_flag,
        "--lambda", "0.25", "--B", "4", "--seed", "7",
    ) == EXIT_OK
    env_bytes = (out_env / "css_result.json").read_bytes()
    assert env_bytes == (out_flag / "css_result.json").read_bytes()
    assert json.loads(env_bytes)["seed"] == 7
    monkeypatch.setenv("CSS_SEED", "many")
    assert run_cli(
        "run", "--x", xp, "--y", yp, "--out", tmp_path / "o",
        "--lambda", "0.25", "--B", "2",
    ) == EXIT_INVALID


def test_threads_leave_outputs_byte_identical(tmp_path):
    xp, yp, _, _ = write_xy(tmp_path, seed=8, n=50, p=5)
    one, four = tmp_path / "one", tmp_path / "four"
    for out, threads in ((one, "1"), (four, "4")):
        assert run_cli(
            "run", "--x", xp, "--y", yp, "--out", out,
            "--B", "6", "--seed", "2", "--threads", threads,
        ) == EXIT_OK
    assert (one / "css_result.json").read_bytes() == (
        four / "css_result.json"
    ).read_bytes()
    assert (one / "css_result.csv").read_bytes() == (
        four / "css_result.csv"
    ).read_bytes()


def test_cluster_output_feeds_back_into_run(tmp_path):
    rng = np.random.default_rng(9)
    n = 80
    z = rng.standard_normal(n)
    X = np.column_stack(
        [z + 0.1 * rng.standard_normal(n), z + 0.1 * rng.standard_normal(n),
         rng.standard_normal(n), rng.standard_normal(n)]
    )
    y = z + 0.3 * rng.standard_normal(n)
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    np.savetxt(xp, X, delimiter=",")
    np.savetxt(yp, y[:, None], delimiter=",")
    cj = tmp_path / "clusters.json"
    assert run_cli("cluster", "--x", xp, "--cutoff", "0.4", "--out", cj) == EXIT_OK
    with open(cj) as fh:
        doc = json.load(fh)
    assert [0, 1] in doc["clusters"]
    out = tmp_path / "out"
    assert run_cli(
        "run", "--x", xp, "--y", yp, "--out", out, "--clusters", cj,
        "--lambda", "0.2", "--B", "4", "--seed", "0",
    ) == EXIT_OK


def test_cluster_stdout_and_binary_screen(tmp_path, capsys):
    M = np.zeros((60, 3))
    M[:30, 0] = 1.0
    M[:30, 1] = 1.0  # duplicate of column 0
    M[0, 2] = 1.0  # frequency 1/60, screened at 5%
    xp = tmp_path / "m.csv"
    np.savetxt(xp, M, delimiter=",", fmt="%d")
    assert run_cli(
        "cluster", "--x", xp, "--binary", "--maf", "0.05", "--cutoff", "0.5"
    ) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["clusters"] == [[0, 1]]
    assert doc["screened_columns"] == [2]
    assert run_cli("cluster", "--x", xp, "--maf", "0.05") == EXIT_INVALID
    err = capsys.readouterr().err
    assert "--maf requires --binary" in err
    # without the screen, the rare column is constant after centering check
    const = tmp_path / "c.csv"
    np.savetxt(const, np.column_stack([M[:, 0], np.full(60, 2.0)]), delimiter=",")
    assert run_cli("cluster", "--x", const) == EXIT_INVALID
    assert "constant column" in capsys.readouterr().err


def test_oracle_prints_closed_forms(tmp_path, capsys):
    assert run_cli(
        "oracle", "--n", "5000", "--beta-z", "2.0",
        "--sigma-zeta-sq", "0.1,0.2", "--betas", "1.0",
    ) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["proxy_noise_variance"] == proxy_noise_variance(5000)
    assert doc["vote_splitting_interval"] == list(vote_splitting_interval(5000, 1.0))
    from cssel.oracle import ProxyModelParams

    params = ProxyModelParams(
        n=5000, q=2, p=3, beta_Z=2.0, betas=(1.0,),
        sigma_zeta_sq=(0.1, 0.2), sigma_eps_sq=1.0,
    )
    assert doc["ideal_risk"] == ideal_risk(params)
    assert doc["min_weighted_risk"] == min_weighted_risk(params)
    assert len(doc["single_feature_risks"]) == 3
    assert run_cli("oracle", "--n", "1") == EXIT_INVALID


def test_simulate_writes_study_reports(tmp_path, capsys):
    out = tmp_path / "sparse"
    assert run_cli(
        "simulate", "--study", "sparse", "--reps", "1", "--seed", "5",
        "--test-n", "200", "--out", out,
    ) == EXIT_OK
    assert (out / "report.csv").exists() and (out / "summary.json").exists()
    assert "rep 1/1 done" in capsys.readouterr().err
    t31 = tmp_path / "t31"
    assert run_cli(
        "simulate", "--study", "theorem31", "--reps", "2", "--seed", "5",
        "--out", t31,
    ) == EXIT_OK
    assert (t31 / "entrants.csv").exists()
    with open(t31 / "summary.json") as fh:
        assert json.load(fh)["reps"] == 2
