import json

import pytest

from bruckrate import cli


# --- counterfunction DSL ---


@pytest.mark.parametrize("text,at,value", [
    ("const 5", 99, 5),
    ("id", 7, 7),
    ("affine 2 10", 3, 16),
    ("pow 2", 7, 49),
])
def test_dsl_semantics(text, at, value):
    assert cli.parse_counterfunction(text).build()(at) == value


@pytest.mark.parametrize("text", ["const 5", "id", "affine 2 10", "pow 3"])
def test_dsl_roundtrip(text):
    expr = cli.parse_counterfunction(text)
    assert cli.parse_counterfunction(expr.print()) == expr
    assert expr.print() == text


def test_dsl_table(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("3 1 4 1 5\n")
    expr = cli.parse_counterfunction(f"table {p}")
    g = expr.build()
    assert [g(0), g(1), g(4), g(9)] == [3, 1, 5, 5]
    assert cli.parse_counterfunction(expr.print()) == expr


def test_dsl_errors_carry_position(tmp_path):
    with pytest.raises(cli.ConfigError, match="token 1"):
        cli.parse_counterfunction("const x")
    with pytest.raises(cli.ConfigError, match="position 2"):
        cli.parse_counterfunction("affine 2")
    with pytest.raises(cli.ConfigError, match="unknown form"):
        cli.parse_counterfunction("cube 2")
    with pytest.raises(cli.ConfigError, match="trailing"):
        cli.parse_counterfunction("id 4")
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(cli.ConfigError, match="empty table"):
        cli.parse_counterfunction(f"table {empty}").build()


# --- subcommands ---


def test_bound_matches_library_oracle(tmp_path, capsys):
    rc = cli.main([
        "bound", "--functional", "phi", "--family", "synthetic",
        "--eps", "8", "--M", "1", "--g", "const 0",
    ])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    expected = 2 * (11 * 2**161 - 10 + 4)
    assert out["bound"]["exact"] == str(expected)
    assert out["psi_count"]["exact"] == "161"


def test_bound_psi_functional(capsys):
    rc = cli.main(["bound", "--functional", "psi", "--family", "synthetic",
                   "--eps", "1", "--D", "1", "--g", "const 0"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bound"]["exact"] == "17"


def test_bound_delta_needs_omega(capsys):
    rc = cli.main(["bound", "--functional", "delta", "--family", "synthetic",
                   "--eps", "24", "--M", "1", "--g", "const 0"])
    assert rc == 2  # configuration error: no omega
    rc = cli.main(["bound", "--functional", "delta", "--family", "synthetic",
                   "--eps", "24", "--M", "1", "--g", "const 0",
                   "--omega-lipschitz", "2"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["b"]["exact"] == "2"


def test_moduli_audit_exit_codes(capsys):
    rc = cli.main(["moduli", "--family", "ex2", "--audit", "--nmax", "6",
                   "--eps", "1/2"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    cond = out["audit"]["conditions"]["iii_delta_lower"]
    assert cond["status"] == "pass"
    assert cond["min_margin"] >= 0.5  # comfortably above the 1/2 target at n >= 3


def test_iterate_row_count_and_roundtrip(tmp_path):
    out = tmp_path / "traj.csv"
    rc = cli.main([
        "iterate", "--op", "cubic_decay", "--x1", "0.9", "--z", "0.5",
        "--family", "ex1", "--p", "0.5", "--q", "0.25",
        "--steps", "1000", "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 1002  # header + 1001 iterates
    assert lines[0] == "n,lambda,theta,x_0"
    # 17-significant-digit output reproduces the floats bitwise
    n, lam, th, x0 = lines[500].split(",")
    assert float(x0) == float("%.17g" % float(x0))
    # re-running produces an identical file
    out2 = tmp_path / "traj2.csv"
    cli.main([
        "iterate", "--op", "cubic_decay", "--x1", "0.9", "--z", "0.5",
        "--family", "ex1", "--p", "0.5", "--q", "0.25",
        "--steps", "1000", "--out", str(out2),
    ])
    assert out.read_text() == out2.read_text()


def test_path_csv(tmp_path):
    out = tmp_path / "path.csv"
    rc = cli.main([
        "path", "--op", "cubic_decay", "--thetas", "1,0.5", "--z", "0.5",
        "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "i,theta,y_0,residual,iters"
    assert len(lines) == 3
    y1 = float(lines[1].split(",")[2])
    assert abs(y1 - 0.42385379900) < 1e-6


def test_verify_single_scenario(tmp_path, capsys):
    rc = cli.main([
        "verify", "--family", "ex1", "--p", "0.5", "--q", "0.25",
        "--op", "cubic_decay", "--preds", "path_tracking", "--eps", "1/20",
        "--x1", "0.9", "--z", "0.5",
    ])
    reports = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert reports[0]["status"] == "pass"
    assert reports[0]["witness"] == 48
    assert reports[0]["bound_comparison"]["comparison"] == "le_by_estimate"


def test_verify_config_file_and_overrides(tmp_path, capsys):
    cfg = {
        "operator": {"kind": "cubic_decay"},
        "family": {"name": "ex1", "p": "1/2", "q": "1/4"},
        "x1": [0.9], "z": [0.5],
        "eps": "1/10", "g": "const 3", "preds": "cauchy",
        "search_limit": 100000,
    }
    f = tmp_path / "scenario.json"
    f.write_text(json.dumps(cfg))
    rc = cli.main(["verify", "--config", str(f), "--search-limit", "50000"])
    reports = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert reports[0]["search_limit"] == 50000  # the flag overrode the file


def test_verify_config_validation_lists_errors(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({
        "operator": {"kind": "warp"},
        "family": {"name": "ex1", "p": "1/2", "q": "1/4"},
        "g": "pow 0",
    }))
    rc = cli.main(["verify", "--config", str(f)])
    assert rc == 2


def test_verify_failure_exit_code(tmp_path, capsys):
    f = tmp_path / "fail.json"
    f.write_text(json.dumps({
        "operator": {"kind": "scale", "factor": 2.0},
        "family": {"name": "ex1", "p": "1/2", "q": "1/4"},
        "x1": [0.9], "z": [0.5], "preds": "cauchy", "eps": "1/4",
        "search_limit": 10000,
    }))
    rc = cli.main(["verify", "--config", str(f)])
    assert rc == 1  # scenario fails (domain escape), suite exit is nonzero


def test_plotdata_long_format(tmp_path):
    out = tmp_path / "plot.csv"
    rc = cli.main([
        "plotdata", "--op", "cubic_decay", "--x1", "0.9", "--z", "0.5",
        "--family", "ex1", "--p", "0.5", "--q", "0.25",
        "--steps", "50", "--path-every", "25", "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "n,series,value"
    series = {ln.split(",")[1] for ln in lines[1:]}
    assert series == {"res_T", "dist_path"}


def test_env_digit_cap(tmp_path, capsys, monkeypatch):
    import bruckrate.magnitude as mg

    old = mg.DEFAULT_DIGIT_CAP
    try:
        monkeypatch.setenv(cli.DIGIT_CAP_ENV, "10")
        rc = cli.main(["bound", "--functional", "phi", "--family", "synthetic",
                       "--eps", "8", "--M", "1", "--g", "const 0"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert "level" in out["bound"]  # the tiny cap forces magnitude mode
    finally:
        mg.DEFAULT_DIGIT_CAP = old


def test_unknown_config_key_rejected():
    with pytest.raises(cli.ConfigError):
        cli.ScenarioConfig.from_dict({"operator": {}, "family": {}, "bogus": 1})


def test_plotdata_skips_undefined_path_indices(tmp_path):
    """The log family has theta = 0 below n = 3; plotdata must skip those
    indices instead of failing."""
    out = tmp_path / "plot2.csv"
    rc = cli.main([
        "plotdata", "--op", "cubic_decay", "--x1", "0.9", "--z", "0.5",
        "--family", "ex2", "--steps", "10", "--path-every", "1", "--out", str(out),
    ])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    path_rows = [ln for ln in lines[1:] if ln.split(",")[1] == "dist_path"]
    assert path_rows and all(int(r.split(",")[0]) >= 3 for r in path_rows)


def test_report_config_reread_reproduces(tmp_path, capsys):
    """Reports embed their effective config; feeding it back reproduces the
    run field-for-field (modulo runtime timings)."""
    rc = cli.main([
        "verify", "--family", "ex1", "--p", "0.5", "--q", "0.25",
        "--op", "cubic_decay", "--preds", "cauchy", "--eps", "1/8",
        "--x1", "0.9", "--z", "0.5", "--search-limit", "50000",
    ])
    first = json.loads(capsys.readouterr().out)[0]
    assert rc == 0
    f = tmp_path / "echo.json"
    f.write_text(json.dumps(first["config"]))
    rc2 = cli.main(["verify", "--config", str(f)])
    second = json.loads(capsys.readouterr().out)[0]
    assert rc2 == 0
    for key in ("config", "status", "witness", "bound", "bound_comparison", "margins"):
        assert first[key] == second[key], key
