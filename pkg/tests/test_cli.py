import json

import pytest

from fowlerlab import cli


def run_cli(args):
    return cli.main(args)


def test_fowler_subcommand(tmp_path, capsys):
    rc = run_cli(["fowler", "--n", "5", "--k0", "1", "--epsilon", "0.4",
                  "--outdir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "T = " in out
    summary = json.loads((tmp_path / "orbit_summary.json").read_text())
    assert summary["period"] > 0
    assert (tmp_path / "orbit.csv").exists()


def test_fowler_constant_mode(tmp_path, capsys):
    rc = run_cli(["fowler", "--constant", "--n", "6", "--outdir",
                  str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "mode-0 rotation" in out
    summary = json.loads((tmp_path / "orbit_summary.json").read_text())
    assert summary["is_constant"] is True
    assert summary["mode0_rotation"] == pytest.approx(2.0)  # sqrt(n-2), n=6


def test_fowler_ckn_and_bad_epsilon(tmp_path, capsys):
    rc = run_cli(["fowler", "--problem", "ckn", "--n", "5", "--a", "0.5",
                  "--b", "0.7", "--epsilon", "0.3", "--outdir",
                  str(tmp_path / "ok")])
    assert rc == 0
    rc = run_cli(["fowler", "--n", "5", "--epsilon", "5.0", "--outdir",
                  str(tmp_path / "bad")])
    assert rc == 1
    record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert record["error"] == "ValueError"
    assert "no periodic orbit" in record["message"]


def test_floquet_subcommand_constant_formula(tmp_path, capsys):
    rc = run_cli(["floquet", "--n", "5", "--constant", "--modes", "6",
                  "--outdir", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "floquet.json").read_text())
    sigmas = [m["sigma"] for m in payload["modes"]]
    assert sigmas[:5] == pytest.approx([1.0] * 5)
    assert sigmas[5] == pytest.approx(7.0 ** 0.5)


def test_index_set_subcommand(tmp_path, capsys):
    rc = run_cli(["index-set", "--n", "5", "--constant", "--cutoff", "4",
                  "--outdir", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "index_set.json").read_text())
    assert payload["values"][0] == pytest.approx(1.0)
    assert payload["values"][1] == pytest.approx(2.0)


def test_expand_subcommand(tmp_path):
    rc = run_cli(["expand", "--n", "5", "--epsilon-frac", "0.8", "--order",
                  "2", "--outdir", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "expansion.json").read_text())
    assert len(payload["terms"]) == 3
    assert (tmp_path / "expansion_eval.csv").exists()


def test_config_file_merging(tmp_path, capsys):
    conf = tmp_path / "run.ini"
    conf.write_text("n = 6\nconstant = true\n")
    rc = run_cli(["fowler", "--config", str(conf), "--outdir", str(tmp_path)])
    assert rc == 0
    summary = json.loads((tmp_path / "orbit_summary.json").read_text())
    assert summary["is_constant"] is True
    assert summary["epsilon"] == pytest.approx(4.0)  # xi* for n = 6, K0 = 1


def test_config_rejects_unknown_key(tmp_path):
    conf = tmp_path / "run.ini"
    conf.write_text("frobnicate = 3\n")
    with pytest.raises(SystemExit):
        run_cli(["fowler", "--config", str(conf), "--outdir", str(tmp_path)])


def test_verify_subcommand_deterministic(tmp_path, capsys):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        rc = run_cli(["verify", "--suite", "xi2", "--suite", "remark",
                      "--outdir", str(d)])
        assert rc == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    assert (d1 / "verify.json").read_bytes() == (d2 / "verify.json").read_bytes()


def test_construct_subcommand(tmp_path, capsys):
    rc = run_cli(["construct", "--n", "5", "--epsilon-frac", "0.5", "--beta",
                  "1.5", "--max-degree", "2", "--outdir", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "construct.json").read_text())
    assert report["trace"]["converged"] is True
    assert abs(report["fit"]["slope_plain"] / 1.5 - 1.0) < 0.05
    assert (tmp_path / "field.csv").exists()


def test_construct_modes_alias_and_multi_component(tmp_path):
    rc = run_cli(["construct", "--n", "5", "--epsilon-frac", "0.5",
                  "--beta", "1.5,2.5", "--kappa", "0.05,0.02",
                  "--kdegree", "1,2", "--modes", "2",
                  "--outdir", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "construct.json").read_text())
    assert report["target_rate"] == pytest.approx(1.5)  # min of the rates
    assert report["trace"]["converged"] is True
