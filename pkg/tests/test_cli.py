import csv
import io
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from isinglab.cli import (CSV_HEADER, ResultRecord, canonical, emit_results, format_records,
                          main, parse_config, read_config_file)
from isinglab.exact import log_partition
from isinglab.lattice import Couplings, build_lattice


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_csv_header_is_fixed():
    assert CSV_HEADER == "experiment,params,observable,value,stderr,provenance,seconds"


def test_exact_record_has_no_uncertainty(capsys):
    code, out, _ = run(["exact", "--method", "enumerate"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert out.splitlines()[0] == CSV_HEADER
    assert len(rows) == 1 and rows[0]["stderr"] == "" and rows[0]["seconds"] == ""
    want = log_partition(build_lattice(2, 3), Couplings(0.4)).value
    assert float(rows[0]["value"]) == want


def test_json_round_trips_with_17_digits(capsys):
    code, out, _ = run(["exact", "--beta", "0.3", "--format", "json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert isinstance(data, list) and data[0]["stderr"] is None
    want = log_partition(build_lattice(2, 3), Couplings(0.3)).value
    assert data[0]["value"] == want and data[0]["params"]["beta"] == 0.3


def test_mc_record_has_uncertainty(capsys):
    code, out, _ = run(["mc", "--L", "4", "--sweeps", "200", "--burnin", "20", "--seed", "7",
                        "--chains", "2", "--format", "json"], capsys)
    assert code == 0
    rec = json.loads(out)[0]
    assert rec["stderr"] > 0 and rec["provenance"] == "swendsen-wang"


def test_check_summary(capsys):
    code, out, _ = run(["check", "--kind", "ghs", "--trials", "50", "--format", "json"], capsys)
    assert code == 0
    recs = {r["observable"]: r["value"] for r in json.loads(out)}
    assert recs["violations"] == 0 and recs["worst_margin"] >= -1e-8


def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nbeta = 0.3\nL=32  # trailing comment\n\n")
    c = parse_config("mc", {"beta": "0.5"}, str(cfg))
    assert c["beta"] == 0.5 and c["L"] == 32 and c["sweeps"] == 2000
    assert parse_config("mc", {}, str(cfg))["beta"] == 0.3


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("beta\n")
    assert main(["mc", "--config", str(bad)]) == 1
    unk = tmp_path / "unk.cfg"
    unk.write_text("temperature=3\n")
    assert main(["mc", "--config", str(unk)]) == 1
    assert main(["mc", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["mc", "--beta", "-1"]) == 1
    assert main(["mc", "--beta", "0.3", "--beta", "0.5"]) == 1
    assert main(["mc", "--temperature", "3"]) == 1
    assert main(["teleport"]) == 1
    assert main([]) == 1
    assert main(["exact", "--lattice", "blob:3"]) == 1
    assert main(["mc", "--format", "xml"]) == 1
    assert main(["mc", "--sweeps", "10", "--burnin", "10"]) == 1
    err = capsys.readouterr().err
    assert "unknown key" in err and "beta must be >= 0" in err


def test_numerical_failure_exit_code(monkeypatch, capsys):
    import isinglab.cli as cli

    def boom(cfg):
        raise RuntimeError("root finder did not converge")

    monkeypatch.setitem(cli.RUNNERS, "exact", boom)
    assert main(["exact"]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_duplicate_keys_in_file_rejected(tmp_path):
    f = tmp_path / "dup.cfg"
    f.write_text("beta=0.1\nbeta=0.2\n")
    with pytest.raises(ValueError):
        read_config_file(str(f))


@pytest.mark.parametrize("cmd", ["exact", "mc", "fk", "currents", "check", "scaling", "holo"])
def test_dry_run_round_trips(cmd, tmp_path, capsys):
    code, out, _ = run([cmd, "--dry-run", "--seed", "3"], capsys)
    assert code == 0 and out.startswith(f"# isinglab {cmd}")
    f = tmp_path / "c.cfg"
    f.write_text(out)
    code, again, _ = run([cmd, "--dry-run", "--config", str(f)], capsys)
    assert again == out


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 5, allow_nan=False), st.integers(1, 64), st.integers(0, 2 ** 31))
def test_canonical_serialisation_is_stable(beta, L, seed):
    c = parse_config("mc", {"beta": repr(beta), "L": str(L), "seed": str(seed)})
    text = canonical("mc", c)
    flags = dict(line.split("=", 1) for line in text.splitlines()[1:])
    assert canonical("mc", parse_config("mc", flags)) == text
    assert parse_config("mc", flags)["beta"] == beta


def test_empty_records_rejected():
    with pytest.raises(ValueError):
        format_records([], "csv")
    with pytest.raises(ValueError):
        emit_results([], "json")


def test_output_file_and_unwritable_path(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["exact", "--output", str(out)]) == 0
    assert out.read_text().splitlines()[0] == CSV_HEADER
    assert main(["exact", "--output", str(tmp_path / "no" / "such" / "dir.csv")]) == 1


def test_csv_quotes_fields_with_commas():
    r = ResultRecord("x", {"A": (0, 1)}, "obs", 1.5, None, "p")
    text = format_records([r])
    row = next(csv.DictReader(io.StringIO(text)))
    assert row["params"] == "A=0,1" and float(row["value"]) == 1.5


def test_nonfinite_values_serialise():
    r = ResultRecord("x", {}, "obs", math.inf, math.nan, "p")
    assert json.loads(format_records([r], "json"))[0]["value"] is None
    assert "inf" in format_records([r], "csv")


def test_holo_modes(tmp_path, capsys):
    f = tmp_path / "r.json"
    f.write_text(json.dumps({"lattice": "box:6x6", "function": "z2"}))
    code, out, _ = run(["holo", "--input", str(f), "--format", "json"], capsys)
    assert code == 0 and json.loads(out)[0]["value"] <= 1e-14
    g = tmp_path / "o.json"
    g.write_text(json.dumps({"lattice": "box:3x3", "beta": 0.5,
                             "pairs": [[0, [0, 0]], [8, [1, 1]]], "cuts": ["down", "up"]}))
    code, out, _ = run(["holo", "--mode", "orderdisorder", "--input", str(g)], capsys)
    assert code == 0
    assert main(["holo"]) == 1


@pytest.mark.parametrize("argv", [
    ["fk", "--mode", "es-check"],
    ["currents", "--mode", "switching", "--A", "0,1", "--B", "2,3"],
    ["currents", "--mode", "ursell", "--A", "0,1,2,3", "--lattice", "box:2x2"],
    ["scaling"],
    ["exact", "--method", "onsager"],
])
def test_other_subcommands_run(argv, capsys):
    code, out, _ = run(argv, capsys)
    assert code == 0 and out.splitlines()[0] == CSV_HEADER


def test_threads_do_not_change_bytes(tmp_path):
    outs = []
    for t in ("1", "3"):
        p = tmp_path / f"t{t}.csv"
        subprocess.run([sys.executable, "-m", "isinglab.cli", "mc", "--L", "6", "--sweeps", "150",
                        "--burnin", "10", "--chains", "3", "--seed", "5", "--threads", t,
                        "--output", str(p)], check=True)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_console_script_installed():
    p = subprocess.run(["isinglab", "exact", "--dry-run"], capture_output=True, text=True)
    assert p.returncode == 0 and "method=enumerate" in p.stdout
