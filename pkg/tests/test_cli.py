import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from importlib import resources

import jsonschema
import numpy as np
import pytest

from dagsobol.cli import main, report_from_document
from dagsobol.data import read_csv


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("dagsobol").joinpath("report.schema.json").read_text())


def test_minobs_table(capsys):
    assert main(["minobs", "--builtin", "welding"]) == 0
    out = capsys.readouterr().out
    assert "364" in out and "84" in out and "lambda = 6/11" in out
    assert main(["minobs", "--builtin", "injection_molding", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert (doc["naive"], doc["network"], doc["lambda"]) == (330, 126, "5/7")


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["simulate", "--builtin", "welding", "--m", "40", "--seed", "1", "--out", str(out)]) == 0
    d = read_csv(out)
    assert d.m == 40 and len(d.names) == 13


def test_simulate_stdout_matches_file(tmp_path, capsys):
    out = tmp_path / "a.csv"
    main(["simulate", "--builtin", "injection_molding", "--m", "5", "--seed", "2", "--out", str(out)])
    capsys.readouterr()
    main(["simulate", "--builtin", "injection_molding", "--m", "5", "--seed", "2"])
    assert capsys.readouterr().out == out.read_text()


def test_fit_report_validates_and_pareto(tmp_path, schema, capsys):
    rep = tmp_path / "r.json"
    svg = tmp_path / "p.svg"
    rc = main(["fit", "--builtin", "welding", "--m", "100", "--reps", "3", "--seed", "0",
               "--out", str(rep), "--pareto", str(svg)])
    assert rc == 0
    doc = json.loads(rep.read_text())
    jsonschema.validate(doc, schema)
    assert doc["engine"] == "sn" and doc["reps"] == 3 and doc["degrees"] == [3]
    assert "first_order_se" in doc["inputs"]["h"]
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert len([e for e in root.iter() if e.tag.endswith("rect")]) == 12

    assert main(["pareto", "--report", str(rep)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "input,first_order,cumulative_share"
    assert lines[1].startswith("h,") and lines[-1].endswith(",1.0")
    r = report_from_document(doc)
    assert r.inputs[0] == "h"


def test_fit_from_data_bootstrap(tmp_path, schema):
    data = tmp_path / "d.csv"
    main(["simulate", "--builtin", "injection_molding", "--m", "200", "--seed", "3", "--out", str(data)])
    rep = tmp_path / "r.json"
    assert main(["fit", "--builtin", "injection_molding", "--data", str(data), "--reps", "2",
                 "--seed", "1", "--out", str(rep), "--p-level", "2=3"]) == 0
    doc = json.loads(rep.read_text())
    jsonschema.validate(doc, schema)
    assert doc["m"] == 200 and doc["degrees"] == [4, 3, 4]
    assert doc["inputs"]["eps"]["first_order"] == 0.0


def test_compare(tmp_path):
    out, csvp = tmp_path / "c.json", tmp_path / "c.csv"
    rc = main(["compare", "--builtin", "welding", "--engine", "sn", "--engine", "naive", "--m", "100",
               "--reps", "3", "--reference-n", "2000", "--out", str(out), "--csv", str(csvp)])
    assert rc == 0
    doc = json.loads(out.read_text())
    rows = {r["engine"]: r for r in doc["rows"]}
    assert rows["sn"]["status"] == "ok" and rows["sn"]["mse_first_order"] >= 0
    assert rows["naive"]["status"] == "underdetermined" and rows["naive"]["required"] == 364
    assert csvp.read_text().splitlines()[0] == "engine,m,status,mse_first_order,mse_total"


@pytest.mark.parametrize(
    "argv,code",
    [
        (["fit", "--builtin", "welding", "--m", "100", "--engine", "naive"], 3),
        (["fit", "--builtin", "welding", "--m", "0"], 2),
        (["simulate", "--builtin", "welding", "--m", "0"], 2),
        (["compare", "--builtin", "welding", "--m", "50"], 2),
        (["fit", "--builtin", "welding", "--m", "50", "--gamma", "2"], 2),
        (["fit", "--builtin", "welding", "--m", "50", "--p-level", "x"], 2),
        (["fit", "--builtin", "nope", "--m", "50"], 2),
        (["fit", "--spec", "/nonexistent.json", "--m", "50"], 3),
        (["fit", "--builtin", "welding", "--data", "/nonexistent.csv"], 3),
        (["pareto", "--report", "/nonexistent.json"], 3),
        (["minobs", "--builtin", "welding", "--output", "zz"], 3),
        ([], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code


def test_numerical_failure_exit_code(tmp_path):
    spec = {
        "spec_version": 1,
        "nodes": ["a", "y"],
        "edges": [["a", "y"]],
        "inputs": {"a": {"dist": "normal", "params": [0, 1]}},
        "functions": {"y": "1 / (a - a)"},
    }
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec))
    assert main(["simulate", "--spec", str(p), "--m", "5"]) == 4


def test_missing_column_in_data_is_data_error(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("h,g\n1,2\n3,4\n")
    assert main(["fit", "--builtin", "welding", "--data", str(data)]) == 3


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dagsobol", "minobs", "--builtin", "welding", "--json"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["naive"] == 364


def test_csv_roundtrip_fit_is_bit_identical(tmp_path):
    from dagsobol.engines import EngineConfig, fit_sparse_network
    from dagsobol.processes import builtin_welding, simulate

    spec = builtin_welding()
    csvp = tmp_path / "w.csv"
    assert main(["simulate", "--builtin", "welding", "--m", "100", "--seed", "7", "--out", str(csvp)]) == 0
    mem = simulate(spec, 100, seed=7)
    a = fit_sparse_network(spec.dag, "E", mem, spec.input_dists, EngineConfig.uniform(3))[1]
    b = fit_sparse_network(spec.dag, "E", read_csv(csvp), spec.input_dists, EngineConfig.uniform(3))[1]
    assert np.array_equal(a.first, b.first) and np.array_equal(a.total, b.total)

    rep = tmp_path / "r.json"
    assert main(["fit", "--builtin", "welding", "--data", str(csvp), "--out", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["inputs"]["h"]["first_order"] == float(a.first[0])


def test_compare_is_reproducible(tmp_path):
    argv = ["compare", "--builtin", "injection_molding", "--engine", "sn", "--sizes", "150", "200",
            "--reps", "2", "--reference-n", "1000", "--seed", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--csv", str(a), "--out", str(tmp_path / "a.json")]) == 0
    assert main(argv + ["--csv", str(b), "--out", str(tmp_path / "b.json")]) == 0
    assert a.read_text() == b.read_text()
    assert len(a.read_text().splitlines()) == 3


def test_minobs_single_edge(tmp_path, capsys):
    spec = {
        "spec_version": 1,
        "nodes": ["a", "y"],
        "edges": [["a", "y"]],
        "inputs": {"a": {"dist": "uniform", "params": [0, 1]}},
        "functions": {"y": "2 * a"},
    }
    p = tmp_path / "s.json"
    p.write_text(json.dumps(spec))
    assert main(["minobs", "--spec", str(p), "--p", "2", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["naive"] == doc["network"] == 3 and doc["lambda"] == "1/1"


def test_fit_missing_ancestor_column_names_it(tmp_path, capsys):
    csvp = tmp_path / "w.csv"
    main(["simulate", "--builtin", "welding", "--m", "120", "--seed", "1", "--out", str(csvp)])
    lines = csvp.read_text().splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h != "V"]
    csvp.write_text("\n".join(",".join(row.split(",")[i] for i in keep) for row in lines) + "\n")
    capsys.readouterr()
    assert main(["fit", "--builtin", "welding", "--data", str(csvp), "--engine", "network"]) == 3
    assert "'V'" in capsys.readouterr().err
