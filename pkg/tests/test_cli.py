import csv
import io
import json

import numpy as np
import pytest

from kernelnoise import config as C
from kernelnoise.cli import main
from kernelnoise.errors import ConfigError
from kernelnoise.experiments import run
from kernelnoise.report import Report, Row, emit, validate_report
from kernelnoise.stats import MCEstimate


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_malformed_json_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["qv", "--config", str(p)]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_unknown_key_reports_path(tmp_path, capsys):
    p = write(tmp_path, {"experiment": "qv", "space": {"kind": "interval", "cellz": 4}})
    assert main(["run", "--config", p]) == 2
    assert "config.space" in capsys.readouterr().err


def test_unknown_tolerance_rejected():
    with pytest.raises(ConfigError, match="tolerances.bogus"):
        run({"experiment": "functionals", "tolerances": {"bogus": 1.0}})


def test_subcommand_mismatch(tmp_path):
    p = write(tmp_path, {"experiment": "qv"})
    assert main(["fourier", "--config", p]) == 2


def test_psd_check_all_pass(capsys):
    cfg = {"experiment": "psd-check", "space": {"kind": "interval", "cells": 64},
           "kernels": [{"family": "set_intersection"}],
           "sets": ["all", {"range": [0, 10]}, {"interval": [0.2, 0.6]}]}
    rep = run(cfg)
    assert rep.all_pass
    row = rep.rows[0]
    assert row.tolerance > 0 and row.std_error is None


def test_qv_monotone_predicted_variance():
    rep = run({"experiment": "qv", "space": {"kind": "interval", "cells": 256},
               "levels": 6, "replicas": 4000, "seed": 3})
    preds = [L["predicted_var"] for L in rep.extra["levels"]]
    assert preds == [2.0 / 2 ** k for k in range(7)]


def test_simulate_flags_and_exit_code(capsys):
    code = main(["simulate", "--cells", "32", "--replicas", "4000", "--seed", "1",
                 "--sets", '[{"range": [0, 16]}, {"range": [8, 32]}]'])
    out = capsys.readouterr().out
    assert code == 0
    rows = list(csv.DictReader(line for line in io.StringIO(out) if not line.startswith("#")))
    assert rows[0]["case"] == "pair0-1" and float(rows[0]["exact"]) == 0.25


def test_failing_row_gives_exit_1(tmp_path):
    p = write(tmp_path, {"experiment": "rkhs-norm", "kernel": {"family": "szego"},
                         "points": [0.1, 0.5], "psi": {"values": [1.0, 1.0]},
                         "expected": 10.0})
    assert main(["run", "--config", p, "--out", str(tmp_path / "o.csv")]) == 1


def test_numeric_error_becomes_failed_row(tmp_path):
    p = write(tmp_path, {"experiment": "rkhs-norm", "kernel": {"family": "brownian_min"},
                         "points": [0.0, 0.5], "psi": {"values": [1.0, 0.5]}})
    out = tmp_path / "o.json"
    assert main(["run", "--config", p, "--format", "json", "--out", str(out)]) == 1
    rows = json.loads(out.read_text())["rows"]
    assert not rows[-1]["pass"] and rows[-1]["estimate"] is None


def test_markov_flags(tmp_path, capsys):
    kf = tmp_path / "P.csv"
    kf.write_text("0.5,0.5\n0.25,0.75\n")
    code = main(["markov-interpolate", "--kernel-file", str(kf), "--x", "1", "--n", "2", "3",
                 "--replicas", "6000", "--sets", '[{"cells": [0]}, {"cells": [0, 1]}]'])
    out = capsys.readouterr().out
    assert code == 0 and "n3.pair0-1.cov" in out
    assert main(["markov-interpolate", "--kernel-file", str(tmp_path / "missing.csv")]) == 2


def test_bytes_identical_across_runs_and_threads(tmp_path):
    cfg = {"experiment": "simulate", "space": {"kind": "interval", "cells": 128},
           "replicas": 5000, "random_pairs": 4, "seed": 7}
    p = write(tmp_path, cfg)
    outs = []
    for threads in ("1", "1", "3"):
        o = tmp_path / f"o{len(outs)}.csv"
        main(["run", "--config", p, "--threads", threads, "--out", str(o)])
        outs.append(o.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_empty_report_header_only():
    text = emit(Report("qv"), "csv")
    body = [l for l in text.splitlines() if not l.startswith("#")]
    assert body == ["case,exact,estimate,std_error,tolerance,pass"]


def test_json_report_validates():
    rep = Report("simulate")
    rep.add(Row.mc("a", MCEstimate(0.1, 0.02, 0.12, 100)))
    rep.add(Row.check("b", 1.0, 1.0 + 1e-13, 1e-12))
    rep.add(Row.failed("c", "boom"))
    obj = json.loads(emit(rep, "json"))
    validate_report(obj)
    assert [r["pass"] for r in obj["rows"]] == [True, True, False]


def test_row_pass_rule():
    r = Row.check("x", 1.0, 1.5, 0.4)
    assert not r.passed
    r = Row.small("y", -3.0, 0.0)
    assert r.passed and r.estimate == 0.0
    assert not Row.small("z", 2e-10, 1e-10).passed
    assert not Row.at_most("w", 1.0, 0.5).passed


def test_every_config_validates():
    import glob
    import os

    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    files = sorted(glob.glob(os.path.join(root, "*.json")))
    assert len(files) == 15
    for f in files:
        C.load(f)


def test_build_function():
    s = np.linspace(0, 1, 5)
    np.testing.assert_allclose(C.build_function({"poly": [1, 0, 2]}, s), 1 + 2 * s * s)
    np.testing.assert_allclose(C.build_function({"name": "gauss", "center": 0.5, "width": 0.25},
                                                s), np.exp(-0.5 * ((s - 0.5) / 0.25) ** 2))
    with pytest.raises(ConfigError):
        C.build_function({"values": [1, 2]}, s)


SMOKE = [
    {"experiment": "rkhs-norm", "kernel": {"family": "szego"},
     "points": [0.1, -0.1, 0.4, -0.4, 0.7, -0.7], "psi": {"section": 0.4},
     "expected": 1 / (1 - 0.16)},
    {"experiment": "dominance", "kernel1": {"family": "scaled", "factor": 3.0,
                                            "base": {"family": "brownian_min"}},
     "kernel2": {"family": "brownian_min"}, "points": [0.1, 0.4, 0.9], "expected": 3.0},
    {"experiment": "ito-isometry", "space": {"kind": "interval", "cells": 64},
     "replicas": 20000, "integrands": [{"name": "identity"}, {"poly": [1, -1]}],
     "random_integrands": 3},
    {"experiment": "fourier", "space": {"kind": "interval", "a": -1, "b": 1, "cells": 256},
     "measure": {"kind": "gaussian", "sigma": 0.1}, "replicas": 10000,
     "pairs": [[0.5, 0.0], [1.0, 0.25]], "shift": 0.7,
     "schwartz": {"window": [-8, 8], "points": 801}},
    {"experiment": "frames", "continuous": {"space": {"kind": "interval", "cells": 128},
                                            "random_spans": 2}},
    {"experiment": "transforms", "features": {"family": "brownian",
                                              "space": {"kind": "interval", "cells": 256}}},
    {"experiment": "functionals", "kernel": {"family": "szego"}, "orthogonality_order": 3,
     "pairings": [{"xi": [{"at": 0.2}], "eta": [{"at": 0.5, "weight": 2.0}],
                   "expected": 2 / 0.9},
                  {"xi": [{"at": 0.0, "order": 1}], "eta": [{"at": 0.0, "order": 1}],
                   "expected": 1.0}],
     "metric_points": [-0.5, 0.0, 0.3, 0.6]},
    {"experiment": "factorize", "space": {"kind": "interval", "cells": 64},
     "measure": {"kind": "gaussian", "mean": 0.5, "sigma": 0.2},
     "kernel": {"family": "mass_product"}, "factor": "rank_one", "replicas": 20000,
     "sets": [{"range": [0, 20]}, {"range": [10, 64]}], "pairs": [[0, 1], [1, 1]]},
]


@pytest.mark.parametrize("cfg", SMOKE, ids=[c["experiment"] for c in SMOKE])
def test_runner_smoke(cfg):
    rep = run(cfg)
    assert rep.rows and rep.all_pass, [r for r in rep.rows if not r.passed]
