"""End-to-end checks of the command line front end."""

import hashlib
import json
import os

import pytest

from bnfsim import cli
from bnfsim.poly import from_text


def write_cfg(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


DEMO = [
    'model = "demo_2mode"',
    "kappa = 0.1",
    "r_star = 2",
    "gamma = 0.4",
    "N = 2",
    "s = 4.0",
    "eps = 0.05",
]


def test_config_parsing(tmp_path):
    p = write_cfg(tmp_path / "a.cfg", [
        "# comment",
        "",
        'model = "demo_2mode"',
        "experiment.eps_list = [0.2, 0.1]",
        'mode = block',
        "N = 4",
    ])
    cfg = cli.load_config(p)
    assert cfg["model"] == "demo_2mode"
    assert cfg["experiment.eps_list"] == [0.2, 0.1]
    assert cfg["mode"] == "block"  # bare string fallback
    assert cfg["N"] == 4
    cli.apply_overrides(cfg, ["N=8", 'model="nls_dd"'])
    assert cfg["N"] == 8 and cfg["model"] == "nls_dd"
    with pytest.raises(cli.ConfigError, match="key = value"):
        cli.load_config(write_cfg(tmp_path / "b.cfg", ["just a line"]))
    with pytest.raises(cli.ConfigError, match="--set"):
        cli.apply_overrides(cfg, ["noequals"])


def test_missing_gamma_exits_2(tmp_path, capsys):
    p = write_cfg(tmp_path / "c.cfg", [ln for ln in DEMO
                                       if not ln.startswith("gamma")])
    rc = cli.main(["normalize", p, "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "gamma: required" in capsys.readouterr().err


def test_validation_messages_name_the_field(tmp_path, capsys):
    out = str(tmp_path / "out")
    p = write_cfg(tmp_path / "d.cfg", DEMO)
    cases = [
        (["normalize", p, "--set", 'model="nope"', "--out", out], "model:"),
        (["normalize", p, "--set", "r_star=0", "--out", out], "r_star:"),
        (["normalize", p, "--set", 'kappa="x"', "--out", out], "kappa:"),
        (["simulate", p, "--out", out], "T: required"),
        (["drift-experiment", p, "--out", out], "experiment.eps_list:"),
        (["measure-estimate", p, "--out", out], "potential.family:"),
    ]
    for argv, needle in cases:
        rc = cli.main(argv)
        err = capsys.readouterr().err
        assert rc == 2, argv
        assert needle in err, (argv, err)


def test_normalize_demo_membership_all_true(tmp_path):
    p = write_cfg(tmp_path / "e.cfg", DEMO)
    out = tmp_path / "out"
    assert cli.main(["normalize", p, "--out", str(out)]) == 0
    doc = json.loads((out / "nf.json").read_text())
    assert doc["membership_ok"] is True
    assert doc["membership"] and all(doc["membership"].values())
    assert doc["params"]["N"] == 2 and doc["params"]["degree_cap"] == 4
    # round-trippable polynomials
    Z = from_text(doc["Z"])
    assert Z.min_degree() == 4
    assert len(doc["generators"]) == doc["params"]["r_star"]
    assert doc["ledger"]["monotone"] is True
    man = json.loads((out / "manifest.json").read_text())
    entry = man["normalize"]
    assert entry["version"]
    assert entry["artifacts"] == ["nf.json"]
    assert entry["wall_time_s"] >= 0.0
    assert len(entry["config_sha256"]) == 64


def test_auto_N_needs_amplitude(tmp_path, capsys):
    p = write_cfg(tmp_path / "f.cfg",
                  [ln for ln in DEMO if not ln.startswith(("N", "eps"))])
    rc = cli.main(["normalize", p, "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "eps: required" in capsys.readouterr().err


def drift_argv(tmp_path, out, extra=()):
    p = write_cfg(tmp_path / "g.cfg", DEMO + [
        "experiment.eps_list = [0.3]",
        "experiment.seeds = 2",
        "experiment.r = 1",
        "integrator.dt = 0.05",
        "integrator.stride = 20",
        "seed = 11",
    ])
    return ["drift-experiment", p, "--out", out, *extra]


def test_drift_rerun_is_byte_identical(tmp_path):
    a, b = str(tmp_path / "A"), str(tmp_path / "B")
    assert cli.main(drift_argv(tmp_path, a)) == 0
    assert cli.main(drift_argv(tmp_path, b)) == 0
    ha = hashlib.sha256(open(os.path.join(a, "drift.csv"), "rb").read())
    hb = hashlib.sha256(open(os.path.join(b, "drift.csv"), "rb").read())
    assert ha.hexdigest() == hb.hexdigest()
    # a different manifest seed changes the data
    c = str(tmp_path / "C")
    assert cli.main(drift_argv(tmp_path, c, ("--set", "seed=12"))) == 0
    hc = hashlib.sha256(open(os.path.join(c, "drift.csv"), "rb").read())
    assert hc.hexdigest() != ha.hexdigest()


def test_scan_simulate_report_pipeline(tmp_path, capsys):
    out = str(tmp_path / "out")
    p = write_cfg(tmp_path / "h.cfg", DEMO + [
        "T = 2.0",
        "integrator.dt = 0.02",
        "experiment.eps_list = [0.3]",
        "experiment.seeds = 1",
        "experiment.r = 1",
        "integrator.stride = 20",
    ])
    for sub in ("normalize", "scan-resonances", "simulate",
                "drift-experiment"):
        assert cli.main([sub, p, "--out", out]) == 0, sub
    capsys.readouterr()
    assert cli.main(["report", p, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "normal form [demo_2mode]" in text
    assert "membership_ok=True" in text
    assert "resonance hits" in text
    assert "drift [demo_2mode]" in text
    assert "energy residual" in text
    assert (tmp_path / "out" / "report.txt").read_text() == text
    # one manifest entry per subcommand, none clobbered
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert set(man) == {"normalize", "scan-resonances", "simulate",
                        "drift-experiment", "report"}
    # frames.csv exists with the expected header
    frames = (tmp_path / "out" / "frames.csv").read_text().splitlines()
    assert frames[0] == "model,eps,seed,t,mode,I"
    assert len(frames) > 10


def test_measure_estimate_writes_csv(tmp_path, capsys):
    p = write_cfg(tmp_path / "m.cfg", [
        'potential.family = "convolution_d"',
        'potential.params = {"R": 1.0, "kmax": 2, "d": 2, "decay": 2.0}',
        "jmax = 2",
        "r = 3",
        "N = 2",
        "gamma = 0.01",
        "resonance.gammas = [0.01, 0.001]",
        "resonance.samples = 30",
        "seed = 3",
    ])
    out = str(tmp_path / "out")
    assert cli.main(["measure-estimate", p, "--out", out]) == 0
    rows = (tmp_path / "out" / "measure.csv").read_text().splitlines()
    assert rows[0].startswith("gamma,threshold,samples")
    assert len(rows) == 3
    # same seed, same numbers
    out2 = str(tmp_path / "out2")
    assert cli.main(["measure-estimate", p, "--out", out2]) == 0
    assert (tmp_path / "out2" / "measure.csv").read_text() == \
        "\n".join(rows) + "\n"


def test_stream_seeds_are_distinct_and_stable():
    a = cli.stream_seed(7, "potential")
    b = cli.stream_seed(7, "initial")
    c = cli.stream_seed(7, "monte_carlo")
    assert len({a, b, c}) == 3
    assert a == cli.stream_seed(7, "potential")
    assert cli.stream_seed(7, "initial", 1) != cli.stream_seed(7, "initial")


def test_compute_failure_exits_1(tmp_path, capsys):
    # sign mismatch between T and dt is rejected inside the integrator
    p = write_cfg(tmp_path / "x.cfg", DEMO + ["T = -1.0",
                                              "integrator.dt = 1.0"])
    rc = cli.main(["simulate", p, "--out", str(tmp_path / "out")])
    assert rc == 1
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["simulate"]["status"] == "failed"
    assert man["simulate"]["error"]
