import hashlib
import json
import os

import jsonschema
import numpy as np
import pytest

from photonstat import errors, write_stream
from photonstat.cli import main

from conftest import poisson_stream

try:
    from importlib.resources import files as _files
except ImportError:  # py3.8
    from importlib_resources import files as _files

SCHEMA_DIR = _files("photonstat") / "schemas"

BASE_CONFIG = {
    "emitter": {
        "mean_excitons_per_pulse": 0.3,
        "tau_exciton_ns": 15.3,
        "qy_exciton": 0.9,
        "tau_trion_ns": 2.8,
        "qy_trion": 0.09,
        "blinking": {"model": "telegraph",
                     "k_on_per_s": 700.0, "k_off_per_s": 300.0},
    },
    "detector": {"efficiency_total": 0.05, "dark_rate_hz": 100.0},
    "sim": {"duration_s": 1.0, "seed": 5},
    "analysis": {"decay_components": 2,
                 "envelope_tau_max_s": 0.01},
}


def write_config(tmp_path, cfg, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def sha_tree(root):
    out = {}
    for dirpath, _, names in os.walk(root):
        for n in names:
            p = os.path.join(dirpath, n)
            out[os.path.relpath(p, root)] = hashlib.sha256(
                open(p, "rb").read()).hexdigest()
    return out


def validate(path, schema_name):
    schema = json.loads((SCHEMA_DIR / schema_name).read_text())
    jsonschema.validate(json.loads(open(path).read()), schema)


def test_simulate_deterministic(tmp_path):
    cfg = write_config(tmp_path, BASE_CONFIG)
    a, b = str(tmp_path / "a.phst"), str(tmp_path / "b.phst")
    assert main(["simulate", "--config", cfg, "--out", a, "--quiet"]) == 0
    assert main(["simulate", "--config", cfg, "--out", b, "--quiet"]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    c = str(tmp_path / "c.phst")
    assert main(["simulate", "--config", cfg, "--out", c, "--seed", "6",
                 "--quiet"]) == 0
    assert open(c, "rb").read() != open(a, "rb").read()


def test_simulate_summary_schema(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE_CONFIG)
    out = str(tmp_path / "s.phst")
    assert main(["simulate", "--config", cfg, "--out", out]) == 0
    schema = json.loads((SCHEMA_DIR / "simulate_summary.schema.json").read_text())
    jsonschema.validate(json.loads(capsys.readouterr().out), schema)


def test_config_rejects_unknown_key(tmp_path, capsys):
    bad = json.loads(json.dumps(BASE_CONFIG))
    bad["emitter"]["quantm_yield"] = 0.5
    cfg = write_config(tmp_path, bad)
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.phst")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "ConfigInvalid" in err and "quantm_yield" in err


def test_config_rejects_bad_values(tmp_path):
    for patch in ({"sim": {"duration_s": 0.0}},
                  {"emitter": {"mean_excitons_per_pulse": -2.0}},
                  {"detector": {"efficiency_total": 1.5}}):
        bad = json.loads(json.dumps(BASE_CONFIG))
        for sec, kv in patch.items():
            bad[sec].update(kv)
        cfg = write_config(tmp_path, bad)
        with pytest.raises(errors.ConfigInvalid):
            from photonstat.cli import build_params, load_config
            build_params(load_config(cfg))


def test_config_not_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    rc = main(["simulate", "--config", str(p),
               "--out", str(tmp_path / "x.phst")])
    assert rc == 1


def test_analyze_outputs_and_schemas(tmp_path):
    cfg = write_config(tmp_path, BASE_CONFIG)
    stream = str(tmp_path / "s.phst")
    assert main(["simulate", "--config", cfg, "--out", stream,
                 "--quiet"]) == 0
    out_dir = str(tmp_path / "report")
    assert main(["analyze", stream, "--config", cfg, "--out", out_dir,
                 "--quiet"]) == 0
    names = set(os.listdir(out_dir))
    expected = {"trace.csv", "trace.svg", "intensity_hist.csv",
                "intensity_hist.svg", "g2.csv", "g2.svg", "g2_summary.json",
                "envelope.csv", "envelope.svg", "decay.csv", "decay.svg",
                "decay_fit.json", "flid.csv", "flid.svg", "correlation.json"}
    assert expected <= names
    validate(os.path.join(out_dir, "g2_summary.json"), "g2_summary.schema.json")
    validate(os.path.join(out_dir, "decay_fit.json"), "decay_fit.schema.json")
    validate(os.path.join(out_dir, "correlation.json"), "correlation.schema.json")
    fit = json.load(open(os.path.join(out_dir, "decay_fit.json")))
    assert fit["flagged"] is None
    assert len(fit["components"]) >= 1


def test_analyze_deterministic(tmp_path):
    cfg = write_config(tmp_path, BASE_CONFIG)
    stream = str(tmp_path / "s.phst")
    main(["simulate", "--config", cfg, "--out", stream, "--quiet"])
    d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert main(["analyze", stream, "--config", cfg, "--out", d1,
                 "--quiet"]) == 0
    assert main(["analyze", stream, "--config", cfg, "--out", d2,
                 "--quiet"]) == 0
    assert sha_tree(d1) == sha_tree(d2)


def test_analyze_low_rate_flags(tmp_path, rng):
    # sparse dark-only stream: decay fit flagged InsufficientCounts,
    # correlation flagged InsufficientBins; run still succeeds
    s = poisson_stream(rng, rate_hz=150, duration_s=2.0)
    path = str(tmp_path / "sparse.phst")
    write_stream(path, s)
    out_dir = str(tmp_path / "report")
    assert main(["analyze", path, "--out", out_dir, "--quiet"]) == 0
    fit = json.load(open(os.path.join(out_dir, "decay_fit.json")))
    assert fit["flagged"] and "InsufficientCounts" in fit["flagged"]
    corr = json.load(open(os.path.join(out_dir, "correlation.json")))
    assert corr["flagged"] and "InsufficientBins" in corr["flagged"]


def test_analyze_missing_stream(tmp_path, capsys):
    rc = main(["analyze", str(tmp_path / "nope.phst"), "--quiet"])
    assert rc == 1
    assert "IoError" in capsys.readouterr().err


def test_analyze_failure_cleans_outputs(tmp_path, rng):
    # single-channel stream: g2 fails after the trace files were written;
    # the partial outputs must be removed and the error re-raised
    s = poisson_stream(rng, rate_hz=5000, duration_s=1.0)
    one = s.channel.copy()
    one[:] = 0
    from photonstat.photon_stream import make_stream
    s1 = make_stream(s.header, one, s.nsync, s.microtime)
    path = str(tmp_path / "one.phst")
    write_stream(path, s1)
    out_dir = str(tmp_path / "report")
    rc = main(["analyze", path, "--out", out_dir, "--quiet"])
    assert rc == 1
    assert not any(os.scandir(out_dir))


def test_saturate_outputs(tmp_path):
    cfg_doc = json.loads(json.dumps(BASE_CONFIG))
    cfg_doc["emitter"]["blinking"] = None
    cfg_doc["emitter"]["qy_trion"] = 0.0
    cfg_doc["detector"]["dark_rate_hz"] = 0.0
    cfg_doc["saturation"] = {"p_sat_true": 6.0,
                             "fluences": [1, 2, 4, 6, 12, 24, 48],
                             "duration_s": 0.3}
    cfg = write_config(tmp_path, cfg_doc)
    out_dir = str(tmp_path / "sat")
    assert main(["saturate", "--config", cfg, "--out", out_dir,
                 "--quiet"]) == 0
    names = set(os.listdir(out_dir))
    assert {"saturation.csv", "saturation_fit.json", "saturation.svg"} <= names
    validate(os.path.join(out_dir, "saturation_fit.json"),
             "saturation_fit.schema.json")
    fit = json.load(open(os.path.join(out_dir, "saturation_fit.json")))
    assert fit["P_sat"] == pytest.approx(6.0, rel=0.25)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert "FAIL" not in out


def test_cli_entrypoint_installed():
    import shutil
    import subprocess
    exe = shutil.which("photonstat")
    assert exe is not None
    res = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "analyze", "saturate", "selftest"):
        assert cmd in res.stdout
