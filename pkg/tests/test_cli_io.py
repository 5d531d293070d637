import json
import math
import subprocess
import sys

import numpy as np
import pytest

from entroflux import io as eio
from entroflux.cli import main
from entroflux.cptp import KrausMap
from entroflux.errors import ConfigError, DimensionMismatch, ParseError
from entroflux.mitigation import scan
from entroflux.qubit_thermal import QubitThermalModel
from entroflux.testing import random_channel
from entroflux.tpm import TpmResult

GOLDEN_HEADER = "t,gamma,Gamma,z,mean_dsigma,dmean_dt,var_dsigma,dvar_dt,I_t,z_nonneg,suff_met,nec_met,mitigating"


# --- serialization


def test_kraus_round_trip_bit_exact():
    rng = np.random.default_rng(0)
    for d in (2, 3, 4):
        k = random_channel(rng, d)
        back = eio.kraus_from_json(eio.kraus_to_json(k))
        assert back == k
    odd = KrausMap([np.array([[-0.0, 5e-324], [1e300, 1 / 3]]) + 1j * np.array([[0.1, -0.0], [2**-1074, 0]])])
    back = eio.kraus_from_json(eio.kraus_to_json(odd))
    assert all(a.tobytes() == b.tobytes() for a, b in zip(back, odd))


def test_kraus_parse_errors():
    with pytest.raises(ParseError):
        eio.kraus_from_json("{not json")
    with pytest.raises(ParseError):
        eio.kraus_from_json('{"operators": []}')
    with pytest.raises(ParseError):
        eio.kraus_from_json('{"dim": 2, "operators": [[[1, 0], [0, 1]]]}')
    with pytest.raises(DimensionMismatch):
        eio.kraus_from_json(json.dumps({"dim": 3, "operators": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}))


def test_tpm_result_round_trip():
    pf = np.array([[0.75, 0.0], [0.25, 0.0]])
    ds = np.array([[0.1, np.nan], [np.inf, -np.inf]])
    res = TpmResult(pf, pf.T / 3, ds, np.array([1.0, 0.0]), np.array([0.75, 0.25]),
                    np.array([0.1, 0.2]), np.array([1 / 3, 0.5]), ds.copy(), True, False)
    text = eio.tpm_result_to_json(res)
    obj = json.loads(text)
    assert obj["delta_sigma"] == [[0.1, None], ["inf", "-inf"]]
    assert eio.tpm_result_from_json(text) == res
    bare = TpmResult(pf, pf.T, ds, np.array([1.0, 0.0]), np.array([0.75, 0.25]))
    assert eio.tpm_result_from_json(eio.tpm_result_to_json(bare)) == bare


def test_scan_csv_golden_header_and_round_trip():
    rep = scan(QubitThermalModel(0.5), np.linspace(0, 1, 11))
    text = eio.scan_to_csv(rep)
    assert text.splitlines()[0] == GOLDEN_HEADER
    rows = eio.read_scan_csv(text)
    assert len(rows) == 11
    for row, p in zip(rows, rep.points):
        for col in eio.SCAN_COLUMNS:
            v = getattr(p, col)
            if isinstance(v, bool):
                assert row[col] is v
            elif math.isnan(v):
                assert math.isnan(row[col])
            else:
                assert row[col] == v  # 17 significant digits round-trip
    first = text.splitlines()[1].split(",")
    assert first[eio.SCAN_COLUMNS.index("var_dsigma")] == "0"
    assert first[eio.SCAN_COLUMNS.index("dmean_dt")] == ""


def test_parse_rate():
    assert eio.parse_rate("constant:0.5").gamma0 == 0.5
    r = eio.parse_rate("damped:1,2,3,4")
    assert (r.gamma0, r.amplitude, r.frequency, r.decay_time) == (1, 2, 3, 4)
    assert eio.parse_rate({"kind": "damped", "amplitude": 2.0}).amplitude == 2.0
    for bad in ("constant", "wobbly:1", "constant:x", "damped:1,2,3,4,5", {"kind": "nope"}):
        with pytest.raises(ConfigError):
            eio.parse_rate(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        eio.ScenarioConfig().validate()
    with pytest.raises(ConfigError):
        eio.ScenarioConfig(kraus_file="a.json", qubit={"beta": 1}).validate()
    with pytest.raises(ConfigError):
        eio.ScenarioConfig(qubit={"beta": 1}, steps=1).validate()
    with pytest.raises(ConfigError):
        eio.ScenarioConfig(qubit={"beta": 1}, t_max=0.0).validate()
    with pytest.raises(ConfigError):
        eio.ScenarioConfig(qubit={"beta": 1}, grid=[0.0, 1.0, 0.5]).validate()
    cfg = eio.config_from_dict({"system": {"qubit_thermal": {"beta": 0.5}}, "time": {"t_max": 2, "steps": 5}})
    assert np.allclose(cfg.validate().time_grid(), [0, 0.5, 1, 1.5, 2])


# --- commands


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_identity(tmp_path, capsys):
    p = tmp_path / "id.json"
    eio.save_kraus(KrausMap([np.eye(2)]), p)
    code, out, _ = run_cli(capsys, "validate", str(p))
    assert code == 0
    assert "unital: true" in out


def test_validate_thermal_export(tmp_path, capsys):
    p = tmp_path / "k.json"
    assert run_cli(capsys, "export-kraus", "--beta", "1", "--gamma-int", "0.5", "--out", str(p))[0] == 0
    code, out, _ = run_cli(capsys, "validate", str(p))
    assert code == 0
    line = next(x for x in out.splitlines() if x.startswith("assumption_i"))
    assert line == "assumption_i: true  delta_phi: 1 -1 0 0"


def test_validate_violation(tmp_path, capsys):
    p = tmp_path / "bad.json"
    eio.save_kraus(KrausMap([np.diag([1.0, 0.5])]), p)
    code, out, _ = run_cli(capsys, "validate", str(p))
    assert code == 2
    assert "trace_preserving: false  residual: 0.75" in out


def test_validate_input_errors(tmp_path, capsys):
    assert run_cli(capsys, "validate", str(tmp_path / "missing.json"))[0] == 1
    p = tmp_path / "mixed.json"
    p.write_text(json.dumps({"dim": 2, "operators": [[[[1, 0]]]]}))
    assert run_cli(capsys, "validate", str(p))[0] == 1


def test_tpm_beta_zero(capsys):
    code, out, _ = run_cli(capsys, "tpm", "--beta", "0", "--gamma-int", str(math.log(2) / 2))
    assert code == 0
    d = json.loads(out)
    assert d["mean"] == pytest.approx(0.5623, abs=1e-4)
    assert d["mean_via_relative_entropies"] == pytest.approx(d["mean"], abs=1e-9)
    assert d["result"]["assumption_ii_satisfied"] is True
    assert "delta_sigma_closed" in d["result"]


def test_tpm_from_invariant_state(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "system": {"qubit_thermal": {"beta": 0.0, "Gamma": 0.4}},
        "initial_state": {"bloch": [0, 0, 0]},
    }))
    code, out, _ = run_cli(capsys, "tpm", "--config", str(cfg))
    assert code == 0
    d = json.loads(out)
    assert np.allclose(d["result"]["delta_sigma"], 0, atol=1e-12)
    assert d["mean"] == pytest.approx(0, abs=1e-12)


def test_tpm_sigma_x(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "system": {"qubit_thermal": {"beta": 1.0, "Gamma": 0.7}},
        "observables": {"in": "x"},
    }))
    code, out, _ = run_cli(capsys, "tpm", "--config", str(cfg))
    assert code == 0
    d = json.loads(out)
    assert d["result"]["assumption_ii_satisfied"] is False
    assert "delta_sigma_closed" not in d["result"]


def test_tpm_non_cptp_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    eio.save_kraus(KrausMap([np.diag([1.0, 0.5])]), p)
    assert run_cli(capsys, "tpm", "--kraus", str(p))[0] == 2


def test_scan_constant_rate(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = run_cli(capsys, "scan", "--beta", "0.5", "--rate", "constant:1", "--steps", "200", "--out", str(out))
    assert code == 0
    rows = eio.read_scan_csv(out.read_text())
    assert not any(r["mitigating"] for r in rows)


def test_scan_default_has_contiguous_run(tmp_path, capsys):
    out = tmp_path / "s.csv"
    rep = tmp_path / "r.json"
    code, _, err = run_cli(capsys, "scan", "--beta", "0.5", "--steps", "2001", "--out", str(out), "--report", str(rep))
    assert code == 0
    flags = [r["mitigating"] for r in eio.read_scan_csv(out.read_text())]
    runs = sum(1 for a, b in zip([False] + flags, flags) if b and not a)
    assert runs >= 1
    assert len(json.loads(rep.read_text())["windows"]) == runs
    assert "0.091" in err


def test_scan_bad_config(capsys):
    assert run_cli(capsys, "scan", "--beta", "0.5", "--steps", "1")[0] == 1
    assert run_cli(capsys, "scan", "--beta", "0.5", "--rate", "wobbly:1")[0] == 1


def test_export_kraus_round_trip(tmp_path, capsys):
    p = tmp_path / "k.json"
    run_cli(capsys, "export-kraus", "--beta", "0.7", "--t", "0.9", "--out", str(p))
    from entroflux.qubit_thermal import kraus_at

    assert eio.load_kraus(p) == kraus_at(QubitThermalModel(0.7), 0.9)
    assert run_cli(capsys, "export-kraus", "--beta", "0.7")[0] == 1


def test_output_is_deterministic(tmp_path):
    outs = []
    for threads in ("1", "4", "1"):
        target = tmp_path / f"s{len(outs)}.csv"
        subprocess.run(
            [sys.executable, "-m", "entroflux.cli", "scan", "--beta", "0.5", "--steps", "300", "--out", str(target)],
            check=True, capture_output=True, env={"ENTROFLUX_THREADS": threads, "PATH": ""},
        )
        outs.append(target.read_bytes())
    assert outs[0] == outs[1] == outs[2]
