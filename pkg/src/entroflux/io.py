"""File formats: Kraus-map JSON, TPM-result JSON, scenario config JSON, scan CSV.

Floats are written with ``repr`` (JSON) or 17 significant digits (CSV), so every
value parses back to the identical double.
"""
import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .cptp import KrausMap
from .errors import ConfigError, DimensionMismatch, ParseError
from .mitigation import UNITAL_SUFFICIENT_REFERENCE, MitigationReport
from .qubit_thermal import ConstantRate, DampedOscillatoryRate, TabulatedRate
from .tpm import TpmResult

SCAN_COLUMNS = (
    "t",
    "gamma",
    "Gamma",
    "z",
    "mean_dsigma",
    "dmean_dt",
    "var_dsigma",
    "dvar_dt",
    "I_t",
    "z_nonneg",
    "suff_met",
    "nec_met",
    "mitigating",
)


# ---------------------------------------------------------------------------
# complex matrices


def _matrix_to_json(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _matrix_from_json(obj, dim: Optional[int] = None) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix is not a nested array of [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"expected a d x d array of [re, im] pairs, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"operator of size {arr.shape[0]} in a dim-{dim} file")
    out = np.empty(arr.shape[:2], dtype=np.complex128)
    out.real = arr[..., 0]
    out.imag = arr[..., 1]
    return out


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc


def kraus_to_json(kmap: KrausMap) -> str:
    return json.dumps({"dim": kmap.dim, "operators": [_matrix_to_json(e) for e in kmap]})


def kraus_from_json(text: str) -> KrausMap:
    obj = _load_json(text)
    if not isinstance(obj, dict) or "dim" not in obj or "operators" not in obj:
        raise ParseError("Kraus file needs keys 'dim' and 'operators'")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError("'dim' must be a positive integer")
    ops = [_matrix_from_json(op, dim) for op in obj["operators"]]
    try:
        return KrausMap(ops)
    except ValueError as exc:
        if isinstance(exc, DimensionMismatch):
            raise
        raise ParseError(str(exc)) from exc


def save_kraus(kmap: KrausMap, path) -> None:
    Path(path).write_text(kraus_to_json(kmap) + "\n")


def load_kraus(path) -> KrausMap:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return kraus_from_json(text)


# ---------------------------------------------------------------------------
# TPM results


def _enc(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _dec(x) -> float:
    if x is None:
        return math.nan
    if x in ("inf", "-inf"):
        return float(x)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    raise ParseError(f"bad numeric cell {x!r}")


def _arr_enc(a: np.ndarray):
    return [_arr_enc(r) for r in a] if a.ndim > 1 else [_enc(float(v)) for v in a]


def _arr_dec(obj) -> np.ndarray:
    def walk(o):
        return [walk(v) for v in o] if isinstance(o, list) else _dec(o)

    if not isinstance(obj, list):
        raise ParseError("expected an array")
    return np.array(walk(obj), dtype=float)


_TPM_ARRAYS = ("p_forward", "p_backward", "delta_sigma", "p_in", "p_fin", "phi_in", "phi_fin")


def tpm_result_to_dict(result: TpmResult) -> dict:
    out = {}
    for name in _TPM_ARRAYS:
        val = getattr(result, name)
        if val is not None:
            out[name] = _arr_enc(np.asarray(val, dtype=float))
    if result.delta_sigma_closed is not None:
        out["delta_sigma_closed"] = _arr_enc(result.delta_sigma_closed)
    out["assumption_i_satisfied"] = result.assumption_i
    out["assumption_ii_satisfied"] = result.assumption_ii
    return out


def tpm_result_from_dict(obj: dict) -> TpmResult:
    try:
        kw = {name: _arr_dec(obj[name]) for name in _TPM_ARRAYS if name in obj}
        closed = obj.get("delta_sigma_closed")
        return TpmResult(
            delta_sigma_closed=None if closed is None else _arr_dec(closed),
            assumption_i=obj.get("assumption_i_satisfied"),
            assumption_ii=obj.get("assumption_ii_satisfied"),
            **kw,
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed TPM result: {exc}") from exc


def tpm_result_to_json(result: TpmResult) -> str:
    return json.dumps(tpm_result_to_dict(result))


def tpm_result_from_json(text: str) -> TpmResult:
    return tpm_result_from_dict(_load_json(text))


# ---------------------------------------------------------------------------
# scenario config


def parse_rate(value):
    """``constant:g0``, ``damped:g0,a,nu,tau_d``, ``tabulated:path`` or an equivalent dict."""
    if isinstance(value, dict):
        value = dict(value)
        kind = value.pop("kind", None)
        try:
            if kind == "constant":
                return ConstantRate(**value)
            if kind == "damped":
                return DampedOscillatoryRate(**value)
            if kind == "tabulated":
                return TabulatedRate.from_csv(value["path"])
        except (TypeError, KeyError, OSError, ValueError) as exc:
            raise ConfigError(f"bad rate {value!r}: {exc}") from exc
        raise ConfigError(f"unknown rate kind {kind!r}")
    if not isinstance(value, str) or ":" not in value:
        raise ConfigError(f"rate must look like 'kind:params', got {value!r}")
    kind, _, args = value.partition(":")
    try:
        if kind == "tabulated":
            return TabulatedRate.from_csv(args)
        vals = [float(v) for v in args.split(",")] if args else []
        if kind == "constant" and len(vals) == 1:
            return ConstantRate(vals[0])
        if kind == "damped" and len(vals) <= 4:
            return DampedOscillatoryRate(*vals)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad rate {value!r}: {exc}") from exc
    raise ConfigError(f"bad rate {value!r}")


@dataclass
class ScenarioConfig:
    """Scenario for the ``tpm`` and ``scan`` commands.

    Exactly one of ``kraus_file`` and ``qubit`` selects the system. ``qubit``
    holds ``beta``, ``omega``, ``rate`` and, for TPM runs, either ``t`` or
    ``Gamma`` (with optional ``omega_t``).
    """

    kraus_file: Optional[str] = None
    qubit: Optional[dict] = None
    observable_in: str = "z"
    observable_fin: Optional[str] = None
    initial_state: Optional[dict] = None
    t_max: float = 10.0
    steps: int = 2000
    grid: Optional[list] = None
    tol_tp: float = 1e-9
    tol_classify: float = 1e-7
    output: Optional[str] = None

    def validate(self) -> "ScenarioConfig":
        if (self.kraus_file is None) == (self.qubit is None):
            raise ConfigError("exactly one system source (kraus_file or qubit_thermal) is required")
        if self.grid is None:
            if not isinstance(self.steps, int) or self.steps < 2:
                raise ConfigError("steps must be an integer >= 2")
            if not self.t_max > 0:
                raise ConfigError("t_max must be > 0")
        else:
            g = np.asarray(self.grid, dtype=float)
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or g[0] < 0:
                raise ConfigError("explicit grid must be non-negative and strictly increasing")
        for name in ("observable_in", "observable_fin"):
            v = getattr(self, name)
            if v is not None and v not in ("z", "x", "computational"):
                raise ConfigError(f"{name} must be one of z, x, computational")
        if self.qubit is not None and "beta" not in self.qubit:
            raise ConfigError("qubit_thermal needs 'beta'")
        return self

    def time_grid(self) -> np.ndarray:
        if self.grid is not None:
            return np.asarray(self.grid, dtype=float)
        return np.linspace(0.0, self.t_max, self.steps)


def config_from_dict(obj: dict) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    system = obj.get("system", {})
    obs = obj.get("observables", {})
    time = obj.get("time", {})
    tol = obj.get("tolerances", {})
    out = obj.get("output", {})
    cfg = ScenarioConfig(
        kraus_file=system.get("kraus_file"),
        qubit=system.get("qubit_thermal"),
        observable_in=obs.get("in", "z"),
        observable_fin=obs.get("fin"),
        initial_state=obj.get("initial_state"),
        t_max=time.get("t_max", 10.0),
        steps=time.get("steps", 2000),
        grid=time.get("grid"),
        tol_tp=tol.get("tol_tp", 1e-9),
        tol_classify=tol.get("classify", 1e-7),
        output=out.get("path") if isinstance(out, dict) else out,
    )
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return config_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid config JSON: {exc}") from exc


def initial_state_matrix(spec: Optional[dict], dim: int) -> np.ndarray:
    """Density matrix from ``{"bloch": [x, y, z]}`` or ``{"matrix": [[[re, im], ...]]}``."""
    if spec is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    if "bloch" in spec:
        if dim != 2:
            raise ConfigError("a Bloch vector initial state needs a qubit system")
        x, y, z = (float(v) for v in spec["bloch"])
        return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])
    if "matrix" in spec:
        return _matrix_from_json(spec["matrix"], dim)
    raise ConfigError("initial_state needs 'bloch' or 'matrix'")


# ---------------------------------------------------------------------------
# scan CSV


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    v = float(v)
    if not math.isfinite(v):
        return ""
    return format(v, ".17g")


def scan_to_csv(report: MitigationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for p in report.points:
        w.writerow([_cell(getattr(p, c)) for c in SCAN_COLUMNS])
    return buf.getvalue()


def read_scan_csv(text: str) -> list:
    """Rows as dicts of floats/bools, ``nan`` for empty cells."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SCAN_COLUMNS:
        raise ParseError(f"unexpected CSV header {reader.fieldnames}")
    for r in reader:
        row = {}
        for k, v in r.items():
            if v in ("true", "false"):
                row[k] = v == "true"
            else:
                row[k] = float(v) if v != "" else math.nan
        rows.append(row)
    return rows


def scan_summary(report: MitigationReport) -> dict:
    return {
        "windows": [list(w) for w in report.windows],
        "necessary_gamma_bound": _enc(report.necessary_gamma_bound),
        "sufficient_gamma_bound": report.sufficient_gamma_bound,
        "x_plus": report.x_plus,
        "guarantee_violations": list(report.guarantee_violations),
        "note": (
            f"for unital maps the corresponding sufficient threshold is about "
            f"{UNITAL_SUFFICIENT_REFERENCE} (reference value, not computed here)"
        ),
    }
