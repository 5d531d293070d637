"""``entroflux`` command line.

Exit codes: 0 ok, 1 input error, 2 conformance violation.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import io as eio
from .cptp import invariant_state, validate
from .errors import AbsoluteIrreversibility, ConfigError, EntrofluxError, UndefinedCells
from .mitigation import scan
from .qubit_thermal import QubitThermalModel, kraus_at, thermal_kraus
from .reversal import build_potential, classify_kraus
from .tpm import (
    average_via_relative_entropies,
    computational_basis,
    moments,
    run_tpm,
    sigma_x_basis,
    sigma_z_basis,
    tpm_states,
    verify_fluctuation_relation,
)

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2


class Violation(Exception):
    pass


def _workers() -> int:
    raw = os.environ.get("ENTROFLUX_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ENTROFLUX_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("ENTROFLUX_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return format(x, ".6g")


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    kmap = eio.load_kraus(args.map_file)
    rep = validate(kmap, args.tol)
    lines = [
        f"dim: {kmap.dim}  operators: {len(kmap)}",
        f"trace_preserving: {str(rep.trace_preserving).lower()}  residual: {_fmt(rep.tp_residual)}",
        f"completely_positive: {str(rep.completely_positive).lower()}  min_choi_eigenvalue: {_fmt(rep.min_choi_eigenvalue)}",
        f"unital: {str(rep.unital).lower()}  residual: {_fmt(rep.unital_residual)}",
    ]
    if rep.cptp:
        try:
            pi = invariant_state(kmap)
        except EntrofluxError as exc:
            lines.append(f"invariant_state: unavailable ({type(exc).__name__}: {exc})")
        else:
            pot = build_potential(pi)
            lines.append("invariant_spectrum: " + " ".join(_fmt(w) for w in pot.spectrum.eigenvalues))
            cls = classify_kraus(kmap, pot)
            dphi = " ".join("unclassified" if d is None else _fmt(d) for d in cls.delta_phi)
            lines.append(f"assumption_i: {str(cls.satisfies_assumption_i).lower()}  delta_phi: {dphi}")
    print("\n".join(lines))
    return EXIT_OK if rep.cptp else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# config assembly


def _build_config(args) -> eio.ScenarioConfig:
    cfg = eio.load_config(args.config) if args.config else eio.ScenarioConfig()
    qubit_flags = any(getattr(args, k, None) is not None for k in ("beta", "omega", "rate", "t", "gamma_int"))
    if getattr(args, "kraus", None):
        cfg.kraus_file, cfg.qubit = args.kraus, None
    elif qubit_flags or (cfg.kraus_file is None and cfg.qubit is None):
        q = dict(cfg.qubit or {})
        for flag, key in (("beta", "beta"), ("omega", "omega"), ("rate", "rate"), ("t", "t"), ("gamma_int", "Gamma")):
            v = getattr(args, flag, None)
            if v is not None:
                q[key] = v
        q.setdefault("beta", 0.0)
        cfg.qubit = q
    for flag, key in (("t_max", "t_max"), ("steps", "steps"), ("out", "output")):
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "tol", None) is not None:
        cfg.tol_tp = args.tol
    return cfg.validate()


def _model(q: dict) -> QubitThermalModel:
    rate = eio.parse_rate(q.get("rate", "damped:1,1.5,5,2"))
    try:
        return QubitThermalModel(float(q["beta"]), float(q.get("omega", 1.0)), rate)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad qubit_thermal parameters: {exc}") from exc


def _observable(name: str, dim: int):
    if name == "computational":
        return computational_basis(dim)
    if dim != 2:
        raise ConfigError(f"observable '{name}' is only defined for qubits")
    return sigma_z_basis() if name == "z" else sigma_x_basis()


# ---------------------------------------------------------------------------
# tpm


def cmd_tpm(args) -> int:
    cfg = _build_config(args)
    if cfg.kraus_file is not None:
        kmap = eio.load_kraus(cfg.kraus_file)
        rep = validate(kmap, cfg.tol_tp)
        if not rep.cptp:
            raise Violation(f"map is not CPTP (tp residual {_fmt(rep.tp_residual)}, min Choi eigenvalue {_fmt(rep.min_choi_eigenvalue)})")
    else:
        q = cfg.qubit
        model = _model(q)
        if "Gamma" in q:
            kmap = thermal_kraus(model.z_inf, float(q["Gamma"]), float(q.get("omega_t", 0.0)))
        elif "t" in q:
            kmap = kraus_at(model, float(q["t"]))
        else:
            raise ConfigError("qubit_thermal TPM needs 't' or 'Gamma'")
    obs_in = _observable(cfg.observable_in, kmap.dim)
    obs_fin = _observable(cfg.observable_fin or cfg.observable_in, kmap.dim)
    rho0 = eio.initial_state_matrix(cfg.initial_state, kmap.dim)
    pi = invariant_state(kmap)
    res = run_tpm(rho0, kmap, obs_in, obs_fin, pi=pi, tol=cfg.tol_classify)

    out = {"result": eio.tpm_result_to_dict(res)}
    try:
        m1, m2 = moments(res, 2)
        out.update(mean=m1, second_moment=m2, variance=m2 - m1 * m1)
    except UndefinedCells:
        out.update(mean=None, second_moment=None, variance=None)
    try:
        fc = verify_fluctuation_relation(res)
        out.update(fluctuation_residual=fc.max_residual, integral_residual=fc.integral_residual)
    except (AbsoluteIrreversibility, UndefinedCells) as exc:
        out.update(fluctuation_residual=None, integral_residual=None, fluctuation_note=str(exc))
    rho_in, rho_tau, rho_fin = tpm_states(rho0, kmap, obs_in, obs_fin)
    try:
        out["mean_via_relative_entropies"] = average_via_relative_entropies(rho_in, rho_tau, rho_fin, pi)
    except EntrofluxError:
        out["mean_via_relative_entropies"] = None
    _emit(json.dumps(out, indent=2) + "\n", cfg.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan


def cmd_scan(args) -> int:
    cfg = _build_config(args)
    if cfg.qubit is None:
        raise ConfigError("scan needs a qubit_thermal system")
    model = _model(cfg.qubit)
    report = scan(model, cfg.time_grid(), workers=_workers())
    _emit(eio.scan_to_csv(report), cfg.output)
    summary = eio.scan_summary(report)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(json.dumps(summary, indent=2) + "\n")
    windows = ", ".join(f"[{a:.6f}, {b:.6f}]" for a, b in report.windows) or "none"
    print(
        f"mitigation windows: {windows}\n"
        f"sufficient Gamma*: {_fmt(report.sufficient_gamma_bound)}  "
        f"necessary Gamma*: {_fmt(report.necessary_gamma_bound)}\n"
        f"note: {summary['note']}",
        file=sys.stderr,
    )
    return EXIT_VIOLATION if report.guarantee_violations else EXIT_OK


# ---------------------------------------------------------------------------
# export-kraus


def cmd_export_kraus(args) -> int:
    model = _model({"beta": args.beta, "omega": args.omega, "rate": args.rate or "damped:1,1.5,5,2"})
    if (args.t is None) == (args.gamma_int is None):
        raise ConfigError("give exactly one of --t and --gamma-int")
    if args.gamma_int is not None:
        kmap = thermal_kraus(model.z_inf, args.gamma_int, args.omega_t)
    else:
        kmap = kraus_at(model, args.t)
    _emit(eio.kraus_to_json(kmap) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entroflux", description="Entropy production of quantum maps")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a Kraus JSON file")
    p.add_argument("map_file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_validate)

    def qubit_flags(p, with_time):
        p.add_argument("--config", help="scenario JSON; flags override it")
        p.add_argument("--beta", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--rate", help="constant:G0 | damped:G0,A,NU,TAU | tabulated:PATH")
        p.add_argument("--out")
        p.add_argument("--tol", type=float)
        if with_time:
            p.add_argument("--t-max", type=float)
            p.add_argument("--steps", type=int)

    p = sub.add_parser("tpm", help="two-point-measurement statistics")
    qubit_flags(p, False)
    p.add_argument("--kraus", help="Kraus JSON file instead of the qubit model")
    p.add_argument("--t", type=float, help="evaluation time")
    p.add_argument("--gamma-int", type=float, help="integrated rate Gamma instead of --t")
    p.set_defaults(func=cmd_tpm)

    p = sub.add_parser("scan", help="time scan of entropy moments and mitigation flags (CSV)")
    qubit_flags(p, True)
    p.add_argument("--report", help="also write a JSON summary here")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("export-kraus", help="write the qubit thermal Kraus map as JSON")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--rate")
    p.add_argument("--t", type=float)
    p.add_argument("--gamma-int", type=float)
    p.add_argument("--omega-t", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_kraus)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Violation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (EntrofluxError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
