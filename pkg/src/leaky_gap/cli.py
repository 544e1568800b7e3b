"""Batch front end: ``leaky-gap <command> --config job.json [--out prefix]``.

Exit status: 0 on success, 2 when a certificate is refused because the
instance has fewer than two bound states, 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .bs_operator import SpectralResult, discrete_spectrum
from .certificate import (NORM2_FACTOR, NORM2_FACTOR_PRINTED, CertificateRefused, certified_bound,
                          curve_constants, gap_identity_diagnostics)
from .comparison1d import comparison_spectrum, strong_coupling_residual
from .eigenfunction import (DensityModel, evaluate, export_field_csv, l2_norm_boundary,
                            lemma_diagnostics, make_grid, norm_report, trace_consistency)
from .fd_oracle import crosscheck
from .geometry import CurveSpec, build_curve, geometry_summary

COMMANDS = ("geometry", "solve", "certify", "asymptotics", "oracle", "diagnostics")
SPECTRAL = {"solve", "certify", "asymptotics", "oracle", "diagnostics"}
_TOP_KEYS = {"curve", "alpha", "alphas", "command", "solver", "oracle", "certificate", "grid",
             "samples", "output"}
_BLOCKS = {
    "solver": {"n_nodes": 256, "tol": 1e-10, "kappa_min": None, "max_states": None},
    "oracle": {"A": None, "h": 1 / 32, "eps": None, "states": 2},
    "certificate": {"alpha_range": None},
    "grid": {"cells": 100},
}
_CLOSED_BY_KIND = {"circle": True, "ellipse": True, "fourier": True, "segment": False, "arc": False}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class JobConfig:
    curve: CurveSpec
    command: str
    alpha: float | None
    alphas: tuple = ()
    solver: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    samples: int = 2048
    output: str | None = None


def _block(raw: dict, name: str) -> dict:
    given = raw.get(name, {}) or {}
    if not isinstance(given, dict):
        raise ConfigError(f"{name}: expected an object")
    extra = set(given) - set(_BLOCKS[name])
    if extra:
        raise ConfigError(f"unknown key(s) {', '.join(f'{name}.{k}' for k in sorted(extra))}")
    out = dict(_BLOCKS[name])
    out.update(given)
    return out


def parse_config(text: str, command: str | None = None) -> JobConfig:
    """Validate a JSON job description and fill defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown key(s) {', '.join(sorted(extra))}")
    cmd = raw.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError(f"command: config says {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {cmd!r}")
    if "curve" not in raw or not isinstance(raw["curve"], dict):
        raise ConfigError("curve: required object")
    curve_raw = dict(raw["curve"])
    if "closed" not in curve_raw and curve_raw.get("kind") in _CLOSED_BY_KIND:
        curve_raw["closed"] = _CLOSED_BY_KIND[curve_raw["kind"]]
    try:
        curve = CurveSpec.from_json(curve_raw)
    except ValueError as exc:
        raise ConfigError(f"curve: {exc}") from None
    alpha = raw.get("alpha")
    if alpha is not None:
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not math.isfinite(alpha):
            raise ConfigError("alpha: expected a number")
        alpha = float(alpha)
        if not alpha > 0:
            raise ConfigError("alpha: must be positive")
    alphas = tuple(float(a) for a in raw.get("alphas", ()) or ())
    if any(not a > 0 for a in alphas):
        raise ConfigError("alphas: all values must be positive")
    if cmd == "asymptotics":
        if not alphas:
            if alpha is None:
                raise ConfigError("alphas: required for asymptotics")
            alphas = (alpha,)
    elif cmd in SPECTRAL and alpha is None:
        raise ConfigError(f"alpha: required for {cmd}")
    solver = _block(raw, "solver")
    if not (isinstance(solver["n_nodes"], int) and solver["n_nodes"] >= 32):
        raise ConfigError("solver.n_nodes: expected an integer >= 32")
    if not solver["tol"] > 0:
        raise ConfigError("solver.tol: must be positive")
    ref = alpha if alpha is not None else (min(alphas) if alphas else 1.0)
    if solver["kappa_min"] is None:
        solver["kappa_min"] = 1e-3 * ref
    elif not solver["kappa_min"] > 0:
        raise ConfigError("solver.kappa_min: must be positive")
    oracle = _block(raw, "oracle")
    certificate = _block(raw, "certificate")
    ar = certificate["alpha_range"]
    if ar is not None:
        if len(ar) != 2 or not 0 < ar[0] <= ar[1]:
            raise ConfigError("certificate.alpha_range: expected [lo, hi] with 0 < lo <= hi")
        certificate["alpha_range"] = (float(ar[0]), float(ar[1]))
    grid = _block(raw, "grid")
    samples = raw.get("samples", 2048)
    if not (isinstance(samples, int) and samples >= 64):
        raise ConfigError("samples: expected an integer >= 64")
    return JobConfig(curve=curve, command=cmd, alpha=alpha, alphas=alphas, solver=solver,
                     oracle=oracle, certificate=certificate, grid=grid, samples=samples,
                     output=raw.get("output"))


# --- reports -------------------------------------------------------------------------

@dataclass
class Report:
    command: str
    data: dict
    exit_code: int = 0
    sweep: list | None = None          # rows for <prefix>_sweep.csv
    field: object | None = None        # FieldSample for <prefix>_field.csv


def _spectral_json(res: SpectralResult) -> dict:
    return {"alpha": res.alpha, "n": res.n, "n_requested": res.n_requested,
            "kappa_min": res.kappa_min, "tol": res.tol, "n_states": res.n_states,
            "energies": [s.energy for s in res.states],
            "states": [{"index": s.index, "energy": s.energy, "kappa": s.kappa,
                        "bs_eigenvalue": s.bs_eigenvalue,
                        "bs_eigenvalue_residual": s.bs_eigenvalue_residual} for s in res.states]}


def _geometry_json(curve, summary) -> dict:
    c = curve_constants(summary)
    return {"L": summary.L, "K": summary.K, "diameter": summary.diameter, "R": summary.R,
            "x0": summary.x0, "M_half": summary.M_half, "M_full": summary.M_full,
            "M": summary.M, "closed": summary.closed, "delta0": c.delta0, "b1": c.b1,
            "curve": curve.spec.to_json()}


def _solve(cfg: JobConfig, curve, alpha: float, max_states=None) -> SpectralResult:
    s = cfg.solver
    ms = s["max_states"] if max_states is None else max_states
    return discrete_spectrum(curve, alpha, s["n_nodes"], kappa_min=s["kappa_min"], tol=s["tol"],
                             max_states=ms)


def run(cfg: JobConfig) -> Report:
    curve = build_curve(cfg.curve, cfg.samples)
    summary = geometry_summary(curve)
    cmd = cfg.command
    if cmd == "geometry":
        return Report(cmd, _geometry_json(curve, summary))
    if cmd == "solve":
        return Report(cmd, _spectral_json(_solve(cfg, curve, cfg.alpha)))
    if cmd == "certify":
        res = _solve(cfg, curve, cfg.alpha, max_states=2)
        try:
            cert = certified_bound(res, curve_constants(summary),
                                   alpha_range=cfg.certificate["alpha_range"])
        except CertificateRefused as exc:
            return Report(cmd, {"refused": True, "reason": str(exc), "n_states": res.n_states,
                                "E0": res.states[0].energy if res.states else None}, exit_code=2)
        return Report(cmd, cert.to_json())
    if cmd == "asymptotics":
        return _asymptotics(cfg, curve)
    if cmd == "oracle":
        o = cfg.oracle
        res = _solve(cfg, curve, cfg.alpha, max_states=o["states"])
        h = float(o["h"])
        eps = tuple(o["eps"]) if o["eps"] is not None else None
        rep = crosscheck(curve, cfg.alpha, res, k=o["states"], h=h, eps_values=eps, A=o["A"],
                         summary=summary)
        return Report(cmd, {"alpha": rep.alpha, "A": rep.A, "bs_energies": rep.bs_energies,
                            "fd_extrapolated": rep.fd_extrapolated, "discrepancy": rep.discrepancy,
                            "stages": rep.stages, "path": rep.path, "monotone": rep.monotone,
                            "bias_corrected": rep.bias_corrected,
                            "runs": [{"h": r.h, "eps": r.eps, "energies": r.energies, "size": r.size,
                                      "ground_positive": r.ground_positive,
                                      "excited_sign_change": r.excited_sign_change}
                                     for r in rep.runs]})
    if cmd == "diagnostics":
        return _diagnostics(cfg, curve, summary)
    raise ConfigError(f"unknown command {cmd!r}")


def _asymptotics(cfg: JobConfig, curve) -> Report:
    n = cfg.solver["n_nodes"]
    bc = "periodic" if curve.closed else "neumann"
    spec = comparison_spectrum(curve, bc, m_modes=2)
    upper = None if curve.closed else comparison_spectrum(curve, "dirichlet", m_modes=2)
    t0 = strong_coupling_residual(curve, cfg.alphas, j=0, n=n, spectrum=spec, upper=upper)
    t1 = strong_coupling_residual(curve, cfg.alphas, j=1, n=n, spectrum=spec, upper=upper)
    rows = [{"alpha": r0.alpha, "E0": r0.energy, "E1": r1.energy, "residual0": r0.residual,
             "residual1": r1.residual} for r0, r1 in zip(t0.rows, t1.rows)]
    data = {"bc": bc, "mu": spec.mu[:2], "a": spec.a, "rows": rows,
            "monotone0": t0.monotone, "monotone1": t1.monotone}
    if upper is not None:
        data["mu_dirichlet"] = upper.mu[:2]
    return Report("asymptotics", data, sweep=rows)


def _diagnostics(cfg: JobConfig, curve, summary) -> Report:
    res = _solve(cfg, curve, cfg.alpha, max_states=2)
    consts = curve_constants(summary)
    grid = make_grid(curve, summary, cells=cfg.grid["cells"])
    out = {"spectrum": _spectral_json(res), "states": []}
    fields = []
    for st in res.states[:2]:
        model = DensityModel(st)
        fs = evaluate(st, grid.points, normalization="sup", gradient=True, model=model)
        fields.append(fs)
        nr = norm_report(st, grid, fs)
        lr = lemma_diagnostics(st, grid, fs, C1=consts.C1_printed,
                               l2_norm=l2_norm_boundary(st) * fs.scale)
        tr = trace_consistency(st)
        out["states"].append({
            "index": st.index, "energy": st.energy,
            "norm1_slack": nr.norm1_slack, "norm1_holds": nr.norm1_holds,
            "norm1_corrected_slack": nr.norm1_slack * NORM2_FACTOR_PRINTED / NORM2_FACTOR,
            "argmax_on_curve": nr.argmax_on_curve, "l2_grid": nr.l2_grid, "l2_boundary": nr.l2_boundary,
            "ground_min": lr.ground_min, "ground_floor": lr.ground_floor, "floor_holds": lr.floor_holds,
            "decay_violations": lr.decay_violations, "extrema_on_curve": lr.extrema_on_curve,
            "sign_change": lr.sign_change, "zero_in_hull": lr.zero_in_hull,
            "trace_defect": tr.max_defect})
    if len(res.states) >= 2:
        gi = gap_identity_diagnostics(res, grid, fields[0], fields[1], consts)
        out["gap_identity"] = gi.diagnostics()
    return Report("diagnostics", out, field=fields[0] if fields else None)


# --- serialization -------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


class _FloatEncoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        return _encode(o, 0)


def _encode(o, depth: int):
    pad, inner = "  " * depth, "  " * (depth + 1)
    if isinstance(o, float):
        yield "null" if not math.isfinite(o) else format(o, ".17g")
    elif isinstance(o, bool) or o is None:
        yield json.dumps(o)
    elif isinstance(o, int):
        yield str(o)
    elif isinstance(o, str):
        yield json.dumps(o)
    elif isinstance(o, dict):
        if not o:
            yield "{}"
            return
        yield "{\n"
        for i, (k, v) in enumerate(o.items()):
            yield f"{inner}{json.dumps(k)}: "
            yield from _encode(v, depth + 1)
            yield ",\n" if i < len(o) - 1 else "\n"
        yield pad + "}"
    elif isinstance(o, list):
        if not o:
            yield "[]"
            return
        yield "[\n"
        for i, v in enumerate(o):
            yield inner
            yield from _encode(v, depth + 1)
            yield ",\n" if i < len(o) - 1 else "\n"
        yield pad + "]"
    else:
        raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON with 17 significant digits; non-finite floats become null."""
    return "".join(_encode(_plain(obj), 0)) + "\n"


def write_report(report: Report, prefix: str) -> list[str]:
    written = []
    path = f"{prefix}.json"
    with open(path, "w") as fh:
        fh.write(dumps({"command": report.command, **report.data}))
    written.append(path)
    if report.sweep is not None:
        path = f"{prefix}_sweep.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["alpha", "E0", "E1", "residual0", "residual1"])
            for r in report.sweep:
                wr.writerow([format(float(r[k]), ".17g") for k in ("alpha", "E0", "E1", "residual0",
                                                                    "residual1")])
        written.append(path)
    if report.field is not None:
        path = f"{prefix}_field.csv"
        export_field_csv(report.field, path)
        written.append(path)
    return written


def _thread_limit():
    value = os.environ.get("LEAKY_GAP_THREADS")
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, int(value)))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="leaky-gap", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON job description")
    ap.add_argument("--out", default=None, help="output prefix (default: config 'output' or command)")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read(), args.command)
        with _thread_limit():
            report = run(cfg)
        prefix = args.out or cfg.output or args.command
        for path in write_report(report, prefix):
            print(path)
        return report.exit_code
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit status 1
        print(f"error: {type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
