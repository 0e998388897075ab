"""Command-line front end.

Usage::

    ilwlab COMMAND [key=value ...] [config=FILE]

``config`` names a file of ``key=value`` lines (``#`` starts a comment);
values given on the command line override it. Unknown keys are rejected.
Outputs go to ``out_dir`` (default: ``$ILWLAB_OUT_DIR`` or ``./ilwlab_out``).

Exit status: 0 pass, 1 verdict failed, 2 configuration error,
3 numerical divergence.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, DivergenceError, IlwlabError
from .evolution import EvolutionConfig, evolve, invariant_report
from .experiments import (
    S0,
    deep_water,
    product_bound_audit,
    qdelta_scan,
    shallow_water,
    strichartz_exponents,
)
from .gauge import RHS_TERMS, gauged_residual
from .io import (
    DIAGNOSTIC_HEADER,
    REPORT_HEADER,
    TRAJECTORY_HEADER,
    atomic_write_text,
    report_rows,
    trajectory_rows,
    write_csv,
    write_report,
)
from .normalform import DEFAULT_M_GRID, NormalFormSpec, ratio_estimate
from .spectral import field_from_function, make_grid

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
OUT_DIR_ENV = "ILWLAB_OUT_DIR"


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text):
    return float(text)


_COMMON = {"seed": (int, 0), "out_dir": (str, None)}
_SOLVER = {
    "grid.n": (int, 256),
    "grid.period": (_float, 2 * math.pi),
    "dt": (_float, 1e-3),
    "t_final": (_float, 1.0),
}

SCHEMA = {
    "simulate": {
        **_SOLVER,
        "equation": (str, "ilw"),
        "delta": (_float, 1.0),
        "amplitude": (_float, 0.5),
        "mode": (int, 1),
        "dealias": (_bool, True),
        "dealias_mode": (str, "truncate"),
        "stride": (int, 10),
        "kdv_coefficient": (_float, 1.0),
    },
    "deepwater": {**_SOLVER, "s": (_float, 0.25), "deltas": (_floats, (1, 2, 4, 8, 16, 32)), "linear": (_bool, False)},
    "shallowwater": {
        **_SOLVER,
        "s": (_float, 0.25),
        "deltas": (_floats, (1, 0.5, 0.25, 0.125)),
        "linear": (_bool, False),
    },
    "qscan": {"grid.n": (int, 256), "s_list": (_floats, (0.0, 0.25)), "deltas": (_floats, tuple(2.0**k for k in range(-2, 7)))},
    "gauge-audit": {
        **_SOLVER,
        "dt": (_float, 5e-4),
        "t_final": (_float, 0.5),
        "delta": (_float, 1.0),
        "amplitude": (_float, 0.3),
        "tol": (_float, 1e-4),
        "inflation": (_float, 10.0),
    },
    "nf-audit": {
        "operator": (str, "N1_leqM"),
        "grid.n": (int, 128),
        "s": (_float, 0.2),
        "theta": (_float, 0.25),
        "params": (_floats, DEFAULT_M_GRID),
        "n_samples": (int, 1000),
        "slack": (_float, 0.1),
    },
    "ineq-audit": {
        "grid.n": (int, 512),
        "s": (_float, 0.3),
        "Ns": (_floats, (8, 16, 32, 64, 128)),
        "n_samples": (int, 1000),
    },
    "exponents": {"s": (_float, 0.25), "p": (_float, 4.0)},
}
COMMANDS = tuple(SCHEMA)


class UsageError(ConfigurationError):
    pass


def _read_config_file(path):
    pairs = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        pairs[k.strip()] = v.strip()
    return pairs


def parse_config(argv):
    """``argv`` (without program name) -> ``(command, params, raw)``."""
    if not argv:
        raise UsageError(f"missing command; choose from {', '.join(COMMANDS)}")
    command, rest = argv[0], argv[1:]
    if command not in SCHEMA:
        raise UsageError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    cli = {}
    for tok in rest:
        if "=" not in tok:
            raise ConfigurationError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        cli[k.strip()] = v.strip()
    raw = {}
    if "config" in cli:
        raw.update(_read_config_file(cli.pop("config")))
    raw.update(cli)
    schema = {**_COMMON, **SCHEMA[command]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigurationError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    params = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                params[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigurationError(f"invalid value for {key}: {raw[key]!r}") from exc
        else:
            params[key] = default
    if params["out_dir"] is None:
        params["out_dir"] = os.environ.get(OUT_DIR_ENV, "ilwlab_out")
    return command, params, raw


# --- commands -------------------------------------------------------------------------


def _write_report_outputs(out, stem, report, outputs):
    outputs.append(write_csv(out / f"{stem}.csv", REPORT_HEADER, report_rows(report.params, report.errors)))
    outputs.append(write_report(report, out / f"{stem}.report.json"))
    return report.passed, report.verdicts


def _cmd_simulate(p, out, outputs):
    grid = make_grid(p["grid.n"], p["grid.period"])
    amp, mode = p["amplitude"], p["mode"]
    kx = 2 * math.pi * mode / grid.period
    u0 = field_from_function(lambda x: amp * np.cos(kx * x), grid)
    cfg = EvolutionConfig(
        p["equation"],
        grid,
        p["dt"],
        p["t_final"],
        p["delta"],
        dealias=p["dealias"],
        dealias_mode=p["dealias_mode"],
        snapshot_stride=p["stride"],
        kdv_coefficient=p["kdv_coefficient"],
    )
    traj = evolve(u0, cfg)
    outputs.append(write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, trajectory_rows(traj)))
    inv = invariant_report(traj)
    rows = []
    for t, m, l2 in zip(inv.times, inv.mean, inv.l2_norm):
        rows.append((float(t), "mean", float(m)))
        rows.append((float(t), "l2_norm", float(l2)))
    outputs.append(write_csv(out / "diagnostics.csv", DIAGNOSTIC_HEADER, rows))
    summary = {"mean_drift": inv.mean_drift, "l2_relative_drift": inv.l2_relative_drift}
    return True, summary


def _cmd_deepwater(p, out, outputs):
    rep = deep_water(
        s=p["s"], delta_grid=p["deltas"], n_modes=p["grid.n"], dt=p["dt"], t_final=p["t_final"], linear=p["linear"]
    )
    return _write_report_outputs(out, "deepwater", rep, outputs)


def _cmd_shallowwater(p, out, outputs):
    rep = shallow_water(
        s=p["s"], delta_grid=p["deltas"], n_modes=p["grid.n"], dt=p["dt"], t_final=p["t_final"], linear=p["linear"]
    )
    return _write_report_outputs(out, "shallowwater", rep, outputs)


def _cmd_qscan(p, out, outputs):
    rep = qdelta_scan(s_list=p["s_list"], delta_list=p["deltas"], n_modes=p["grid.n"])
    return _write_report_outputs(out, "qscan", rep, outputs)


def _cmd_gauge_audit(p, out, outputs):
    grid = make_grid(p["grid.n"], p["grid.period"])
    amp = p["amplitude"]
    u0 = field_from_function(lambda x: amp * np.cos(x), grid)
    traj = evolve(u0, EvolutionConfig("ilw", grid, p["dt"], p["t_final"], p["delta"]))
    base = gauged_residual(traj, readings=("q_effective",))
    rows = [(float(t), "residual", float(r)) for t, r in zip(base.times, base.series())]
    ok = base.max_residual <= p["tol"]
    summary = {"max_residual": base.max_residual}
    for term in RHS_TERMS:
        dropped = gauged_residual(traj, drop=term, readings=("q_effective",))
        rows += [(float(t), f"residual_drop_{term}", float(r)) for t, r in zip(dropped.times, dropped.series())]
        summary[f"drop_{term}"] = dropped.max_residual
        ok = ok and dropped.max_residual >= p["inflation"] * base.max_residual
    outputs.append(write_csv(out / "gauge.csv", DIAGNOSTIC_HEADER, rows))
    return ok, summary


def _cmd_nf_audit(p, out, outputs):
    op = p["operator"]
    spec = NormalFormSpec(M=1.0, s=p["s"], theta=p["theta"], grid=make_grid(p["grid.n"]))
    params = None if op == "N2_0_dyadic" and "params" not in p.get("_raw", {}) else p["params"]
    rep = ratio_estimate(op, spec, n_samples=p["n_samples"], params=params, seed=p["seed"])
    outputs.append(write_csv(out / "nf_audit.csv", REPORT_HEADER, report_rows(rep.params, rep.ratios)))
    outputs.append(write_report(rep, out / "nf_audit.report.json"))
    ok = rep.slope <= rep.bound_exponent + p["slack"]
    return ok, {"slope": rep.slope, "bound_exponent": rep.bound_exponent}


def _cmd_ineq_audit(p, out, outputs):
    rep = product_bound_audit(
        s=p["s"], N_grid=tuple(int(N) for N in p["Ns"]), n_samples=p["n_samples"], n_modes=p["grid.n"], seed=p["seed"]
    )
    return _write_report_outputs(out, "ineq_audit", rep, outputs)


def _cmd_exponents(p, out, outputs):
    alpha, beta = strichartz_exponents(p["s"], p["p"])
    print(f"alpha={alpha!r} beta={beta!r} s0={S0!r}")
    return True, {"alpha": alpha, "beta": beta, "s0": S0}


_HANDLERS = {
    "simulate": _cmd_simulate,
    "deepwater": _cmd_deepwater,
    "shallowwater": _cmd_shallowwater,
    "qscan": _cmd_qscan,
    "gauge-audit": _cmd_gauge_audit,
    "nf-audit": _cmd_nf_audit,
    "ineq-audit": _cmd_ineq_audit,
    "exponents": _cmd_exponents,
}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run(command, params, raw=None) -> int:
    out = Path(params["out_dir"])
    outputs = []
    manifest = {
        "command": command,
        "config": {k: v for k, v in params.items()},
        "version": __version__,
        "started": _now(),
    }
    p = dict(params, _raw=raw or {})
    status, code, summary, verdict = "ok", EXIT_OK, {}, "pass"
    try:
        ok, summary = _HANDLERS[command](p, out, outputs)
        if not ok:
            status, code, verdict = "failed", EXIT_FAIL, "fail"
    except DivergenceError as exc:
        status, code, verdict = "diverged", EXIT_DIVERGED, "diverged"
        summary = {"error": str(exc), "time": exc.time, "partial": True}
        print(f"error: {exc}", file=sys.stderr)
    outputs.append(atomic_write_text(out / "verdict", verdict + "\n"))
    manifest.update(
        finished=_now(),
        status=status,
        verdict=verdict,
        summary=summary,
        outputs=sorted(str(Path(o).name) for o in outputs) + ["manifest.json"],
    )
    atomic_write_text(out / "manifest.json", json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help"):
        print(__doc__)
        print("commands:", ", ".join(COMMANDS))
        return EXIT_OK
    try:
        command, params, raw = parse_config(argv)
        return run(command, params, raw)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IlwlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
