"""Command-line front end.

Model parameters are passed as ``--name value`` (dashes map to underscores),
for example ``heomcp certify --model jaynes_cummings --gamma 10 --zeta 1``.
In ``sweep`` a parameter value ``start:stop:count`` spans a linear range.

Exit codes: 0 success, 1 uncertified or unproven, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .certifier import (CertifierConfig, bound_eigenvalue_floor, certify_after_tp, certify_analytic, certify_model,
                        classify, NotAvailableError)
from .models import MODEL_NAMES, ModelError, build_model, model_from_json, _BUILTINS
from .nonmarkov import BlpConfig, blp_analysis
from .propagator import coherence_csv, coherence_series, propagate
from .synthesis import PRESETS, SynthesisError, synthesize_heom, verify_synthesis

EXIT_OK, EXIT_UNPROVEN, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "HEOMCP_THREADS"

# options owned by the parser; every other --name value pair is a model parameter
_FIXED = {
    "--model", "--model-json", "--init", "--output", "--format", "--t-end", "--dt", "--t-p", "--delta-min",
    "--horizon", "--preset", "--max-depth", "--workers", "--basis-degree", "--max-iter", "--tol-v", "--tol-psd",
    "--tol-eq", "--coherence", "--n-phi", "--n-theta", "--csv", "--no-analytic",
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heomcp", description="Complete-positivity certificates for HEOMs.")
    p.add_argument("--version", action="version", version=f"heomcp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp, json_ok=True):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--model", choices=MODEL_NAMES)
        if json_ok:
            g.add_argument("--model-json", help="path to a user model in the JSON schema")
        sp.add_argument("--init", choices=("zero", "modified"), default="zero")

    def out_args(sp, formats=("json",)):
        sp.add_argument("--output", help="output path (default: stdout)")
        sp.add_argument("--format", choices=formats, default=formats[0])

    def tol_args(sp):
        sp.add_argument("--tol-v", type=float, default=1e-9)
        sp.add_argument("--tol-psd", type=float, default=1e-9)
        sp.add_argument("--tol-eq", type=float, default=1e-10)
        sp.add_argument("--max-iter", type=int, default=200)

    sp = sub.add_parser("models", help="list built-in models")
    out_args(sp)

    sp = sub.add_parser("propagate", help="propagate and export chi spectra")
    model_args(sp)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--coherence", choices=("x", "y", "z"),
                    help="export tr(sigma rho(t)) for rho(0) = |+><+| instead of chi spectra")
    out_args(sp, ("csv", "json"))

    sp = sub.add_parser("certify", help="certify complete positivity for all t >= 0")
    model_args(sp)
    tol_args(sp)
    sp.add_argument("--no-analytic", action="store_true", help="skip the closed-form certificate")
    out_args(sp)

    sp = sub.add_parser("certify-after-tp", help="certify complete positivity after t_p")
    model_args(sp)
    tol_args(sp)
    sp.add_argument("--t-p", type=float, help="anchor time (default: detected)")
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--dt", type=float)
    out_args(sp)

    sp = sub.add_parser("bound-floor", help="prove an eigenvalue floor -delta_min")
    model_args(sp)
    tol_args(sp)
    sp.add_argument("--delta-min", type=float, required=True)
    sp.add_argument("--basis-degree", type=int)
    out_args(sp)

    sp = sub.add_parser("nonmarkov", help="trace-distance non-Markovianity")
    model_args(sp)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--n-phi", type=int, default=24)
    sp.add_argument("--n-theta", type=int, default=12)
    sp.add_argument("--csv", help="write the N(t) series to this CSV path")
    out_args(sp)

    sp = sub.add_parser("synthesize", help="build a HEOM for a preset target")
    sp.add_argument("--preset", choices=tuple(PRESETS), required=True)
    sp.add_argument("--max-depth", type=int, default=6)
    out_args(sp)

    sp = sub.add_parser("sweep", help="classify a parameter grid")
    sp.add_argument("--model", choices=MODEL_NAMES, required=True)
    sp.add_argument("--init", choices=("zero", "modified"), default="zero")
    sp.add_argument("--workers", type=int)
    tol_args(sp)
    out_args(sp, ("csv", "json"))
    return p


def _split_params(argv):
    """Separate ``--name value`` model parameters from parser options."""
    rest, params = [], {}
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and tok.split("=")[0] not in _FIXED and tok not in ("--help", "--version"):
            if "=" in tok:
                name, val = tok[2:].split("=", 1)
            else:
                if i + 1 >= len(argv):
                    raise UsageError(f"parameter {tok} needs a value")
                name, val = tok[2:], argv[i + 1]
                i += 1
            params[name.replace("-", "_")] = val
        else:
            rest.append(tok)
        i += 1
    return rest, params


def _as_float(name, val):
    try:
        return float(val)
    except ValueError:
        raise UsageError(f"parameter {name} expects a number, got {val!r}") from None


def _parse_range(name, val):
    parts = val.split(":")
    if len(parts) != 3:
        raise UsageError(f"range for {name} must be start:stop:count")
    a, b = _as_float(name, parts[0]), _as_float(name, parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise UsageError(f"count in range for {name} must be an integer") from None
    if n < 1:
        raise UsageError(f"count in range for {name} must be positive")
    return np.linspace(a, b, n)


def _model(args, params):
    if getattr(args, "model_json", None):
        if params:
            raise UsageError("parameters cannot be combined with --model-json")
        return model_from_json(args.model_json)
    return build_model(args.model, {k: _as_float(k, v) for k, v in params.items()}, init=args.init)


def _cert_config(args) -> CertifierConfig:
    cfg = CertifierConfig(tol_v=args.tol_v, tol_psd=args.tol_psd, tol_eq=args.tol_eq, max_iter=args.max_iter)
    if getattr(args, "basis_degree", None):
        cfg.floor_basis_degree = args.basis_degree
    return cfg


def _resolved(args, params, model=None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "command"}
    cfg["parameters"] = dict(model.parameters) if model is not None else params
    return cfg


def _envelope(args, params, result, model=None) -> dict:
    return {"tool": "heomcp", "version": __version__, "command": args.command,
            "config": _resolved(args, params, model), "result": result}


def _emit(text: str, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x + 0.0 if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# commands


def cmd_models(args, params):
    out = {name: {"required": list(spec["required"]), "defaults": spec["defaults"], "reference": spec["reference"],
                  "optional": list(spec["optional"])}
           for name, spec in _BUILTINS.items()}
    _emit(_dump(_envelope(args, params, out)), args.output)
    return EXIT_OK


def cmd_propagate(args, params):
    model = _model(args, params)
    traj = propagate(model, args.t_end, args.dt)
    if args.coherence:
        c = coherence_series(traj, args.coherence)
        if args.format == "csv":
            _emit(coherence_csv({args.coherence: c}, traj.times), args.output)
        else:
            _emit(_dump(_envelope(args, params, {"times": traj.times, args.coherence: c}, model)), args.output)
    elif args.format == "csv":
        _emit(traj.to_csv(), args.output)
    else:
        res = {"times": traj.times, "eigenvalues": traj.eigs, "e": traj.esym, "h": traj.h}
        _emit(_dump(_envelope(args, params, res, model)), args.output)
    return EXIT_OK


def cmd_certify(args, params):
    model = _model(args, params)
    cfg = _cert_config(args)
    cert = certify_model(model, cfg)
    res = {"certificate": cert.to_json()}
    if not args.no_analytic:
        try:
            res["analytic"] = certify_analytic(model, cfg).to_json()
        except NotAvailableError as exc:
            res["analytic"] = {"status": "not_available", "reason": str(exc)}
    _emit(_dump(_envelope(args, params, res, model)), args.output)
    return EXIT_OK if cert.certified else EXIT_UNPROVEN


def cmd_certify_after_tp(args, params):
    model = _model(args, params)
    cert = certify_after_tp(model, args.t_p, _cert_config(args), t_end=args.t_end, dt=args.dt)
    _emit(_dump(_envelope(args, params, {"certificate": cert.to_json()}, model)), args.output)
    return EXIT_OK if cert.certified else EXIT_UNPROVEN


def cmd_bound_floor(args, params):
    if not args.delta_min > 0:
        raise UsageError("--delta-min must be positive")
    model = _model(args, params)
    cert = bound_eigenvalue_floor(model, args.delta_min, config=_cert_config(args))
    _emit(_dump(_envelope(args, params, {"certificate": cert.to_json()}, model)), args.output)
    return EXIT_OK if cert.certified else EXIT_UNPROVEN


def cmd_nonmarkov(args, params):
    model = _model(args, params)
    res = blp_analysis(model, args.horizon, BlpConfig(n_phi=args.n_phi, n_theta=args.n_theta))
    if args.csv:
        res.to_csv(args.csv)
    _emit(_dump(_envelope(args, params, res.to_json(), model)), args.output)
    return EXIT_OK


def cmd_synthesize(args, params):
    factory, _ = PRESETS[args.preset]
    try:
        target = factory(**{k: _as_float(k, v) for k, v in params.items()})
    except TypeError as exc:
        raise UsageError(f"preset {args.preset}: {exc}") from None
    result = synthesize_heom(target, args.max_depth)
    res = result.to_json()
    res["synthesis"]["deviation"] = verify_synthesis(result, target)
    _emit(_dump(_envelope(args, params, res)), args.output)
    return EXIT_OK if result.terminated else EXIT_UNPROVEN


def _sweep_point(job):
    name, init, point, cfg = job
    model = build_model(name, point, init=init)
    return classify(model, cfg)


def cmd_sweep(args, params):
    ranges, fixed = {}, {}
    for k, v in params.items():
        if ":" in v:
            ranges[k] = _parse_range(k, v)
        else:
            fixed[k] = _as_float(k, v)
    if not 1 <= len(ranges) <= 2:
        raise UsageError("sweep needs one or two start:stop:count parameters")
    if args.model == "reviving_3level" and ("alpha_tilde" in ranges or "beta_tilde" in ranges):
        fixed.setdefault("gamma", 1.0)
    names = list(ranges)
    grids = np.meshgrid(*[ranges[n] for n in names], indexing="ij")
    points = [dict(fixed, **{n: float(g.ravel()[i]) for n, g in zip(names, grids)}) for i in range(grids[0].size)]
    cfg = _cert_config(args)
    jobs = [(args.model, args.init, p, cfg) for p in points]
    workers = args.workers or int(os.environ.get(THREADS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    cols = names + ["label", "analytic", "numeric", "violating", "v_m", "min_eig"]
    rows = [[p[n] for n in names] + [r["label"], r["analytic"], r["numeric"], r["violating"], r["v_m"], r["min_eig"]]
            for p, r in zip(points, results)]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
        _emit(buf.getvalue(), args.output)
    else:
        res = {"columns": cols, "rows": rows}
        _emit(_dump(_envelope(args, params, res)), args.output)
    return EXIT_OK


COMMANDS = {
    "models": cmd_models,
    "propagate": cmd_propagate,
    "certify": cmd_certify,
    "certify-after-tp": cmd_certify_after_tp,
    "bound-floor": cmd_bound_floor,
    "nonmarkov": cmd_nonmarkov,
    "synthesize": cmd_synthesize,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        rest, params = _split_params(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"heomcp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "models" and params:
        print("heomcp: error: models takes no parameters", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, params)
    except (UsageError, ModelError, SynthesisError) as exc:
        print(f"heomcp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
