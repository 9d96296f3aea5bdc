"""Command-line entry point: ``sigsas-rc <subcommand> ...``.

Global flags go before the subcommand. Failures print a JSON object
``{"error": ..., "message": ..., "row": ...}`` on stderr and exit with 2;
a verification suite that runs but fails exits with 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import serialization as ser
from .experiments import InputSpec, run_bound_experiment, strong_universality_demo
from .jl import sample_passing_jl
from .random_sas import build_direct, reduce_from_jl, lambda0, run_reduced
from .readout import fit_readout
from .sigsas import SigSasConfig
from .verify import SUITES

log = logging.getLogger("sigsas_rc")


class CliError(Exception):
    def __init__(self, message: str, row=None):
        super().__init__(message)
        self.row = row


def _emit_text(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, output) -> None:
    _emit_text(ser.dumps(obj), output)


def _emit_matrix(X, prefix, args) -> None:
    if args.format == "json":
        _emit_json({"schema_version": ser.SCHEMA_VERSION, "kind": "states",
                    "columns": [f"{prefix}_{i}" for i in range(1, X.shape[1] + 1)],
                    "values": X.tolist()}, args.output)
    else:
        ser.write_matrix_csv(args.output or sys.stdout, X, prefix)


def _input_spec(cfg) -> InputSpec:
    return InputSpec(**cfg["inputs"])


# subcommands ---------------------------------------------------------------------

def cmd_gen_reservoir(args, cfg) -> int:
    rc = dict(cfg["reservoir"])
    for key in ("mode", "k", "p", "l", "M", "delta", "epsilon"):
        if getattr(args, key, None) is not None:
            rc[key] = getattr(args, key)
    I0 = rc.get("I0")
    if rc["mode"] == "direct":
        res = build_direct(rc["k"], rc["p"], rc["l"], rc["M"], rc["delta"], I0=I0, seed=args.seed)
    else:
        N, N0 = (rc["p"] + 1) ** (rc["l"] + 1), (rc["p"] + 1) ** rc["l"]
        jl_map, attempts = sample_passing_jl(N, rc["k"], rc["epsilon"], args.seed)
        log.info("JL map accepted after %d attempts", attempts)
        sign = int(np.random.default_rng(args.seed).choice((-1, 1)))
        lam = lambda0(rc["delta"], rc["k"], N0, rc["M"], rc["p"])
        sig = SigSasConfig(M=rc["M"], l=rc["l"], p=rc["p"], lam=lam, I0=I0, sign=sign)
        if lam * sig.m_tilde * jl_map.norm ** 2 >= 1:
            raise CliError(f"lambda0={lam:.6g} too large for |||f|||={jl_map.norm:.6g}; reduce delta")
        res = reduce_from_jl(sig, jl_map)
    _emit_json(ser.reservoir_to_dict(res), args.output)
    return 0


def cmd_run(args, cfg) -> int:
    res = ser.reservoir_from_dict(ser.read_json(args.reservoir))
    z, _ = ser.read_sequence_csv(args.input, M=res.M)
    _emit_matrix(run_reduced(z, res), "x", args)
    return 0


def cmd_fit(args, cfg) -> int:
    X = ser.read_matrix_csv(args.states, "x")
    _, Y = ser.read_sequence_csv(args.targets)
    if Y is None:
        raise CliError(f"{args.targets} has no y_1..y_m columns")
    if len(X) != len(Y):
        raise CliError(f"states have {len(X)} rows, targets {len(Y)}")
    W = fit_readout(X[args.washout:], Y[args.washout:], args.ridge)
    _emit_json(ser.readout_to_dict(W), args.output)
    return 0


EVAL_COLUMNS = ("seed", "t", "error_analytic", "error_fitted", "sup_z", "M", "L", "p", "l", "k",
                "N", "N0", "delta", "epsilon", "f_norm", "W_norm", "w_term", "taylor_term",
                "I_sqrt", "I_linear", "bound_sqrt", "bound_linear")


def eval_records(report) -> list[dict]:
    """Flatten an experiment report into one row per (seed, step)."""
    c = report.config
    rows = []
    for run in report.runs:
        if "trajectories" not in run:
            continue
        tr = run["trajectories"]
        for t in range(len(tr["error_analytic"])):
            base = tr["w_term"][t] + tr["taylor_term"][t]
            rows.append({
                "seed": run["seed"], "t": t + c["washout"],
                "error_analytic": tr["error_analytic"][t], "error_fitted": tr["error_fitted"][t],
                "sup_z": tr["sup_z"][t], "M": c["M"], "L": c["L"], "p": c["p"], "l": c["l"],
                "k": c["k"], "N": c["N"], "N0": c["N0"], "delta": c["delta"],
                "epsilon": c["epsilon"], "f_norm": run["f_norm"], "W_norm": run["W_norm"],
                "w_term": tr["w_term"][t], "taylor_term": tr["taylor_term"][t],
                "I_sqrt": tr["I_sqrt"][t], "I_linear": tr["I_linear"][t],
                "bound_sqrt": base + tr["I_sqrt"][t], "bound_linear": base + tr["I_linear"][t],
            })
    return rows


def cmd_eval(args, cfg) -> int:
    ex = cfg["experiment"]
    target = ser.target_from_config(cfg["target"], args.config_dir)
    seeds = [args.seed] if args.seed is not None else list(ex["seeds"])
    report = run_bound_experiment(target, ex["p"], ex["l"], ex["k"], ex["delta"],
                                     ex["epsilon"], seeds, _input_spec(cfg), ex["washout"],
                                     ex["horizon"], ex["ridge"])
    if args.format == "json":
        _emit_json(report.to_dict(trajectories=True), args.output)
    else:
        failed = [r for r in report.runs if "error" in r]
        if failed:
            raise CliError(failed[0]["error"])
        ser.write_records_csv(args.output or sys.stdout, eval_records(report))
    return 0 if report.passed else 1


def cmd_verify(args, cfg) -> int:
    a = cfg["audit"]
    s = cfg["sigsas"]
    jl = cfg["jl"]
    params = {
        "contraction": dict(M=s["M"], p=s["p"], l=s["l"], lam=s["lam"], pairs=a["contraction_pairs"]),
        "esp": dict(M=s["M"], p=s["p"], l=s["l"], lam=s["lam"], trials=a["trials"],
                    tol=a["washout_tol"]),
        "jl-distances": dict(N=jl["N"], k=jl["k"], epsilon=jl["epsilon"], maps=jl["maps"],
                             vectors=jl["vectors"]),
        "law-audit": dict(k=a["law_k"], p=a["law_p"], delta=a["law_delta"], n0=a["law_n0"],
                          trials=a["trials"], M=s["M"], n_cells=a["n_cells"],
                          alpha=a["ks_alpha"], corr_threshold=a["corr_threshold"]),
        "esp-certificate": dict(k=a["cert_k"], p=a["cert_p"], M=a["cert_M"],
                                delta=a["cert_delta"], trials=a["cert_trials"],
                                grid=a["cert_grid"]),
        "projection": dict(M=s["M"], p=s["p"], l=s["l"]),
        "reduction": dict(M=s["M"], p=s["p"], l=s["l"]),
    }
    names = list(SUITES) if args.suite == "all" else [args.suite]
    seed_kw = lambda name: ({"seeds": [args.seed if args.seed is not None else 0]}
                            if name in ("projection", "reduction") else {"seed": args.seed})
    reports = [SUITES[n](**params[n], **seed_kw(n)) for n in names]
    doc = reports[0] if len(reports) == 1 else {
        "schema_version": ser.SCHEMA_VERSION, "kind": "verify_all",
        "passed": all(r["passed"] for r in reports), "suites": reports}
    _emit_json(doc, args.output)
    return 0 if doc["passed"] else 1


def cmd_demo(args, cfg) -> int:
    ex = cfg["experiment"]
    M = cfg["target"].get("M", 1.0)
    targets = []
    for name in ex["targets"]:
        section = dict(cfg["target"]) if name == cfg["target"].get("name") else {"name": name}
        section["M"] = M
        targets.append(ser.target_from_config(section, args.config_dir))
    seed = args.seed if args.seed is not None else ex["seeds"][0]
    doc = strong_universality_demo(targets, ex["p"], ex["l"], ex["k"], ex["delta"], ex["epsilon"],
                                   seed, _input_spec(cfg), ex["washout"], ex["horizon"],
                                   ex["ridge"])
    if args.format == "csv":
        ser.write_records_csv(args.output or sys.stdout, [{k: v for k, v in r.items() if k != "readout"}
                                            for r in doc["rows"]])
    else:
        _emit_json(doc, args.output)
    return 0 if doc["passed"] else 1


# parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigsas-rc", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--config", type=Path, default=None, help="JSON config file")
    ap.add_argument("--output", "-o", type=Path, default=None)
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-reservoir", help="draw a reduced reservoir")
    g.add_argument("--mode", choices=("direct", "jl"))
    g.add_argument("--k", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--l", type=int)
    g.add_argument("--M", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--epsilon", type=float)
    g.set_defaults(func=cmd_gen_reservoir)

    r = sub.add_parser("run", help="drive a reservoir on a CSV input")
    r.add_argument("--reservoir", type=Path, required=True)
    r.add_argument("--input", type=Path, required=True)
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fit", help="least-squares readout from states and targets")
    f.add_argument("--states", type=Path, required=True)
    f.add_argument("--targets", type=Path, required=True, help="CSV with y_1..y_m columns")
    f.add_argument("--ridge", type=float, default=None)
    f.add_argument("--washout", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="error trajectory and bound decomposition")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("--suite", choices=(*SUITES, "all"), required=True)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo-universality", help="one reservoir, several targets")
    d.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.config_dir = args.config.parent if args.config else None
    try:
        cfg = ser.load_config(args.config)
        return args.func(args, cfg)
    except (CliError, ser.FormatError, ValueError, RuntimeError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc),
               "row": getattr(exc, "row", None)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
