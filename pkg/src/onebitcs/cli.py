"""``onebitcs`` command line.

Each subcommand resolves its settings from built-in defaults, then an
optional JSON config file (``--config``), then explicit flags. The resolved
settings are echoed to stderr as JSON; that echo is itself a valid config.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ParameterError
from .geometry import (difference_sampler, expected_gaussian_norm, l1_embedding_audit,
                       mean_width_mc, tessellation_audit)
from .harness import SweepConfig, run_sweep, write_csv
from .measure import (CovarianceSpec, lambda_analytic, lambda_empirical, model_from_dict,
                      read_record, synthesize, write_record)
from .sampling import RngSpec, Signal, sample_signal
from .solve import CorrelatedSparse, NuclearFrobenius, SparseBall, estimate, support_value

log = logging.getLogger("onebitcs")

_SIGNAL_KEY, _MEASURE_KEY, _WIDTH_KEY = 1, 2, 3

DEFAULTS = {
    "simulate": {"n": 100, "s": 5.0, "kind": "exact-sparse", "model": {"name": "noiseless"},
                 "m": 1000, "seed": 0, "stream_id": 0, "covariance": None, "workers": 1,
                 "out": None, "truth_out": None},
    "estimate": {"record": None, "constraint": {"name": "sparse", "s": 5.0}, "truth": None,
                 "bound": False, "beta": 1.0, "width_samples": 200, "seed": 0, "out": None},
    "meanwidth": {"set": "sparse", "n": 100, "s": 5.0, "r": None, "n1": None, "n2": None,
                  "samples": 1000, "seed": 0, "out": None},
    "tessellate": {"n": 64, "s": 4.0, "m": 50000, "pairs": 200, "samples": 100, "delta": 0.05,
                   "kind": "compressible", "seed": 0, "out": None},
    "lambda": {"model": {"name": "noiseless"}, "m": 100000, "n": 8, "seed": 0, "workers": 1,
               "out": None},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _model_flags(p):
    p.add_argument("--model", help="noiseless, bitflip, prequant or logistic")
    p.add_argument("--p", type=float, help="bit-flip keep probability")
    p.add_argument("--sigma", type=float, help="pre-quantization noise level")
    p.add_argument("--alpha", type=float, help="logistic steepness")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onebitcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = common(sub.add_parser("simulate", help="draw a signal and write a measurement record"))
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--kind", choices=["exact-sparse", "compressible"])
    p.add_argument("--m", type=int)
    p.add_argument("--stream-id", dest="stream_id", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--truth-out", dest="truth_out", help="write the ground truth as JSON")
    _model_flags(p)

    p = common(sub.add_parser("estimate", help="solve for a record and write a report"))
    p.add_argument("--record")
    p.add_argument("--constraint", choices=["sparse", "correlated", "lowrank"])
    p.add_argument("--s", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--truth", help="ground truth JSON written by simulate")
    p.add_argument("--bound", action="store_const", const=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--width-samples", dest="width_samples", type=int)

    p = common(sub.add_parser("sweep", help="Monte Carlo sweep over m"))
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--record-wall-time", dest="record_wall_time", action="store_const", const=True)

    p = common(sub.add_parser("meanwidth", help="Monte Carlo mean width of a set"))
    p.add_argument("--set", choices=["l2", "sparse", "lowrank"])
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--samples", type=int)

    p = common(sub.add_parser("tessellate", help="sign-embedding and l1-embedding audits"))
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--kind", choices=["exact-sparse", "compressible"])

    p = common(sub.add_parser("lambda", help="analytic and empirical lambda of a link model"))
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--workers", type=int)
    _model_flags(p)
    return parser


# ---------------------------------------------------------------------------
# config resolution


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ParameterError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return data


_META_FLAGS = {"command", "config", "verbose", "model", "p", "sigma", "alpha", "constraint",
               "s", "r", "n1", "n2", "out_csv", "out_json"}


def resolve(args) -> dict:
    """Merge defaults, the config file and explicit flags for ``args.command``."""
    cmd = args.command
    cfg = dict(DEFAULTS.get(cmd, {}))
    if args.config:
        data = _load_config(args.config)
        if data.get("command", cmd) != cmd:
            raise ParameterError(f"config {args.config} is for {data['command']!r}, not {cmd!r}")
        cfg.update({k: v for k, v in data.items() if k != "command"})
    flags = vars(args)
    for key, value in flags.items():
        if value is not None and key not in _META_FLAGS:
            cfg[key] = value

    if "model" in DEFAULTS.get(cmd, {}) or (cmd == "sweep" and "model" in cfg):
        model = dict(cfg.get("model") or {"name": "noiseless"})
        if flags.get("model"):
            model = {"name": flags["model"]}
        for key in ("p", "sigma", "alpha"):
            if flags.get(key) is not None:
                model[key] = flags[key]
        cfg["model"] = model

    if cmd == "estimate":
        con = dict(cfg.get("constraint") or {})
        if flags.get("constraint"):
            con = {"name": flags["constraint"], **{k: v for k, v in con.items() if k != "name"}}
        for key in ("s", "r", "n1", "n2"):
            if flags.get(key) is not None:
                con[key] = flags[key]
        cfg["constraint"] = con
    elif cmd in ("simulate", "meanwidth", "tessellate"):
        for key in ("s", "r", "n1", "n2"):
            if flags.get(key) is not None:
                cfg[key] = flags[key]
    elif cmd == "sweep":
        if flags.get("seed") is not None:
            cfg["base_seed"] = cfg.pop("seed")
        outputs = dict(cfg.get("outputs") or {})
        if cfg.get("out"):
            outputs["csv"] = cfg.pop("out")
        if flags.get("out_csv"):
            outputs["csv"] = flags["out_csv"]
        if flags.get("out_json"):
            outputs["json"] = flags["out_json"]
        cfg["outputs"] = outputs
    cfg["command"] = cmd
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def _covariance(cfg):
    return CovarianceSpec.from_dict(cfg["covariance"]) if cfg.get("covariance") else None


def _emit(payload: dict, out):
    text = json.dumps(payload, indent=1) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def simulate_from_config(cfg: dict):
    """Signal and measurement record for a resolved ``simulate`` config."""
    root = RngSpec(int(cfg["seed"]), int(cfg["stream_id"]))
    cov = _covariance(cfg)
    signal = sample_signal(root.child(_SIGNAL_KEY), int(cfg["n"]), float(cfg["s"]), cfg["kind"])
    if cov is not None:
        signal = Signal(signal.values / cov.sigma_norm(signal.values), signal.s, signal.kind)
    model = model_from_dict(cfg["model"])
    record = synthesize(signal, model, int(cfg["m"]), root.child(_MEASURE_KEY), covariance=cov,
                        workers=int(cfg["workers"]))
    return signal, record


def cmd_simulate(cfg):
    if not cfg.get("out"):
        raise ParameterError("simulate needs --out for the record file")
    signal, record = simulate_from_config(cfg)
    write_record(cfg["out"], record)
    if cfg.get("truth_out"):
        Path(cfg["truth_out"]).write_text(json.dumps(signal.to_dict()) + "\n")
    log.info("wrote %d bits for n=%d to %s", record.m, record.n, cfg["out"])


def constraint_from_dict(d: dict):
    name = d.get("name", "sparse")
    try:
        if name == "sparse":
            return SparseBall(float(d["s"]))
        if name == "correlated":
            return CorrelatedSparse(CovarianceSpec.from_dict(d["covariance"]), float(d["s"]))
        if name == "lowrank":
            return NuclearFrobenius(float(d["r"]), int(d["n1"]), int(d["n2"]))
    except KeyError as exc:
        raise ParameterError(f"constraint {name!r} is missing {exc.args[0]!r}") from None
    raise ParameterError(f"unknown constraint {name!r}")


def estimate_from_config(cfg: dict, record=None):
    record = record if record is not None else read_record(cfg["record"])
    constraint = constraint_from_dict(cfg["constraint"])
    truth = None
    if cfg.get("truth"):
        truth = Signal.from_dict(json.loads(Path(cfg["truth"]).read_text()))
    return estimate(record, constraint, truth, bound=bool(cfg["bound"]), beta=float(cfg["beta"]),
                    width_samples=int(cfg["width_samples"]),
                    width_rng=RngSpec(int(cfg["seed"])).child(_WIDTH_KEY))


def cmd_estimate(cfg):
    if not cfg.get("record"):
        raise ParameterError("estimate needs --record")
    rep = estimate_from_config(cfg)
    _emit(rep.to_dict(), cfg.get("out"))


def cmd_sweep(cfg):
    config = SweepConfig.from_dict(cfg)
    rows = run_sweep(config)
    if not config.outputs:
        write_csv(rows, sys.stdout)
    failed = sum(1 for r in rows if r.get("error"))
    log.info("%d rows, %d failed", len(rows), failed)


def cmd_meanwidth(cfg):
    kind = cfg["set"]
    n = int(cfg["n"])
    if kind == "l2":
        oracle = np.linalg.norm
    elif kind == "sparse":
        constraint = SparseBall(float(cfg["s"]))
        oracle = lambda g: support_value(constraint, g)  # noqa: E731
    elif kind == "lowrank":
        if cfg.get("n1") is None or cfg.get("n2") is None or cfg.get("r") is None:
            raise ParameterError("lowrank mean width needs r, n1 and n2")
        constraint = NuclearFrobenius(float(cfg["r"]), int(cfg["n1"]), int(cfg["n2"]))
        n = constraint.n1 * constraint.n2
        oracle = lambda g: support_value(constraint, g)  # noqa: E731
    else:
        raise ParameterError(f"unknown set {kind!r}")
    est = mean_width_mc(oracle, n, int(cfg["samples"]), RngSpec(int(cfg["seed"])), kind)
    out = est.to_dict()
    out["expected_gaussian_norm"] = expected_gaussian_norm(n)
    _emit(out, cfg.get("out"))


def cmd_tessellate(cfg):
    n, s, m = int(cfg["n"]), float(cfg["s"]), int(cfg["m"])
    root = RngSpec(int(cfg["seed"]))
    audit = tessellation_audit(None, n, s, m, int(cfg["pairs"]), root.child(1), float(cfg["delta"]))
    dev = l1_embedding_audit(difference_sampler(s, cfg["kind"]), n, m, int(cfg["samples"]), root.child(2))
    _emit({"tessellation": audit.to_dict(),
           "l1_embedding": {"max_abs_deviation": dev, "samples": int(cfg["samples"]), "m": m}},
          cfg.get("out"))


def cmd_lambda(cfg):
    model = model_from_dict(cfg["model"])
    lam = lambda_analytic(model)
    root = RngSpec(int(cfg["seed"]))
    x = sample_signal(root.child(1), int(cfg["n"]), 1.0).values
    emp, se = lambda_empirical(x, model, int(cfg["m"]), root.child(2), workers=int(cfg["workers"]))
    if cfg.get("out"):
        _emit({"model": cfg["model"], "analytic": lam, "empirical": emp, "stderr": se}, cfg["out"])
    print(f"{lam:.10f}")
    print(f"empirical {emp:.10f} +/- {se:.2g} (m={cfg['m']})")


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "sweep": cmd_sweep,
            "meanwidth": cmd_meanwidth, "tessellate": cmd_tessellate, "lambda": cmd_lambda}


def _one_line(exc) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise ParameterError("missing subcommand; see --help")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(message)s")
        cfg = resolve(args)
        sys.stderr.write(json.dumps(cfg, sort_keys=True) + "\n")
        COMMANDS[args.command](cfg)
    except NumericalError as exc:
        sys.stderr.write(f"onebitcs: numerical failure: {_one_line(exc)}\n")
        return 2
    except (ParameterError, OSError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(f"onebitcs: error: {_one_line(exc)}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
