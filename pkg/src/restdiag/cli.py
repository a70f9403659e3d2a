"""Command-line interface: JSON in, JSON report out.

Exit status 0 on success, 2 when a mathematical precondition fails (the
report names the condition), 1 on parse or configuration errors.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import serialize as ser
from .config import ToleranceConfig, use_tolerances
from .constructions import (amc_forced_threshold, amc_pinched_diagonal, build_amc_counterexample,
                            build_nonlinear_witness, build_span_witness, check_separation,
                            separation)
from .corpus import round_trip_instance
from .diagonalize import (are_j_equivalent, assemble_unitary, conjugate_decompositions,
                          verify_conditions, verify_reverse)
from .errors import PreconditionFailed, RestdiagError
from .operators import op_in_ideal, singular_values, unitarity_defect
from .permutations import (AlignmentTrace, IndexPermutation, PartitionOfIndices, align_finite,
                           orbit_diag_equal)
from .projections import ess_codim, is_fredholm_pair
from .seq_ideal import IdealTag, SeqProfile, am_closure_member, in_ideal, power

FIXTURES = ("round_trip", "finite_trace")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    seed: int = 0
    dim: int = 32
    ideal: IdealTag = field(default_factory=lambda: IdealTag.parse("schatten:1"))
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------------ commands

def _load(cfg: RunConfig):
    if cfg.extra.get("fixture"):
        name = cfg.extra["fixture"].replace("-", "_")
        if name not in FIXTURES:
            raise ConfigError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
        text = resources.files("restdiag").joinpath("fixtures", f"{name}.json").read_text()
    elif cfg.input_path in (None, "-"):
        text = sys.stdin.read()
    else:
        with open(cfg.input_path) as fh:
            text = fh.read()
    return json.loads(text)


def cmd_membership(cfg, data):
    if "operator" in data:
        prof = singular_values(ser.decode_operator(data["operator"]))
    else:
        prof = SeqProfile.from_dict(data["profile"])
    return {"ideal": str(cfg.ideal), "member": in_ideal(prof, cfg.ideal),
            "am_closure_member": am_closure_member(prof, cfg.ideal)}


def cmd_ess_codim(cfg, data):
    p = ser.decode_projection(data["p"])
    q = ser.decode_projection(data["q"])
    if not is_fredholm_pair(p, q):
        from .errors import NotFredholmPair
        raise NotFredholmPair("not a Fredholm pair at the configured gap")
    return ess_codim(p, q).to_dict()


def _families(data):
    return (ser.decode_decomposition(data["ps"]),
            ser.decode_decomposition(data["es"], check=False))


def cmd_verify_conditions(cfg, data):
    ps, es = _families(data)
    rep = verify_conditions(ps, es, cfg.ideal)
    return {"ideal": str(cfg.ideal), **rep.to_dict()}


def cmd_diagonalize(cfg, data):
    a = ser.decode_diagonalizable(data)
    es = ser.decode_decomposition(data["es"], check=False)
    cert = assemble_unitary(a, es, cfg.ideal)
    return {"ideal": str(cfg.ideal), "certificate": cert.to_dict(),
            "certificate_valid": cert.check(cfg.ideal)}


def cmd_verify_reverse(cfg, data):
    a = ser.decode_diagonalizable(data)
    u = ser.decode_operator(data["unitary"])
    rep = verify_reverse(a, u, cfg.ideal)
    return {"ideal": str(cfg.ideal), **rep.to_dict()}


def cmd_conjugate_decomp(cfg, data):
    ps, es = _families(data)
    u = conjugate_decompositions(ps, es, cfg.ideal)
    err = max(float(np.linalg.norm((u @ p.op @ u.H).block - e.block, 2)) for p, e in zip(ps, es))
    return {"ideal": str(cfg.ideal), "unitary": u.to_dict(), "max_conjugation_error": err,
            "unitarity_defect": unitarity_defect(u)}


def cmd_basis_equiv(cfg, data):
    e = ser.decode_matrix(data["e"])
    f = ser.decode_matrix(data["f"])
    gap = SeqProfile.from_dict(data["tail_gap"]) if data.get("tail_gap") else None
    return {"ideal": str(cfg.ideal), "equivalent": are_j_equivalent(e, f, gap, cfg.ideal)}


def cmd_witness(cfg, data):
    kind = cfg.extra["kind"]
    if kind == "nonlinear":
        blocks = cfg.extra.get("blocks") or 8
        w = build_nonlinear_witness(cfg.ideal, blocks, max(cfg.dim, 2 * blocks))
        basis = w.eigenbasis()
        return {"kind": kind, "witness": w.to_dict(), "separation": separation(basis),
                "separated": check_separation(basis, 1 / np.sqrt(2) - 1e-12),
                "v_minus_i_in_ideal": in_ideal(w.v_minus_i_profile, cfg.ideal)}
    if kind == "span":
        w = build_span_witness(cfg.ideal, cfg.dim)
        from .seq_ideal import ideal_square
        return {"kind": kind, "witness": w.to_dict(),
                "b_in_ideal": op_in_ideal(w.b_op, cfg.ideal),
                "corner_in_square": op_in_ideal(w.corner_op, ideal_square(cfg.ideal))}
    power_p = cfg.extra.get("coeff_power") or 1.0
    dim = cfg.dim
    inst = build_amc_counterexample(SeqProfile((), power(power_p)),
                                    1.0 / np.arange(1, dim + 1), dim)
    rep = verify_reverse(inst.a, inst.u.H, cfg.ideal)
    return {"kind": kind, "dim": dim, "unitary": inst.u.to_dict(),
            "pinched_diagonal": amc_pinched_diagonal(inst).tolist(),
            "forced_threshold": amc_forced_threshold(inst), **rep.to_dict()}


def cmd_perm_align(cfg, data):
    tau = IndexPermutation(data["tau"])
    part = PartitionOfIndices.from_dict(data["partition"])
    trace = AlignmentTrace()
    sigma = align_finite(tau, part, trace=trace)
    return {"sigma": sigma.to_list(), "support": sigma.support,
            "steps": [list(s) for s in trace.steps]}


def cmd_orbit_diag(cfg, data):
    b = ser.decode_operator(data["b"])
    bp = ser.decode_operator(data["b_prime"])
    sigma = orbit_diag_equal(b, bp, cfg.ideal, matching=data.get("matching", "order"))
    return {"sigma": None if sigma is None else sigma.to_list()}


def cmd_fixture(cfg, data):
    name = cfg.extra["name"].replace("-", "_")
    if name == "round_trip":
        a, es, _ = round_trip_instance(np.random.default_rng(cfg.seed), cfg.dim, 5)
        out = ser.encode_diagonalizable(a)
        out["es"] = ser.encode_decomposition(es)
        return out
    if name == "finite_trace":
        from .operators import Projection
        return {"p": ser.encode_projection(Projection.coordinate(cfg.dim, [0, 1, 2])),
                "q": ser.encode_projection(Projection.coordinate(cfg.dim, [0]))}
    raise ConfigError(f"unknown fixture {name!r}")


COMMANDS = {
    "membership": cmd_membership,
    "ess-codim": cmd_ess_codim,
    "verify-conditions": cmd_verify_conditions,
    "diagonalize": cmd_diagonalize,
    "verify-reverse": cmd_verify_reverse,
    "conjugate-decomp": cmd_conjugate_decomp,
    "basis-equiv": cmd_basis_equiv,
    "witness": cmd_witness,
    "perm-align": cmd_perm_align,
    "orbit-diag": cmd_orbit_diag,
    "fixture": cmd_fixture,
}
NO_INPUT = {"witness", "fixture"}


def run(cfg: RunConfig):
    """Execute one command; returns ``(exit_status, report_dict)``."""
    report = {"schema": ser.SCHEMA, "command": cfg.command}
    try:
        data = None if cfg.command in NO_INPUT else _load(cfg)
        with use_tolerances(cfg.tolerances):
            report.update(COMMANDS[cfg.command](cfg, data))
        status = 0
    except PreconditionFailed as exc:
        report.update({"error": str(exc), "condition": exc.condition})
        status = 2
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, OSError, ConfigError,
            RestdiagError) as exc:
        report.update({"error": f"{type(exc).__name__}: {exc}"})
        status = 1
    return status, report


# ------------------------------------------------------------------ parsing

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="input JSON file ('-' for stdin)")
    common.add_argument("--fixture", help="use a bundled input: " + ", ".join(FIXTURES))
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--config", help="JSON file with defaults; flags override it")
    common.add_argument("--ideal", help="finite-rank | schatten:<p> | compact")
    common.add_argument("--dim", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--tol-rank", type=float)
    common.add_argument("--tol-gap-lo", type=float)
    common.add_argument("--tol-gap-hi", type=float)
    common.add_argument("--tol-residual", type=float)

    parser = argparse.ArgumentParser(prog="restdiag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        if name in ("witness", "fixture"):
            continue
        sub.add_parser(name, parents=[common])
    w = sub.add_parser("witness", parents=[common])
    w.add_argument("kind", choices=["nonlinear", "span", "amc"])
    w.add_argument("--blocks", type=int)
    w.add_argument("--coeff-power", type=float)
    f = sub.add_parser("fixture", parents=[common], help="generate a fixture input")
    f.add_argument("name", choices=["round-trip", "finite-trace"])
    return parser


def config_from_args(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    tol = dict(ToleranceConfig().__dict__)
    tol.update(base.get("tolerances", {}))
    for flag, key in (("tol_rank", "rank_eps"), ("tol_gap_lo", "gap_lo"),
                      ("tol_gap_hi", "gap_hi"), ("tol_residual", "residual_tol")):
        if getattr(args, flag) is not None:
            tol[key] = getattr(args, flag)
    seed = args.seed if args.seed is not None else base.get("seed")
    if seed is None:
        seed = int(os.environ.get("RESTDIAG_SEED", 0))
    try:
        tolerances = ToleranceConfig(**tol)
        ideal = IdealTag.parse(args.ideal or base.get("ideal", "schatten:1"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    extra = {"fixture": args.fixture}
    for key in ("kind", "blocks", "coeff_power", "name"):
        if hasattr(args, key):
            extra[key] = getattr(args, key)
    return RunConfig(args.command, args.input, args.output, tolerances, int(seed),
                     args.dim or base.get("dim", 32), ideal, extra)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(json.dumps({"schema": ser.SCHEMA, "error": str(exc)}), file=sys.stderr)
        return 1
    status, report = run(cfg)
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if status:
        print(report.get("error", ""), file=sys.stderr)
    return status


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot encode {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
