"""Command-line interface: ``dirfixseq {apply,simulate,oracle,example}``.

Exit codes: 0 on success, 1 for usage errors (bad flags), 2 for data errors
(unreadable input, invalid configuration).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Literal, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dirfixseq.datasets import hypertension_battery
from dirfixseq.distributions import DistributionFamily
from dirfixseq.oracle import (
    BivariateCdfEvaluator,
    JointKind,
    cauchy_counterexample,
    mdfwer_two_dependent,
    mdfwer_two_indep,
    sharpness_chain_quantiles,
)
from dirfixseq.procedures import (
    Decision,
    ProcedureKind,
    ProcedureSpec,
    TestBattery,
    TruthVector,
    apply_procedure,
)
from dirfixseq.simulation import (
    PAPER_PROCEDURES,
    WORKERS_ENV,
    Equicorrelated,
    Pi1Grid,
    RhoGrid,
    ScenarioConfig,
    SweepResult,
    WorstCaseChain,
    default_workers,
    run_scenario,
    run_sweep,
    scenario_rows,
    setting2_truth,
    sharpness_truth,
)

log = logging.getLogger("dirfixseq")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- input parsing ---------------------------------------------------------

_SIGNS = {"+": 1.0, "+1": 1.0, "1": 1.0, "-": -1.0, "-1": -1.0}


def read_battery(text: str, family: DistributionFamily) -> TestBattery:
    """Parse ``label,statistic`` or ``label,pvalue,sign`` CSV text."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise DataError("input is empty") from None
    rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError("input has a header but no hypotheses")

    labels, values, signs = [], [], []
    if header == ["label", "statistic"]:
        form = "statistic"
    elif header == ["label", "pvalue", "sign"]:
        form = "pvalue"
    else:
        raise DataError(f"header must be 'label,statistic' or 'label,pvalue,sign', got {','.join(header)!r}")

    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        labels.append(row[0].strip())
        try:
            value = float(row[1])
        except ValueError:
            raise DataError(f"line {lineno}: {form} {row[1]!r} is not a number") from None
        if not math.isfinite(value):
            raise DataError(f"line {lineno}: {form} must be finite")
        if form == "pvalue":
            if not 0.0 < value <= 1.0:
                raise DataError(f"line {lineno}: pvalue {value} outside (0, 1]")
            sign = _SIGNS.get(row[2].strip())
            if sign is None:
                raise DataError(f"line {lineno}: sign must be '+' or '-', got {row[2]!r}")
            signs.append(sign)
        values.append(value)

    if form == "statistic":
        return TestBattery.from_statistics(values, family, labels=labels)
    return TestBattery.from_pvalues(values, signs, family, labels=labels)


# -- simulation config -----------------------------------------------------

class SimulationConfig(BaseModel):
    """Schema of a ``simulate`` configuration file (JSON or YAML)."""

    model_config = ConfigDict(extra="forbid")

    setting: Literal[1, 2, "custom", "sharpness"]
    n: int = Field(20, ge=1)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    family: Literal["normal", "cauchy"] = "normal"
    procedures: list[str] = Field(default_factory=lambda: [k.value for k in PAPER_PROCEDURES], min_length=1)
    replications: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    rho: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    # setting 1
    pi1: list[float] | None = None
    theta: float = 3.0
    # setting 2
    n1: int = Field(5, ge=0)
    theta0_r: list[tuple[float, float]] | None = None
    # custom
    thetas: list[float] | None = None
    # sharpness
    k: int = Field(4, ge=2)
    epsilon: float = Field(1e-6, gt=0.0)

    @field_validator("procedures")
    @classmethod
    def _known_procedures(cls, value: list[str]) -> list[str]:
        return [ProcedureKind.coerce(v).value for v in value]

    @field_validator("rho")
    @classmethod
    def _rho_range(cls, value: list[float]) -> list[float]:
        for v in value:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"rho entries must lie in [0, 1], got {v}")
        return value

    @field_validator("pi1")
    @classmethod
    def _pi1_range(cls, value):
        if value is not None:
            if not value:
                raise ValueError("pi1 grid must not be empty")
            for v in value:
                if not 0.0 < v <= 1.0:
                    raise ValueError(f"pi1 entries must lie in (0, 1], got {v}")
        return value

    @model_validator(mode="after")
    def _setting_fields(self):
        if self.setting == 1 and self.pi1 is None:
            raise ValueError("setting 1 requires 'pi1'")
        if self.setting == 2:
            if not self.theta0_r:
                raise ValueError("setting 2 requires a non-empty 'theta0_r' list of [theta0, r] pairs")
            if self.n1 > self.n:
                raise ValueError("n1 must not exceed n")
        if self.setting == "custom":
            if self.thetas is None or len(self.thetas) != self.n:
                raise ValueError("custom setting requires 'thetas' with exactly n entries")
        if self.family == "cauchy" and any(r != 0.0 for r in self.rho):
            raise ValueError("the cauchy family supports rho = 0 only")
        return self


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def load_config(path: Path) -> SimulationConfig:
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise DataError("configuration must be a mapping")
    try:
        return SimulationConfig.model_validate(raw)
    except ValidationError as exc:
        raise DataError(_format_validation(exc)) from None


def build_sweep(cfg: SimulationConfig, workers: int) -> SweepResult:
    base = ScenarioConfig(
        truth=(0.0,) * cfg.n,
        family=cfg.family,
        alpha=cfg.alpha,
        procedures=tuple(cfg.procedures),
        replications=cfg.replications,
        master_seed=cfg.seed,
    )
    out = SweepResult()
    if cfg.setting == 1:
        for rho in cfg.rho:
            point = replace(base, dependence=Equicorrelated(rho))
            out.extend(run_sweep(point, Pi1Grid(tuple(cfg.pi1), cfg.theta), setting="1", workers=workers))
    elif cfg.setting == 2:
        for theta0, r in cfg.theta0_r:
            point = replace(base, truth=setting2_truth(cfg.n, cfg.n1, theta0, r))
            out.extend(run_sweep(point, RhoGrid(tuple(cfg.rho)), setting="2",
                                 theta0=theta0, r=r, workers=workers))
    elif cfg.setting == "custom":
        point = replace(base, truth=TruthVector(tuple(cfg.thetas)))
        out.extend(run_sweep(point, RhoGrid(tuple(cfg.rho)), setting="custom", workers=workers))
    else:
        point = replace(base, truth=sharpness_truth(cfg.k, cfg.epsilon), dependence=WorstCaseChain())
        res = run_scenario(point, workers=workers)
        out.extend(scenario_rows(res, "sharpness", pi1=point.truth.pi1))
    return out


# -- commands --------------------------------------------------------------

def _check_alpha_flag(alpha: float) -> float:
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise UsageError(f"--alpha must lie in (0, 1), got {alpha}")
    return alpha


def _procedure_flag(value: str) -> ProcedureKind:
    try:
        return ProcedureKind.coerce(value)
    except ValueError as exc:
        raise UsageError(f"--procedure: {exc}") from None


def cmd_apply(args, out) -> int:
    alpha = _check_alpha_flag(args.alpha)
    kind = _procedure_flag(args.procedure)
    family = DistributionFamily.coerce(args.family)
    if args.input is None:
        battery = hypertension_battery()
    else:
        path = Path(args.input)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise DataError(f"cannot read {path}: {exc}") from None
        battery = read_battery(text, family)

    decisions = apply_procedure(battery, ProcedureSpec(kind, alpha))
    labels = battery.labels or tuple(f"H{i}" for i in range(1, battery.n + 1))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index", "label", "pvalue", "decision", "direction"])
    for i, (label, p, d) in enumerate(zip(labels, battery.pvalues, decisions), start=1):
        writer.writerow([i, label, f"{p:.6g}", d.label, d.direction])
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    cfg = load_config(Path(args.config))
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        cfg = cfg.model_copy(update={"seed": args.seed})
    try:
        workers = default_workers() if args.workers is None else args.workers
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    try:
        sweep = build_sweep(cfg, workers)
    except ValueError as exc:
        raise DataError(f"invalid configuration: {exc}") from None
    if args.output in (None, "-"):
        sweep.write_csv(out)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            sweep.write_csv(fh)
        log.info("wrote %d rows to %s", len(sweep), args.output)
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    alpha = _check_alpha_flag(args.alpha)
    if args.which == "lemma2":
        family = DistributionFamily.coerce(args.family)
        if args.theta1 == 0:
            raise UsageError("--theta1 must be non-zero")
        payload = {"oracle": "lemma2", "family": family.value, "theta1": args.theta1, "alpha": alpha,
                   "rho": args.rho}
        if args.rho is None:
            payload["mdfwer"] = mdfwer_two_indep(family, args.theta1, alpha)
        else:
            if family is not DistributionFamily.NORMAL:
                raise UsageError("--rho requires --family normal")
            if not 0.0 <= args.rho < 1.0:
                raise UsageError("--rho must lie in [0, 1)")
            ev = BivariateCdfEvaluator(JointKind.EQUICORRELATED_NORMAL, (args.theta1, 0.0),
                                       family, args.rho, nodes=args.nodes)
            payload["nodes"] = args.nodes
            payload["mdfwer"] = mdfwer_two_dependent(ev, family, args.theta1, alpha)
    elif args.which == "counterexample":
        if not args.theta1 > 0:
            raise UsageError("--theta1 must be positive")
        payload = {"oracle": "counterexample", **cauchy_counterexample(alpha, args.theta1, args.family).to_dict()}
    else:
        if args.k < 1:
            raise UsageError("--k must be >= 1")
        payload = {"oracle": "sharpness", **sharpness_chain_quantiles(args.k, alpha).to_dict()}
    out.write(json.dumps(payload) + "\n")
    return EXIT_OK


_BONFERRONI_NOTE = (
    "Bonferroni uses the single-step threshold alpha/n = {thr:g}. D3-P (p = 0.0135) is above it, "
    "so the rule rejects {count}; published summaries of this example list 4 Bonferroni rejections, "
    "a count this threshold does not reproduce."
)


def _cells(decisions: list[Decision], fixed_sequence: bool) -> list[str]:
    cells, stopped = [], False
    for d in decisions:
        if stopped:
            cells.append("--")
            continue
        if d.rejected:
            cells.append("R (More Effective)" if d > 0 else "R (Less Effective)")
        else:
            cells.append("NR")
            stopped = fixed_sequence
    return cells


def cmd_example(args, out) -> int:
    alpha = _check_alpha_flag(args.alpha)
    battery = hypertension_battery()
    columns = [
        ("Procedure 1", ProcedureKind.FIXED_SEQ_HALVING),
        ("Procedure 2", ProcedureKind.FIXED_SEQ_FLAT),
        ("Bonferroni", ProcedureKind.BONFERRONI_DIR),
    ]
    decided = [apply_procedure(battery, ProcedureSpec(kind, alpha)) for _, kind in columns]
    rendered = [_cells(d, kind.is_fixed_sequence) for d, (_, kind) in zip(decided, columns)]
    counts = [sum(x.rejected for x in d) for d in decided]

    head = ["Contrast", "Statistic", "p-value"] + [name for name, _ in columns]
    body = [
        [label, f"{t:.4f}", f"{p:.4f}"] + [col[i] for col in rendered]
        for i, (label, t, p) in enumerate(zip(battery.labels, battery.statistics, battery.pvalues))
    ]
    foot = ["Number Rejected", "", ""] + [str(c) for c in counts[:-1]] + [f"{counts[-1]}*"]
    widths = [max(len(r[j]) for r in [head, *body, foot]) for j in range(len(head))]

    def line(row):
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()

    rule = "-" * len(line(head))
    out.write(f"Directional fixed-sequence decisions, hypertension trial, alpha = {alpha:g}\n")
    out.write("R: rejected, NR: not rejected, --: not tested\n")
    out.write("\n".join([rule, line(head), rule, *map(line, body), rule, line(foot), rule]) + "\n")
    out.write("* " + _BONFERRONI_NOTE.format(thr=alpha / battery.n, count=counts[-1]) + "\n")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirfixseq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    procs = ", ".join(k.value for k in ProcedureKind)

    p = sub.add_parser("apply", help="apply a procedure to a CSV of statistics or p-values")
    p.add_argument("input", nargs="?", help="CSV file (label,statistic or label,pvalue,sign); "
                                            "omit to use the embedded hypertension trial")
    p.add_argument("--procedure", default="FixedSeqFlat", help=f"one of: {procs}")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--family", choices=[f.value for f in DistributionFamily], default="normal")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("simulate", help="run a Monte Carlo sweep from a config file")
    p.add_argument("config", help="JSON or YAML scenario configuration")
    p.add_argument("--output", "-o", help="CSV path (default: standard output)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="evaluate an analytic result")
    osub = p.add_subparsers(dest="which", required=True, parser_class=_Parser)
    o = osub.add_parser("lemma2", help="two-hypothesis mdFWER of the flat procedure")
    o.add_argument("--family", choices=[f.value for f in DistributionFamily], default="normal")
    o.add_argument("--theta1", type=float, required=True)
    o.add_argument("--alpha", type=float, default=0.05)
    o.add_argument("--rho", type=float, default=None, help="equicorrelated normal dependence")
    o.add_argument("--nodes", type=int, default=64, help="Gauss-Hermite nodes")
    o = osub.add_parser("counterexample", help="heavy-tail failure of the flat procedure")
    o.add_argument("--alpha", type=float, default=0.05)
    o.add_argument("--theta1", type=float, required=True)
    o.add_argument("--family", choices=[f.value for f in DistributionFamily], default="cauchy")
    o = osub.add_parser("sharpness", help="worst-case chain quantiles and error budget")
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("example", help="print the hypertension trial decisions table")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_example)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"dirfixseq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dirfixseq: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
