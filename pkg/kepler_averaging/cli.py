"""
kepler-averaging <circular|average|continue|reproduce-paper> --config <path> [--out <dir>] [--format json|csv|text]

exit codes: 0 success, 1 configuration error, 2 circular preconditions fail, 3 no critical points,
4 no branch completed, 5 prediction and observation disagree away from the |a| = 4 threshold
"""
import argparse
import dataclasses
import json
import logging
import sys
import tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from .averaging import QUADRATURE_NODES, AveragedFunction, gamma_grid, search_critical_points, seed_grid
from .circular_forcing import cross_validate, m_matrix, two_harmonic_report
from .continuation import (
    classify_branch,
    continue_branches,
    default_eps_grid,
    expansion_check,
    max_workers,
)
from .exceptions import (
    ConfigError,
    DegenerateEquatorError,
    KeplerAveragingError,
    OffManifoldError,
    WrongKindError,
)
from .export import atomic_write_text, write_frame, write_json
from .flow_integrator import IntegratorConfig
from .forcing import ForcingKind, ForcingModel, forcing_from_config, two_harmonic_forcing

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CIRCULAR = 2
EXIT_NO_CRITICAL_POINTS = 3
EXIT_NO_BRANCH = 4
EXIT_MISMATCH = 5

REPORT_FORMATS = ("json", "csv", "text")
AMPLITUDE_SWEEP = (0.5, 1.0, 2.0, 3.9, 4.1, 5.0, 8.0, 4j, 2 + 2j)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    forcing: dict | None = None
    N: int = 1
    eps_grid: tuple[float, ...] = tuple(default_eps_grid())
    integrator: IntegratorConfig = dataclasses.field(default_factory=IntegratorConfig)
    quadrature_nodes: int = QUADRATURE_NODES
    output_dir: Path = Path("kepler_averaging_out")
    seed_grid: tuple[int, int, int] = (8, 3, 3)
    report_format: str = "json"

    def __post_init__(self):
        if self.N == 0:
            raise ConfigError("N must be nonzero")
        if self.quadrature_nodes < 4:
            raise ConfigError(f"quadrature_nodes must be at least 4, got {self.quadrature_nodes}")
        if self.report_format not in REPORT_FORMATS:
            raise ConfigError(f"report_format must be one of {REPORT_FORMATS}, got {self.report_format}")
        eps = np.asarray(self.eps_grid, dtype=float)
        if eps.size == 0 or eps[0] <= 0 or np.any(np.diff(eps) <= 0):
            raise ConfigError("eps_grid must be positive and strictly increasing")
        if len(self.seed_grid) != 3 or min(self.seed_grid) < 2:
            raise ConfigError(f"seed_grid must hold three sizes of at least 2, got {self.seed_grid}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        values = dict(data)
        if "integrator" in values:
            values["integrator"] = IntegratorConfig.from_dict(values["integrator"])
        if "eps_grid" in values:
            values["eps_grid"] = tuple(float(e) for e in values["eps_grid"])
        if "seed_grid" in values:
            values["seed_grid"] = tuple(int(n) for n in values["seed_grid"])
        if "output_dir" in values:
            values["output_dir"] = Path(values["output_dir"])
        if "N" in values:
            values["N"] = int(values["N"])
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    def to_dict(self) -> dict:
        return {
            "forcing": self.forcing,
            "N": self.N,
            "eps_grid": list(self.eps_grid),
            "integrator": self.integrator.to_dict(),
            "quadrature_nodes": self.quadrature_nodes,
            "output_dir": str(self.output_dir),
            "seed_grid": list(self.seed_grid),
            "report_format": self.report_format,
        }

    def forcing_model(self) -> ForcingModel:
        if self.forcing is None:
            raise ConfigError("no forcing configured, use a [forcing] table or --forcing")
        return forcing_from_config(self.forcing)


def read_config_file(path: str | Path) -> dict:
    """
    toml or json by suffix
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    if path.suffix == ".toml":
        with open(path, "rb") as f:
            try:
                return tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{path} is not valid toml: {e}") from e
    if path.suffix == ".json":
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid json: {e}") from e
    raise ConfigError(f"configuration file must end in .toml or .json, got {path.name}")


def build_config(args: argparse.Namespace) -> RunConfig:
    data = read_config_file(args.config) if args.config else {}
    if args.forcing:
        data["forcing"] = read_config_file(args.forcing)
    if args.N is not None:
        data["N"] = args.N
    if args.eps:
        data["eps_grid"] = [float(e) for e in args.eps.split(",")]
    if args.out:
        data["output_dir"] = args.out
    if args.format:
        data["report_format"] = args.format
    return RunConfig.from_dict(data)


def _emit(config: RunConfig, name: str, payload: dict, table: pd.DataFrame) -> None:
    """
    json carries the payload and the effective configuration, csv the table, text prints the table
    """
    out = config.output_dir
    if config.report_format == "json":
        write_json({"config": config.to_dict(), **payload}, out / f"{name}.json")
    elif config.report_format == "csv":
        write_frame(table, out / f"{name}.csv")
    else:
        text = table.to_string(index=False)
        atomic_write_text(text + "\n", out / f"{name}.txt")
        print(text)


def cmd_circular(config: RunConfig) -> int:
    f = config.forcing_model()
    try:
        if f.kind != ForcingKind.LINEAR_FORCING:
            raise WrongKindError(f"circular analysis needs LinearForcing, got {f.kind.value}")
        report = m_matrix(f.spectrum, config.N)
    except (OffManifoldError, DegenerateEquatorError, WrongKindError, ValueError) as e:
        print(f"circular analysis not applicable: {e}", file=sys.stderr)
        return EXIT_CIRCULAR

    table = pd.DataFrame([
        {
            "family": p.base,
            "lambda": p.lam,
            "M11": report.M_matrix[0, 0],
            "M12": report.M_matrix[0, 1],
            "M22": report.M_matrix[1, 1],
            "det_M": report.det_M,
            "class": p.verdict.value,
            "prediction": p.sentence(),
        }
        for p in report.family_predictions
    ])
    logger.info("circular analysis: det M(p) = %.6g", report.det_M)
    _emit(config, "circular_report", {"report": report.to_dict()}, table)
    return EXIT_OK


def _critical_points(config: RunConfig, f: ForcingModel):
    averaged = AveragedFunction(config.N, f, config.quadrature_nodes)
    search = search_critical_points(averaged, seed_grid(averaged, config.seed_grid), max_workers=max_workers())
    return averaged, search


def cmd_average(config: RunConfig, grid: bool = False) -> int:
    f = config.forcing_model()
    averaged, search = _critical_points(config, f)

    if grid:
        write_frame(gamma_grid(averaged, config.seed_grid), config.output_dir / "gamma_grid.csv")
    if search.degenerate:
        print("degenerate: gradient vanishes identically", file=sys.stderr)
        return EXIT_NO_CRITICAL_POINTS
    if not search.points:
        print("no critical points found", file=sys.stderr)
        return EXIT_NO_CRITICAL_POINTS

    logger.info("found %d critical points", len(search.points))
    payload = {
        "critical_points": [cp.to_dict() for cp in search.points],
        "failures": [{"seed": list(seed), "error": error} for seed, error in search.failures],
    }
    table = pd.DataFrame([
        {k: v for k, v in cp.to_dict().items() if k != "hessian"} for cp in search.points
    ])
    _emit(config, "critical_points", payload, table)
    return EXIT_OK


def cmd_continue(config: RunConfig) -> int:
    f = config.forcing_model()
    _, search = _critical_points(config, f)
    if not search.points:
        print("no critical points to continue", file=sys.stderr)
        return EXIT_NO_CRITICAL_POINTS

    outcomes = continue_branches(f, search.points, list(config.eps_grid), config.integrator)
    rows = []
    for k, outcome in enumerate(outcomes):
        cp = outcome.critical_point
        row = {
            "branch": k,
            "lambda": cp.lam,
            "eta": cp.eta,
            "xi": cp.xi,
            "predicted": cp.predicted_class.value,
            "verdict": None,
            "observed": None,
            "points": 0,
            "truncated": None,
            "det_slope": np.nan,
            "det_rel_error": np.nan,
            "trace_rel_error": np.nan,
            "fit_passed": None,
            "error": outcome.error,
        }
        if outcome.branch is not None:
            branch = outcome.branch
            classification = classify_branch(branch)
            row.update(
                verdict=classification.verdict.value,
                observed=",".join(classification.table["observed"]),
                points=len(branch.points),
                truncated=branch.truncated,
                error=branch.failure,
            )
            branch_payload = {"branch": branch.to_dict(), "classification": classification.to_dict()}
            try:
                fit = expansion_check(branch)
                row.update(
                    det_slope=fit.det_slope,
                    det_rel_error=fit.det_rel_error,
                    trace_rel_error=fit.trace_rel_error,
                    fit_passed=fit.passed(),
                )
                branch_payload["expansion_fit"] = fit.to_dict()
            except KeplerAveragingError as e:
                logger.warning("expansion fit of branch %d rejected: %s", k, e)
                branch_payload["expansion_fit"] = {"error": str(e)}

            write_json({"config": config.to_dict(), **branch_payload}, config.output_dir / f"branch_{k}.json")
            write_frame(branch.to_frame(), config.output_dir / f"branch_{k}.csv")
        rows.append(row)

    summary = pd.DataFrame(rows)
    _emit(config, "continue_summary", {"branches": summary.to_dict(orient="records")}, summary)
    completed = sum(1 for outcome in outcomes if outcome.branch is not None)
    return EXIT_OK if completed else EXIT_NO_BRANCH


def _label(a: complex) -> str:
    a = complex(a)
    return f"{a.real:g}" if a.imag == 0 else f"{a.real:g}{a.imag:+g}i"


def _reproduce_one(a: complex, config: RunConfig) -> pd.DataFrame:
    report = two_harmonic_report(a, 1)
    validation = cross_validate(
        report,
        two_harmonic_forcing(a, 1),
        list(config.eps_grid),
        config.integrator,
        quadrature_nodes=config.quadrature_nodes,
    )
    table = validation.class_table.copy()
    table.insert(0, "det_M", report.det_M)
    table.insert(0, "a", _label(a))
    table["hessian_match"] = validation.hessian_match
    table["threshold"] = report.family_predictions[0].verdict.value == "Inconclusive"
    return table


def cmd_reproduce_paper(config: RunConfig) -> int:
    """
    sweep p(t) = e^{it} + a e^{-it} across the |a| = 4 transition
    """
    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tables = list(pool.map(lambda a: _reproduce_one(a, config), AMPLITUDE_SWEEP))
    else:
        tables = [_reproduce_one(a, config) for a in AMPLITUDE_SWEEP]

    table = pd.concat(tables, ignore_index=True)
    text = table[["a", "det_M", "family", "predicted", "observed", "match"]].to_string(index=False)
    print(text)
    _emit(config, "reproduce_paper", {"rows": table.to_dict(orient="records")}, table)

    off_threshold = table.loc[~table["threshold"]]
    if not (off_threshold["match"].all() and off_threshold["hessian_match"].all()):
        logger.error("prediction and observation disagree away from the threshold")
        return EXIT_MISMATCH
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kepler-averaging", description=__doc__.strip().splitlines()[0])
    parser.add_argument("command", choices=["circular", "average", "continue", "reproduce-paper"])
    parser.add_argument("--config", help="run configuration, .toml or .json")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", choices=REPORT_FORMATS, help="report format")
    parser.add_argument("--forcing", help="forcing configuration file, overrides [forcing]")
    parser.add_argument("--N", type=int, help="winding number")
    parser.add_argument("--grid", action="store_true", help="also write the γ_N grid as csv (average)")
    parser.add_argument("--eps", help="comma separated eps grid (continue)")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = build_config(args)
        if args.command == "circular":
            return cmd_circular(config)
        if args.command == "average":
            return cmd_average(config, grid=args.grid)
        if args.command == "continue":
            return cmd_continue(config)
        return cmd_reproduce_paper(config)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
