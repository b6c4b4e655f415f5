"""Command-line driver: ``bayesreg {fit,select,predict,bootstrap,gen}``.

Exit codes: 0 success, 1 data or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import IndexSet, apply_rescale, evaluate_design, parse_indices, rescale_bounds
from .dataio import (
    FitReport,
    RunConfig,
    build_index_set,
    build_noise,
    build_prior,
    emit_report,
    generate_synthetic,
    parse_report,
    posterior_from_dict,
    posterior_to_dict,
    read_dataset,
    to_jsonable,
    write_dataset,
)
from .diagnostics import bootstrap_coefficients, fit, predict
from .errors import DataError, NoSignFixedPoint, NumericalError
from .estimators import Dataset, precision_posterior
from .selection import PriorPolicy, degree_weighted_prior, log_evidence_map, stepwise_select

log = logging.getLogger("bayesreg")

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DATA, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bayesreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS
    for name, help_ in [
        ("fit", "fit one method on one index set"),
        ("select", "stepwise KIC selection of multi-indices"),
        ("predict", "predict at new inputs from a fit report"),
        ("bootstrap", "pairs-bootstrap the coefficients"),
        ("gen", "generate a synthetic dataset"),
    ]:
        p = sub.add_parser(name, help=help_, argument_default=S)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--data", help="CSV dataset (gen: path to write)")
        p.add_argument("--d", type=int, help="number of input columns")
        p.add_argument("--header", action="store_true", help="CSV has a header row")
        p.add_argument("--rescale", action="store_true", help="map each input column to [-1, 1]")
        p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=["gls", "ols", "ridge", "lasso"])
        p.add_argument("--family", choices=["monomial", "legendre", "hermite"])
        p.add_argument("--max-degree", dest="max_degree", type=int)
        p.add_argument("--noise-iid", dest="noise_iid", type=float, help="iid noise variance")
        p.add_argument("--sweeps", action="store_true", help="repeat selection passes until none accepts")
        p.add_argument("--tie-epsilon", dest="tie_epsilon", type=float)
        p.add_argument("--replicates", type=int)
        p.add_argument("--report", help="fit report to predict from")
        p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    path = getattr(args, "config", None)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise DataError(f"{path}: config must be a JSON object")
    cfg = RunConfig.from_dict(raw)
    for key in ("out", "data", "d", "seed", "method", "family", "max_degree",
                "tie_epsilon", "replicates", "report"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    for key in ("header", "rescale", "sweeps"):
        if getattr(args, key, False):
            setattr(cfg, key, True)
    if hasattr(args, "max_degree"):
        cfg.indices = None
    if hasattr(args, "noise_iid"):
        cfg.noise = {"iid": args.noise_iid}
    if args.command == "select" and cfg.method is None:
        cfg.method = "ridge"
    return cfg


def _load_data(cfg: RunConfig, report: FitReport, bounds=None):
    data = read_dataset(cfg.data, d=cfg.d, header=cfg.header)
    if bounds is None and cfg.rescale:
        bounds = rescale_bounds(data.x)
    if bounds is not None:
        data = Dataset(apply_rescale(data.x, bounds), data.y)
    return data, bounds


def _basis_dict(index_set: IndexSet, bounds):
    return to_jsonable({
        "family": index_set.family,
        "indices": [list(a) for a in index_set.indices],
        "rescale_bounds": bounds,
    })


def _evidence_dict(ev):
    return to_jsonable({
        "log_evidence": ev.log_evidence,
        "kic": ev.kic,
        "log_likelihood_at_map": ev.log_likelihood_at_map,
        "log_prior_at_map": ev.log_prior_at_map,
        "p": ev.p,
    })


def run_fit(cfg: RunConfig, report: FitReport):
    data, bounds = _load_data(cfg, report)
    index_set = build_index_set(cfg, data.d)
    design = evaluate_design(data.x, index_set).values
    noise = build_noise(cfg.noise) if cfg.method != "ols" else None
    prior = build_prior(cfg.prior, index_set)
    post = fit(cfg.method, design, data.y, noise, prior)
    report.basis = _basis_dict(index_set, bounds)
    report.posterior = posterior_to_dict(post)
    report.warnings.extend(post.flags)
    if cfg.method == "ols":
        rss = post.sigma2_mle * data.n
        if rss > 0:
            g = precision_posterior(rss, data.n)
            report.gamma = {"shape": g.shape, "scale": g.scale, "mode": g.mode}
    if cfg.method in ("ridge", "lasso") and not (prior.kind == "laplace" and np.any(prior.scale <= 0)):
        report.evidence = _evidence_dict(log_evidence_map(design, data.y, noise, prior))


def run_select(cfg: RunConfig, report: FitReport):
    data, bounds = _load_data(cfg, report)
    candidates = build_index_set(cfg, data.d, default_family="legendre")
    noise = build_noise(cfg.noise)
    policy = PriorPolicy(**cfg.policy)
    final, trace = stepwise_select(data, candidates, noise, policy, cfg.tie_epsilon, cfg.sweeps)
    design = evaluate_design(data.x, final).values
    ev = log_evidence_map(design, data.y, noise, degree_weighted_prior(final, policy))
    report.basis = _basis_dict(final, bounds)
    report.posterior = posterior_to_dict(ev.posterior)
    report.evidence = _evidence_dict(ev)
    report.warnings.extend(ev.posterior.flags)
    report.selection = to_jsonable({
        "initial_set": [list(a) for a in trace.initial_set],
        "initial_kic": trace.initial_kic,
        "steps": [
            {"candidate": list(s.candidate), "kic": s.kic, "accepted": s.accepted,
             "p_after": s.p_after, "reason": s.reason}
            for s in trace.steps
        ],
        "final_set": [list(a) for a in final],
        "final_kic": trace.final_kic,
        "passes": trace.sweeps,
    })


def run_bootstrap(cfg: RunConfig, report: FitReport):
    data, bounds = _load_data(cfg, report)
    index_set = build_index_set(cfg, data.d)
    noise = build_noise(cfg.noise) if cfg.method != "ols" else None
    prior = build_prior(cfg.prior, index_set)
    summary = bootstrap_coefficients(data, index_set, noise, prior, cfg.method, cfg.replicates, cfg.seed)
    report.basis = _basis_dict(index_set, bounds)
    report.bootstrap = to_jsonable({
        "replicates": summary.replicates,
        "failed": summary.failed,
        "coefficient_means": summary.coefficient_means,
        "coefficient_stddevs": summary.coefficient_stddevs,
        "seed": summary.seed,
        "algorithm": summary.algorithm,
    })
    if summary.failed:
        report.warnings.append(f"bootstrap_replicates_skipped: {summary.failed}")


def run_predict(cfg: RunConfig, report: FitReport):
    fitted = parse_report(Path(cfg.report).read_text())
    if fitted.posterior is None or fitted.basis is None:
        raise DataError(f"{cfg.report}: report has no fitted posterior")
    basis = fitted.basis
    bounds = basis.get("rescale_bounds")
    data, _ = _load_data(cfg, report, None if bounds is None else np.asarray(bounds))
    index_set = IndexSet(parse_indices(basis["indices"]), basis["family"])
    post = posterior_from_dict(fitted.posterior)
    noise = build_noise(cfg.noise)
    if noise is not None and noise.size() not in (None, data.n):
        noise = None
        report.warnings.append("noise_model_not_applicable_to_new_points")
    pred = predict(post, evaluate_design(data.x, index_set), noise)
    report.basis = basis
    report.prediction = to_jsonable({
        "mean": pred.mean,
        "model_variance": pred.model_variance,
        "noise_variance": pred.noise_variance,
    })


def run_gen(cfg: RunConfig, report: FitReport):
    spec = dict(cfg.gen)
    index_set = IndexSet(parse_indices(spec["indices"]), spec.get("family", cfg.family or "legendre"))
    data, truth = generate_synthetic(spec["coefficients"], index_set, float(spec.get("sigma", 0.0)),
                                     int(spec["n"]), cfg.seed)
    if cfg.data is None:
        raise DataError("gen needs --data (output CSV path)")
    write_dataset(cfg.data, data, header=cfg.header)
    report.ground_truth = truth


COMMANDS = {
    "fit": run_fit,
    "select": run_select,
    "predict": run_predict,
    "bootstrap": run_bootstrap,
    "gen": run_gen,
}


def _write(report: FitReport, out):
    text = emit_report(report)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = getattr(args, "out", None)
    report = FitReport(command=args.command, config={})
    if not getattr(args, "no_timestamp", False):
        report.generated_at = datetime.now(timezone.utc).isoformat()
    code = EXIT_OK
    try:
        cfg = load_config(args)
        out = cfg.out
        cfg.validate(args.command)
        report.config = cfg.to_dict()
        COMMANDS[args.command](cfg, report)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        code = EXIT_NUMERIC
        report.error = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, NoSignFixedPoint):
            report.error["trace"] = exc.trace
    except (DataError, OSError, KeyError, TypeError, ValueError) as exc:
        code = EXIT_DATA
        report.error = {"type": type(exc).__name__, "message": str(exc)}
    if report.error is not None:
        print(f"bayesreg: {report.error['type']}: {report.error['message']}", file=sys.stderr)
    _write(report, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
