"""Command-line interface.

Thin wiring over the library: each subcommand reads a CSV or a config from
flags, calls the corresponding library routine, and writes one JSON document
to --out (default stdout). Exit codes: 0 success, 1 validation/usage error,
2 verification failure (a `verify` run whose report did not pass).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .. import designs, distlib, estimators, ivconf, popstats, randtests
from ..errors import FinpopError, ValidationError
from . import experiments, ingest
from .reports import SCHEMA_VERSION, as_jsonable

__all__ = ["main", "build_parser"]

_KIND_DEFAULTS = {
    # kind -> (population, ns, reps, tol)
    "clt": ("ranks", (16, 64, 256, 1024), 20000, 0.02),
    "rerand": ("ranks", (256,), 20000, 0.02),
    "coverage": ("additive", (200,), 10000, 0.01),
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, but this tool reserves 2 for
    # verification failures, so usage problems exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_ints(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _check_design(design: str | None, realized) -> None:
    """--design declares the intended arm sizes; a mismatch with the data is a
    hard error, catching truncated or mislabeled files."""
    if design is None:
        return
    declared = list(_parse_ints(design, "--design"))
    realized = [int(v) for v in realized]
    if declared != realized:
        raise ValidationError(
            f"--design declares arm sizes {declared} but the data realize {realized}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="finpop",
                     description="finite-population randomization inference")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default=None, metavar="PATH",
                       help="write the JSON result here instead of stdout")
        return p

    p = add("estimate", "contrast estimate with covariance and intervals")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--design", default=None, metavar="N1,N2,...")
    p.add_argument("--alpha", type=float, default=0.05)

    p = add("test", "randomization tests on one realized assignment")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--design", default=None, metavar="N1,N2,...")
    p.add_argument("--stat", required=True,
                   choices=("kw", "diff", "wilcoxon", "max", "range", "dose", "hyper"))
    p.add_argument("--method", default="normal", choices=("normal", "exact", "mc"))
    p.add_argument("--alternative", default=None,
                   choices=("two_sided", "greater", "less"))
    p.add_argument("--ties", default="strict", choices=("strict", "midrank"))
    p.add_argument("--doses", default=None, metavar="D1,D2,...")
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cap", type=int, default=None,
                   help="enumeration cap for --method exact")
    p.add_argument("--alpha", type=float, default=0.05)

    p = add("iv-ci", "confidence set for an effect ratio under encouragement")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--design", default=None, metavar="N1,N0")
    p.add_argument("--alpha", type=float, default=0.05)

    p = add("factorial", "factorial effects and their sharp-null moments")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--design", default=None, metavar="N1,N2,...")
    p.add_argument("--factors", type=int, required=True, metavar="K")

    for name, help_text in (
        ("simulate", "run a Monte Carlo experiment and report it"),
        ("verify", "run a verification suite; exit 2 unless every metric passes"),
    ):
        p = add(name, help_text)
        if name == "simulate":
            p.add_argument("--kind", required=True,
                           choices=("clt", "rerand", "coverage"))
        else:
            p.add_argument("--suite", required=True,
                           choices=experiments.SUITES)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--pop", default=None,
                       help="population or table kind for the experiment")
        p.add_argument("--ns", default=None, metavar="N1,N2,...",
                       help="population-size ladder")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--cap", type=int, default=None)

    return parser


# ---------------------------------------------------------------------------
# estimate

def _pairwise_contrast(q: int) -> np.ndarray:
    contrast = np.zeros((q, q - 1))
    contrast[:q - 1] = np.eye(q - 1)
    contrast[q - 1] = -1.0
    return contrast


def _interval_payload(report, alpha) -> dict:
    point = float(report.point[0])
    half = distlib.std_normal_quantile(1.0 - alpha / 2.0) * float(
        np.sqrt(report.cov[0, 0])
    )
    return {"ci": [point - half, point + half]}


def _estimate_plain(data: ingest.ObservedData, alpha: float) -> dict:
    q = data.q_arms
    if q < 2:
        raise ValidationError("estimation needs at least two arms")
    contrast = _pairwise_contrast(q)
    point = estimators.tau_hat(data.labels, data.y, contrast)
    cov = estimators.cov_estimator(data.labels, data.y, contrast)
    sizes = estimators.arm_sizes(data.labels)
    report = estimators.EstimateReport(
        point=point, cov=cov, sizes=tuple(int(s) for s in sizes),
        method="difference_in_means",
    )
    region = estimators.wald_region(report, alpha)
    payload = {
        "method": report.method,
        "point": point,
        "cov": cov,
        "sizes": list(report.sizes),
        "contrast": contrast,
        "contrast_note": "each arm versus the last",
        "wald_chi2_threshold": region.chi2_threshold,
    }
    if q == 2:
        payload.update(_interval_payload(report, alpha))
    return payload


def _estimate_regression(data: ingest.ObservedData, alpha: float) -> dict:
    x = data.centered_x()
    beta1, beta0 = estimators.fit_ls_coefs(data.labels, data.y, x)
    report = estimators.regression_adjusted(data.labels, data.y, x, beta1, beta0)
    payload = {
        "method": report.method,
        "point": report.point,
        "cov": report.cov,
        "sizes": list(report.sizes),
        "coefficients": {"arm1": beta1, "arm2": beta0},
        "coefficient_note": "least-squares slopes fitted from the same data; "
                            "the variance is the plug-in form",
    }
    payload.update(_interval_payload(report, alpha))
    return payload


def _cluster_totals(data: ingest.ObservedData):
    m = int(data.clusters.max())
    arm_of = np.zeros(m, dtype=np.int64)
    for j in range(1, m + 1):
        arms = np.unique(data.labels[data.clusters == j])
        if arms.size != 1:
            raise ValidationError(f"cluster {j} spans arms {arms.tolist()}")
        arm_of[j - 1] = arms[0]
    y_tot = np.bincount(data.clusters, weights=data.y)[1:]
    x_tot = None
    if data.x is not None:
        x_tot = np.stack(
            [np.bincount(data.clusters, weights=data.x[:, k])[1:]
             for k in range(data.x.shape[1])],
            axis=1,
        )
        x_tot = x_tot - x_tot.mean(axis=0)
    return arm_of, y_tot, x_tot


def _estimate_cluster(data: ingest.ObservedData, alpha: float) -> dict:
    if data.q_arms != 2:
        raise ValidationError("cluster estimation supports two arms")
    arm_of, y_tot, x_tot = _cluster_totals(data)
    gamma1 = gamma0 = None
    if x_tot is not None:
        gamma1, gamma0 = estimators.fit_ls_coefs(arm_of, y_tot, x_tot)
    report = estimators.cluster_adjusted(
        arm_of, y_tot, x_tot, data.n_units, gamma1, gamma0
    )
    payload = {
        "method": report.method,
        "point": report.point,
        "cov": report.cov,
        "cluster_sizes_by_arm": list(report.sizes),
        "n_units": data.n_units,
    }
    if x_tot is not None:
        payload["coefficients"] = {"arm1": gamma1, "arm2": gamma0}
    payload.update(_interval_payload(report, alpha))
    return payload


def _cmd_estimate(args) -> tuple[dict, int]:
    data = ingest.ingest_csv(args.data, "arm")
    _check_design(args.design, estimators.arm_sizes(data.labels))
    if not 0.0 < args.alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {args.alpha}")
    if data.clusters is not None:
        payload = _estimate_cluster(data, args.alpha)
    elif data.x is not None:
        payload = _estimate_regression(data, args.alpha)
    else:
        payload = _estimate_plain(data, args.alpha)
    payload["alpha"] = args.alpha
    return payload, 0


# ---------------------------------------------------------------------------
# test

def _two_arm_normal(observed: float, var0: float, alternative: str) -> float:
    if var0 <= 0.0:
        raise ValidationError("constant outcomes: the null variance is zero")
    z = observed / np.sqrt(var0)
    if alternative == "greater":
        return 1.0 - distlib.std_normal_cdf(z)
    if alternative == "less":
        return distlib.std_normal_cdf(z)
    return min(1.0, 2.0 * (1.0 - distlib.std_normal_cdf(abs(z))))


def _randomized(stat_fn, data, method, alternative, args):
    if method == "mc":
        if args.seed is None:
            raise ValidationError("--seed is required for --method mc")
        return randtests.mc_randomization_pvalue(
            stat_fn, data.labels, data.y, args.reps, args.seed,
            alternative=alternative,
        )
    return randtests.exact_randomization_pvalue(
        stat_fn, data.labels, data.y, alternative=alternative, cap=args.cap,
    )


def _cmd_test(args) -> tuple[dict, int]:
    data = ingest.ingest_csv(args.data, "arm")
    _check_design(args.design, estimators.arm_sizes(data.labels))
    labels, y = data.labels, data.y
    n = data.n_units
    stat, method = args.stat, args.method
    max_type = stat in ("max", "range", "dose")
    alternative = args.alternative or ("greater" if max_type or stat == "kw"
                                       else "two_sided")
    if (max_type or stat == "kw") and alternative != "greater":
        raise ValidationError(f"--stat {stat} is upper-tailed; drop --alternative")

    if stat == "kw":
        if method == "normal":
            result = randtests.kruskal_wallis(labels, y, args.ties)
        else:
            def stat_fn(lab, yy):
                return randtests.kruskal_wallis(lab, yy, args.ties).statistic
            result = _randomized(stat_fn, data, method, "greater", args)
    elif stat == "diff":
        if method == "normal":
            observed = randtests.diff_in_means_stat(labels, y)
            counts = estimators.arm_sizes(labels, 2)
            var0 = n / (int(counts[0]) * int(counts[1])) * popstats.pop_moments(y).variance
            result = randtests.TestResult(
                statistic=observed,
                p_value=_two_arm_normal(observed, var0, alternative),
                method="normal_approx",
                alternative=alternative,
                null_variance=var0,
            )
        else:
            result = _randomized(randtests.diff_in_means_stat, data, method,
                                 alternative, args)
    elif stat == "wilcoxon":
        ranks = randtests.rank_transform(y, args.ties)
        observed = randtests.diff_in_means_stat(labels, ranks)
        if method == "normal":
            counts = estimators.arm_sizes(labels, 2)
            var0 = n / (int(counts[0]) * int(counts[1])) * popstats.pop_moments(ranks).variance
            result = randtests.TestResult(
                statistic=observed,
                p_value=_two_arm_normal(observed, var0, alternative),
                method="normal_approx",
                alternative=alternative,
                null_variance=var0,
            )
        else:
            def stat_fn(lab, _yy):
                return randtests.diff_in_means_stat(lab, ranks)
            result = _randomized(stat_fn, data, method, alternative, args)
    elif max_type:
        ranks = randtests.rank_transform(y, args.ties)
        doses = None
        if stat == "dose":
            if args.doses is None:
                raise ValidationError("--stat dose requires --doses")
            doses = np.asarray(_parse_floats(args.doses, "--doses"))

        def stat_fn(lab, _yy):
            if stat == "max":
                return randtests.extreme_rank_stats(lab, ranks)[0]
            if stat == "range":
                return randtests.extreme_rank_stats(lab, ranks)[1]
            return randtests.dose_rank_stat(lab, ranks, doses)

        observed = stat_fn(labels, None)
        if method == "normal":
            if args.seed is None:
                raise ValidationError(
                    "--seed is required for the simulated normal reference")
            sizes = estimators.arm_sizes(labels)
            result = randtests.rank_stat_normal_pvalue(
                sizes, observed, stat, args.reps, args.seed, doses=doses)
        else:
            result = _randomized(stat_fn, data, method, "greater", args)
    else:  # hyper
        if method == "mc":
            raise ValidationError("--stat hyper supports --method exact or normal")
        result = randtests.hypergeom_test(labels, y, mode=method,
                                          alternative=alternative)

    payload = {
        "stat": stat,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "method": result.method,
        "alternative": result.alternative,
        "null_mean": result.null_mean,
        "null_variance": result.null_variance,
        "ties": args.ties,
    }
    return payload, 0


# ---------------------------------------------------------------------------
# iv-ci and factorial

def _cmd_iv_ci(args) -> tuple[dict, int]:
    data = ingest.ingest_csv(args.data, "iv")
    n1 = int(data.z.sum())
    _check_design(args.design, (n1, data.n_units - n1))
    conf_set = ivconf.iv_confidence_set(data.z, data.d, data.y, args.alpha)
    summary = ivconf.iv_summary(data.z, data.d, data.y, args.alpha)
    condition = ivconf.iv_condition_stat(data.z, data.d, data.y)
    payload = {
        "kind": conf_set.kind,
        "endpoints": list(conf_set.endpoints),
        "eta": summary.eta,
        "alpha": args.alpha,
        "summary": {
            "tau_hat_y": summary.tau_hat_y,
            "tau_hat_d": summary.tau_hat_d,
            "s2_y": summary.s2_y,
            "s2_d": summary.s2_d,
            "s_yd": summary.s_yd,
            "n1": summary.n1,
            "n0": summary.n0,
        },
        "condition": {
            "value": None if condition.degenerate else condition.value,
            "degenerate": condition.degenerate,
        },
    }
    return payload, 0


def _cmd_factorial(args) -> tuple[dict, int]:
    data = ingest.ingest_csv(args.data, "arm")
    spec = designs.factorial_contrasts(args.factors)
    if data.q_arms != spec.q_arms:
        raise ValidationError(
            f"{args.factors} factors require {spec.q_arms} arms, "
            f"data has {data.q_arms}"
        )
    sizes = estimators.arm_sizes(data.labels, spec.q_arms)
    _check_design(args.design, sizes)
    effects = estimators.factorial_effects(data.labels, data.y, spec)
    v_n = popstats.pop_moments(data.y).variance
    variances, correlation = estimators.factorial_null_moments(v_n, sizes, spec)
    payload = {
        "factors": args.factors,
        "effect_names": list(spec.names),
        "effects": effects,
        "sharp_null_variances": variances,
        "sharp_null_correlation": correlation,
        "sizes": [int(s) for s in sizes],
        "arm_levels": spec.levels,
    }
    return payload, 0


# ---------------------------------------------------------------------------
# simulate and verify

def _experiment_config(args, kind: str) -> experiments.ExperimentConfig:
    pop_default, ns_default, reps_default, tol_default = _KIND_DEFAULTS[kind]
    return experiments.ExperimentConfig(
        kind=kind,
        seed=args.seed,
        reps=reps_default if args.reps is None else args.reps,
        alpha=args.alpha,
        population=args.pop or pop_default,
        ns=ns_default if args.ns is None else _parse_ints(args.ns, "--ns"),
        tol=tol_default if args.tol is None else args.tol,
    )


def _cmd_simulate(args) -> tuple[dict, int]:
    config = _experiment_config(args, args.kind)
    runner = (experiments.run_coverage_experiment if args.kind == "coverage"
              else experiments.run_clt_experiment)
    return runner(config).to_dict(), 0


def _cmd_verify(args) -> tuple[dict, int]:
    report = experiments.run_suite(
        args.suite, seed=args.seed, reps=args.reps, alpha=args.alpha,
        population=args.pop,
        ns=None if args.ns is None else _parse_ints(args.ns, "--ns"),
        cap=args.cap,
    )
    return report.to_dict(), 0 if report.passed else 2


_COMMANDS = {
    "estimate": _cmd_estimate,
    "test": _cmd_test,
    "iv-ci": _cmd_iv_ci,
    "factorial": _cmd_factorial,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def _emit(payload: dict, out_path: str | None) -> None:
    body = dict(payload)
    body.setdefault("schema_version", SCHEMA_VERSION)
    text = json.dumps(as_jsonable(body), indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    logger = logging.getLogger("finpop")
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        payload, code = _COMMANDS[args.command](args)
    except FinpopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(payload, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
