"""Command-line harness.

Subcommands: eigvec, eigval, warmstart-table, tradeoff, positioning,
diagnose.  Outputs are CSV (fixed headers) or a one-line JSON record;
every row carries its seed and re-running with the same seed reproduces
every byte.  GOSSIP_PCA_THREADS caps the worker pool (results do not
depend on it).  Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments
from .diagnostics import absorbing_escapes, measure_contraction, measure_mixing, mixing_curve_csv, report_text
from .errors import NumericalError, ValidationError
from .estimators import estimate_eigenvalue, gossip_pca, warm_start
from .experiments import ExperimentConfig, cell_rng, load_config, parse_config_text
from .linalg import proj_distance_vec, spectral_oracle
from .network import ComplexityLedger, GossipAvgConfig
from .sparsify import SparsifyScheme, estimate_theta


class _Parser(argparse.ArgumentParser):
    """argparse that treats bad usage (unknown flags etc.) as exit code 1."""

    def error(self, message):
        sys.stderr.write(f"error: {message}\n")
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="matrix dimension")
    p.add_argument("--d", type=float, default=None, help="average nonzeros per row")
    p.add_argument("--t", type=int, default=None, help="iteration rounds")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--delta", type=float, default=None, help="failure-probability parameter")
    p.add_argument("--epsilon", type=float, default=None, help="gossip averaging precision")
    p.add_argument("--l2-target", type=float, default=None, help="synthetic eigenvalue ratio")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> _Parser:
    parser = _Parser(prog="gossip-pca", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    specs = {
        "eigvec": "estimate the leading eigenvector on a synthetic matrix "
                  "(JSON record: n, d, theta_hat, t, chi, err, lambda_hat, seed)",
        "eigval": "estimate the leading eigenvalue (same JSON record)",
        "warmstart-table": "meeting-time table; CSV header d,tau,err,censored,seed",
        "tradeoff": "error vs budget for both methods; CSV header chi,method,d,err,seed",
        "positioning": "MDS positioning error vs budget; CSV header chi,delta,d,seed",
        "diagnose": "contraction / absorption report (structured text)",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "eigvec":
            p.add_argument("--init", choices=("auto", "warm", "random"), default="auto")
            p.add_argument("--trace", default=None,
                           help="write a per-round CSV (round,chi,max_node_value,norm_estimate)")
    return parser


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _csv(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _config_overrides(args) -> dict:
    over = {}
    if args.n is not None:
        over["n"] = args.n
    if args.delta is not None:
        over["delta"] = args.delta
    if args.epsilon is not None:
        over["epsilon"] = args.epsilon
    if getattr(args, "l2_target", None) is not None:
        over["l2_target"] = args.l2_target
    if args.d is not None:
        over["d_list"] = (args.d,)
    return over


def _load_cfg(args, experiment: str, **defaults) -> ExperimentConfig:
    over = _config_overrides(args)
    over["experiment"] = experiment
    if args.config:
        with open(args.config) as fh:
            values = parse_config_text(fh.read())
    else:
        values = {}
    merged = dict(defaults)
    merged.update(values)
    merged.update(over)
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ValidationError(f"bad config key: {exc}") from exc


def _single_run_setup(args):
    """Matrix, oracle, and scheme for the one-shot eigvec/eigval commands."""
    n = args.n if args.n is not None else 64
    d = args.d if args.d is not None else max(8.0, n / 8)
    t = args.t if args.t is not None else 100
    epsilon = args.epsilon if args.epsilon is not None else 1e-6
    l2 = args.l2_target if args.l2_target is not None else 0.5
    if d > n:
        raise ValidationError(f"--d must not exceed --n (got d = {d}, n = {n})")
    m = experiments.make_synthetic(n, l2, cell_rng(args.seed, 0))
    spec = spectral_oracle(m)
    scheme = SparsifyScheme(n=n, d=float(d))
    return m, spec, scheme, t, GossipAvgConfig(epsilon=epsilon)


def _record(**kw) -> str:
    return json.dumps(kw, sort_keys=True) + "\n"


def cmd_eigvec(args) -> str:
    m, spec, scheme, t, gossip_cfg = _single_run_setup(args)
    rng = cell_rng(args.seed, 1)
    ledger = ComplexityLedger()
    theta_hat = estimate_theta(m, scheme, 5, rng, norm_m=spec.lam)
    init = args.init
    if init == "auto":
        init = "warm" if theta_hat < 1.0 - spec.l2 else "random"
    if init == "warm":
        x0 = warm_start(m, scheme, theta_hat, spec.l2, rng, ledger, norm_m=spec.lam)
    else:
        x0 = rng.standard_normal(m.n)
        x0 /= np.linalg.norm(x0)
    trace = [] if args.trace else None
    est, _ = gossip_pca(
        m, scheme, x0, t, gossip_cfg, rng, ledger,
        keep_trajectory=False, oracle_u=spec.u, trace=trace,
    )
    if args.trace:
        rows = [(r, chi, mx, nrm) for r, chi, mx, nrm in trace]
        _write(_csv(["round", "chi", "max_node_value", "norm_estimate"], rows), args.trace)
    return _record(
        n=m.n, d=scheme.d, theta_hat=theta_hat, t=t, chi=ledger.chi,
        err=est.err_vs_oracle, lambda_hat=None, seed=args.seed,
    )


def cmd_eigval(args) -> str:
    m, spec, scheme, t, gossip_cfg = _single_run_setup(args)
    rng = cell_rng(args.seed, 1)
    ledger = ComplexityLedger()
    theta_hat = estimate_theta(m, scheme, 5, rng, norm_m=spec.lam)
    est = estimate_eigenvalue(m, scheme, t, gossip_cfg, rng, ledger)
    return _record(
        n=m.n, d=scheme.d, theta_hat=theta_hat, t=t, chi=ledger.chi,
        err=abs(est.lambda_hat - spec.lam) / spec.lam, lambda_hat=est.lambda_hat,
        seed=args.seed,
    )


def cmd_warmstart_table(args) -> str:
    cfg = _load_cfg(
        args, "warmstart_table",
        n=256, d_list=(32.0, 64.0, 128.0), seeds=(args.seed, args.seed + 1),
        l2_target=0.1,
    )
    rows = experiments.run_warmstart_table(cfg)
    return _csv(
        ["d", "tau", "err", "censored", "seed"],
        [(r.d, r.tau, r.err, r.censored, r.seed) for r in rows],
    )


def cmd_tradeoff(args) -> str:
    cfg = _load_cfg(
        args, "tradeoff",
        n=128, d_list=(16.0, 64.0), chi_list=(500.0, 1000.0, 2000.0, 4000.0),
        seeds=(args.seed, args.seed + 1),
    )
    summary = experiments.run_tradeoff(cfg)
    return _csv(
        ["chi", "method", "d", "err", "seed"],
        [(r.chi, r.method, r.d, r.err, r.seed) for r in summary.rows],
    )


def cmd_positioning(args) -> str:
    cfg = _load_cfg(
        args, "positioning",
        n=100, d_list=(20.0,), chi_list=(500.0, 1000.0, 2000.0, 4000.0),
        seeds=(args.seed,), matrix_source="mds",
    )
    rows = experiments.run_positioning(cfg)
    return _csv(
        ["chi", "delta", "d", "seed"],
        [(r.chi, r.delta, r.d, r.seed) for r in rows],
    )


def cmd_diagnose(args) -> str:
    n = args.n if args.n is not None else 128
    d = args.d if args.d is not None else 16.0
    l2 = args.l2_target if args.l2_target is not None else 0.5
    if d > n:
        raise ValidationError(f"--d must not exceed --n (got d = {d}, n = {n})")
    m = experiments.make_synthetic(n, l2, cell_rng(args.seed, 0))
    spec = spectral_oracle(m)
    scheme = SparsifyScheme(n=n, d=float(d))
    rng = cell_rng(args.seed, 1)
    report = measure_contraction(m, scheme, 1000, rng, spectrum=spec)
    escapes, steps = absorbing_escapes(
        m, scheme, 10, 200, rng, spectrum=spec, theta_hat=report.theta
    )
    mixing = measure_mixing(m, scheme, 40, 100, rng, spectrum=spec, theta_hat=report.theta)
    text = report_text(report, mixing)
    text += "absorption:\n"
    text += f"  escapes = {escapes}\n"
    text += f"  steps = {steps}\n"
    text += f"seed = {args.seed}\n"
    text += "mixing_curve:\n" + mixing_curve_csv(mixing)
    return text


_COMMANDS = {
    "eigvec": cmd_eigvec,
    "eigval": cmd_eigval,
    "warmstart-table": cmd_warmstart_table,
    "tradeoff": cmd_tradeoff,
    "positioning": cmd_positioning,
    "diagnose": cmd_diagnose,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = _COMMANDS[args.command](args)
        _write(text, args.out)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
