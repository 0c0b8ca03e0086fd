"""Command-line entry point.

Subcommands::

    coopfb sweep      throughput / outage / transmit SNR versus P_max (CSV)
    coopfb validate   property checks, nonzero exit on any failure
    coopfb asymptote  large-P_max margin-scheme asymptotes next to simulation (CSV)
    coopfb scan-n     sweep repeated for each inner-equalizer width N (CSV)

Exit codes: 0 success, 1 failed validation or simulation, 2 bad configuration.
"""

import argparse
import logging
import os
import sys
import tempfile

import numpy as np

from .config import PRESETS, ConfigError, load_config, parse_tau
from .metrics import asymptote_samples, lemma2_terms, lemma3_asymptote
from .simulator import SchemeConfig, SimulationError, SweepSpec, make_codebooks, run_sweep, scan_n
from .validation import run_checks

__all__ = ["main", "build_parser", "SWEEP_COLUMNS", "ASYMPTOTE_COLUMNS", "sweep_csv", "asymptote_csv"]

log = logging.getLogger("coopfb")

SWEEP_COLUMNS = (
    "scheme", "p_max_db", "throughput", "throughput_stderr", "outage", "outage_lo", "outage_hi",
    "avg_tx_snr_db", "mean_epsilon", "feasibility_rate", "trials", "seed",
    # appended after the stable block
    "achievable", "achievable_stderr", "mean_iterations",
)

ASYMPTOTE_COLUMNS = (
    "tau", "p_max_db", "asymptote_throughput", "asymptote_stderr", "outage_bound", "outage_bound_capped",
    "sim_achievable", "sim_achievable_stderr", "sim_throughput", "sim_throughput_stderr", "sim_outage",
    "relative_gap",
)

# short flags -> config keys
ALIASES = {
    "trials": "sweep.trials",
    "seed": "sweep.seed",
    "workers": "sweep.workers",
    "output": "output.path",
    "check": "validate.check",
    "points": "validate.points",
}


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.10g" % float(v)


def _csv(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def sweep_rows(result, prefix=()):
    seed = result.spec.master_seed
    out = []
    for r in result.rows:
        p = r.point
        out.append(prefix + (
            r.scheme, r.p_max_db, p.throughput, p.throughput_stderr, p.outage, p.outage_lo, p.outage_hi,
            p.avg_tx_snr_db, p.mean_epsilon, p.feasibility_rate, p.trials, seed,
            p.achievable, p.achievable_stderr, p.mean_iterations,
        ))
    return out


def sweep_csv(result):
    return _csv(SWEEP_COLUMNS, sweep_rows(result))


def write_atomic(path, text):
    """Write ``text`` to ``path`` in one step; ``-`` means stdout."""
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".coopfb-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(cfg, command):
    side = cfg["output.sidecar"]
    if side == "none":
        return None
    if side != "auto":
        return side
    out = cfg["output.path"]
    return f"coopfb-{command}.config.ini" if out == "-" else out + ".config.ini"


def cmd_sweep(cfg):
    spec = cfg.sweep_spec()
    log.info("sweep: %d points x %d schemes x %d trials", len(spec.p_max_db), len(spec.schemes), spec.trials_per_point)
    return sweep_csv(run_sweep(spec)), 0


def cmd_scan_n(cfg):
    spec = cfg.sweep_spec()
    L, M = spec.params.l_antennas, spec.params.m_streams
    n_values = cfg["scan_n.n_values"] or tuple(range(M, L - M + 1))
    try:
        results = scan_n(spec, n_values)
    except ValueError as exc:
        raise ConfigError(f"scan_n.n_values: {exc}") from None
    rows = []
    for n, res in results:
        rows.extend(sweep_rows(res, prefix=(n,)))
    return _csv(("n_inner",) + SWEEP_COLUMNS, rows), 0


def asymptote_table(cfg):
    """Rows of ``ASYMPTOTE_COLUMNS``, one per margin value on the tau grid."""
    top_db = max(cfg["sweep.p_max_db"])
    params = cfg.system_params(p_max=10 ** (top_db / 10))
    seed = cfg["sweep.seed"]
    trials = cfg["asymptote.trials"]
    codebooks = make_codebooks(params, seed)
    samples = asymptote_samples(params, codebooks[0], trials, seed)
    rows = []
    for tok in cfg["asymptote.tau"]:
        mode = parse_tau(tok)
        tau = mode.resolve(params.p_max)
        terms = lemma2_terms(params, codebooks[0], trials, tau=tau, samples=samples)
        bound = lemma3_asymptote(params, codebooks[0], params.theta, trials, tau=tau, samples=samples)
        scheme = SchemeConfig("margin", "margin", mode)
        spec = SweepSpec(
            params=params, p_max_db=(top_db,), schemes=(scheme,), trials_per_point=trials,
            master_seed=seed, workers=cfg["sweep.workers"],
            per_trial_codebook=cfg["sweep.per_trial_codebook"],
            outer_from_true_inner=cfg["precoding.outer_from_true_inner"],
        )
        point = run_sweep(spec).rows[0].point
        mean = float(np.mean(terms))
        stderr = float(np.std(terms, ddof=1) / np.sqrt(terms.size)) if terms.size > 1 else 0.0
        rows.append((
            tau, top_db, mean, stderr, bound, min(bound, 1.0),
            point.achievable, point.achievable_stderr, point.throughput, point.throughput_stderr, point.outage,
            abs(point.achievable - mean) / mean,
        ))
    return rows


def asymptote_csv(cfg):
    return _csv(ASYMPTOTE_COLUMNS, asymptote_table(cfg))


def cmd_asymptote(cfg):
    return asymptote_csv(cfg), 0


def cmd_validate(cfg):
    params = cfg.system_params()
    fault = "skip_search" if cfg["validate.inject_fault"] else None
    try:
        results = run_checks(params, cfg["validate.check"], cfg["validate.points"], cfg["sweep.seed"], fault)
    except ValueError as exc:
        raise ConfigError(f"validate.check: {exc}") from None
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n", 1 if failed else 0


COMMANDS = {"sweep": cmd_sweep, "validate": cmd_validate, "asymptote": cmd_asymptote, "scan-n": cmd_scan_n}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coopfb",
        description="Cooperative-feedback precoding for the two-user MIMO interference channel.",
        epilog="Any configuration key can be overridden as --section.key=value (e.g. --system.nu=0.05).",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    parser.add_argument("-o", "--output", help="output path, '-' for stdout")
    parser.add_argument("--trials", help="trials per grid point")
    parser.add_argument("--seed", help="master seed")
    parser.add_argument("--workers", help="worker processes")
    parser.add_argument("--check", help="comma-separated checks for validate, or 'all'")
    parser.add_argument("--points", help="instances per validation check")
    parser.add_argument("--inject-fault", action="store_true",
                        help="validate: transmit a fixed codeword while reporting the searched error")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def parse_overrides(extra):
    """``['--a.b=1', '--c.d', '2']`` -> ``{'a.b': '1', 'c.d': '2'}``."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise ConfigError(f"unrecognized argument {tok!r}")
        key, sep, value = tok[2:].partition("=")
        if not sep:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"missing value for --{key}")
        out[key] = value
    return out


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = parse_overrides(extra)
        for flag, key in ALIASES.items():
            value = getattr(args, flag)
            if value is not None:
                overrides[key] = value
        if args.inject_fault:
            overrides["validate.inject_fault"] = "true"
        cfg = load_config(args.config, overrides, args.preset)
    except ConfigError as exc:
        print(f"coopfb: config error: {exc}", file=sys.stderr)
        return 2

    level = cfg["output.verbosity"] + args.verbose - (2 if args.quiet else 0)
    logging.basicConfig(
        level=logging.DEBUG if level >= 2 else logging.INFO if level == 1 else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        text, status = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"coopfb: config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"coopfb: {exc}", file=sys.stderr)
        return 1

    write_atomic(cfg["output.path"], text)
    side = sidecar_path(cfg, args.command)
    if side is not None:
        write_atomic(side, cfg.to_ini())
        log.info("resolved configuration written to %s", side)
    return status


if __name__ == "__main__":
    sys.exit(main())
