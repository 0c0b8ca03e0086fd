"""Monte Carlo sweeps over ``P_max`` with paired trials across schemes.

Trials are processed in fixed-size chunks of consecutive trial indices.  The
chunking never depends on the worker count, so a sweep is bit-identical no
matter how many processes run it.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging

import numpy as np

from .channel import SystemParams, TauMode, sample_batch
from .ipc import (
    FALLBACKS,
    IpcInputs,
    achievable_throughput_margin,
    algorithm1,
    algorithm2,
    full_power,
    margin_power,
    throughput_lower_bound,
)
from .metrics import aggregate, evaluate
from .numerics import SvdConvergenceError
from .precoding import assemble
from .quantization import generate_codebook

__all__ = [
    "SchemeConfig",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "SimulationError",
    "run_sweep",
    "scan_n",
    "make_codebooks",
    "run_chunk",
    "DEFAULT_SCHEMES",
    "SCHEME_KINDS",
    "CHUNK",
]

log = logging.getLogger(__name__)

CHUNK = 500
SCHEME_KINDS = ("perfect", "full_power", "margin", "algorithm1", "algorithm2")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """One IPC scheme as it appears in a sweep.

    ``tau`` is used by ``margin`` and by ``algorithm2`` with the ``margin``
    fallback.  ``alg1_step`` of ``None`` means the automatic step size.
    """

    name: str
    kind: str
    tau: TauMode = field(default_factory=TauMode)
    fallback: str = "p_max"
    alg1_step: float = None
    alg1_step_fraction: float = 0.05
    alg1_max_iters: int = 200
    alg1_tol: float = 1e-4
    alg1_multistart: bool = True

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {SCHEME_KINDS}")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"unknown fallback {self.fallback!r}; expected one of {FALLBACKS}")


DEFAULT_SCHEMES = {
    "perfect": SchemeConfig("perfect", "perfect"),
    "full_power": SchemeConfig("full_power", "full_power"),
    "margin_fixed": SchemeConfig("margin_fixed", "margin", TauMode("fixed", 2.0)),
    "margin_prop": SchemeConfig("margin_prop", "margin", TauMode("proportional", 0.4)),
    "algorithm1": SchemeConfig("algorithm1", "algorithm1"),
    "algorithm2": SchemeConfig("algorithm2", "algorithm2"),
}


@dataclass(frozen=True)
class SweepSpec:
    params: SystemParams
    p_max_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    schemes: tuple = (
        DEFAULT_SCHEMES["margin_fixed"],
        DEFAULT_SCHEMES["margin_prop"],
        DEFAULT_SCHEMES["algorithm1"],
        DEFAULT_SCHEMES["perfect"],
    )
    trials_per_point: int = 10_000
    master_seed: int = 0
    workers: int = 1
    per_trial_codebook: bool = False
    outer_from_true_inner: bool = False

    def __post_init__(self):
        if not len(self.p_max_db):
            raise ValueError("p_max grid is empty")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if not self.schemes:
            raise ValueError("no schemes selected")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate scheme names in {names}")


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    p_max_db: float
    point: object  # metrics.SweepPoint


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    # per-trial arrays keyed by (scheme, point index), kept for paired comparisons
    samples: dict = field(default_factory=dict, repr=False)

    def row(self, scheme, p_max_db):
        for r in self.rows:
            if r.scheme == scheme and np.isclose(r.p_max_db, p_max_db):
                return r.point
        raise KeyError((scheme, p_max_db))

    def sample(self, scheme, p_max_db, name):
        idx = [i for i, db in enumerate(self.spec.p_max_db) if np.isclose(db, p_max_db)][0]
        return self.samples[(scheme, idx)][name]


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def make_codebooks(params, seed, point=None, trials=None):
    """Codebooks for both links; per-trial stacks when ``trials`` is given."""
    if trials is None:
        return [generate_codebook(params, seed, n) for n in range(2)]
    books = []
    for n in range(2):
        per = [generate_codebook(params, seed, n, point, t) for t in trials]
        books.append(replace(per[0], entries=np.stack([b.entries for b in per])))
    return books


def _decide(scheme, inputs):
    """Powers plus the analytical (achievable) throughput per trial."""
    if scheme.kind == "perfect" or scheme.kind == "full_power":
        decision = full_power(inputs)
        if scheme.kind == "perfect":
            decision = replace(decision, scheme="perfect")
        return decision, throughput_lower_bound(inputs, decision.p)
    if scheme.kind == "margin":
        inputs = inputs.with_(tau=scheme.tau.resolve(inputs.p_max))
        decision = margin_power(inputs)
        return decision, achievable_throughput_margin(inputs, decision)
    if scheme.kind == "algorithm1":
        step = scheme.alg1_step
        decision = algorithm1(
            inputs,
            step=step,
            max_iters=scheme.alg1_max_iters,
            tol=scheme.alg1_tol * inputs.p_max,
            step_fraction=scheme.alg1_step_fraction,
            multistart=scheme.alg1_multistart,
        )
        return decision, throughput_lower_bound(inputs, decision.p)
    decision = algorithm2(inputs, fallback=scheme.fallback, fallback_tau=scheme.tau.resolve(inputs.p_max))
    return decision, throughput_lower_bound(inputs, decision.p)


def run_chunk(spec, point, start, stop, codebooks=None):
    """Run trials ``start..stop-1`` of grid point ``point`` for every scheme.

    Returns ``{scheme name: {field: per-trial array}}``.
    """
    params = replace(spec.params, p_max=float(db_to_linear(spec.p_max_db[point])))
    trials = range(start, stop)
    realization = sample_batch(params, spec.master_seed, trials, point=point)
    if spec.per_trial_codebook:
        codebooks = make_codebooks(params, spec.master_seed, point, trials)
    elif codebooks is None:
        codebooks = make_codebooks(params, spec.master_seed)
    kinds = {s.kind for s in spec.schemes}
    try:
        psets = {}
        if kinds - {"perfect"}:
            psets[False] = assemble(realization, codebooks, params, outer_from_true_inner=spec.outer_from_true_inner)
        if "perfect" in kinds:
            psets[True] = assemble(realization, codebooks, params, perfect_feedback=True)
    except SvdConvergenceError as exc:
        trial = start + int(exc.indices[0]) // 2
        raise SimulationError(
            f"SVD failed at seed={spec.master_seed} point={point} trial={trial}: {exc}"
        ) from exc

    out = {}
    for scheme in spec.schemes:
        pset = psets[scheme.kind == "perfect"]
        inputs = IpcInputs.from_precoders(pset, params)
        decision, achievable = _decide(scheme, inputs)
        m = evaluate(pset, realization, decision, params.theta, achievable=achievable)
        n = stop - start
        out[scheme.name] = dict(
            throughput=m.throughput,
            achievable=m.achievable,
            outage=m.outage,
            powers=m.powers,
            epsilon=m.epsilon,
            min_sinr=np.min(m.sinr, axis=(-2, -1)),
            feasible=m.feasible if m.feasible is not None else None,
            iterations=m.iterations if m.iterations is not None else None,
        )
        assert m.throughput.shape == (n,)
    return out


def _task(args):
    spec, point, start, stop, codebooks = args
    return point, start, run_chunk(spec, point, start, stop, codebooks)


def run_sweep(spec):
    """Run every (scheme, grid point) of ``spec`` and aggregate the results."""
    from .metrics import TrialMetrics

    codebooks = None if spec.per_trial_codebook else make_codebooks(spec.params, spec.master_seed)
    tasks = [
        (spec, point, start, min(start + CHUNK, spec.trials_per_point), codebooks)
        for point in range(len(spec.p_max_db))
        for start in range(0, spec.trials_per_point, CHUNK)
    ]
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))

    rows, samples = [], {}
    for point, db in enumerate(spec.p_max_db):
        chunks = [r[2] for r in results if r[0] == point]
        for scheme in spec.schemes:
            parts = [c[scheme.name] for c in chunks]
            merged = {
                k: (np.concatenate([p[k] for p in parts]) if parts[0][k] is not None else None)
                for k in parts[0]
            }
            samples[(scheme.name, point)] = merged
            tm = TrialMetrics(
                sinr=merged["min_sinr"][:, None, None],
                throughput=merged["throughput"],
                outage=merged["outage"],
                interference=None,
                powers=merged["powers"],
                epsilon=merged["epsilon"],
                achievable=merged["achievable"],
                feasible=merged["feasible"],
                iterations=merged["iterations"],
            )
            rows.append(SweepRow(scheme.name, float(db), aggregate(tm)))
            log.debug("point %s dB scheme %s done", db, scheme.name)
    return SweepResult(spec, rows, samples)


def scan_n(spec, n_values):
    """Sweep each inner-equalizer width ``N``; returns ``[(N, SweepResult)]``."""
    L, M = spec.params.l_antennas, spec.params.m_streams
    out = []
    for n in n_values:
        if not M <= n <= L - M:
            raise ValueError(f"N={n} outside [{M}, {L - M}] for L={L}, M={M}")
        out.append((n, run_sweep(replace(spec, params=replace(spec.params, n_inner=n)))))
    return out
