"""Property checks run by ``coopfb validate``."""

from dataclasses import dataclass, replace

import numpy as np

from .channel import ORACLE_DOMAIN, sample_batch, stream
from .ipc import IpcInputs, algorithm1, algorithm2, slope, throughput_lower_bound
from .metrics import sinr, sinr_tilde
from .precoding import assemble, lemma1_bound, residual_interference
from .simulator import make_codebooks

__all__ = [
    "CheckResult",
    "CHECKS",
    "check_decoupling",
    "check_lemma1",
    "check_gradient",
    "check_algorithm2",
    "check_algorithm1",
    "random_ipc_inputs",
    "pipeline_ipc_inputs",
    "finite_difference_gradient",
    "run_checks",
]

# validation draws use their own stream index so they never alias sweep trials
VALIDATE_POINT = 1_000_003


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_decoupling(params, points, seed=0):
    """Perfect feedback: no residual interference, SINR = P * lambda."""
    real = sample_batch(params, seed, range(points), point=VALIDATE_POINT)
    pset = assemble(real, make_codebooks(params, seed), params, perfect_feedback=True)
    p = np.full((points, 2), params.p_max)
    interf = residual_interference(pset, real, p)
    s = sinr(pset, real, p)
    expected = params.p_max * pset.lambda_direct
    rel = np.max(np.abs(s - expected) / expected)
    worst = float(np.max(interf))
    ok = worst < 1e-9 and rel < 1e-8
    return CheckResult(
        "decoupling", ok, max(worst, rel), 1e-9,
        f"max interference {worst:.3e} (< 1e-9), max SINR rel. error {rel:.3e} (< 1e-8) over {points} realizations",
    )


def check_lemma1(params, points, seed=0, fault=None):
    """Residual interference never exceeds its stream-independent bound."""
    real = sample_batch(params, seed, range(points), point=VALIDATE_POINT)
    pset = assemble(real, make_codebooks(params, seed), params, fault=fault)
    p = np.full((points, 2), params.p_max)
    interf = residual_interference(pset, real, p)
    bound = lemma1_bound(pset, p, params)[..., None]
    violations = int(np.count_nonzero(interf > bound + 1e-9))
    ratio = float(np.max(interf / np.maximum(bound, 1e-300)))
    return CheckResult(
        "lemma1", violations == 0, violations, 0,
        f"{violations} violations over {points} realizations x {2 * params.m_streams} streams "
        f"(max interference/bound {ratio:.4f})",
    )


def random_ipc_inputs(rng, count, m_streams=None):
    """Broad random IPC inputs (not tied to a channel model) for gradient checks."""
    M = int(rng.integers(1, 4)) if m_streams is None else m_streams
    lam = np.sort(rng.exponential(2.0, size=(count, 2, M)), axis=-1)[..., ::-1]
    p_max = 10 ** rng.uniform(0, 3)
    return IpcInputs(
        lambda_cross_tail=rng.exponential(2.0, size=(count, 2)),
        epsilon=rng.uniform(0, 1, size=(count, 2)),
        lambda_direct=lam,
        m_streams=M,
        nu=float(rng.uniform(0.01, 1.0)),
        p_max=float(p_max),
    )


def pipeline_ipc_inputs(params, count, seed=0, point=VALIDATE_POINT):
    """IPC inputs produced by the full precoding pipeline."""
    real = sample_batch(params, seed, range(count), point=point)
    pset = assemble(real, make_codebooks(params, seed), params)
    return IpcInputs.from_precoders(pset, params)


def finite_difference_gradient(inputs, p, m, rel_step=1e-6):
    p = np.asarray(p, dtype=float)
    h = rel_step * p[..., m]
    up, dn = p.copy(), p.copy()
    up[..., m] += h
    dn[..., m] -= h
    return (throughput_lower_bound(inputs, up) - throughput_lower_bound(inputs, dn)) / (2 * h)


def check_gradient(points, seed=0):
    """Analytic slope terms against central differences of the bound."""
    rng = stream(seed, ORACLE_DOMAIN, 0)
    worst = 0.0
    done = 0
    while done < points:
        n = min(50, points - done)
        inputs = random_ipc_inputs(rng, n)
        p = rng.uniform(0.01, 1.0, size=(n, 2)) * inputs.p_max
        for m in (0, 1):
            mu, psi, rho = slope(inputs, p, m)
            analytic = mu + psi - rho
            fd = finite_difference_gradient(inputs, p, m)
            worst = max(worst, float(np.max(np.abs(fd - analytic) / np.abs(analytic))))
        done += n
    return CheckResult(
        "gradient", worst < 1e-5, worst, 1e-5,
        f"max relative error {worst:.3e} (< 1e-5) over {points} points",
    )


def feasible_alg2_instances(params, count, seed=0, grid_db=(10, 20, 30)):
    """Collect ``count`` trials on which the outage-oriented scheme is feasible."""
    found, start = [], 0
    while sum(len(f[0]) for f in found) < count:
        for db in grid_db:
            inputs = pipeline_ipc_inputs(replace(params, p_max=10 ** (db / 10)), 500, seed, VALIDATE_POINT + start)
            dec = algorithm2(inputs)
            keep = np.flatnonzero(dec.feasible)
            found.append((keep, inputs, dec))
        start += 1
    return found


def check_algorithm2(params, points, seed=0, grid=201):
    """Closed-form powers meet the SINR target with equality and are minimal."""
    worst_bind, grid_hits, checked = 0.0, 0, 0
    for keep, inputs, dec in feasible_alg2_instances(params, points, seed):
        keep = keep[: points - checked]
        if keep.size == 0:
            continue
        p = dec.p[keep]
        sub = _take(inputs, keep)
        weakest = sinr_tilde(sub, p)[..., -1]
        worst_bind = max(worst_bind, float(np.max(np.abs(weakest - sub.theta) / sub.theta)))
        grid_hits += count_dominating_grid_points(sub, p, grid)
        checked += keep.size
        if checked >= points:
            break
    ok = worst_bind < 1e-9 and grid_hits == 0
    return CheckResult(
        "algorithm2", ok, worst_bind, 1e-9,
        f"max |SINR_tilde - theta|/theta {worst_bind:.3e} (< 1e-9); {grid_hits} feasible grid pairs "
        f"below the returned pair over {checked} instances ({grid}x{grid} grid)",
    )


def count_dominating_grid_points(inputs, p, grid=201):
    """Feasible grid pairs with either coordinate strictly below ``p``."""
    c = inputs.interference_coeff
    lam = inputs.lambda_direct[..., -1]
    a = inputs.theta / lam
    b = c * inputs.theta / lam
    g = np.linspace(0.0, inputs.p_max, grid)
    hits = 0
    for k in range(p.shape[0]):
        p1, p2 = np.meshgrid(g, g, indexing="ij")
        feas = (p1 >= a[k, 0] + b[k, 0] * p2) & (p2 >= a[k, 1] + b[k, 1] * p1)
        below = (p1 < p[k, 0] * (1 - 1e-12)) | (p2 < p[k, 1] * (1 - 1e-12))
        hits += int(np.count_nonzero(feas & below))
    return hits


def grid_maximum(inputs, grid=201):
    """Exhaustive maximum of the throughput bound over a uniform power grid (one instance)."""
    g = np.linspace(0.0, inputs.p_max, grid)
    p = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    return np.max(throughput_lower_bound(inputs, p))


def _take(inputs, k):
    return replace(
        inputs,
        lambda_cross_tail=inputs.lambda_cross_tail[k],
        epsilon=inputs.epsilon[k],
        lambda_direct=inputs.lambda_direct[k],
    )


def algorithm1_instances(params, count, seed=0):
    """Single-stream pipeline instances, each with its own ``P_max`` in [0, 30] dB."""
    one = replace(params, m_streams=1)
    rng = stream(seed, ORACLE_DOMAIN, 1)
    inputs = pipeline_ipc_inputs(one, count, seed)
    p_max = 10 ** rng.uniform(0, 3, size=count)
    return [replace(_take(inputs, k), p_max=float(p_max[k])) for k in range(count)]


def check_algorithm1(params, points, seed=0, grid=201):
    """Single-stream instances: gradient ascent lands within 2% of the grid optimum."""
    shortfall = 0.0
    for inst in algorithm1_instances(params, points, seed):
        got = float(throughput_lower_bound(inst, algorithm1(inst).p))
        best = float(grid_maximum(inst, grid))
        shortfall = max(shortfall, (best - got) / best)
    return CheckResult(
        "algorithm1", shortfall < 0.02, shortfall, 0.02,
        f"max shortfall vs {grid}x{grid} grid maximum {100 * shortfall:.3f}% (< 2%) over {points} instances",
    )


CHECKS = ("decoupling", "lemma1", "gradient", "algorithm2", "algorithm1")


def run_checks(params, names, points, seed=0, fault=None):
    if "all" in names:
        names = CHECKS
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {CHECKS}")
    out = []
    for name in names:
        if name == "decoupling":
            out.append(check_decoupling(params, points, seed))
        elif name == "lemma1":
            out.append(check_lemma1(params, points, seed, fault))
        elif name == "gradient":
            out.append(check_gradient(points, seed))
        elif name == "algorithm2":
            out.append(check_algorithm2(params, points, seed))
        elif name == "algorithm1":
            out.append(check_algorithm1(params, min(points, 100), seed))
    return out

