"""Monte Carlo estimation for large rings.

Random numbers come from a Philox stream keyed by ``(seed, n, p)`` and are
fed to the compiled kernel in fixed-size chunks, so a run is a pure function
of its plan.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from .drift_analysis import solve_threshold, worst_drift
from .model_core import PotentialParams, make_rng

CHUNK = 1 << 18
DEFAULT_BATCHES = 30
CSV_COLUMNS = ("n", "p", "seed", "steps", "nu_hat", "stderr", "mean_potential", "flip_count")


def default_beta() -> float:
    return solve_threshold().beta_diamond


def p_key(p: float) -> int:
    """Integer stream key for ``p`` (resolution 1e-9)."""
    return int(round(p * 1e9))


def initial_config(n: int, init: str, rng: Optional[np.random.Generator] = None,
                   p: float = 0.5) -> np.ndarray:
    if init == "ones":
        return np.ones(n, dtype=np.uint8)
    if init == "zeros":
        return np.zeros(n, dtype=np.uint8)
    if init == "random":
        return (rng.random(n) < p).astype(np.uint8)
    raise ValueError(f"init must be 'ones', 'zeros' or 'random', got {init!r}")


@dataclass(frozen=True)
class SimulationPlan:
    n: int
    p: float
    total_steps: int
    seed: int = 0
    burn_in_steps: Optional[int] = None
    batch_count: int = DEFAULT_BATCHES
    beta: Optional[float] = None
    track_potential: bool = True
    series_stride: int = 0
    init: str = "ones"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.batch_count < 10:
            raise ValueError("batch_count must be at least 10")
        if self.burn < 0 or self.burn >= self.total_steps:
            raise ValueError("burn-in must be non-negative and below total_steps")
        if self.total_steps - self.burn < self.batch_count:
            raise ValueError("too few post burn-in steps for the batch count")

    @property
    def burn(self) -> int:
        if self.burn_in_steps is None:
            return self.total_steps // 10
        return self.burn_in_steps

    @property
    def potential_beta(self) -> float:
        return default_beta() if self.beta is None else self.beta


@dataclass
class TrajectoryStats:
    plan: SimulationPlan
    nu_hat: float
    nu_stderr: float
    mean_potential: float
    potential_stderr: float
    drift_mean: float
    drift_stderr: float
    drift_samples: int
    flip_count: int
    nu_first_half: float
    nu_second_half: float
    zero_fraction_series: Optional[np.ndarray] = None

    def row(self) -> dict:
        return {"n": self.plan.n, "p": self.plan.p, "seed": self.plan.seed,
                "steps": self.plan.total_steps, "nu_hat": self.nu_hat,
                "stderr": self.nu_stderr, "mean_potential": self.mean_potential,
                "flip_count": self.flip_count}


def _batch_stats(sums: np.ndarray, counts: np.ndarray):
    """Mean and batch-means standard error of a ratio estimator."""
    total = counts.sum()
    if total == 0:
        return float("nan"), float("nan")
    mean = sums.sum() / total
    ok = counts > 0
    b = int(ok.sum())
    if b < 2:
        return float(mean), float("nan")
    means = sums[ok] / counts[ok]
    return float(mean), float(means.std(ddof=1) / math.sqrt(b))


def simulate(plan: SimulationPlan, stream: Sequence[int] = ()) -> TrajectoryStats:
    """Run one trajectory and return time averages after burn-in.

    Batch means over ``plan.batch_count`` equal batches give the standard
    errors; ``stream`` extends the random stream key beyond ``(n, p)``.
    """
    n, p = plan.n, plan.p
    rng = make_rng(plan.seed, n, p_key(p), *stream)
    bits = initial_config(n, plan.init, rng, p)
    zlist, zpos, nz = K.zero_index(bits)
    state = np.zeros(K.STATE_LEN, np.int64)
    l, r, d, _ = K.span_of(bits, 0, 0, False)
    state[:] = (nz, l, r, d)
    beta = plan.potential_beta
    burn = plan.burn
    nb = plan.batch_count
    batch_len = (plan.total_steps - burn) // nb
    ones_acc = np.zeros(nb)
    pot_acc = np.zeros(nb)
    drift_sum = np.zeros(nb)
    drift_cnt = np.zeros(nb)
    counters = np.zeros(2, np.int64)
    stride = plan.series_stride
    series = np.full(plan.total_steps // stride if stride else 0, np.nan)
    t = 0
    while t < plan.total_steps:
        m = min(CHUNK, plan.total_steps - t)
        u = rng.random(m)
        eta = (rng.random((m, 3)) < p).astype(np.uint8)
        K.simulate_chunk(bits, zlist, zpos, state, u, eta, beta, t, burn, batch_len, nb,
                         plan.track_potential, ones_acc, pot_acc, drift_sum, drift_cnt,
                         counters, series, stride)
        t += m
    counts = np.full(nb, float(batch_len))
    nu, nu_se = _batch_stats(ones_acc / n, counts)
    pot, pot_se = _batch_stats(pot_acc, counts)
    drift, drift_se = _batch_stats(drift_sum, drift_cnt)
    half = nb // 2
    first = ones_acc[:half].sum() / (n * batch_len * half)
    second = ones_acc[half:].sum() / (n * batch_len * (nb - half))
    if not plan.track_potential:
        pot = pot_se = drift = drift_se = float("nan")
    return TrajectoryStats(plan, nu, nu_se, pot, pot_se, drift, drift_se,
                           int(drift_cnt.sum()), int(counters[0]), float(first), float(second),
                           series if stride else None)


@dataclass(frozen=True)
class NuEstimate:
    n: int
    p: float
    steps: int
    seed: int
    nu_hat: float
    stderr: float
    ci_low: float
    ci_high: float
    mean_potential: float
    flip_count: int

    @property
    def zero_mass(self) -> float:
        """``n (1 - nu_hat)``, the estimated mean number of zeros."""
        return self.n * (1.0 - self.nu_hat)


def _interval(mean: float, se: float, batches: int, level: float = 0.95):
    if not math.isfinite(se):
        return float("nan"), float("nan")
    half = stats.t.ppf(0.5 + level / 2, batches - 1) * se
    return max(0.0, mean - half), min(1.0, mean + half)


def estimate_nu(n: int, p: float, budget: int, seed: int = 0, batch_count: int = DEFAULT_BATCHES,
                beta: Optional[float] = None, track_potential: bool = True) -> NuEstimate:
    """Point estimate of ``nu`` with a 95% batch-means interval."""
    if budget < 100_000:
        raise ValueError("budget must be at least 1e5 steps")
    st = simulate(SimulationPlan(n, p, budget, seed, batch_count=batch_count, beta=beta,
                                 track_potential=track_potential))
    lo, hi = _interval(st.nu_hat, st.nu_stderr, batch_count)
    return NuEstimate(n, p, budget, seed, st.nu_hat, st.nu_stderr, lo, hi,
                      st.mean_potential, st.flip_count)


@dataclass(frozen=True)
class DriftProbe:
    n: int
    p: float
    beta: float
    mean: float
    stderr: float
    samples: int
    bound: float
    underpowered: bool

    @property
    def ci(self):
        return self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr


def conditional_drift_probe(n: int, p: float, params: PotentialParams, budget: int,
                            seed: int = 0, min_samples: int = 1000,
                            init: str = "zeros") -> DriftProbe:
    """Average change of the potential over steps with ``M >= 8`` and an end site chosen.

    Starts from all zeros by default so that large spans are visited even
    in the supercritical regime.  ``bound`` is the closed-form worst case
    drift for comparison.
    """
    burn = 0 if init == "zeros" else None
    st = simulate(SimulationPlan(n, p, budget, seed, burn_in_steps=burn, beta=params.beta,
                                 init=init))
    bound = worst_drift(p, params.beta).worst
    under = st.drift_samples < min_samples or not math.isfinite(st.drift_stderr)
    return DriftProbe(n, p, params.beta, st.drift_mean, st.drift_stderr, st.drift_samples,
                      bound, under)


@dataclass
class ScanResult:
    rows: list
    crossing: float
    slopes: dict = field(default_factory=dict)
    monotonicity_warnings: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: row[k] for k in CSV_COLUMNS})
        return buf.getvalue()


def _run_grid(tasks, threads: Optional[int]):
    if threads is None or threads <= 1:
        return [estimate_nu(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda t: estimate_nu(*t), tasks))


def scan_critical(n_list: Sequence[int], p_grid: Sequence[float], budget: int, seed: int = 0,
                  threads: Optional[int] = None) -> ScanResult:
    """Estimate ``nu`` on an ``(n, p)`` grid and locate the growth transition.

    For each ``p`` the slope of ``log(n (1 - nu_hat))`` against ``log n`` is
    fitted; it is near 1 when a positive fraction of sites stays unfit and
    near 0 when the number of zeros stays bounded.  The crossing is where the
    slope falls through 1/2, by linear interpolation in ``p``.
    """
    n_list = sorted(int(n) for n in n_list)
    p_grid = sorted(float(p) for p in p_grid)
    tasks = [(n, p, budget, seed) for n in n_list for p in p_grid]
    results = _run_grid(tasks, threads)
    rows = []
    for est in results:
        rows.append({"n": est.n, "p": est.p, "seed": est.seed, "steps": est.steps,
                     "nu_hat": est.nu_hat, "stderr": est.stderr,
                     "mean_potential": est.mean_potential, "flip_count": est.flip_count,
                     "zero_mass": est.zero_mass})
    by = {(r["n"], r["p"]): r for r in rows}
    slopes = {}
    if len(n_list) >= 2:
        logn = np.log(n_list)
        for p in p_grid:
            z = np.array([max(by[(n, p)]["zero_mass"], 1e-12) for n in n_list])
            slopes[p] = float(np.polyfit(logn, np.log(z), 1)[0])
    crossing = float("nan")
    ps = [p for p in p_grid if p in slopes]
    for a, b in zip(ps, ps[1:]):
        sa, sb = slopes[a], slopes[b]
        if sa >= 0.5 > sb:
            crossing = a + (sa - 0.5) * (b - a) / (sa - sb)
            break
    warnings = []
    for n in n_list:
        for a, b in zip(p_grid, p_grid[1:]):
            ra, rb = by[(n, a)], by[(n, b)]
            noise = 3 * math.hypot(ra["stderr"], rb["stderr"])
            if rb["nu_hat"] < ra["nu_hat"] - noise:
                warnings.append((n, a, b))
    return ScanResult(rows, crossing, slopes, warnings)


def write_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in CSV_COLUMNS})


def summary_json(rows: Sequence[dict], **extra) -> str:
    return json.dumps({"rows": [{k: row[k] for k in CSV_COLUMNS} for row in rows], **extra},
                      indent=2, sort_keys=True)
