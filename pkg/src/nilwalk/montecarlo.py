"""Streaming Monte Carlo experiments on graded group walks.

Every estimator here draws increments in fixed-size chunks whose generator
seeds depend only on (seed, tag, chunk index).  Chunks are folded through the
group law independently and their summaries are merged in chunk order, so the
reported numbers never depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
from scipy.stats import qmc

from .algebra import GradedBasisSpec, LieVector
from .catalog import CatalogEntry
from .errors import ConfigError, MeasureError, ResourceError
from .grouplaw import compiled_law, group_law, multiply
from .measures import Discrete, is_symmetric, moment, sample_coords
from .rng import CHUNK_SIZE, chunk_seeds, make_generator, tag_key
from .stats import ChunkAccumulator, EstimateWithError, SlopeFit, loglog_fit
from .sympoly import SparsePolynomial, UStatisticSpec
from .walkpoly import u_evaluate_batch

MIN_SAMPLES = 1000

EXPERIMENT_KINDS = (
    "walk-functional",
    "char-fn",
    "lindeberg",
    "moment-growth",
    "truncation-tail",
    "llt",
    "sublevel",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One named experiment: group, sample schedule, and kind-specific params."""

    experiment_id: str
    group: str
    kind: str
    schedule: tuple[int, ...]
    samples: int
    seed: int
    threads: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.experiment_id:
            raise ConfigError("experiment_id must be non-empty")
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        sched = tuple(int(n) for n in self.schedule)
        if not sched or any(n <= 0 for n in sched):
            raise ConfigError("schedule must be non-empty positive integers")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("schedule must be strictly increasing")
        object.__setattr__(self, "schedule", sched)
        if self.samples < MIN_SAMPLES:
            raise ConfigError(
                f"samples per point must be at least {MIN_SAMPLES}, got {self.samples}"
            )
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")


@dataclass(frozen=True)
class FrequencyWindow:
    """Decaying shells |xi^(n)| <= N^(eps_n - n/2) around the origin.

    The exponent chain must be positive and satisfy eps_n > n * eps_{n+1},
    which makes the level-n shell the binding one as N grows.
    """

    spec: GradedBasisSpec
    epsilons: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) != self.spec.step:
            raise ConfigError(
                f"need one exponent per level, got {len(eps)} for step {self.spec.step}"
            )
        if any(e <= 0 for e in eps):
            raise ConfigError("window exponents must be positive")
        for n in range(1, len(eps)):
            if not eps[n - 1] > n * eps[n]:
                raise ConfigError(
                    f"window exponents must satisfy eps_{n} > {n} * eps_{n + 1}"
                )
        object.__setattr__(self, "epsilons", eps)

    @classmethod
    def default(cls, spec: GradedBasisSpec) -> "FrequencyWindow":
        s = spec.step
        return cls(spec, tuple(4 ** (s - n) * 1e-2 for n in range(1, s + 1)))

    def contains(self, xi, N: int) -> bool:
        row = _float_row(self.spec, xi)
        for n in range(1, self.spec.step + 1):
            part = row[self.spec.level_slice(n)]
            scale = float(N) ** (n / 2 - self.epsilons[n - 1])
            if float(np.linalg.norm(part)) * scale > 1.0:
                return False
        return True


def scaled_frequency(spec: GradedBasisSpec, eta, N: int) -> np.ndarray:
    """eta with its level-n part multiplied by N^(-n/2)."""
    row = _float_row(spec, eta).copy()
    for n in range(1, spec.step + 1):
        row[spec.level_slice(n)] *= float(N) ** (-n / 2)
    return row


# ---------------------------------------------------------------------------
# chunked walk streaming


def _float_row(spec: GradedBasisSpec, vec) -> np.ndarray:
    if isinstance(vec, LieVector):
        return np.array([float(c) for c in vec.coords])
    row = np.asarray(vec, dtype=float).reshape(-1)
    if row.shape[0] != spec.total_dim:
        raise ConfigError(
            f"{row.shape[0]} coordinates for a {spec.total_dim}-dimensional group"
        )
    return row


def _dilation_row(spec: GradedBasisSpec, factor: float) -> np.ndarray:
    return np.array([factor ** lvl for lvl, _ in spec.labels])


def _ordered_map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stream_summaries(worker, seed: int, tag: str, total: int, threads: int,
                      chunk_size: int = CHUNK_SIZE) -> list:
    """Run worker(rng, n) over the chunk plan; results stay in chunk order."""
    seeds = chunk_seeds(seed, tag, total, chunk_size)

    def run(item):
        seq, n = item
        return worker(make_generator(seq), n)

    return _ordered_map(run, seeds, threads)


def _column_summary(values: np.ndarray) -> tuple[int, tuple, tuple]:
    """Exactly rounded per-column (count, sums, sums of squares).

    A 1-D input is a single column of samples, not a row of columns.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    totals = tuple(math.fsum(col) for col in vals.T)
    sq = tuple(math.fsum(col * col) for col in vals.T)
    return vals.shape[0], totals, sq


class _VectorAccumulator:
    """Componentwise chunk accumulators merged in stream order."""

    def __init__(self, dim: int):
        self.accs = tuple(ChunkAccumulator() for _ in range(dim))
        self.samples = 0

    def add_wave(self, summaries) -> None:
        for n, totals, sq in summaries:
            for acc, t, s in zip(self.accs, totals, sq):
                acc.add_summary(n, t, s)
            self.samples += n

    def estimates(self) -> list[EstimateWithError]:
        return [acc.estimate() for acc in self.accs]


def _walk_worker(entry: CatalogEntry, measure, N: int, value_fn, *,
                 scaled: bool, g=None, h=None, antithetic: bool = False):
    """Chunk worker computing value_fn on (translated, dilated) walk endpoints.

    value_fn maps an (n, q) coordinate block to an (n, d) value block.  The
    dilation is applied before the g/h translations, so the translation pair
    acts at the scaled walk's own scale.
    """
    law_np = compiled_law(entry)
    spec = entry.spec
    dil = _dilation_row(spec, N ** -0.5) if scaled else None
    g_row = _float_row(spec, g)[None, :] if g is not None else None
    h_row = _float_row(spec, h)[None, :] if h is not None else None
    if antithetic and not is_symmetric(measure):
        raise MeasureError("antithetic sampling needs a symmetric measure")

    def finish(prod):
        if dil is not None:
            prod = prod * dil
        if g_row is not None:
            prod = law_np(g_row, prod)
        if h_row is not None:
            prod = law_np(prod, h_row)
        vals = np.asarray(value_fn(prod), dtype=float)
        return vals[:, None] if vals.ndim == 1 else vals

    def worker(rng, n):
        prod = prod_neg = None
        for _ in range(N):
            x = sample_coords(measure, rng, n)
            prod = x if prod is None else law_np(prod, x)
            if antithetic:
                prod_neg = -x if prod_neg is None else law_np(prod_neg, -x)
        vals = finish(prod)
        if antithetic:
            vals = 0.5 * (vals + finish(prod_neg))
        return _column_summary(vals)

    return worker


def walk_functional(entry: CatalogEntry, measure, N: int, f, *,
                    g=None, h=None, scaled: bool = True,
                    samples: int = 1 << 16, seed: int = 0, threads: int = 1,
                    tag: str | None = None,
                    antithetic: bool = False) -> EstimateWithError:
    """Monte Carlo estimate of E[f(g . dilated walk endpoint . h)].

    With scaled=True the N-step product is dilated by N^(-1/2) before the
    translations are applied.  f must accept an (n, q) coordinate array.
    """
    if tag is None:
        tag = f"walk:{entry.spec.name}:{N}:{int(scaled)}"
    worker = _walk_worker(entry, measure, N, f, scaled=scaled, g=g, h=h,
                          antithetic=antithetic)
    acc = _VectorAccumulator(1)
    acc.add_wave(_stream_summaries(worker, seed, tag, samples, threads))
    return acc.estimates()[0]


# ---------------------------------------------------------------------------
# characteristic function of the walk


@dataclass(frozen=True)
class CharFnEstimate:
    """Monte Carlo value of E[e(-xi . walk)] with an optional exact check."""

    value: complex
    std_error: float
    samples: int
    exact: complex | None = None

    def consistent(self, sigmas: float = 4.0) -> bool:
        if self.exact is None:
            return True
        return abs(self.value - self.exact) <= sigmas * max(self.std_error, 1e-300)


def _char_value_fn(xi_row: np.ndarray):
    def value_fn(prod):
        t = 2.0 * math.pi * (prod @ xi_row)
        return np.column_stack([np.cos(t), -np.sin(t)])
    return value_fn


def exact_walk_distribution(entry: CatalogEntry, measure: Discrete, N: int, *,
                            budget: int = 10 ** 6) -> dict[tuple, Fraction]:
    """Exact N-step product distribution of a finitely supported measure."""
    if not isinstance(measure, Discrete):
        raise MeasureError("exact walk enumeration needs a discrete measure")
    if len(measure.atoms) ** N > budget:
        raise ResourceError(
            f"{len(measure.atoms)}^{N} product strings exceed budget {budget}"
        )
    law = group_law(entry)
    atoms = [LieVector(entry.spec, a) for a in measure.atoms]
    states: dict[tuple, Fraction] = {
        a.coords: w for a, w in zip(atoms, measure.weights)
    }
    for _ in range(N - 1):
        nxt: dict[tuple, Fraction] = {}
        for coords, p in states.items():
            left = LieVector(entry.spec, coords)
            for a, w in zip(atoms, measure.weights):
                key = multiply(law, left, a).coords
                nxt[key] = nxt.get(key, Fraction(0)) + p * w
        states = nxt
    return states


def exact_walk_char(entry: CatalogEntry, measure: Discrete, N: int, xi, *,
                    budget: int = 10 ** 6) -> complex:
    xi_row = _float_row(entry.spec, xi)
    total = 0j
    for coords, p in exact_walk_distribution(entry, measure, N, budget=budget).items():
        t = 2.0 * math.pi * sum(float(c) * x for c, x in zip(coords, xi_row))
        total += float(p) * complex(math.cos(t), -math.sin(t))
    return total


def enumeration_affordable(measure, N: int, budget: int = 10 ** 6) -> bool:
    """Whether the N-step product distribution can be enumerated exactly."""
    return isinstance(measure, Discrete) and len(measure.atoms) ** N <= budget


def char_fn_estimate(entry: CatalogEntry, measure, N: int, xi, *,
                     samples: int = 1 << 16, seed: int = 0, threads: int = 1,
                     tag: str | None = None,
                     enumeration_budget: int = 10 ** 6) -> CharFnEstimate:
    """E[e(-xi . N-step product)], with exact enumeration when affordable."""
    spec = entry.spec
    xi_row = _float_row(spec, xi)
    if tag is None:
        tag = f"char:{entry.spec.name}:{N}"
    worker = _walk_worker(entry, measure, N, _char_value_fn(xi_row), scaled=False)
    acc = _VectorAccumulator(2)
    acc.add_wave(_stream_summaries(worker, seed, tag, samples, threads))
    re, im = acc.estimates()
    exact = None
    if enumeration_affordable(measure, N, enumeration_budget):
        exact = exact_walk_char(entry, measure, N, xi_row, budget=enumeration_budget)
    return CharFnEstimate(
        value=complex(re.mean, im.mean),
        std_error=math.hypot(re.std_error, im.std_error),
        samples=re.samples,
        exact=exact,
    )


# ---------------------------------------------------------------------------
# two-measure gap experiments with noise-driven sample growth


@dataclass(frozen=True)
class GapPoint:
    N: int
    gap: float
    std_error: float
    samples_a: int
    samples_b: int
    converged: bool
    in_window: bool | None = None


@dataclass(frozen=True)
class GapReport:
    quantity: str
    target_slope: float | None
    points: tuple[GapPoint, ...]
    fit: SlopeFit | None
    inconclusive: bool
    total_samples: int

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "target_slope": self.target_slope,
            "points": [
                {
                    "N": p.N,
                    "gap": p.gap,
                    "std_error": p.std_error,
                    "samples_a": p.samples_a,
                    "samples_b": p.samples_b,
                    "converged": p.converged,
                    "in_window": p.in_window,
                }
                for p in self.points
            ],
            "fit": None if self.fit is None else {
                "slope": self.fit.slope,
                "intercept": self.fit.intercept,
                "slope_se": self.fit.slope_se,
                "ci_low": self.fit.ci_low,
                "ci_high": self.fit.ci_high,
            },
            "inconclusive": self.inconclusive,
            "total_samples": self.total_samples,
        }

    def csv_rows(self) -> list[dict]:
        rows = [
            {
                "N": p.N,
                "quantity": self.quantity,
                "mean": p.gap,
                "std_error": p.std_error,
                "samples": p.samples_a + p.samples_b,
            }
            for p in self.points
        ]
        if self.fit is not None:
            rows.append({
                "N": 0,
                "quantity": f"{self.quantity}_slope",
                "mean": self.fit.slope,
                "std_error": self.fit.slope_se,
                "samples": self.total_samples,
            })
        return rows


def _gap_from_estimates(ests_a, ests_b) -> tuple[float, float]:
    diff = [a.mean - b.mean for a, b in zip(ests_a, ests_b)]
    gap = math.hypot(*diff)
    se = math.sqrt(sum(e.std_error ** 2 for e in (*ests_a, *ests_b)))
    return gap, se


def _run_gap_schedule(quantity: str, schedule, run_wave, dim: int, *,
                      target_slope: float | None, noise_factor: float,
                      initial_samples: int, total_cap: int, max_waves: int,
                      membership=None) -> GapReport:
    """Grow per-N samples until the gap noise is below gap/noise_factor.

    run_wave(N, side, wave, samples) returns chunk summaries for one measure.
    The shared sample budget is spent on the schedule in order, so every run
    with the same seed makes identical draws regardless of threading.
    """
    points = []
    used_total = 0
    for N in schedule:
        accs = (_VectorAccumulator(dim), _VectorAccumulator(dim))
        wave_samples = initial_samples
        gap = se = float("nan")
        converged = False
        for wave in range(max_waves):
            remaining = (total_cap - used_total) // 2
            wave_samples = min(wave_samples, remaining)
            if wave_samples <= 0:
                break
            for side in (0, 1):
                accs[side].add_wave(run_wave(N, side, wave, wave_samples))
            used_total += 2 * wave_samples
            gap, se = _gap_from_estimates(accs[0].estimates(), accs[1].estimates())
            if gap > 0 and se <= gap / noise_factor:
                converged = True
                break
            current = accs[0].samples
            if gap <= 0:
                wave_samples = current * 4
            else:
                needed = current * (se * noise_factor / gap) ** 2
                wave_samples = max(int(needed) - current + 1, current)
        points.append(GapPoint(
            N=N, gap=gap, std_error=se,
            samples_a=accs[0].samples, samples_b=accs[1].samples,
            converged=converged,
            in_window=None if membership is None else membership(N),
        ))
    usable = [p for p in points if p.gap > 0 and math.isfinite(p.gap)]
    fit = None
    if len(usable) >= 3:
        fit = loglog_fit(
            [p.N for p in usable],
            [p.gap for p in usable],
            weights=[(p.gap / p.std_error) ** 2 if p.std_error > 0 else 1.0
                     for p in usable],
        )
    inconclusive = fit is None or any(not p.converged for p in points)
    return GapReport(
        quantity=quantity,
        target_slope=target_slope,
        points=tuple(points),
        fit=fit,
        inconclusive=inconclusive,
        total_samples=used_total,
    )


def lindeberg_gap(entry: CatalogEntry, mu, phi, schedule, eta, *,
                  window: FrequencyWindow | None = None,
                  seed: int = 0, threads: int = 1,
                  noise_factor: float = 5.0,
                  initial_samples: int = 1 << 16,
                  total_cap: int = 10 ** 8,
                  max_waves: int = 12,
                  tag: str = "lindeberg") -> GapReport:
    """|char_mu - char_phi| at the frequency eta dilated into the window.

    The probe frequency at schedule point N scales eta's level-n part by
    N^(-n/2); the report records whether it sits inside the window and fits
    the per-N gap against the reference slope -1.
    """
    spec = entry.spec
    win = window if window is not None else FrequencyWindow.default(spec)
    eta_row = _float_row(spec, eta)
    measures = (mu, phi)
    compiled_law(entry)

    def run_wave(N, side, wave, samples):
        xi_row = scaled_frequency(spec, eta_row, N)
        worker = _walk_worker(entry, measures[side], N,
                              _char_value_fn(xi_row), scaled=False)
        wave_tag = f"{tag}:{N}:{side}:{wave}"
        return _stream_summaries(worker, seed, wave_tag, samples, threads)

    return _run_gap_schedule(
        "lindeberg_gap", schedule, run_wave, 2,
        target_slope=-1.0, noise_factor=noise_factor,
        initial_samples=initial_samples, total_cap=total_cap,
        max_waves=max_waves,
        membership=lambda N: win.contains(scaled_frequency(spec, eta_row, N), N),
    )


def llt_gap(entry: CatalogEntry, mu, phi, f, schedule, *,
            g=None, h=None, seed: int = 0, threads: int = 1,
            noise_factor: float = 5.0,
            initial_samples: int = 1 << 16,
            total_cap: int = 10 ** 8,
            max_waves: int = 12,
            tag: str = "llt") -> GapReport:
    """|E f(scaled mu-walk) - E f(scaled phi-walk)| against slope -1/2."""
    measures = (mu, phi)
    compiled_law(entry)

    def run_wave(N, side, wave, samples):
        worker = _walk_worker(entry, measures[side], N, f,
                              scaled=True, g=g, h=h)
        wave_tag = f"{tag}:{N}:{side}:{wave}"
        return _stream_summaries(worker, seed, wave_tag, samples, threads)

    return _run_gap_schedule(
        "llt_gap", schedule, run_wave, 1,
        target_slope=-0.5, noise_factor=noise_factor,
        initial_samples=initial_samples, total_cap=total_cap,
        max_waves=max_waves,
    )


# ---------------------------------------------------------------------------
# exact moments of index statistics


def _merged_slot_moments(slots_blocks, measure):
    prod = Fraction(1)
    for blocks in slots_blocks:
        merged: dict[tuple, int] = {}
        for lbl, e in blocks:
            merged[lbl] = merged.get(lbl, 0) + e
        prod *= moment(measure, tuple(sorted(merged.items())))
        if prod == 0:
            return Fraction(0)
    return prod


def _normalize_terms(u_terms):
    if isinstance(u_terms, UStatisticSpec):
        return [(u_terms, Fraction(1))]
    return [(spec_u, Fraction(c)) for spec_u, c in u_terms]


def _pattern_sums(terms, measure, power: int,
                  work_budget: int) -> dict[int, Fraction]:
    """Slot-pattern moment sums keyed by support size, independent of N."""
    by_t: dict[int, Fraction] = {}
    for combo_idx in np.ndindex(*(len(terms),) * power):
        specs = [terms[i][0] for i in combo_idx]
        coeff = Fraction(1)
        for i in combo_idx:
            coeff *= terms[i][1]
        orders = [s.order for s in specs]
        t_max = sum(orders)
        work = sum(
            math.prod(comb(t, r) for r in orders)
            for t in range(max(orders), t_max + 1)
        )
        if work > work_budget:
            raise ResourceError(
                f"pattern enumeration needs {work} cases, budget {work_budget}"
            )
        for t in range(max(orders), t_max + 1):
            pattern_sum = Fraction(0)
            choice_lists = [list(combinations(range(t), r)) for r in orders]
            for assignment in np.ndindex(*(len(cl) for cl in choice_lists)):
                chosen = [choice_lists[i][a] for i, a in enumerate(assignment)]
                covered = set()
                for c in chosen:
                    covered.update(c)
                if len(covered) != t:
                    continue
                slots_blocks = [[] for _ in range(t)]
                for spec_u, positions in zip(specs, chosen):
                    for block, slot in zip(spec_u.blocks, positions):
                        slots_blocks[slot].extend(block)
                pattern_sum += _merged_slot_moments(slots_blocks, measure)
            if pattern_sum:
                by_t[t] = by_t.get(t, Fraction(0)) + coeff * pattern_sum
    return by_t


def exact_power_moment(u_terms, measure, N: int, power: int, *,
                       work_budget: int = 2 * 10 ** 6) -> Fraction:
    """Exact E[(sum_i c_i U_i)^power] for i.i.d. increments.

    Expands the power into index-tuple products, groups tuples by the ordered
    pattern of shared indices, and charges each pattern C(N, t) times its slot
    moment product.  Work grows fast with power and order, hence the budget.
    """
    terms = _normalize_terms(u_terms)
    by_t = _pattern_sums(terms, measure, power, work_budget)
    return sum(
        (comb(N, t) * v for t, v in by_t.items() if t <= N), Fraction(0)
    )


# ---------------------------------------------------------------------------
# moment growth along the schedule


@dataclass(frozen=True)
class MomentPoint:
    N: int
    estimate: EstimateWithError
    normalized_mean: float
    exact: Fraction | None
    tail_ratio: EstimateWithError | None


@dataclass(frozen=True)
class MomentGrowthReport:
    quantity: str
    m: int
    weight: int
    target_slope: float
    points: tuple[MomentPoint, ...]
    fit: SlopeFit | None

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "m": self.m,
            "weight": self.weight,
            "target_slope": self.target_slope,
            "points": [
                {
                    "N": p.N,
                    "mean": p.estimate.mean,
                    "std_error": p.estimate.std_error,
                    "samples": p.estimate.samples,
                    "normalized_mean": p.normalized_mean,
                    "exact": None if p.exact is None else str(p.exact),
                    "tail_ratio": None if p.tail_ratio is None else {
                        "mean": p.tail_ratio.mean,
                        "std_error": p.tail_ratio.std_error,
                    },
                }
                for p in self.points
            ],
            "fit": None if self.fit is None else {
                "slope": self.fit.slope,
                "slope_se": self.fit.slope_se,
                "ci_low": self.fit.ci_low,
                "ci_high": self.fit.ci_high,
            },
        }

    def csv_rows(self) -> list[dict]:
        rows = [
            {
                "N": p.N,
                "quantity": self.quantity,
                "mean": p.estimate.mean,
                "std_error": p.estimate.std_error,
                "samples": p.estimate.samples,
            }
            for p in self.points
        ]
        if self.fit is not None:
            rows.append({
                "N": 0,
                "quantity": f"{self.quantity}_slope",
                "mean": self.fit.slope,
                "std_error": self.fit.slope_se,
                "samples": sum(p.estimate.samples for p in self.points),
            })
        return rows


def _statistic_weight(terms) -> int:
    weights = {spec_u.hom_degree for spec_u, _ in terms}
    if len(weights) != 1:
        raise ConfigError(f"mixed homogeneous weights in statistic: {sorted(weights)}")
    return weights.pop()


def _increment_chunk_size(N: int, q: int, budget_floats: int = 1 << 22) -> int:
    return max(256, budget_floats // max(N * q, 1))


def moment_growth(entry: CatalogEntry, u_terms, measure, m: int, schedule, *,
                  samples: int = 10 ** 5, seed: int = 0, threads: int = 1,
                  tail: bool = True, exact_work_budget: int = 2 * 10 ** 6,
                  tag: str = "moment") -> MomentGrowthReport:
    """E|U|^(2m) along the schedule, fitted against the slope m * weight.

    Each point also carries the exact value when the pattern enumeration is
    affordable, and the truncation tail ratio
    E||P^(n)(full) - P^(n)(prefix)||^(2m) / (N^(mn) (N'/N)^m) with N' = N//4.
    """
    terms = _normalize_terms(u_terms)
    weight = _statistic_weight(terms)
    spec = entry.spec
    q = spec.total_dim
    level = min(weight, spec.step)
    lvl_slice = spec.level_slice(level)
    law_np = compiled_law(entry)
    try:
        by_t = _pattern_sums(terms, measure, 2 * m, exact_work_budget)
    except ResourceError:
        by_t = None

    points = []
    for N in schedule:
        chunk = _increment_chunk_size(N, q)

        def power_worker(rng, n, N=N):
            draws = sample_coords(measure, rng, n * N).reshape(n, N, q)
            vals = np.zeros(n)
            for spec_u, c in terms:
                vals += float(c) * u_evaluate_batch(spec_u, draws, spec)
            return _column_summary((vals ** 2) ** m)

        acc = _VectorAccumulator(1)
        acc.add_wave(_stream_summaries(
            power_worker, seed, f"{tag}:{N}", samples, threads, chunk_size=chunk))
        est = acc.estimates()[0]

        exact = None
        if by_t is not None:
            exact = sum(
                (comb(N, t) * v for t, v in by_t.items() if t <= N), Fraction(0)
            )

        tail_est = None
        if tail and N >= 4:
            n_tail = N // 4
            prefix = N - n_tail
            denom = float(N) ** (m * level) * (n_tail / N) ** m

            def tail_worker(rng, n, N=N, prefix=prefix):
                left = None
                for _ in range(prefix):
                    x = sample_coords(measure, rng, n)
                    left = x if left is None else law_np(left, x)
                full = left
                for _ in range(N - prefix):
                    full = law_np(full, sample_coords(measure, rng, n))
                diff = full[:, lvl_slice] - left[:, lvl_slice]
                norms = np.linalg.norm(diff, axis=1)
                return _column_summary((norms ** 2) ** m)

            tacc = _VectorAccumulator(1)
            tacc.add_wave(_stream_summaries(
                tail_worker, seed, f"{tag}:{N}:tail", samples, threads,
                chunk_size=chunk))
            raw = tacc.estimates()[0]
            tail_est = EstimateWithError(
                raw.mean / denom, raw.std_error / denom, raw.samples)

        points.append(MomentPoint(
            N=N, estimate=est,
            normalized_mean=est.mean / float(N) ** (m * weight),
            exact=exact, tail_ratio=tail_est,
        ))

    usable = [p for p in points if p.estimate.mean > 0]
    fit = None
    if len(usable) >= 3:
        fit = loglog_fit(
            [p.N for p in usable],
            [p.estimate.mean for p in usable],
            weights=[(p.estimate.mean / p.estimate.std_error) ** 2
                     if p.estimate.std_error > 0 else 1.0 for p in usable],
        )
    return MomentGrowthReport(
        quantity=f"moment_growth_m{m}_w{weight}",
        m=m, weight=weight, target_slope=float(m * weight),
        points=tuple(points), fit=fit,
    )


# ---------------------------------------------------------------------------
# truncation tail frequencies


@dataclass(frozen=True)
class TailPoint:
    N: int
    threshold: float
    exceed_count: int
    samples: int

    @property
    def frequency(self) -> float:
        return self.exceed_count / self.samples if self.samples else float("nan")


def truncation_tail_check(entry: CatalogEntry, measure, schedule, delta: float, *,
                          samples: int = 10 ** 4, seed: int = 0, threads: int = 1,
                          tag: str = "trunc") -> tuple[TailPoint, ...]:
    """Frequency of max_n N^(-n/2) ||walk level n|| exceeding N^delta."""
    spec = entry.spec
    compiled_law(entry)
    points = []
    for N in schedule:
        threshold = float(N) ** delta
        dil = _dilation_row(spec, N ** -0.5)

        def value_fn(prod, dil=dil, threshold=threshold):
            scaled = prod * dil
            worst = np.zeros(scaled.shape[0])
            for n in range(1, spec.step + 1):
                part = scaled[:, spec.level_slice(n)]
                worst = np.maximum(worst, np.linalg.norm(part, axis=1))
            return (worst > threshold).astype(float)[:, None]

        worker = _walk_worker(entry, measure, N, value_fn, scaled=False)
        acc = _VectorAccumulator(1)
        acc.add_wave(_stream_summaries(worker, seed, f"{tag}:{N}", samples, threads))
        est = acc.estimates()[0]
        points.append(TailPoint(
            N=N, threshold=threshold,
            exceed_count=round(est.mean * est.samples), samples=est.samples,
        ))
    return tuple(points)


# ---------------------------------------------------------------------------
# sublevel measure of polynomial maps on the unit box


@dataclass(frozen=True)
class PolynomialMap:
    """Vector of polynomials on the centered unit box in R^dim."""

    dim: int
    polys: tuple[SparsePolynomial, ...]

    def __post_init__(self):
        for p in self.polys:
            for mono_key, _ in p.terms.items():
                for (k, n, j), _e in mono_key:
                    if (k, n) != (1, 1) or not 1 <= j <= self.dim:
                        raise ConfigError(
                            f"map variable {(k, n, j)} outside dimension {self.dim}"
                        )

    @property
    def degree(self) -> int:
        degs = [
            sum(e for _v, e in mono_key)
            for p in self.polys for mono_key in p.terms
        ]
        return max(degs, default=0)

    @property
    def height(self) -> float:
        coefs = [abs(float(c)) for p in self.polys for c in p.terms.values()]
        return max(coefs, default=0.0)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean norm of the map at each row of an (n, dim) array."""
        sq = np.zeros(pts.shape[0])
        for p in self.polys:
            col = np.zeros(pts.shape[0])
            for mono_key, c in p.terms.items():
                term = np.full(pts.shape[0], float(c))
                for (_k, _n, j), e in mono_key:
                    term *= pts[:, j - 1] ** e
                col += term
            sq += col * col
        return np.sqrt(sq)


def random_polynomial_map(dim: int, degree: int, rng: np.random.Generator, *,
                          components: int = 1) -> PolynomialMap:
    """Random integer-coefficient map, recentered and height-normalized.

    The constant terms are dropped so the zero set is never empty, and all
    coefficients are divided by the largest magnitude so the height is 1.
    """
    monos = []

    def rec(j, left, acc):
        if j > dim:
            if acc:
                monos.append(tuple(acc))
            return
        for e in range(left + 1):
            rec(j + 1, left - e, acc + ([((1, 1, j), e)] if e else []))

    rec(1, degree, [])
    polys = []
    for _ in range(components):
        coeffs = {}
        while not coeffs:
            for mono_key in monos:
                c = int(rng.integers(-9, 10))
                if c:
                    coeffs[mono_key] = Fraction(c)
        ht = max(abs(c) for c in coeffs.values())
        poly = SparsePolynomial({mk: c / ht for mk, c in coeffs.items()})
        polys.append(poly)
    return PolynomialMap(dim, tuple(polys))


def random_power_map(dim: int, s: int, rng: np.random.Generator) -> PolynomialMap:
    """Random s-th power of a linear form through the box center, height 1.

    On this family the sublevel measure scales exactly like alpha^(1/s), so
    the anti-concentration ratio is flat; generic polynomials vanish to first
    order and beat the bound, which makes their ratio decay instead.
    """
    coeffs = np.zeros(dim, dtype=int)
    while not coeffs.any():
        coeffs = rng.integers(-9, 10, size=dim)
    linear = SparsePolynomial({
        (((1, 1, j), 1),): Fraction(int(c))
        for j, c in enumerate(coeffs, start=1) if c
    })
    poly = linear.power(s)
    ht = max(abs(c) for c in poly.terms.values())
    poly = SparsePolynomial({mk: c / ht for mk, c in poly.terms.items()})
    return PolynomialMap(dim, (poly,))


@dataclass(frozen=True)
class SublevelCell:
    alpha: float
    height: float
    measure: float
    ratio: float


@dataclass(frozen=True)
class SublevelReport:
    degree: int
    points: int
    cells: tuple[SublevelCell, ...]

    def ratios(self) -> list[float]:
        return [c.ratio for c in self.cells]

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "points": self.points,
            "cells": [
                {
                    "alpha": c.alpha,
                    "height": c.height,
                    "measure": c.measure,
                    "ratio": c.ratio,
                }
                for c in self.cells
            ],
        }


def sublevel_measure(pmap: PolynomialMap, alphas, heights=(1.0,), *,
                     points: int = 1 << 20, seed: int = 0,
                     tag: str = "sublevel") -> SublevelReport:
    """Quasi-random estimate of |{x in box : height * ||p(x)|| <= alpha}|.

    Each cell reports measure * (height * ht(p))^(1/s) / alpha^(1/s) with
    s the map degree; the anti-concentration bound makes this ratio O(1)
    uniformly over alpha and height.
    """
    if points < 2:
        raise ConfigError("need at least 2 quasi-random points")
    s = max(pmap.degree, 1)
    base_height = pmap.height
    m = max(1, math.ceil(math.log2(points)))
    sob = qmc.Sobol(pmap.dim, scramble=True, seed=make_generator(
        np.random.SeedSequence(seed, spawn_key=(tag_key(tag), 0))))
    pts = sob.random_base2(m) - 0.5
    norms = pmap.evaluate(pts)
    cells = []
    for height in heights:
        for alpha in alphas:
            est = float(np.mean(height * norms <= alpha))
            ratio = est * (height * base_height) ** (1 / s) / alpha ** (1 / s)
            cells.append(SublevelCell(
                alpha=float(alpha), height=float(height),
                measure=est, ratio=ratio,
            ))
    return SublevelReport(degree=s, points=2 ** m, cells=tuple(cells))
