"""Paired comparison statistics for pipeline grids.

Everything here is hand-implemented on purpose: McNemar, Cochran's Q,
Friedman, Wilcoxon signed-rank, the paired t test, Holm's step-down
adjustment, and the chi-square / Student t / normal tail probabilities
they need (regularized incomplete gamma and beta via series and
continued fractions). The main-effects report composes these into
per-factor accuracy, latency, and cost comparisons over a run grid.
"""

from __future__ import annotations

import csv
import math
import statistics as pystats
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .evaluation import JudgeVerdict
from .experiment import RunRecord, parse_pipeline_id

TWO_SIDED = "two_sided"
GREATER = "greater"
LESS = "less"
ALTERNATIVES = (TWO_SIDED, GREATER, LESS)


class StatsError(ValueError):
    """Invalid inputs to a statistical procedure."""


class DegenerateDataError(StatsError):
    """Data with no variation where the statistic needs some."""


# -- tail probabilities ------------------------------------------------------

_EPS = 1e-15
_MAX_ITER = 600


def _gamma_p_series(a: float, x: float) -> float:
    # lower regularized incomplete gamma by series expansion; valid x < a+1
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # upper regularized incomplete gamma by modified Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0:
        raise StatsError("gamma shape must be positive")
    if x < 0:
        raise StatsError("gamma argument must be >= 0")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    return 1.0 - regularized_gamma_p(a, x) if x < a + 1.0 else _gamma_q_contfrac(a, x)


def _beta_contfrac(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def regularized_beta(a: float, b: float, x: float) -> float:
    if a <= 0 or b <= 0:
        raise StatsError("beta shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast below the distribution's mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_contfrac(a, b, x) / a
    return 1.0 - front * _beta_contfrac(b, a, 1.0 - x) / b


def chi_square_sf(x: float, df: int) -> float:
    if df < 1:
        raise StatsError("chi-square df must be >= 1")
    if x <= 0.0:
        return 1.0
    return regularized_gamma_q(df / 2.0, x / 2.0)


def student_t_sf(t: float, df: int) -> float:
    if df < 1:
        raise StatsError("t distribution df must be >= 1")
    half = 0.5 * regularized_beta(df / 2.0, 0.5, df / (df + t * t))
    return half if t >= 0 else 1.0 - half


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def tail(distribution: str, statistic: float, side: str = "upper", df: int | None = None) -> float:
    """Tail probability of a test statistic under chi_square(df),
    student_t(df), or standard_normal; side in {upper, lower, two_sided}."""
    if side not in ("upper", "lower", "two_sided"):
        raise StatsError(f"unknown side {side!r}")
    if distribution == "chi_square":
        if df is None:
            raise StatsError("chi_square needs df")
        upper = chi_square_sf(statistic, df)
    elif distribution == "student_t":
        if df is None:
            raise StatsError("student_t needs df")
        upper = student_t_sf(statistic, df)
    elif distribution == "standard_normal":
        upper = normal_sf(statistic)
    else:
        raise StatsError(f"unknown distribution {distribution!r}")
    if side == "upper":
        return upper
    if side == "lower":
        return 1.0 - upper
    return min(1.0, 2.0 * min(upper, 1.0 - upper))


# -- core test results -------------------------------------------------------


@dataclass
class TestResult:
    statistic: float
    df: int | None
    p_value: float
    sidedness: str
    method: str


def _check_binary(values, name: str) -> list[int]:
    out = []
    for v in values:
        if v not in (0, 1, True, False):
            raise StatsError(f"{name} must contain only 0/1 values, got {v!r}")
        out.append(int(v))
    return out


@dataclass(frozen=True)
class PairedBinary:
    """Two equal-length binary outcome vectors from the same units."""

    x: tuple[int, ...]
    y: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y):
            raise StatsError("paired vectors must have equal length")
        _check_binary(self.x, "x")
        _check_binary(self.y, "y")

    @property
    def b(self) -> int:
        return sum(1 for a, b in zip(self.x, self.y) if a == 1 and b == 0)

    @property
    def c(self) -> int:
        return sum(1 for a, b in zip(self.x, self.y) if a == 0 and b == 1)


def mcnemar_counts(b: int, c: int, continuity: bool = False) -> TestResult:
    """McNemar's test from the two discordant counts."""
    if b < 0 or c < 0:
        raise StatsError("discordant counts must be >= 0")
    method = "mcnemar_continuity" if continuity else "mcnemar"
    if b + c == 0:
        return TestResult(0.0, df=1, p_value=1.0, sidedness=TWO_SIDED, method=method)
    if continuity:
        stat = (abs(b - c) - 1) ** 2 / (b + c)
    else:
        stat = (b - c) ** 2 / (b + c)
    return TestResult(
        statistic=float(stat),
        df=1,
        p_value=chi_square_sf(float(stat), 1),
        sidedness=TWO_SIDED,
        method=method,
    )


def mcnemar(x, y, continuity: bool = False) -> TestResult:
    pairs = PairedBinary(tuple(x), tuple(y))
    return mcnemar_counts(pairs.b, pairs.c, continuity=continuity)


def _check_matrix(matrix, min_rows: int, min_cols: int, name: str) -> list[list[float]]:
    rows = [list(r) for r in matrix]
    if len(rows) < min_rows:
        raise StatsError(f"{name} needs at least {min_rows} rows")
    width = len(rows[0]) if rows else 0
    if width < min_cols:
        raise StatsError(f"{name} needs at least {min_cols} columns")
    for r in rows:
        if len(r) != width:
            raise StatsError(f"{name} must be rectangular")
    return rows


def cochran_q(matrix) -> TestResult:
    """Cochran's Q over an n-subjects x k-treatments binary matrix.

    With every row constant the statistic is 0/0; that is degenerate
    (there is no discordance anywhere to test).
    """
    rows = _check_matrix(matrix, min_rows=1, min_cols=2, name="cochran matrix")
    for r in rows:
        _check_binary(r, "cochran matrix")
    k = len(rows[0])
    col_totals = [sum(r[j] for r in rows) for j in range(k)]
    row_totals = [sum(r) for r in rows]
    n_total = sum(row_totals)
    numerator = (k - 1) * (k * sum(c * c for c in col_totals) - n_total * n_total)
    denominator = k * n_total - sum(r * r for r in row_totals)
    if denominator == 0:
        raise DegenerateDataError("every row is constant; Cochran's Q is undefined")
    stat = numerator / denominator
    return TestResult(
        statistic=float(stat),
        df=k - 1,
        p_value=chi_square_sf(float(stat), k - 1),
        sidedness=TWO_SIDED,
        method="cochran_q",
    )


def _average_ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # positions are 1-based
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        i = j + 1
    return ranks


def friedman(matrix) -> TestResult:
    """Friedman's rank test over n blocks x k treatments, with the
    average-rank tie correction. A fully tied matrix has statistic 0."""
    rows = _check_matrix(matrix, min_rows=2, min_cols=2, name="friedman matrix")
    n = len(rows)
    k = len(rows[0])
    rank_sums = [0.0] * k
    tie_term = 0.0
    for row in rows:
        ranks = _average_ranks([float(v) for v in row])
        for j, r in enumerate(ranks):
            rank_sums[j] += r
        seen: dict[float, int] = {}
        for v in row:
            seen[float(v)] = seen.get(float(v), 0) + 1
        for t in seen.values():
            if t > 1:
                tie_term += t**3 - t
    stat = 12.0 / (n * k * (k + 1)) * sum(r * r for r in rank_sums) - 3.0 * n * (k + 1)
    divisor = 1.0 - tie_term / (n * k * (k * k - 1))
    if divisor <= 0.0:
        # every block fully tied: no ordering information at all
        return TestResult(0.0, df=k - 1, p_value=1.0, sidedness=TWO_SIDED, method="friedman")
    stat /= divisor
    return TestResult(
        statistic=float(stat),
        df=k - 1,
        p_value=chi_square_sf(float(stat), k - 1),
        sidedness=TWO_SIDED,
        method="friedman",
    )


def _wilcoxon_exact_ge(n: int, w: float) -> float:
    """P(W+ >= w) for untied ranks 1..n under the null, by counting subset
    rank-sums (equivalent to enumerating all 2^n sign assignments)."""
    max_sum = n * (n + 1) // 2
    counts = [0] * (max_sum + 1)
    counts[0] = 1
    for r in range(1, n + 1):
        for s in range(max_sum, r - 1, -1):
            counts[s] += counts[s - r]
    threshold = math.ceil(w - 1e-9)
    return sum(counts[threshold:]) / float(2**n)


def wilcoxon_signed_rank(x, y, alternative: str = TWO_SIDED) -> TestResult:
    """Wilcoxon signed-rank on paired samples. Zero differences are
    dropped; exact p for n <= 25 without ties, else a tie-corrected
    normal approximation with 0.5 continuity correction."""
    if alternative not in ALTERNATIVES:
        raise StatsError(f"unknown alternative {alternative!r}")
    if len(x) != len(y):
        raise StatsError("paired samples must have equal length")
    diffs = [float(a) - float(b) for a, b in zip(x, y)]
    diffs = [d for d in diffs if d != 0.0]
    if not diffs:
        raise DegenerateDataError("all paired differences are zero")
    n = len(diffs)
    abs_diffs = [abs(d) for d in diffs]
    ranks = _average_ranks(abs_diffs)
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = n * (n + 1) / 2.0 - w_plus
    has_ties = len(set(abs_diffs)) != n
    if n <= 25 and not has_ties:
        p_greater = _wilcoxon_exact_ge(n, w_plus)
        p_less = 1.0 - _wilcoxon_exact_ge(n, w_plus + 1.0)
        method = "wilcoxon_exact"
    else:
        mean = n * (n + 1) / 4.0
        tie_term = 0.0
        seen: dict[float, int] = {}
        for d in abs_diffs:
            seen[d] = seen.get(d, 0) + 1
        for t in seen.values():
            if t > 1:
                tie_term += t**3 - t
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
        if var <= 0.0:
            raise DegenerateDataError("zero variance in signed ranks")
        sd = math.sqrt(var)
        p_greater = normal_sf((w_plus - mean - 0.5) / sd)
        p_less = normal_sf((mean - w_plus - 0.5) / sd)
        method = "wilcoxon_normal"
    if alternative == GREATER:
        p = p_greater
    elif alternative == LESS:
        p = p_less
    else:
        p = min(1.0, 2.0 * min(p_greater, p_less))
    return TestResult(
        statistic=float(w_plus), df=None, p_value=p, sidedness=alternative, method=method
    )


def paired_t(x, y, alternative: str = TWO_SIDED) -> TestResult:
    """Paired Student t test on the differences x - y."""
    if alternative not in ALTERNATIVES:
        raise StatsError(f"unknown alternative {alternative!r}")
    if len(x) != len(y):
        raise StatsError("paired samples must have equal length")
    diffs = [float(a) - float(b) for a, b in zip(x, y)]
    n = len(diffs)
    if n < 2:
        raise StatsError("paired t needs at least 2 pairs")
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        raise DegenerateDataError("paired differences have zero variance")
    stderr = math.sqrt(var / n)
    # Essentially-constant differences: any nonzero variance here is pure
    # rounding noise (e.g. identical diffs whose mean is not exactly
    # representable), and the resulting t would be meaningless.
    if stderr < 10.0 * sys.float_info.epsilon * abs(mean):
        raise DegenerateDataError("paired differences are essentially constant")
    t = mean / stderr
    df = n - 1
    if alternative == GREATER:
        p = student_t_sf(t, df)
    elif alternative == LESS:
        p = student_t_sf(-t, df)
    else:
        p = min(1.0, 2.0 * student_t_sf(abs(t), df))
    return TestResult(
        statistic=float(t), df=df, p_value=p, sidedness=alternative, method="paired_t"
    )


def holm(p_values) -> list[float]:
    """Holm step-down adjustment, returned in the input order."""
    p_values = [float(p) for p in p_values]
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise StatsError(f"p-value {p} outside [0, 1]")
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for step, idx in enumerate(order):
        candidate = min(1.0, (m - step) * p_values[idx])
        running = max(running, candidate)
        adjusted[idx] = running
    return adjusted


# -- main-effects report -----------------------------------------------------

ACCURACY = "accuracy"
LATENCY = "latency_s"
COST = "cost_usd"


@dataclass
class PairwiseComparison:
    level_a: str
    level_b: str
    method: str
    statistic: float | None = None
    p_value: float | None = None
    p_adjusted: float | None = None
    note: str = ""


@dataclass
class EffectTest:
    metric: str
    factor: str
    method: str
    levels: list[str]
    n_units: int
    statistic: float | None = None
    df: int | None = None
    p_value: float | None = None
    sidedness: str = TWO_SIDED
    note: str = ""
    pairwise: list[PairwiseComparison] = field(default_factory=list)


@dataclass
class PipelineSummary:
    pipeline_id: str
    n_records: int
    n_judged: int
    n_correct: int
    accuracy: float | None
    latency_median_s: float | None
    latency_mean_s: float | None
    cost_median_usd: float | None
    cost_mean_usd: float | None


@dataclass
class StatsReport:
    effects: list[EffectTest]
    pipeline_summary: list[PipelineSummary]
    orderings: dict[str, list[str]]
    missing_cells: list[dict]
    error_cells: list[dict]
    unjudged_cells: list[dict]


_FACTORS = ("model", "strategy", "top_k")


def _factor_level(pipeline_id: str, factor: str) -> str:
    cfg = parse_pipeline_id(pipeline_id)
    if factor == "model":
        return cfg.model.model_id
    if factor == "strategy":
        return cfg.strategy.value
    if factor == "top_k":
        return str(cfg.top_k)
    raise StatsError(f"unknown factor {factor!r}")


def _other_factors_key(pipeline_id: str, qid: str, factor: str) -> tuple:
    cfg = parse_pipeline_id(pipeline_id)
    parts = {
        "model": cfg.model.model_id,
        "strategy": cfg.strategy.value,
        "top_k": str(cfg.top_k),
    }
    return tuple(parts[f] for f in _FACTORS if f != factor) + (qid,)


def _binary_effect(
    metric_by_cell: dict[tuple[str, str], int],
    pipeline_ids: list[str],
    qids: list[str],
    factor: str,
    continuity: bool,
) -> EffectTest:
    """Accuracy main effect for one factor: pair/block the judged cells by
    every combination of the other factors plus the question."""
    levels = sorted({_factor_level(p, factor) for p in pipeline_ids})
    blocks: dict[tuple, dict[str, int]] = {}
    for p in pipeline_ids:
        level = _factor_level(p, factor)
        for q in qids:
            if (p, q) in metric_by_cell:
                blocks.setdefault(_other_factors_key(p, q, factor), {})[level] = metric_by_cell[
                    (p, q)
                ]
    if len(levels) < 2:
        return EffectTest(
            metric=ACCURACY,
            factor=factor,
            method="none",
            levels=levels,
            n_units=0,
            note="single level; nothing to compare",
        )
    complete = [b for b in blocks.values() if len(b) == len(levels)]
    effect = EffectTest(
        metric=ACCURACY,
        factor=factor,
        method="mcnemar" if len(levels) == 2 else "cochran_q",
        levels=levels,
        n_units=len(complete),
    )
    if not complete:
        effect.note = "no complete paired units"
        return effect
    try:
        if len(levels) == 2:
            x = [b[levels[0]] for b in complete]
            y = [b[levels[1]] for b in complete]
            result = mcnemar(x, y, continuity=continuity)
        else:
            matrix = [[b[lv] for lv in levels] for b in complete]
            result = cochran_q(matrix)
            effect.pairwise = _pairwise_binary(complete, levels, continuity)
        effect.statistic = result.statistic
        effect.df = result.df
        effect.p_value = result.p_value
        effect.sidedness = result.sidedness
        effect.method = result.method
    except DegenerateDataError as exc:
        effect.note = f"degenerate: {exc}"
    return effect


def _pairwise_binary(
    complete: list[dict[str, int]], levels: list[str], continuity: bool
) -> list[PairwiseComparison]:
    comparisons: list[PairwiseComparison] = []
    for i, a in enumerate(levels):
        for b in levels[i + 1 :]:
            result = mcnemar([blk[a] for blk in complete], [blk[b] for blk in complete], continuity)
            comparisons.append(
                PairwiseComparison(
                    level_a=a,
                    level_b=b,
                    method=result.method,
                    statistic=result.statistic,
                    p_value=result.p_value,
                )
            )
    _apply_holm(comparisons)
    return comparisons


def _continuous_effect(
    metric_by_cell: dict[tuple[str, str], float],
    pipeline_ids: list[str],
    qids: list[str],
    factor: str,
    metric_name: str,
) -> EffectTest:
    """Latency/cost main effect: paired t for two-level factors (one-sided,
    testing first level > second in sorted-level order), Friedman plus
    Holm-adjusted pairwise Wilcoxons otherwise."""
    levels = sorted({_factor_level(p, factor) for p in pipeline_ids})
    blocks: dict[tuple, dict[str, float]] = {}
    for p in pipeline_ids:
        level = _factor_level(p, factor)
        for q in qids:
            if (p, q) in metric_by_cell:
                blocks.setdefault(_other_factors_key(p, q, factor), {})[level] = metric_by_cell[
                    (p, q)
                ]
    if len(levels) < 2:
        return EffectTest(
            metric=metric_name,
            factor=factor,
            method="none",
            levels=levels,
            n_units=0,
            note="single level; nothing to compare",
        )
    complete = [b for b in blocks.values() if len(b) == len(levels)]
    effect = EffectTest(
        metric=metric_name,
        factor=factor,
        method="paired_t" if len(levels) == 2 else "friedman",
        levels=levels,
        n_units=len(complete),
    )
    if not complete:
        effect.note = "no complete paired units"
        return effect
    try:
        if len(levels) == 2:
            x = [b[levels[0]] for b in complete]
            y = [b[levels[1]] for b in complete]
            result = paired_t(x, y, alternative=GREATER)
        else:
            matrix = [[b[lv] for lv in levels] for b in complete]
            result = friedman(matrix)
            effect.pairwise = _pairwise_wilcoxon(complete, levels)
        effect.statistic = result.statistic
        effect.df = result.df
        effect.p_value = result.p_value
        effect.sidedness = result.sidedness
        effect.method = result.method
    except DegenerateDataError as exc:
        effect.note = f"degenerate: {exc}"
    return effect


def _pairwise_wilcoxon(complete: list[dict[str, float]], levels: list[str]) -> list[PairwiseComparison]:
    comparisons: list[PairwiseComparison] = []
    for i, a in enumerate(levels):
        for b in levels[i + 1 :]:
            try:
                result = wilcoxon_signed_rank(
                    [blk[a] for blk in complete], [blk[b] for blk in complete]
                )
                comparisons.append(
                    PairwiseComparison(
                        level_a=a,
                        level_b=b,
                        method=result.method,
                        statistic=result.statistic,
                        p_value=result.p_value,
                    )
                )
            except DegenerateDataError as exc:
                comparisons.append(
                    PairwiseComparison(
                        level_a=a, level_b=b, method="wilcoxon", note=f"degenerate: {exc}"
                    )
                )
    _apply_holm(comparisons)
    return comparisons


def _apply_holm(comparisons: list[PairwiseComparison]) -> None:
    testable = [c for c in comparisons if c.p_value is not None]
    if not testable:
        return
    adjusted = holm([c.p_value for c in testable])
    for c, p_adj in zip(testable, adjusted):
        c.p_adjusted = p_adj


def _median_mean(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    return float(pystats.median(values)), float(sum(values) / len(values))


def main_effects_report(
    records: list[RunRecord],
    verdicts: list[JudgeVerdict],
    mcnemar_continuity: bool = False,
) -> StatsReport:
    """The grid analysis: accuracy, latency, and cost main effects per
    factor, a per-pipeline summary, best-at-top orderings, and explicit
    missing/error/unjudged cell inventories."""
    ok_records = {(r.pipeline_id, r.qid): r for r in records if r.status == "ok"}
    all_record_keys = {(r.pipeline_id, r.qid) for r in records}
    error_cells = [
        {"pipeline_id": r.pipeline_id, "qid": r.qid, "error": r.error}
        for r in records
        if r.status != "ok"
    ]
    verdict_map = {(v.pipeline_id, v.qid): int(v.correct) for v in verdicts}
    pipeline_ids = sorted({r.pipeline_id for r in records} | {v.pipeline_id for v in verdicts})
    qids = sorted({r.qid for r in records} | {v.qid for v in verdicts})
    missing_cells = [
        {"pipeline_id": p, "qid": q}
        for p in pipeline_ids
        for q in qids
        if (p, q) not in all_record_keys
    ]
    unjudged_cells = [
        {"pipeline_id": p, "qid": q}
        for (p, q) in ok_records
        if (p, q) not in verdict_map
    ]
    unjudged_cells.sort(key=lambda d: (d["pipeline_id"], d["qid"]))

    latency_by_cell = {key: r.generation_time_s for key, r in ok_records.items()}
    cost_by_cell = {key: r.cost_usd for key, r in ok_records.items()}

    effects: list[EffectTest] = []
    for factor in _FACTORS:
        effects.append(
            _binary_effect(verdict_map, pipeline_ids, qids, factor, mcnemar_continuity)
        )
    for metric_name, by_cell in ((LATENCY, latency_by_cell), (COST, cost_by_cell)):
        for factor in _FACTORS:
            effects.append(
                _continuous_effect(by_cell, pipeline_ids, qids, factor, metric_name)
            )

    summaries: list[PipelineSummary] = []
    for p in pipeline_ids:
        p_records = [r for r in records if r.pipeline_id == p]
        p_ok = [r for r in p_records if r.status == "ok"]
        judged = [verdict_map[(p, r.qid)] for r in p_ok if (p, r.qid) in verdict_map]
        latency_median, latency_mean = _median_mean([r.generation_time_s for r in p_ok])
        cost_median, cost_mean = _median_mean([r.cost_usd for r in p_ok])
        summaries.append(
            PipelineSummary(
                pipeline_id=p,
                n_records=len(p_records),
                n_judged=len(judged),
                n_correct=sum(judged),
                accuracy=(sum(judged) / len(judged)) if judged else None,
                latency_median_s=latency_median,
                latency_mean_s=latency_mean,
                cost_median_usd=cost_median,
                cost_mean_usd=cost_mean,
            )
        )

    # best at top in every section: highest accuracy, lowest median
    # latency, lowest median cost; ties break by pipeline id
    def _order(key, sign: float):
        present = [s for s in summaries if key(s) is not None]
        return [
            s.pipeline_id
            for s in sorted(present, key=lambda s: (sign * key(s), s.pipeline_id))
        ]

    orderings = {
        ACCURACY: _order(lambda s: s.accuracy, sign=-1.0),
        LATENCY: _order(lambda s: s.latency_median_s, sign=1.0),
        COST: _order(lambda s: s.cost_median_usd, sign=1.0),
    }
    summaries.sort(
        key=lambda s: (-(s.accuracy if s.accuracy is not None else -1.0), s.pipeline_id)
    )
    return StatsReport(
        effects=effects,
        pipeline_summary=summaries,
        orderings=orderings,
        missing_cells=missing_cells,
        error_cells=error_cells,
        unjudged_cells=unjudged_cells,
    )


# -- serialization -----------------------------------------------------------


def report_to_dict(report: StatsReport) -> dict:
    return {
        "effects": [
            {
                "metric": e.metric,
                "factor": e.factor,
                "method": e.method,
                "levels": e.levels,
                "n_units": e.n_units,
                "statistic": e.statistic,
                "df": e.df,
                "p_value": e.p_value,
                "sidedness": e.sidedness,
                "note": e.note,
                "pairwise": [
                    {
                        "level_a": c.level_a,
                        "level_b": c.level_b,
                        "method": c.method,
                        "statistic": c.statistic,
                        "p_value": c.p_value,
                        "p_adjusted": c.p_adjusted,
                        "note": c.note,
                    }
                    for c in e.pairwise
                ],
            }
            for e in report.effects
        ],
        "pipeline_summary": [
            {
                "pipeline_id": s.pipeline_id,
                "n_records": s.n_records,
                "n_judged": s.n_judged,
                "n_correct": s.n_correct,
                "accuracy": s.accuracy,
                "latency_median_s": s.latency_median_s,
                "latency_mean_s": s.latency_mean_s,
                "cost_median_usd": s.cost_median_usd,
                "cost_mean_usd": s.cost_mean_usd,
            }
            for s in report.pipeline_summary
        ],
        "orderings": report.orderings,
        "missing_cells": report.missing_cells,
        "error_cells": report.error_cells,
        "unjudged_cells": report.unjudged_cells,
    }


def _fmt(value: float | None, digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def render_report_text(report: StatsReport) -> str:
    lines: list[str] = []
    lines.append("MAIN EFFECTS")
    for e in report.effects:
        header = f"  {e.metric} by {e.factor} [{e.method}] n={e.n_units}"
        if e.note:
            lines.append(f"{header}  {e.note}")
        else:
            df = f" df={e.df}" if e.df is not None else ""
            lines.append(
                f"{header}  statistic={_fmt(e.statistic)}{df} p={_fmt(e.p_value, 6)} ({e.sidedness})"
            )
        for c in e.pairwise:
            if c.note:
                lines.append(f"    {c.level_a} vs {c.level_b}: {c.note}")
            else:
                lines.append(
                    f"    {c.level_a} vs {c.level_b}: statistic={_fmt(c.statistic)} "
                    f"p={_fmt(c.p_value, 6)} p_holm={_fmt(c.p_adjusted, 6)}"
                )
    lines.append("")
    lines.append("PIPELINES (best accuracy first)")
    width = max((len(s.pipeline_id) for s in report.pipeline_summary), default=8)
    lines.append(
        f"  {'pipeline':<{width}}  {'acc':>7}  {'lat_med_s':>10}  {'cost_med_usd':>13}"
    )
    for s in report.pipeline_summary:
        lines.append(
            f"  {s.pipeline_id:<{width}}  {_fmt(s.accuracy):>7}  "
            f"{_fmt(s.latency_median_s, 4):>10}  {_fmt(s.cost_median_usd, 6):>13}"
        )
    for name, label in ((LATENCY, "fastest"), (COST, "cheapest")):
        lines.append("")
        lines.append(f"ORDER BY {name} ({label} first)")
        for pid in report.orderings[name]:
            lines.append(f"  {pid}")
    if report.missing_cells:
        lines.append("")
        lines.append(f"MISSING CELLS: {len(report.missing_cells)}")
        for cell in report.missing_cells[:20]:
            lines.append(f"  {cell['pipeline_id']} / {cell['qid']}")
    if report.error_cells:
        lines.append("")
        lines.append(f"ERROR CELLS: {len(report.error_cells)}")
        for cell in report.error_cells[:20]:
            lines.append(f"  {cell['pipeline_id']} / {cell['qid']}: {cell['error']}")
    if report.unjudged_cells:
        lines.append("")
        lines.append(f"UNJUDGED CELLS: {len(report.unjudged_cells)}")
    return "\n".join(lines) + "\n"


def write_csvs(report: StatsReport, records: list[RunRecord], out_dir: str | Path) -> list[Path]:
    """Flat CSVs for external plotting: the per-pipeline summary plus one
    row per grid cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "pipeline_summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "pipeline_id",
                "n_records",
                "n_judged",
                "n_correct",
                "accuracy",
                "latency_median_s",
                "latency_mean_s",
                "cost_median_usd",
                "cost_mean_usd",
            ]
        )
        for s in report.pipeline_summary:
            writer.writerow(
                [
                    s.pipeline_id,
                    s.n_records,
                    s.n_judged,
                    s.n_correct,
                    "" if s.accuracy is None else f"{s.accuracy:.6f}",
                    "" if s.latency_median_s is None else f"{s.latency_median_s:.6f}",
                    "" if s.latency_mean_s is None else f"{s.latency_mean_s:.6f}",
                    "" if s.cost_median_usd is None else f"{s.cost_median_usd:.8f}",
                    "" if s.cost_mean_usd is None else f"{s.cost_mean_usd:.8f}",
                ]
            )
    cells_path = out / "cells.csv"
    with cells_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "pipeline_id",
                "qid",
                "replicate_id",
                "status",
                "retrieval_time_s",
                "generation_time_s",
                "input_tokens",
                "output_tokens",
                "cost_usd",
            ]
        )
        for r in records:
            writer.writerow(
                [
                    r.pipeline_id,
                    r.qid,
                    r.replicate_id,
                    r.status,
                    f"{r.retrieval_time_s:.6f}",
                    f"{r.generation_time_s:.6f}",
                    r.input_tokens,
                    r.output_tokens,
                    f"{r.cost_usd:.8f}",
                ]
            )
    return [summary_path, cells_path]
