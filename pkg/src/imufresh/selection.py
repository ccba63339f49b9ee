"""Per-feature hypothesis tests with false-discovery-rate control.

Every feature column is tested for association with the target; the test is
dispatched on the (feature, target) type combination:

============  ============  =======================================
feature       target        test
============  ============  =======================================
binary        binary        Fisher exact (two-sided)
real          binary        two-sample Kolmogorov-Smirnov
real          real          Kendall tau-b (normal approximation)
binary        real          Kolmogorov-Smirnov between feature groups
constant      any           p = 1 (never aborts a run)
============  ============  =======================================

Selection uses the Benjamini-Yekutieli step-up procedure by default, which
is valid under the arbitrary dependence structure of mass-extracted
features; Benjamini-Hochberg is available behind ``method="bh"``.
Multiclass targets are handled one-vs-rest: a feature is selected if it
passes for any class at level q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, TextIO

import numpy as np

from .errors import (
    BadParameters,
    DegenerateFeature,
    DegenerateSplit,
    DegenerateTable,
    DegenerateTarget,
)
from .extraction import FeatureMatrix
from .names import FeatureName
from .timeseries import render_float

TEST_FISHER = "fisher_exact"
TEST_KS = "ks_two_sample"
TEST_KENDALL = "kendall_tau"
TEST_CONSTANT = "constant"


def is_binary(values: Sequence[float] | np.ndarray) -> bool:
    """True iff the non-NaN value set has cardinality <= 2.

    A constant column counts as binary; selection treats it as degenerate
    (p = 1) before any test dispatch.
    """
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise DegenerateFeature("all values are NaN")
    return np.unique(v).size <= 2


# ---------------------------------------------------------------------------
# Fisher exact test
# ---------------------------------------------------------------------------

# p_k <= p_obs * (1 + 1e-12), evaluated exactly on integer numerators.
_FISHER_TOL_NUM = 10**12 + 1
_FISHER_TOL_DEN = 10**12


def fisher_exact_test(table: Sequence[Sequence[int]]) -> float:
    """Two-sided Fisher exact p for a 2x2 contingency table.

    Sums hypergeometric probabilities of all tables with the observed
    margins whose probability does not exceed the observed table's
    (relative tolerance 1e-12 on the comparison).  Exact integer
    arithmetic, so large margins neither overflow nor lose precision.
    """
    (a, b), (c, d) = table
    cells = (a, b, c, d)
    if any(int(v) != v or v < 0 for v in cells):
        raise BadParameters(f"contingency cells must be non-negative integers: {cells}")
    a, b, c, d = (int(v) for v in cells)
    r1, r2 = a + b, c + d
    c1, c2 = a + c, b + d
    if min(r1, r2, c1, c2) == 0:
        raise DegenerateTable(f"zero margin in table {[[a, b], [c, d]]}")
    n = r1 + r2
    k_lo = max(0, c1 - r2)
    k_hi = min(r1, c1)
    num_obs = math.comb(r1, a) * math.comb(r2, c1 - a)
    total = 0
    for k in range(k_lo, k_hi + 1):
        num_k = math.comb(r1, k) * math.comb(r2, c1 - k)
        if num_k * _FISHER_TOL_DEN <= num_obs * _FISHER_TOL_NUM:
            total += num_k
    return min(1.0, float(Fraction(total, math.comb(n, c1))))


# ---------------------------------------------------------------------------
# Two-sample Kolmogorov-Smirnov test
# ---------------------------------------------------------------------------

def ks_statistic(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """D = sup |ECDF_a - ECDF_b|."""
    a_sorted = np.sort(np.asarray(a, dtype=np.float64))
    b_sorted = np.sort(np.asarray(b, dtype=np.float64))
    if a_sorted.size == 0 or b_sorted.size == 0:
        raise DegenerateSplit("KS test requires two non-empty samples")
    both = np.concatenate([a_sorted, b_sorted])
    cdf_a = np.searchsorted(a_sorted, both, side="right") / a_sorted.size
    cdf_b = np.searchsorted(b_sorted, both, side="right") / b_sorted.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def _kolmogorov_sf(lam: float) -> float:
    """2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2), truncated at terms < 1e-10.

    Below lam = 0.04 the series value is 1 to far beyond double precision,
    so 1.0 is returned directly (this also covers lam = 0, where the raw
    series does not converge).
    """
    if lam < 0.04:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 201):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += sign * term
        if term < 1e-10:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample_test(
    a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray
) -> float:
    """Asymptotic two-sample KS p-value with small-sample lambda correction."""
    d = ks_statistic(a, b)
    n_a = np.asarray(a).size
    n_b = np.asarray(b).size
    ne = n_a * n_b / (n_a + n_b)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return _kolmogorov_sf(lam)


# ---------------------------------------------------------------------------
# Kendall tau-b
# ---------------------------------------------------------------------------

def _concordance_sum(x: np.ndarray, y: np.ndarray) -> int:
    """S = sum over pairs i<j of sign(x_j - x_i) * sign(y_j - y_i)."""
    n = x.size
    s = 0
    chunk = 2048
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dx = np.sign(x[lo:hi, None] - x[None, :]).astype(np.int8)
        dy = np.sign(y[lo:hi, None] - y[None, :]).astype(np.int8)
        s += int(np.sum(dx * dy, dtype=np.int64))
    return s // 2  # each unordered pair was counted twice


def _tie_counts(v: np.ndarray) -> np.ndarray:
    _, counts = np.unique(v, return_counts=True)
    return counts[counts > 1].astype(np.int64)


def kendall_tau(
    x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray
) -> float:
    """Kendall tau-b with tie correction."""
    tau, _ = _kendall_tau_p(x, y)
    return tau


def kendall_tau_test(
    x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray
) -> float:
    """Two-sided p for tau != 0 from the tie-adjusted normal approximation."""
    _, p = _kendall_tau_p(x, y)
    return p


def _kendall_tau_p(x, y) -> tuple[float, float]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise BadParameters("kendall_tau requires two equally sized 1-D vectors")
    n = xa.size
    if n < 3:
        raise BadParameters(f"kendall_tau requires n >= 3, got {n}")
    t = _tie_counts(xa)
    u = _tie_counts(ya)
    n0 = n * (n - 1) // 2
    n1 = int(np.sum(t * (t - 1) // 2))
    n2 = int(np.sum(u * (u - 1) // 2))
    if n1 == n0 or n2 == n0:
        raise DegenerateFeature("all values tied in one vector")
    s = _concordance_sum(xa, ya)
    tau = s / math.sqrt(float(n0 - n1) * float(n0 - n2))

    # var(S) = n(n-1)(2n+5)/18 with tie adjustments (Kendall's formula).
    vt = int(np.sum(t * (t - 1) * (2 * t + 5)))
    vu = int(np.sum(u * (u - 1) * (2 * u + 5)))
    v0 = n * (n - 1) * (2 * n + 5)
    var_s = (v0 - vt - vu) / 18.0
    var_s += (
        np.sum(t * (t - 1) * (t - 2)) * np.sum(u * (u - 1) * (u - 2))
    ) / (9.0 * n * (n - 1) * (n - 2))
    var_s += (np.sum(t * (t - 1)) * np.sum(u * (u - 1))) / (2.0 * n * (n - 1))
    if var_s <= 0:
        return tau, 1.0
    z = s / math.sqrt(var_s)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return tau, min(1.0, max(0.0, p))


# ---------------------------------------------------------------------------
# FDR selection
# ---------------------------------------------------------------------------

def fdr_select(
    p_values: Sequence[float] | np.ndarray, q: float, method: str = "by"
) -> tuple[np.ndarray, int]:
    """Step-up FDR selection; returns (selected indices, threshold rank k*).

    ``method="by"`` applies the Benjamini-Yekutieli harmonic correction
    c(m); ``method="bh"`` is plain Benjamini-Hochberg.  Ties at the
    threshold p-value are included.
    """
    if not (0.0 < q < 1.0):
        raise BadParameters(f"q must be in (0, 1), got {q}")
    if method not in ("by", "bh"):
        raise BadParameters(f"method must be 'by' or 'bh', got {method!r}")
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        raise BadParameters("p_values must be 1-D")
    if p.size == 0:
        return np.empty(0, dtype=np.int64), 0
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p > 1):
        raise BadParameters("p-values must lie in [0, 1]")
    m = p.size
    sorted_p = np.sort(p)
    c_m = float(np.sum(1.0 / np.arange(1, m + 1))) if method == "by" else 1.0
    thresholds = np.arange(1, m + 1) * (q / (m * c_m))
    passing = np.nonzero(sorted_p <= thresholds)[0]
    if passing.size == 0:
        return np.empty(0, dtype=np.int64), 0
    k_star = int(passing[-1]) + 1
    return np.nonzero(p <= sorted_p[k_star - 1])[0].astype(np.int64), k_star


def benjamini_yekutieli(p_values: Sequence[float] | np.ndarray, q: float) -> np.ndarray:
    """Indices selected by the Benjamini-Yekutieli procedure at level q."""
    return fdr_select(p_values, q, method="by")[0]


def benjamini_hochberg(p_values: Sequence[float] | np.ndarray, q: float) -> np.ndarray:
    return fdr_select(p_values, q, method="bh")[0]


# ---------------------------------------------------------------------------
# select_features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureTargetTest:
    """Outcome of testing one feature against the target."""

    feature_name: FeatureName
    test_kind: str
    p_value: float
    n_effective: int


@dataclass(frozen=True)
class SelectionReport:
    """All per-feature tests plus the FDR-selected subset, sorted by p."""

    q: float
    tests: tuple[FeatureTargetTest, ...]
    selected: tuple[FeatureName, ...]
    threshold_rank: int

    def selected_canonical(self) -> tuple[str, ...]:
        return tuple(f.canonical() for f in self.selected)


def _binary_target_p(xv: np.ndarray, in_group: np.ndarray) -> tuple[float, str]:
    """p for a non-constant feature against a boolean group indicator."""
    g0 = xv[~in_group]
    g1 = xv[in_group]
    values = np.unique(xv)
    kind = TEST_FISHER if values.size == 2 else TEST_KS
    if g0.size == 0 or g1.size == 0:
        return 1.0, kind
    if values.size == 2:
        table = [
            [int(np.sum(g0 == values[0])), int(np.sum(g1 == values[0]))],
            [int(np.sum(g0 == values[1])), int(np.sum(g1 == values[1]))],
        ]
        try:
            return fisher_exact_test(table), kind
        except DegenerateTable:
            return 1.0, kind
    return ks_two_sample_test(g0, g1), kind


def _real_target_p(xv: np.ndarray, tv: np.ndarray) -> tuple[float, str]:
    values = np.unique(xv)
    if values.size == 2:
        a = tv[xv == values[0]]
        b = tv[xv == values[1]]
        return ks_two_sample_test(a, b), TEST_KS
    if xv.size < 3:
        return 1.0, TEST_KENDALL
    try:
        return kendall_tau_test(xv, tv), TEST_KENDALL
    except DegenerateFeature:
        return 1.0, TEST_KENDALL


def _test_columns(
    values: np.ndarray,
    target_rows: np.ndarray,
    mode: str,
    class_values: list,
    cols: range,
) -> tuple[np.ndarray, list[str], list[int]]:
    """Test one block of columns; returns (p-values, test kinds, n_effective)."""
    n_classes = len(class_values) if mode == "multiclass" else 1
    p_block = np.ones((len(cols), n_classes), dtype=np.float64)
    kinds: list[str] = []
    n_eff: list[int] = []
    for i, col in enumerate(cols):
        x = values[:, col]
        mask = ~np.isnan(x)
        xv = x[mask]
        n_eff.append(int(mask.sum()))
        if xv.size == 0 or np.unique(xv).size <= 1:
            kinds.append(TEST_CONSTANT)
            continue
        tv = target_rows[mask]
        if mode == "binary":
            in_group = tv == class_values[1]
            p, kind = _binary_target_p(xv, in_group)
            p_block[i, 0] = p
        elif mode == "real":
            p, kind = _real_target_p(xv, tv)
            p_block[i, 0] = p
        else:
            kind = TEST_FISHER if np.unique(xv).size == 2 else TEST_KS
            for ci, cls in enumerate(class_values):
                in_group = tv == cls
                p_block[i, ci] = _binary_target_p(xv, in_group)[0]
        kinds.append(kind)
    return p_block, kinds, n_eff


_SEL_STATE: dict = {}


def _sel_init(values, target_rows, mode, class_values) -> None:
    _SEL_STATE["args"] = (values, target_rows, mode, class_values)


def _sel_task(cols: range):
    values, target_rows, mode, class_values = _SEL_STATE["args"]
    return cols.start, _test_columns(values, target_rows, mode, class_values, cols)


def select_features(
    matrix: FeatureMatrix,
    target: Sequence,
    q: float = 0.05,
    method: str = "by",
    workers: int = 1,
) -> SelectionReport:
    """FRESH selection: test every column, then FDR-select at level q.

    The target may be binary (two distinct values, any type), real-valued,
    or categorical with more than two classes (handled one-vs-rest).  NaN
    feature cells are dropped pairwise per column; a feature that is
    constant (or all NaN) after dropping gets p = 1.  Column tests are
    independent; ``workers`` > 1 spreads them over a process pool without
    changing the result.
    """
    n = matrix.n_rows
    if n < 2:
        raise BadParameters("selection requires at least 2 rows")
    target_list = list(target)
    if len(target_list) != n:
        raise BadParameters(f"target length {len(target_list)} != row count {n}")

    numeric = all(isinstance(v, (int, float, np.integer, np.floating)) for v in target_list)
    if numeric:
        t_real = np.asarray(target_list, dtype=np.float64)
        row_ok = ~np.isnan(t_real)
        t_real = t_real[row_ok]
        distinct = np.unique(t_real)
        if distinct.size <= 1:
            raise DegenerateTarget("target is constant")
        mode = "binary" if distinct.size == 2 else "real"
        class_values: list = list(distinct) if mode == "binary" else []
        target_rows: np.ndarray = t_real
    else:
        t_cat = np.asarray([str(v) for v in target_list], dtype=object)
        row_ok = np.ones(n, dtype=bool)
        classes = sorted(set(t_cat))
        if len(classes) <= 1:
            raise DegenerateTarget("target is constant")
        mode = "binary" if len(classes) == 2 else "multiclass"
        class_values = classes
        target_rows = t_cat

    values = matrix.values[row_ok]
    if values.shape[0] < 2:
        raise DegenerateTarget("fewer than 2 rows with a usable target")

    n_cols = matrix.n_cols
    n_classes = len(class_values) if mode == "multiclass" else 1
    p_matrix = np.ones((n_cols, n_classes), dtype=np.float64)
    kinds: list[str] = [TEST_CONSTANT] * n_cols
    n_eff: list[int] = [0] * n_cols

    if workers <= 1 or n_cols == 0:
        p_matrix, kind_list, eff_list = _test_columns(
            values, target_rows, mode, class_values, range(n_cols)
        )
        kinds = kind_list if n_cols else kinds
        n_eff = eff_list if n_cols else n_eff
    else:
        chunk = max(1, -(-n_cols // (workers * 4)))
        ranges = [range(lo, min(lo + chunk, n_cols)) for lo in range(0, n_cols, chunk)]
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_sel_init,
            initargs=(values, target_rows, mode, class_values),
        ) as pool:
            for start, (p_block, kind_block, eff_block) in pool.map(_sel_task, ranges):
                p_matrix[start : start + p_block.shape[0]] = p_block
                kinds[start : start + len(kind_block)] = kind_block
                n_eff[start : start + len(eff_block)] = eff_block

    selected_mask = np.zeros(n_cols, dtype=bool)
    threshold_rank = 0
    for ci in range(n_classes):
        idx, k_star = fdr_select(p_matrix[:, ci], q, method)
        selected_mask[idx] = True
        threshold_rank = max(threshold_rank, k_star)

    best_p = p_matrix.min(axis=1)
    order = sorted(
        range(n_cols), key=lambda i: (best_p[i], matrix.feature_names[i].canonical())
    )
    tests = tuple(
        FeatureTargetTest(
            feature_name=matrix.feature_names[i],
            test_kind=kinds[i],
            p_value=float(best_p[i]),
            n_effective=n_eff[i],
        )
        for i in order
    )
    selected = tuple(matrix.feature_names[i] for i in order if selected_mask[i])
    return SelectionReport(q=q, tests=tests, selected=selected, threshold_rank=threshold_rank)


# ---------------------------------------------------------------------------
# Report CSV
# ---------------------------------------------------------------------------

def save_report_csv(report: SelectionReport, stream: TextIO) -> None:
    """``feature,p_value,test_kind,selected`` sorted by p ascending."""
    selected_set = set(report.selected_canonical())
    stream.write("feature,p_value,test_kind,selected\n")
    for test in report.tests:
        name = test.feature_name.canonical()
        flag = "True" if name in selected_set else "False"
        stream.write(f"{name},{render_float(test.p_value)},{test.test_kind},{flag}\n")


def save_report(report: SelectionReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        save_report_csv(report, fh)
