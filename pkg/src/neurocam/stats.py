"""Relevance-value statistics: set construction, normality-gated
two-sample testing, Benjamini-Yekutieli FDR adjustment, top-percentile
ranking, and the anatomical-target subgroup analysis.

Test statistics are computed here; only the distribution CDFs come from
scipy.special (normal, Student t, Kolmogorov).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DataError

ALPHA = 0.05
TOP_FRACTION = 0.15
EXACT_MW_LIMIT = 12  # exact U enumeration when n1 + n2 <= this and no ties


def fractional_ranks(values):
    """Ranks starting at 1; ties share the mean of their rank range."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _tie_counts(pooled):
    _, counts = np.unique(pooled, return_counts=True)
    return counts


def _u_counts(n1, n2):
    """Distribution of U over all tie-free arrangements: counts[u] is the
    number of interleavings of n1 x's and n2 y's with statistic u.

    Recurrence on the largest pooled element: if it is an x it beats all
    j current y's, else it is inert — f(u,m,j) = f(u-j,m-1,j) + f(u,m,j-1).
    """
    size = n1 * n2 + 1
    cur = np.zeros((n1 + 1, size))
    cur[:, 0] = 1.0  # j = 0 base: only u = 0 reachable
    for j in range(1, n2 + 1):
        prev = cur
        cur = np.zeros_like(prev)
        cur[0] = prev[0]
        for m in range(1, n1 + 1):
            cur[m] = prev[m]
            cur[m, j:] += cur[m - 1, :size - j]
    return cur[n1]


def mannwhitney_u(x, y):
    """Two-sided Mann-Whitney U. Exact tail enumeration for small,
    tie-free samples; otherwise normal approximation with tie and
    continuity corrections. Returns (U of x, p)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise DataError("empty sample")
    pooled = np.concatenate([x, y])
    ranks = fractional_ranks(pooled)
    r1 = ranks[:n1].sum()
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0
    ties = _tie_counts(pooled)
    has_ties = (ties > 1).any()
    if n1 + n2 <= EXACT_MW_LIMIT and not has_ties:
        counts = _u_counts(n1, n2)
        dev = abs(u1 - mu)
        us = np.arange(len(counts))
        p = counts[np.abs(us - mu) >= dev - 1e-9].sum() / counts.sum()
        return u1, min(p, 1.0)
    n = n1 + n2
    tie_term = (ties ** 3 - ties).sum() / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u1, 1.0
    dev = abs(u1 - mu)
    z = max(dev - 0.5, 0.0) / math.sqrt(var)  # continuity correction
    p = 2.0 * special.ndtr(-z)
    return u1, min(p, 1.0)


def welch_t(x, y):
    """Two-sided Welch t-test; returns (t, p)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise DataError("need at least 2 observations per sample")
    v1 = x.var(ddof=1) / n1
    v2 = y.var(ddof=1) / n2
    denom = v1 + v2
    if denom == 0:
        return 0.0, 1.0
    t = (x.mean() - y.mean()) / math.sqrt(denom)
    df = denom ** 2 / (v1 ** 2 / (n1 - 1) + v2 ** 2 / (n2 - 1))
    p = 2.0 * special.stdtr(df, -abs(t))
    return t, min(p, 1.0)


def ks_normality(sample):
    """One-sample KS against Normal(mean, sd) estimated from the sample
    (sd with ddof=1). Returns (D, p) with p from the asymptotic
    Kolmogorov distribution; zero-variance samples report (1, 0)."""
    sample = np.asarray(sample, dtype=np.float64)
    n = len(sample)
    if n < 3:
        raise DataError(f"KS needs n >= 3, got {n}")
    sd = sample.std(ddof=1)
    if sd == 0:
        return 1.0, 0.0
    z = np.sort((sample - sample.mean()) / sd)
    cdf = special.ndtr(z)
    i = np.arange(1, n + 1)
    d = max((i / n - cdf).max(), (cdf - (i - 1) / n).max())
    return float(d), float(special.kolmogorov(math.sqrt(n) * d))


def compare_groups(ad, hc, alpha=ALPHA):
    """Normality-gated two-sample comparison: Welch t when both samples
    pass KS normality at `alpha`, Mann-Whitney otherwise.
    Returns (test_name, statistic, p)."""
    ad = np.asarray(ad, dtype=np.float64)
    hc = np.asarray(hc, dtype=np.float64)
    if len(ad) < 3 or len(hc) < 3:
        raise DataError("need at least 3 observations per group")
    normal = ks_normality(ad)[1] >= alpha and ks_normality(hc)[1] >= alpha
    if normal:
        t, p = welch_t(ad, hc)
        return "t", t, p
    u, p = mannwhitney_u(ad, hc)
    return "MW", u, p


def by_correction(pvals):
    """Benjamini-Yekutieli step-up adjustment.

    q_(i) = m * c(m) * p_(i) / i with c(m) the harmonic sum, made
    monotone by a cumulative minimum from the largest rank, clipped to 1,
    returned in the original order.
    """
    p = np.asarray(pvals, dtype=np.float64)
    if p.size and (p.min() < 0 or p.max() > 1):
        raise DataError("p-values outside [0, 1]")
    m = len(p)
    if m == 0:
        return np.array([])
    c_m = (1.0 / np.arange(1, m + 1)).sum()
    order = np.argsort(p, kind="mergesort")
    ranked = p[order] * m * c_m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out


@dataclass
class RvSets:
    """Per-parcel normalized subject-level RVs, split by class."""
    ad: dict       # parcel index -> np.ndarray
    hc: dict
    norm_min: float
    norm_max: float

    def parcels(self):
        return sorted(self.ad)


def build_rv_sets(rv_table, predictions, cohort):
    """Apply the five set-construction steps, in order:
    (i) drop sessions whose prediction disagrees with the true label;
    (ii) average a subject's remaining same-class sessions per parcel;
    (iii) drop subjects still carrying both classes;
    (iv) split by class;
    (v) min-max normalize with the global extrema over all retained values.

    rv_table: session_id -> RV vector; predictions: session_id -> label.
    """
    per_subject = {}
    for session_id, rvs in rv_table.items():
        record = cohort.by_id(session_id)
        if predictions[session_id] != record.label:
            continue  # (i)
        per_subject.setdefault(record.subject_id, {}).setdefault(
            record.label, []).append(np.asarray(rvs, dtype=np.float64))
    aggregated = []  # (label, vector) per retained subject
    for subject_id, by_label in per_subject.items():
        if len(by_label) > 1:
            continue  # (iii)
        label, vecs = next(iter(by_label.items()))
        aggregated.append((label, np.mean(vecs, axis=0)))  # (ii)
    if not aggregated:
        raise DataError("no sessions survived the misclassification filter")
    all_values = np.concatenate([v for _, v in aggregated])
    lo, hi = float(all_values.min()), float(all_values.max())
    span = hi - lo if hi > lo else 1.0
    n_parcels = len(aggregated[0][1])
    ad = {p: [] for p in range(1, n_parcels + 1)}
    hc = {p: [] for p in range(1, n_parcels + 1)}
    for label, vec in aggregated:
        target = ad if label == "AD" else hc
        for p in range(1, n_parcels + 1):
            target[p].append((vec[p - 1] - lo) / span)  # (v)
    ad = {p: np.asarray(v) for p, v in ad.items()}
    hc = {p: np.asarray(v) for p, v in hc.items()}
    if not len(next(iter(ad.values()))) or not len(next(iter(hc.values()))):
        raise DataError("a class is empty after filtering")
    return RvSets(ad=ad, hc=hc, norm_min=lo, norm_max=hi)


@dataclass
class ParcelTest:
    parcel: int
    test: str
    statistic: float
    p_raw: float
    p_adj: float = float("nan")
    significant: bool = False
    direction: str = ""  # AD>HC | HC>AD | =


@dataclass
class StatReport:
    tests: list
    top_ad: list = field(default_factory=list)
    top_hc: list = field(default_factory=list)
    alpha: float = ALPHA

    def significant_parcels(self):
        return [t.parcel for t in self.tests if t.significant]

    def by_parcel(self):
        return {t.parcel: t for t in self.tests}


def evaluate_parcels(rv_sets, alpha=ALPHA):
    """Per-parcel comparison + BY adjustment across all parcels."""
    tests = []
    for parcel in rv_sets.parcels():
        ad, hc = rv_sets.ad[parcel], rv_sets.hc[parcel]
        name, stat, p = compare_groups(ad, hc, alpha)
        med_ad, med_hc = float(np.median(ad)), float(np.median(hc))
        if med_ad > med_hc:
            direction = "AD>HC"
        elif med_hc > med_ad:
            direction = "HC>AD"
        else:
            direction = "="
        tests.append(ParcelTest(parcel=parcel, test=name, statistic=float(stat),
                                p_raw=float(p), direction=direction))
    adjusted = by_correction([t.p_raw for t in tests])
    for t, q in zip(tests, adjusted):
        t.p_adj = float(q)
        t.significant = bool(q < alpha)
    return tests


def top_count(n_parcels, fraction=TOP_FRACTION):
    return math.ceil(fraction * n_parcels)


def rank_top_parcels(rv_sets, fraction=TOP_FRACTION):
    """Per-class top parcels by mean normalized RV (ties broken by parcel
    index). Returns (top_ad, top_hc) as parcel-index lists, best first."""
    parcels = rv_sets.parcels()
    n_top = top_count(len(parcels), fraction)

    def rank(values):
        scores = [(-float(np.mean(values[p])), p) for p in parcels]
        scores.sort()
        return [p for _, p in scores[:n_top]]

    return rank(rv_sets.ad), rank(rv_sets.hc)


def strip_laterality(acronym):
    for suffix in ("_l", "_r"):
        if acronym.endswith(suffix):
            return acronym[:-len(suffix)]
    return acronym


def subgroup_analysis(report, atlas_names, targets):
    """Cross the per-class top sets with significance flags and the
    anatomical target sets. `targets` maps set name -> acronym list."""
    sig = set(report.significant_parcels())
    by_parcel = report.by_parcel()
    name_of = {i + 1: n for i, n in enumerate(atlas_names)}
    index_of = {n: i + 1 for i, n in enumerate(atlas_names)}

    def describe(parcel_list):
        return [{"parcel": p, "acronym": name_of[p],
                 "direction": by_parcel[p].direction} for p in parcel_list]

    out = {"classes": {}, "targets": {}}
    nonsig_overlap = None
    for label, top in (("AD", report.top_ad), ("HC", report.top_hc)):
        top_sig = [p for p in top if p in sig]
        top_nonsig = [p for p in top if p not in sig]
        out["classes"][label] = {
            "top": describe(top),
            "top_significant": describe(top_sig),
            "top_not_significant": describe(top_nonsig),
        }
        nonsig = set(top_nonsig)
        nonsig_overlap = nonsig if nonsig_overlap is None else nonsig_overlap & nonsig
    out["common_top_not_significant"] = describe(sorted(nonsig_overlap))
    for set_name, acronyms in targets.items():
        members = [index_of[a] for a in acronyms if a in index_of]
        hits = sorted(set(members) & sig)
        regions = {strip_laterality(name_of[p]) for p in members}
        hit_regions = {strip_laterality(name_of[p]) for p in hits}
        out["targets"][set_name] = {
            "size": len(members),
            "significant": describe(hits),
            "hit_count": len(hits),
            "region_count": len(regions),
            "hit_region_count": len(hit_regions),  # lateralization collapsed
        }
    return out
