"""Independent statistics oracles shared by distribution tests.

The chi-square statistic is computed by hand; quantiles come from scipy so
the thresholds never depend on the code under test.
"""

from __future__ import annotations

from collections import Counter

from scipy import stats


def chi_square_stat(counts: dict, expected: dict[object, float]) -> float:
    stat = 0.0
    for key, exp in expected.items():
        obs = counts.get(key, 0)
        stat += (obs - exp) ** 2 / exp
    return stat


def chi_square_uniform_ok(observations, categories, *, level: float = 0.999) -> tuple[bool, float, float]:
    """Uniformity test over the given categories at the given level."""
    observations = list(observations)
    counts = Counter(observations)
    unexpected = set(counts) - set(categories)
    assert not unexpected, f"observed values outside the support: {unexpected}"
    expect = len(observations) / len(categories)
    stat = chi_square_stat(counts, {c: expect for c in categories})
    threshold = stats.chi2.ppf(level, df=len(categories) - 1)
    return stat < threshold, stat, threshold


def binomial_within_sigma(count: int, n: int, p: float, sigmas: float = 3.5) -> bool:
    sigma = (n * p * (1 - p)) ** 0.5
    return abs(count - n * p) <= sigmas * sigma
