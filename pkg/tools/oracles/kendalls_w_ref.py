#!/usr/bin/env python3
"""Independent reference values for the concordance statistic.

Implements Kendall's W with the tie correction using nothing but plain
Python loops — no numpy, no scipy, and no code shared with the library
under test:

    R_j   = sum of ranks item j received
    S     = sum over items of (R_j - m(n+1)/2)^2
    T_i   = sum over tie groups in rater i's row of (t^3 - t)
    W     = 12 S / (m^2 (n^3 - n) - m * sum_i T_i)

For rows without ties the result is cross-checked against the identity
with the mean pairwise Spearman correlation, rho_bar = (m W - 1)/(m - 1),
computed from scratch as well.  Emits 50 seeded random rank matrices
(with ties) plus hand-made degenerate cases to
tests/oracles/kendalls_w.json.
"""

import json
import os
import random


def average_ranks(scores: list[float]) -> list[float]:
    """Rank 1 for the largest score; tied scores share the mean rank."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    ranks = [0.0] * len(scores)
    pos = 0
    while pos < len(order):
        end = pos
        while end + 1 < len(order) and scores[order[end + 1]] == scores[order[pos]]:
            end += 1
        mean_rank = (pos + 1 + end + 1) / 2.0
        for k in range(pos, end + 1):
            ranks[order[k]] = mean_rank
        pos = end + 1
    return ranks


def kendalls_w_direct(ranks: list[list[float]]) -> tuple[float, float]:
    """(W, chi-squared) by the direct tie-corrected formula."""
    m = len(ranks)
    n = len(ranks[0])
    column_sums = [sum(row[j] for row in ranks) for j in range(n)]
    mean_sum = m * (n + 1) / 2.0
    s = sum((r - mean_sum) ** 2 for r in column_sums)

    tie_term = 0.0
    for row in ranks:
        groups: dict[float, int] = {}
        for value in row:
            groups[value] = groups.get(value, 0) + 1
        tie_term += sum(t ** 3 - t for t in groups.values())

    denom = m * m * (n ** 3 - n) - m * tie_term
    w = 12.0 * s / denom if denom > 0 else 0.0
    chi2 = m * (n - 1) * w
    return w, chi2


def spearman_rho(a: list[float], b: list[float]) -> float:
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / (va * vb) ** 0.5


def cross_check_untied(ranks: list[list[float]], w: float) -> None:
    """For untied rows, W must match the mean pairwise Spearman."""
    m = len(ranks)
    rhos = []
    for i in range(m):
        for j in range(i + 1, m):
            rhos.append(spearman_rho(ranks[i], ranks[j]))
    rho_bar = sum(rhos) / len(rhos)
    w_from_rho = ((m - 1) * rho_bar + 1) / m
    assert abs(w - w_from_rho) < 1e-12, (w, w_from_rho)


def main() -> None:
    rng = random.Random(20260815)
    cases = []

    # Hand cases first: perfect agreement, perfect two-rater opposition,
    # and everything tied (zero denominator, defined as W = 0).
    perfect = [[1.0, 2.0, 3.0, 4.0]] * 3
    opposed = [[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]
    all_tied = [[1.5, 1.5], [1.5, 1.5]]
    for name, ranks in (("perfect", perfect), ("opposed", opposed), ("all_tied", all_tied)):
        w, chi2 = kendalls_w_direct(ranks)
        cases.append({"name": name, "ranks": ranks, "w": w, "chi_squared": chi2})
    assert cases[0]["w"] == 1.0
    assert cases[1]["w"] == 0.0
    assert cases[2]["w"] == 0.0

    for idx in range(50):
        m = rng.randint(2, 6)
        n = rng.randint(2, 7)
        # Integer scores over a small range force frequent ties.
        rows = []
        untied = True
        for _ in range(m):
            scores = [float(rng.randint(0, n)) for _ in range(n)]
            if len(set(scores)) != n:
                untied = False
            rows.append(average_ranks(scores))
        w, chi2 = kendalls_w_direct(rows)
        if untied:
            cross_check_untied(rows, w)
        cases.append({"name": f"random_{idx:02d}", "ranks": rows, "w": w, "chi_squared": chi2})

    out = os.path.join(
        os.path.dirname(__file__), "..", "..", "tests", "oracles", "kendalls_w.json"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(cases, fh, indent=2, sort_keys=True)
        fh.write("\n")
    tied = sum(1 for c in cases if "random" in c["name"])
    print(f"wrote {os.path.normpath(out)} ({len(cases)} cases, {tied} random)")


if __name__ == "__main__":
    main()
