"""Independent brute-force implementations used to check the metric code.

These deliberately avoid the package's code paths: contingency tables come
from Counter, expected mutual information from exact rational hypergeometric
summation, and the Rand statistics from an O(n^2) loop over point pairs.
"""

import math
from collections import Counter
from fractions import Fraction


def mutual_information_oracle(a, b) -> float:
    n = len(a)
    joint = Counter(zip(a, b))
    ca, cb = Counter(a), Counter(b)
    total = 0.0
    for (i, j), nij in joint.items():
        total += (nij / n) * math.log(n * nij / (ca[i] * cb[j]))
    return total


def entropy_oracle(labels) -> float:
    n = len(labels)
    return -sum((c / n) * math.log(c / n) for c in Counter(labels).values())


def expected_mi_oracle(a, b) -> float:
    """Exact E[MI] under the hypergeometric model, rationals throughout."""
    n = len(a)
    ca, cb = Counter(a), Counter(b)
    total = 0.0
    for ai in ca.values():
        for bj in cb.values():
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for nij in range(lo, hi + 1):
                p = Fraction(
                    math.factorial(ai) * math.factorial(bj)
                    * math.factorial(n - ai) * math.factorial(n - bj),
                    math.factorial(n) * math.factorial(nij)
                    * math.factorial(ai - nij) * math.factorial(bj - nij)
                    * math.factorial(n - ai - bj + nij))
                total += (nij / n) * math.log(n * nij / (ai * bj)) * float(p)
    return total


def ami_oracle(a, b) -> float:
    ha, hb = entropy_oracle(a), entropy_oracle(b)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if len(set(a)) == len(a) and len(set(b)) == len(b):
        return 1.0  # both all-singletons: identical partitions, normalizer 0
    mi = mutual_information_oracle(a, b)
    emi = expected_mi_oracle(a, b)
    return (mi - emi) / ((ha + hb) / 2 - emi)


def ari_oracle(a, b) -> float:
    """Pair-counting over all O(n^2) point pairs."""
    n = len(a)
    n11 = n00 = n10 = n01 = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                n11 += 1
            elif same_a:
                n10 += 1
            elif same_b:
                n01 += 1
            else:
                n00 += 1
    denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00)
    if denom == 0:
        return 1.0
    return 2.0 * (n11 * n00 - n10 * n01) / denom


def average_precision_oracle(scores, labels) -> float:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    positives = sum(labels)
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if labels[idx]:
            hits += 1
            total += hits / rank
    return total / positives
