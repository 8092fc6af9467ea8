"""Direct-definition reference implementations in plain Python.

Deliberately loop-based and independent of the vectorized package code.
"""

import math


def mean(x):
    return math.fsum(x) / len(x)


def central_moment(x, k):
    mu = mean(x)
    return math.fsum((v - mu) ** k for v in x) / len(x)


def moments(x):
    m2 = central_moment(x, 2)
    if m2 == 0:
        return mean(x), 0.0, 0.0, 0.0
    return mean(x), math.sqrt(m2), central_moment(x, 3) / m2**1.5, central_moment(x, 4) / m2**2 - 3.0


def diff(x):
    return [b - a for a, b in zip(x, x[1:])]


def hjorth(x):
    var0 = central_moment(x, 2)
    if var0 == 0:
        return 0.0, 0.0, 0.0
    d1 = diff(x)
    var1 = central_moment(d1, 2)
    if var1 == 0:
        return var0, 0.0, 0.0
    var2 = central_moment(diff(d1), 2)
    mobility = math.sqrt(var1 / var0)
    return var0, mobility, math.sqrt(var2 / var1) / mobility


def shannon_entropy(x, bins=64):
    counts = [0] * bins
    for v in x:
        counts[min(max(int(math.floor(v * bins)), 0), bins - 1)] += 1
    n = len(x)
    return -math.fsum(c / n * math.log(c / n) for c in counts if c)


def permutation_entropy(x, order=3, delay=1):
    counts = {}
    span = (order - 1) * delay
    for i in range(len(x) - span):
        vals = [x[i + k * delay] for k in range(order)]
        pattern = tuple(sorted(range(order), key=lambda k: (vals[k], k)))
        counts[pattern] = counts.get(pattern, 0) + 1
    total = sum(counts.values())
    h = -math.fsum(c / total * math.log(c / total) for c in counts.values())
    return h / math.log(math.factorial(order))


def _chebyshev_match(x, i, j, length, r):
    for k in range(length):
        if abs(x[i + k] - x[j + k]) > r:
            return False
    return True


def _phi(x, m, r):
    n = len(x) - m + 1
    total = 0.0
    for i in range(n):
        c = sum(1 for j in range(n) if _chebyshev_match(x, i, j, m, r))
        total += math.log(c / n)
    return total / n


def approximate_entropy(x, m=2, r=None):
    if r is None:
        r = 0.2 * math.sqrt(central_moment(x, 2))
    return _phi(x, m, r) - _phi(x, m + 1, r)


def sample_entropy_counts(x, m=2, r=None):
    """(A, B): matching pairs i < j of length m+1 and m over N-m starts."""
    if r is None:
        r = 0.2 * math.sqrt(central_moment(x, 2))
    starts = len(x) - m
    a = b = 0
    for i in range(starts):
        for j in range(i + 1, starts):
            if _chebyshev_match(x, i, j, m, r):
                b += 1
                if abs(x[i + m] - x[j + m]) <= r:
                    a += 1
    return a, b


def sample_entropy(x, m=2, r=None):
    a, b = sample_entropy_counts(x, m, r)
    n = len(x)
    if a == 0 or b == 0:
        return math.log(n - m) + math.log(n - m - 1) - math.log(2)
    return -math.log(a / b)


def channel_features(x):
    x = [float(v) for v in x]
    if max(x) == min(x):
        return [x[0]] + [0.0] * 10
    mu, sd, sk, ku = moments(x)
    act, mob, comp = hjorth(x)
    return [mu, sd, sk, ku, act, mob, comp, permutation_entropy(x), shannon_entropy(x),
            approximate_entropy(x), sample_entropy(x)]


def auc_pairs(scores, labels):
    """Mann-Whitney statistic with half credit for ties, O(n^2)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def knn_label(points, labels, query, k):
    """Full sort by (distance, index); vote ties go to class 1."""
    dists = []
    for idx, p in enumerate(points):
        dists.append((math.fsum((a - b) ** 2 for a, b in zip(p, query)), idx))
    dists.sort()
    ones = sum(labels[idx] for _, idx in dists[:k])
    return 1 if 2 * ones >= k else 0
