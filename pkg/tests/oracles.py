"""Slow, obviously-correct reference implementations.

None of these share code with the package; they exist only to check it.
"""
import cmath
import math

import numpy as np


def naive_window_stats(series, n, stat):
    x = [float(v) for v in series]
    length = len(x)
    out = []
    for w in range(n):
        lo = (w * length) // n
        hi = ((w + 1) * length) // n
        win = x[lo:hi]
        mean = sum(win) / len(win)
        if stat == "mean":
            out.append(mean)
        else:
            out.append(math.sqrt(sum((v - mean) ** 2 for v in win) / len(win)))
    return out


def naive_dft(series):
    """O(L^2) unnormalized DFT over all L bins."""
    x = [float(v) for v in series]
    length = len(x)
    return [
        sum(x[t] * cmath.exp(-2j * math.pi * k * t / length) for t in range(length))
        for k in range(length)
    ]


def naive_dft_matrix(series):
    """Same DFT as a dense matrix product; used where L is too large for pure Python loops."""
    x = np.asarray(series, dtype=np.float64)
    length = x.size
    k = np.arange(length)
    # reduce k*t mod L in exact integer arithmetic before forming the angle
    phase = np.outer(k, k) % length
    return np.exp(-2j * np.pi * phase / length) @ x


def naive_fourier_top_n(series, n, dft=naive_dft):
    spectrum = dft(series)
    length = len(spectrum)
    mags = [(abs(spectrum[k]), k) for k in range(length // 2 + 1)]
    mags.sort(key=lambda mk: (-mk[0], mk[1]))
    out = [m for m, _ in mags[:n]]
    return out + [0.0] * (n - len(out))


def brute_force_knn(train, labels, queries, k):
    train = [list(map(float, r)) for r in train]
    out = []
    for q in queries:
        dists = []
        for i, row in enumerate(train):
            dists.append((math.sqrt(sum((a - b) ** 2 for a, b in zip(row, q))), i))
        dists.sort()
        chosen = dists[:k]
        votes = {}
        summed = {}
        for d, i in chosen:
            c = int(labels[i])
            votes[c] = votes.get(c, 0) + 1
            summed[c] = summed.get(c, 0.0) + d
        best = max(votes.values())
        tied = [c for c in votes if votes[c] == best]
        tied.sort(key=lambda c: (summed[c], c))
        out.append(tied[0])
    return out


def covariance_eigenvalues(x):
    """Eigenvalues of the sample covariance, descending, via a symmetric eigensolver."""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    return np.sort(np.linalg.eigvalsh(cov))[::-1]


def looped_window_stats(series, n, stat):
    """Window-by-window two-pass loop (numpy only inside a single window)."""
    x = np.asarray(series, dtype=np.float64)
    length = x.size
    out = np.empty(n)
    for w in range(n):
        win = x[(w * length) // n : ((w + 1) * length) // n]
        mean = win.sum() / win.size
        out[w] = mean if stat == "mean" else np.sqrt(((win - mean) ** 2).sum() / win.size)
    return out
