"""Binning and jackknife error bars for Markov chain time series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_BINS = 16


@dataclass
class Estimate:
    """A Monte Carlo mean with its standard error."""

    name: str
    value: float
    stderr: float
    n_samples: int
    info: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.stderr


def bin_series(series, bin_size):
    """Means of consecutive complete bins; ``series`` has samples on axis 0."""
    x = np.asarray(series, dtype=np.float64)
    nb = len(x) // bin_size
    return x[: nb * bin_size].reshape((nb, bin_size) + x.shape[1:]).mean(axis=1)


def pooled_bins(chains, bin_size):
    """Bin every chain separately and concatenate the bins."""
    return np.concatenate([bin_series(c, bin_size) for c in chains], axis=0)


def choose_bin_size(chains, min_bins: int = MIN_BINS) -> int:
    """Largest-error bin size among the doublings that keep ``min_bins`` bins.

    The standard error of the mean grows with bin size until bins exceed the
    autocorrelation time, then flattens; taking the largest value seen is
    the conservative reading of that plateau.
    """
    n_min = min(len(c) for c in chains)
    total = sum(len(c) for c in chains)
    if total < min_bins:
        raise ValueError(f"need at least {min_bins} samples for error bars, got {total}")
    best, best_err, b = 1, -1.0, 1
    while True:
        bins = pooled_bins(chains, b)
        if len(bins) < min_bins:
            break
        err = np.atleast_1d(bins.std(axis=0, ddof=1)).max() / np.sqrt(len(bins))
        if err > best_err:
            best, best_err = b, err
        if b * 2 > n_min:
            break
        b *= 2
    return best


def mean_and_error(chains, bin_size=None):
    """Pooled mean and binned standard error (per column for 2D series)."""
    chains = [np.asarray(c, dtype=np.float64) for c in chains]
    if bin_size is None:
        bin_size = choose_bin_size(chains)
    bins = pooled_bins(chains, bin_size)
    if len(bins) < MIN_BINS:
        raise ValueError("fewer than 16 bins")
    allx = np.concatenate(chains, axis=0)
    return allx.mean(axis=0), bins.std(axis=0, ddof=1) / np.sqrt(len(bins))


def jackknife(bins, func):
    """Jackknife value and error of ``func(mean over bins)``.

    ``bins`` has shape (n_bins, k); ``func`` maps a length-k mean vector to
    a scalar or array.
    """
    bins = np.asarray(bins, dtype=np.float64)
    n = len(bins)
    if n < 2:
        raise ValueError("jackknife needs at least 2 bins")
    total = bins.sum(axis=0)
    full = np.asarray(func(total / n))
    leave = np.array([func((total - bins[i]) / (n - 1)) for i in range(n)])
    err = np.sqrt((n - 1) / n * ((leave - leave.mean(axis=0)) ** 2).sum(axis=0))
    return full, err


class Accumulator:
    """Streaming bin sums with a fixed base bin size.

    ``merge`` appends another accumulator's complete bins after this one's,
    so merging is associative. Samples of an unfinished bin are kept for
    the mean and dropped from error analysis.
    """

    def __init__(self, bin_size: int = 1):
        if bin_size < 1:
            raise ValueError("bin size must be >= 1")
        self.bin_size = bin_size
        self.bins: list[float] = []
        self.partial_sum = 0.0
        self.partial_n = 0
        self.total = 0.0
        self.count = 0

    def add(self, x):
        for v in np.atleast_1d(np.asarray(x, dtype=np.float64)):
            self.total += v
            self.count += 1
            self.partial_sum += v
            self.partial_n += 1
            if self.partial_n == self.bin_size:
                self.bins.append(self.partial_sum / self.bin_size)
                self.partial_sum, self.partial_n = 0.0, 0
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        if other.bin_size != self.bin_size:
            raise ValueError("bin sizes differ")
        out = Accumulator(self.bin_size)
        out.bins = self.bins + other.bins
        out.partial_sum = self.partial_sum + other.partial_sum
        out.partial_n = self.partial_n + other.partial_n
        out.total = self.total + other.total
        out.count = self.count + other.count
        return out

    @property
    def mean(self):
        return self.total / self.count if self.count else float("nan")

    @property
    def stderr(self):
        b = np.asarray(self.bins)
        if len(b) < MIN_BINS:
            raise ValueError("fewer than 16 complete bins")
        # re-bin by doubling as long as 16 bins remain, keep the largest error
        best = b.std(ddof=1) / np.sqrt(len(b))
        while len(b) // 2 >= MIN_BINS:
            b = b[: len(b) // 2 * 2].reshape(-1, 2).mean(axis=1)
            best = max(best, b.std(ddof=1) / np.sqrt(len(b)))
        return float(best)
