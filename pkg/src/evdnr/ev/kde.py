"""Gaussian kernel density models for charging features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels

BANDWIDTH_FLOOR = 1e-3

# support modes
WRAP = "wrap"  # circular, e.g. start time modulo 1440 min
POSITIVE = "positive"  # rejection of non-positive draws, optional upper cap
FREE = "free"


@dataclass(frozen=True)
class KdeModel:
    feature: str
    samples: np.ndarray
    bandwidth: float
    support: str = FREE
    upper: float = np.inf  # period for WRAP, cap for POSITIVE

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if len(self.samples) < 2:
            raise ValueError("a KDE needs at least two samples")

    def pdf(self, grid) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        data = np.asarray(self.samples, dtype=float)
        if self.support == WRAP:
            return sum(kernels.kde_pdf(grid, data + k * self.upper, self.bandwidth) for k in (-1, 0, 1))
        return kernels.kde_pdf(grid, data, self.bandwidth)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "bandwidth": self.bandwidth, "support": self.support,
                "upper": None if not np.isfinite(self.upper) else self.upper, "n": int(len(self.samples))}


def silverman_bandwidth(samples) -> float:
    """0.9 min(sd, IQR/1.34) n^(-1/5), floored at ``BANDWIDTH_FLOOR``."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = max(sd, (q75 - q25) / 1.34)
    return max(0.9 * spread * n ** -0.2, BANDWIDTH_FLOOR)


def fit_kde(samples, feature: str = "x", bandwidth_rule="silverman", *, support: str = FREE,
            upper: float = np.inf) -> KdeModel:
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("a KDE needs at least two samples")
    if bandwidth_rule == "silverman":
        bw = silverman_bandwidth(x)
    elif callable(bandwidth_rule):
        bw = max(float(bandwidth_rule(x)), BANDWIDTH_FLOOR)
    else:
        bw = max(float(bandwidth_rule), BANDWIDTH_FLOOR)
    return KdeModel(feature, x.copy(), bw, support, upper)


def sample_kde(model: KdeModel, n: int, seed=None, *, index=None) -> np.ndarray:
    """Draw ``n`` values: a random data point plus Gaussian kernel noise.

    ``seed`` is an int or a ``numpy.random.Generator``.  ``index`` fixes the
    data points (length ``n``), which lets several features of the same event
    be drawn jointly.  Support rules: WRAP folds modulo ``upper``; POSITIVE
    redraws the noise until the value lies in ``(0, upper]``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n == 0:
        return np.zeros(0)
    data = model.samples
    idx = rng.integers(0, data.size, n) if index is None else np.asarray(index)
    centre = data[idx]
    out = centre + model.bandwidth * rng.standard_normal(n)
    if model.support == WRAP:
        return np.mod(out, model.upper)
    if model.support == POSITIVE:
        bad = (out <= 0) | (out > model.upper)
        for _ in range(1000):
            if not bad.any():
                break
            out[bad] = centre[bad] + model.bandwidth * rng.standard_normal(int(bad.sum()))
            bad = (out <= 0) | (out > model.upper)
        if bad.any():
            # the data point itself is inside the support only if it is valid
            out[bad] = np.clip(centre[bad], np.nextafter(0.0, 1.0), model.upper)
    return out
