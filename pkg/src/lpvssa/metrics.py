"""Fit metrics for output predictions.

Variances use the population convention (divide by the number of
samples). Multi-output paths are scored per channel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y_hat.ndim == 1:
        y_hat = y_hat[:, None]
    if y.shape != y_hat.shape:
        raise ShapeError(f"paths differ in shape: {y.shape} vs {y_hat.shape}")
    if y.shape[0] < 2:
        raise ValidationError("need at least two samples")
    return y, y_hat


def bfr(y, y_hat):
    """Best fit rate in percent, per output channel.

    max(1 - ||y - y_hat|| / ||y - mean(y)||, 0) * 100.
    """
    y, y_hat = _pair(y, y_hat)
    den = np.sum((y - y.mean(axis=0)) ** 2, axis=0)
    if np.any(den == 0):
        raise ValidationError("output is constant; best fit rate is undefined")
    num = np.sum((y - y_hat) ** 2, axis=0)
    return np.maximum(1.0 - np.sqrt(num / den), 0.0) * 100.0


def vaf(y, y_hat):
    """Variance accounted for in percent, per output channel."""
    y, y_hat = _pair(y, y_hat)
    den = np.var(y, axis=0)
    if np.any(den == 0):
        raise ValidationError("output is constant; variance accounted for is undefined")
    return np.maximum(1.0 - np.var(y - y_hat, axis=0) / den, 0.0) * 100.0


def snr_db(y, e):
    """Signal-to-noise ratio 10 log10(sum (y - e)^2 / sum e^2).

    Returns +inf for a zero noise path and -inf when y equals e.
    """
    y, e = _pair(y, e)
    noise = float(np.sum(e**2))
    signal = float(np.sum((y - e) ** 2))
    if noise == 0.0:
        return float("inf")
    if signal == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(signal / noise))


@dataclass(frozen=True)
class FitReport:
    bfr: tuple
    vaf: tuple
    snr_db: float = None

    @property
    def mean_bfr(self):
        return float(np.mean(self.bfr))

    @property
    def mean_vaf(self):
        return float(np.mean(self.vaf))

    @classmethod
    def from_paths(cls, y, y_hat, noise=None):
        snr = None if noise is None else snr_db(y, noise)
        return cls(tuple(float(b) for b in bfr(y, y_hat)), tuple(float(v) for v in vaf(y, y_hat)), snr)

    def to_dict(self):
        d = {"bfr": list(self.bfr), "vaf": list(self.vaf), "mean_bfr": self.mean_bfr, "mean_vaf": self.mean_vaf}
        if self.snr_db is not None:
            d["snr_db"] = self.snr_db if np.isfinite(self.snr_db) else str(self.snr_db)
        return d
