"""Tracy-Widom (beta=1) distribution from the bundled cdf table.

The table ``data/tw1_cdf.txt`` tabulates the cdf on a 0.01 grid over
[-10, 9]; ``tools/make_tw1_table.py`` regenerates it. Between grid points the
cdf is a monotone cubic (PCHIP) interpolant. Below the grid the cdf is taken
as 0 (true value < 5e-19) and above it as 1 (true tail < 4.1e-10).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import NumericError, ParameterError

TABLE_NAME = "tw1_cdf.txt"


@dataclass(frozen=True, eq=False)
class Tw1Distribution:
    grid: np.ndarray
    cdf_values: np.ndarray
    mean: float
    sd: float
    version: int
    sha256: str
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        x, f = self.grid, self.cdf_values
        if x.ndim != 1 or x.shape != f.shape or x.size < 4:
            raise NumericError("malformed Tracy-Widom table")
        if not (np.all(np.diff(x) > 0) and np.all(np.diff(f) > 0)):
            raise NumericError("Tracy-Widom table must be strictly increasing")
        object.__setattr__(self, "_interp", PchipInterpolator(x, f, extrapolate=False))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)):
            raise ParameterError("cdf argument is NaN")
        out = self._interp(np.clip(x, self.grid[0], self.grid[-1]))
        out = np.where(x < self.grid[0], 0.0, np.where(x > self.grid[-1], 1.0, out))
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        out = np.where(inside, self._interp.derivative()(np.clip(x, self.grid[0], self.grid[-1])), 0.0)
        return out if out.ndim else float(out)

    def quantile(self, p):
        """Inverse cdf; ``p`` must lie within the tabulated probability range."""
        p_arr = np.asarray(p, dtype=float)
        flat = p_arr.ravel()
        if np.any(~(flat > 0) | ~(flat < 1)):
            raise ParameterError(f"quantile level must lie in (0, 1), got {p}")
        f = self.cdf_values
        if np.any(flat < f[0]) or np.any(flat > f[-1]):
            raise ParameterError(
                f"quantile level {p} outside tabulated range [{f[0]:.3g}, 1 - {1 - f[-1]:.3g}]"
            )
        out = np.empty_like(flat)
        for idx, q in enumerate(flat):
            k = int(np.searchsorted(f, q, side="left"))
            if f[min(k, f.size - 1)] == q:
                out[idx] = self.grid[k]
                continue
            lo, hi = self.grid[k - 1], self.grid[k]
            out[idx] = brentq(lambda t: float(self._interp(t)) - q, lo, hi, xtol=1e-14, rtol=1e-15)
        return out.reshape(p_arr.shape) if p_arr.ndim else float(out[0])

    def upper_quantile(self, level: float) -> float:
        """``t(level)``: the point with upper-tail probability ``level``."""
        return self.quantile(1.0 - level)


def _parse_table(text: str) -> tuple[dict, np.ndarray]:
    meta = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append([float(v) for v in line.split()])
    return meta, np.array(rows)


@lru_cache(maxsize=1)
def load_tw1() -> Tw1Distribution:
    """Load and checksum-verify the bundled table."""
    pkg = resources.files("sbmgof") / "data"
    text = (pkg / TABLE_NAME).read_text()
    expected = (pkg / "tw1_cdf.sha256").read_text().split()[0]
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != expected:
        raise NumericError(f"Tracy-Widom table checksum mismatch: {digest} != {expected}")
    meta, data = _parse_table(text)
    return Tw1Distribution(
        grid=data[:, 0],
        cdf_values=data[:, 1],
        mean=float(meta["mean"]),
        sd=float(meta["sd"]),
        version=int(meta["version"]),
        sha256=digest,
    )


def tw1_cdf(x):
    return load_tw1().cdf(x)


def tw1_quantile(p):
    return load_tw1().quantile(p)


def tw1_moments() -> tuple[float, float]:
    """``(mean, standard deviation)`` of TW1."""
    tw = load_tw1()
    return tw.mean, tw.sd
