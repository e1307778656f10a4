"""Scalar beamforming-gain laws for the subarray hybrid architecture.

Quantized virtual angles make the steering-vector inner product three-valued
per end: 1 when azimuth and elevation both align, a floor g when both miss,
and an intermediate ghat when exactly one misses. Interfering streams draw
their alignment independently, which turns the per-link interference gain
into a small discrete mixture (transmit multinomial over streams crossed
with the three receive cases).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ArrayGeometry

_SIN = math.sin(0.244)


@dataclass(frozen=True)
class GainDistribution:
    """Discrete beamforming-gain law: linear power gains with probabilities."""

    gains: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.gains.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def mean(self):
        return float(np.dot(self.gains, self.probs))

    def __len__(self):
        return self.gains.shape[0]


def sidelobe_gains(geom: ArrayGeometry):
    """(g, ghat): both-axes-miss and one-axis-miss inner-product magnitudes."""
    g = 1.0 / (_SIN**2 * geom.nx * geom.ny)
    ghat = 1.0 / (_SIN * geom.nx)
    return g, ghat


def zf_penalty_prob(n_total, subarrays):
    """Success probability of the zero-forcing penalty Bernoulli."""
    if subarrays < 1:
        raise ValueError("subarray count must be >= 1")
    return (1.0 - 1.0 / n_total) ** (subarrays - 1)


def _axis_case_probs(geom: ArrayGeometry):
    """P(full align), P(both axes miss), P(one axis misses)."""
    p_full = 1.0 / geom.n_total
    p_both = (1.0 - 1.0 / geom.nx) * (1.0 - 1.0 / geom.ny)
    p_one = 1.0 / geom.nx + 1.0 / geom.ny - 2.0 / geom.n_total
    return p_full, p_both, p_one


def gain_distribution(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, n_streams) -> GainDistribution:
    """Interference-gain mixture for one (transmitter, receiver) pair.

    Enumerates (p, q): p streams fully aligned, q with both transmit axes
    missed, the rest with one axis missed, then crosses with the three
    receiver cases. Atoms with equal gain are merged; output sorted by gain.
    """
    if n_streams < 1:
        raise ValueError("n_streams must be >= 1")
    g_t, ghat_t = sidelobe_gains(tx_geom)
    g_r, ghat_r = sidelobe_gains(rx_geom)
    tf, tb, to = _axis_case_probs(tx_geom)
    rf, rb, ro = _axis_case_probs(rx_geom)

    gains, probs = [], []
    n = n_streams
    for p in range(n + 1):
        for q in range(n - p + 1):
            rem = n - p - q
            mult = math.comb(n, p) * math.comb(n - p, q)
            pr_tx = mult * tf**p * tb**q * to**rem
            if pr_tx == 0.0:
                continue
            base = p + q * g_t**2 + rem * ghat_t**2
            for rx_mult, rx_pr in ((1.0, rf), (g_r**2, rb), (ghat_r**2, ro)):
                if rx_pr == 0.0:
                    continue
                gains.append(rx_mult * base)
                probs.append(pr_tx * rx_pr)

    gains = np.asarray(gains)
    probs = np.asarray(probs)
    order = np.argsort(gains)
    gains, probs = gains[order], probs[order]
    # merge equal gains (1e-12 relative)
    out_g, out_p = [gains[0]], [probs[0]]
    for g, pr in zip(gains[1:], probs[1:]):
        if abs(g - out_g[-1]) <= 1e-12 * max(abs(g), abs(out_g[-1])):
            out_p[-1] += pr
        else:
            out_g.append(g)
            out_p.append(pr)
    return GainDistribution(np.asarray(out_g), np.asarray(out_p))


def sample_gain(dist: GainDistribution, rng, size=None):
    """Draw from the discrete mixture (inverse-CDF on the sorted atoms)."""
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    u = rng.random(size)
    return dist.gains[np.searchsorted(cdf, u, side="right")]


def angle_sampled_gain(tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, n_streams, rng, size=None):
    """Ground-truth sampler: draw quantized virtual angles uniformly and
    classify each end (per stream at the transmitter) into full / one-axis /
    both-axes alignment. Used by the Monte Carlo high-fidelity mode."""
    shape = () if size is None else (size if isinstance(size, tuple) else (size,))
    g_t, ghat_t = sidelobe_gains(tx_geom)
    g_r, ghat_r = sidelobe_gains(rx_geom)

    def _end_factor(geom, g, ghat, per_stream):
        n = shape + ((n_streams,) if per_stream else ())
        az = rng.integers(0, geom.nx, size=n) == rng.integers(0, geom.nx, size=n)
        el = rng.integers(0, geom.ny, size=n) == rng.integers(0, geom.ny, size=n)
        val = np.where(az & el, 1.0, np.where(~az & ~el, g**2, ghat**2))
        return val.sum(axis=-1) if per_stream else val

    tx = _end_factor(tx_geom, g_t, ghat_t, True)
    rx = _end_factor(rx_geom, g_r, ghat_r, False)
    out = tx * rx
    return float(out) if size is None else out
