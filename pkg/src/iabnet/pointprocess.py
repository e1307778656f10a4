"""Samplers and analytic quantities for the PPP and Matern type-II hard-core
process on the analysis disk.

Conventions: the analysis region is a disk of radius ``region_radius``
centred at the origin. Hard-core patterns are generated from a parent PPP on
a guard-banded disk (radius + xi) so type-II thinning near the boundary does
not inflate the retained density, then clipped back to the region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PointPattern:
    points: np.ndarray          # (n, 2) float64, meters
    kind: str                   # "PPP" | "MHCPP2"
    region_radius: float
    marks: np.ndarray | None = None

    def __post_init__(self):
        self.points.setflags(write=False)
        if self.marks is not None:
            self.marks.setflags(write=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def radii(self):
        return np.hypot(self.points[:, 0], self.points[:, 1])


@dataclass(frozen=True)
class MhcppSpec:
    """Parent density + hard-core distance with the derived retention."""

    parent_density: float
    xi: float

    @property
    def retention(self):
        return retention_probability(self.xi, self.parent_density)

    @property
    def density(self):
        return self.retention * self.parent_density

    @classmethod
    def from_target_density(cls, lambda_m, xi):
        return cls(parent_density_for_target(lambda_m, xi), xi)


def spawn_rngs(seed, n):
    """n independent generators derived from a master seed.

    Streams come from numpy's SeedSequence spawning, so (seed, index)
    deterministically identifies a stream regardless of how many workers
    consume them.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _uniform_disk(n, radius, rng):
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_ppp(density, region_radius, rng) -> PointPattern:
    """Homogeneous PPP on the disk: Poisson count, i.i.d. uniform positions."""
    if density < 0:
        raise ValueError("density must be nonnegative")
    n = rng.poisson(density * math.pi * region_radius**2)
    return PointPattern(_uniform_disk(n, region_radius, rng), "PPP", region_radius)


def retention_probability(xi, parent_density):
    """Type-II retention rho = (1 - exp(-pi xi^2 lam)) / (pi xi^2 lam).

    xi = 0 degenerates to 1 (no thinning); evaluated with expm1 so the small
    argument limit is exact.
    """
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    if parent_density <= 0:
        raise ValueError("parent density must be positive")
    x = math.pi * xi * xi * parent_density
    if x == 0.0:
        return 1.0
    return -math.expm1(-x) / x


def parent_density_for_target(lambda_m, xi):
    """Invert rho * parent = lambda_m so the target retained density is hit.

    The defining relation (1 - e^{-pi xi^2 parent}) / (pi xi^2) = lambda_m
    solves in closed form, parent = -log(1 - pi xi^2 lambda_m) / (pi xi^2),
    which is exact whenever the target is feasible.
    """
    if xi == 0:
        return lambda_m
    a = math.pi * xi * xi
    if lambda_m >= 1.0 / a:
        raise ValueError(
            "hard-core density infeasible: lambda_m=%g >= 1/(pi*xi^2)=%g"
            % (lambda_m, 1.0 / a)
        )
    return -math.log1p(-a * lambda_m) / a


def sample_mhcpp2(spec: MhcppSpec, region_radius, rng) -> PointPattern:
    """Matern type-II sample on the disk, guard-banded against edge bias.

    A point of the parent PPP is retained iff no parent point within xi
    carries a smaller mark (mark ties, a null event, break by index).
    """
    guard = region_radius + spec.xi
    n = rng.poisson(spec.parent_density * math.pi * guard**2)
    pts = _uniform_disk(n, guard, rng)
    marks = rng.random(n)
    if spec.xi > 0 and n:
        seg = np.array([0, n], dtype=np.int64)
        keep = kernels.thin_hardcore(pts[:, 0], pts[:, 1], marks, seg, spec.xi) != 0
    else:
        keep = np.ones(n, dtype=bool)
    inside = np.hypot(pts[:, 0], pts[:, 1]) <= region_radius
    sel = keep & inside
    return PointPattern(pts[sel], "MHCPP2", region_radius, marks=marks[sel])


def palm_thinning_probability(r0, xi, parent_density):
    """Retention probability of a parent point at distance r0 from a point
    already known to be retained (conditional thinning under type-II marks).

    Piecewise: 0 inside the hard core; for xi <= r0 < 2*xi the two exclusion
    disks overlap and the lens area kappa enters; beyond 2*xi the points are
    independent and the plain retention applies.
    """
    r0 = np.asarray(r0, dtype=float)
    if parent_density <= 0:
        raise ValueError("parent density must be positive")
    if xi == 0:
        return np.ones_like(r0) if r0.shape else 1.0
    lam = parent_density
    rho = retention_probability(xi, lam)
    out = np.zeros(np.broadcast(r0).shape, dtype=float)
    out = np.where(r0 >= 2 * xi, rho, out)
    mid = (r0 >= xi) & (r0 < 2 * xi)
    if np.any(mid):
        r = np.where(mid, r0, 1.5 * xi)  # dummy value outside branch
        kappa = (
            2 * math.pi * xi**2
            - 2 * xi**2 * np.arccos(r / (2 * xi))
            + r * np.sqrt(xi**2 - r**2 / 4.0)
        )
        disk = math.pi * xi**2
        val = (2.0 / (lam * (kappa - disk))) * (
            1.0 - disk * lam * (-np.expm1(-lam * kappa)) / (lam * kappa * (-math.expm1(-lam * disk)))
        )
        out = np.where(mid, val, out)
    return out if out.shape else float(out)
