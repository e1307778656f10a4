"""Composite Gamma-Lognormal fading machinery.

The composite law Z = Gamma(M, 1/M) * Lognormal(mu_hat, sigma_hat^2) has no
tractable density; its CDF and Laplace transform are approximated through a
Gauss-Hermite mixture over the lognormal factor, following the
self-normalising form (divide by the weight sum rather than sqrt(pi); the
two coincide as the node count grows).

Also hosts the truncated-Taylor ("jet") arithmetic used by the coverage
evaluator: the Gauss-Hermite Laplace transform is a finite sum of shifted
power functions, so its derivatives of any order are available in closed
form, and products/exponentials of such jets propagate exactly through the
outer quadratures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import gammainc

_MAX_GH = 64


@dataclass(frozen=True)
class GaussHermite:
    """Nodes/weights for the physicists' weight function exp(-x^2)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def count(self):
        return self.nodes.shape[0]

    @property
    def weight_sum(self):
        return float(self.weights.sum())


def hermite_rule(T) -> GaussHermite:
    if not 1 <= T <= _MAX_GH:
        raise ValueError(f"Gauss-Hermite node count must be in [1, {_MAX_GH}], got {T}")
    nodes, weights = hermgauss(T)
    return GaussHermite(nodes, weights)


@dataclass(frozen=True)
class CompositeGLParams:
    M: int
    mu_hat: float
    sigma_hat: float

    def __post_init__(self):
        if self.M < 1 or int(self.M) != self.M:
            raise ValueError("M must be an integer >= 1")

    @property
    def mean(self):
        # E{Z} = e^{mu_hat + sigma_hat^2/2}; the Gamma factor has unit mean
        return math.exp(self.mu_hat + 0.5 * self.sigma_hat**2)

    def shifted_rates(self, gh: GaussHermite):
        """Per-node rates a_t = M * exp(-(sqrt(2)*sigma_hat*nu_t + mu_hat))."""
        return self.M * np.exp(-(math.sqrt(2.0) * self.sigma_hat * gh.nodes + self.mu_hat))


def gl_cdf(z, glp: CompositeGLParams, gh: GaussHermite):
    """F(z) via the regularised lower incomplete gamma, node-averaged."""
    z = np.asarray(z, dtype=float)
    a = glp.shifted_rates(gh)
    vals = gammainc(glp.M, z[..., None] * a)
    return (vals * gh.weights).sum(axis=-1) / gh.weight_sum


def gl_laplace(s, glp: CompositeGLParams, gh: GaussHermite):
    """L(s) = E{e^{-sZ}} ~ sum_t w_t a_t^M / (s + a_t)^M / sum_t w_t."""
    s = np.asarray(s, dtype=float)
    a = glp.shifted_rates(gh)
    vals = (a / (s[..., None] + a)) ** glp.M
    return (vals * gh.weights).sum(axis=-1) / gh.weight_sum


def gl_one_minus_laplace(s, glp: CompositeGLParams, gh: GaussHermite):
    """1 - L(s), computed without cancellation for small s.

    1 - (1+s/a)^{-M} = -expm1(-M*log1p(s/a)) stays accurate down to s -> 0,
    where the result approaches s*E{Z}.
    """
    s = np.asarray(s, dtype=float)
    a = glp.shifted_rates(gh)
    vals = -np.expm1(-glp.M * np.log1p(s[..., None] / a))
    return (vals * gh.weights).sum(axis=-1) / gh.weight_sum


def gl_laplace_jet(s0, order, glp: CompositeGLParams, gh: GaussHermite):
    """Derivatives [L(s0), L'(s0), ..., L^(order)(s0)].

    Each mixture term is a_t^M (s+a_t)^{-M}, so the n-th derivative carries
    the rising factorial (M)_n and one more inverse power.
    """
    s0 = np.asarray(s0, dtype=float)
    a = glp.shifted_rates(gh)
    base = s0[..., None] + a
    out = []
    rising = 1.0
    for n in range(order + 1):
        if n > 0:
            rising *= glp.M + n - 1
        vals = a**glp.M * base ** (-(glp.M + n))
        coef = ((-1.0) ** n) * rising
        out.append(coef * (vals * gh.weights).sum(axis=-1) / gh.weight_sum)
    return np.stack(out, axis=0)


def sample_gl(glp: CompositeGLParams, rng, size=None):
    """Exact composite samples: Gamma(M, 1/M) * e^{mu_hat + sigma_hat*N(0,1)}."""
    g = rng.gamma(glp.M, 1.0 / glp.M, size)
    return g * np.exp(glp.mu_hat + glp.sigma_hat * rng.standard_normal(size))


class Taylor:
    """Truncated Taylor series with normalised coefficients c_n = f^(n)/n!.

    ``coef`` has shape (order+1, ...); the trailing axes broadcast through
    arithmetic, so a single jet object carries all quadrature nodes at once.
    """

    __slots__ = ("coef",)

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=float)

    @property
    def order(self):
        return self.coef.shape[0] - 1

    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value, dtype=float)
        coef = np.zeros((order + 1,) + value.shape)
        coef[0] = value
        return cls(coef)

    @classmethod
    def affine(cls, value, slope, order):
        """Jet of a function with value and first derivative; higher terms 0."""
        value = np.asarray(value, dtype=float)
        coef = np.zeros((order + 1,) + value.shape)
        coef[0] = value
        if order >= 1:
            coef[1] = slope
        return cls(coef)

    @classmethod
    def from_derivatives(cls, derivs):
        """Build from raw derivatives f^(n) stacked on axis 0."""
        derivs = np.asarray(derivs, dtype=float)
        fact = np.ones(derivs.shape[0])
        for n in range(2, derivs.shape[0]):
            fact[n] = fact[n - 1] * n
        return cls(derivs / fact.reshape((-1,) + (1,) * (derivs.ndim - 1)))

    def derivatives(self):
        fact = np.ones(self.coef.shape[0])
        for n in range(2, self.coef.shape[0]):
            fact[n] = fact[n - 1] * n
        return self.coef * fact.reshape((-1,) + (1,) * (self.coef.ndim - 1))

    def __add__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.coef + other.coef)
        coef = self.coef.copy()
        coef[0] = coef[0] + other
        return Taylor(coef)

    __radd__ = __add__

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.coef * other)
        n = self.coef.shape[0]
        shape = np.broadcast_shapes(self.coef.shape[1:], other.coef.shape[1:])
        out = np.zeros((n,) + shape)
        for k in range(n):
            for j in range(k + 1):
                out[k] += self.coef[j] * other.coef[k - j]
        return Taylor(out)

    __rmul__ = __mul__

    def exp(self):
        """exp of the jet: g_n = (1/n) sum_{k=1..n} k c_k g_{n-k}."""
        n = self.coef.shape[0]
        out = np.zeros_like(self.coef)
        out[0] = np.exp(self.coef[0])
        for m in range(1, n):
            acc = np.zeros_like(out[0])
            for k in range(1, m + 1):
                acc = acc + k * self.coef[k] * out[m - k]
            out[m] = acc / m
        return Taylor(out)

    def sum(self, axis):
        """Sum the trailing data axes (used to integrate coefficient-wise)."""
        return Taylor(self.coef.sum(axis=axis if axis < 0 else axis + 1))

    def weighted_sum(self, weights, axis=-1):
        return Taylor((self.coef * weights).sum(axis=axis if axis < 0 else axis + 1))

    def evaluate_poly(self, dx):
        """Evaluate sum_n c_n dx^n (Horner)."""
        acc = np.zeros_like(self.coef[-1])
        for c in self.coef[::-1]:
            acc = acc * dx + c
        return acc
