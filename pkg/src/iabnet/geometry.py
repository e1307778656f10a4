"""Blockage splitting, contact-distance laws, association probabilities and
serving-distance densities.

Contact laws: LoS/NLoS IAB-node processes are inhomogeneous PPPs with the
blockage-thinned densities, whose void integrals close in elementary form;
the gNB process (hard-core) uses the piecewise approximation with the
quadratic branch up to xi/2 and an exponential branch with empirical power
rho_exp beyond.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .config import LN10, LinkClass, SystemParams

_TAIL = 1e-13  # survival level treated as an effective integration endpoint


def p_los(r, eps):
    """LoS probability e^{-eps r}; the NLoS share is the complement."""
    return np.exp(-eps * np.asarray(r, dtype=float))


@dataclass(frozen=True)
class AssociationResult:
    A_m: float
    A_sL: float
    A_sN: float

    @property
    def total(self):
        return self.A_m + self.A_sL + self.A_sN

    def of(self, cls: LinkClass):
        return {LinkClass.GNB: self.A_m, LinkClass.IAB_LOS: self.A_sL,
                LinkClass.IAB_NLOS: self.A_sN}[cls]


def _void_integral_los(r, lambda_s, eps):
    """Integral of 2 pi x lambda_s e^{-eps x} over [0, r]."""
    r = np.asarray(r, dtype=float)
    if eps == 0.0:
        return math.pi * lambda_s * r**2
    return 2.0 * math.pi * lambda_s * (1.0 - np.exp(-eps * r) * (1.0 + eps * r)) / eps**2


def contact_cdf_ppp(r, lambda_s, eps, los):
    """CDF of the distance to the nearest LoS (or NLoS) IAB-node."""
    r = np.asarray(r, dtype=float)
    v_los = _void_integral_los(r, lambda_s, eps)
    v = v_los if los else math.pi * lambda_s * r**2 - v_los
    return -np.expm1(-v)


def contact_pdf_ppp(r, lambda_s, eps, los):
    r = np.asarray(r, dtype=float)
    v_los = _void_integral_los(r, lambda_s, eps)
    pl = np.exp(-eps * r)
    if los:
        return 2.0 * math.pi * lambda_s * r * pl * np.exp(-v_los)
    v = math.pi * lambda_s * r**2 - v_los
    return 2.0 * math.pi * lambda_s * r * (1.0 - pl) * np.exp(-v)


def rho_exponent(lambda_m, xi):
    """Empirical exponent of the hard-core contact law's outer branch."""
    x = lambda_m * math.pi * xi**2
    return 0.3686 * x**2 + 0.0985 * x + 2.0


def contact_cdf_mhcpp(r, lambda_m, xi):
    """Piecewise CDF of UE-to-nearest-gNB distance (hard-core deployment)."""
    r = np.asarray(r, dtype=float)
    if xi == 0.0:
        return -np.expm1(-math.pi * lambda_m * r**2)
    inner = math.pi * lambda_m * r**2
    ve = rho_exponent(lambda_m, xi)
    c = 4.0 - math.pi * lambda_m * xi**2
    expo = 2.0 * math.pi * lambda_m * xi**2 * (1.0 - (2.0 * np.maximum(r, xi / 2) / xi) ** ve) / (ve * c)
    outer = 1.0 - (c / 4.0) * np.exp(expo)
    return np.where(r <= xi / 2, inner, outer)


def contact_pdf_mhcpp(r, lambda_m, xi):
    r = np.asarray(r, dtype=float)
    if xi == 0.0:
        return 2.0 * math.pi * lambda_m * r * np.exp(-math.pi * lambda_m * r**2)
    inner = 2.0 * math.pi * lambda_m * r
    ve = rho_exponent(lambda_m, xi)
    c = 4.0 - math.pi * lambda_m * xi**2
    rr = np.maximum(r, xi / 2)
    expo = 2.0 * math.pi * lambda_m * xi**2 * (1.0 - (2.0 * rr / xi) ** ve) / (ve * c)
    outer = 2.0 * math.pi * lambda_m * rr * (2.0 * rr / xi) ** (ve - 2.0) * np.exp(expo)
    return np.where(r <= xi / 2, inner, outer)


def delta_constants(params: SystemParams) -> dict:
    """Boundary-scaling constants of the biased mean-power comparisons.

    delta_{i,1}: IAB(i)-vs-gNB boundary in the gNB-distance coordinate;
    delta_{i,2}: IAB(i)-vs-IAB(j) boundary; delta_i: gNB-vs-IAB(i). The
    shadowing exponentials carry the lognormal mean offsets per class.
    """
    p = params
    power_ratio = (p.P_m * p.n_tx_gnb * p.N_s**2) / (p.P_s * p.n_tx_iab * p.N_m**2 * p.bias_ratio)

    def shad(z):
        return (0.1 * z * LN10) ** 2

    out = {}
    for i, (zi, ai) in (("L", (p.zeta_sL, p.alpha_sL)), ("N", (p.zeta_sN, p.alpha_sN))):
        j_z = p.zeta_sN if i == "L" else p.zeta_sL
        j_a = p.alpha_sN if i == "L" else p.alpha_sL
        out[f"delta_{i}1"] = power_ratio ** (1.0 / p.alpha_m) * math.exp(
            (shad(p.zeta_m) - shad(zi)) / (2.0 * p.alpha_m)
        )
        out[f"delta_{i}2"] = math.exp((shad(j_z) - shad(zi)) / (2.0 * j_a))
        out[f"delta_{i}"] = (1.0 / power_ratio) ** (1.0 / ai) * math.exp(
            (shad(zi) - shad(p.zeta_m)) / (2.0 * ai)
        )
    return out


def mean_biased_power(params: SystemParams, cls: LinkClass, r):
    """Long-term averaged biased received-desired-signal power at distance r.

    Used by the association rule; the composite-fading mean is
    e^{mu_hat + sigma_hat^2/2} per class.
    """
    p = params
    if cls is LinkClass.GNB:
        pref = p.P_m * p.n_tx_gnb * p.n_rx_ue**2 / (p.K * p.N_m**2)
        alpha, sh, bias = p.alpha_m, p.sigma_hat_m, 1.0
    else:
        pref = p.P_s * p.n_tx_iab * p.n_rx_ue**2 / (p.K * p.N_s**2)
        bias = p.bias_ratio
        if cls is LinkClass.IAB_LOS:
            alpha, sh = p.alpha_sL, p.sigma_hat_sL
        else:
            alpha, sh = p.alpha_sN, p.sigma_hat_sN
    mean_fade = math.exp(p.mu_hat + 0.5 * sh**2)
    return pref * bias * mean_fade * np.asarray(r, dtype=float) ** (-alpha)


def _upper_limit(cdf, lo=10.0):
    """Radius beyond which a contact law accrues no more probability mass.

    Contact CDFs of blockage-thinned tiers saturate below 1 (the nearest
    LoS node may not exist at all), so saturation is detected through the
    mass increment rather than distance to 1.
    """
    hi = lo
    while cdf(8.0 * hi) - cdf(hi) > _TAIL:
        hi *= 2.0
        if hi > 1e7:
            break
    return 8.0 * hi


def _split_quad(f, a, b, breaks=()):
    """Adaptive quadrature integrating each smooth piece separately."""
    pts = [a] + sorted(x for x in breaks if a < x < b) + [b]
    total = err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = quad(f, lo, hi, limit=200)
        total += v
        err += e
    return total, err


def association_probabilities(params: SystemParams, return_error=False):
    """Probabilities that the typical UE is served by a gNB / LoS IAB / NLoS
    IAB under the maximum biased mean-power rule. The outer integrals run to
    an adaptively chosen radius where every survival factor is negligible,
    split at the hard-core branch points of the gNB contact law."""
    p = params
    d = delta_constants(p)

    F_m = lambda r: contact_cdf_mhcpp(r, p.lambda_m, p.xi)
    F_L = lambda r: contact_cdf_ppp(r, p.lambda_s, p.eps_block, True)
    F_N = lambda r: contact_cdf_ppp(r, p.lambda_s, p.eps_block, False)
    f_m = lambda r: contact_pdf_mhcpp(r, p.lambda_m, p.xi)
    f_L = lambda r: contact_pdf_ppp(r, p.lambda_s, p.eps_block, True)
    f_N = lambda r: contact_pdf_ppp(r, p.lambda_s, p.eps_block, False)

    out = {}
    errs = 0.0

    # IAB classes: serving survival vs gNB (delta_{i,1}) and other IAB class
    for i, (f_i, F_j, a_i, a_j) in (
        ("L", (f_L, F_N, p.alpha_sL, p.alpha_sN)),
        ("N", (f_N, F_L, p.alpha_sN, p.alpha_sL)),
    ):
        d1, d2 = d[f"delta_{i}1"], d[f"delta_{i}2"]

        def integrand(r, f_i=f_i, F_j=F_j, a_i=a_i, a_j=a_j, d1=d1, d2=d2):
            rm = r ** (a_i / p.alpha_m) * d1
            rj = r ** (a_i / a_j) * d2
            return (1.0 - F_m(rm)) * (1.0 - F_j(rj)) * f_i(r)

        upper = _upper_limit(lambda r: contact_cdf_ppp(r, p.lambda_s, p.eps_block, i == "L"))
        brk = (p.xi / (2.0 * d1)) ** (p.alpha_m / a_i) if p.xi > 0 else None
        val, err = _split_quad(integrand, 0.0, upper, (brk,) if brk else ())
        out[i] = val
        errs += err

    dL, dN = d["delta_L"], d["delta_N"]

    def integrand_m(r):
        rl = r ** (p.alpha_m / p.alpha_sL) * dL
        rn = r ** (p.alpha_m / p.alpha_sN) * dN
        return (1.0 - F_L(rl)) * (1.0 - F_N(rn)) * f_m(r)

    upper_m = _upper_limit(F_m)
    val, err = _split_quad(integrand_m, 0.0, upper_m, (p.xi / 2.0,) if p.xi > 0 else ())
    errs += err

    res = AssociationResult(A_m=val, A_sL=out["L"], A_sN=out["N"])
    return (res, errs) if return_error else res


def serving_distance_pdf(link_class: LinkClass, r, params: SystemParams,
                         assoc: AssociationResult | None = None):
    """Conditional PDF of the distance to the serving node of one class."""
    p = params
    if assoc is None:
        assoc = association_probabilities(p)
    d = delta_constants(p)
    r = np.asarray(r, dtype=float)

    if link_class is LinkClass.GNB:
        sl = contact_cdf_ppp(r ** (p.alpha_m / p.alpha_sL) * d["delta_L"], p.lambda_s, p.eps_block, True)
        sn = contact_cdf_ppp(r ** (p.alpha_m / p.alpha_sN) * d["delta_N"], p.lambda_s, p.eps_block, False)
        f = contact_pdf_mhcpp(r, p.lambda_m, p.xi)
        return (1.0 - sl) * (1.0 - sn) * f / assoc.A_m

    los = link_class is LinkClass.IAB_LOS
    a_i = p.alpha_sL if los else p.alpha_sN
    a_j = p.alpha_sN if los else p.alpha_sL
    d1 = d["delta_L1"] if los else d["delta_N1"]
    d2 = d["delta_L2"] if los else d["delta_N2"]
    sm = contact_cdf_mhcpp(r ** (a_i / p.alpha_m) * d1, p.lambda_m, p.xi)
    sj = contact_cdf_ppp(r ** (a_i / a_j) * d2, p.lambda_s, p.eps_block, not los)
    f = contact_pdf_ppp(r, p.lambda_s, p.eps_block, los)
    a = assoc.A_sL if los else assoc.A_sN
    return (1.0 - sm) * (1.0 - sj) * f / a


def serving_break_point(link_class: LinkClass, params: SystemParams):
    """Radius where the gNB contact branch switches inside the serving law."""
    p = params
    if p.xi == 0:
        return None
    if link_class is LinkClass.GNB:
        return p.xi / 2.0
    d = delta_constants(p)
    if link_class is LinkClass.IAB_LOS:
        return (p.xi / (2.0 * d["delta_L1"])) ** (p.alpha_m / p.alpha_sL)
    return (p.xi / (2.0 * d["delta_N1"])) ** (p.alpha_m / p.alpha_sN)
