"""Ground-truth network simulator.

Realizes the spatial layers (hard-core gNBs, PPP IAB-nodes), samples
blockage, composite fading and beamforming gains, evaluates the scalar
per-link SINR expressions (including residual self-interference and ADC
quantization noise), and produces empirical association / coverage /
capacity estimates with confidence half-widths.

The Monte Carlo operates on the scalar SINR forms (post ZF-penalty /
gain-mixture approximations); the "angle" fidelity level re-randomizes the
quantized virtual angles per interferer so the discrete gain mixture is
itself exercised against its own derivation.

Estimation is batched: realizations are simulated in fixed-size chunks with
per-chunk RNG streams spawned from the master seed, so results are
bit-identical for a given (params, metric, n_iter, seed) regardless of how
the chunks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import beamforming
from .analysis import CoverageLink, quantization_span
from .config import LinkClass, SystemParams, effective_bandwidth, noise_power
from .pointprocess import MhcppSpec, PointPattern, sample_mhcpp2, sample_ppp
from .stochastics import sample_gl

_CHUNK = 2048
_CLS = {LinkClass.GNB: 0, LinkClass.IAB_LOS: 1, LinkClass.IAB_NLOS: 2}
_CLS_INV = {v: k for k, v in _CLS.items()}


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    n_samples: int


@dataclass(frozen=True)
class Realization:
    """One network draw: gNBs (hard-core), IAB-nodes with LoS labels drawn
    relative to the typical receiver at the origin."""

    gnbs: PointPattern
    iab_xy: np.ndarray
    iab_los: np.ndarray


def mc_source_kinds(link: CoverageLink, duplex: str):
    """Interference tiers present in one link's SINR denominator."""
    if duplex == "IBFD":
        return ("gnb", "iab")
    if link in (CoverageLink.GNB_ACCESS, CoverageLink.BACKHAUL):
        return ("gnb",)
    return ("iab",)


def has_rsi(link: CoverageLink, duplex: str):
    return link is CoverageLink.BACKHAUL and duplex == "IBFD"


@dataclass(frozen=True)
class _McConst:
    """Precomputed couplings and samplers shared by both MC paths."""

    parent: float
    noise_ue: float
    noise_iab: float
    span: float
    rsi: float                   # eta P_s / K
    # desired-signal couplings P N_T N_R^2 / (K N^2)
    des_gnb_ue: float
    des_iab_ue: float
    des_gnb_iab: float
    # interference couplings P N_T N_R^2 / (K N)
    int_gnb_ue: float
    int_iab_ue: float
    int_gnb_iab: float
    int_iab_iab: float
    zf_gnb: float
    zf_iab: float
    dist_gnb_ue: beamforming.GainDistribution
    dist_iab_ue: beamforming.GainDistribution
    dist_gnb_iab: beamforming.GainDistribution
    dist_iab_iab: beamforming.GainDistribution


def _consts(p: SystemParams) -> _McConst:
    spec = MhcppSpec.from_target_density(p.lambda_m, p.xi)
    sn = noise_power(p)
    return _McConst(
        parent=spec.parent_density,
        noise_ue=sn * p.n_rx_ue,
        noise_iab=sn * p.n_rx_iab,
        span=quantization_span(p.q_adc),
        rsi=p.eta * p.P_s / p.K,
        des_gnb_ue=p.P_m * p.n_tx_gnb * p.n_rx_ue**2 / (p.K * p.N_m**2),
        des_iab_ue=p.P_s * p.n_tx_iab * p.n_rx_ue**2 / (p.K * p.N_s**2),
        des_gnb_iab=p.P_m * p.n_tx_gnb * p.n_rx_iab**2 / (p.K * p.N_m**2),
        int_gnb_ue=p.P_m * p.n_tx_gnb * p.n_rx_ue**2 / (p.K * p.N_m),
        int_iab_ue=p.P_s * p.n_tx_iab * p.n_rx_ue**2 / (p.K * p.N_s),
        int_gnb_iab=p.P_m * p.n_tx_gnb * p.n_rx_iab**2 / (p.K * p.N_m),
        int_iab_iab=p.P_s * p.n_tx_iab * p.n_rx_iab**2 / (p.K * p.N_s),
        zf_gnb=beamforming.zf_penalty_prob(p.n_tx_gnb, p.N_m),
        zf_iab=beamforming.zf_penalty_prob(p.n_tx_iab, p.N_s),
        dist_gnb_ue=beamforming.gain_distribution(p.gnb_tx, p.ue_rx, p.N_m),
        dist_iab_ue=beamforming.gain_distribution(p.iab_tx, p.ue_rx, p.N_s),
        dist_gnb_iab=beamforming.gain_distribution(p.gnb_tx, p.iab_rx, p.N_m),
        dist_iab_iab=beamforming.gain_distribution(p.iab_tx, p.iab_rx, p.N_s),
    )


def _assemble_sinr(g, i_gnb, i_iab, noise, link, params, *, rsi, span):
    """Scalar SINR from realized components, per duplex mode.

    Quantization noise reproduces the full pre-ADC signal (desired power,
    pre-digital-SIC residual self-interference, interference, thermal noise)
    scaled by 1/(1.5*2^(2q)).
    """
    kinds = mc_source_kinds(link, params.duplex)
    i_tot = 0.0
    if "gnb" in kinds:
        i_tot = i_tot + i_gnb
    if "iab" in kinds:
        i_tot = i_tot + i_iab
    rsi_term = rsi if has_rsi(link, params.duplex) else 0.0
    pre_adc = g + params.eta_dig * rsi_term + i_tot + noise
    e2 = pre_adc / span
    return g / (i_tot + rsi_term + noise + e2)


# ---------------------------------------------------------------------------
# single-realization API

def realize(params: SystemParams, rng) -> Realization:
    """Draw one network: hard-core gNBs (guard-banded), PPP IAB-nodes with
    per-link LoS labels sampled toward the origin."""
    spec = MhcppSpec.from_target_density(params.lambda_m, params.xi)
    gnbs = sample_mhcpp2(spec, params.R0, rng)
    iabs = sample_ppp(params.lambda_s, params.R0, rng)
    d = iabs.radii
    los = rng.random(len(iabs)) < np.exp(-params.eps_block * d)
    return Realization(gnbs=gnbs, iab_xy=iabs.points, iab_los=los)


def _nearest(xy, from_xy=(0.0, 0.0)):
    if xy.shape[0] == 0:
        return np.inf, -1
    d = np.hypot(xy[:, 0] - from_xy[0], xy[:, 1] - from_xy[1])
    i = int(np.argmin(d))
    return float(d[i]), i


def associate(realization: Realization, params: SystemParams):
    """Maximum biased mean-power association of the typical UE at the origin.

    Returns (link class, index into that class's point list, distance).
    """
    from .geometry import mean_biased_power

    if len(realization.gnbs) == 0:
        raise ValueError("realization has no gNB; resample")
    d_g, i_g = _nearest(realization.gnbs.points)
    d_l, i_l = _nearest(realization.iab_xy[realization.iab_los]) \
        if realization.iab_los.any() else (np.inf, -1)
    d_n, i_n = _nearest(realization.iab_xy[~realization.iab_los]) \
        if (~realization.iab_los).any() else (np.inf, -1)

    cands = []
    for cls, dist, idx in ((LinkClass.GNB, d_g, i_g),
                           (LinkClass.IAB_LOS, d_l, i_l),
                           (LinkClass.IAB_NLOS, d_n, i_n)):
        pw = mean_biased_power(params, cls, dist) if np.isfinite(dist) else -np.inf
        cands.append((pw, cls, idx, dist))
    pw, cls, idx, dist = max(cands, key=lambda t: t[0])
    return cls, idx, dist


def _draw_gains(dist, tx_geom, n_streams, rx_geom, n, fidelity, rng):
    if fidelity == "angle":
        return beamforming.angle_sampled_gain(tx_geom, rx_geom, n_streams, rng, size=n)
    return beamforming.sample_gain(dist, rng, size=n)


def sinr_sample(realization: Realization, link: CoverageLink, params: SystemParams,
                rng, fidelity="atom"):
    """One SINR draw for the given link on this realization.

    Access links place the receiver at the origin and serve from the nearest
    node of the link's class; the backhaul link evaluates the typical
    IAB-node at the origin served by its nearest gNB.
    """
    from .config import LinkClass as LC

    p = params
    c = _consts(p)
    g_xy = realization.gnbs.points
    s_xy = realization.iab_xy
    if g_xy.shape[0] == 0:
        raise ValueError("realization has no gNB; resample")

    at_ue = link is not CoverageLink.BACKHAUL
    d_g = np.hypot(g_xy[:, 0], g_xy[:, 1])
    d_s = np.hypot(s_xy[:, 0], s_xy[:, 1])

    if at_ue:
        los = realization.iab_los
        noise = c.noise_ue
        dist_g, dist_s = c.dist_gnb_ue, c.dist_iab_ue
        int_g, int_s = c.int_gnb_ue, c.int_iab_ue
    else:
        los = rng.random(s_xy.shape[0]) < np.exp(-p.eps_block * d_s)
        noise = c.noise_iab
        dist_g, dist_s = c.dist_gnb_iab, c.dist_iab_iab
        int_g, int_s = c.int_gnb_iab, c.int_iab_iab

    # serving node / desired signal
    if link is CoverageLink.GNB_ACCESS or link is CoverageLink.BACKHAUL:
        i_serv = int(np.argmin(d_g))
        r_serv = d_g[i_serv]
        alpha, _, m_des, sh = p.link(LC.GNB)
        des = c.des_gnb_ue if at_ue else c.des_gnb_iab
        zf_p = c.zf_gnb
        excl_g, excl_s = i_serv, -1
    else:
        want = los if link is CoverageLink.IAB_LOS_ACCESS else ~los
        if not want.any():
            return 0.0
        idx = np.flatnonzero(want)
        i_serv = int(idx[np.argmin(d_s[idx])])
        r_serv = d_s[i_serv]
        cls = LC.IAB_LOS if link is CoverageLink.IAB_LOS_ACCESS else LC.IAB_NLOS
        alpha, _, m_des, sh = p.link(cls)
        des = c.des_iab_ue
        zf_p = c.zf_iab
        excl_g, excl_s = -1, i_serv

    fade = rng.gamma(m_des, 1.0 / m_des) * math.exp(
        p.mu_hat + sh * rng.standard_normal())
    zf = 1.0 if rng.random() < zf_p else 0.0
    g = des * fade * zf * r_serv ** (-alpha)

    # interference from gNBs
    fades_g = sample_gl_mixed(np.full(d_g.shape, p.M_m), p.mu_hat,
                              np.full(d_g.shape, p.sigma_hat_m), rng)
    gains_g = _draw_gains(dist_g, p.gnb_tx, p.N_m,
                          p.ue_rx if at_ue else p.iab_rx, d_g.shape[0], fidelity, rng)
    terms_g = int_g * fades_g * gains_g * d_g ** (-p.alpha_m)
    if excl_g >= 0:
        terms_g[excl_g] = 0.0
    i_gnb = float(terms_g.sum())

    # interference from IAB-nodes
    m_s = np.where(los, p.M_sL, p.M_sN).astype(float)
    sh_s = np.where(los, p.sigma_hat_sL, p.sigma_hat_sN)
    al_s = np.where(los, p.alpha_sL, p.alpha_sN)
    fades_s = sample_gl_mixed(m_s, p.mu_hat, sh_s, rng)
    gains_s = _draw_gains(dist_s, p.iab_tx, p.N_s,
                          p.ue_rx if at_ue else p.iab_rx, d_s.shape[0], fidelity, rng)
    terms_s = int_s * fades_s * gains_s * d_s ** (-al_s)
    if excl_s >= 0:
        terms_s[excl_s] = 0.0
    i_iab = float(terms_s.sum())

    return float(_assemble_sinr(g, i_gnb, i_iab, noise, link, p,
                                rsi=c.rsi, span=c.span))


def sample_gl_mixed(m, mu_hat, sigma_hat, rng):
    """Composite GL draws with per-element shape/scale parameters."""
    m = np.asarray(m, dtype=float)
    g = rng.gamma(m, 1.0 / m) if m.size else np.empty(0)
    return g * np.exp(mu_hat + sigma_hat * rng.standard_normal(m.shape))


# ---------------------------------------------------------------------------
# batched engine

def _seg_min(ids, vals, n):
    best = np.full(n, np.inf)
    if vals.size:
        np.minimum.at(best, ids, vals)
    return best


def _seg_argmin(ids, vals, n, best):
    idx = np.full(n, -1, dtype=np.int64)
    if vals.size:
        hits = np.flatnonzero(vals == best[ids])
        idx[ids[hits[::-1]]] = hits[::-1]  # reverse pass leaves first hit
    return idx


def _simulate_chunk(p, c, rng, n, fidelity, want_access, want_bh_typical,
                    want_bh_joint):
    """Simulate n realizations; returns per-realization class and SINRs."""
    guard = p.R0 + p.xi
    cnt_g = rng.poisson(c.parent * math.pi * guard**2, n)
    tg = int(cnt_g.sum())
    rr = guard * np.sqrt(rng.random(tg))
    th = 2.0 * math.pi * rng.random(tg)
    gx, gy = rr * np.cos(th), rr * np.sin(th)
    marks = rng.random(tg)
    ids_g = np.repeat(np.arange(n), cnt_g)
    starts = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(cnt_g, out=starts[1:])
    if p.xi > 0:
        from . import kernels
        keep = kernels.thin_hardcore(gx, gy, marks, starts, p.xi) != 0
    else:
        keep = np.ones(tg, dtype=bool)
    d_g0 = np.hypot(gx, gy)
    sel = keep & (d_g0 <= p.R0)
    gx, gy, d_g, ids_g = gx[sel], gy[sel], d_g0[sel], ids_g[sel]

    cnt_s = rng.poisson(p.lambda_s * math.pi * p.R0**2, n)
    ts = int(cnt_s.sum())
    rr = p.R0 * np.sqrt(rng.random(ts))
    th = 2.0 * math.pi * rng.random(ts)
    sx, sy = rr * np.cos(th), rr * np.sin(th)
    d_s = rr
    ids_s = np.repeat(np.arange(n), cnt_s)
    los = rng.random(ts) < np.exp(-p.eps_block * d_s)

    # association at the origin
    best_g = _seg_min(ids_g, d_g, n)
    arg_g = _seg_argmin(ids_g, d_g, n, best_g)
    d_los = np.where(los, d_s, np.inf)
    d_nlos = np.where(los, np.inf, d_s)
    best_l = _seg_min(ids_s, d_los, n)
    arg_l = _seg_argmin(ids_s, d_los, n, best_l)
    best_n = _seg_min(ids_s, d_nlos, n)
    arg_n = _seg_argmin(ids_s, d_nlos, n, best_n)

    from .geometry import mean_biased_power

    pw = np.full((3, n), -np.inf)
    fin = np.isfinite(best_g)
    pw[0, fin] = mean_biased_power(p, LinkClass.GNB, best_g[fin])
    fin = np.isfinite(best_l)
    pw[1, fin] = mean_biased_power(p, LinkClass.IAB_LOS, best_l[fin])
    fin = np.isfinite(best_n)
    pw[2, fin] = mean_biased_power(p, LinkClass.IAB_NLOS, best_n[fin])
    cls = np.argmax(pw, axis=0).astype(np.int8)
    valid = np.isfinite(best_g)  # backhaul always needs a gNB
    cls[~valid] = -1

    out = {"cls": cls, "valid": valid}
    if not (want_access or want_bh_typical or want_bh_joint):
        return out

    span, rsi = c.span, c.rsi
    serv_s = np.where(cls == 1, arg_l, arg_n)

    if want_access:
        # interference fades/gains toward the UE at the origin
        fades_g = sample_gl_mixed(np.full(d_g.shape, float(p.M_m)), p.mu_hat,
                                  np.full(d_g.shape, p.sigma_hat_m), rng)
        gains_g = _draw_gains(c.dist_gnb_ue, p.gnb_tx, p.N_m, p.ue_rx,
                              d_g.shape[0], fidelity, rng)
        terms = c.int_gnb_ue * fades_g * gains_g * d_g ** (-p.alpha_m)
        excl = (cls[ids_g] == 0) & (np.arange(d_g.shape[0]) == arg_g[ids_g])
        i_gnb = np.bincount(ids_g, np.where(excl, 0.0, terms), minlength=n)

        m_s = np.where(los, float(p.M_sL), float(p.M_sN))
        sh_s = np.where(los, p.sigma_hat_sL, p.sigma_hat_sN)
        al_s = np.where(los, p.alpha_sL, p.alpha_sN)
        fades_s = sample_gl_mixed(m_s, p.mu_hat, sh_s, rng)
        gains_s = _draw_gains(c.dist_iab_ue, p.iab_tx, p.N_s, p.ue_rx,
                              d_s.shape[0], fidelity, rng)
        terms = c.int_iab_ue * fades_s * gains_s * d_s ** (-al_s)
        excl = (cls[ids_s] > 0) & (np.arange(d_s.shape[0]) == serv_s[ids_s])
        i_iab = np.bincount(ids_s, np.where(excl, 0.0, terms), minlength=n)

        m_des = np.choose(np.maximum(cls, 0), [float(p.M_m), float(p.M_sL), float(p.M_sN)])
        sh_des = np.choose(np.maximum(cls, 0), [p.sigma_hat_m, p.sigma_hat_sL, p.sigma_hat_sN])
        al_des = np.choose(np.maximum(cls, 0), [p.alpha_m, p.alpha_sL, p.alpha_sN])
        des = np.choose(np.maximum(cls, 0), [c.des_gnb_ue, c.des_iab_ue, c.des_iab_ue])
        zf_p = np.choose(np.maximum(cls, 0), [c.zf_gnb, c.zf_iab, c.zf_iab])
        r_serv = np.choose(np.maximum(cls, 0), [best_g, best_l, best_n])
        fade = sample_gl_mixed(m_des, p.mu_hat, sh_des, rng)
        zf = rng.random(n) < zf_p
        g_des = des * fade * zf * r_serv ** (-al_des)

        link_of = {0: CoverageLink.GNB_ACCESS, 1: CoverageLink.IAB_LOS_ACCESS,
                   2: CoverageLink.IAB_NLOS_ACCESS}
        acc = np.zeros(n)
        for k, link in link_of.items():
            mask = cls == k
            if mask.any():
                acc[mask] = _assemble_sinr(g_des[mask], i_gnb[mask], i_iab[mask],
                                           c.noise_ue, link, p, rsi=rsi, span=span)
        out["access"] = acc

    def _backhaul(xb_x, xb_y, excl_s_idx):
        """Backhaul SINR at per-realization receiver positions."""
        dxg = np.hypot(gx - xb_x[ids_g], gy - xb_y[ids_g])
        bg = _seg_min(ids_g, dxg, n)
        ag = _seg_argmin(ids_g, dxg, n, bg)
        fades = sample_gl_mixed(np.full(dxg.shape, float(p.M_m)), p.mu_hat,
                                np.full(dxg.shape, p.sigma_hat_m), rng)
        gains = _draw_gains(c.dist_gnb_iab, p.gnb_tx, p.N_m, p.iab_rx,
                            dxg.shape[0], fidelity, rng)
        terms = c.int_gnb_iab * fades * gains * dxg ** (-p.alpha_m)
        excl = np.arange(dxg.shape[0]) == ag[ids_g]
        i_gnb_b = np.bincount(ids_g, np.where(excl, 0.0, terms), minlength=n)

        dxs = np.hypot(sx - xb_x[ids_s], sy - xb_y[ids_s])
        los_b = rng.random(ts) < np.exp(-p.eps_block * dxs)
        m_s = np.where(los_b, float(p.M_sL), float(p.M_sN))
        sh_s = np.where(los_b, p.sigma_hat_sL, p.sigma_hat_sN)
        al_s = np.where(los_b, p.alpha_sL, p.alpha_sN)
        fades = sample_gl_mixed(m_s, p.mu_hat, sh_s, rng)
        gains = _draw_gains(c.dist_iab_iab, p.iab_tx, p.N_s, p.iab_rx,
                            dxs.shape[0], fidelity, rng)
        with np.errstate(divide="ignore", over="ignore"):
            terms = c.int_iab_iab * fades * gains * dxs ** (-al_s)
        if excl_s_idx is not None:
            excl = np.arange(dxs.shape[0]) == excl_s_idx[ids_s]
            terms = np.where(excl, 0.0, terms)
        terms = np.where(np.isfinite(terms), terms, 0.0)
        i_iab_b = np.bincount(ids_s, terms, minlength=n)

        fade = sample_gl_mixed(np.full(n, float(p.M_m)), p.mu_hat,
                               np.full(n, p.sigma_hat_m), rng)
        zf = rng.random(n) < c.zf_gnb
        with np.errstate(divide="ignore"):
            g_b = c.des_gnb_iab * fade * zf * bg ** (-p.alpha_m)
        return _assemble_sinr(g_b, i_gnb_b, i_iab_b, c.noise_iab,
                              CoverageLink.BACKHAUL, p, rsi=rsi, span=span)

    if want_bh_typical:
        out["bh_typical"] = _backhaul(np.zeros(n), np.zeros(n), None)

    if want_bh_joint:
        is_iab = cls > 0
        xb_x = np.where(is_iab & (serv_s >= 0), sx[np.maximum(serv_s, 0)], 0.0)
        xb_y = np.where(is_iab & (serv_s >= 0), sy[np.maximum(serv_s, 0)], 0.0)
        bh = _backhaul(xb_x, xb_y, np.where(is_iab, serv_s, -1))
        out["bh_joint"] = np.where(is_iab, bh, np.nan)

    return out


def _run_chunks(p, n_iter, seed, fidelity, want_access, want_bh_typical,
                want_bh_joint):
    c = _consts(p)
    n_chunks = (n_iter + _CHUNK - 1) // _CHUNK
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    parts = []
    left = n_iter
    for ss in streams:
        n = min(_CHUNK, left)
        left -= n
        rng = np.random.default_rng(ss)
        parts.append(_simulate_chunk(p, c, rng, n, fidelity, want_access,
                                     want_bh_typical, want_bh_joint))
    keys = parts[0].keys()
    return {k: np.concatenate([q[k] for q in parts]) for k in keys}


def _mc_mean(x):
    n = x.shape[0]
    if n == 0:
        return McEstimate(math.nan, math.inf, 0)
    m = float(np.mean(x))
    s = float(np.std(x, ddof=1)) if n > 1 else math.inf
    return McEstimate(m, 1.96 * s / math.sqrt(n), n)


def estimate(metric, params: SystemParams, n_iter, seed, *, tau=None,
             tau_min=None, fidelity="atom"):
    """Monte Carlo estimate of one metric.

    metric: "association" | "coverage" (needs tau, linear) |
    "cap_outage" (needs tau_min, linear) | "ergodic".
    Returns a dict of McEstimate; "total" carries the network-level value.
    For coverage, IAB-served realizations apply the joint access-and-backhaul
    event on the same realization; "total_factorized" combines per-link
    marginals instead, quantifying the factorization approximation.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if metric not in ("association", "coverage", "cap_outage", "ergodic"):
        raise ValueError(f"unknown metric {metric!r}")
    p = params

    if metric == "association":
        res = _run_chunks(p, n_iter, seed, fidelity, False, False, False)
        cls, valid = res["cls"], res["valid"]
        nv = int(valid.sum())
        out = {}
        for k, name in ((0, "gnb"), (1, "iab_los"), (2, "iab_nlos")):
            out[name] = _mc_mean((cls[valid] == k).astype(float))
        out["n_invalid"] = n_iter - nv
        return out

    if metric in ("coverage", "cap_outage"):
        thr = tau if metric == "coverage" else tau_min
        if thr is None:
            raise ValueError("coverage/cap_outage need tau / tau_min (linear)")
        res = _run_chunks(p, n_iter, seed, fidelity, True, True, True)
        cls, valid = res["cls"], res["valid"]
        acc, bh_t, bh_j = res["access"], res["bh_typical"], res["bh_joint"]
        v = valid
        is_gnb = v & (cls == 0)
        event = np.where(cls == 0, acc > thr,
                         (acc > thr) & np.where(np.isnan(bh_j), False, bh_j > thr))
        total = _mc_mean(event[v].astype(float))

        out = {"total": total}
        cond = {}
        for k, name in ((0, "gnb_access"), (1, "iab_los_access"), (2, "iab_nlos_access")):
            cond[name] = _mc_mean((acc[v & (cls == k)] > thr).astype(float))
        cond["backhaul"] = _mc_mean((bh_t[v] > thr).astype(float))
        out.update(cond)

        freq = {k: float((cls[v] == k).mean()) for k in (0, 1, 2)}
        fact = (freq[0] * cond["gnb_access"].mean
                + freq[1] * cond["iab_los_access"].mean * cond["backhaul"].mean
                + freq[2] * cond["iab_nlos_access"].mean * cond["backhaul"].mean)
        hw = (freq[1] + freq[2]) * cond["backhaul"].half_width_95
        for k, name in ((0, "gnb_access"), (1, "iab_los_access"), (2, "iab_nlos_access")):
            if np.isfinite(cond[name].half_width_95):
                hw += freq[k] * cond[name].half_width_95
        out["total_factorized"] = McEstimate(fact, hw, total.n_samples)

        if metric == "cap_outage":
            rate = effective_bandwidth(p) * math.log2(1.0 + thr)
            out = {k: McEstimate(e.mean * rate, e.half_width_95 * rate, e.n_samples)
                   if isinstance(e, McEstimate) else e for k, e in out.items()}
        return out

    # ergodic
    res = _run_chunks(p, n_iter, seed, fidelity, True, True, False)
    cls, valid = res["cls"], res["valid"]
    w = effective_bandwidth(p)
    rate_acc = w * np.log2(1.0 + res["access"])
    rate_bh = w * np.log2(1.0 + res["bh_typical"])
    v = valid
    per = {
        "gnb_access": _mc_mean(rate_acc[v & (cls == 0)]),
        "iab_los_access": _mc_mean(rate_acc[v & (cls == 1)]),
        "iab_nlos_access": _mc_mean(rate_acc[v & (cls == 2)]),
        "backhaul": _mc_mean(rate_bh[v]),
    }
    freq = {k: float((cls[v] == k).mean()) for k in (0, 1, 2)}
    total = (freq[0] * per["gnb_access"].mean
             + freq[1] * min(per["iab_los_access"].mean, per["backhaul"].mean)
             + freq[2] * min(per["iab_nlos_access"].mean, per["backhaul"].mean))
    hw = 0.0
    for k, name in ((0, "gnb_access"), (1, "iab_los_access"), (2, "iab_nlos_access")):
        e = per[name] if name == "gnb_access" else (
            per[name] if per[name].mean <= per["backhaul"].mean else per["backhaul"])
        if np.isfinite(e.half_width_95):
            hw += freq[k] * e.half_width_95
    out = dict(per)
    out["total"] = McEstimate(total, hw, int(v.sum()))
    return out
