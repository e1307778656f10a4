"""Parameter model, unit conversion and validation.

Everything downstream works in watts / meters / linear power gains; decibel
values appear only at the config boundary (``*_db``/``*_dbm`` keys) and in
reports. Shadowing standard deviations are kept in dB because the lognormal
parameters derived from them (``mu_hat``, ``sigma_hat``) absorb the
conversion once, here.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from enum import Enum

SPEED_OF_LIGHT = 299792458.0
LN10 = math.log(10.0)


class ConfigError(ValueError):
    pass


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm):
    return 10.0 ** (x_dbm / 10.0) / 1000.0


def pathloss_intercept(f_c):
    """Free-space intercept beta = 20*log10(4*pi*f_c/c) in dB."""
    if f_c <= 0:
        raise ConfigError("carrier frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * f_c / SPEED_OF_LIGHT)


class LinkClass(Enum):
    """Transmitter class of a link; selects the (alpha, zeta, M) triple."""

    GNB = "gnb"
    IAB_LOS = "iab_los"
    IAB_NLOS = "iab_nlos"


@dataclass(frozen=True)
class ArrayGeometry:
    nx: int
    ny: int

    @property
    def n_total(self):
        return self.nx * self.ny

    def __str__(self):
        return f"{self.nx}x{self.ny}"


@dataclass(frozen=True)
class SystemParams:
    """Validated system parameters, all in linear units.

    Immutable after construction; safe to share across workers. Construct
    through :func:`validate` so the invariants hold and derived constants
    (``beta_db``, ``mu_hat``, per-class ``sigma_hat``) are populated.
    """

    K: int                  # subcarriers
    W: float                # bandwidth, Hz
    f_c: float              # carrier frequency, Hz
    M_m: int                # Nakagami shape, gNB link
    M_sL: int               # Nakagami shape, LoS IAB link
    M_sN: int               # Nakagami shape, NLoS IAB link
    noise_figure_db: float
    eps_block: float        # blockage density constant, 1/m
    R0: float               # analysis radius, m
    xi: float               # hard-core distance, m
    lambda_m: float         # gNB density, 1/m^2
    lambda_s: float         # IAB-node density, 1/m^2
    lambda_u: float         # UE density, 1/m^2
    eta: float              # residual self-interference factor, linear in (0,1)
    eta_dig: float          # digital SIC amount, linear > 1
    T_gh: int               # Gauss-Hermite sample count
    P_m: float              # gNB transmit power, W
    P_s: float              # IAB transmit power, W
    bias_ratio: float       # T_s/T_m, linear
    N_m: int                # gNB subarrays
    N_s: int                # IAB subarrays
    gnb_tx: ArrayGeometry
    iab_tx: ArrayGeometry
    iab_rx: ArrayGeometry
    ue_rx: ArrayGeometry
    alpha_m: float
    alpha_sL: float
    alpha_sN: float
    zeta_m: float           # shadowing std dev, dB
    zeta_sL: float
    zeta_sN: float
    q_adc: int              # ADC bits
    duplex: str             # "IBFD" or "HD"
    # derived, filled by validate()
    beta_db: float = field(default=0.0, compare=False)
    mu_hat: float = field(default=0.0, compare=False)
    sigma_hat_m: float = field(default=0.0, compare=False)
    sigma_hat_sL: float = field(default=0.0, compare=False)
    sigma_hat_sN: float = field(default=0.0, compare=False)

    # antenna-count shorthands matching usage in the SINR couplings
    @property
    def n_tx_gnb(self):
        return self.gnb_tx.n_total

    @property
    def n_tx_iab(self):
        return self.iab_tx.n_total

    @property
    def n_rx_iab(self):
        return self.iab_rx.n_total

    @property
    def n_rx_ue(self):
        return self.ue_rx.n_total

    def link(self, cls: LinkClass):
        """(alpha, zeta_db, M, sigma_hat) for one link class."""
        if cls is LinkClass.GNB:
            return self.alpha_m, self.zeta_m, self.M_m, self.sigma_hat_m
        if cls is LinkClass.IAB_LOS:
            return self.alpha_sL, self.zeta_sL, self.M_sL, self.sigma_hat_sL
        return self.alpha_sN, self.zeta_sN, self.M_sN, self.sigma_hat_sN

    def with_updates(self, **kw):
        """Return a revalidated copy with the given fields replaced."""
        return validate(replace(self, **kw))

    def as_duplex(self, duplex):
        return self.with_updates(duplex=duplex)


def noise_power(params: SystemParams) -> float:
    """Thermal noise power sigma_n^2 in watts.

    -174 dBm + 10*log10(W_eff) + NF, with the effective bandwidth halved in
    HD mode (the band is split between the two tiers).
    """
    w_eff = params.W if params.duplex == "IBFD" else params.W / 2.0
    dbm = -174.0 + 10.0 * math.log10(w_eff) + params.noise_figure_db
    return dbm_to_watts(dbm)


def effective_bandwidth(params: SystemParams) -> float:
    return params.W if params.duplex == "IBFD" else params.W / 2.0


_GEOM_KEYS = ("gnb_tx", "iab_tx", "iab_rx", "ue_rx")

# raw-key aliases: (canonical field, converter)
_ALIASES = {
    "eta_db": ("eta", db_to_linear),
    "eta_dig_db": ("eta_dig", db_to_linear),
    "bias_ratio_db": ("bias_ratio", db_to_linear),
    "P_m_dbm": ("P_m", dbm_to_watts),
    "P_s_dbm": ("P_s", dbm_to_watts),
}

_INT_FIELDS = {"K", "M_m", "M_sL", "M_sN", "T_gh", "N_m", "N_s", "q_adc"}


def table_defaults() -> dict:
    """Default raw parameter set (dB/dBm quantities as written)."""
    return {
        "K": 512,
        "W": 800e6,
        "f_c": 38e9,
        "M_m": 4,
        "M_sL": 3,
        "M_sN": 2,
        "noise_figure_db": 10.0,
        "eps_block": 0.0071,
        "R0": 1000.0,
        "xi": 100.0,
        "lambda_m": 1e-5,
        "lambda_s": 4e-5,
        "lambda_u": 2e-4,
        "eta_db": -80.0,
        "eta_dig_db": 25.0,
        "T_gh": 5,
        "P_m_dbm": 40.0,
        "P_s_dbm": 33.0,
        "bias_ratio_db": 0.0,
        "N_m": 8,
        "N_s": 4,
        "gnb_tx": "32x32",
        "iab_tx": "16x16",
        "iab_rx": "16x16",
        "ue_rx": "8x8",
        "alpha_m": 1.9,
        "alpha_sL": 2.0,
        "alpha_sN": 3.3,
        "zeta_m": 3.7,
        "zeta_sL": 4.3,
        "zeta_sN": 10.7,
        "q_adc": 8,
        "duplex": "IBFD",
    }


def _parse_geometry(v):
    if isinstance(v, ArrayGeometry):
        return v
    if isinstance(v, (tuple, list)) and len(v) == 2:
        return ArrayGeometry(int(v[0]), int(v[1]))
    if isinstance(v, str):
        parts = v.lower().split("x")
        if len(parts) == 2:
            return ArrayGeometry(int(parts[0]), int(parts[1]))
    raise ConfigError(f"cannot parse array geometry {v!r} (expected e.g. '32x32')")


def validate(raw) -> SystemParams:
    """Build a validated SystemParams from a raw mapping (or re-check one).

    Raw dB/dBm keys (``eta_db``, ``P_m_dbm``, ...) are converted to linear;
    invariants are enforced; derived constants are precomputed. Idempotent:
    passing an already-validated SystemParams returns an equal object.
    """
    if isinstance(raw, SystemParams):
        d = {f.name: getattr(raw, f.name) for f in fields(SystemParams) if f.compare}
    else:
        d = dict(raw)
        for alias, (target, conv) in _ALIASES.items():
            if alias in d:
                if target in d:
                    raise ConfigError(f"both {alias!r} and {target!r} given")
                val = d.pop(alias)
                if alias == "eta_db" and val > 0:
                    # Table-style positive value means the amount of
                    # suppression; the model needs residual-relative-to-Tx
                    warnings.warn(
                        f"eta_db={val:g} is positive; interpreting as -{val:g} dB "
                        "of residual self-interference",
                        stacklevel=2,
                    )
                    val = -val
                d[target] = conv(val)

    known = {f.name for f in fields(SystemParams)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
    missing = {f.name for f in fields(SystemParams) if f.compare} - set(d)
    if missing:
        raise ConfigError(f"missing parameter(s): {sorted(missing)}")

    for k in _GEOM_KEYS:
        d[k] = _parse_geometry(d[k])
    for k in _INT_FIELDS:
        v = d[k]
        if float(v) != int(v):
            raise ConfigError(f"{k} must be an integer, got {v!r}")
        d[k] = int(v)
    d["duplex"] = str(d["duplex"]).upper()

    p = dict(d)
    for name in ("W", "f_c", "R0", "lambda_m", "lambda_s", "lambda_u", "P_m", "P_s",
                 "bias_ratio", "eps_block"):
        if p[name] <= 0:
            raise ConfigError(f"{name} must be strictly positive")
    if p["xi"] < 0:
        raise ConfigError("xi must be nonnegative")
    for name in ("K", "T_gh", "N_m", "N_s", "q_adc"):
        if p[name] < 1:
            raise ConfigError(f"{name} must be >= 1")
    for name in ("M_m", "M_sL", "M_sN"):
        # the incomplete-gamma-to-finite-sum step needs integer shapes
        if p[name] < 1:
            raise ConfigError(f"{name} must be an integer >= 1")
    if not 0.0 < p["eta"] < 1.0:
        raise ConfigError(f"eta must lie in (0, 1) after conversion, got {p['eta']:g}")
    if p["eta_dig"] <= 1.0:
        raise ConfigError(f"eta_dig must exceed 1, got {p['eta_dig']:g}")
    if p["duplex"] not in ("IBFD", "HD"):
        raise ConfigError(f"duplex must be IBFD or HD, got {p['duplex']!r}")
    if p["xi"] > 0 and p["lambda_m"] >= 1.0 / (math.pi * p["xi"] ** 2):
        raise ConfigError(
            "hard-core density infeasible: lambda_m=%g >= 1/(pi*xi^2)=%g"
            % (p["lambda_m"], 1.0 / (math.pi * p["xi"] ** 2))
        )
    if p["gnb_tx"].n_total % p["N_m"]:
        raise ConfigError("N_m must divide the gNB transmit antenna count")
    if p["iab_tx"].n_total % p["N_s"]:
        raise ConfigError("N_s must divide the IAB transmit antenna count")

    beta = pathloss_intercept(p["f_c"])
    p["beta_db"] = beta
    p["mu_hat"] = -0.1 * beta * LN10
    p["sigma_hat_m"] = 0.1 * p["zeta_m"] * LN10
    p["sigma_hat_sL"] = 0.1 * p["zeta_sL"] * LN10
    p["sigma_hat_sN"] = 0.1 * p["zeta_sN"] * LN10
    return SystemParams(**p)


def default_params(**overrides) -> SystemParams:
    raw = table_defaults()
    raw.update(overrides)
    return validate(raw)
