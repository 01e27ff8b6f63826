"""Stochastic-geometry distance laws, IRS association modes, and the network
configuration record (including dBm parsing, done here and only here)."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .channel import IrsSpec
from .errors import ConfigError
from .mixgamma import FadingSpec

__all__ = [
    "Mode",
    "NetworkConfig",
    "nearest_distance_pdf",
    "nearest_distance_cdf",
    "association_mode",
    "ConditionalDistance",
    "conditional_link_distance",
    "dbm_to_watt",
    "watt_to_dbm",
]


class Mode(enum.Enum):
    """IRS operation mode of the typical UE (by distance to its nearest IRS)."""

    MODE1 = 1  # nearest IRS inside the serving radius: beamformed cascade
    MODE2 = 2  # nearest IRS in the interference annulus: scattering only
    MODE3 = 3  # no IRS inside the interference radius


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def _parse_power(value, name: str) -> float:
    """Accept watts as a number, or a string with an explicit 'W'/'dBm' suffix."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        txt = value.strip().lower().replace(" ", "")
        try:
            if txt.endswith("dbm"):
                return dbm_to_watt(float(txt[:-3]))
            if txt.endswith("w"):
                return float(txt[:-1])
            return float(txt)
        except ValueError:
            pass
    raise ConfigError(f"cannot parse power {name}={value!r} (use watts or e.g. '-147 dBm')")


_LINKS = ("bu", "bi", "iu")


@dataclass(frozen=True)
class NetworkConfig:
    """Densities, radii, IRS panel, per-link fading and path loss, powers."""

    lambda_b: float
    lambda_i: float
    lambda_u: float
    d1: float
    d2: float
    irs: IrsSpec
    fading: dict = field(default_factory=dict)
    alpha: dict = field(default_factory=dict)
    noise_power: float = dbm_to_watt(-147.0)
    tx_power: float = 1.0

    def __post_init__(self):
        if min(self.lambda_b, self.lambda_i, self.lambda_u) <= 0:
            raise ConfigError("densities must be positive")
        if not 0 < self.d1 < self.d2:
            raise ConfigError("radii must satisfy 0 < d1 < d2")
        if self.noise_power <= 0 or self.tx_power <= 0:
            raise ConfigError("noise and transmit powers must be positive")
        for link in _LINKS:
            if link not in self.fading or not isinstance(self.fading[link], FadingSpec):
                raise ConfigError(f"missing fading spec for link {link!r}")
            if link not in self.alpha:
                raise ConfigError(f"missing path-loss exponent for link {link!r}")
            if self.alpha[link] < 2:
                raise ConfigError("path-loss exponents must be >= 2")

    @staticmethod
    def from_dict(raw: dict) -> "NetworkConfig":
        try:
            irs_raw = raw["irs"]
            irs = IrsSpec(int(irs_raw["n_elements"]), float(irs_raw.get("eps_ref", 1.0)))
            fading = {}
            for link in _LINKS:
                f = raw["fading"][link]
                family = f.get("family", "nakagami")
                if family == "generic-pdf":
                    raise ConfigError("generic-pdf fading is not expressible in a config file")
                fading[link] = FadingSpec(family, m=float(f.get("m", 1.0)),
                                          omega=float(f.get("omega", 1.0)))
            alpha = {link: float(raw["alpha"][link]) for link in _LINKS}
            return NetworkConfig(
                lambda_b=float(raw["lambda_b"]),
                lambda_i=float(raw["lambda_i"]),
                lambda_u=float(raw.get("lambda_u", raw["lambda_b"])),
                d1=float(raw["d1"]),
                d2=float(raw["d2"]),
                irs=irs,
                fading=fading,
                alpha=alpha,
                noise_power=_parse_power(raw.get("noise_power", "-147 dBm"), "noise_power"),
                tx_power=_parse_power(raw.get("tx_power", 1.0), "tx_power"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad network config: {exc}") from exc

    @staticmethod
    def from_json(path: str | Path) -> "NetworkConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return NetworkConfig.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "lambda_b": self.lambda_b,
            "lambda_i": self.lambda_i,
            "lambda_u": self.lambda_u,
            "d1": self.d1,
            "d2": self.d2,
            "irs": {"n_elements": self.irs.n_elements, "eps_ref": self.irs.eps_ref},
            "fading": {
                k: {"family": v.family, "m": v.m, "omega": v.omega}
                for k, v in self.fading.items()
            },
            "alpha": dict(self.alpha),
            "noise_power": self.noise_power,
            "tx_power": self.tx_power,
        }


def nearest_distance_pdf(density: float, d):
    """PDF 2 pi lam d exp(-lam pi d^2) of the nearest point of an HPPP."""
    if density <= 0:
        raise ConfigError("density must be positive")
    d = np.asarray(d, dtype=float)
    out = 2.0 * math.pi * density * d * np.exp(-density * math.pi * d * d)
    out = np.where(d < 0, 0.0, out)
    return out if out.ndim else float(out)


def nearest_distance_cdf(density: float, d):
    """CDF 1 - exp(-lam pi d^2) (void probability complement)."""
    if density <= 0:
        raise ConfigError("density must be positive")
    d = np.asarray(d, dtype=float)
    out = np.where(d < 0, 0.0, 1.0 - np.exp(-density * math.pi * d * d))
    return out if out.ndim else float(out)


def association_mode(d_nearest_irs: float, cfg: NetworkConfig) -> Mode:
    """Mode1 iff d < D1; Mode2 iff D1 <= d < D2; Mode3 iff d >= D2."""
    if d_nearest_irs < 0:
        raise ConfigError("distance must be nonnegative")
    if d_nearest_irs < cfg.d1:
        return Mode.MODE1
    if d_nearest_irs < cfg.d2:
        return Mode.MODE2
    return Mode.MODE3


@dataclass(frozen=True)
class ConditionalDistance:
    """Distance from a point at range d to a point uniform on a circle of radius r.

    l^2 = d^2 + r^2 + 2 d r cos(theta) with theta uniform; support
    [|d - r|, d + r]. The second moment d^2 + r^2 is exact; the mean is
    evaluated numerically in the angle variable (the printed closed form
    (r^2+d^2)/(dr) fails against Monte-Carlo and is not used).
    """

    d: float
    r: float

    def __post_init__(self):
        if self.d <= 0 or self.r <= 0:
            raise ConfigError("d and r must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return abs(self.d - self.r), self.d + self.r

    @property
    def mean_l2(self) -> float:
        return self.d * self.d + self.r * self.r

    def mean_l(self) -> float:
        f = lambda th: math.sqrt(self.d**2 + self.r**2 + 2 * self.d * self.r * math.cos(th))
        val, _ = quad(f, 0.0, math.pi, limit=200)
        return val / math.pi

    def cdf(self, l):
        l = np.asarray(l, dtype=float)
        lo, hi = self.support
        arg = (l * l - self.r**2 - self.d**2) / (2 * self.d * self.r)
        arg = np.clip(arg, -1.0, 1.0)
        out = np.arcsin(arg) / math.pi + 0.5
        out = np.where(l <= lo, 0.0, np.where(l >= hi, 1.0, out))
        return out if out.ndim else float(out)

    def pdf(self, l):
        l = np.asarray(l, dtype=float)
        lo, hi = self.support
        arg = (l * l - self.r**2 - self.d**2) / (2 * self.d * self.r)
        inside = (l > lo) & (l < hi)
        arg = np.where(inside, arg, 0.0)
        out = np.where(
            inside,
            (l / (self.d * self.r)) / (math.pi * np.sqrt(np.maximum(1.0 - arg * arg, 1e-300))),
            0.0,
        )
        return out if out.ndim else float(out)


def conditional_link_distance(d: float, r: float) -> ConditionalDistance:
    """Conditional BS-IRS distance law given BS range d and IRS ring radius r."""
    return ConditionalDistance(d=d, r=r)
