"""Mixture-Gamma distributions: the universal channel-gain representation.

A mixture f(x) = sum_i eps_i x^{beta_i-1} e^{-xi_i x} with positive shapes
beta_i and rates xi_i. Coefficients eps_i are nonnegative for constructor
outputs ("nonnegative" kind) but may alternate in sign for quadratic-form
outputs ("signed" kind); signed mixtures are valid densities as a sum but
must never be sampled term by term.

All statistics are evaluated in log space so that paper-scale parameters
(xi ~ 1e13, beta ~ 40) do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.special as sc
from scipy.integrate import quad

from .errors import ConfigError, NumericError

__all__ = [
    "MixtureGamma",
    "FadingSpec",
    "from_pdf",
    "fit_fading",
    "mmse_against",
]

NONNEGATIVE = "nonnegative"
SIGNED = "signed"

#: terms with |weight| below this are dropped on renormalization
WEIGHT_DROP_TOL = 1e-14

#: tolerance on the total-mass identity sum_i eps_i Gamma(beta_i)/xi_i^beta_i = 1
MASS_TOL = 1e-6


@dataclass(frozen=True)
class MixtureGamma:
    """Finite (possibly signed) mixture of Gamma terms (eps_i, beta_i, xi_i)."""

    eps: np.ndarray
    beta: np.ndarray
    xi: np.ndarray
    kind: str = NONNEGATIVE

    def __post_init__(self):
        eps = np.atleast_1d(np.asarray(self.eps, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if not (eps.shape == beta.shape == xi.shape) or eps.ndim != 1 or eps.size == 0:
            raise ConfigError("eps, beta, xi must be equal-length non-empty 1-D sequences")
        if self.kind not in (NONNEGATIVE, SIGNED):
            raise ConfigError(f"unknown mixture kind {self.kind!r}")
        if not np.all(np.isfinite(eps)):
            raise NumericError("non-finite mixture coefficient; rescale the inputs")
        if np.any(beta <= 0) or np.any(xi <= 0):
            raise ConfigError("all shapes beta_i and rates xi_i must be positive")
        if self.kind == NONNEGATIVE and np.any(eps < 0):
            raise ConfigError("nonnegative-kind mixture has a negative coefficient")
        for name, arr in (("eps", eps), ("beta", beta), ("xi", xi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- basic bookkeeping -------------------------------------------------

    def __len__(self) -> int:
        return self.eps.size

    @property
    def terms(self) -> np.ndarray:
        """Terms as an (n, 3) array in (eps, beta, xi) order."""
        return np.column_stack([self.eps, self.beta, self.xi])

    def _log_abs_eps(self) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.eps)), np.sign(self.eps)

    def weights(self) -> np.ndarray:
        """Per-term masses w_i = eps_i Gamma(beta_i) / xi_i^beta_i."""
        la, sg = self._log_abs_eps()
        return sg * np.exp(la + sc.gammaln(self.beta) - self.beta * np.log(self.xi))

    def total_mass(self) -> float:
        return float(self.weights().sum())

    # -- statistics ----------------------------------------------------------

    def pdf(self, x):
        """Density sum_i eps_i x^{beta_i-1} e^{-xi_i x}; requires x > 0."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ConfigError("pdf requires x > 0")
        la, sg = self._log_abs_eps()
        lx = np.log(x)[..., None]
        logp = la + (self.beta - 1.0) * lx - self.xi * x[..., None]
        out = np.sum(sg * np.exp(logp), axis=-1)
        return out if out.ndim else float(out)

    def cdf(self, x):
        """sum_i eps_i xi_i^{-beta_i} gamma(beta_i, xi_i x); raw, not clamped."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ConfigError("cdf requires x >= 0")
        la, sg = self._log_abs_eps()
        coeff = sg * np.exp(la + sc.gammaln(self.beta) - self.beta * np.log(self.xi))
        out = np.sum(coeff * sc.gammainc(self.beta, self.xi * x[..., None]), axis=-1)
        return out if out.ndim else float(out)

    def moment(self, l: float) -> float:
        """E[X^l] = sum_i eps_i Gamma(beta_i + l) / xi_i^{beta_i + l}."""
        if l <= -float(np.min(self.beta)):
            raise ConfigError(f"moment order {l} <= -min(beta) = {-np.min(self.beta)}")
        la, sg = self._log_abs_eps()
        return float(
            np.sum(sg * np.exp(la + sc.gammaln(self.beta + l) - (self.beta + l) * np.log(self.xi)))
        )

    def laplace(self, s):
        """E[e^{-sX}] = sum_i eps_i Gamma(beta_i) / (xi_i + s)^{beta_i}.

        Accepts real or complex s with Re(s) > -min(xi).
        """
        s = np.asarray(s)
        if np.any(np.real(s) <= -np.min(self.xi)):
            raise ConfigError("laplace requires Re(s) > -min(xi)")
        la, sg = self._log_abs_eps()
        logv = la + sc.gammaln(self.beta) - self.beta * np.log(self.xi + s[..., None])
        out = np.sum(sg * np.exp(logv), axis=-1)
        return out if out.ndim else complex(out) if np.iscomplexobj(out) else float(out)

    # -- transforms ----------------------------------------------------------

    def scaled(self, c: float) -> "MixtureGamma":
        """Distribution of c*X (exact): eps -> eps c^{-beta}, xi -> xi / c."""
        if not c > 0:
            raise ConfigError("scale factor must be positive")
        la, sg = self._log_abs_eps()
        eps = sg * np.exp(la - self.beta * math.log(c))
        return MixtureGamma(eps, self.beta, self.xi / c, kind=self.kind)

    def renormalized(self, drop_tol: float = WEIGHT_DROP_TOL) -> "MixtureGamma":
        """Rescale coefficients to unit total mass, dropping negligible terms."""
        mass = self.total_mass()
        if not (np.isfinite(mass) and mass > 0):
            raise NumericError(f"cannot renormalize mixture with total mass {mass}")
        w = self.weights() / mass
        keep = np.abs(w) >= drop_tol
        if not keep.any():
            raise NumericError("renormalization dropped every term")
        eps = self.eps[keep] / mass
        out = MixtureGamma(eps, self.beta[keep], self.xi[keep], kind=self.kind)
        # dropping tiny terms perturbs the mass; one exact rescale restores it
        tail = out.total_mass()
        return MixtureGamma(out.eps / tail, out.beta, out.xi, kind=self.kind)

    # -- support and validation ----------------------------------------------

    def quantile(self, p: float, tol: float = 1e-10) -> float:
        """Inverse CDF by bisection (valid for any mixture that is a density)."""
        if not 0 < p < 1:
            raise ConfigError("quantile requires 0 < p < 1")
        hi = float(np.max((self.beta + 20.0 * np.sqrt(self.beta) + 20.0) / self.xi))
        lo = 0.0
        for _ in range(300):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(hi, 1e-300):
                break
        return 0.5 * (lo + hi)

    def probe_grid(self, n: int = 1000) -> np.ndarray:
        """Log-spaced grid over [q_0.001, q_0.999]."""
        lo = self.quantile(1e-3)
        hi = self.quantile(1.0 - 1e-3)
        lo = max(lo, hi * 1e-12)
        return np.logspace(math.log10(lo), math.log10(hi), n)

    def validate(self, mass_tol: float = MASS_TOL) -> None:
        """Check the type invariants; raises NumericError on violation.

        The signed-kind pointwise check pdf >= -1e-6 is applied at unit-mean
        scale so the tolerance is meaningful in any unit system.
        """
        mass = self.total_mass()
        if abs(mass - 1.0) > mass_tol:
            raise NumericError(f"total mass {mass} deviates from 1 beyond {mass_tol}")
        if self.kind == SIGNED:
            m1 = self.moment(1.0)
            if not m1 > 0:
                raise NumericError(f"signed mixture has nonpositive mean {m1}; not a density")
            unit = self.scaled(1.0 / m1)
            if float(np.min(unit.pdf(unit.probe_grid()))) < -1e-6:
                raise NumericError("signed mixture dips below -1e-6 on the probe grid")

    # -- serialization ---------------------------------------------------------

    def to_record(self) -> dict:
        """JSON-ready record {kind, terms: [[eps, beta, xi], ...]}."""
        return {"kind": self.kind, "terms": [[float(e), float(b), float(x)] for e, b, x in self.terms]}

    @staticmethod
    def from_record(record: dict) -> "MixtureGamma":
        try:
            kind = record["kind"]
            terms = np.asarray(record["terms"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed mixture record: {exc}") from exc
        if terms.ndim != 2 or terms.shape[1] != 3:
            raise ConfigError("mixture record terms must be an Nx3 array of [eps, beta, xi]")
        return MixtureGamma(terms[:, 0], terms[:, 1], terms[:, 2], kind=kind)


# -- fading specifications -----------------------------------------------------


@dataclass(frozen=True)
class FadingSpec:
    """Small-scale fading family for one link's amplitude.

    family is one of "nakagami", "rayleigh", "generic-pdf". For the generic
    family, pdf is the target power-gain density on (0, inf).
    """

    family: str
    m: float = 1.0
    omega: float = 1.0
    pdf: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in ("nakagami", "rayleigh", "generic-pdf"):
            raise ConfigError(f"unknown fading family {self.family!r}")
        if self.family == "nakagami" and self.m < 0.5:
            raise ConfigError("Nakagami shape m must be >= 0.5")
        if self.omega <= 0:
            raise ConfigError("mean power omega must be positive")
        if self.family == "generic-pdf" and self.pdf is None:
            raise ConfigError("generic-pdf fading needs a pdf callable")

    @staticmethod
    def nakagami(m: float, omega: float = 1.0) -> "FadingSpec":
        return FadingSpec("nakagami", m=m, omega=omega)

    @staticmethod
    def rayleigh(omega: float = 1.0) -> "FadingSpec":
        return FadingSpec("rayleigh", m=1.0, omega=omega)

    @staticmethod
    def generic(pdf: Callable, omega: float = 1.0) -> "FadingSpec":
        return FadingSpec("generic-pdf", omega=omega, pdf=pdf)


def from_pdf(target: Callable, u: float = 20.0, max_terms: int = 200) -> MixtureGamma:
    """Approximate an arbitrary density on (0, inf) by a Gamma mixture.

    Terms are (eps_i, beta_i, xi_i) = (u^{i-1}/Gamma(i) * f((i-1)/u), i, u)
    for i = 1..max_terms, renormalized to unit mass. Larger u refines the
    construction but needs max_terms ~ u * support to cover the target.
    """
    if not u > 0:
        raise ConfigError("u must be positive")
    if max_terms < 1:
        raise ConfigError("max_terms must be >= 1")
    total, _ = quad(target, 0.0, np.inf, limit=400)
    if abs(total - 1.0) > 1e-3:
        raise ConfigError(f"target pdf integrates to {total}, not 1 (within 1e-3)")
    i = np.arange(1, max_terms + 1)
    f = np.asarray(target((i - 1) / u), dtype=float)
    if np.any(f < 0):
        raise ConfigError("target pdf is negative on the construction grid")
    # weights are f((i-1)/u)/u; assemble eps in log space to dodge u^{i-1} overflow
    w = f / u
    mass = w.sum()
    if mass <= 0:
        raise NumericError("target pdf vanishes on the construction grid")
    with np.errstate(divide="ignore"):
        log_eps = (i - 1) * math.log(u) - sc.gammaln(i) + np.log(f) - math.log(mass)
    keep = f > 0
    eps = np.zeros_like(f)
    eps[keep] = np.exp(log_eps[keep])
    out = MixtureGamma(eps[keep], i[keep].astype(float), np.full(keep.sum(), u))
    return out.renormalized()


def fit_fading(spec: FadingSpec, u: float = 20.0, tail_tol: float = 1e-8) -> MixtureGamma:
    """Mixture-Gamma law of the power gain |g|^2 for a fading spec.

    Nakagami-m (and Rayleigh, m=1) power gains are a single exact term
    Gamma(shape m, rate m/omega). Generic targets go through from_pdf with
    max_terms grown until the trailing construction weight is below tail_tol.
    """
    if spec.family in ("nakagami", "rayleigh"):
        m, om = spec.m, spec.omega
        rate = m / om
        eps = math.exp(m * math.log(rate) - sc.gammaln(m))
        return MixtureGamma([eps], [m], [rate])
    n = max(int(4 * u), 64)
    while True:
        i = np.arange(1, n + 1)
        w = np.asarray(spec.pdf((i - 1) / u), dtype=float) / u
        total = w.sum()
        suffix = total - np.cumsum(w)
        inside = np.nonzero(suffix < tail_tol * total)[0]
        # the window itself must extend past the target's support before the
        # in-window suffix criterion means anything
        if inside.size and w[-1] < 0.1 * tail_tol * total:
            return from_pdf(spec.pdf, u=u, max_terms=int(inside[0]) + 1)
        n *= 2
        if n > 65536:
            raise NumericError("fit_fading could not reach the trailing-weight target")


def mmse_against(dist: MixtureGamma, x_grid: Sequence[float], ref_pdf: Sequence[float]) -> float:
    """Mean squared pdf difference over a grid.

    The grid must have >= 100 points and span at least the reference's
    [q_0.001, q_0.999] (quantiles estimated from the tabulated reference).
    """
    x = np.asarray(x_grid, dtype=float)
    ref = np.asarray(ref_pdf, dtype=float)
    if x.size < 100 or x.size != ref.size:
        raise ConfigError("grid too small: need >= 100 matched (x, pdf) samples")
    order = np.argsort(x)
    xs, rs = x[order], ref[order]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rs[1:] + rs[:-1]) * np.diff(xs))])
    # the tabulation must cover essentially all of the reference's mass and
    # reach into both tails; a few percent in the first/last cell is normal
    # for equal-width histograms of densities that diverge at the origin
    if cum[-1] < 0.97:
        raise ConfigError("grid too small: does not span the reference's q0.001..q0.999")
    share = cum / cum[-1]
    if share[1] > 0.05 or share[-2] < 0.95:
        raise ConfigError("grid too small: does not span the reference's q0.001..q0.999")
    return float(np.mean((dist.pdf(x) - ref) ** 2))
