"""Correlated Rayleigh channel for a two-hop link through an M-element IRS.

Each hop uses the single-common-component model: element ``i`` mixes its own
complex Gaussian with one shared complex Gaussian, weighted by ``lambda_i``.
All complex Gaussians here have ``E|G_i|^2 = sigma_i^2`` (each quadrature
component carries half of that variance).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .special import bessel_i0, bessel_i0e

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CorrelationProfile:
    """Per-element correlation factors and scales for one hop."""

    lambdas: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        sig = np.atleast_1d(np.asarray(self.sigmas, dtype=float))
        if lam.ndim != 1 or lam.shape != sig.shape or lam.size < 1:
            raise ParameterError("lambdas and sigmas must be 1-D vectors of equal length >= 1")
        if np.any(~np.isfinite(lam)) or np.any(np.abs(lam) >= 1.0):
            raise ParameterError("correlation factors must lie in (-1, 1)")
        if np.any(~np.isfinite(sig)) or np.any(sig <= 0.0):
            raise ParameterError("scale parameters must be positive")
        lam.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def uniform(cls, lambdas, sigma: float = 1.0) -> "CorrelationProfile":
        lam = np.asarray(lambdas, dtype=float)
        return cls(lam, np.full(lam.shape, sigma))

    @property
    def size(self) -> int:
        return self.lambdas.size

    @property
    def omega_sq(self) -> np.ndarray:
        """Conditional per-component variance ``sigma^2 (1 - lambda^2) / 2``."""
        return self.sigmas**2 * (1.0 - self.lambdas**2) / 2.0

    def swapped(self) -> "CorrelationProfile":
        return CorrelationProfile(self.lambdas[::-1], self.sigmas[::-1])


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the BS->IRS (``g``) and IRS->user (``g_prime``) coefficients.

    Arrays may carry leading batch dimensions; the last axis indexes elements.
    """

    g: np.ndarray
    g_prime: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        gp = np.asarray(self.g_prime, dtype=complex)
        if g.ndim < 1 or g.shape != gp.shape:
            raise ParameterError("g and g_prime must have identical shapes")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(gp))):
            raise ParameterError("channel coefficients must be finite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_prime", gp)

    @property
    def size(self) -> int:
        return self.g.shape[-1]


@dataclass(frozen=True)
class PhaseConfig:
    """IRS phase shifts in radians, each wrapped to ``[0, 2*pi)``."""

    thetas: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.thetas, dtype=float)
        if th.ndim < 1 or not np.all(np.isfinite(th)):
            raise ParameterError("phases must be a finite vector")
        object.__setattr__(self, "thetas", wrap_phase(th))

    @classmethod
    def zeros(cls, m: int) -> "PhaseConfig":
        return cls(np.zeros(m))

    @property
    def size(self) -> int:
        return self.thetas.shape[-1]


@dataclass(frozen=True)
class LinkBudget:
    """Linear-unit link parameters.

    ``gamma0`` is optional: when None the SNR threshold is derived from the
    distortion target via source-channel separation.
    """

    p_s: float
    n0: float
    pl: float
    r_c: float = 1.0
    p_src: float = 0.5
    distortion: float = 0.0
    gamma0: float | None = None

    def __post_init__(self):
        for name in ("p_s", "n0", "pl", "r_c"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ParameterError(f"{name} must be positive, got {value!r}")
        if not 0.0 <= self.p_src <= 0.5:
            raise ParameterError("source bias must lie in [0, 0.5]")
        if not 0.0 <= self.distortion <= 1.0:
            raise ParameterError("distortion must lie in [0, 1]")
        if self.gamma0 is not None and not self.gamma0 >= 0.0:
            raise ParameterError("gamma0 must be non-negative")


def wrap_phase(theta):
    """Wrap angles to ``[0, 2*pi)``; guards the ``fmod`` rounding edge at 2*pi."""
    out = np.mod(theta, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def _draw_hop(profile: CorrelationProfile, n: int | None, rng: np.random.Generator) -> np.ndarray:
    m = profile.size
    shape = (m,) if n is None else (n, m)
    common_shape = (1,) if n is None else (n, 1)
    # Each real component ~ N(0, 1/2).
    scale = np.sqrt(0.5)
    x0 = rng.normal(0.0, scale, common_shape)
    y0 = rng.normal(0.0, scale, common_shape)
    xi = rng.normal(0.0, scale, shape)
    yi = rng.normal(0.0, scale, shape)
    lam, sig = profile.lambdas, profile.sigmas
    own = np.sqrt(1.0 - lam**2)
    return sig * (own * xi + lam * x0) + 1j * sig * (own * yi + lam * y0)


def draw_coefficients(
    profile1: CorrelationProfile,
    profile2: CorrelationProfile,
    rng: np.random.Generator,
    n: int | None = None,
) -> ChannelRealization:
    """Draw hop coefficients; with ``n`` set, returns ``n`` stacked realizations.

    The first hop consumes its draws from ``rng`` before the second, so the
    hops never share random numbers.
    """
    if profile1.size != profile2.size:
        raise ParameterError("both hops need the same number of elements")
    return ChannelRealization(_draw_hop(profile1, n, rng), _draw_hop(profile2, n, rng))


# Mixing-variable integration: t in [0, T_MAX] with exp(-t) weighting, so the
# neglected tail is below exp(-40) ~ 4e-18.
T_MAX = 40.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
MAX_PANELS = 64


def _panel_rule(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    weights = (half[:, None] * _GL_WEIGHTS).ravel()
    return nodes, weights


def joint_envelope_pdf(
    profile: CorrelationProfile,
    r,
    rtol: float = 1e-8,
    i0_order: int | None = None,
):
    """Joint density of the envelopes ``|G_1|, ..., |G_M|`` of one hop.

    The envelopes are independent Rician given the exponential mixing variable
    ``t``; the density is the ``exp(-t)``-weighted integral of that product over
    ``t``. The integral uses 16-point Gauss-Legendre panels on ``[0, T_MAX]``,
    doubling the panel count until successive results change by less than
    ``rtol``. ``r`` may carry leading batch dimensions.

    ``i0_order`` swaps the Bessel evaluation for its truncated Taylor series,
    for comparing against the low-order approximation.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1:] != (profile.size,):
        raise ParameterError(f"r must have trailing dimension {profile.size}")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ParameterError("envelope values must be finite and non-negative")

    om2 = profile.omega_sq
    nu_coef = profile.sigmas * np.abs(profile.lambdas)

    def integrate(panels: int) -> np.ndarray:
        t, w = _panel_rule(0.0, T_MAX, panels)
        nu = nu_coef * np.sqrt(t)[:, None]  # (nodes, M)
        rr = r[..., None, :]  # (..., 1, M)
        arg = rr * nu / om2
        if i0_order is None:
            log_bessel = np.log(bessel_i0e(arg)) + arg
        else:
            log_bessel = np.log(bessel_i0(arg, order=i0_order))
        with np.errstate(divide="ignore"):
            log_terms = np.log(rr) - np.log(om2) - (rr**2 + nu**2) / (2.0 * om2) + log_bessel
        log_integrand = -t + np.sum(log_terms, axis=-1)
        return np.exp(log_integrand) @ w

    panels = 1
    previous = integrate(panels)
    while True:
        panels *= 2
        current = integrate(panels)
        scale = np.maximum(np.abs(current), np.finfo(float).tiny)
        change = float(np.max(np.abs(current - previous) / scale))
        if change < rtol:
            return current if current.ndim else float(current)
        if panels >= MAX_PANELS:
            raise NumericalError("mixing integral did not converge", change)
        previous = current


def compound_gain(ch: ChannelRealization, phases: PhaseConfig):
    """``H = sum_i G_i exp(j theta_i) G'_i``, batched over leading dimensions."""
    if ch.size != phases.size:
        raise ParameterError(f"{ch.size} channel elements but {phases.size} phases")
    return np.sum(ch.g * np.exp(1j * phases.thetas) * ch.g_prime, axis=-1)


def received_power(ch: ChannelRealization, phases: PhaseConfig, budget: LinkBudget):
    """Received power in watts, ``P_S |H|^2 / PL``."""
    return budget.p_s * np.abs(compound_gain(ch, phases)) ** 2 / budget.pl


def optimal_gain(ch: ChannelRealization):
    """Phase-aligned gain ``sum_i |G_i| |G'_i|``."""
    return np.sum(np.abs(ch.g) * np.abs(ch.g_prime), axis=-1)


def optimal_phases(ch: ChannelRealization) -> tuple[PhaseConfig, float]:
    """Phases that co-phase every reflected path, and the resulting gain."""
    thetas = wrap_phase(-(np.angle(ch.g) + np.angle(ch.g_prime)))
    return PhaseConfig(thetas), optimal_gain(ch)
