"""Outage probability of the phase-aligned link, ``P(sum_i r_i r'_i < h0)``.

Two estimators:

* ``outage_mc`` draws channel realizations and counts outages.
* ``outage_quadrature`` integrates the envelope densities. Each hop's joint
  envelope law is a mixture over an exponential variable ``t`` of independent
  Rician envelopes (non-centrality ``sigma_k^2 lambda_k^2 t``, per-component
  variance ``sigma_k^2 (1 - lambda_k^2) / 2``). The outer integral runs over the
  two mixing variables; inside it the conditional outage probability is built
  element by element. With ``h`` the part of the threshold not yet used by
  elements ``1..i-1``, element ``i`` contributes only while
  ``r'_i < h / r_i``, leaving ``h - r_i r'_i`` for the remaining elements:

      F_i(h) = int f(r_i) int_0^{h / r_i} f(r'_i) F_{i+1}(h - r_i r'_i) dr'_i dr_i

  and the last element uses the Rician CDF of ``r'_M`` at ``h / r_M`` directly.
  Every ``F_i`` with ``i > 1`` is tabulated on a uniform grid over ``[0, h0]``
  and read back with cubic interpolation.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from ._kernels import level_kernel
from .channel import CorrelationProfile, PhaseConfig, compound_gain, draw_coefficients
from .errors import NumericalError, ParameterError
from .special import rician_cdf, rician_pdf
from .streams import child_seed

QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"
CLOSED_FORM = "closed_form"

MAX_QUADRATURE_ELEMENTS = 4
# Envelope supports are cut at nu +/- 8 conditional standard deviations.
SUPPORT_SDS = 8.0
# Convergence is judged relative to max(min(p, 1 - p), TAIL_FLOOR), the scale
# of the smaller tail; probabilities within the floor of 0 or 1 only get
# absolute accuracy tol * TAIL_FLOOR.
TAIL_FLOOR = 1e-5
# Mixing-variable split between the Legendre and Laguerre rules.
MIXING_SPLIT = 2.0
MC_CHUNK = 1 << 17

# Outer envelope rules use Gauss-Legendre panels whose breakpoints crowd the
# lower end of the support, where the small-threshold structure lives.
PANEL_BREAKS = (1.0 / 512.0, 1.0 / 64.0, 1.0 / 8.0, 0.25, 0.375, 0.5, 0.625, 0.75)

# (mixing nodes per hop, nodes per outer envelope panel, inner envelope nodes,
# table points)
DEFAULT_SCHEDULE = (
    (8, 3, 16, 25),
    (10, 4, 24, 33),
    (12, 5, 32, 49),
    (16, 6, 40, 65),
    (24, 12, 48, 97),
    (32, 16, 64, 129),
)


@dataclass(frozen=True)
class OutageEstimate:
    value: float
    std_error: float
    method: str
    samples_or_evals: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"outage probability out of range: {self.value!r}")
        if not self.std_error >= 0.0:
            raise ParameterError("standard error must be non-negative")


def outage_closed_form_m1(h0: float, sigma: float = 1.0, sigma_prime: float = 1.0) -> float:
    """CDF of the product of two independent Rayleigh envelopes.

    With ``E r^2 = sigma^2`` and ``E r'^2 = sigma'^2``,
    ``P(r r' < h) = 1 - z K1(z)`` where ``z = 2 h / (sigma sigma')``.
    """
    if h0 < 0 or sigma <= 0 or sigma_prime <= 0:
        raise ParameterError("threshold must be >= 0 and scales > 0")
    if h0 == 0:
        return 0.0
    z = 2.0 * h0 / (sigma * sigma_prime)
    # k1e keeps z K1(z) finite for large z
    return float(1.0 - z * sc.k1e(z) * math.exp(-z))


def _check_profiles(profile1: CorrelationProfile, profile2: CorrelationProfile, h0: float):
    if profile1.size != profile2.size:
        raise ParameterError("both hops need the same number of elements")
    if not (h0 >= 0 and math.isfinite(h0)):
        raise ParameterError("threshold must be finite and non-negative")


def _count_chunk(profile1, profile2, h0, n, seed, index, phases):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    ch = draw_coefficients(profile1, profile2, rng, n=n)
    if phases is None:
        gain = np.sum(np.abs(ch.g) * np.abs(ch.g_prime), axis=-1)
    else:
        gain = np.abs(compound_gain(ch, phases))
    return int(np.count_nonzero(gain < h0))


def outage_mc(
    profile1: CorrelationProfile,
    profile2: CorrelationProfile,
    h0: float,
    n: int,
    rng: np.random.Generator,
    phases: PhaseConfig | None = None,
    workers: int = 1,
) -> OutageEstimate:
    """Monte-Carlo outage estimate from ``n`` realizations.

    Phases are optimally aligned per realization unless a fixed ``phases``
    configuration is given. Samples are split into fixed-size chunks keyed by
    one seed drawn from ``rng`` and the chunk index, so the result does not
    depend on ``workers``.
    """
    _check_profiles(profile1, profile2, h0)
    if n < 1:
        raise ParameterError("sample count must be positive")
    if phases is not None and phases.size != profile1.size:
        raise ParameterError("phase vector length does not match the channel")
    seed = child_seed(rng)
    sizes = [min(MC_CHUNK, n - start) for start in range(0, n, MC_CHUNK)]
    jobs = [(profile1, profile2, h0, size, seed, k, phases) for k, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(lambda job: _count_chunk(*job), jobs))
    else:
        counts = [_count_chunk(*job) for job in jobs]
    k = sum(counts)
    # continuity-corrected proportion keeps the error nonzero when k is 0 or n
    q = (k + 0.5) / (n + 1.0)
    return OutageEstimate(k / n, math.sqrt(q * (1.0 - q) / n), MONTE_CARLO, n)


def _mixing_rule(profile: CorrelationProfile, n_outer: int):
    """Nodes and weights for int_0^inf exp(-t) g(t) dt.

    On [0, MIXING_SPLIT] Gauss-Legendre runs in u = 1 - exp(-t), which packs
    nodes near t = 0 where small thresholds concentrate their mass. The tail
    beyond the split uses shifted Gauss-Laguerre with as many nodes; it
    carries the complement of outage probabilities close to one.
    """
    if np.all(profile.lambdas == 0.0):
        # the conditional law does not depend on t
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(n_outer)
    u_split = -math.expm1(-MIXING_SPLIT)
    u = 0.5 * u_split * (x + 1.0)
    s, ws = np.polynomial.laguerre.laggauss(n_outer)
    nodes = np.concatenate([-np.log1p(-u), MIXING_SPLIT + s])
    weights = np.concatenate([0.5 * u_split * w, math.exp(-MIXING_SPLIT) * ws])
    return nodes, weights


def _support(nu, s):
    lo = np.maximum(nu - SUPPORT_SDS * s, 0.0)
    return lo, nu + SUPPORT_SDS * s


def _padded(table: np.ndarray) -> np.ndarray:
    # F vanishes for negative budgets, so the left ghost point is exactly 0;
    # the right ghost extrapolates quadratically.
    right = 3.0 * table[:, -1] - 3.0 * table[:, -2] + table[:, -3]
    zeros = np.zeros((table.shape[0], 1))
    return np.concatenate([zeros, table, right[:, None]], axis=1)


def _interp_cubic(padded: np.ndarray, step: float, x: np.ndarray) -> np.ndarray:
    """Catmull-Rom interpolation of row ``b`` of ``padded`` at ``x[b, ...]``.

    Arguments below zero return 0.
    """
    n_rows, n_pad = padded.shape
    n_pts = n_pad - 2
    pos = np.clip(x / step, 0.0, n_pts - 1)
    i = np.minimum(pos.astype(np.intp), n_pts - 2)
    u = pos - i
    base = (np.arange(n_rows) * n_pad).reshape((n_rows,) + (1,) * (x.ndim - 1))
    flat = padded.ravel()
    k = base + i  # index of F[i - 1] in the padded row
    p0, p1, p2, p3 = flat[k], flat[k + 1], flat[k + 2], flat[k + 3]
    val = p1 + 0.5 * u * (
        (p2 - p0) + u * ((2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) + u * (3.0 * (p1 - p2) + p3 - p0))
    )
    return np.where(x > 0.0, val, 0.0)


class _Conditional:
    """Conditional outage probability on a fixed quadrature resolution."""

    def __init__(
        self, profile1, profile2, h0: float, n_panel: int, n_inner: int, n_table: int, compiled: bool = True
    ):
        self.compiled = compiled
        self.m = profile1.size
        self.h0 = h0
        self.s1 = np.sqrt(profile1.omega_sq)
        self.s2 = np.sqrt(profile2.omega_sq)
        self.c1 = profile1.sigmas * np.abs(profile1.lambdas)
        self.c2 = profile2.sigmas * np.abs(profile2.lambdas)
        self.panel_x, self.panel_w = np.polynomial.legendre.leggauss(n_panel)
        self.gl_x, self.gl_w = np.polynomial.legendre.leggauss(n_inner)
        self.grid = np.linspace(0.0, h0, n_table)
        self.step = self.grid[1]
        self.evals = 0

    def _hop1_nodes(self, t: float, k: int):
        nu = self.c1[k] * math.sqrt(t)
        lo, hi = _support(nu, self.s1[k])
        edges = lo + (hi - lo) * np.array([0.0, *PANEL_BREAKS, 1.0])
        half = 0.5 * np.diff(edges)[:, None]
        r = (edges[:-1, None] + half * (self.panel_x + 1.0)).ravel()
        w = (half * self.panel_w).ravel()
        return r, w * rician_pdf(r, nu, self.s1[k])

    def _innermost(self, t, nu2, h):
        # h: (H,), nu2: (B,) -> (B, H)
        k = self.m - 1
        r, w = self._hop1_nodes(t, k)
        x = h[None, :, None] / r[None, None, :]
        cdf = rician_cdf(x, nu2[:, None, None], self.s2[k])
        self.evals += cdf.size
        return cdf @ w

    def _level(self, t, k, nu2, h, table):
        # integrate element k over r_k and r'_k < h / r_k, then read F_{k+1}
        if not self.compiled:
            return self._level_reference(t, k, nu2, h, table)
        r, w = self._hop1_nodes(t, k)
        lo2, hi2 = _support(nu2, self.s2[k])
        self.evals += nu2.size * h.size * r.size * self.gl_x.size
        return level_kernel(
            r, w, nu2, self.s2[k] ** 2, lo2, hi2, h, self.gl_x, self.gl_w, _padded(table), self.step
        )

    def _level_reference(self, t, k, nu2, h, table):
        # vectorized form of level_kernel, kept as its cross-check
        r, w = self._hop1_nodes(t, k)  # (R,)
        lo2, hi2 = _support(nu2, self.s2[k])  # (B,)
        lo2 = lo2[:, None, None]
        upper = np.minimum(hi2[:, None, None], h[None, :, None] / r[None, None, :])
        half = 0.5 * np.maximum(upper - lo2, 0.0)  # (B, H, R)
        rp = lo2[..., None] + half[..., None] * (self.gl_x + 1.0)  # (B, H, R, R')
        dens = rician_pdf(rp, nu2[:, None, None, None], self.s2[k])
        rest = h[None, :, None, None] - r[None, None, :, None] * rp
        shape = rest.shape
        inner = _interp_cubic(_padded(table), self.step, rest.reshape(shape[0], -1)).reshape(shape)
        self.evals += inner.size
        inner_int = np.einsum("bhrl,l->bhr", dens * inner, self.gl_w) * half
        return inner_int @ w

    def probability(self, t: float, nu2_coeff: np.ndarray) -> np.ndarray:
        """Outage probability given hop-1 mixing value ``t``, for each hop-2 node.

        ``nu2_coeff`` holds sqrt(t') for the hop-2 nodes, shape (B,).
        """
        target = np.array([self.h0])
        if self.m == 1:
            return self._innermost(t, self.c2[0] * nu2_coeff, target)[:, 0]
        table = self._innermost(t, self.c2[-1] * nu2_coeff, self.grid)
        for k in range(self.m - 2, 0, -1):
            table = self._level(t, k, self.c2[k] * nu2_coeff, self.grid, table)
        return self._level(t, 0, self.c2[0] * nu2_coeff, target, table)[:, 0]


def _quadrature_value(profile1, profile2, h0, n_outer, n_panel, n_inner, n_table, compiled=True):
    t1, w1 = _mixing_rule(profile1, n_outer)
    t2, w2 = _mixing_rule(profile2, n_outer)
    cond = _Conditional(profile1, profile2, h0, n_panel, n_inner, n_table, compiled)
    sqrt_t2 = np.sqrt(t2)
    total = 0.0
    for t, w in zip(t1, w1):
        total += w * float(cond.probability(t, sqrt_t2) @ w2)
    return float(total), cond.evals


def outage_quadrature(
    profile1: CorrelationProfile,
    profile2: CorrelationProfile,
    h0: float,
    tol: float = 1e-4,
    schedule=DEFAULT_SCHEDULE,
) -> OutageEstimate:
    """Outage probability by nested quadrature over the envelope densities.

    Runs the resolutions in ``schedule`` in order and stops once two
    consecutive values differ by at most ``tol * max(min(p, 1 - p), TAIL_FLOOR)``. Raises
    :class:`NumericalError` if the schedule is exhausted first.
    """
    _check_profiles(profile1, profile2, h0)
    if profile1.size > MAX_QUADRATURE_ELEMENTS:
        raise ParameterError(f"quadrature supports at most {MAX_QUADRATURE_ELEMENTS} elements")
    if not tol > 0:
        raise ParameterError("tolerance must be positive")
    if h0 == 0:
        return OutageEstimate(0.0, 0.0, QUADRATURE, 0)
    evals = 0
    previous = None
    change = math.inf
    for resolution in schedule:
        value, used = _quadrature_value(profile1, profile2, h0, *resolution)
        evals += used
        if previous is not None:
            change = abs(value - previous) / max(min(value, 1.0 - value), TAIL_FLOOR)
            if change <= tol:
                return OutageEstimate(min(max(value, 0.0), 1.0), 0.0, QUADRATURE, evals)
        previous = value
    raise NumericalError("outage quadrature did not converge", change)
