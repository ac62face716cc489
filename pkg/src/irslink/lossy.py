"""Distortion target -> SNR threshold -> compound-gain threshold.

A Bernoulli(p) source reconstructed within Hamming distortion D needs rate
R_s(D); with a Gaussian codebook at coding rate R_c the channel must support
C(gamma0) = 0.5 * log2(1 + gamma0) = R_c * R_s(D).
"""

import math
from dataclasses import dataclass

from .channel import LinkBudget
from .errors import ParameterError


@dataclass(frozen=True)
class SourceModel:
    p_src: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_src <= 0.5:
            raise ParameterError("Bernoulli bias must lie in [0, 0.5]")


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"probability out of range: {x!r}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def rate_distortion(src: SourceModel, d: float) -> float:
    if not 0.0 <= d <= 1.0:
        raise ParameterError(f"distortion out of range: {d!r}")
    if d >= src.p_src:
        return 0.0
    return binary_entropy(src.p_src) - binary_entropy(d)


def capacity(gamma: float) -> float:
    """Gaussian-codebook capacity in bits per channel use."""
    return 0.5 * math.log2(1.0 + gamma)


def snr_threshold_from_distortion(src: SourceModel, d: float, r_c: float) -> float:
    if not r_c > 0.0:
        raise ParameterError("coding rate must be positive")
    return 2.0 ** (2.0 * r_c * rate_distortion(src, d)) - 1.0


def budget_gamma0(budget: LinkBudget) -> float:
    """The budget's SNR threshold: explicit if set, else derived from distortion."""
    if budget.gamma0 is not None:
        return budget.gamma0
    return snr_threshold_from_distortion(SourceModel(budget.p_src), budget.distortion, budget.r_c)


def gain_threshold(budget: LinkBudget) -> float:
    """Smallest ``|H|`` that meets the SNR threshold, ``sqrt(gamma0 N0 PL / P_S)``."""
    if not budget.p_s > 0.0:
        raise ParameterError("transmit power must be positive")
    return math.sqrt(budget_gamma0(budget) * budget.n0 * budget.pl / budget.p_s)
