"""Outage analysis and DDPG phase control for an IRS-assisted lossy link."""

from .channel import (
    ChannelRealization,
    CorrelationProfile,
    LinkBudget,
    PhaseConfig,
    compound_gain,
    draw_coefficients,
    joint_envelope_pdf,
    optimal_phases,
    received_power,
)
from .errors import ConfigError, ContractError, NumericalError, ParameterError
from .lossy import SourceModel, binary_entropy, gain_threshold, rate_distortion, snr_threshold_from_distortion
from .outage import OutageEstimate, outage_closed_form_m1, outage_mc, outage_quadrature

__version__ = "0.1.0"
