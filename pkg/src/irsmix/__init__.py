"""Mixture-Gamma channel modeling and stochastic-geometry performance
analysis for IRS-assisted downlink networks, with a built-in Monte-Carlo
oracle for end-to-end verification."""

__version__ = "0.1.0"

from .channel import (
    IrsSpec,
    LinkGeometry,
    cascade_k,
    cascaded_gain,
    direct_gain,
    mixture_gain,
    mixture_gain_normalized,
    product_pair,
    quadratic_form,
)
from .errors import ConfigError, IrsmixError, NumericError
from .geometry import (
    Mode,
    NetworkConfig,
    association_mode,
    conditional_link_distance,
    dbm_to_watt,
    nearest_distance_cdf,
    nearest_distance_pdf,
)
from .interference import (
    InterferenceContext,
    Population,
    eta_mean,
    interference_cdf,
    laplace_cascaded_interference,
    laplace_direct_interference,
    laplace_total,
)
from .metrics import (
    SinrContext,
    expected_g,
    network_metrics,
    outage_probability,
    signal_law,
    sinr_moment,
    spectral_efficiency,
)
from .mixgamma import FadingSpec, MixtureGamma, fit_fading, from_pdf, mmse_against
from .montecarlo import (
    SimulationResult,
    estimate_channel_law,
    estimate_interference_laplace,
    estimate_metrics,
    sample_realization,
    simulate,
)
from .specfun import (
    QuadratureRule,
    bessel_k,
    gauss_laguerre_rule,
    generalized_binomial,
    kummer_1f1,
    log_gamma,
    lower_incomplete_gamma,
)

__all__ = [name for name in dir() if not name.startswith("_")]
