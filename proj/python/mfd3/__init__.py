"""Mean-field three-layer ReLU network under a Bessel radial input law."""

from ._core import (
    ConfigError,
    DistributionParams,
    NetworkState,
    NumericAbort,
    RadialDistribution,
    __version__,
    bessel_j,
    c_gamma,
    f_star,
    load_state,
    log_gamma,
    r_d,
    train,
)

__all__ = [
    "ConfigError",
    "DistributionParams",
    "NetworkState",
    "NumericAbort",
    "RadialDistribution",
    "bessel_j",
    "c_gamma",
    "f_star",
    "load_state",
    "log_gamma",
    "r_d",
    "train",
]
