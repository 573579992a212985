"""Interferometric heat statistics: exact oracles, ancilla circuits and a trapped-ion model."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    CutoffError,
    HeatlineError,
    IllPosedGridError,
    NumericalError,
    ValidationError,
)
from .heat import (  # noqa: E402
    HeatDistribution,
    LandauerReport,
    ProtocolInstance,
    average_heat,
    characteristic_direct,
    characteristic_from_distribution,
    landauer_report,
    tpm_distribution,
)
from .interferometer import readout_theta, run_circuit, sample_shots, shot_plans  # noqa: E402
from .ion import IonParameters, build_protocol, conditional_shift, elimination_report  # noqa: E402
from .spectroscopy import gap_set, reconstruct, time_grid  # noqa: E402
from .thermal import gibbs_state, is_passive, thermal_oscillator  # noqa: E402

__all__ = [
    "__version__", "HeatlineError", "ConfigurationError", "ValidationError", "NumericalError",
    "CutoffError", "IllPosedGridError", "HeatDistribution", "LandauerReport", "ProtocolInstance",
    "average_heat", "characteristic_direct", "characteristic_from_distribution", "landauer_report",
    "tpm_distribution", "readout_theta", "run_circuit", "sample_shots", "shot_plans", "IonParameters",
    "build_protocol", "conditional_shift", "elimination_report", "gap_set", "reconstruct", "time_grid",
    "gibbs_state", "is_passive", "thermal_oscillator",
]
