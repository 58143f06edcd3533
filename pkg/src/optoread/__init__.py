"""Simulator and noise-budget engine for optically mediated single-shot
readout of a dispersively coupled superconducting qubit through an
electro-optomechanical transducer."""

from ._kernels import backend
from .config import ConfigError, RunConfig, load_config
from .montecarlo import (AnalyticFidelity, HistogramPair, ShotModel,
                         ShotRecord, analytic_fidelity,
                         histogram_from_voltages, optimal_threshold,
                         rabi_scan, run_histograms, simulate_shot)
from .noise import (NoiseParams, autocorrelation, output_spectrum,
                    s_t0_for_noise_target, sample_noise,
                    square_weight_noise_number)
from .params import (CircuitQedParams, EfficiencyBudget, OperatingPoint,
                     ParameterError, TransducerParams, damping_rate,
                     dephasing_rate, dispersive_shift, effective_occupancy,
                     efficiency_budget, eta_bandwidth, eta_gain,
                     eta_transducer, occupancy_from_lifetimes, pump_photons,
                     stark_shift)
from .readout import (CalibrationResult, DegenerateFilterError, FitError,
                      FlatChain, MatchedFilter, PointerTrajectory,
                      ReadoutBundle, ReadoutPulse, ReadoutStatistics,
                      TransducerChain, UpconvertedMeans,
                      calibrate_quantum_efficiency, cavity_response,
                      evaluate_readout, fidelity_formula, fit_calibration,
                      integrated_stats, matched_filter,
                      measurement_dephasing, snr_from_budget,
                      transducer_noise_number, upconvert)
from .statespace import (NumericsError, PropagationResult, QuadratureTrace,
                         StateSpaceModel, build_model, dump_matrices,
                         propagate, steady_state_covariance, transfer_matrix)

__version__ = "0.1.0"
