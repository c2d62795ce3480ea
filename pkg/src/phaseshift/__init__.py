"""Optimum phase shifting for selective harmonic elimination in parallel buck converters."""
from .dsss import (Dataset, DutyMode, Provenance, SweepSpec, generate_dataset, grid_points,
                   read_dataset, split_test_validation, write_dataset)
from .estimator import AnalyticPhaseShifter, PhaseShiftRegressor
from .exceptions import (ConfigError, DatasetParseError, DegenerateWaveformError, DomainError,
                         ModelLoadError, ResourceError, TrainingError)
from .harmonics import (ConverterPhase, FourierCoeffs, HarmonicPhasor, OperatingPoint, SystemParams,
                        fourier_coefficients, full_load_point, inductor_ripple, input_current_sample,
                        phasor_for_phase, phasors_for_system, quadrature_oracle_coefficients,
                        reference_system, to_phasor)
from .mlp import (EvalReport, MlpModel, TrainConfig, build_model, count_flops, count_params,
                  evaluate, fit, forward, fuse_normalization, load_model, predict, quantize_to_pwm,
                  save_model, train)
from .ripple import (MethodComparison, SpectrumReport, Waveform, compare_methods, rms, spectrum,
                     synthesize_common_link)
from .solver import (CancellationMode, PhaseShiftSolution, even_shifts, grid_search_optimum,
                     resultant_phasor, shifts_for_operating_point, solve_optimum_three)

__version__ = "0.1.0"
