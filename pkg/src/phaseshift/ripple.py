"""Steady-state common-link current under a phase-shift assignment.

The summed input current of all phases is rebuilt over one switching period,
its harmonic content is extracted by DFT, and four shift strategies (none,
even, analytic optimum, neural surrogate) are compared side by side.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DomainError
from .harmonics import OperatingPoint, SystemParams, phase_ripple
from .solver import even_shifts, shifts_for_operating_point, wrap_degrees

DEFAULT_SAMPLES = 4096


class Sampling(enum.Enum):
    AVERAGE = "average"
    POINT = "point"


class Method(enum.Enum):
    NO_PS = "NoPS"
    EVEN_PS = "EvenPS"
    OPTIMUM_PS = "OptimumPS"
    ANN_PS = "AnnPS"


@dataclass
class Waveform:
    samples: np.ndarray
    samples_per_period: int
    T_sw: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if len(self.samples) != self.samples_per_period:
            raise DomainError("a waveform holds exactly one period of samples")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples_per_period) * (self.T_sw / self.samples_per_period)


@dataclass
class SpectrumReport:
    k: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "amplitude_A", "phase_rad"])
            for k, a, p in zip(self.k, self.amplitude, self.phase):
                writer.writerow([int(k), f"{a:.12g}", f"{p:.12g}"])


@dataclass
class MethodResult:
    shifts: tuple[float, ...]
    a_in1: float
    rms: float
    dc: float
    spectrum: SpectrumReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"shifts_deg": list(self.shifts), "A_in1": self.a_in1, "rms": self.rms, "dc": self.dc}


@dataclass
class MethodComparison:
    results: dict[Method, MethodResult]

    def __getitem__(self, method) -> MethodResult:
        return self.results[Method(method)]

    def to_dict(self) -> dict:
        return {m.value: r.to_dict() for m, r in self.results.items()}


def _charge(s, i_out, d, ripple, T):
    """Integral of one phase's input current from 0 to ``s`` for any real ``s``."""
    t_on = d * T
    q_period = d * T * i_out
    n, r = np.divmod(s, T)
    slope = ripple / t_on
    start = i_out - ripple / 2.0
    on = np.minimum(r, t_on)
    return n * q_period + start * on + 0.5 * slope * on**2


def _phase_point_samples(t, i_out, d, ripple, T):
    r = np.mod(t, T)
    t_on = d * T
    return np.where(r <= t_on, (ripple / t_on) * r + i_out - ripple / 2.0, 0.0)


def synthesize_common_link(sys: SystemParams, op: OperatingPoint, shifts: Sequence[float],
                           samples_per_period: int = DEFAULT_SAMPLES,
                           sampling: Sampling | str = Sampling.AVERAGE) -> Waveform:
    """Sum every phase's pulsed input current, each delayed by ``shift/360 * T_sw``.

    Sample ``m`` sits at ``t_m = m * T_sw / M``. With ``sampling="average"``
    (default) it holds the exact mean current over ``[t_m - h/2, t_m + h/2]``,
    an ideal integrate-and-dump sampler, so the DFT converges as ``1/M**2``
    despite the switching edges. ``"point"`` takes instantaneous values.
    """
    if len(shifts) != sys.n_phases or len(op.i_out) != sys.n_phases:
        raise DomainError("shifts, operating point and system must agree on the phase count")
    if samples_per_period < 64:
        raise DomainError("samples_per_period must be >= 64")
    sampling = Sampling(sampling)
    T = sys.t_sw
    M = samples_per_period
    h = T / M
    t = np.arange(M) * h
    total = np.zeros(M)
    for n, phase in enumerate(sys.phases):
        ripple = phase_ripple(phase, op, sys)
        tau = wrap_degrees(shifts[n]) / 360.0 * T
        i_out, d = op.i_out[n], op.d[n]
        if sampling is Sampling.AVERAGE:
            hi = _charge(t + h / 2 - tau, i_out, d, ripple, T)
            lo = _charge(t - h / 2 - tau, i_out, d, ripple, T)
            total += (hi - lo) / h
        else:
            total += _phase_point_samples(t - tau, i_out, d, ripple, T)
    return Waveform(total, M, T)


def spectrum(w: Waveform, k_max: int) -> SpectrumReport:
    """One-sided harmonic amplitudes and phases, ``i = dc + sum A_k cos(k w t - phi_k)``."""
    M = w.samples_per_period
    if not 0 <= k_max < M / 2:
        raise DomainError(f"k_max must be < samples_per_period / 2 = {M / 2}")
    X = np.fft.rfft(w.samples)[: k_max + 1]
    amplitude = 2.0 * np.abs(X) / M
    amplitude[0] = X[0].real / M
    phase = -np.angle(X)
    phase[0] = 0.0
    phase = np.where(phase <= -math.pi, phase + 2 * math.pi, phase)
    return SpectrumReport(np.arange(k_max + 1), amplitude, phase)


def direct_dft(w: Waveform, k: int) -> complex:
    """Single DFT bin by explicit summation (reference for the FFT path)."""
    m = np.arange(w.samples_per_period)
    return complex(np.sum(w.samples * np.exp(-2j * math.pi * k * m / w.samples_per_period)))


def rms(w: Waveform) -> float:
    if w.samples.size == 0:
        raise DomainError("empty waveform")
    return float(np.sqrt(np.mean(w.samples**2)))


def _evaluate(sys, op, shifts, samples_per_period, k_max):
    w = synthesize_common_link(sys, op, shifts, samples_per_period)
    spec = spectrum(w, k_max)
    return MethodResult(tuple(float(s) for s in shifts), float(spec.amplitude[sys.k]), rms(w),
                        float(spec.amplitude[0]), spec)


def ann_shifts(model, op: OperatingPoint, counter_ratio: int = 120) -> list[float]:
    """Surrogate shifts for phases 2 and 3 (phase 1 at 0), snapped to the PWM grid."""
    from .mlp import predict_relative_shifts, quantize_to_pwm

    rel = predict_relative_shifts(model, op.as_features())
    return [0.0] + [float(quantize_to_pwm(r, counter_ratio)) for r in rel]


def compare_methods(sys: SystemParams, op: OperatingPoint, model=None, counter_ratio: int = 120,
                    samples_per_period: int = DEFAULT_SAMPLES, k_max: int = 20) -> MethodComparison:
    if sys.n_phases != 3:
        raise DomainError("the comparison is defined for three phases")
    plans = {
        Method.NO_PS: [0.0] * sys.n_phases,
        Method.EVEN_PS: even_shifts(sys.n_phases),
        Method.OPTIMUM_PS: list(shifts_for_operating_point(sys, op).shifts),
    }
    if model is not None:
        plans[Method.ANN_PS] = ann_shifts(model, op, counter_ratio)
    k_max = max(k_max, sys.k)
    return MethodComparison({m: _evaluate(sys, op, s, samples_per_period, k_max) for m, s in plans.items()})
