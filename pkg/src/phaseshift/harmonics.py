"""Pulsed input current of a buck converter and its harmonic phasors.

During the ON interval a buck converter draws its inductor current from the
input: a ramp from ``i_out - ripple/2`` to ``i_out + ripple/2``. During the
OFF interval the input current is zero. Each harmonic of that pulse train is
summarised as a phasor ``(A, phi)`` under the cosine convention

    i(t) = dc + sum_k A_k * cos(k*w*t - phi_k)

so that ``a_k = A cos(phi)`` and ``b_k = A sin(phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import simpson

from .exceptions import DegenerateWaveformError, DomainError

# Magnitudes below this are treated as exactly zero downstream.
EPS_A = 1e-9

ORACLE_SAMPLES = 100_001


@dataclass(frozen=True)
class ConverterPhase:
    inductance: float
    v_out_target: float
    rated_power: float
    index: int = 1

    def __post_init__(self):
        for name in ("inductance", "v_out_target", "rated_power"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if self.index < 1:
            raise DomainError(f"phase index is 1-based, got {self.index}")

    @property
    def rated_current(self) -> float:
        return self.rated_power / self.v_out_target


@dataclass(frozen=True)
class SystemParams:
    phases: tuple[ConverterPhase, ...]
    f_sw: float
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise DomainError("at least one phase is required")
        if not (math.isfinite(self.f_sw) and self.f_sw > 0):
            raise DomainError(f"f_sw must be finite and > 0, got {self.f_sw!r}")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"harmonic order must be an integer >= 1, got {self.k!r}")
        for pos, phase in enumerate(self.phases, start=1):
            if phase.index != pos:
                raise DomainError(f"phase at position {pos} carries index {phase.index}")

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def t_sw(self) -> float:
        return 1.0 / self.f_sw


@dataclass(frozen=True)
class OperatingPoint:
    i_out: tuple[float, ...]
    d: tuple[float, ...]
    v_in: float

    def __post_init__(self):
        object.__setattr__(self, "i_out", tuple(float(x) for x in self.i_out))
        object.__setattr__(self, "d", tuple(float(x) for x in self.d))
        if len(self.i_out) != len(self.d):
            raise DomainError("i_out and d must have the same length")
        if not (math.isfinite(self.v_in) and self.v_in > 0):
            raise DomainError(f"v_in must be finite and > 0, got {self.v_in!r}")
        for n, (i, d) in enumerate(zip(self.i_out, self.d), start=1):
            if not (math.isfinite(i) and i >= 0):
                raise DomainError(f"i_out[{n}] must be finite and >= 0, got {i!r}")
            if not (0.0 < d < 1.0):
                raise DomainError(f"d[{n}] must lie in (0, 1), got {d!r}")

    @classmethod
    def from_vin(cls, sys: SystemParams, i_out: Sequence[float], v_in: float) -> "OperatingPoint":
        """Operating point with ideal CCM duty ratios ``d = v_out / v_in``."""
        d = [p.v_out_target / v_in for p in sys.phases]
        return cls(tuple(i_out), tuple(d), v_in)

    def as_features(self) -> np.ndarray:
        return np.array([*self.i_out, *self.d, self.v_in], dtype=float)


@dataclass(frozen=True)
class FourierCoeffs:
    a0: float
    a_k: float
    b_k: float


@dataclass(frozen=True)
class HarmonicPhasor:
    magnitude: float
    phase: float

    @property
    def is_zero(self) -> bool:
        return self.magnitude < EPS_A


def reference_system(k: int = 1) -> SystemParams:
    """Three-phase laptop-class prototype: 5 V/10 W, 2.5 V/5 W, 3.3 V/5 W at 200 kHz."""
    phases = (
        ConverterPhase(63.4e-6, 5.0, 10.0, 1),
        ConverterPhase(48.1e-6, 2.5, 5.0, 2),
        ConverterPhase(76.3e-6, 3.3, 5.0, 3),
    )
    return SystemParams(phases, 200e3, k)


def full_load_point(sys: SystemParams, v_in: float = 12.6, load: float = 1.0) -> OperatingPoint:
    return OperatingPoint.from_vin(sys, [load * p.rated_current for p in sys.phases], v_in)


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}")


def inductor_ripple(d: float, v_in: float, L: float, f_sw: float) -> float:
    """Peak-to-peak inductor ripple of a buck converter in CCM."""
    _check_finite(d=d, v_in=v_in, L=L, f_sw=f_sw)
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"duty ratio must lie in [0, 1], got {d}")
    if v_in <= 0 or L <= 0 or f_sw <= 0:
        raise DomainError("v_in, L and f_sw must be > 0")
    return (1.0 - d) * d * v_in / (L * f_sw)


def input_current_sample(t, i_out, d, ripple, T_sw):
    """Input current at time ``t`` within one switching period.

    Accepts scalar or array ``t``; every value must satisfy ``0 <= t < T_sw``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr >= T_sw):
        raise DomainError("t must lie in [0, T_sw); wrap with modulo first")
    t_on = d * T_sw
    on = t_arr <= t_on
    slope = ripple / t_on if t_on > 0 else 0.0
    out = np.where(on, slope * t_arr + i_out - ripple / 2.0, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _check_coeff_args(d, T_sw, k):
    if not 0.0 < d < 1.0:
        raise DegenerateWaveformError(f"duty ratio must lie strictly inside (0, 1), got {d}")
    if int(k) != k or k < 1:
        raise DomainError(f"harmonic order must be an integer >= 1, got {k!r}")
    if not T_sw > 0:
        raise DomainError("T_sw must be > 0")


def fourier_coefficients(i_out: float, d: float, ripple: float, T_sw: float, k: int) -> FourierCoeffs:
    """Closed-form cosine/sine coefficients of the pulsed input current.

    With ``x = 2*pi*k*d`` (the ON interval in harmonic radians):

        a_k = [(i_out + r/2) sin x + (r/x)(cos x - 1)] / (k pi)
        b_k = [(r/x) sin x - (i_out + r/2) cos x + (i_out - r/2)] / (k pi)

    ``a0`` is the true mean ``d * i_out`` (no half-amplitude convention).
    """
    _check_coeff_args(d, T_sw, k)
    x = 2.0 * math.pi * k * d
    peak = i_out + ripple / 2.0
    valley = i_out - ripple / 2.0
    sx, cx = math.sin(x), math.cos(x)
    a_k = (peak * sx + (ripple / x) * (cx - 1.0)) / (k * math.pi)
    b_k = ((ripple / x) * sx - peak * cx + valley) / (k * math.pi)
    return FourierCoeffs(d * i_out, a_k, b_k)


def quadrature_oracle_coefficients(i_out: float, d: float, ripple: float, T_sw: float, k: int,
                                   n_samples: int = ORACLE_SAMPLES) -> FourierCoeffs:
    """Fourier coefficients by composite Simpson quadrature of the sampled waveform.

    The integrand vanishes on the OFF interval, so only ``[0, d*T_sw]`` is
    integrated; there the waveform is smooth and Simpson's rule converges as
    ``h**4``.
    """
    _check_coeff_args(d, T_sw, k)
    if n_samples < 100_001:
        raise DomainError("the oracle needs at least 1e5 samples")
    if n_samples % 2 == 0:
        n_samples += 1
    t = np.linspace(0.0, d * T_sw, n_samples)
    i_t = input_current_sample(t, i_out, d, ripple, T_sw)
    kwt = k * (2.0 * math.pi / T_sw) * t
    integrands = np.stack([i_t, i_t * np.cos(kwt), i_t * np.sin(kwt)])
    m0, mc, ms = simpson(integrands, dx=t[1] - t[0], axis=-1) / T_sw
    a0, a_k, b_k = m0, 2.0 * mc, 2.0 * ms
    return FourierCoeffs(float(a0), float(a_k), float(b_k))


def to_phasor(coeffs: FourierCoeffs) -> HarmonicPhasor:
    a, b = coeffs.a_k, coeffs.b_k
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("coefficients must be finite")
    magnitude = math.hypot(a, b)
    if magnitude == 0.0:
        return HarmonicPhasor(0.0, 0.0)
    phase = math.atan2(b, a)
    # atan2 may return -pi for (negative, -0.0); fold onto the (-pi, pi] branch.
    if phase <= -math.pi:
        phase = math.pi
    return HarmonicPhasor(magnitude, phase)


def phase_ripple(phase: ConverterPhase, op: OperatingPoint, sys: SystemParams) -> float:
    n = phase.index - 1
    return inductor_ripple(op.d[n], op.v_in, phase.inductance, sys.f_sw)


def phasor_for_phase(phase: ConverterPhase, op: OperatingPoint, sys: SystemParams,
                     ripple: float | None = None) -> HarmonicPhasor:
    n = phase.index - 1
    if ripple is None:
        ripple = phase_ripple(phase, op, sys)
    coeffs = fourier_coefficients(op.i_out[n], op.d[n], ripple, sys.t_sw, sys.k)
    return to_phasor(coeffs)


def phasors_for_system(sys: SystemParams, op: OperatingPoint) -> list[HarmonicPhasor]:
    if len(op.i_out) != sys.n_phases:
        raise DomainError(f"operating point has {len(op.i_out)} phases, system has {sys.n_phases}")
    return [phasor_for_phase(p, op, sys) for p in sys.phases]
