"""Optimum phase shifts that cancel one harmonic of the common-link current.

Shifts are switching-function delays in degrees of one switching period.
A shift ``s_n`` rotates phase ``n``'s harmonic-``k`` phasor to the angle

    theta_n = k * s_n + phi_n

and the common-link harmonic is ``A_k exp(-j theta_k) = sum_n A_n exp(-j theta_n)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DomainError, ResourceError
from .harmonics import (
    EPS_A,
    HarmonicPhasor,
    OperatingPoint,
    SystemParams,
    phasors_for_system,
)

ARCCOS_GRACE = 1e-9
MAX_GRID_POINTS = 10**8
REFINE_TARGET_DEG = 0.01


class CancellationMode(enum.Enum):
    FULL = "FullCancellation"
    PARTIAL = "PartialMinimization"


@dataclass(frozen=True)
class PhaseShiftSolution:
    shifts: tuple[float, ...]
    residual: float
    mode: CancellationMode

    def relative_shifts(self) -> tuple[float, ...]:
        """Shifts of phases 2..N relative to phase 1, in [0, 360)."""
        ref = self.shifts[0]
        return tuple(wrap_degrees(s - ref) for s in self.shifts[1:])


def wrap_degrees(angle):
    """Reduce degrees into [0, 360); works on scalars and arrays."""
    wrapped = np.mod(angle, 360.0)
    # np.mod(-1e-18, 360) rounds to exactly 360.0
    wrapped = np.where(wrapped >= 360.0, 0.0, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def even_shifts(N: int) -> list[float]:
    if N < 1:
        raise DomainError(f"phase count must be >= 1, got {N}")
    return [(n - 1) * 360.0 / N for n in range(1, N + 1)]


def resultant_phasor(phasors: Sequence[HarmonicPhasor], shifts: Sequence[float], k: int) -> tuple[float, float]:
    """Magnitude and angle ``theta_k`` of the summed harmonic phasor."""
    if len(phasors) != len(shifts):
        raise DomainError("phasors and shifts must have equal length")
    total = 0j
    for p, s in zip(phasors, shifts):
        theta = k * math.radians(s) + p.phase
        total += p.magnitude * complex(math.cos(theta), -math.sin(theta))
    if total == 0:
        return 0.0, 0.0
    angle = -math.atan2(total.imag, total.real)
    if angle <= -math.pi:
        angle += 2.0 * math.pi
    return abs(total), angle


def _clamp_arccos_arg(x: float) -> float:
    if -1.0 - ARCCOS_GRACE <= x < -1.0:
        return -1.0
    if 1.0 < x <= 1.0 + ARCCOS_GRACE:
        return 1.0
    return x


def arccos_arguments(A1: float, A2: float, A3: float) -> tuple[float, float]:
    """Law-of-cosines arguments for closing the triangle of three phasors."""
    arg2 = 0.5 * (A3**2 - A2**2 - A1**2) / (A1 * A2)
    arg3 = 0.5 * (A2**2 - A1**2 - A3**2) / (A1 * A3)
    return _clamp_arccos_arg(arg2), _clamp_arccos_arg(arg3)


def _shifts_from_thetas(phasors, thetas, k):
    # theta_n = k*s_n + phi_n, inverted; None marks a phase whose shift is free
    return [0.0 if th is None else wrap_degrees(math.degrees(th - p.phase) / k)
            for p, th in zip(phasors, thetas)]


def _antiphase_thetas(mags, live):
    """0 deg on the largest live phasor, 180 deg on the others (lowest index wins ties)."""
    n_max = max(live, key=lambda n: (mags[n], -n))
    return [None if n not in live else (0.0 if n == n_max else math.pi) for n in range(len(mags))]


def solve_optimum_three(phasors: Sequence[HarmonicPhasor], k: int) -> PhaseShiftSolution:
    """Globally optimum shifts for three phasors at harmonic ``k``.

    When the three magnitudes form a triangle the harmonic cancels exactly;
    otherwise the largest phasor is set against the other two in antiphase,
    which is the minimum possible residual ``A_max - (sum of the rest)``.
    Phase 1 is always the angular reference (``theta_1 = 0``).
    """
    if len(phasors) != 3:
        raise DomainError(f"exactly three phasors required, got {len(phasors)}")
    if int(k) != k or k < 1:
        raise DomainError(f"harmonic order must be an integer >= 1, got {k!r}")
    mags = [p.magnitude for p in phasors]
    live = [n for n in range(3) if mags[n] >= EPS_A]

    if not live:
        return PhaseShiftSolution((0.0, 0.0, 0.0), 0.0, CancellationMode.FULL)

    if len(live) == 3:
        arg2, arg3 = arccos_arguments(*mags)
        if -1.0 <= arg2 <= 1.0 and -1.0 <= arg3 <= 1.0:
            thetas = [0.0, math.acos(arg2), 2.0 * math.pi - math.acos(arg3)]
            mode = CancellationMode.FULL
        else:
            thetas = _antiphase_thetas(mags, live)
            mode = CancellationMode.PARTIAL
    elif len(live) == 2:
        a, b = live
        thetas = _antiphase_thetas(mags, live)
        mode = CancellationMode.FULL if abs(mags[a] - mags[b]) < EPS_A else CancellationMode.PARTIAL
    else:
        thetas = [0.0 if n in live else None for n in range(3)]
        mode = CancellationMode.PARTIAL

    # Rotate so the first live phase sits at theta = 0; a common rotation
    # leaves the residual magnitude unchanged.
    ref = thetas[live[0]]
    thetas = [None if th is None else th - ref for th in thetas]
    shifts = _shifts_from_thetas(phasors, thetas, k)
    residual, _ = resultant_phasor(phasors, shifts, k)
    return PhaseShiftSolution(tuple(shifts), residual, mode)


def shifts_for_operating_point(sys: SystemParams, op: OperatingPoint) -> PhaseShiftSolution:
    if sys.n_phases != 3:
        raise DomainError(f"closed-form solver needs N = 3 phases, got {sys.n_phases}")
    return solve_optimum_three(phasors_for_system(sys, op), sys.k)


def _grid_residuals(amps, phases, k, offsets_deg, ref_theta):
    """Minimum residual over the Cartesian grid ``offsets_deg ** (N - 1)``.

    Returns ``(residual, index_tuple)`` with the lexicographically first index
    on ties.
    """
    n_free = len(amps) - 1
    # per-phase contribution for every candidate shift: (n_free, G)
    contrib = amps[1:, None] * np.exp(-1j * (k * np.radians(offsets_deg)[None, :] + phases[1:, None]))
    base = amps[0] * np.exp(-1j * ref_theta)
    G = len(offsets_deg)
    best = (math.inf, None)
    if n_free == 1:
        res = np.abs(base + contrib[0])
        i = int(np.argmin(res))
        return float(res[i]), (i,)
    # vectorise the last two free phases, loop the rest in lexicographic order
    tail = contrib[-2][:, None] + contrib[-1][None, :]
    for head in itertools.product(range(G), repeat=n_free - 2):
        partial = base + sum(contrib[j, h] for j, h in enumerate(head))
        res = np.abs(partial + tail)
        i = int(np.argmin(res))
        if res.flat[i] < best[0]:
            best = (float(res.flat[i]), head + divmod(i, G))
    return best


def grid_search_optimum(phasors: Sequence[HarmonicPhasor], k: int, resolution: float,
                        refine: bool = False) -> tuple[list[float], float]:
    """Exhaustive search over shifts of phases 2..N; a global-optimality oracle.

    Phase 1 is pinned at ``-phi_1/k``. Each other shift scans ``[0, 360/k)``
    at ``resolution`` degrees. With ``refine`` the best cell is re-scanned at
    halved steps until the step drops below 0.01 deg.
    """
    N = len(phasors)
    if N < 2:
        raise DomainError("grid search needs at least two phasors")
    if not resolution > 0:
        raise DomainError(f"resolution must be > 0, got {resolution}")
    span = 360.0 / k
    G = int(math.ceil(span / resolution - 1e-9))
    if float(G) ** (N - 1) > MAX_GRID_POINTS:
        raise ResourceError(f"{G}^{N - 1} grid points exceed the {MAX_GRID_POINTS:.0e} guard")

    amps = np.array([p.magnitude for p in phasors])
    phases = np.array([p.phase for p in phasors])
    s1 = wrap_degrees(-math.degrees(phasors[0].phase) / k)
    ref_theta = k * math.radians(s1) + phases[0]

    grid = np.arange(G) * resolution
    residual, idx = _grid_residuals(amps, phases, k, grid, ref_theta)
    best = np.array([grid[i] for i in idx])

    if refine:
        step = resolution
        local = np.arange(-2, 3)
        while step >= REFINE_TARGET_DEG:
            step /= 2.0
            # joint +-2 half-step neighbourhood of the incumbent
            cand = [best[j] + local * step for j in range(N - 1)]
            sub_res, sub_idx = _joint_local(amps, phases, k, cand, ref_theta)
            if sub_res <= residual:
                residual = sub_res
                best = np.array([cand[j][i] for j, i in enumerate(sub_idx)])

    shifts = [s1] + [wrap_degrees(s) for s in best]
    return shifts, residual


def _joint_local(amps, phases, k, cand, ref_theta):
    total = amps[0] * np.exp(-1j * ref_theta)
    grids = np.meshgrid(*cand, indexing="ij")
    for j, g in enumerate(grids, start=1):
        total = total + amps[j] * np.exp(-1j * (k * np.radians(g) + phases[j]))
    res = np.abs(total)
    flat = int(np.argmin(res))
    return float(res.flat[flat]), np.unravel_index(flat, res.shape)
