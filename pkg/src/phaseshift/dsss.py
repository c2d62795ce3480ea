"""Different Start, Same Step (DSSS) lattice datasets.

The training lattice starts at the start-point vector; the test/validation
lattice uses the same step sizes and end point but starts half a step later,
so the two never share a feature vector.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DatasetParseError, DomainError
from .harmonics import OperatingPoint, SystemParams
from .solver import shifts_for_operating_point

FEATURE_NAMES = ("iout1", "iout2", "iout3", "d1", "d2", "d3", "vin")
TARGET_NAMES = ("t_phi2", "t_phi3")
CSV_COLUMNS = FEATURE_NAMES + TARGET_NAMES

CURRENT_DIMS = (0, 1, 2)
DUTY_DIMS = (3, 4, 5)
VIN_DIM = 6

# absorbs float noise in (max - min) / step, e.g. 3.6 / 0.3 = 11.999999999999998
_COUNT_SLACK = 1e-9


class DutyMode(enum.Enum):
    SWEPT = "SweptIndependently"
    DERIVED = "DerivedFromVin"


class Provenance(enum.Enum):
    TRAIN = "train"
    TESTVAL = "testval"


def _lattice_count(lo, hi, step):
    if hi < lo:
        raise DomainError(f"max ({hi}) must be >= min ({lo})")
    if hi == lo:
        return 1
    if not step > 0:
        raise DomainError(f"step must be > 0 for a non-empty range, got {step}")
    return int(math.floor((hi - lo) / step + _COUNT_SLACK))


def grid_points(lo: float, hi: float, step: float) -> np.ndarray:
    """Start-inclusive, end-exclusive lattice ``lo + i*step``, ``i < floor((hi-lo)/step)``.

    A zero-width range yields the single point ``[lo]``.
    """
    n = _lattice_count(lo, hi, step)
    if hi == lo:
        return np.array([float(lo)])
    return np.round(lo + np.arange(n) * step, 12)


@dataclass(frozen=True)
class SweepSpec:
    spv: tuple[float, ...]
    epv: tuple[float, ...]
    ssv: tuple[float, ...]
    duty_mode: DutyMode = DutyMode.DERIVED

    def __post_init__(self):
        for name in ("spv", "epv", "ssv"):
            vec = tuple(float(x) for x in getattr(self, name))
            if len(vec) != 7:
                raise DomainError(f"{name} must have 7 entries, got {len(vec)}")
            if not all(math.isfinite(x) for x in vec):
                raise DomainError(f"{name} entries must be finite")
            object.__setattr__(self, name, vec)
        object.__setattr__(self, "duty_mode", DutyMode(self.duty_mode))
        for m in range(7):
            if self.epv[m] < self.spv[m]:
                raise DomainError(f"epv[{m}] = {self.epv[m]} is below spv[{m}] = {self.spv[m]}")
            if self.ssv[m] < 0:
                raise DomainError(f"ssv[{m}] must be >= 0")
            if m in self.swept_dims() and self.epv[m] > self.spv[m] and self.ssv[m] <= 0:
                raise DomainError(f"ssv[{m}] must be > 0 because dimension {m} is swept")

    @classmethod
    def for_system(cls, sys: SystemParams, i_step=0.05, v_step=0.1, i_min=0.2,
                   i_max_factor=1.1, v_range=(9.0, 12.6), duty_mode=DutyMode.DERIVED) -> "SweepSpec":
        """Sweep with currents in ``[i_min, 1.1 * I_nom]`` and ``v_in`` over ``v_range``."""
        v_lo, v_hi = v_range
        i_hi = [i_max_factor * p.rated_current for p in sys.phases]
        d_lo = [p.v_out_target / v_hi for p in sys.phases]
        d_hi = [p.v_out_target / v_lo for p in sys.phases]
        spv = (i_min,) * 3 + tuple(d_lo) + (v_lo,)
        epv = tuple(i_hi) + tuple(d_hi) + (v_hi,)
        d_step = 0.0 if DutyMode(duty_mode) is DutyMode.DERIVED else 0.01
        ssv = (i_step,) * 3 + (d_step,) * 3 + (v_step,)
        return cls(spv, epv, ssv, duty_mode)

    def swept_dims(self) -> tuple[int, ...]:
        if self.duty_mode is DutyMode.DERIVED:
            return CURRENT_DIMS + (VIN_DIM,)
        return CURRENT_DIMS + DUTY_DIMS + (VIN_DIM,)

    def axes(self, which: Provenance) -> list[np.ndarray]:
        """Lattice values for each swept dimension, in feature order."""
        out = []
        for m in self.swept_dims():
            lo, hi, step = self.spv[m], self.epv[m], self.ssv[m]
            if which is Provenance.TESTVAL and hi > lo:
                lo = lo + step / 2.0
            out.append(grid_points(lo, hi, step))
        return out

    def n_data(self, which: Provenance = Provenance.TRAIN) -> int:
        return int(np.prod([len(a) for a in self.axes(which)]))

    def to_dict(self) -> dict:
        return {"spv": list(self.spv), "epv": list(self.epv), "ssv": list(self.ssv),
                "duty_mode": self.duty_mode.value}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        return cls(tuple(data["spv"]), tuple(data["epv"]), tuple(data["ssv"]),
                   DutyMode(data.get("duty_mode", DutyMode.DERIVED.value)))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    provenance: Provenance = Provenance.TRAIN
    spec_hash: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1, 7)
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if len(self.features) != len(self.targets):
            raise DomainError("features and targets have different row counts")

    def __len__(self):
        return len(self.features)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.targets[idx], self.provenance, self.spec_hash)


def targets_for(sys: SystemParams, op: OperatingPoint) -> tuple[float, float]:
    """Shifts of phases 2 and 3 relative to phase 1, scaled from degrees into [0, 1)."""
    sol = shifts_for_operating_point(sys, op)
    rel = [r / 360.0 for r in sol.relative_shifts()]
    # 359.99999999999994 / 360 rounds to 1.0
    return tuple(0.0 if r >= 1.0 else r for r in rel)


def _row_operating_point(sys, spec, values):
    """Map one lattice tuple (swept dims only) to a full operating point."""
    full = dict(zip(spec.swept_dims(), values))
    i_out = [full[m] for m in CURRENT_DIMS]
    v_in = full[VIN_DIM]
    if spec.duty_mode is DutyMode.DERIVED:
        d = [p.v_out_target / v_in for p in sys.phases]
    else:
        d = [full[m] for m in DUTY_DIMS]
    return OperatingPoint(tuple(i_out), tuple(d), v_in)


def generate_dataset(spec: SweepSpec, which: Provenance | str, sys: SystemParams) -> Dataset:
    which = Provenance(which)
    if sys.n_phases != 3:
        raise DomainError("DSSS datasets are defined for three phases")
    axes = spec.axes(which)
    n = int(np.prod([len(a) for a in axes]))
    if n == 0:
        raise DomainError("the sweep lattice is empty")
    features = np.empty((n, 7))
    targets = np.empty((n, 2))
    for r, values in enumerate(itertools.product(*axes)):
        op = _row_operating_point(sys, spec, values)
        features[r] = op.as_features()
        targets[r] = targets_for(sys, op)
    return Dataset(features, targets, which, spec.digest())


def split_test_validation(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded 50/50 split of a test/validation dataset into (test, validation)."""
    if dataset.provenance is not Provenance.TESTVAL:
        raise DomainError("only a test/validation dataset can be split")
    if len(dataset) < 2:
        raise DomainError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    half = len(dataset) // 2
    return dataset.subset(np.sort(perm[:half])), dataset.subset(np.sort(perm[half:]))


def write_dataset(dataset: Dataset, path) -> None:
    # repr() is the shortest text that round-trips every float exactly
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for x, y in zip(dataset.features, dataset.targets):
            writer.writerow([repr(float(v)) for v in (*x, *y)])


def read_dataset(path, provenance: Provenance | str = Provenance.TRAIN) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetParseError("empty file, no header", line=1) from None
        header = [h.strip() for h in header]
        for name in CSV_COLUMNS:
            if name not in header:
                raise DatasetParseError(f"missing column {name!r}", line=1)
        order = [header.index(name) for name in CSV_COLUMNS]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetParseError(f"expected {len(header)} cells, got {len(row)}", line=line_no)
            try:
                values = [float(row[i]) for i in order]
            except ValueError as exc:
                raise DatasetParseError(f"non-numeric cell ({exc})", line=line_no) from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetParseError("non-finite cell", line=line_no)
            rows.append(values)
    data = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS))
    return Dataset(data[:, :7], data[:, 7:], Provenance(provenance))
