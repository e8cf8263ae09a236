"""Uniform linear arrays, DFT codebooks and precomputed beam patterns.

Angles are radians everywhere in this module; the CSV helpers at the bottom
are the only place degrees appear.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IncompatibleGrid, InvalidArgument, TraceFormatError, UnresolvableAngle

SPEED_OF_LIGHT = 299792458.0

# two grid angles closer than this are treated as the same angle
ANGLE_MATCH_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    """A uniform linear array of ``num_elements`` antennas ``spacing`` meters apart."""

    num_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise InvalidArgument(f"num_elements must be a positive integer, got {self.num_elements!r}")
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise InvalidArgument(f"spacing must be positive, got {self.spacing!r}")
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise InvalidArgument(f"wavelength must be positive, got {self.wavelength!r}")
        object.__setattr__(self, "num_elements", int(self.num_elements))

    @classmethod
    def ula(cls, num_elements: int, wavelength: float, spacing: float | None = None) -> "ArrayGeometry":
        """Build a ULA, defaulting to half-wavelength spacing."""
        if spacing is None:
            spacing = wavelength / 2
        return cls(num_elements, spacing, wavelength)

    @classmethod
    def from_frequency(cls, num_elements: int, frequency: float, spacing: float | None = None) -> "ArrayGeometry":
        return cls.ula(num_elements, SPEED_OF_LIGHT / frequency, spacing)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def element_index(self) -> np.ndarray:
        return np.arange(self.num_elements)


def array_response(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """Array response vector ``v(theta)`` with entries ``exp(-j k n d cos theta)``.

    Elements are indexed from zero. Any other offset of the element index
    only changes a global phase, so beam gain magnitudes are unaffected.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidArgument(f"angle must be finite, got {theta!r}")
    return array_responses(geometry, [theta])[0]


def array_responses(geometry: ArrayGeometry, thetas) -> np.ndarray:
    """Stack of response vectors, shape ``(len(thetas), N)``."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1)
    if not np.all(np.isfinite(thetas)):
        raise InvalidArgument("angles must be finite")
    scale = geometry.wavenumber * geometry.element_index * geometry.spacing
    return np.exp(-1j * (scale[None, :] * np.cos(thetas)[:, None]))


def _gain_table(weights: np.ndarray, responses: np.ndarray) -> np.ndarray:
    # Accumulate element by element in a fixed order so that every entry is
    # bit-identical to the scalar product computed for a single (beam, angle).
    out = np.zeros((weights.shape[0], responses.shape[0]), dtype=complex)
    for n in range(weights.shape[1]):
        out += weights[:, n, None] * responses[None, :, n]
    return out


def beam_gain(f, theta: float, geometry: ArrayGeometry) -> complex:
    """Complex gain ``f^T v(theta)`` of steering vector ``f`` (plain transpose)."""
    f = np.asarray(f, dtype=complex)
    if f.ndim != 1 or f.shape[0] != geometry.num_elements:
        raise InvalidArgument(
            f"steering vector has shape {f.shape}, expected ({geometry.num_elements},)"
        )
    v = array_response(geometry, theta)
    return complex(_gain_table(f[None, :], v[None, :])[0, 0])


@dataclass(frozen=True, eq=False)
class PatternMatrix:
    """Complex beam pattern sampled on an angle list.

    ``entries[a, j]`` is the gain of beam ``a`` at ``angles[j]``.
    """

    entries: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex, copy=True)
        angles = np.array(self.angles, dtype=float, copy=True).reshape(-1)
        if entries.ndim != 2 or entries.shape[1] != angles.shape[0]:
            raise InvalidArgument(
                f"pattern entries {entries.shape} do not match {angles.shape[0]} angles"
            )
        if entries.shape[0] < 1 or angles.shape[0] < 1:
            raise InvalidArgument("pattern matrix must be nonempty")
        object.__setattr__(self, "entries", _readonly(entries))
        object.__setattr__(self, "angles", _readonly(angles))

    @property
    def num_beams(self) -> int:
        return self.entries.shape[0]

    def column_index(self, theta: float) -> int:
        hits = np.flatnonzero(np.abs(self.angles - theta) <= ANGLE_MATCH_TOL)
        if hits.size == 0:
            raise UnresolvableAngle(
                f"angle {np.degrees(theta):.6g} deg is not on the beam-pattern grid"
            )
        return int(hits[0])

    def column_indices(self, thetas) -> np.ndarray:
        return np.array([self.column_index(t) for t in np.atleast_1d(thetas)], dtype=np.intp)

    def matches(self, thetas) -> bool:
        thetas = np.asarray(thetas, dtype=float).reshape(-1)
        return thetas.shape == self.angles.shape and bool(
            np.all(np.abs(thetas - self.angles) <= ANGLE_MATCH_TOL)
        )


@dataclass(frozen=True, eq=False)
class Codebook:
    """The K beams a base station can choose from.

    Either ``weights`` (K x N steering vectors, with ``geometry``) or
    ``pattern`` (a measured :class:`PatternMatrix`) is the source of truth,
    never both.
    """

    weights: np.ndarray | None = None
    geometry: ArrayGeometry | None = None
    pattern: PatternMatrix | None = None

    def __post_init__(self):
        if (self.weights is None) == (self.pattern is None):
            raise InvalidArgument("codebook needs exactly one of steering weights or a pattern matrix")
        if self.weights is not None:
            if self.geometry is None:
                raise InvalidArgument("steering-vector codebook needs an array geometry")
            w = np.array(self.weights, dtype=complex, copy=True)
            if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] != self.geometry.num_elements:
                raise InvalidArgument(
                    f"weights shape {w.shape} incompatible with {self.geometry.num_elements} elements"
                )
            object.__setattr__(self, "weights", _readonly(w))

    @property
    def num_beams(self) -> int:
        if self.weights is not None:
            return self.weights.shape[0]
        return self.pattern.num_beams

    @property
    def pattern_only(self) -> bool:
        return self.weights is None

    def gains(self, thetas) -> np.ndarray:
        """K x len(thetas) gain table, evaluated directly or looked up."""
        thetas = np.asarray(thetas, dtype=float).reshape(-1)
        if self.pattern_only:
            return self.pattern.entries[:, self.pattern.column_indices(thetas)]
        return _gain_table(self.weights, array_responses(self.geometry, thetas))


def dft_codebook(geometry: ArrayGeometry, num_beams: int) -> Codebook:
    """DFT codebook: beam ``a`` points at ``theta = pi * a / K``."""
    if int(num_beams) != num_beams or num_beams < 1:
        raise InvalidArgument(f"codebook size must be a positive integer, got {num_beams!r}")
    directions = np.pi * np.arange(num_beams) / num_beams
    phase = geometry.wavenumber * geometry.spacing * np.outer(np.cos(directions), geometry.element_index)
    return Codebook(weights=np.exp(1j * phase), geometry=geometry)


def pattern_matrix(codebook: Codebook, thetas) -> PatternMatrix:
    """Precompute ``h_a(theta_j)`` for every beam and angle."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1)
    if codebook.pattern_only:
        if not codebook.pattern.matches(thetas):
            raise IncompatibleGrid("pattern-only codebook was measured on a different angle grid")
        return codebook.pattern
    return PatternMatrix(codebook.gains(thetas), thetas)


def load_pattern_csv(path) -> Codebook:
    """Read a pattern-only codebook.

    The header is ``theta_deg,beam_0_re,beam_0_im,...`` with one row per
    grid angle.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        if not header or header[0] != "theta_deg" or len(header) < 3 or len(header) % 2 != 1:
            raise TraceFormatError(f"{path}: header must be theta_deg,beam_0_re,beam_0_im,...")
        K = (len(header) - 1) // 2
        for a in range(K):
            if header[1 + 2 * a] != f"beam_{a}_re" or header[2 + 2 * a] != f"beam_{a}_im":
                raise TraceFormatError(f"{path}: unexpected column names near beam {a}")
        angles, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise TraceFormatError(f"{path}:{lineno}: column {col!r} has non-numeric value {cell!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise TraceFormatError(f"{path}:{lineno}: non-finite value")
            angles.append(vals[0])
            rows.append(np.array(vals[1::2]) + 1j * np.array(vals[2::2]))
    if not rows:
        raise TraceFormatError(f"{path}: no data rows")
    return Codebook(pattern=PatternMatrix(np.array(rows).T, np.radians(angles)))


def write_pattern_csv(path, pattern: PatternMatrix) -> None:
    K = pattern.num_beams
    header = ["theta_deg"] + [f"beam_{a}_{part}" for a in range(K) for part in ("re", "im")]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j, theta in enumerate(pattern.angles):
            row = [repr(float(np.degrees(theta)))]
            for a in range(K):
                g = pattern.entries[a, j]
                row += [repr(float(g.real)), repr(float(g.imag))]
            w.writerow(row)
