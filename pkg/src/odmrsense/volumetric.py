"""Volumetric orbital data: grids, cube-file I/O, and moment statistics.

An OrbitalGrid carries a real amplitude phi sampled on a regular (not
necessarily orthogonal) lattice; densities, norms and moments integrate
phi^2 with the parallelepiped voxel volume.

Cube files follow the plain-text layout: two comment lines, an atom
count plus grid origin, three axis records (count then step vector),
the atom list, then values with z fastest.  The sign of the atom count
declares the length unit of the header: positive (or zero) means bohr,
negative means the geometry is already in angstrom.  Parse failures
report the offending line.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import BOHR_RADIUS_ANGSTROM
from .errors import CubeParseError, GridMismatchError, InvalidParameterError


@dataclass(frozen=True)
class OrbitalGrid:
    """Scalar amplitude on a regular lattice.

    origin is the position of values[0, 0, 0] in angstrom; axes rows are
    the three step vectors, so the sample at index (i, j, k) sits at
    origin + i axes[0] + j axes[1] + k axes[2].
    """

    origin: np.ndarray
    axes: np.ndarray
    values: np.ndarray

    def __init__(self, origin, axes, values):
        org = np.asarray(origin, dtype=float)
        axs = np.asarray(axes, dtype=float)
        val = np.asarray(values, dtype=float)
        if org.shape != (3,) or axs.shape != (3, 3):
            raise InvalidParameterError("origin must be (3,) and axes (3, 3)")
        if not (np.all(np.isfinite(org)) and np.all(np.isfinite(axs))):
            raise InvalidParameterError("grid geometry contains non-finite values")
        if val.ndim != 3 or min(val.shape) < 1:
            raise InvalidParameterError("values must be a non-empty 3-D array")
        if not np.all(np.isfinite(val)):
            raise InvalidParameterError("values contain non-finite entries")
        if abs(np.linalg.det(axs)) < 1e-300:
            raise InvalidParameterError("axes are singular")
        object.__setattr__(self, "origin", org)
        object.__setattr__(self, "axes", axs)
        object.__setattr__(self, "values", val)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def voxel_volume(self) -> float:
        return float(abs(np.linalg.det(self.axes)))

    def positions(self) -> np.ndarray:
        """Sample coordinates, shape dims + (3,)."""
        nx, ny, nz = self.dims
        i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                              indexing="ij")
        idx = np.stack([i, j, k], axis=-1).astype(float)
        return self.origin + idx @ self.axes

    def norm_squared(self) -> float:
        """Integral of phi^2 over the box."""
        return float(np.sum(self.values ** 2) * self.voxel_volume)

    def normalized(self) -> "OrbitalGrid":
        """Copy rescaled to unit norm (integral of phi^2 = 1)."""
        nsq = self.norm_squared()
        if nsq <= 0:
            raise InvalidParameterError("cannot normalize an all-zero orbital")
        return OrbitalGrid(self.origin, self.axes, self.values / np.sqrt(nsq))


def assert_commensurate(a: OrbitalGrid, b: OrbitalGrid) -> None:
    """Raise GridMismatchError unless two grids share the same mesh."""
    if a.dims != b.dims:
        raise GridMismatchError(f"grid dims differ: {a.dims} vs {b.dims}")
    scale = max(np.abs(a.axes).max(), np.abs(b.axes).max(), 1e-300)
    if np.abs(a.axes - b.axes).max() > 1e-9 * scale:
        raise GridMismatchError("grid axes differ beyond 1e-9 relative")
    span = max(np.abs(a.origin).max(), np.abs(b.origin).max(), scale)
    if np.abs(a.origin - b.origin).max() > 1e-9 * span:
        raise GridMismatchError("grid origins differ beyond 1e-9 relative")


def make_grid(dims, lengths, center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned (origin, axes) covering a box of the given side lengths.

    Samples are cell centers: dims steps of length/dims, with the grid
    symmetric about center.  Returns the (origin, axes) pair to pass to
    OrbitalGrid alongside a values array.
    """
    dims = np.asarray(dims, dtype=int)
    lengths = np.asarray(lengths, dtype=float)
    center = np.asarray(center, dtype=float)
    if dims.shape != (3,) or np.any(dims < 1):
        raise InvalidParameterError("dims must be three positive integers")
    if lengths.shape != (3,) or np.any(lengths <= 0):
        raise InvalidParameterError("lengths must be three positive spans")
    step = lengths / dims
    origin = center - 0.5 * (dims - 1) * step
    return origin, np.diag(step)


def gaussian_orbital(
    origin,
    axes,
    dims,
    center,
    widths,
    node_axis: int | None = None,
) -> OrbitalGrid:
    """Unit-norm Gaussian amplitude, optionally with one nodal plane.

    The amplitude is exp(-sum_a (r_a - c_a)^2 / (2 w_a^2)); the matching
    density phi^2 is Gaussian with per-axis spread w_a / sqrt(2).  With
    node_axis set, the amplitude is multiplied by (r_a - c_a), producing
    the antisymmetric p-like lobe pair used as a LUMO stand-in.
    """
    center = np.asarray(center, dtype=float)
    widths = np.broadcast_to(np.asarray(widths, dtype=float), (3,))
    if np.any(widths <= 0):
        raise InvalidParameterError("widths must be positive")
    grid = OrbitalGrid(origin, axes, np.zeros(tuple(int(d) for d in dims)))
    pos = grid.positions()
    rel = pos - center
    amp = np.exp(-np.sum((rel / widths) ** 2, axis=-1) / 2.0)
    if node_axis is not None:
        if node_axis not in (0, 1, 2):
            raise InvalidParameterError("node_axis must be 0, 1 or 2")
        amp = amp * rel[..., node_axis]
    return OrbitalGrid(grid.origin, grid.axes, amp).normalized()


@dataclass(frozen=True)
class OrbitalStats:
    """Norm, density centroid (angstrom) and per-axis spread (angstrom)."""

    norm: float
    centroid: np.ndarray
    spread: np.ndarray


def orbital_stats(grid: OrbitalGrid) -> OrbitalStats:
    """First and second moments of the normalized density phi^2."""
    density = grid.values ** 2 * grid.voxel_volume
    total = float(density.sum())
    if total <= 0:
        raise InvalidParameterError("orbital has zero norm; moments undefined")
    pos = grid.positions()
    centroid = np.tensordot(density, pos, axes=([0, 1, 2], [0, 1, 2])) / total
    second = np.tensordot(density, (pos - centroid) ** 2,
                          axes=([0, 1, 2], [0, 1, 2])) / total
    return OrbitalStats(norm=total, centroid=centroid, spread=np.sqrt(second))


def homo_lumo_shift(homo: OrbitalStats, lumo: OrbitalStats) -> np.ndarray:
    """Centroid displacement LUMO minus HOMO, in picometres per axis."""
    return (lumo.centroid - homo.centroid) * 100.0


def load_cube(path) -> OrbitalGrid:
    """Parse a cube file into an OrbitalGrid (geometry in angstrom)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CubeParseError(f"cannot read file: {exc}", str(path)) from exc
    lines = text.splitlines()
    if len(lines) < 6:
        raise CubeParseError("file too short for a cube header", str(path),
                             len(lines))

    def fields(lineno: int, expect: int, kinds: str):
        if lineno > len(lines):
            raise CubeParseError("unexpected end of file", str(path), len(lines))
        parts = lines[lineno - 1].split()
        if len(parts) < expect:
            raise CubeParseError(
                f"expected at least {expect} fields, got {len(parts)}",
                str(path), lineno)
        out = []
        for kind, token in zip(kinds, parts):
            try:
                out.append(int(token) if kind == "i" else float(token))
            except ValueError as exc:
                raise CubeParseError(f"bad {'integer' if kind == 'i' else 'number'} "
                                     f"{token!r}", str(path), lineno) from exc
        return out

    natoms, ox, oy, oz = fields(3, 4, "ifff")
    angstrom_units = natoms < 0
    n_atom_records = abs(natoms)
    dims = []
    axes = np.zeros((3, 3))
    for axis in range(3):
        count, ax, ay, az = fields(4 + axis, 4, "ifff")
        if count <= 0:
            raise CubeParseError(f"axis sample count must be positive, got {count}",
                                 str(path), 4 + axis)
        dims.append(count)
        axes[axis] = (ax, ay, az)
    first_value_line = 7 + n_atom_records
    for rec in range(n_atom_records):
        fields(7 + rec, 5, "iffff")

    values = []
    expected = dims[0] * dims[1] * dims[2]
    for lineno in range(first_value_line, len(lines) + 1):
        for token in lines[lineno - 1].split():
            try:
                values.append(float(token))
            except ValueError as exc:
                raise CubeParseError(f"bad value {token!r}", str(path), lineno) from exc
        if len(values) > expected:
            raise CubeParseError(
                f"too many values: expected {expected}", str(path), lineno)
    if len(values) != expected:
        raise CubeParseError(
            f"expected {expected} values, got {len(values)}", str(path), len(lines))

    origin = np.array([ox, oy, oz])
    if not angstrom_units:
        origin = origin * BOHR_RADIUS_ANGSTROM
        axes = axes * BOHR_RADIUS_ANGSTROM
    grid_values = np.asarray(values).reshape(dims)  # z varies fastest
    try:
        return OrbitalGrid(origin, axes, grid_values)
    except InvalidParameterError as exc:
        raise CubeParseError(str(exc), str(path)) from exc


def save_cube(grid: OrbitalGrid, path, comment: str = "orbital amplitude") -> Path:
    """Write a cube file (bohr header units, no atoms, z fastest)."""
    path = Path(path)
    origin_b = grid.origin / BOHR_RADIUS_ANGSTROM
    axes_b = grid.axes / BOHR_RADIUS_ANGSTROM
    nx, ny, nz = grid.dims
    out = [comment, "generated by odmrsense"]
    out.append(f"{0:5d} {origin_b[0]:17.9e} {origin_b[1]:17.9e} {origin_b[2]:17.9e}")
    for count, vec in zip((nx, ny, nz), axes_b):
        out.append(f"{count:5d} {vec[0]:17.9e} {vec[1]:17.9e} {vec[2]:17.9e}")
    flat = grid.values.reshape(-1)
    for start in range(0, flat.size, 6):
        chunk = flat[start:start + 6]
        out.append(" ".join(f"{v:17.9e}" for v in chunk))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
