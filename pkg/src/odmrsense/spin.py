"""Spin-1 triplet Hamiltonian, its eigensystem, and zero-field-splitting algebra.

The working basis is the zero-field basis {Tx, Ty, Tz} in which the
fine-structure interaction is diagonal,

    H_zfs = diag(D/3 + E, D/3 - E, -2 D/3)   (MHz),

so the three transition frequencies at zero field are

    f_xy = 2 E,   f_yz = D - E,   f_xz = D + E.

Spin operators in this basis are (S_a)_{bc} = -i eps_abc, which keeps the
Zeeman term g_e mu_B B.S simple and makes the zero-field limit exactly
diagonal instead of a numerical accident.

The fine-structure tensor itself is handled as a traceless symmetric 3x3
matrix whose eigenvalues map to (D, E) through the canonical axis
convention |lambda_z| >= |lambda_y| >= |lambda_x|, which pins D > 0 and
0 <= E <= D/3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import GAMMA_E_MHZ_PER_MT
from .errors import InvalidParameterError

AXIS_LABELS = ("x", "y", "z")

# Transition keys in the fixed reporting order used throughout.
TRANSITION_KEYS = ("xy", "yz", "xz")


def _as_float_array(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise InvalidParameterError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ZfsParameters:
    """Fine-structure parameters D and E in MHz.

    Any finite pair is accepted; :meth:`canonical` maps to the
    representative with D > 0 and 0 <= E <= D/3.
    """

    D: float
    E: float

    def __post_init__(self):
        if not (np.isfinite(self.D) and np.isfinite(self.E)):
            raise InvalidParameterError("D and E must be finite")

    @property
    def is_canonical(self) -> bool:
        return self.D > 0 and 0.0 <= self.E <= self.D / 3.0 + 1e-12 * abs(self.D)

    def canonical(self) -> "ZfsParameters":
        params, _ = tensor_to_parameters(parameters_to_tensor(self))
        return params


@dataclass(frozen=True)
class MagneticField:
    """Static magnetic field vector in mT, in the molecular frame."""

    b_mt: np.ndarray

    def __init__(self, b_mt):
        object.__setattr__(self, "b_mt", _as_float_array(b_mt, (3,), "b_mt"))

    @property
    def magnitude_mt(self) -> float:
        return float(np.linalg.norm(self.b_mt))


@dataclass(frozen=True)
class TripletHamiltonian:
    """3x3 Hermitian matrix in MHz, zero-field basis (Tx, Ty, Tz)."""

    matrix: np.ndarray

    def __init__(self, matrix):
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (3, 3) or not np.all(np.isfinite(mat)):
            raise InvalidParameterError("Hamiltonian must be a finite 3x3 matrix")
        scale = max(np.abs(mat).max(), 1.0)
        if np.abs(mat - mat.conj().T).max() > 1e-12 * scale:
            raise InvalidParameterError("Hamiltonian is not Hermitian")
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class TripletLevels:
    """Eigenenergies (MHz, ascending) and eigenvector columns."""

    energies: np.ndarray
    states: np.ndarray

    def __init__(self, energies, states):
        en = _as_float_array(energies, (3,), "energies")
        st = np.asarray(states, dtype=complex)
        if st.shape != (3, 3):
            raise InvalidParameterError("states must be 3x3")
        if np.any(np.diff(en) < -1e-9 * max(np.abs(en).max(), 1.0)):
            raise InvalidParameterError("energies must be sorted ascending")
        gram = st.conj().T @ st
        if np.abs(gram - np.eye(3)).max() > 1e-9:
            raise InvalidParameterError("state columns are not orthonormal")
        object.__setattr__(self, "energies", en)
        object.__setattr__(self, "states", st)


@dataclass(frozen=True)
class TransitionSet:
    """The three inter-sublevel transition frequencies in MHz."""

    f_xy: float
    f_yz: float
    f_xz: float

    def __post_init__(self):
        for key in TRANSITION_KEYS:
            val = getattr(self, "f_" + key)
            if not np.isfinite(val) or val < 0:
                raise InvalidParameterError(f"f_{key} must be finite and >= 0")

    def as_dict(self) -> dict[str, float]:
        return {key: float(getattr(self, "f_" + key)) for key in TRANSITION_KEYS}

    @property
    def closure_residual(self) -> float:
        """|f_xz - f_yz - f_xy|; zero at zero applied field."""
        return abs(self.f_xz - self.f_yz - self.f_xy)


@dataclass(frozen=True)
class ZfsTensor:
    """Traceless symmetric fine-structure interaction tensor in MHz."""

    tensor: np.ndarray

    def __init__(self, tensor):
        mat = _as_float_array(tensor, (3, 3), "tensor")
        norm = np.linalg.norm(mat)
        if np.abs(mat - mat.T).max() > 1e-12 * max(norm, 1e-300):
            raise InvalidParameterError("tensor is not symmetric")
        if abs(np.trace(mat)) > 1e-9 * max(norm, 1e-300):
            raise InvalidParameterError("tensor is not traceless")
        object.__setattr__(self, "tensor", mat)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))


def spin1_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) in the zero-field basis: (S_a)_{bc} = -i eps_abc."""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return tuple(-1j * eps[a] for a in range(3))


def build_hamiltonian(
    zfs: ZfsParameters, field: MagneticField | None = None
) -> TripletHamiltonian:
    """Fine-structure plus Zeeman Hamiltonian in MHz.

    At zero field the matrix is diag(D/3 + E, D/3 - E, -2D/3); a field B
    (mT) adds g_e mu_B B.S / h with the spin operators of this basis.
    """
    d, e = zfs.D, zfs.E
    ham = np.diag([d / 3.0 + e, d / 3.0 - e, -2.0 * d / 3.0]).astype(complex)
    if field is not None:
        for b_comp, s_op in zip(field.b_mt, spin1_operators()):
            ham = ham + GAMMA_E_MHZ_PER_MT * b_comp * s_op
    return TripletHamiltonian(ham)


def eigenlevels(hamiltonian: TripletHamiltonian) -> TripletLevels:
    """Eigen-decomposition with a deterministic eigenvector sign convention.

    Each eigenvector is rotated by a global phase so its largest-magnitude
    component is real and positive, removing the solver's sign freedom.
    """
    energies, states = np.linalg.eigh(hamiltonian.matrix)
    states = states.copy()
    for k in range(3):
        lead = np.argmax(np.abs(states[:, k]))
        phase = states[lead, k]
        if abs(phase) > 0:
            states[:, k] *= np.conj(phase) / abs(phase)
    return TripletLevels(energies, states)


def _axis_assignment(states: np.ndarray) -> np.ndarray:
    """Map eigenvector column index -> zero-field axis index (0=x,1=y,2=z).

    Uses maximum total squared overlap with the basis states so the
    labelling degrades gracefully in applied fields where eigenstates mix.
    """
    overlap = np.abs(states) ** 2  # overlap[axis, column]
    rows, cols = linear_sum_assignment(-overlap)
    axis_of_column = np.empty(3, dtype=int)
    axis_of_column[cols] = rows
    return axis_of_column


def transition_frequencies(levels: TripletLevels) -> TransitionSet:
    """Label levels by dominant zero-field character and difference them."""
    axis_of_column = _axis_assignment(levels.states)
    energy = {AXIS_LABELS[axis_of_column[k]]: levels.energies[k] for k in range(3)}
    return TransitionSet(
        f_xy=abs(energy["x"] - energy["y"]),
        f_yz=abs(energy["y"] - energy["z"]),
        f_xz=abs(energy["x"] - energy["z"]),
    )


def transitions_from_zfs(
    zfs: ZfsParameters, field: MagneticField | None = None
) -> TransitionSet:
    """Convenience pipeline: parameters -> Hamiltonian -> transitions."""
    return transition_frequencies(eigenlevels(build_hamiltonian(zfs, field)))


def zfs_from_transitions(
    f_xz: float, f_yz: float, f_xy: float | None = None
) -> ZfsParameters | tuple[ZfsParameters, float]:
    """Invert zero-field transition frequencies to (D, E).

    D = (f_xz + f_yz) / 2 and E = (f_xz - f_yz) / 2.  When f_xy is also
    supplied, returns (parameters, closure_residual) with the residual
    |f_xy - 2E| measuring internal consistency of the three lines.
    """
    for name, val in (("f_xz", f_xz), ("f_yz", f_yz)):
        if not np.isfinite(val) or val <= 0:
            raise InvalidParameterError(f"{name} must be finite and positive")
    if f_xz < f_yz:
        raise InvalidParameterError(
            "f_xz < f_yz: transition labels are swapped (f_xz = D + E is the"
            " higher line for E >= 0)"
        )
    params = ZfsParameters(D=(f_xz + f_yz) / 2.0, E=(f_xz - f_yz) / 2.0)
    if f_xy is None:
        return params
    if not np.isfinite(f_xy) or f_xy < 0:
        raise InvalidParameterError("f_xy must be finite and >= 0")
    return params, abs(f_xy - 2.0 * params.E)


def ordered_eigensystem(tensor: ZfsTensor) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and axes in canonical (x, y, z) order.

    Order is by descending (|lambda|, lambda), assigned to (z, y, x); ties
    in magnitude are broken by signed value so (+a, -a, 0) always orders
    deterministically.  Axis columns get the positive-leading-component
    sign convention.
    """
    lam, vec = np.linalg.eigh(tensor.tensor)
    order = sorted(range(3), key=lambda k: (abs(lam[k]), lam[k]), reverse=True)
    z_idx, y_idx, x_idx = order
    eigenvalues = np.array([lam[x_idx], lam[y_idx], lam[z_idx]])
    axes = vec[:, [x_idx, y_idx, z_idx]].copy()
    for k in range(3):
        lead = np.argmax(np.abs(axes[:, k]))
        if axes[lead, k] < 0:
            axes[:, k] *= -1.0
    return eigenvalues, axes


def tensor_to_parameters(tensor: ZfsTensor) -> tuple[ZfsParameters, np.ndarray]:
    """Extract canonical (D, E) and principal axes from an interaction tensor.

    With eigenvalues (lambda_x, lambda_y, lambda_z) in canonical order,
    D = 3/2 lambda_z and E = (lambda_x - lambda_y) / 2; if that D comes
    out negative both signs are flipped, which lands every traceless
    symmetric tensor on D > 0, 0 <= E <= D/3.
    """
    eigenvalues, axes = ordered_eigensystem(tensor)
    lam_x, lam_y, lam_z = eigenvalues
    d = 1.5 * lam_z
    e = 0.5 * (lam_x - lam_y)
    if d < 0:
        d, e = -d, -e
    return ZfsParameters(D=d, E=e), axes


def parameters_to_tensor(zfs: ZfsParameters) -> ZfsTensor:
    """Principal-frame tensor diag(-D/3 + E, -D/3 - E, 2D/3)."""
    d, e = zfs.D, zfs.E
    return ZfsTensor(np.diag([-d / 3.0 + e, -d / 3.0 - e, 2.0 * d / 3.0]))
