"""Two-level-system states and operators.

Basis convention: basis vectors are ordered (|0>, |1>) with |0> the ground
state, so the bare TLS Hamiltonian is H = (omega0/2) * SIGMA_Z with
SIGMA_Z = |1><1| - |0><0|.  With this ordering the population difference
P(t) = rho11 - rho00 equals <SIGMA_Z> and the free coherence rotates as
rho01(t) = rho01(0) * exp(+i*omega0*t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

TRACE_TOL = 1e-12
HERMITICITY_TOL = 1e-10
EIGENVALUE_SLACK = 1e-10


class StateValidationError(ValueError):
    """Raised when a 2x2 matrix is not a valid density matrix."""


class DensityMatrix2:
    """A validated 2x2 density matrix (Hermitian, unit trace, PSD).

    Parameters
    ----------
    matrix : array_like
        2x2 complex matrix.  Must be Hermitian, have trace 1 within
        ``TRACE_TOL`` and eigenvalues >= -``EIGENVALUE_SLACK``.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise StateValidationError(f"expected a 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise StateValidationError("matrix is not Hermitian")
        if abs(m.trace().real - 1.0) > TRACE_TOL or abs(m.trace().imag) > TRACE_TOL:
            raise StateValidationError(f"trace {m.trace()} != 1")
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if evals.min() < -EIGENVALUE_SLACK:
            raise StateValidationError(f"negative eigenvalue {evals.min()}")
        self.matrix = m

    @classmethod
    def ground(cls) -> "DensityMatrix2":
        return cls(np.diag([1.0, 0.0]))

    @classmethod
    def excited(cls) -> "DensityMatrix2":
        return cls(np.diag([0.0, 1.0]))

    @classmethod
    def plus(cls) -> "DensityMatrix2":
        """|+><+| with |+> = (|0> + |1>)/sqrt(2)."""
        return cls(np.full((2, 2), 0.5))

    @property
    def rho00(self) -> complex:
        return self.matrix[0, 0]

    @property
    def rho01(self) -> complex:
        return self.matrix[0, 1]

    @property
    def rho11(self) -> complex:
        return self.matrix[1, 1]

    @property
    def population_difference(self) -> float:
        """P = rho11 - rho00."""
        return float((self.matrix[1, 1] - self.matrix[0, 0]).real)

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.matrix.astype(dtype)
        return self.matrix

    def __repr__(self):
        return f"DensityMatrix2({self.matrix.tolist()!r})"


def as_state_matrix(state) -> np.ndarray:
    """Coerce a DensityMatrix2 or array_like to a plain 2x2 complex array."""
    if isinstance(state, DensityMatrix2):
        return state.matrix
    m = np.asarray(state, dtype=complex)
    if m.shape != (2, 2):
        raise StateValidationError(f"expected a 2x2 matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class StateTrajectory:
    """A time-ordered sequence of 2x2 states on a common time grid.

    Attributes
    ----------
    times : ndarray, shape (T,)
    states : ndarray, shape (T, 2, 2)
    """

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if states.shape != (times.size, 2, 2):
            raise ValueError(
                f"states shape {states.shape} incompatible with {times.size} times"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.times.size

    @property
    def population_difference(self) -> np.ndarray:
        return np.real(self.states[:, 1, 1] - self.states[:, 0, 0])

    @property
    def coherence_re(self) -> np.ndarray:
        return np.real(self.states[:, 0, 1])
