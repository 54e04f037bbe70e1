"""Exact reduced dynamics of the pure-dephasing model (zero tunneling).

Populations are frozen and the coherence decays as

    rho01(t) = rho01(0) * exp(-Gamma(t) + i*omega0*t)

with the decoherence exponent Gamma(t) from :func:`noisespec.bath.decoherence_gamma`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import OhmicFamily, decoherence_gamma
from .states import DensityMatrix2, StateTrajectory

N_TIME_SAMPLES = 200
DEFAULT_T_MAX = 20.0


@dataclass(frozen=True)
class DephasingRun:
    """Parameters of one pure-dephasing evolution.

    The time grid is fixed at ``N_TIME_SAMPLES`` uniform samples on
    [0, t_max].  The dataset convention is T = 0 and rho(0) = |+><+|; both
    are overridable here for testing.
    """

    sd: OhmicFamily
    omega0: float = 1.0
    temperature_kT: float = 0.0
    initial: DensityMatrix2 = field(default_factory=DensityMatrix2.plus)
    t_max: float = DEFAULT_T_MAX

    def __post_init__(self):
        if not isinstance(self.sd, OhmicFamily):
            raise TypeError("dephasing runs use the OhmicFamily spectral density")
        if self.temperature_kT < 0:
            raise ValueError("temperature_kT must be >= 0")
        if self.t_max <= 0:
            raise ValueError("t_max must be > 0")
        if not isinstance(self.initial, DensityMatrix2):
            object.__setattr__(self, "initial", DensityMatrix2(self.initial))

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, N_TIME_SAMPLES)


def evolve_dephasing(run: DephasingRun) -> StateTrajectory:
    """Evolve the reduced density matrix on the run's time grid.

    Populations stay at their initial values; the coherence picks up the
    factor exp(-Gamma(t) + i*omega0*t).
    """
    ts = run.time_grid
    gam = decoherence_gamma(run.sd, run.temperature_kT, ts)
    rho0 = run.initial.matrix
    phase = np.exp(-gam + 1j * run.omega0 * ts)
    states = np.empty((ts.size, 2, 2), dtype=complex)
    states[:, 0, 0] = rho0[0, 0]
    states[:, 1, 1] = rho0[1, 1]
    states[:, 0, 1] = rho0[0, 1] * phase
    states[:, 1, 0] = np.conj(states[:, 0, 1])
    return StateTrajectory(ts, states)


def coherence_feature(trajectory: StateTrajectory) -> np.ndarray:
    """Re rho01(t_i): the feature row fed to the ML models."""
    return trajectory.coherence_re.copy()
