"""Trace-distance distinguishability and the time-averaged sigma labels.

sigma is the time average (trapezoidal rule on the trajectory grid) of the
trace distance between two dynamics; sigma_alpha labels a family of
spin-boson runs, swept in alpha = omega_c/delta, by their distance from the
run at a Markovian reference alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from .states import StateTrajectory, as_state_matrix

HERMITICITY_TOL = 1e-8


class GridMismatchError(ValueError):
    """The two trajectories do not share one time grid."""


@dataclass(frozen=True)
class SigmaLabel:
    """Non-Markovianity label of one run: alpha = omega_c/delta and the
    time-averaged trace distance sigma in [0, 1] to the reference run."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")


def trace_distance(a, b) -> float:
    """D(a, b) = (1/2) * sum |eigenvalues of (b - a)|.

    Accepts DensityMatrix2 instances or plain 2x2 arrays; inputs must be
    Hermitian within ``HERMITICITY_TOL``.
    """
    ma = as_state_matrix(a)
    mb = as_state_matrix(b)
    for m in (ma, mb):
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("trace_distance requires Hermitian inputs")
    evals = np.linalg.eigvalsh(mb - ma)
    return float(0.5 * np.sum(np.abs(evals)))


def _trace_distance_series(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    diff = states_b - states_a
    # Hermitian 2x2: eigenvalues aa/2 +- sqrt((aa/2)^2 + |b|^2 - det-ish);
    # use the closed form for speed across whole trajectories.
    tr = np.real(diff[:, 0, 0] + diff[:, 1, 1])
    det = np.real(diff[:, 0, 0] * diff[:, 1, 1] - diff[:, 0, 1] * diff[:, 1, 0])
    disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    lam1 = 0.5 * tr + disc
    lam2 = 0.5 * tr - disc
    return 0.5 * (np.abs(lam1) + np.abs(lam2))


def sigma_average(traj_a: StateTrajectory, traj_b: StateTrajectory) -> float:
    """(1/T) * integral of D(rho_a(t), rho_b(t)) dt, trapezoidal rule.

    Raises :class:`GridMismatchError` unless both trajectories share one
    time grid.
    """
    if len(traj_a) != len(traj_b) or not np.array_equal(traj_a.times, traj_b.times):
        raise GridMismatchError("trajectories are not on the same time grid")
    d = _trace_distance_series(traj_a.states, traj_b.states)
    ts = traj_a.times
    span = ts[-1] - ts[0]
    if span <= 0:
        raise ValueError("trajectory must span a positive time interval")
    return float(np.trapezoid(d, ts) / span)


def sigma_alpha_labels(trajectories: Mapping[float, StateTrajectory],
                       reference_alpha: float) -> Dict[float, SigmaLabel]:
    """Label every run in an alpha-keyed sweep by its sigma to the reference.

    The reference run must be present in the map; its own label is exactly
    zero.  All runs must share the reference's time grid.
    """
    if reference_alpha not in trajectories:
        raise ValueError(
            f"reference alpha {reference_alpha} missing from the sweep")
    ref = trajectories[reference_alpha]
    out = {}
    for alpha, traj in trajectories.items():
        sig = 0.0 if traj is ref else sigma_average(traj, ref)
        out[alpha] = SigmaLabel(alpha=float(alpha), sigma=sig)
    return out
