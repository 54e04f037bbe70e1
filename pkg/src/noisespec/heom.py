"""Hierarchical propagation of the spin-boson model with a Lorentz-Drude bath.

The system Hamiltonian is H = (omega0/2)*sigma_z + delta*sigma_x, coupled to
the bath through Q = sigma_z/2.  The bath correlation function enters through
its exponential decomposition (:func:`noisespec.bath.matsubara_decompose`);
each exponential term carries one hierarchy index, auxiliary density
operators (ADOs) are truncated at total tier ``depth_L`` (tiers beyond L set
to zero), and the truncated thermal tail is optionally folded into a
Markovian closure rate acting as -R*[Q,[Q,.]] on every ADO.

ADOs use the scaled normalization (raising coefficient sqrt((n_k+1)|c_k|),
lowering sqrt(n_k/|c_k|)*(c_k Q rho - c_k* rho Q)), which keeps deep-tier
magnitudes O(1) at strong coupling.  The integrator is classic fixed-step
RK4; for a time-independent generator one RK4 step is the linear map
I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24, which is applied either as a
precomputed dense matrix (small hierarchies) or stage-by-stage with sparse
matrix-vector products (large ones).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .bath import BathSpec, LorentzDrude, matsubara_decompose, matsubara_tail_weight
from .states import DensityMatrix2, SIGMA_X, SIGMA_Z, StateTrajectory

DT_FACTOR = 0.05          # max internal step = DT_FACTOR / (fastest rate)
DENSE_DIM_MAX = 600       # use a dense one-step matrix up to this vec dimension
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
T_MAX_PERIODS = 20.0      # default horizon: 20 tunneling times (20/delta)
N_TIME_SAMPLES = 200


class HierarchyTooLargeError(RuntimeError):
    """ADO count exceeds the configured memory budget."""

    def __init__(self, n_ados, max_ados):
        super().__init__(
            f"hierarchy needs {n_ados} ADOs, exceeding the budget of {max_ados}")
        self.n_ados = n_ados


class IntegrationError(RuntimeError):
    """Propagation produced non-finite or unphysical output."""


@dataclass(frozen=True)
class SpinBosonSpec:
    """Spin-boson problem: H = (omega0/2)*sigma_z + delta*sigma_x, Q = sigma_z/2.

    ``delta`` must be positive (the delta = 0 limit is the analytically
    solvable pure-dephasing model) and the bath must be Lorentz-Drude at
    finite temperature (the exponential decomposition requires kT > 0).
    """

    delta: float
    bath: BathSpec
    omega0: float = 1.0
    initial: DensityMatrix2 = field(default_factory=DensityMatrix2.excited)

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0 (delta = 0 is pure dephasing)")
        if not isinstance(self.bath.sd, LorentzDrude):
            raise TypeError("spin-boson runs use the LorentzDrude spectral density")
        if self.bath.temperature_kT <= 0:
            raise ValueError("spin-boson runs require temperature_kT > 0")
        if not isinstance(self.initial, DensityMatrix2):
            object.__setattr__(self, "initial", DensityMatrix2(self.initial))

    @property
    def hamiltonian(self) -> np.ndarray:
        return 0.5 * self.omega0 * SIGMA_Z + self.delta * SIGMA_X

    @property
    def alpha(self) -> float:
        """Bandwidth-to-tunneling ratio omega_c / delta."""
        return self.bath.sd.omega_c / self.delta

    def default_time_grid(self) -> np.ndarray:
        return np.linspace(0.0, T_MAX_PERIODS / self.delta, N_TIME_SAMPLES)


@dataclass(frozen=True)
class HierarchySpec:
    """Numerical controls of the hierarchy propagation.

    ``dt`` is the internal integrator step; if None it is set to
    DT_FACTOR / rate where rate is the fastest scale in the generator
    (decomposition rates, system eigensplitting, closure rate, tier-coupling
    magnitude).  ``n_steps_internal`` overrides the number of internal steps
    per output interval.  ``markovian_closure`` folds the truncated thermal
    tail into a -R*[Q,[Q,.]] term on every ADO.
    """

    depth_L: int = 5
    n_matsubara_K: int = 2
    dt: Optional[float] = None
    n_steps_internal: Optional[int] = None
    markovian_closure: bool = True
    max_ados: int = 20000

    def __post_init__(self):
        if self.depth_L < 1:
            raise ValueError("depth_L must be >= 1")
        if self.n_matsubara_K < 0:
            raise ValueError("n_matsubara_K must be >= 0")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.n_steps_internal is not None and self.n_steps_internal < 1:
            raise ValueError("n_steps_internal must be >= 1")


def ado_count(depth_L: int, n_matsubara_K: int) -> int:
    """Number of multi-indices n in N^(K+1) with |n| <= L."""
    return comb(depth_L + n_matsubara_K + 1, n_matsubara_K + 1)


def _enumerate_indices(depth_L, n_modes):
    """All multi-indices (lexicographic) with n_modes slots and sum <= depth_L."""
    out = []
    stack = [(0, depth_L, ())]
    while stack:
        pos, budget, prefix = stack.pop()
        if pos == n_modes:
            out.append(prefix)
            continue
        # push reversed so lexicographically smallest is processed first
        for v in range(budget, -1, -1):
            stack.append((pos + 1, budget - v, prefix + (v,)))
    return out


class HierarchyGenerator:
    """The coupled ADO equations of motion as one sparse linear generator.

    Attributes
    ----------
    indices : list of tuple
        Multi-indices, position 0 is the physical state (0, ..., 0).
    matrix : scipy.sparse.csr_matrix
        Generator acting on the stacked row-major vec of all ADOs.
    closure_rate : float
        Markovian closure rate folded into the diagonal blocks (0 if off).
    rate_scale : float
        Fastest rate in the generator; the auto step is DT_FACTOR/rate_scale.
    """

    def __init__(self, spec: SpinBosonSpec, hierarchy: HierarchySpec):
        L, K = hierarchy.depth_L, hierarchy.n_matsubara_K
        n = ado_count(L, K)
        if n > hierarchy.max_ados:
            raise HierarchyTooLargeError(n, hierarchy.max_ados)
        self.spec = spec
        self.hierarchy = hierarchy
        self.decomposition = matsubara_decompose(spec.bath, K)
        self.closure_rate = (
            matsubara_tail_weight(spec.bath, K) if hierarchy.markovian_closure
            else 0.0)
        self.indices = _enumerate_indices(L, K + 1)
        assert self.indices[0] == (0,) * (K + 1)
        self.index_of = {m: i for i, m in enumerate(self.indices)}
        self.n_ados = n
        self.neighbor_counts = np.zeros(n, dtype=int)
        self.matrix = self._build_matrix()
        ck, vk = self.decomposition.ck, self.decomposition.vk
        omega_sys = 2.0 * np.hypot(0.5 * spec.omega0, spec.delta)
        self.rate_scale = max(
            float(vk.max()), omega_sys, abs(self.closure_rate),
            float(np.sqrt(L * np.abs(ck).max())))

    def _build_matrix(self) -> sp.csr_matrix:
        spec, h = self.spec, self.hierarchy
        ck, vk = self.decomposition.ck, self.decomposition.vk
        H = spec.hamiltonian
        Q = 0.5 * SIGMA_Z
        eye4 = np.eye(4)

        def left(A):
            # row-major vec: vec(A rho) = (A kron I) vec(rho)
            return np.kron(A, np.eye(2))

        def right(A):
            # vec(rho A) = (I kron A^T) vec(rho)
            return np.kron(np.eye(2), A.T)

        comm_H = -1j * (left(H) - right(H))
        comm_Q = left(Q) - right(Q)
        double_comm_Q = comm_Q @ comm_Q

        rows, cols, vals = [], [], []

        def add_block(a, b, M):
            nz = np.nonzero(M)
            for i, j in zip(*nz):
                rows.append(4 * a + i)
                cols.append(4 * b + j)
                vals.append(M[i, j])

        for a, m in enumerate(self.indices):
            decay = float(np.dot(m, vk))
            add_block(a, a, comm_H - decay * eye4
                      - self.closure_rate * double_comm_Q)
            for k in range(len(vk)):
                abs_ck = abs(ck[k])
                up = m[:k] + (m[k] + 1,) + m[k + 1:]
                b = self.index_of.get(up)
                if b is not None and abs_ck > 0.0:
                    coef = -1j * np.sqrt((m[k] + 1) * abs_ck)
                    add_block(a, b, coef * comm_Q)
                    self.neighbor_counts[a] += 1
                if m[k] > 0 and abs_ck > 0.0:
                    down = m[:k] + (m[k] - 1,) + m[k + 1:]
                    b = self.index_of[down]
                    coef = -1j * np.sqrt(m[k] / abs_ck)
                    add_block(a, b, coef * (ck[k] * left(Q)
                                            - np.conj(ck[k]) * right(Q)))
                    self.neighbor_counts[a] += 1
        dim = 4 * self.n_ados
        return sp.csr_matrix(
            sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)))

    def auto_dt(self) -> float:
        return DT_FACTOR / self.rate_scale


@dataclass(frozen=True)
class HierarchyState:
    """Full hierarchy state: stacked ADOs plus their multi-indices.

    ``ados[0]`` is the physical reduced density matrix.
    """

    indices: tuple
    ados: np.ndarray  # (n_ados, 2, 2) complex

    @property
    def physical(self) -> np.ndarray:
        return self.ados[0]

    def ado(self, multi_index) -> np.ndarray:
        return self.ados[self.indices.index(tuple(multi_index))]


@dataclass(frozen=True)
class HeomTrajectory(StateTrajectory):
    """Output of :func:`propagate`: physical states plus run metadata."""

    spec: SpinBosonSpec = None
    hierarchy: HierarchySpec = None
    n_ados: int = 0
    final_state: HierarchyState = None


def build_hierarchy(spec: SpinBosonSpec, hierarchy: HierarchySpec) -> HierarchyGenerator:
    """Assemble the ADO coupling generator for the given spin-boson problem."""
    return HierarchyGenerator(spec, hierarchy)


def _rk4_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    hA = h * A
    M = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in (1, 2, 3, 4):
        term = term @ hA / k
        M += term
    return M


def propagate(spec: SpinBosonSpec, hierarchy: HierarchySpec,
              t_grid=None, generator: HierarchyGenerator = None) -> HeomTrajectory:
    """Propagate from the factorized initial state and sample the physical ADO.

    ``t_grid`` defaults to 200 uniform samples on [0, 20/delta].  The
    physical state is checked for finiteness, unit trace (within 1e-8) and
    Hermiticity (within 1e-10) at every output sample.
    """
    gen = generator if generator is not None else build_hierarchy(spec, hierarchy)
    ts = spec.default_time_grid() if t_grid is None else np.asarray(t_grid, float)
    if ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must start at 0 and increase strictly")

    dim = 4 * gen.n_ados
    v = np.zeros(dim, dtype=complex)
    v[:4] = spec.initial.matrix.reshape(-1)
    states = np.empty((ts.size, 2, 2), dtype=complex)
    states[0] = spec.initial.matrix

    dt_max = hierarchy.dt if hierarchy.dt is not None else gen.auto_dt()
    A_sparse = gen.matrix
    dense = dim <= DENSE_DIM_MAX
    A_dense = A_sparse.toarray() if dense else None

    A_stage = A_dense if dense else A_sparse

    def rk4_stages(vec, h, n_steps):
        for _ in range(n_steps):
            k1 = A_stage @ vec
            k2 = A_stage @ (vec + (0.5 * h) * k1)
            k3 = A_stage @ (vec + (0.5 * h) * k2)
            k4 = A_stage @ (vec + h * k3)
            vec = vec + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return vec

    step_cache = {}

    def dense_steps(vec, h, n_steps):
        key = round(h, 15)
        M = step_cache.get(key)
        if M is None:
            M = _rk4_step_matrix(A_dense, h)
            step_cache[key] = M
        for _ in range(n_steps):
            vec = M @ vec
        return vec

    stepper = dense_steps if dense else rk4_stages

    def advance(vec, seg):
        if hierarchy.n_steps_internal:
            # exact per-interval step count (uniform grids reuse one matrix)
            n_int = hierarchy.n_steps_internal
            return stepper(vec, seg / n_int, n_int)
        # base steps of dt_max plus one remainder step, so irregular output
        # grids do not force a new step matrix per interval
        n_full = int(seg / dt_max)
        rem = seg - n_full * dt_max
        if n_full:
            vec = stepper(vec, dt_max, n_full)
        if rem > 1e-12 * dt_max:
            vec = rk4_stages(vec, rem, 1)
        return vec

    for j in range(1, ts.size):
        v = advance(v, ts[j] - ts[j - 1])
        rho = v[:4].reshape(2, 2)
        if not np.all(np.isfinite(v)):
            raise IntegrationError(
                f"non-finite hierarchy state at output step {j} "
                f"(t = {ts[j]:.6g}, ADO norm = {np.linalg.norm(v):.3e})")
        tr = rho[0, 0] + rho[1, 1]
        if abs(tr - 1.0) > TRACE_TOL:
            raise IntegrationError(
                f"trace drifted to {tr} at output step {j} (t = {ts[j]:.6g})")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise IntegrationError(
                f"Hermiticity violated at output step {j} (t = {ts[j]:.6g})")
        states[j] = rho

    final = HierarchyState(tuple(gen.indices), v.reshape(gen.n_ados, 2, 2))
    return HeomTrajectory(times=ts, states=states, spec=spec,
                          hierarchy=hierarchy, n_ados=gen.n_ados,
                          final_state=final)


@dataclass(frozen=True)
class ConvergenceReport:
    delta_L: float
    delta_K: float


def convergence_check(spec: SpinBosonSpec, hierarchy: HierarchySpec,
                      t_grid=None) -> ConvergenceReport:
    """Sup-norm change of P(t) when L -> L+1 and (separately) K -> K+1."""
    base = propagate(spec, hierarchy, t_grid).population_difference
    up_L = replace(hierarchy, depth_L=hierarchy.depth_L + 1)
    up_K = replace(hierarchy, n_matsubara_K=hierarchy.n_matsubara_K + 1)
    p_L = propagate(spec, up_L, t_grid).population_difference
    p_K = propagate(spec, up_K, t_grid).population_difference
    return ConvergenceReport(delta_L=float(np.max(np.abs(base - p_L))),
                             delta_K=float(np.max(np.abs(base - p_K))))


def closed_system_population(spec: SpinBosonSpec, t_grid=None) -> np.ndarray:
    """P(t) under bare unitary evolution of H (the gamma -> 0 oracle)."""
    ts = spec.default_time_grid() if t_grid is None else np.asarray(t_grid, float)
    w, V = np.linalg.eigh(spec.hamiltonian)
    rho0 = V.conj().T @ spec.initial.matrix @ V
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        ph = np.exp(-1j * w * t)
        rho = V @ (rho0 * np.outer(ph, ph.conj())) @ V.conj().T
        out[i] = (rho[1, 1] - rho[0, 0]).real
    return out
