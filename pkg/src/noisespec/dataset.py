"""Labeled dataset generation for the ML tasks.

Tasks
-----
``s_class``  Ohmicity classification from dephasing coherences Re rho01(t).
             Separated mode draws s from (0.1, 0.25) | {1} | (2, 4);
             continuous mode uniform on (0.1, 4).  eta fixed at 0.25.
``eta``      Coupling-strength regression from dephasing coherences, s = 1.
             Separated mode log-uniform on (1e-2, 1e-1) | (0.7, 1);
             continuous log-uniform on (1e-3, 1).
``alpha``    Non-Markovianity regression from spin-boson populations P(t)
             (gamma = 0.25, k_B T = 0.5*delta, rho(0) = |1><1|), alpha =
             omega_c/delta log-uniform on [0.166, 10].  Targets alpha,
             log10(alpha) and the trace-distance score sigma_alpha against
             the Markovian reference run at alpha = 10.

Every feature row has 200 samples.  Dephasing runs use t_max = 20; each
spin-boson run uses t_max = 20/delta so the sweep carries comparable
dynamical content.  The sigma_alpha score compares every run to the
reference over one shared window [0, SIGMA_T_MAX] (the natural 20/delta
horizon of the fastest runs in the sweep, so the most non-Markovian
dynamics completes its characteristic evolution inside the window); each
row is propagated once on the union of its feature grid and the shared
sigma grid, and the reference is propagated once per dataset on the sigma
grid itself.
"""

from __future__ import annotations

import csv
import hashlib
import json
import multiprocessing
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from . import __version__
from .bath import BathSpec, LorentzDrude, OhmicFamily
from .dephasing import DephasingRun, coherence_feature, evolve_dephasing
from .heom import HierarchySpec, SpinBosonSpec, propagate
from .nonmarkov import _trace_distance_series
from .states import DensityMatrix2, StateTrajectory

N_FEATURES = 200

# fixed physics (dataset conventions)
DEPHASING_OMEGA_C = 0.5
DEPHASING_ETA_DEFAULT = 0.25
DEPHASING_T_MAX = 20.0
SPIN_BOSON_GAMMA = 0.25
SPIN_BOSON_OMEGA_C = 0.5
REFERENCE_ALPHA = 10.0
HIERARCHY_DEPTH = 5
SIGMA_T_MAX = 10.0

# sampling intervals
S_SEPARATED = ((0.1, 0.25), (1.0, 1.0), (2.0, 4.0))
S_CONTINUOUS = (0.1, 4.0)
ETA_SEPARATED = ((1e-2, 1e-1), (0.7, 1.0))
ETA_CONTINUOUS = (1e-3, 1.0)
ALPHA_INTERVAL = (0.166, 10.0)
OHMIC_CLASS_BAND = 0.1

# alpha values where a Matsubara rate collides with omega_c (the k-th rate
# equals omega_c exactly at alpha = k*pi for k_B T = 0.5*delta); draws this
# close are rejected and redrawn to keep the decomposition well conditioned.
ALPHA_RESONANCE_HALF_WIDTH = 0.05

TASKS = ("s_class", "eta", "alpha")
MODES = ("separated", "continuous")


class GenerationError(RuntimeError):
    """A simulator failed while generating dataset rows."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with per-row targets, physics parameters and split."""

    task: str
    mode: str
    features: np.ndarray               # (N, 200) float64
    targets: Dict[str, np.ndarray]     # target columns, incl. "class" labels
    params: Dict[str, np.ndarray]      # per-row physics parameters
    split: np.ndarray                  # (N,) of {"", "train", "val", "test"}
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.shape != (n, N_FEATURES):
            raise ValueError(f"features must be (N, {N_FEATURES})")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        for name, col in {**self.targets, **self.params}.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} has wrong length")
        if len(self.split) != n:
            raise ValueError("split column has wrong length")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def rows(self, split_name: str) -> np.ndarray:
        """Row indices assigned to one split."""
        return np.flatnonzero(self.split == split_name)

    def target_column(self, task: Optional[str] = None) -> np.ndarray:
        """The regression/classification target for a task name.

        s_class -> integer class labels; eta -> eta; alpha/log_alpha/
        sigma_alpha -> the matching column of an alpha-family dataset.
        """
        task = task or self.task
        if task == "s_class":
            return self.targets["class"]
        if task in ("eta", "alpha", "log_alpha", "sigma_alpha"):
            if task not in self.targets:
                raise KeyError(f"dataset has no {task!r} target")
            return self.targets[task]
        raise KeyError(f"unknown task {task!r}")


def sample_parameters(task: str, n: int, mode: str, seed: int,
                      interval=None) -> np.ndarray:
    """Draw the swept physics parameter for ``n`` rows, deterministically.

    ``interval`` optionally overrides the continuous-mode sampling range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if task == "alpha" and mode == "separated":
        raise ValueError("the alpha task has no separated mode")
    if interval is not None and mode == "separated":
        raise ValueError("interval overrides apply to continuous mode only")
    rng = np.random.default_rng(seed)

    if task == "s_class":
        if mode == "continuous":
            return rng.uniform(*(interval or S_CONTINUOUS), size=n)
        return _stratified(rng, S_SEPARATED, n)
    if task == "eta":
        if mode == "continuous":
            return _log_uniform(rng, *(interval or ETA_CONTINUOUS), n)
        lo_a, lo_b = ETA_SEPARATED[0]
        hi_a, hi_b = ETA_SEPARATED[1]
        sizes = _stratum_sizes(n, 2)
        vals = np.concatenate([
            _log_uniform(rng, lo_a, lo_b, sizes[0]),
            _log_uniform(rng, hi_a, hi_b, sizes[1]),
        ])
        return rng.permutation(vals)
    # alpha: log-uniform with resonance notches redrawn
    lo, hi = interval or ALPHA_INTERVAL
    out = _log_uniform(rng, lo, hi, n)
    notches = np.array([np.pi, 2 * np.pi, 3 * np.pi])
    for i in range(n):
        while np.any(np.abs(out[i] - notches) < ALPHA_RESONANCE_HALF_WIDTH):
            out[i] = _log_uniform(rng, lo, hi, 1)[0]
    return out


def _log_uniform(rng, lo, hi, n):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))


def _stratum_sizes(n, k):
    sizes = [n // k] * k
    for i in range(n - sum(sizes)):
        sizes[i] += 1
    return sizes


def _stratified(rng, strata, n):
    sizes = _stratum_sizes(n, len(strata))
    vals = []
    for (lo, hi), m in zip(strata, sizes):
        if lo == hi:
            vals.append(np.full(m, lo))
        else:
            vals.append(rng.uniform(lo, hi, size=m))
    return rng.permutation(np.concatenate(vals))


def label_s_class(s: float, ohmic_band: float = OHMIC_CLASS_BAND) -> int:
    """0 sub-Ohmic, 1 Ohmic (|s - 1| <= band), 2 super-Ohmic."""
    if s <= 0:
        raise ValueError("s must be > 0")
    if abs(s - 1.0) <= ohmic_band:
        return 1
    return 0 if s < 1.0 else 2


# ---------------------------------------------------------------------------
# row workers (module level so multiprocessing can pickle them)

def _dephasing_row(args):
    eta, s, omega_c = args
    try:
        run = DephasingRun(sd=OhmicFamily(eta=eta, s=s, omega_c=omega_c),
                           temperature_kT=0.0, t_max=DEPHASING_T_MAX)
        return coherence_feature(evolve_dephasing(run))
    except Exception as exc:
        raise GenerationError(
            f"dephasing row (eta={eta}, s={s}, omega_c={omega_c}) failed: "
            f"{exc}") from exc


_REF_CONTEXT = {}


def _init_reference(ref_states):
    _REF_CONTEXT["states"] = ref_states


def sigma_time_grid() -> np.ndarray:
    """Shared grid on which every run is compared with the reference."""
    return np.linspace(0.0, SIGMA_T_MAX, N_FEATURES)


def matsubara_terms_for_alpha(alpha: float) -> int:
    """Per-run Matsubara count: enough thermal rates to cover the system
    frequency at k_B T = 0.5*delta (rate spacing shrinks as alpha grows)."""
    return int(np.clip(np.ceil(0.55 * alpha), 2, 6))


def _spin_boson_spec(alpha: float, gamma: float = SPIN_BOSON_GAMMA,
                     omega_c: float = SPIN_BOSON_OMEGA_C) -> SpinBosonSpec:
    delta = omega_c / alpha
    bath = BathSpec(LorentzDrude(gamma, omega_c), temperature_kT=0.5 * delta)
    return SpinBosonSpec(delta=delta, bath=bath,
                         initial=DensityMatrix2.excited())


def spin_boson_trajectories(alpha: float, gamma: float = SPIN_BOSON_GAMMA,
                            omega_c: float = SPIN_BOSON_OMEGA_C):
    """Propagate one sweep run on the union of its feature grid and the
    shared sigma grid; return (feature trajectory, sigma-grid trajectory,
    Matsubara count)."""
    spec = _spin_boson_spec(alpha, gamma, omega_c)
    k_terms = matsubara_terms_for_alpha(alpha)
    h = HierarchySpec(depth_L=HIERARCHY_DEPTH, n_matsubara_K=k_terms)
    f_grid = spec.default_time_grid()
    s_grid = sigma_time_grid()
    union = np.union1d(f_grid, s_grid)
    traj = propagate(spec, h, t_grid=union)
    f_pos = np.searchsorted(union, f_grid)
    s_pos = np.searchsorted(union, s_grid)
    feature_traj = StateTrajectory(f_grid, traj.states[f_pos])
    sigma_traj = StateTrajectory(s_grid, traj.states[s_pos])
    return feature_traj, sigma_traj, k_terms


def _heom_row(args):
    alpha, gamma, omega_c = args
    try:
        feature_traj, sigma_traj, k_terms = spin_boson_trajectories(
            alpha, gamma, omega_c)
        d = _trace_distance_series(sigma_traj.states, _REF_CONTEXT["states"])
        sigma = float(np.trapezoid(d, sigma_traj.times) / SIGMA_T_MAX)
    except Exception as exc:
        raise GenerationError(
            f"spin-boson row (alpha={alpha}, gamma={gamma}, "
            f"omega_c={omega_c}) failed: {exc}") from exc
    delta = omega_c / alpha
    return (feature_traj.population_difference, sigma, delta,
            0.5 * delta, float(feature_traj.times[-1]), k_terms)


def reference_trajectory(gamma: float = SPIN_BOSON_GAMMA,
                         omega_c: float = SPIN_BOSON_OMEGA_C) -> StateTrajectory:
    """The Markovian reference run (alpha = 10) on the shared sigma grid."""
    spec = _spin_boson_spec(REFERENCE_ALPHA, gamma, omega_c)
    k_terms = matsubara_terms_for_alpha(REFERENCE_ALPHA)
    h = HierarchySpec(depth_L=HIERARCHY_DEPTH, n_matsubara_K=k_terms)
    return propagate(spec, h, t_grid=sigma_time_grid())


def _parallel_map(fn, items, workers, initializer=None, initargs=()):
    if workers <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(items) // (8 * workers))
    with ctx.Pool(workers, initializer=initializer, initargs=initargs) as pool:
        return pool.map(fn, items, chunksize=chunk)


# ---------------------------------------------------------------------------

def generate(task: str, mode: str, n: int, seed: int, workers: int = 1,
             physics: Optional[dict] = None) -> Dataset:
    """Sample parameters, run the simulators and assemble a labeled dataset.

    Deterministic given (task, mode, n, seed, physics) regardless of
    ``workers``.  ``physics`` may override ``omega_c``, the fixed ``eta`` of
    the classification task, ``gamma``, and the continuous sampling
    ``interval``.  The returned dataset is unsplit; see :func:`split`.
    """
    physics = dict(physics or {})
    unknown = set(physics) - {"omega_c", "eta", "gamma", "interval"}
    if unknown:
        raise ValueError(f"unknown physics overrides: {sorted(unknown)}")
    omega_c = float(physics.get(
        "omega_c", DEPHASING_OMEGA_C if task != "alpha" else SPIN_BOSON_OMEGA_C))
    interval = physics.get("interval")
    values = sample_parameters(task, n, mode, seed, interval=interval)
    meta = {
        "task": task,
        "mode": mode,
        "n": n,
        "seed": seed,
        "version": __version__,
        "n_features": N_FEATURES,
    }
    try:
        if task == "s_class":
            eta_fixed = float(physics.get("eta", DEPHASING_ETA_DEFAULT))
            feats = _parallel_map(
                _dephasing_row, [(eta_fixed, s, omega_c) for s in values],
                workers)
            features = np.asarray(feats)
            targets = {
                "s": values,
                "class": np.array([label_s_class(s) for s in values]),
            }
            params = _dephasing_params(np.full(n, eta_fixed), values, omega_c)
            meta.update(_dephasing_meta(
                omega_c,
                intervals={"s": S_SEPARATED if mode == "separated"
                           else (interval or S_CONTINUOUS)},
                ohmic_band=OHMIC_CLASS_BAND))
        elif task == "eta":
            feats = _parallel_map(
                _dephasing_row, [(eta, 1.0, omega_c) for eta in values], workers)
            features = np.asarray(feats)
            targets = {"eta": values}
            params = _dephasing_params(values, np.ones(n), omega_c)
            meta.update(_dephasing_meta(
                omega_c,
                intervals={"eta": ETA_SEPARATED if mode == "separated"
                           else (interval or ETA_CONTINUOUS)}))
        else:
            gamma = float(physics.get("gamma", SPIN_BOSON_GAMMA))
            ref = reference_trajectory(gamma, omega_c)
            rows = _parallel_map(_heom_row,
                                 [(a, gamma, omega_c) for a in values], workers,
                                 initializer=_init_reference,
                                 initargs=(ref.states,))
            features = np.asarray([r[0] for r in rows])
            sigma = np.array([r[1] for r in rows])
            targets = {
                "alpha": values,
                "log_alpha": np.log10(values),
                "sigma_alpha": sigma,
            }
            params = {
                "gamma": np.full(n, gamma),
                "omega_c": np.full(n, omega_c),
                "omega0": np.ones(n),
                "delta": np.array([r[2] for r in rows]),
                "temperature_kT": np.array([r[3] for r in rows]),
                "t_max": np.array([r[4] for r in rows]),
                "depth_L": np.full(n, HIERARCHY_DEPTH, dtype=int),
                "n_matsubara_K": np.array([r[5] for r in rows], dtype=int),
            }
            meta.update({
                "intervals": {"alpha": list(interval or ALPHA_INTERVAL)},
                "physics": {"gamma": gamma,
                            "omega_c": omega_c, "omega0": 1.0,
                            "temperature_kT": "0.5*delta",
                            "initial": "excited"},
                "reference_alpha": REFERENCE_ALPHA,
                "t_max": "20/delta",
                "sigma_t_max": SIGMA_T_MAX,
                "alpha_resonance_half_width": ALPHA_RESONANCE_HALF_WIDTH,
                "hierarchy": {"depth_L": HIERARCHY_DEPTH,
                              "n_matsubara_K": "ceil(0.55*alpha) in [2, 6]"},
            })
    except Exception as exc:
        if isinstance(exc, GenerationError):
            raise
        raise GenerationError(f"row generation failed: {exc}") from exc

    if not np.all(np.isfinite(features)):
        bad = np.flatnonzero(~np.all(np.isfinite(features), axis=1))
        raise GenerationError(f"non-finite features in rows {bad[:10].tolist()}")
    return Dataset(task=task, mode=mode, features=features, targets=targets,
                   params=params, split=np.full(n, "", dtype=object), meta=meta)


def _dephasing_params(etas, ss, omega_c):
    n = len(etas)
    return {
        "eta": np.asarray(etas),
        "s": np.asarray(ss),
        "omega_c": np.full(n, omega_c),
        "omega0": np.ones(n),
        "temperature_kT": np.zeros(n),
        "t_max": np.full(n, DEPHASING_T_MAX),
    }


def _dephasing_meta(omega_c, intervals, **extra):
    meta = {
        "intervals": {k: list(map(list, v)) if isinstance(v[0], tuple) else list(v)
                      for k, v in intervals.items()},
        "physics": {"omega_c": omega_c, "omega0": 1.0,
                    "temperature_kT": 0.0, "initial": "plus"},
        "t_max": DEPHASING_T_MAX,
    }
    meta.update(extra)
    return meta


def split(dataset: Dataset, seed: int) -> Dataset:
    """Assign train/val/test rows (3/5, 1/5, 1/5), stratified by class for
    classification datasets.  Deterministic given the seed."""
    n = dataset.n_rows
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    rng = np.random.default_rng(seed)
    assignment = np.full(n, "", dtype=object)
    if "class" in dataset.targets:
        for cls in np.unique(dataset.targets["class"]):
            idx = np.flatnonzero(dataset.targets["class"] == cls)
            _assign(rng, idx, assignment)
    else:
        _assign(rng, np.arange(n), assignment)
    meta = dict(dataset.meta)
    meta["split_seed"] = seed
    return replace(dataset, split=assignment, meta=meta)


def _assign(rng, idx, assignment):
    idx = rng.permutation(idx)
    n = idx.size
    n_val = n // 5
    n_test = n // 5
    n_train = n - n_val - n_test
    assignment[idx[:n_train]] = "train"
    assignment[idx[n_train:n_train + n_val]] = "val"
    assignment[idx[n_train + n_val:]] = "test"


# ---------------------------------------------------------------------------
# persistence: features.csv + targets.csv + meta.json

def _format(x):
    if isinstance(x, (np.integer, int)):
        return str(int(x))
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    return str(x)


def save_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "features.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"t{i}" for i in range(N_FEATURES)])
        for row in dataset.features:
            writer.writerow([repr(float(x)) for x in row])
    columns = {"row_id": np.arange(dataset.n_rows)}
    columns.update(dataset.targets)
    columns["split"] = dataset.split
    for name, col in dataset.params.items():
        if name not in columns:
            columns[name] = col
    with open(path / "targets.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        names = list(columns)
        writer.writerow(names)
        for i in range(dataset.n_rows):
            writer.writerow([_format(columns[name][i]) for name in names])
    meta = dict(dataset.meta)
    meta["target_columns"] = list(dataset.targets)
    meta["param_columns"] = list(dataset.params)
    meta["hashes"] = {
        "features.csv": _file_hash(path / "features.csv"),
        "targets.csv": _file_hash(path / "targets.csv"),
    }
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _file_hash(p) -> str:
    h = hashlib.sha256()
    with open(p, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path / "meta.json") as fh:
        meta = json.load(fh)
    with open(path / "features.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [f"t{i}" for i in range(N_FEATURES)]:
            raise ValueError("unexpected features.csv header")
        features = np.array([[float(x) for x in row] for row in reader])
    with open(path / "targets.csv", newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        raw = {name: [] for name in names}
        for row in reader:
            for name, val in zip(names, row):
                raw[name].append(val)
    int_cols = {"row_id", "class", "depth_L", "n_matsubara_K"}
    table = {}
    for name, vals in raw.items():
        if name == "split":
            table[name] = np.array(vals, dtype=object)
        elif name in int_cols:
            table[name] = np.array([int(v) for v in vals])
        else:
            table[name] = np.array([float(v) for v in vals])
    targets = {name: table[name] for name in meta["target_columns"]}
    params = {name: table[name] for name in meta["param_columns"]}
    return Dataset(task=meta["task"], mode=meta["mode"], features=features,
                   targets=targets, params=params, split=table["split"],
                   meta=meta)


def verify_dataset(path) -> bool:
    """Recompute file hashes and compare with the ones recorded in meta."""
    path = Path(path)
    with open(path / "meta.json") as fh:
        meta = json.load(fh)
    recorded = meta.get("hashes", {})
    for name, digest in recorded.items():
        if _file_hash(path / name) != digest:
            return False
    return bool(recorded)
