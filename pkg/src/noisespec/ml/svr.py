"""Epsilon-insensitive support vector regression by pairwise dual ascent.

The dual is solved in the net-coefficient form beta_i = alpha_i - alpha_i*:

    minimize  0.5 * beta^T K beta - y^T beta + epsilon * ||beta||_1
    s.t.      sum(beta) = 0,   -C <= beta_i <= C

with SMO-style updates of the maximal-violating pair: each step picks the
feasible pair with the largest KKT gap and minimizes the (convex, piecewise
quadratic) objective exactly along the line beta_i += d, beta_j -= d.  The
dual objective therefore decreases monotonically; it is recorded once per
pass.  Features are standardized internally and the scaler is stored with
the model.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

KERNELS = ("linear", "rbf", "poly")


@dataclass(frozen=True)
class SvrConfig:
    kernel: str = "rbf"
    C: float = 1.0
    epsilon: float = 0.01
    gamma_k: Optional[float] = None   # rbf/poly scale; None: 1/(p * mean var)
    degree: int = 3                   # poly only
    coef0: float = 1.0                # poly only
    tol: float = 1e-3
    max_passes: int = 200             # each pass is up to N pair updates

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.gamma_k is not None and self.gamma_k <= 0:
            raise ValueError("gamma_k must be > 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        return (X - self.mean) / self.std


@dataclass
class SvrModel:
    config: SvrConfig
    n_features: int
    gamma_k: float
    scaler: Scaler
    support_vectors: np.ndarray   # scaled rows with nonzero coefficient
    coef: np.ndarray              # beta at the support vectors
    bias: float
    converged: bool
    objective_curve: List[float]


def _kernel_matrix(cfg: SvrConfig, gamma_k: float, A: np.ndarray,
                   B: np.ndarray) -> np.ndarray:
    if cfg.kernel == "linear":
        return A @ B.T
    if cfg.kernel == "poly":
        return (gamma_k * (A @ B.T) + cfg.coef0) ** cfg.degree
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    return np.exp(-gamma_k * np.maximum(sq, 0.0))


def _dual_objective(K, beta, y, eps):
    return float(0.5 * beta @ (K @ beta) - y @ beta + eps * np.sum(np.abs(beta)))


def _line_minimize(beta_i, beta_j, g0_i, g0_j, eta, eps, d_max):
    """Exact minimizer of the pair subproblem along beta_i += d, beta_j -= d.

    The objective is convex piecewise quadratic in d with kinks where
    beta_i + d or beta_j - d crosses zero; walk the segments in order and
    stop where the one-sided slope turns non-negative.
    """
    kinks = sorted({k for k in (-beta_i, beta_j) if 0.0 < k < d_max})
    bounds = [0.0] + kinks + [d_max]
    for a, b in zip(bounds[:-1], bounds[1:]):
        mid = 0.5 * (a + b)
        s_i = 1.0 if beta_i + mid >= 0 else -1.0
        s_j = 1.0 if beta_j - mid >= 0 else -1.0
        const = g0_i - g0_j + eps * (s_i - s_j)
        slope_a = const + eta * a
        if slope_a >= 0.0:
            return a
        if eta > 0.0:
            d_unc = -const / eta
            if d_unc < b:
                return max(a, d_unc)
    return d_max


def fit_svr(X, y, config: SvrConfig = SvrConfig()) -> SvrModel:
    """Solve the epsilon-insensitive dual to KKT gap <= tol.

    If the gap is still above tol after ``max_passes`` passes the model is
    returned with ``converged = False`` and a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("X must be 2-D with at least 2 rows")
    if y.shape != (X.shape[0],):
        raise ValueError("y must be 1-D and match X rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    n, p = X.shape
    scaler = Scaler(mean=X.mean(axis=0), std=np.maximum(X.std(axis=0), 1e-12))
    Xs = scaler.transform(X)
    if config.gamma_k is not None:
        gamma_k = config.gamma_k
    else:
        mean_var = float(np.mean(Xs.var(axis=0)))
        gamma_k = 1.0 / (p * mean_var) if mean_var > 0 else 1.0 / p

    K = _kernel_matrix(config, gamma_k, Xs, Xs)
    diag = np.diag(K).copy()
    beta = np.zeros(n)
    F = np.zeros(n)          # K @ beta
    eps, C, tol = config.epsilon, config.C, config.tol

    objective_curve = [_dual_objective(K, beta, y, eps)]
    converged = False
    for _ in range(config.max_passes):
        for _ in range(n):
            g0 = F - y
            g_up = g0 + np.where(beta >= 0.0, eps, -eps)
            g_down = g0 + np.where(beta > 0.0, eps, -eps)
            g_up_sel = np.where(beta < C, g_up, np.inf)
            g_down_sel = np.where(beta > -C, g_down, -np.inf)
            i = int(np.argmin(g_up_sel))
            j = int(np.argmax(g_down_sel))
            gap = g_down_sel[j] - g_up_sel[i]
            if gap <= tol:
                converged = True
                break
            d_max = min(C - beta[i], beta[j] + C)
            eta = diag[i] + diag[j] - 2.0 * K[i, j]
            d = _line_minimize(beta[i], beta[j], g0[i], g0[j],
                               max(eta, 0.0), eps, d_max)
            if d <= 0.0:
                converged = True  # numerically stuck at the optimum
                break
            beta[i] += d
            beta[j] -= d
            F += d * (K[:, i] - K[:, j])
        objective_curve.append(_dual_objective(K, beta, y, eps))
        if converged:
            break
    if not converged:
        warnings.warn(
            f"SMO reached max_passes = {config.max_passes} with KKT gap "
            f"above tol = {config.tol}", RuntimeWarning, stacklevel=2)

    g0 = F - y
    g_up = np.where(beta < C, g0 + np.where(beta >= 0.0, eps, -eps), np.inf)
    g_down = np.where(beta > -C, g0 + np.where(beta > 0.0, eps, -eps), -np.inf)
    bias = -0.5 * (float(np.min(g_up)) + float(np.max(g_down)))

    sv = np.abs(beta) > 0.0
    return SvrModel(config=config, n_features=p, gamma_k=gamma_k,
                    scaler=scaler, support_vectors=Xs[sv].copy(),
                    coef=beta[sv].copy(), bias=bias, converged=converged,
                    objective_curve=objective_curve)


def predict_svr(model: SvrModel, X) -> np.ndarray:
    """f(x) = sum_i coef_i * k(sv_i, x) + bias on standardized features."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape}")
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    Xs = model.scaler.transform(X)
    K = _kernel_matrix(model.config, model.gamma_k, Xs, model.support_vectors)
    return K @ model.coef + model.bias


def kernel_value(cfg: SvrConfig, gamma_k: float, a, b) -> float:
    """k(a, b) for one pair of (already scaled) vectors."""
    return float(_kernel_matrix(cfg, gamma_k, np.atleast_2d(a),
                                np.atleast_2d(b))[0, 0])


def svr_to_json(model: SvrModel) -> str:
    doc = {
        "kind": "svr",
        "config": {
            "kernel": model.config.kernel, "C": model.config.C,
            "epsilon": model.config.epsilon, "gamma_k": model.config.gamma_k,
            "degree": model.config.degree, "coef0": model.config.coef0,
            "tol": model.config.tol, "max_passes": model.config.max_passes,
        },
        "n_features": model.n_features,
        "gamma_k": model.gamma_k,
        "scaler_mean": model.scaler.mean.tolist(),
        "scaler_std": model.scaler.std.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "coef": model.coef.tolist(),
        "bias": model.bias,
        "converged": model.converged,
        "objective_curve": model.objective_curve,
    }
    return json.dumps(doc)


def svr_from_json(text: str) -> SvrModel:
    doc = json.loads(text)
    if doc.get("kind") != "svr":
        raise ValueError("not an SVR model file")
    return SvrModel(
        config=SvrConfig(**doc["config"]),
        n_features=doc["n_features"], gamma_k=doc["gamma_k"],
        scaler=Scaler(mean=np.array(doc["scaler_mean"]),
                      std=np.array(doc["scaler_std"])),
        support_vectors=np.array(doc["support_vectors"]).reshape(
            -1, doc["n_features"]),
        coef=np.array(doc["coef"]), bias=doc["bias"],
        converged=doc["converged"], objective_curve=doc["objective_curve"])
