import numpy as np
import pytest

from noisespec.ml import svr


@pytest.fixture
def rng():
    return np.random.default_rng(77)


def test_constant_target_no_support_vectors(rng):
    X = rng.normal(size=(30, 5))
    model = svr.fit_svr(X, np.full(30, 2.5),
                        svr.SvrConfig(kernel="linear", epsilon=0.1))
    assert model.coef.size == 0
    np.testing.assert_allclose(svr.predict_svr(model, X), 2.5)


def test_linear_recovery_matches_least_squares(rng):
    # y = 2*x0 + 1 exactly; tight tube and large C recover the slope
    X = rng.normal(size=(80, 4))
    y = 2.0 * X[:, 0] + 1.0
    model = svr.fit_svr(X, y, svr.SvrConfig(kernel="linear", C=1e3,
                                            epsilon=1e-3, max_passes=3000))
    w_raw = (model.support_vectors.T @ model.coef) / model.scaler.std
    coef_ols = np.linalg.lstsq(np.c_[X, np.ones(80)], y, rcond=None)[0]
    assert abs(w_raw[0] - 2.0) < 1e-2
    assert abs(w_raw[0] - coef_ols[0]) < 1e-2
    assert np.max(np.abs(svr.predict_svr(model, X) - y)) < 0.01


def test_dual_objective_non_increasing(rng):
    X = rng.normal(size=(120, 10))
    y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=120)
    model = svr.fit_svr(X, y, svr.SvrConfig(kernel="rbf"))
    assert np.all(np.diff(model.objective_curve) <= 1e-12)


def test_kernel_symmetry(rng):
    for kernel in ("linear", "rbf", "poly"):
        cfg = svr.SvrConfig(kernel=kernel)
        for _ in range(100):
            a = rng.normal(size=20)
            b = rng.normal(size=20)
            assert svr.kernel_value(cfg, 0.05, a, b) == svr.kernel_value(
                cfg, 0.05, b, a)


def test_rbf_kernel_range(rng):
    cfg = svr.SvrConfig(kernel="rbf")
    a = rng.normal(size=15)
    assert svr.kernel_value(cfg, 0.1, a, a) == 1.0
    for _ in range(50):
        b = rng.normal(size=15)
        v = svr.kernel_value(cfg, 0.1, a, b)
        assert 0.0 < v <= 1.0
        if not np.array_equal(a, b):
            assert v < 1.0


def test_inside_tube_points_have_zero_coefficient(rng):
    X = rng.normal(size=(150, 8))
    y = X[:, 0] ** 2 * 0.1 + 0.3 * X[:, 1]
    cfg = svr.SvrConfig(kernel="rbf", epsilon=0.05)
    model = svr.fit_svr(X, y, cfg)
    pred = svr.predict_svr(model, X)
    resid = np.abs(pred - y)
    Xs = model.scaler.transform(X)
    sv_rows = {tuple(np.round(r, 12)) for r in model.support_vectors}
    for i in range(150):
        if resid[i] < cfg.epsilon - cfg.tol:
            assert tuple(np.round(Xs[i], 12)) not in sv_rows


def test_single_support_vector_is_affine_in_kernel(rng):
    X = rng.normal(size=(10, 4))
    model = svr.fit_svr(X, rng.normal(size=10), svr.SvrConfig(kernel="linear"))
    if model.coef.size:  # reduce to one SV manually
        model.support_vectors = model.support_vectors[:1]
        model.coef = model.coef[:1]
    z = rng.normal(size=(6, 4))
    got = svr.predict_svr(model, z)
    zs = model.scaler.transform(z)
    want = (zs @ model.support_vectors[0]) * model.coef[0] + model.bias \
        if model.coef.size else np.full(6, model.bias)
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_non_convergence_flag(rng):
    X = rng.normal(size=(100, 5))
    y = rng.normal(size=100)
    with pytest.warns(RuntimeWarning, match="max_passes"):
        model = svr.fit_svr(X, y, svr.SvrConfig(kernel="rbf", max_passes=1,
                                                tol=1e-10, epsilon=0.0))
    assert not model.converged


def test_coefficients_within_box(rng):
    X = rng.normal(size=(100, 6))
    y = np.sin(2 * X[:, 0])
    model = svr.fit_svr(X, y, svr.SvrConfig(kernel="rbf", C=0.3))
    assert np.all(np.abs(model.coef) <= 0.3 + 1e-12)


def test_width_mismatch(rng):
    model = svr.fit_svr(rng.normal(size=(20, 6)), rng.normal(size=20),
                        svr.SvrConfig(kernel="linear"))
    with pytest.raises(ValueError, match="features"):
        svr.predict_svr(model, rng.normal(size=(3, 5)))


def test_json_round_trip(rng):
    X = rng.normal(size=(40, 6))
    y = np.cos(X[:, 1])
    model = svr.fit_svr(X, y, svr.SvrConfig(kernel="poly"))
    back = svr.svr_from_json(svr.svr_to_json(model))
    np.testing.assert_array_equal(svr.predict_svr(back, X),
                                  svr.predict_svr(model, X))


def test_config_validation():
    with pytest.raises(ValueError):
        svr.SvrConfig(kernel="sigmoid")
    with pytest.raises(ValueError):
        svr.SvrConfig(C=0.0)
    with pytest.raises(ValueError):
        svr.SvrConfig(epsilon=-0.1)
    with pytest.raises(ValueError):
        svr.SvrConfig(gamma_k=0.0)


def test_pair_line_minimizer_matches_dense_scan(rng):
    # the pair subproblem is convex piecewise quadratic in the transfer d;
    # the closed-form segment walk must match a dense scan of the objective
    from noisespec.ml.svr import _line_minimize
    for _ in range(500):
        C = rng.uniform(0.5, 2.0)
        bi, bj = rng.uniform(-C, C, size=2)
        g0i, g0j = rng.normal(size=2)
        eta = abs(rng.normal()) * rng.choice([0, 1, 1, 1])
        eps = rng.uniform(0, 0.5)
        d_max = min(C - bi, bj + C)
        if d_max <= 0:
            continue
        d = _line_minimize(bi, bj, g0i, g0j, eta, eps, d_max)
        assert 0.0 <= d <= d_max + 1e-12

        def phi(x):
            return (0.5 * eta * x ** 2 + (g0i - g0j) * x
                    + eps * (np.abs(bi + x) + np.abs(bj - x)))

        grid = np.linspace(0.0, d_max, 4001)
        assert phi(d) <= phi(grid).min() + 1e-7


def test_deterministic(rng):
    X = rng.normal(size=(90, 7))
    y = np.tanh(X[:, 2])
    cfg = svr.SvrConfig(kernel="rbf")
    p1 = svr.predict_svr(svr.fit_svr(X, y, cfg), X)
    p2 = svr.predict_svr(svr.fit_svr(X, y, cfg), X)
    np.testing.assert_array_equal(p1, p2)
