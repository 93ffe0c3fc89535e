import numpy as np
import pytest

import kkl_observer as kkl


def test_equilibrium_matches_quadratic_root():
    f, q = 1.0, 2.4e-4
    b = f + q - 1.0
    x1 = 0.5 * (-b + np.sqrt(b * b + 4.0 * q * (1.0 + f)))
    x = kkl.oregonator_equilibrium()
    np.testing.assert_allclose(x, [x1, f * x1 / (q + x1), x1], rtol=1e-12)
    assert np.linalg.norm(kkl.oregonator_rhs(x)) <= 1e-9


def test_simulate_shapes_and_positivity():
    t, x = kkl.simulate([0.5, 0.5, 0.5], horizon=5.0, dt=0.075)
    assert x.shape == (t.size, 3)
    assert t[1] == pytest.approx(0.075)
    assert (x > 0).all()


def test_sym_eig_against_numpy():
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, (6, 6))
    s = a + a.T
    values, vectors = kkl.sym_eig(s)
    np.testing.assert_allclose(values, np.linalg.eigvalsh(s)[::-1], atol=1e-10)
    np.testing.assert_allclose(s @ vectors, vectors * values, atol=1e-10)


def test_lift_homogeneous_decay():
    obs = kkl.make_observer(1, 2, 1.0, 50.0, seed=4)
    t = 0.075 * np.arange(40)
    z = kkl.lift(t, np.zeros((40, 2)), obs, z0=np.ones(obs.order))
    np.testing.assert_allclose(z, np.exp(-np.outer(t, obs.rates)), rtol=1e-12)
    assert obs.input.shape == (obs.order, 2)


def test_sylvester_against_kronecker_solve():
    f = np.array([[-0.2, 1.0], [-1.0, -0.2]])
    h = np.array([[1.0, 0.5]])
    a = np.diag([-2.0, -3.0, -4.0])
    b = np.array([[1.0], [-1.0], [0.5]])
    t, residual = kkl.solve_sylvester(f, h, a, b)
    # vec(TF - AT) = (F^T kron I - I kron A) vec(T), column-major vec
    op = np.kron(f.T, np.eye(3)) - np.kron(np.eye(2), a)
    expected = np.linalg.solve(op, (b @ h).flatten(order="F")).reshape((3, 2), order="F")
    np.testing.assert_allclose(t, expected, atol=1e-12)
    assert residual <= 1e-12


def test_pca_against_numpy_covariance():
    rng = np.random.default_rng(7)
    z = rng.uniform(-2, 5, (40, 8))
    model = kkl.fit_pca(z, 3)
    w = (z - z.mean(axis=0)) / z.std(axis=0, ddof=1)
    np.testing.assert_allclose(model.eigenvalues, np.linalg.eigvalsh(np.cov(w, rowvar=False))[::-1][:3], atol=1e-10)
    pcs = model.project(z)
    np.testing.assert_allclose(pcs.mean(axis=0), 0.0, atol=1e-10)


def test_alignment_recovers_affine_map():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(100, 3))
    pi = 0.5 * x - 1.0
    fit = kkl.align_affine(pi, x)
    np.testing.assert_allclose(fit["weights"], 2.0 * np.eye(3), atol=1e-10)
    np.testing.assert_allclose(fit["r2"], 1.0, atol=1e-12)


def test_period_and_recurrence():
    t = 0.05 * np.arange(800)
    y = np.sin(2 * np.pi * t / 7.3)
    period, peak, valid = kkl.estimate_period(y, 0.05)
    assert valid and abs(period - 7.3) / 7.3 <= 0.01
    states = np.column_stack([np.cos(t), np.sin(t)])
    assert kkl.recurrence_error(t, states, 2 * np.pi) <= 1e-3


def test_ppm_round_trip():
    rgb = np.arange(4 * 3 * 3, dtype=np.uint8).reshape(3, 4, 3)
    data = kkl.encode_ppm(rgb)
    assert data.startswith(b"P6\n4 3\n255\n")
    back = kkl.decode_ppm(data)
    np.testing.assert_array_equal(back, rgb)
    assert kkl.encode_ppm(back) == data
    with pytest.raises(kkl.ParseError):
        kkl.decode_ppm(data[:-1], "cut.ppm")


def test_pipeline_in_memory_and_on_disk(tmp_path):
    cfg = {"system": {"horizon": 20.0}, "output": {"dim": 8}, "diagnostics": {"plots": False}}
    a = kkl.run_pipeline(cfg)
    b = kkl.run_pipeline(cfg, tmp_path / "run")
    np.testing.assert_array_equal(a["components"], b["components"])
    assert a["components"].shape[1] == 3
    assert (tmp_path / "run" / "report.json").exists()
    assert a["report"]["alignment"]["samples"] > 0
    assert kkl.default_config()["sampling_interval"] == 0.075


def test_errors_map_to_python_types():
    with pytest.raises(kkl.ValidationError):
        kkl.run_pipeline({"unknown": 1})
    with pytest.raises(ValueError):
        kkl.make_observer(2, 2, 5.0, 1.0)
    with pytest.raises(kkl.DegenerateDataError):
        kkl.align_affine(np.ones((20, 1)), np.arange(20.0))
