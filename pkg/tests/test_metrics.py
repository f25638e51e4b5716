import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsdcm._kernels import linear_recursion
from rsdcm.errors import InstabilityError, ShapeError
from rsdcm.harness.config import REFERENCE_A
from rsdcm.metrics import (
    UndefinedCorrelationError, empirical_fc, model_fc, pearson, rho_ec, rho_fc, rmse_ec,
    sparsity_err,
)
from rsdcm.ssm import assemble

from .conftest import random_hurwitz

A_REF = np.array(REFERENCE_A)


def test_pearson_examples(rng):
    u = rng.standard_normal(20)
    assert pearson(u, u) == pytest.approx(1.0)
    assert pearson(u, -u) == pytest.approx(-1.0)
    assert pearson([1, 0, -1], [0, 1, 0]) == 0.0


def test_pearson_constant_raises():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_shape_errors():
    with pytest.raises(ShapeError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ShapeError):
        pearson([1], [1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_pearson_affine_sign(seed, a, c, b, d):
    if abs(a) < 1e-2 or abs(c) < 1e-2:
        return
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 12))
    assert pearson(a * u + b, c * v + d) == pytest.approx(np.sign(a * c) * pearson(u, v), abs=1e-9)


def test_rmse_examples():
    assert rmse_ec(A_REF, A_REF) == 0.0
    off = 1 - np.eye(7)
    assert rmse_ec(A_REF, A_REF + off) == pytest.approx(1.0)
    assert rmse_ec(A_REF, A_REF + np.diag(np.arange(7.0))) == 0.0


def test_rmse_shape_mismatch():
    with pytest.raises(ShapeError):
        rmse_ec(np.eye(2), np.eye(3))
    with pytest.raises(ShapeError):
        rmse_ec(np.eye(1), np.eye(1))


def test_sparsity_examples():
    assert sparsity_err(A_REF, A_REF) == 0
    # the reference matrix has 14 non-zero off-diagonal couplings
    assert sparsity_err(A_REF, np.zeros((7, 7))) == 14
    assert sparsity_err(A_REF, np.ones((7, 7))) == 28


def test_sparsity_tolerance_and_pruned():
    A = np.array([[-1.0, 0.5], [0.0, -1.0]])
    assert sparsity_err(A, np.array([[-1.0, 5e-4], [0.0, -1.0]])) == 1
    assert sparsity_err(A, np.array([[-1.0, 0.5], [2e-3, -1.0]])) == 1
    assert sparsity_err(A, np.array([[-1.0, 0.5], [2e-3, -1.0]]), pruned=[0, 0, 1, 0]) == 0


def test_metrics_ignore_diagonal(rng):
    B = rng.standard_normal((7, 7))
    D = np.diag(rng.standard_normal(7))
    assert rmse_ec(A_REF, B) == pytest.approx(rmse_ec(A_REF, B + D))
    assert sparsity_err(A_REF, B) == sparsity_err(A_REF, B + D)


def test_empirical_fc_examples(rng):
    Y = rng.standard_normal((50, 3))
    Y[:, 2] = Y[:, 0]
    F = empirical_fc(Y)
    assert F[0, 2] == pytest.approx(1.0)
    np.testing.assert_array_equal(np.diag(F), 1.0)
    np.testing.assert_allclose(F, F.T)


def test_empirical_fc_independent_columns():
    F = empirical_fc(np.random.default_rng(2).standard_normal((10_000, 4)))
    off = F[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 0.05)


def test_empirical_fc_constant_column_named():
    Y = np.random.default_rng(0).standard_normal((20, 3))
    Y[:, 1] = 0.5
    with pytest.raises(UndefinedCorrelationError, match="region 1"):
        empirical_fc(Y)


def test_model_fc_decoupled():
    ssm = assemble(np.diag([-0.5, -1.0, -0.3]), _white(), np.ones((3, 1)), 2.0, 0.1)
    F = model_fc(ssm)
    np.testing.assert_allclose(F, np.eye(3), atol=1e-14)


def _white():
    from rsdcm.dynamics import White

    return White(1.0)


def test_model_fc_noise_dominance(rng):
    A = random_hurwitz(rng, 3)
    small = model_fc(assemble(A, _white(), np.ones((3, 2)), 2.0, 1e-3))
    large = model_fc(assemble(A, _white(), np.ones((3, 2)), 2.0, 1e9))
    assert np.max(np.abs(large - np.eye(3))) < 1e-6
    assert np.max(np.abs(small - np.eye(3))) > 1e-3


def test_model_fc_unstable_raises():
    with pytest.raises(InstabilityError):
        model_fc(assemble(np.array([[0.5]]), _white(), np.ones((1, 1)), 2.0, 0.1))


@pytest.mark.slow
def test_model_fc_matches_long_simulation():
    rng = np.random.default_rng(4)
    A = np.array([[-0.6, 0.0, 0.3], [0.4, -0.8, 0.0], [0.0, 0.5, -0.7]])
    h = np.array([0.0, 1.0, 0.5, 0.2])
    from rsdcm.dynamics import AR

    ssm = assemble(A, AR(-0.4, 1.0), h, 2.0, 0.2)
    K = 1_000_000
    w, V = np.linalg.eigh(ssm.Q)
    L = V * np.sqrt(np.clip(w, 0, None))
    x = np.zeros(ssm.d)
    Y = np.empty((K, 3))
    chunk = 100_000
    for start in range(0, K, chunk):
        u = rng.standard_normal((chunk, ssm.d)) @ L.T
        X, x = linear_recursion(ssm.F, u, x, 1)
        Y[start:start + chunk] = X @ ssm.C.T + np.sqrt(ssm.eps) * rng.standard_normal((chunk, 3))
    assert np.max(np.abs(empirical_fc(Y) - model_fc(ssm))) < 0.02


def test_rho_ec_examples(rng):
    assert rho_ec(A_REF, A_REF) == pytest.approx(1.0)
    B = 2.5 * A_REF + 0.3
    np.fill_diagonal(B, rng.standard_normal(7))
    assert rho_ec(A_REF, B) == pytest.approx(1.0)


def test_rho_ec_constant_raises():
    with pytest.raises(UndefinedCorrelationError):
        rho_ec(A_REF, -np.eye(7))


def test_rho_fc_null_distribution():
    vals = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        F1 = model_fc(assemble(random_hurwitz(rng, 7), _white(), np.ones((7, 1)), 2.0, 0.1))
        F2 = model_fc(assemble(random_hurwitz(rng, 7), _white(), np.ones((7, 1)), 2.0, 0.1))
        vals.append(rho_fc(F1, F2))
    assert abs(np.median(vals)) < 0.3


def test_rho_shape_mismatch():
    with pytest.raises(ShapeError):
        rho_fc(np.eye(3), np.eye(4))
