import numpy as np
import pytest

from piranns.activation import sigma
from piranns.features import Coefficients, FeatureSet, axis_deriv, eval_ansatz, jump_on_face, local_ansatz
from piranns.mesh import Domain, Partition
from piranns.problems import Problem
from piranns.sampling import FeatureParams, SampleDomain, sample_uniform

from conftest import shared_features


def reference_square():
    return Partition.uniform(Domain.box((-1, -1), (1, 1)), (1, 1))


def single_feature():
    return FeatureSet("shared", FeatureParams(np.array([[1.0, 0.0]]), np.array([0.0])))


def test_basis_examples():
    part, fs = reference_square(), single_feature()
    assert fs.basis(part, 0, [0.0, 0.0])[0] == pytest.approx(0.9242343, abs=1e-6)
    assert abs(fs.basis(part, 0, [0.0, 0.0], (1, 0))[0]) < 1e-15
    x = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))
    assert np.all(fs.basis(part, 0, x, (0, 1)) == 0)


def test_basis_outside_element(grid22):
    fs = shared_features()
    with pytest.raises(ValueError):
        fs.basis(grid22, grid22.active[0], [[0.9, 0.9]])


def test_third_order_cap(grid22):
    fs = shared_features()
    with pytest.raises(ValueError):
        fs.basis(grid22, 0, [[0.1, 0.1]], (2, 2))


def test_zero_coefficients(grid22):
    fs = shared_features()
    c = Coefficients.zeros(grid22, fs.n_features)
    x = np.random.default_rng(2).uniform(0, 1, size=(10, 2))
    assert np.all(eval_ansatz(fs, grid22, c, x) == 0)


def test_single_element_unit_vector():
    part = Partition.uniform(Domain.unit_cube(2), (1, 1))
    fs = shared_features(n=7)
    w = np.zeros(7)
    w[0] = 1.0
    c = Coefficients({0: w})
    x = np.random.default_rng(3).uniform(0, 1, size=(5, 2))
    np.testing.assert_allclose(eval_ansatz(fs, part, c, x), fs.basis(part, 0, x)[:, 0], atol=1e-15)


def test_interface_average():
    part = Partition.uniform(Domain.unit_cube(2), (2, 1))
    fs = shared_features(n=9)
    rng = np.random.default_rng(4)
    c = Coefficients({j: rng.standard_normal(9) for j in part.active})
    x = np.array([[0.5, 0.3]])
    left = local_ansatz(fs, part, c, 0, x)
    right = local_ansatz(fs, part, c, 1, x)
    assert eval_ansatz(fs, part, c, x)[0] == pytest.approx(0.5 * (left[0] + right[0]), rel=1e-14)


def test_ansatz_outside_domain():
    part = Partition.uniform(Domain.lshape(), (4, 4))
    fs = shared_features()
    c = Coefficients.zeros(part, fs.n_features)
    with pytest.raises(ValueError):
        eval_ansatz(fs, part, c, [[0.5, -0.5]])


def _fd_check(fs, part, c, x, deriv, h):
    d = len(deriv)
    axis = [k for k in range(d) if deriv[k]][0]
    lower = list(deriv)
    lower[axis] -= 1
    e = np.zeros(d)
    e[axis] = h
    fd = (eval_ansatz(fs, part, c, x + e, tuple(lower)) - eval_ansatz(fs, part, c, x - e, tuple(lower))) / (2 * h)
    exact = eval_ansatz(fs, part, c, x, deriv)
    return np.max(np.abs(fd - exact)) / np.max(np.abs(exact))


@pytest.mark.parametrize("mode", ["shared", "independent"])
def test_derivatives_against_finite_differences(mode, rng):
    part = Partition.uniform(Domain.unit_cube(2), (2, 2)).refine({0})
    fs = FeatureSet(mode, domain=SampleDomain(2.0, 2), n=20, seed=5)
    c = Coefficients({j: rng.standard_normal(20) for j in part.active})
    for j in part.active[:3]:
        e = part.element(j)
        x = rng.uniform(np.array(e.lo) + 0.1 * e.width, np.array(e.hi) - 0.1 * e.width, size=(20, 2))
        for deriv in [(1, 0), (0, 1)]:
            assert _fd_check(fs, part, c, x, deriv, 1e-5) < 1e-6
        for deriv in [(2, 0), (0, 2), (1, 1)]:
            assert _fd_check(fs, part, c, x, deriv, 1e-4) < 1e-6


def test_affine_consistency(grid22, rng):
    fs = shared_features(n=12)
    j = grid22.active[3]
    a_eff, b_eff = grid22.affine(j).effective(fs.params_for(j).a, fs.params_for(j).b)
    x = rng.uniform(0.5, 1.0, size=(15, 2))
    np.testing.assert_allclose(fs.basis(grid22, j, x), sigma(x @ a_eff.T + b_eff), rtol=0, atol=1e-12)


def test_independent_equal_params_is_shared(grid22, rng):
    p = sample_uniform(SampleDomain(1.5, 2), 11, seed=9)
    shared = FeatureSet("shared", p)
    indep = FeatureSet("independent", {j: p for j in grid22.active})
    for j in grid22.active:
        e = grid22.element(j)
        x = rng.uniform(e.lo, e.hi, size=(6, 2))
        assert np.array_equal(shared.basis(grid22, j, x, (1, 1)), indep.basis(grid22, j, x, (1, 1)))


def test_independent_mode_draws_per_element(grid22):
    fs = FeatureSet("independent", domain=SampleDomain(2.0, 2), n=5, seed=1)
    a = [fs.params_for(j).a for j in grid22.active]
    assert not np.array_equal(a[0], a[1])
    assert fs.params_for(3).same_as(fs.params_for(3))
    with pytest.raises(ValueError):
        FeatureSet("independent", {0: sample_uniform(SampleDomain(1, 2), 3), 1: sample_uniform(SampleDomain(1, 2), 4)})


def test_coefficient_round_trip(grid22, rng):
    for is_complex in (False, True):
        size = 2 * 4 * 6 if is_complex else 4 * 6
        v = rng.standard_normal(size)
        c = Coefficients.from_vector(grid22, 6, v, is_complex)
        assert c.keys_match(grid22)
        np.testing.assert_array_equal(c.to_vector(grid22), v)
    with pytest.raises(ValueError):
        Coefficients.from_vector(grid22, 6, np.zeros(5))


def test_jump_is_left_minus_right():
    part = Partition.uniform(Domain.unit_cube(2), (2, 1))
    p = FeatureParams(np.array([[0.3, 0.2]]), np.array([0.1]))
    fs = FeatureSet("independent", {0: p, 1: p})
    x = np.array([[0.5, y] for y in np.linspace(0.05, 0.95, 7)])
    c = Coefficients({0: np.array([1.0]), 1: np.array([1.0])})
    face = part.interior_faces()[0]
    left = local_ansatz(fs, part, c, 0, x)
    right = local_ansatz(fs, part, c, 1, x)
    np.testing.assert_allclose(jump_on_face(fs, part, c, face, x), left - right, atol=1e-15)


def test_same_physical_feature_has_no_jump():
    # per-element parameters chosen so that every local feature is sigma(a . x + b) in physical coordinates
    part = Partition.uniform(Domain.unit_cube(2), (2, 1))
    a, b = np.array([[0.7, -0.4]]), np.array([0.2])
    params = {}
    for j in part.active:
        aff = part.affine(j)
        a_ref = a / aff.scale
        params[j] = FeatureParams(a_ref, b - a_ref @ aff.offset)
    fs = FeatureSet("independent", params)
    c = Coefficients({0: np.array([1.0]), 1: np.array([1.0])})
    face = part.interior_faces()[0]
    x = np.array([[0.5, y] for y in np.linspace(0.05, 0.95, 7)])
    assert np.max(np.abs(jump_on_face(fs, part, c, face, x))) < 1e-12
    assert np.max(np.abs(jump_on_face(fs, part, c, face, x, (0, 1)))) < 1e-12


def test_boundary_jump_against_data():
    part = Partition.uniform(Domain.unit_cube(2), (1, 1))
    fs = shared_features(n=4)
    c = Coefficients.zeros(part, 4)
    pb = Problem("lin", "poisson", part.domain, f=None, g=lambda x, face: np.atleast_2d(x)[:, 0],
                     g_grad=lambda x, face: np.tile([1.0, 0.0], (np.atleast_2d(x).shape[0], 1)))
    bottom = [f for f in part.boundary_faces() if f.normal_axis == 1 and f.side == -1][0]
    assert jump_on_face(fs, part, c, bottom, [[0.3, 0.0]], problem=pb)[0] == pytest.approx(-0.3)
    assert jump_on_face(fs, part, c, bottom, [[0.3, 0.0]], (1, 0), problem=pb)[0] == pytest.approx(-1.0)


def test_jump_left_one_right_zero():
    part = Partition.uniform(Domain.unit_cube(2), (2, 1))
    # sigma(0 * x + b) is constant; scale the coefficient so the left side is exactly 1
    p = FeatureParams(np.zeros((1, 2)), np.array([0.0]))
    fs = FeatureSet("shared", p)
    c = Coefficients({0: np.array([1.0 / sigma(0.0)]), 1: np.array([0.0])})
    face = part.interior_faces()[0]
    assert jump_on_face(fs, part, c, face, [[0.5, 0.4]])[0] == pytest.approx(1.0, rel=1e-14)


def test_normal_derivative_jump_rejected(grid22):
    fs = shared_features()
    c = Coefficients.zeros(grid22, fs.n_features)
    face = grid22.interior_faces()[0]
    normal = axis_deriv(2, face.normal_axis)
    x = face.center[None, :]
    with pytest.raises(ValueError):
        jump_on_face(fs, grid22, c, face, x, normal)
    assert jump_on_face(fs, grid22, c, face, x, normal, normal_ok=True)[0] == 0.0
