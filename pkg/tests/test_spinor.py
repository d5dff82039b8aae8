import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from crdi._backend import jnp
from crdi.clifford import GAMMA, GAMMA5, GAMMA_UP, IDENTITY, PSEUDOSCALAR, rotation_exp, tilde
from crdi.errors import SingularSpinor
from crdi.spinor import (
    MatrixSpinor,
    assemble,
    baylis,
    baylis_blocks,
    bilinears,
    column_from_octet,
    conjugate_block,
    octet_from_column,
    polar,
    rho_beta_from_components,
    singularity_measure,
    to_matrix,
)

from .conftest import hydrogen_x

octets = st.lists(st.floats(-3, 3, allow_nan=False), min_size=8, max_size=8)


def _column(seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=4) + 1j * rng.normal(size=4)


@given(octets)
def test_octet_round_trip(vals):
    r, s = np.array(vals[:4]), np.array(vals[4:])
    psi = np.asarray(column_from_octet(r, s))
    r2, s2 = octet_from_column(psi)
    assert np.allclose(r, r2) and np.allclose(s, s2)


def test_unit_column_gives_identity():
    assert np.allclose(to_matrix(np.array([1, 0, 0, 0])).m, IDENTITY)


@given(st.integers(0, 2**32 - 1))
def test_matrix_columns_follow_discrete_transforms(seed):
    psi = _column(seed)
    m = to_matrix(psi).m
    conj_col = 1j * GAMMA_UP[2] @ np.conj(psi)
    assert np.allclose(m[:, 0], psi)
    assert np.allclose(m[:, 1], GAMMA5 @ conj_col)
    assert np.allclose(m[:, 2], GAMMA5 @ psi)
    assert np.allclose(m[:, 3], conj_col)


def test_to_matrix_rejects_wrong_shape():
    with pytest.raises(ValueError):
        to_matrix(np.ones(3))


def test_polar_of_scaled_identity():
    rho, beta, rotor = polar(2 * IDENTITY)
    assert rho == pytest.approx(4.0) and beta == pytest.approx(0.0)
    assert np.allclose(rotor, IDENTITY)


def test_polar_round_trip():
    rotor = np.asarray(rotation_exp(0.8, GAMMA[2] @ GAMMA[1]))
    m = np.asarray(assemble(1.0, math.pi / 3, jnp.asarray(rotor)))
    rho, beta, rot = polar(m)
    assert rho == pytest.approx(1.0, abs=1e-12)
    assert beta == pytest.approx(math.pi / 3, abs=1e-12)
    assert np.abs(rot - rotor).max() < 1e-12


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_polar_invariants(seed):
    m = to_matrix(_column(seed)).m
    rho, beta, rotor = polar(m)
    assert rho > 0
    assert np.abs(m @ tilde(m) - rho * (math.cos(beta) * IDENTITY + math.sin(beta) * PSEUDOSCALAR)).max() < 1e-12 * rho
    assert np.abs(rotor @ tilde(rotor) - IDENTITY).max() < 1e-12
    assert np.abs(np.asarray(assemble(rho, beta, jnp.asarray(rotor))) - m).max() < 1e-12 * math.sqrt(rho) * 4


def test_singular_spinor_detected():
    # psi with psi_1 = psi_3 = 1: both invariants vanish
    psi = np.array([1, 0, 1, 0], dtype=complex)
    assert float(singularity_measure(to_matrix(psi).m)) < 1e-12
    with pytest.raises(SingularSpinor):
        polar(to_matrix(psi).m)
    r, s = octet_from_column(psi)
    with pytest.raises(SingularSpinor):
        rho_beta_from_components(r, s)


def test_component_angle_branches():
    assert rho_beta_from_components([1, 0, 0, 0], [0, 0, 0, 0])[1] == 0.0
    assert rho_beta_from_components([0, 0, 0, 0], [0, 0, 0, 1])[1] == pytest.approx(math.pi)


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_component_formula_matches_polar(seed):
    psi = _column(seed)
    m = to_matrix(psi).m
    assume(float(singularity_measure(m)) > 1e-6)
    rho, beta, _ = polar(m)
    rho2, beta2 = rho_beta_from_components(*octet_from_column(psi))
    assert rho2 == pytest.approx(rho, rel=1e-10)
    assert abs(beta2) == pytest.approx(abs(beta), abs=1e-10)


def test_bilinears_of_identity():
    b = bilinears(IDENTITY)
    assert np.allclose(b.v, [1, 0, 0, 0]) and np.allclose(b.s, [0, 0, 0, 1])
    assert b.rho == pytest.approx(1.0) and b.beta == pytest.approx(0.0)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_bilinear_normalization(seed):
    m = to_matrix(_column(seed))
    assume(float(singularity_measure(m.m)) > 1e-8)
    b = bilinears(m)
    eta = np.diag([1, -1, -1, -1])
    assert abs(b.v @ eta @ b.v - 1) < 1e-10
    assert abs(b.s @ eta @ b.s + 1) < 1e-10
    assert abs(b.v @ eta @ b.s) < 1e-10
    assert np.allclose(b.e1, m.m @ GAMMA[1] @ tilde(m.m) / b.rho)


def test_bilinears_accept_column_and_matrix_spinor():
    psi = _column(5)
    a, b = bilinears(psi), bilinears(MatrixSpinor(to_matrix(psi).m))
    assert np.allclose(a.v, b.v) and np.allclose(a.s, b.s)


def test_baylis_identity():
    assert np.allclose(baylis(IDENTITY), IDENTITY)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_baylis_block_structure(seed):
    m = to_matrix(_column(seed))
    upper, lower, off = baylis_blocks(baylis(m.m))
    assert off < 1e-13 * max(1.0, np.abs(m.m).max())
    assert np.abs(lower - conjugate_block(upper)).max() < 1e-13 * max(1.0, np.abs(m.m).max())
    assume(float(singularity_measure(m.m)) > 1e-8)
    assert abs(np.linalg.det(upper) - m.rho * np.exp(-1j * m.beta)) < 1e-10 * m.rho


def test_hydrogen_column_equals_product_form(hydrogen):
    x = jnp.asarray([0.0, 1.0, math.pi / 3, math.pi / 4])
    product = np.asarray(hydrogen.field.matrix(x))
    X = hydrogen_x()
    k = math.sqrt(X + math.sqrt(1 + X * X))
    th, ph = math.pi / 3, math.pi / 4
    closed = np.array([k, 0, 1j * math.cos(th) / k, 1j * np.exp(1j * ph) * math.sin(th) / k])
    closed = closed * (product[0, 0] / closed[0])
    assert np.abs(to_matrix(closed).m - product).max() < 1e-12


def test_hydrogen_angle_and_velocity(hydrogen):
    X = hydrogen_x()
    for th in (0.3, 1.0, 2.5):
        b = bilinears(np.asarray(hydrogen.field.matrix(jnp.asarray([0.2, 1.7, th, 0.4]))))
        assert b.beta == pytest.approx(math.atan(math.cos(th) / X), abs=1e-12)
        assert b.v[0] == pytest.approx(math.sqrt(X * X + 1) / math.sqrt(math.cos(th) ** 2 + X * X), abs=1e-12)


def test_hydrogen_spin_on_sphere(hydrogen):
    rng = np.random.default_rng(4)
    for _ in range(50):
        th, ph = rng.uniform(0.1, 3.0), rng.uniform(-3, 3)
        b = bilinears(np.asarray(hydrogen.field.matrix(jnp.asarray([0.0, 2.0, th, ph]))))
        s = b.s[1:]
        assert abs(s @ s - 1) < 1e-10
        if abs(math.sin(ph) * math.cos(ph)) > 1e-3:
            assert s[0] / math.cos(ph) == pytest.approx(s[1] / math.sin(ph), abs=1e-10)


def test_zero_beta_velocity(zero_beta):
    a = 0.6
    for ph in (0.0, 0.7, -2.0):
        b = bilinears(np.asarray(zero_beta.field.matrix(jnp.asarray([0.0, 1.3, 1.1, ph]))))
        assert b.v_lower[0] == pytest.approx(1 / a, abs=1e-12)
        assert b.v_lower[1] == pytest.approx(-math.sqrt(1 - a * a) / a * math.sin(ph), abs=1e-12)
