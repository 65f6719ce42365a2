import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from koopman.basis.monomials import MonomialBasis
from koopman.dynamics.oracle import exact_koopman_matrix_oracle
from koopman.edmd.EDMD import KoopmanMatrix, KoopmanMethod
from koopman.errors import InvalidArgumentError
from koopman.projection.taylor import TaylorCoefficients
from koopman.spectral.eigen import (LatticeEigenvalue, PrincipalEigenfunction, block_eigenvalues,
                                    convergence_radius, evaluate_eigenfunction, generator_eigenvalue,
                                    principal_eigenfunctions)
from koopman.spectral.lattice import lattice_distance, lattice_match, lattice_points

LOG2 = math.log(2.0)


def _diagonal(values, n=1, d=2, dt=1.0) -> KoopmanMatrix:
    basis = MonomialBasis.build(n, d)
    return KoopmanMatrix(values=np.diag(values), basis=basis, method=KoopmanMethod.ANALYTIC, dt=dt)


def test_block_eigenvalues_of_diagonal_matrix():
    eigs = block_eigenvalues(_diagonal([1.0, 0.5, 0.25]), dt=1.0)
    assert [eig.degree for eig in eigs] == [0, 1, 2]
    assert_allclose([eig.lam.real for eig in eigs], [0.0, -LOG2, -2 * LOG2], atol=1e-14)
    assert all(eig.lam.imag == 0 for eig in eigs)


def test_block_eigenvalues_without_dt():
    eigs = block_eigenvalues(_diagonal([1.0, 0.5, 0.0]))
    assert all(eig.lam is None for eig in eigs)
    assert eigs[2].decayed


def test_generator_eigenvalue():
    assert generator_eigenvalue(math.e, 0.5) == pytest.approx(2.0)
    assert generator_eigenvalue(0.0, 1.0) is None
    assert generator_eigenvalue(2.0, None) is None


def test_invalid_dt():
    with pytest.raises(InvalidArgumentError):
        block_eigenvalues(_diagonal([1.0, 0.5, 0.25]), dt=0.0)


def test_lattice_match_labels_diagonal_matrix():
    report = lattice_match(block_eigenvalues(_diagonal([1.0, 0.5, 0.25]), dt=1.0), tol=1e-8, dt=1.0)
    assert report.continuous
    assert not report.unmatched
    assert [str(eig.lattice_label) for eig in report.eigenvalues] == ["(0)", "(1)", "(2)"]
    assert max(report.max_error_by_degree.values()) < 1e-12


def test_lattice_match_two_generators():
    mus = [1.0, 0.5, 0.8, 0.25, 0.4, 0.64]
    K = _diagonal(mus, n=2, d=2)
    report = lattice_match(block_eigenvalues(K, dt=1.0), tol=1e-8, dt=1.0)
    assert not report.unmatched
    frame = report.as_frame()
    assert list(frame.columns) == ["degree", "re_mu", "im_mu", "re_lambda", "im_lambda", "lattice_label",
                                   "match_error"]
    assert set(frame["lattice_label"][frame["degree"] == 2]) == {"(2,0)", "(1,1)", "(0,2)"}


def test_lattice_match_reports_spurious_eigenvalue():
    report = lattice_match(block_eigenvalues(_diagonal([1.0, 0.5, 0.9]), dt=1.0), tol=1e-3, dt=1.0)
    assert [eig.degree for eig in report.unmatched] == [2]
    assert report.unmatched[0].lattice_label is None


def test_lattice_match_discrete_mode():
    eigs = [LatticeEigenvalue(mu=1.0, lam=None, degree=0), LatticeEigenvalue(mu=0.5, lam=None, degree=1),
            LatticeEigenvalue(mu=0.25, lam=None, degree=2)]
    report = lattice_match(eigs, tol=1e-12)
    assert not report.continuous
    assert not report.unmatched


def test_lattice_match_folds_the_logarithm_branch():
    dt = 1.0
    # 3λ with λ = -0.1 + 2.5i leaves the principal strip; the principal log of μ³ differs by 2πi
    lam = complex(-0.1, 2.5)
    mus = [1.0, np.exp(lam * dt), np.exp(3 * lam * dt)]
    eigs = [LatticeEigenvalue(mu=1.0, lam=0j, degree=0),
            LatticeEigenvalue(mu=mus[1], lam=generator_eigenvalue(mus[1], dt), degree=1),
            LatticeEigenvalue(mu=mus[2], lam=generator_eigenvalue(mus[2], dt), degree=3)]
    assert abs(eigs[2].lam - 3 * lam) > 1.0
    report = lattice_match(eigs, tol=1e-10, dt=dt)
    assert not report.unmatched


def test_lattice_match_needs_degree_one():
    with pytest.raises(InvalidArgumentError):
        lattice_match([LatticeEigenvalue(mu=1.0, lam=0j, degree=0)], tol=0.1)


def test_lattice_points_and_distance():
    points = dict((str(index), value) for index, value in lattice_points([-1.0, -2.0], 2, continuous=True))
    assert points == {"(2,0)": -2.0, "(1,1)": -3.0, "(0,2)": -4.0}
    distances = lattice_distance([-3.05, None, 0.0], [-1.0, -2.0], max_degree=2, dt=1.0)
    assert distances[0] == pytest.approx(0.05)
    assert np.isnan(distances[1])
    assert distances[2] == pytest.approx(0.0)


def test_principal_eigenfunction_of_polynomial_map():
    basis = MonomialBasis.build(1, 6)
    K = exact_koopman_matrix_oracle([0, 0.5, 0.1], basis)
    [ef] = principal_eigenfunctions(K)
    assert ef.mu == pytest.approx(0.5)
    v = ef.coefficients.coefficients
    assert v[0] == 0
    assert v[1] == pytest.approx(1.0)
    assert_allclose(K.values @ v, ef.mu * v, atol=1e-12)
    assert ef.resonant_degrees == ()


def test_principal_eigenfunctions_of_two_dimensional_triangular_matrix():
    basis = MonomialBasis.build(2, 3)
    rng = np.random.default_rng(3)
    values = np.tril(0.1 * rng.standard_normal((basis.size, basis.size)))
    degrees = basis.degrees
    values[degrees[:, None] < degrees[None, :]] = 0.0
    values[1:3, 1:3] = [[0.6, 0.2], [0.0, 0.3]]
    # diagonal blocks of degree >= 2 hold products of the degree-1 eigenvalues
    for i, index in enumerate(basis.indices):
        if index.total_degree >= 2:
            values[i, degrees == index.total_degree] = 0.0
            values[i, i] = 0.6 ** index.exponents[0] * 0.3 ** index.exponents[1]
    K = KoopmanMatrix(values=values, basis=basis, method=KoopmanMethod.ANALYTIC)
    eigenfunctions = principal_eigenfunctions(K)
    assert sorted(ef.mu.real for ef in eigenfunctions) == pytest.approx([0.3, 0.6])
    for ef in eigenfunctions:
        v = ef.coefficients.coefficients
        assert v[0] == 0
        assert np.linalg.norm(ef.block(1)) == pytest.approx(1.0)
        assert_allclose(K.values @ v, ef.mu * v, atol=1e-10)


def test_resonant_degree_is_flagged():
    # μ = 1 on the degree-1 block and on the degree-2 block: μI - K̄₂₂ is singular
    basis = MonomialBasis.build(1, 2)
    K = KoopmanMatrix(values=np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0.3, 1.0]]), basis=basis,
                      method=KoopmanMethod.ANALYTIC)
    [ef] = principal_eigenfunctions(K)
    assert ef.resonant_degrees == (2,)
    assert np.all(np.isfinite(ef.coefficients.coefficients))


def test_principal_eigenfunctions_need_degree_blocks():
    K = KoopmanMatrix(values=np.eye(1), basis=MonomialBasis.build(1, 0), method=KoopmanMethod.ANALYTIC)
    with pytest.raises(InvalidArgumentError):
        principal_eigenfunctions(K)


def _geometric_eigenfunction(ratio: float, d: int = 8) -> PrincipalEigenfunction:
    basis = MonomialBasis.build(1, d)
    coefficients = np.array([0.0] + [ratio ** (r - 1) for r in range(1, d + 1)], dtype=complex)
    return PrincipalEigenfunction(mu=0.5, coefficients=TaylorCoefficients(basis, coefficients), degree_max=d,
                                  conditioning=[1.0] * d)


def test_convergence_radius_of_geometric_series():
    assert convergence_radius(_geometric_eigenfunction(0.5, d=40)) == pytest.approx(2.0, rel=0.05)


def test_unscaled_coefficients():
    ef = _geometric_eigenfunction(1.0, d=3)
    unscaled = ef.unscaled(0.5)
    assert_allclose(unscaled.coefficients.coefficients, [0.0, 1.0, 0.5, 0.25])
    assert ef.unscaled(1.0) is ef


def test_evaluate_eigenfunction_vanishes_at_equilibrium():
    ef = _geometric_eigenfunction(0.5, d=6)
    grid = np.linspace(0.5, 1.5, 11).reshape(-1, 1)
    values = evaluate_eigenfunction(ef, ef.coefficients.basis, grid, equilibrium=[1.0])
    assert list(values.columns) == ["x1", "re_phi", "im_phi", "abs_phi", "arg_phi"]
    assert values["abs_phi"][5] == 0.0
    # φ(x) = u / (1 - u/2) truncated, u = x - 1
    u = grid[:, 0] - 1.0
    assert_allclose(values["re_phi"], sum(0.5 ** (r - 1) * u ** r for r in range(1, 7)), atol=1e-14)
    assert values.attrs["convergence_radius"] > 1.0


def _scaled_rotation(radius: float, angle: float) -> np.ndarray:
    c, s = radius * math.cos(angle), radius * math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _rotation_koopman(radius: float, angle: float, dt: float = 1.0) -> KoopmanMatrix:
    # degree-1 block r·R(θ); the degree-2 block carries r²·R(2θ) and r²
    basis = MonomialBasis.build(2, 2)
    values = np.zeros((basis.size, basis.size))
    values[0, 0] = 1.0
    values[1:3, 1:3] = _scaled_rotation(radius, angle)
    values[3:5, 3:5] = _scaled_rotation(radius ** 2, 2 * angle)
    values[5, 5] = radius ** 2
    return KoopmanMatrix(values=values, basis=basis, method=KoopmanMethod.ANALYTIC, dt=dt)


def test_eigenvalues_come_in_conjugate_pairs():
    eigs = block_eigenvalues(_rotation_koopman(0.8, 0.6), dt=1.0)
    for degree in (1, 2):
        mus = np.array([eig.mu for eig in eigs if eig.degree == degree])
        assert_allclose(np.sort_complex(mus), np.sort_complex(np.conj(mus)), atol=1e-12)


def test_generator_eigenvalues_exponentiate_back():
    dt = 0.5
    for eig in block_eigenvalues(_rotation_koopman(0.8, 0.6, dt), dt=dt):
        assert abs(np.exp(eig.lam * dt) - eig.mu) <= 1e-12 * abs(eig.mu)


def test_aliasing_warning_near_the_nyquist_limit(caplog):
    with caplog.at_level(logging.WARNING):
        block_eigenvalues(_rotation_koopman(0.8, 0.6), dt=1.0)
    assert "aliasing" not in caplog.text
    with caplog.at_level(logging.WARNING):
        block_eigenvalues(_rotation_koopman(0.8, 3.0), dt=1.0)
    assert "aliasing" in caplog.text


def test_defective_degree_one_block_uses_schur_vectors():
    # Jordan block: one eigenvector for the double eigenvalue 0.5
    basis = MonomialBasis.build(2, 1)
    values = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]])
    K = KoopmanMatrix(values=values, basis=basis, method=KoopmanMethod.ANALYTIC)
    eigenfunctions = principal_eigenfunctions(K)
    assert len(eigenfunctions) == 2
    assert all(ef.defective for ef in eigenfunctions)
    first = eigenfunctions[0]
    assert first.mu == pytest.approx(0.5)
    v = first.coefficients.coefficients
    assert_allclose(K.values @ v, first.mu * v, atol=1e-12)
    Q = np.stack([ef.block(1) for ef in eigenfunctions], axis=1)
    assert_allclose(Q.conj().T @ Q, np.eye(2), atol=1e-12)
