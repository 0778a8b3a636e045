import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from berglab import closed_forms as cf
from berglab import domains as D
from berglab import kernel as ker
from berglab.errors import ConfigError, DegenerateGramError

PI = math.pi


def test_monomial_basis_examples():
    assert ker.monomial_basis(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert ker.monomial_basis(1, 0) == [(0,)]
    assert len(ker.monomial_basis(2, 10)) == 66


@given(st.integers(1, 4), st.integers(0, 8))
def test_monomial_basis_size_and_grading(n, d):
    basis = ker.monomial_basis(n, d)
    assert len(basis) == math.comb(n + d, n)
    assert len(set(basis)) == len(basis)
    degs = [sum(a) for a in basis]
    assert degs == sorted(degs) and max(degs) == d


def test_monomial_basis_rejects_bad_input():
    with pytest.raises(ConfigError):
        ker.monomial_basis(0, 2)


@pytest.mark.parametrize("method", ["exact", "radial"])
def test_disk_gram_two_monomials(method):
    G = ker.gram(D.disk(), [(0,), (1,)], method=method)
    assert np.allclose(G.entries, np.diag([PI, PI / 2]), rtol=1e-13, atol=1e-15)


def test_disk_gram_qmc():
    G = ker.gram(D.disk().as_generic(), [(0,), (1,)], samples=1 << 20)
    assert np.allclose(G.entries, np.diag([PI, PI / 2]), atol=5e-3)
    assert np.array_equal(G.entries, G.entries.conj().T)


def test_ball_gram_volume_qmc():
    G = ker.gram(D.ball(2).as_generic(), [(0, 0)], samples=1_000_000)
    assert abs(G.entries[0, 0].real - PI ** 2 / 2) / (PI ** 2 / 2) < 5e-3


def test_radial_matches_exact_moments():
    basis = ker.monomial_basis(2, 6)
    a = ker.gram(D.ball(2), basis, method="radial").entries
    b = ker.gram(D.ball(2), basis, method="exact").entries
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_gram_qmc_deterministic_and_thread_independent():
    spec = D.ellipsoid([1.0, 3.0]).as_generic()
    basis = ker.monomial_basis(2, 3)
    a = ker.gram(spec, basis, 300_000, seed=4, threads=1)
    b = ker.gram(spec, basis, 300_000, seed=4, threads=4)
    assert np.array_equal(a.entries, b.entries)


def test_orthonormalize_identity():
    C, r = ker.orthonormalize(np.eye(4))
    assert r == 4 and np.allclose(C, np.eye(4), atol=1e-15)


def test_orthonormalize_diagonal():
    C, r = ker.orthonormalize(np.diag([PI, PI / 2]))
    assert r == 2
    assert np.allclose(C, np.diag([1 / math.sqrt(PI), math.sqrt(2 / PI)]), atol=1e-14)


def test_orthonormalize_duplicate_detects_rank():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((5, 8)) + 1j * rng.standard_normal((5, 8))
    B[4] = B[1]
    A = B @ B.conj().T
    C, r = ker.orthonormalize(A)
    assert r == 4
    assert ker.orthonormality_residual(C, A) < 1e-8


@given(st.integers(0, 10_000), st.integers(2, 12))
def test_orthonormalize_random_spd(seed, k):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((k, 3 * k)) + 1j * rng.standard_normal((k, 3 * k))
    A = B @ B.conj().T
    C, r = ker.orthonormalize(A)
    assert r == k
    assert ker.orthonormality_residual(C, A) < 1e-8


def test_orthonormalize_zero_matrix():
    with pytest.raises(DegenerateGramError):
        ker.orthonormalize(np.zeros((3, 3)))


def test_disk_kernel_values(disk_model):
    assert disk_model.eval([0]) == pytest.approx(1 / PI, abs=1e-3)
    assert disk_model.eval([0.5]) == pytest.approx(16 / (9 * PI), rel=1e-2)


def test_ball_kernel_center(ball_model, ball_qmc):
    assert ball_model.eval([0, 0]) == pytest.approx(2 / PI ** 2, rel=1e-2)
    assert ball_qmc.eval([0, 0]) == pytest.approx(2 / PI ** 2, rel=1e-2)


def test_disk_jet_at_origin(disk_model):
    jet = disk_model.jet([0])
    assert jet.K == pytest.approx(1 / PI, rel=1e-12)
    assert abs(jet.dK[0]) < 1e-14
    assert jet.ddK[0, 0].real == pytest.approx(2 / PI, rel=1e-12)


def test_ball_jet_symmetry(ball_model, ball_qmc):
    assert np.abs(ball_model.jet([0, 0]).dK).max() < 1e-14
    jet = ball_qmc.jet([0.1 + 0.2j, -0.3j])
    assert np.array_equal(jet.ddK, jet.ddK.conj().T)


def _fd_jet(model, z, h=1e-5):
    n = len(z)
    dK = np.zeros(n, complex)
    ddK = np.zeros((n, n), complex)
    E = np.eye(n)
    K = model.values
    for i in range(n):
        dx = (K(z + h * E[i]) - K(z - h * E[i]))[0] / (2 * h)
        dy = (K(z + 1j * h * E[i]) - K(z - 1j * h * E[i]))[0] / (2 * h)
        dK[i] = 0.5 * (dx - 1j * dy)
    return dK


@pytest.mark.parametrize("z", [np.array([0.3 + 0.1j, -0.2j]), np.array([0.0, 0.5])])
def test_jet_gradient_matches_differences(ball_qmc, z):
    jet = ball_qmc.jet(z)
    assert np.allclose(jet.dK, _fd_jet(ball_qmc, z), rtol=1e-6, atol=1e-9)


def test_orthonormality_residual_recorded(ball_model, ball_qmc, disk_model):
    for m in (ball_model, ball_qmc, disk_model):
        assert m.provenance["residual"] < 1e-8
        assert m.effective_rank <= len(m.basis)


def test_closed_form_transformation_rule():
    small, big = cf.ball_model(2), cf.ball_model(2, 2.0)
    z = np.array([0.3, 0.2j])
    assert big.kernel(2 * z) * 2 ** 4 == pytest.approx(small.kernel(z), rel=1e-14)


def test_affine_transformation_rule_numeric(ball_qmc):
    A = np.array([[1.0, 0.3j], [0.2, 1.5]])
    f = D.AffineMap.make(A, [0.2, -0.1j])
    img = ker.build_kernel(D.pullback(D.ball(2), f), 10, 2_000_000, 0)
    det2 = abs(f.jacobian_det) ** 2
    for z in ([0, 0], [0.3, -0.2j], [0.1 + 0.1j, 0.4]):
        z = np.array(z, complex)
        w = f(z[None, :])[0]
        assert img.eval(w) * det2 == pytest.approx(ball_qmc.eval(z), rel=0.02)


def test_monotone_in_domain():
    outer = D.ball(2).as_generic()
    inner = D.ellipsoid([1.0, 2.0]).as_generic().with_box(outer.box)
    ko = ker.build_kernel(outer, 8, 1 << 19, 0)
    ki = ker.build_kernel(inner, 8, 1 << 19, 0)
    for z in ([0, 0], [0.3, 0.1j], [-0.2j, 0.3]):
        assert ki.eval(z) >= ko.eval(z) * (1 - 0.03)


def test_degree_stability_increments_decrease():
    rows = ker.convergence_report(D.ball(2), [0.3, 0.2j], range(2, 11))
    inc = [r["increment"] for r in rows[1:]]
    assert all(x > 0 for x in inc)
    assert all(b < a for a, b in zip(inc, inc[1:]))


def test_build_kernel_deterministic():
    spec = D.thullen(2.0).as_generic()
    a = ker.build_kernel(spec, 5, 200_000, seed=9)
    b = ker.build_kernel(spec, 5, 200_000, seed=9, threads=2)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_model_json_round_trip(ball_model):
    back = ker.KernelModel.from_json(ball_model.to_json(), ball_model.domain)
    z = [0.2, 0.1j]
    assert back.eval(z) == ball_model.eval(z)
    assert back.provenance["degree"] == 10


def test_extrapolation_warning(disk_model):
    from berglab.errors import ExtrapolationWarning
    with pytest.warns(ExtrapolationWarning):
        disk_model.eval([1.5])


def test_default_degree():
    assert ker.default_degree(2) == 10 and ker.default_degree(3) == 6
