import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import null_space

from berglab import domains as D
from berglab import extremal as ex
from berglab import geometry as geo
from berglab import kernel as ker
from berglab.errors import ConfigError, RankDeficiencyError

PI = math.pi


def test_lambda_disk(disk_model):
    r = ex.lambda_k(disk_model, [0], 1)
    assert r.value == pytest.approx(2 / PI, rel=1e-12)
    assert r.unsquared == pytest.approx(math.sqrt(2 / PI), rel=1e-12)
    # the maximiser is z / ‖z‖, i.e. the degree-one basis direction
    a0, a1, _ = disk_model.evaluation_vectors([0])
    assert abs(np.vdot(a1[0].conj(), r.maximizer_coeffs)) ** 2 == pytest.approx(2 / PI)


def test_lambda_ball(ball_model):
    for k in (1, 2):
        assert ex.lambda_k(ball_model, [0, 0], k).value == pytest.approx(6 / PI ** 2, rel=1e-12)
    assert ex.lambda_product(ball_model, [0, 0]) == pytest.approx(36 / PI ** 4, rel=1e-12)


def test_lambda_k_range(ball_model):
    with pytest.raises(ConfigError):
        ex.lambda_k(ball_model, [0, 0], 3)


@pytest.mark.parametrize("fixture,z", [
    ("disk_model", [0]), ("disk_model", [0.3]),
    ("ball_model", [0, 0]), ("ball_model", [0.3, 0]),
    ("bidisk_model", [0, 0]), ("bidisk_model", [0.3, 0]),
])
def test_identity_one_exact_models(fixture, z, request):
    model = request.getfixturevalue(fixture)
    rep = ex.verify_identities(model, z, np.ones(len(z)))
    assert rep.identity1_rel < 1e-10


def test_identity_one_rejects_unsquared(disk_model):
    rep = ex.verify_identities(disk_model, [0], [1])
    assert rep.identity1_rel_unsquared > 0.1


def test_identity_one_qmc(ball_qmc):
    for z in ([0, 0], [0.3, 0], [0.1, 0.2j]):
        assert ex.verify_identities(ball_qmc, z, [1, 0]).identity1_rel < 0.02


@pytest.mark.parametrize("k", [1, 2])
def test_maximizer_feasible(ball_qmc, k):
    z = [0.2 - 0.1j, 0.3j]
    r = ex.lambda_k(ball_qmc, z, k)
    a0, a1, _ = ball_qmc.evaluation_vectors(z)
    c = r.maximizer_coeffs
    assert abs(np.linalg.norm(c) - 1) < 1e-10
    assert abs(a0 @ c) < 1e-10 * np.linalg.norm(a0)
    for j in range(k - 1):
        assert abs(a1[j] @ c) < 1e-10 * np.linalg.norm(a1[j])
    assert abs(a1[k - 1] @ c) ** 2 == pytest.approx(r.value, rel=1e-10)


def test_more_constraints_never_increase(ball_qmc):
    z = [0.1, -0.3j]
    a0, a1, _ = ball_qmc.evaluation_vectors(z)
    # λ² under the constraint f(z) = 0 only, versus the full λ²
    Q = ex.orthonormal_constraints([a0.conj()])
    fewer = np.linalg.norm(ex._project_out(Q, a1[1].conj())) ** 2
    assert ex.lambda_k(ball_qmc, z, 2).value <= fewer * (1 + 1e-12)


def test_permutation_swaps_lambdas(ball_model):
    z, zs = [0.3, 0.1j], [0.1j, 0.3]
    l1, l2 = (ex.lambda_k(ball_model, z, k).value for k in (1, 2))
    m1, m2 = (ex.lambda_k(ball_model, zs, k).value for k in (1, 2))
    assert ex.lambda_product(ball_model, z) == pytest.approx(
        ex.lambda_product(ball_model, zs), rel=1e-10)
    assert l1 * l2 == pytest.approx(m1 * m2, rel=1e-10)


def test_dependent_constraints():
    v = np.array([1.0, 2.0, 0.0])
    with pytest.raises(RankDeficiencyError):
        ex.orthonormal_constraints([v, 3 * v])


def test_lambda_monotone_under_inclusion():
    big = ker.build_kernel(D.ball(2), 10)
    small = ker.build_kernel(D.ellipsoid([1.0, 2.0]), 10)
    for z in ([0, 0], [0.2, 0.1j], [-0.3, 0.2]):
        for k in (1, 2):
            assert (ex.lambda_k(small, z, k).value
                    >= ex.lambda_k(big, z, k).value * (1 - 0.03))


def test_big_I_disk(disk_model):
    r = ex.big_I(disk_model, [0], [1])
    assert r.value == pytest.approx(6 / PI, rel=1e-12)
    sup = ex.big_I(disk_model, [0], [1], reduce="sup")
    assert sup.value == pytest.approx(r.value, rel=1e-12)
    R = geo.ricci_via_extremal(disk_model, [0], [1]).R
    assert R == pytest.approx(-1.0, abs=1e-12)


@given(st.floats(0.1, 10.0))
def test_big_I_homogeneity(t):
    model = ker.build_kernel(D.ball(2), 6)
    z, u = [0.2, 0.1j], np.array([1.0, 0.5j])
    base = ex.big_I(model, z, u).value
    assert ex.big_I(model, z, t * u).value == pytest.approx(t * t * base, rel=1e-10)
    r1 = geo.ricci_via_extremal(model, z, u).R
    r2 = geo.ricci_via_extremal(model, z, t * u).R
    assert r1 == pytest.approx(r2, abs=1e-12)


def _brute_I(model, z, u, h=1e-4):
    """Independent route: basis Hessians by finite differences of φ values,
    constraints by scipy null_space, and the literal form u f'' Ḡ⁻¹ conj(f'') u*."""
    z = np.asarray(z, complex)
    u = np.asarray(u, complex)
    n = len(z)
    phi = lambda p: model.evaluation_vectors(p)[0]
    E = np.eye(n)

    def d(f, i):  # holomorphic ∂_i
        return lambda p: 0.5 * ((f(p + h * E[i]) - f(p - h * E[i])) / (2 * h)
                                - 1j * (f(p + 1j * h * E[i]) - f(p - 1j * h * E[i])) / (2 * h))

    grads = [d(phi, i)(z) for i in range(n)]
    hess = np.array([[d(d(phi, i), l)(z) for l in range(n)] for i in range(n)])
    A = np.vstack([phi(z)] + grads)
    N = null_space(A, rcond=1e-9)
    jet = model.jet(z)
    G = (jet.K * jet.ddK - np.outer(jet.dK, jet.dK.conj())) / jet.K ** 2
    Gbar_inv = np.linalg.inv(G.conj())
    total = 0.0
    for c in N.T:
        fpp = np.einsum("ilj,j->il", hess, c)  # f''(z)
        row = u @ fpp
        total += np.real(row @ Gbar_inv @ np.conj(fpp).T @ u.conj())
    return total


@pytest.mark.parametrize("z,u", [
    ([0.0, 0.0], [1.0, 0.0]),
    ([0.2, 0.1j], [1.0, 1j]),
    ([0.3 - 0.1j, -0.2], [0.4, 1.0]),
])
def test_big_I_matches_brute_force(z, u):
    model = ker.build_kernel(D.ball(2), 5)
    ours = ex.big_I(model, z, u).value
    assert ours == pytest.approx(_brute_I(model, z, u), rel=1e-5)


def test_ball_second_oracle_convention():
    # u = (1, i)/√2 distinguishes conjugation placements
    model = ker.build_kernel(D.ball(2), 10)
    z, u = [0.0, 0.0], np.array([1, 1j]) / math.sqrt(2)
    R = geo.ricci_via_extremal(model, z, u).R
    assert R == pytest.approx(-1.0, abs=1e-6)
    assert R == pytest.approx(geo.ricci_stencil(model, z, u).R, abs=1e-4)


def test_identity_two_report(bidisk_model):
    rep = ex.verify_identities(bidisk_model, [0.1, 0.2j], [1, 1])
    assert rep.identity2_abs < 0.1
    assert rep.R_extremal == pytest.approx(-1, abs=0.1)


def test_big_I_unknown_options(disk_model):
    with pytest.raises(ConfigError):
        ex.big_I(disk_model, [0], [1], convention="other")
    with pytest.raises(ConfigError):
        ex.big_I(disk_model, [0], [1], reduce="mean")


def test_transpose_convention_differs_off_axis():
    model = ker.build_kernel(D.ball(2), 5)
    z, u = [0.3 - 0.1j, 0.2j], [0.4, 1j]
    paper = ex.big_I(model, z, u).value
    other = ex.big_I(model, z, u, convention="transpose").value
    assert abs(paper - other) > 1e-3 * paper
