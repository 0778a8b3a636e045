import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from berglab import closed_forms as cf
from berglab.closed_forms import ExactConstant

PI = math.pi


def test_j_ball_values():
    assert cf.j_ball(1) == ExactConstant(2, 1)
    assert cf.j_ball(2) == ExactConstant(Fraction(9, 2), 2)
    assert cf.j_ball(3) == ExactConstant(Fraction(64, 6), 3)
    assert cf.j_ball(2).float_value == pytest.approx(4.5 * PI ** 2, rel=1e-15)


def test_j_polydisk_values():
    assert cf.j_polydisk(0) == ExactConstant(1, 0)
    assert cf.j_polydisk(1) == ExactConstant(2, 1)
    assert cf.j_polydisk(3) == ExactConstant(8, 3)


def test_j_product_values():
    assert cf.j_product(2, 2) == ExactConstant(4, 2)
    assert cf.j_product(2, 2).float_value == pytest.approx(4 * PI ** 2, rel=1e-15)
    # k = n - m + 1 = 2: 3^2 * 2 / 2! = 9
    assert cf.j_product(3, 2) == ExactConstant(9, 3)
    assert cf.j_product(2, 2) != cf.j_ball(2)


def _oracle_j(n, m):
    # log-gamma float evaluation of the displayed product constant
    k = n - m + 1
    return math.exp(k * math.log(k + 1) + (m - 1) * math.log(2) + n * math.log(PI)
                    - math.lgamma(k + 1))


@given(st.integers(2, 40), st.data())
def test_j_product_matches_float_oracle(n, data):
    m = data.draw(st.integers(2, n))
    assert cf.j_product(n, m).float_value == pytest.approx(_oracle_j(n, m), rel=1e-10)


def test_j_product_consistency_exhaustive():
    # j_product raises InternalError if the product and the single formula differ
    for n in range(2, 101):
        for m in range(2, n + 1):
            cf.j_product(n, m)


def test_a_seq_first_terms():
    assert [cf.a_seq(k) for k in (1, 2, 3)] == [1, Fraction(9, 8), Fraction(4, 3)]


@given(st.integers(2, 300))
def test_a_ratio_is_am_gm_instance(n):
    ratio = cf.a_seq(n) / cf.a_seq(n - 1)
    assert ratio == Fraction((n + 1) ** n, 2 * n ** n)
    assert Fraction(n + 1, n) ** n > 2


def test_lemma_verify_500_fast():
    t = time.perf_counter()
    rep = cf.lemma52_verify(500)
    assert time.perf_counter() - t < 5
    assert rep.monotone and rep.first_failure is None and rep.terms_checked == 500
    assert rep.distinct and rep.pairs_checked == sum(n - 1 for n in range(2, 101))
    assert rep.ok


def test_verdict_path_is_exact():
    assert isinstance(cf.a_seq(400), Fraction)
    assert isinstance(cf.j_ball(50).rational_part, Fraction)


def test_constants_table_shape():
    rows = cf.constants_table(4)
    assert len(rows) == 1 + 2 + 3
    assert not any(r["equal"] for r in rows)


def test_str_format():
    assert str(cf.j_ball(2)) == "9/2*pi^2"
    assert str(ExactConstant(3, 0)) == "3"


def test_ball_moment_oracle():
    # ‖z^α‖² on 𝔹ⁿ = π^n α! / (n + |α|)!
    assert cf.ball_moment((0, 0)) == (Fraction(1, 2), 2)
    assert cf.ball_moment((1, 0)) == (Fraction(1, 6), 2)
    assert cf.ball_moment((1,)) == (Fraction(1, 2), 1)


@pytest.mark.parametrize("model,z,K,g,J", [
    (cf.ball_model(1), [0], 1 / PI, 2.0, 2 * PI),
    (cf.ball_model(2), [0, 0], 2 / PI ** 2, 3.0, 4.5 * PI ** 2),
    (cf.polydisk_model(2), [0, 0], 1 / PI ** 2, 2.0, 4 * PI ** 2),
])
def test_closed_models_at_origin(model, z, K, g, J):
    assert model.kernel(z) == pytest.approx(K, rel=1e-14)
    G = model.metric(z)
    assert np.allclose(G, g * np.eye(len(z)), atol=1e-14)
    assert model.canonical_invariant(z) == pytest.approx(J, rel=1e-14)
    assert model.ricci(z, np.ones(len(z))) == -1.0


def test_ball_ricci_off_center():
    assert cf.ball_model(2).ricci([0.3, 0], [0, 1]) == -1.0


def _fd_metric(model, z, h=1e-4):
    # G_ij = ∂_i ∂̄_j log K by central differences in real coordinates
    n = len(z)
    f = lambda p: math.log(model.kernel(p))
    E = np.eye(n)

    def d2(a, b):
        return (f(z + h * a + h * b) - f(z + h * a - h * b)
                - f(z - h * a + h * b) + f(z - h * a - h * b)) / (4 * h * h)

    G = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(n):
            xx, yy = d2(E[i], E[j]), d2(1j * E[i], 1j * E[j])
            xy, yx = d2(E[i], 1j * E[j]), d2(1j * E[i], E[j])
            G[i, j] = 0.25 * ((xx + yy) + 1j * (xy - yx))
    return G


@pytest.mark.parametrize("model,z", [
    (cf.ball_model(2), np.array([0.3 + 0.1j, -0.2j])),
    (cf.product_model(3, 2), np.array([0.2, 0.4j, 0.1 - 0.3j])),
    (cf.ball_model(2, 2.0), np.array([0.5, 0.7j])),
])
def test_metric_matches_log_kernel_hessian(model, z):
    assert np.allclose(model.metric(z), _fd_metric(model, z), atol=1e-6)
    jet = model.jet(z)
    G = (jet.K * jet.ddK - np.outer(jet.dK, jet.dK.conj())) / jet.K ** 2
    assert np.allclose(G, model.metric(z), atol=1e-12)


def _mobius(a, z):
    # automorphism of 𝔹ⁿ moving a to 0
    a = np.asarray(a, complex)
    s2 = np.vdot(a, a).real
    P = np.outer(a, a.conj()) / s2
    Q = np.eye(len(a)) - P
    sa = math.sqrt(1 - s2)
    return -(a - P @ z - sa * Q @ z) / (1 - np.vdot(a, z))


def _mobius_jacobian(a, z, h=1e-6):
    n = len(z)
    Jm = np.zeros((n, n), complex)
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = h
        Jm[:, j] = (_mobius(a, z + e) - _mobius(a, z - e)) / (2 * h)
    return Jm


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_ball_mobius_invariance(ax, ay, zx, zy):
    ball = cf.ball_model(2)
    a = np.array([ax + 0.1j, ay])
    z = np.array([zx, zy + 0.05j])
    w = _mobius(a, z)
    assert np.linalg.norm(_mobius(a, a)) < 1e-14
    assert ball.canonical_invariant(w) == pytest.approx(ball.canonical_invariant(z), rel=1e-12)
    det = np.linalg.det(_mobius_jacobian(a, z))
    assert ball.kernel(w) * abs(det) ** 2 == pytest.approx(ball.kernel(z), rel=1e-7)


def test_closed_invariant_constant_on_grid():
    ball = cf.ball_model(2)
    vals = [ball.canonical_invariant([x, y]) for x in np.linspace(-0.6, 0.6, 7)
            for y in np.linspace(-0.6j, 0.6j, 7) if abs(x) ** 2 + abs(y) ** 2 < 0.9]
    spread = (max(vals) - min(vals)) / np.mean(vals)
    assert spread < 1e-12


def test_product_model_volume_and_moments():
    pm = cf.product_model(3, 2)
    assert pm.volume() == pytest.approx(PI ** 2 / 2 * PI)
    assert pm.moment((0, 0, 0)) == pytest.approx(pm.volume())
    assert pm.kernel(np.zeros(3)) == pytest.approx(1 / pm.volume())
