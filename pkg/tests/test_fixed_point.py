import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmetric.battery import averaged_affine, random_orthogonal, random_spd, rng_for
from qmetric.calculus import AveragedCertificate, CocoercivityCertificate
from qmetric.errors import DivergenceDetected, MetricStructureError, NoUniqueFixedPoint, NotAFixedPoint
from qmetric.fixed_point import (
    GOLDEN,
    LN_GOLDEN,
    R_LINEAR_ALPHA_MIN,
    asymptotic_regularity,
    banach_picard,
    krasnoselskii_mann,
    pointwise_bound,
    qlinear_report,
    reference_fixed_point,
    rlinear_report,
    summability_check,
    trace_to_csv,
)
from qmetric.metric import Metric
from qmetric.operators import Affine, MapOperator, identity
from qmetric.resolvent import AffineMonotone, ResolventHandle

I1, I2 = Metric.identity(1), Metric.identity(2)


def half(n=2):
    return Affine(0.5 * np.eye(n))


def test_half_closed_form():
    tr = banach_picard(half(3), Metric.identity(3), np.ones(3), max_iter=20, stop_tol=1e-30)
    k = np.arange(21)[:, None]
    np.testing.assert_array_equal(tr.iterates, np.ones((21, 3)) * 0.5**k)
    np.testing.assert_allclose(tr.q_seq_err[1:] / tr.q_seq_err[:-1], 0.5, rtol=1e-15)


def test_resolvent_of_identity_matches_half():
    r = ResolventHandle(AffineMonotone(np.eye(2)), I2)
    a = banach_picard(r, I2, [1.0, 1.0], max_iter=30)
    b = banach_picard(half(), I2, [1.0, 1.0], max_iter=30)
    np.testing.assert_allclose(a.iterates, b.iterates, rtol=1e-15)


def test_identity_stops_immediately():
    tr = banach_picard(identity(2), I2, [3.0, 4.0])
    assert tr.K == 1 and list(tr.q_seq_err) == [0.0] and tr.converged


def test_divergence():
    with pytest.raises(DivergenceDetected) as exc:
        banach_picard(Affine(2.0 * np.eye(1)), I1, [1.0])
    assert exc.value.k > 500


def test_requires_pd_metric():
    with pytest.raises(MetricStructureError):
        banach_picard(half(), Metric(np.diag([1.0, 0.0])), [1.0, 1.0])


def test_km_examples():
    zero = Affine(np.zeros((1, 1)))
    tr = krasnoselskii_mann(zero, I1, 0.5, [2.0], max_iter=3, stop_tol=1e-30)
    assert list(tr.iterates[:, 0]) == [2.0, 1.0, 0.5, 0.25]
    tr = krasnoselskii_mann(half(1), I1, 1.5, [1.0], max_iter=3, stop_tol=1e-30)
    assert list(tr.iterates[:, 0]) == [1.0, 0.25, 0.0625, 0.015625]


def test_km_gamma_one_bitwise(rng):
    q = random_spd(4, rng)
    m = Metric(q)
    T = averaged_affine(0.9, 0.6, q, random_orthogonal(4, rng), rng.standard_normal(4))
    b0 = rng.standard_normal(4)
    a = banach_picard(T, m, b0)
    b = krasnoselskii_mann(T, m, 1.0, b0)
    assert a.iterates.tobytes() == b.iterates.tobytes()
    assert a.q_seq_err.tobytes() == b.q_seq_err.tobytes()


def test_pointwise_example():
    T = half()
    tr = banach_picard(T, I2, [1.0, 0.0], cert=AveragedCertificate(1.0, 0.5, I2))
    rep = pointwise_bound(tr, np.zeros(2))
    assert rep.all_satisfied
    assert rep.bound_values[0] == 1.0 and tr.q_seq_err[0] == 0.5


def test_pointwise_trivial_at_solution():
    tr = banach_picard(identity(2), I2, [1.0, 2.0], cert=AveragedCertificate(1.0, 0.5, I2))
    rep = pointwise_bound(tr, [1.0, 2.0])
    np.testing.assert_array_equal(rep.per_k_margin, rep.bound_values)


def test_pointwise_cocoercive_factor():
    tr = banach_picard(half(), I2, [1.0, 0.0], cert=CocoercivityCertificate(1.0, I2))
    rep = pointwise_bound(tr, np.zeros(2))
    assert rep.bound_values[0] == 1.0 and rep.all_satisfied


def test_not_a_fixed_point():
    tr = banach_picard(half(), I2, [1.0, 0.0], cert=AveragedCertificate(1.0, 0.5, I2))
    with pytest.raises(NotAFixedPoint):
        pointwise_bound(tr, [1.0, 0.0])


def test_qlinear_cocoercive_half():
    tr = banach_picard(half(), I2, [1.0, -1.0], cert=CocoercivityCertificate(1.5, I2))
    rep = qlinear_report(tr, np.zeros(2))
    assert rep.applicable and rep.nu == 0.5 and rep.all_satisfied
    assert rep.max_observed_ratio == pytest.approx(0.25, rel=1e-12)


def test_qlinear_not_applicable_for_xi_one():
    tr = banach_picard(half(), I2, [1.0, 0.0], cert=AveragedCertificate(1.0, 0.5, I2))
    assert not qlinear_report(tr, np.zeros(2)).applicable


def test_qlinear_scalar_recursion():
    T = Affine(0.3 * np.eye(2))
    # T = (1 - a) I + a K with K = (0.3 - (1 - a))/a I; a = 0.8 gives xi = 0.125
    c = AveragedCertificate(0.125, 0.8, I2)
    tr = banach_picard(T, I2, [1.0, 1.0], cert=c)
    rep = qlinear_report(tr, np.zeros(2))
    assert rep.all_satisfied
    assert rep.max_observed_ratio == pytest.approx(0.09, rel=1e-9)
    assert rep.max_observed_ratio <= rep.nu


def _rl_trace(xi, alpha):
    T = Affine((1 - alpha + alpha * xi) * np.eye(1))
    return banach_picard(T, I1, [1.0], cert=AveragedCertificate(xi, alpha, I1))


def test_rlinear_global_example():
    rep = rlinear_report(_rl_trace(0.2, 0.5), np.zeros(1))
    assert rep.nu == pytest.approx(0.52) and rep.global_regime and rep.bound_kind == "RLinearGlobal"
    assert 0.04 <= 1 - (3 - math.sqrt(5)) / (2 * 0.5)
    assert rep.all_satisfied


def test_rlinear_local_example():
    rep = rlinear_report(_rl_trace(0.6, 0.5), np.zeros(1))
    nu = 0.68
    assert rep.nu == pytest.approx(nu)
    assert not rep.global_regime
    onset = math.ceil(math.log((1 + math.sqrt(5)) / 2) / math.log(1 / math.sqrt(nu)) - 1)
    assert rep.local_onset_k == onset
    assert rep.all_satisfied


def test_rlinear_cocoercive_global():
    tr = banach_picard(Affine(0.25 * np.eye(1)), I1, [1.0], cert=CocoercivityCertificate(2.0, I1))
    rep = rlinear_report(tr, np.zeros(1))
    assert rep.global_regime and rep.all_satisfied


def test_rlinear_not_applicable_for_nu_one():
    tr = banach_picard(half(), I2, [1.0, 0.0], cert=AveragedCertificate(1.0, 0.5, I2))
    assert not rlinear_report(tr, np.zeros(2)).applicable


def test_constants_full_precision():
    assert GOLDEN == (1 + 5**0.5) / 2
    assert LN_GOLDEN == pytest.approx(0.48121182505960347, rel=1e-15)
    assert R_LINEAR_ALPHA_MIN == pytest.approx(0.3819660112501051, rel=1e-15)


def test_asymptotic_regularity_examples():
    assert asymptotic_regularity(banach_picard(half(), I2, [1.0, 0.0]))
    assert asymptotic_regularity(banach_picard(identity(2), I2, [1.0, 0.0]))
    rot = Affine(np.array([[0.0, -1.0], [1.0, 0.0]]))
    tr = banach_picard(rot, I2, [1.0, 0.0], max_iter=40)
    np.testing.assert_allclose(tr.q_seq_err, math.sqrt(2), rtol=1e-15)
    assert not asymptotic_regularity(tr)


def test_reference_fixed_point_examples():
    np.testing.assert_array_equal(reference_fixed_point(half(), I2), [0.0, 0.0])
    np.testing.assert_allclose(reference_fixed_point(Affine(0.5 * np.eye(2), [1.0, 0.0]), I2), [2.0, 0.0])
    with pytest.raises(NoUniqueFixedPoint):
        reference_fixed_point(identity(2), I2)


def test_reference_fixed_point_nonlinear():
    T = MapOperator(lambda b: 0.5 * np.tanh(b) + 1.0, 1)
    b = reference_fixed_point(T, I1)
    assert abs(T(b)[0] - b[0]) <= 1e-12


def test_csv_layout():
    tr = banach_picard(half(), I2, [1.0, 0.0], max_iter=3, stop_tol=1e-30, cert=AveragedCertificate(1.0, 0.5, I2))
    rep = pointwise_bound(tr, np.zeros(2))
    text = trace_to_csv(tr, [rep], np.zeros(2))
    lines = text.splitlines()
    assert lines[0] == "# qmetric-trace v1"
    assert lines[1] == "k,seq_err_Q,dist_Q,bound_PointwiseSqrtK"
    assert lines[2] == "0,0.5,1.0,1.0"
    assert lines[-1].startswith("3,,0.125,")


@settings(max_examples=30)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_trace_invariants(xi, alpha, gfrac, seed):
    rng = rng_for(seed)
    q = random_spd(3, rng)
    m = Metric(q)
    T = averaged_affine(xi, alpha, q, random_orthogonal(3, rng), rng.standard_normal(3))
    gamma = gfrac / alpha * 0.999
    c = AveragedCertificate(xi, alpha, m, operator=T)
    tr = krasnoselskii_mann(T, m, gamma, rng.uniform(-10, 10, 3), max_iter=2000, cert=c)
    bstar = reference_fixed_point(T, m)
    tr = tr.with_solution(bstar)
    d = tr.q_dist_to_sol
    scale = 1 + d[0]
    # Fejér monotone and non-increasing sequential error
    assert np.all(np.diff(d) <= 1e-9 * scale)
    assert np.all(np.diff(tr.q_seq_err) <= 1e-9 * scale)
    lhs, rhs = summability_check(tr, bstar)
    assert lhs <= rhs * (1 + 1e-8) + 1e-8 * scale**2
    assert pointwise_bound(tr, bstar).all_satisfied
    rl = rlinear_report(tr, bstar)
    assert np.all(rl.per_k_margin[rl.proof_onset_k:] >= -1e-8 * rl.scale)
    assert qlinear_report(tr, bstar).all_satisfied


def test_rlinear_global_claim_fails_at_k0():
    # nu in ](3-sqrt5)/2, 1/golden]: the global condition holds but the
    # summation argument only covers k >= 1.  A scalar map that is tight in
    # the class inequality violates the stated bound at k = 0.
    xi, alpha = 0.45, 0.5
    nu = 1 - alpha + alpha * xi**2
    assert R_LINEAR_ALPHA_MIN < nu <= 1 / GOLDEN
    T = Affine(np.array([[1 - alpha - alpha * xi]]))  # K = -xi I
    tr = banach_picard(T, I1, [1.0], cert=AveragedCertificate(xi, alpha, I1))
    rep = rlinear_report(tr, np.zeros(1))
    assert rep.global_regime and rep.proof_onset_k == 1
    assert rep.per_k_margin[0] < -1e-8 * rep.scale
    assert np.all(rep.per_k_margin[1:] >= -1e-8 * rep.scale)
    assert not rep.all_satisfied
