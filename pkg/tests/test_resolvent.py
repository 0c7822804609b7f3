import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmetric.battery import random_pd_nonsymmetric, random_spd, rng_for, strongly_monotone_matrix
from qmetric.calculus import fclass_gap
from qmetric.certify import PropertyKind, certify, certify_complement_partly_nonexpansive
from qmetric.errors import (
    MetricStructureError,
    RuleNotApplicable,
    SingularResolvent,
    UnsupportedPairing,
)
from qmetric.fixed_point import qlinear_report, reference_fixed_point
from qmetric.functions import BoxIndicator, Quadratic, ScaledL1
from qmetric.metric import Metric
from qmetric.resolvent import (
    AffineMonotone,
    ResolventHandle,
    ScaledStrong,
    Subdifferential,
    complement_certificate,
    monotone_from_spec,
    ppa,
    resolvent_apply,
    resolvent_certificate,
    rppa,
)

I1, I2 = Metric.identity(1), Metric.identity(2)


def test_apply_examples(rng):
    r = ResolventHandle(AffineMonotone(np.eye(2)), I2)
    np.testing.assert_allclose(resolvent_apply(r, [2.0, -4.0]), [1.0, -2.0], rtol=1e-15)
    tau = 0.5
    r = ResolventHandle(Subdifferential(ScaledL1(2.0), 2), Metric.scalar(1 / tau, 2))
    np.testing.assert_array_equal(resolvent_apply(r, [2.0, -0.5]), [1.0, 0.0])
    q = random_spd(3, rng)
    b = rng.standard_normal(3)
    r = ResolventHandle(AffineMonotone(np.zeros((3, 3))), Metric(q))
    np.testing.assert_allclose(resolvent_apply(r, b), b, rtol=1e-12, atol=1e-14)


def test_strong_shift_prox():
    # 0 ∈ ∂|z| + z + (z - b): z = soft(b/2, 1/2)
    r = ResolventHandle(ScaledStrong(Subdifferential(ScaledL1(1.0), 1), 1.0), I1)
    np.testing.assert_allclose(r([3.0]), [1.0])
    assert r.a.mu == 1.0


def test_errors():
    with pytest.raises(UnsupportedPairing):
        ResolventHandle(Subdifferential(ScaledL1(1.0), 2), Metric(np.array([[2.0, 0.5], [0.5, 1.0]])))
    with pytest.raises(MetricStructureError):
        ResolventHandle(AffineMonotone(np.eye(2)), Metric(np.diag([1.0, 0.0])))
    with pytest.raises(ValueError):
        AffineMonotone(-np.eye(2))
    with pytest.raises(SingularResolvent):
        # only reachable when the structure tolerance admits a nearly singular Q
        ResolventHandle(AffineMonotone(np.zeros((2, 2))), Metric(np.diag([1.0, 1e-16]), sym_tolerance=1e-20))


def test_affine_mu():
    assert AffineMonotone(np.diag([0.5, 2.0])).mu == 0.5
    assert AffineMonotone(np.array([[0.0, 1.0], [-1.0, 0.0]])).mu == 0.0


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["affine", "l1", "box", "quad", "strong"]))
def test_inclusion_residual(seed, kind):
    rng = rng_for(seed)
    n = 3
    if kind == "affine":
        r = ResolventHandle(AffineMonotone(strongly_monotone_matrix(n, 0.0, rng), rng.standard_normal(n)),
                            Metric(random_pd_nonsymmetric(n, rng)))
    else:
        func = {"l1": ScaledL1(1.3), "box": BoxIndicator(-1.0, 2.0), "quad": Quadratic(rng.standard_normal(n)),
                "strong": ScaledL1(0.7)}[kind]
        a = Subdifferential(func, n)
        if kind == "strong":
            a = ScaledStrong(a, 0.4)
        r = ResolventHandle(a, Metric.scalar(rng.uniform(0.2, 5.0), n))
    for b in rng.uniform(-10, 10, (20, n)):
        z = r(b)
        assert r.inclusion_residual(b, z) <= 1e-9 * (1 + np.linalg.norm(b))


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_partly_nonexpansive_any_pd_metric(seed):
    rng = rng_for(seed)
    m = Metric(random_pd_nonsymmetric(3, rng))
    r = ResolventHandle(AffineMonotone(strongly_monotone_matrix(3, 0.0, rng)), m)
    assert certify(r, m, PropertyKind.partly_nonexpansive(), seed=seed).passed
    assert certify_complement_partly_nonexpansive(r, m, seed=seed).passed


def test_certificate_examples():
    r = ResolventHandle(AffineMonotone(np.eye(2)), I2)
    c = resolvent_certificate(r)
    assert (c.xi, c.alpha) == (1 / 3, 3 / 4)
    assert c.provenance.rule == "sec4_resolvent"
    # T = ½ I = (1 - 3/4) I + 3/4 (1/3 I)
    assert abs((1 - c.alpha) + c.alpha * c.xi - 0.5) <= 1e-15
    assert complement_certificate(r).parameters() == {"xi": 1.0, "alpha": 0.25}
    r0 = ResolventHandle(AffineMonotone(np.array([[0.0, 1.0], [-1.0, 0.0]])), Metric(random_spd(2, rng_for(0))))
    assert resolvent_certificate(r0).parameters() == {"xi": 1.0, "alpha": 0.5}
    rn = ResolventHandle(AffineMonotone(np.eye(2)), Metric(np.array([[1.0, 0.5], [-0.5, 1.0]])))
    with pytest.raises(MetricStructureError):
        resolvent_certificate(rn)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 2.0))
def test_strong_certificate_gap(seed, mu):
    rng = rng_for(seed)
    m = Metric(random_spd(4, rng))
    r = ResolventHandle(AffineMonotone(strongly_monotone_matrix(4, mu, rng)), m)
    c = resolvent_certificate(r)
    cc = complement_certificate(r)
    for b1, b2 in rng.uniform(-10, 10, (1000, 2, 4)):
        g, s = fclass_gap(r, m, c, b1, b2, with_scale=True)
        assert g >= -1e-8 * s
        g, s = fclass_gap(cc.operator, m, cc, b1, b2, with_scale=True)
        assert g >= -1e-8 * s


def test_ppa_examples():
    r = ResolventHandle(AffineMonotone(np.eye(1)), I1)
    tr = ppa(r, [1.0], max_iter=4, stop_tol=1e-30)
    assert list(tr.iterates[:, 0]) == [1.0, 0.5, 0.25, 0.125, 0.0625]
    tr = ppa(ResolventHandle(AffineMonotone(np.zeros((1, 1))), I1), [3.0])
    assert tr.K == 1 and tr.q_seq_err[0] == 0.0
    r = ResolventHandle(Subdifferential(ScaledL1(1.0), 1), I1)
    tr = ppa(r, [0.4])
    assert tr.iterates[1, 0] == 0.0


def test_rppa_examples():
    r = ResolventHandle(AffineMonotone(np.eye(1)), I1)
    tr = rppa(r, 1.5, [1.0], max_iter=2, stop_tol=1e-30)
    np.testing.assert_allclose(tr.iterates[:, 0], [1.0, 0.25, 0.0625], rtol=1e-15)
    a, b = ppa(r, [1.0]), rppa(r, 1.0, [1.0])
    assert a.iterates.tobytes() == b.iterates.tobytes()
    with pytest.raises(RuleNotApplicable):
        rppa(r, 2.0, [1.0])


def test_ppa_qlinear_strong(rng):
    m = Metric(random_spd(4, rng))
    r = ResolventHandle(AffineMonotone(strongly_monotone_matrix(4, 0.8, rng), rng.standard_normal(4)), m)
    tr = ppa(r, rng.standard_normal(4))
    c = resolvent_certificate(r)
    rep = qlinear_report(tr, reference_fixed_point(r, m))
    assert rep.nu == pytest.approx(1 - c.alpha + c.alpha * c.xi**2, rel=1e-15)
    assert rep.all_satisfied and rep.max_observed_ratio <= rep.nu


def test_monotone_from_spec():
    a = monotone_from_spec({"kind": "scaled_strong", "mu": 0.5,
                            "base": {"kind": "subdifferential", "function": {"kind": "l1", "lam": 2.0}}}, 3)
    assert isinstance(a, ScaledStrong) and a.n == 3 and a.mu == 0.5
    a = monotone_from_spec({"kind": "affine", "matrix": [[1.0, 0.0], [0.0, 2.0]], "offset": [1, 1]})
    assert a.mu == 1.0
    with pytest.raises(ValueError):
        monotone_from_spec({"kind": "bogus"})
