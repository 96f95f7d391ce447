import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varbf import DeltaInterval, GroupStats, PriorSpec
from varbf.errors import DomainError
from varbf.specfun import gauss_legendre
from varbf.two_sample import (
    jeffreys_bf01_1939,
    joint_posterior_pdf,
    log_bf10,
    log_bf_directed,
    log_delta_mass,
    log_ml_h0,
    log_ml_h1,
    posterior_delta_pdf,
    posterior_rho_pdf,
    prior_delta_pdf,
)

# log marginal likelihoods from 40-digit mpmath quadrature over rho (varbf.verify.quad_ml_two)
ORACLE_ML = [
    ((5, 3.0, 7, 9.5, 0.5), -17.74120258825363),
    ((990, 783.3869, 990, 949.8356, 0.5), -2684.5340408556144),
    ((2, 0.4, 3, 2.0, 1.0), -4.265417375746284),
    ((40, 12.0, 12, 30.0, 2.5), -60.192846501657485),
    ((300, 10.0, 3, 50.0, 0.5), 69.10173135112913),
    ((10, 8.0, 12, 15.0, 0.5), -33.58695745133972),
]

LASER = GroupStats.from_sd(990, 0.89)
DIGITIZER = GroupStats.from_sd(990, 0.98)

stats = st.builds(
    lambda n, ss: GroupStats(n, ss),
    st.integers(2, 400),
    st.floats(1e-3, 1e3),
)


@pytest.mark.parametrize("args,expected", ORACLE_ML)
def test_ml_h1_matches_quadrature(args, expected):
    n1, s1, n2, s2, a = args
    assert log_ml_h1(GroupStats(n1, s1), GroupStats(n2, s2), PriorSpec(a)) == pytest.approx(expected, abs=1e-8)


def test_ml_h0_matches_direct_formula():
    # 40-digit evaluation of the equal-variance marginal likelihood
    assert log_ml_h0(GroupStats(3, 2.0), GroupStats(3, 2.0)) == pytest.approx(-6.1606607826066915, abs=1e-12)


def test_degenerate_inputs():
    with pytest.raises(DomainError):
        log_ml_h0(GroupStats(1, 0.0), GroupStats(1, 0.0))
    with pytest.raises(DomainError):
        log_bf10(GroupStats(5, 0.0), GroupStats(5, 1.0))


def test_predictive_matching():
    assert log_bf10(GroupStats(1, 0.0), GroupStats(1, 0.0)).log_bf == 0.0
    assert log_bf10(GroupStats(2, 3.7), GroupStats(1, 0.0)).log_bf == pytest.approx(0.0, abs=1e-13)
    assert log_bf10(GroupStats(1, 0.0), GroupStats(2, 0.01)).log_bf == pytest.approx(0.0, abs=1e-13)


def test_bf_diverges_as_one_group_collapses():
    ratios = (1e-2, 1e-4, 1e-8, 1e-12, 1e-20, 1e-100)
    values = [log_bf10(GroupStats(2, r), GroupStats(2, 1.0)).log_bf for r in ratios]
    assert all(b > a for a, b in zip(values, values[1:]))
    # with n1 = n2 = 2 and alpha = 1/2 the Bayes factor is -ln(R) (1+R) / ((1-R) pi)
    for r, v in zip(ratios, values):
        assert v == pytest.approx(math.log(-math.log(r) * (1 + r) / ((1 - r) * math.pi)), rel=1e-8)


def test_strong_evidence_for_larger_male_variability():
    women = GroupStats(969, 968 * 15.6)
    men = GroupStats(716, 715 * 19.9)
    assert log_bf10(women, men, PriorSpec(4.5)).bf > 10


@settings(max_examples=60, deadline=None)
@given(g1=stats, g2=stats, alpha=st.floats(0.1, 20))
def test_label_invariance(g1, g2, alpha):
    a = log_bf10(g1, g2, PriorSpec(alpha)).log_bf
    b = log_bf10(g2, g1, PriorSpec(alpha)).log_bf
    assert a == pytest.approx(b, abs=1e-10 * max(1, abs(a)))


@settings(max_examples=60, deadline=None)
@given(g1=stats, g2=stats, scale=st.floats(1e-3, 1e3))
def test_measurement_invariance(g1, g2, scale):
    a = log_bf10(g1, g2).log_bf
    b = log_bf10(GroupStats(g1.n, g1.ss * scale), GroupStats(g2.n, g2.ss * scale)).log_bf
    assert a == pytest.approx(b, abs=1e-10 * max(1, abs(a)))


def test_unequal_prior_swaps_with_labels():
    g1, g2 = GroupStats(8, 5.0), GroupStats(15, 20.0)
    a = log_bf10(g1, g2, PriorSpec(0.7, 3.0)).log_bf
    b = log_bf10(g2, g1, PriorSpec(3.0, 0.7)).log_bf
    assert a == pytest.approx(b, abs=1e-12)


def test_large_alpha_shrinks_towards_null():
    g = GroupStats(20, 10.0)
    values = [log_bf10(g, g, PriorSpec(a)).log_bf for a in (1, 10, 100, 1e4)]
    assert all(v < 0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] > -0.01


def test_laser_directed_values():
    # frozen from the logit-panel quadrature
    plus = log_bf_directed(LASER, DIGITIZER, PriorSpec(), DeltaInterval(1.0))
    assert plus.method == "quadrature"
    assert plus.bf == pytest.approx(4.926413692377272, rel=1e-9)
    interval = log_bf_directed(LASER, DIGITIZER, PriorSpec(), DeltaInterval(0.9, 1.1), DeltaInterval(1.1))
    assert interval.bf == pytest.approx(7.032083058368005, rel=1e-9)


def test_full_interval_equals_closed_form():
    g1, g2 = GroupStats(12, 4.0), GroupStats(9, 11.0)
    full = log_bf_directed(g1, g2, PriorSpec(1.3), DeltaInterval(0.0)).log_bf
    assert full == pytest.approx(log_bf10(g1, g2, PriorSpec(1.3)).log_bf, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(g1=stats, g2=stats, cut=st.floats(0.2, 5.0), alpha=st.floats(0.2, 10))
def test_directed_bfs_average_to_the_two_sided_bf(g1, g2, cut, alpha):
    prior = PriorSpec(alpha)
    lo, hi = DeltaInterval(0.0, cut), DeltaInterval(cut)
    mix = np.logaddexp(
        log_delta_mass(lo, prior) + log_bf_directed(g1, g2, prior, lo).log_bf,
        log_delta_mass(hi, prior) + log_bf_directed(g1, g2, prior, hi).log_bf,
    )
    full = log_bf10(g1, g2, prior).log_bf
    assert mix == pytest.approx(full, abs=1e-8 * max(1, abs(full)))


def test_identical_intervals_and_overlaps():
    iv = DeltaInterval(0.8, 1.3)
    assert log_bf_directed(LASER, DIGITIZER, PriorSpec(), iv, iv).log_bf == 0.0
    with pytest.raises(DomainError):
        log_bf_directed(LASER, DIGITIZER, PriorSpec(), DeltaInterval(0.5, 1.2), DeltaInterval(1.0, 2.0))


def test_posterior_rho_value_and_normalization():
    g1, g2 = GroupStats(10, 8.0), GroupStats(12, 15.0)
    # normalizer from 40-digit quadrature
    assert posterior_rho_pdf(0.3, g1, g2) == pytest.approx(0.4636947846089386, rel=1e-8)
    rule = gauss_legendre(400)
    assert rule.integrate(lambda r: posterior_rho_pdf(r, g1, g2), 0.0, 1.0) == pytest.approx(1.0, abs=1e-8)


def test_posterior_rho_symmetric_inputs():
    g = GroupStats(9, 6.0)
    r = np.array([0.1, 0.27, 0.45])
    assert np.allclose(posterior_rho_pdf(r, g, g), posterior_rho_pdf(1 - r, g, g), rtol=1e-12)


def test_delta_densities_integrate_to_one():
    u = np.linspace(-12, 12, 200001)
    d = np.exp(u)
    for g1, g2, a in [(LASER, DIGITIZER, 0.5), (GroupStats(6, 2.0), GroupStats(4, 9.0), 3.0)]:
        prior = PriorSpec(a)
        post = np.trapezoid(posterior_delta_pdf(d, g1, g2, prior) * d, u)
        assert post == pytest.approx(1.0, abs=1e-6)
    prior_mass = np.trapezoid(prior_delta_pdf(d, PriorSpec(4.5)) * d, u)
    assert prior_mass == pytest.approx(1.0, abs=1e-6)


def test_delta_density_change_of_variables():
    g1, g2, prior = GroupStats(14, 5.0), GroupStats(11, 9.0), PriorSpec(0.8)
    for d in (0.3, 0.9, 1.0, 1.7, 4.0):
        rho = d * d / (1 + d * d)
        jac = 2 * d / (1 + d * d) ** 2
        assert posterior_delta_pdf(d, g1, g2, prior) == pytest.approx(posterior_rho_pdf(rho, g1, g2, prior) * jac, rel=1e-10)


def test_joint_posterior_marginalizes_to_rho_density():
    g1, g2 = GroupStats(7, 3.0), GroupStats(9, 8.0)
    t = np.linspace(1e-6, 40, 400001)
    for rho in (0.2, 0.5, 0.8):
        marg = np.trapezoid(joint_posterior_pdf(rho, t, g1, g2), t)
        assert marg == pytest.approx(posterior_rho_pdf(rho, g1, g2), rel=1e-6)


def test_jeffreys_plug_in():
    g = GroupStats.from_sd(12, 1.7)
    assert jeffreys_bf01_1939(g, g) == pytest.approx(22**1.5 / (2 * math.sqrt(121 * math.pi)), rel=1e-12)
    a, b = GroupStats.from_sd(12, 1.2), GroupStats.from_sd(12, 2.1)
    assert jeffreys_bf01_1939(a, b) == pytest.approx(jeffreys_bf01_1939(b, a), rel=1e-12)
