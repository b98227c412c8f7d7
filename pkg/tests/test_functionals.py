import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from perctopo.complexes import RuleDescriptor
from perctopo.functionals import (ConstantObservable, EdgeOpenObservable, FunctionalSpec,
                                  InverseLocalClusterSize, clt_harness, difference, ergodic_average,
                                  estimate_sigma2, evaluate, evaluate_reference, flip_difference,
                                  ks_statistic, sample_functional, stabilization_scan,
                                  standardized_report, variance_scaling)
from perctopo.geometry import ball
from perctopo.groups import GroupElement, GroupModel
from perctopo.homology import ContractError
from perctopo.ordering import EdgeOrderContext
from perctopo.percolation import sample_configuration

from .conftest import ALL_MODELS

K = FunctionalSpec("ClusterCount")
ISO = FunctionalSpec("IsolatedVertices")
PER = FunctionalSpec("TotalPerimeter")
OPEN = FunctionalSpec("OpenEdgeCount")
B1 = FunctionalSpec.betti(RuleDescriptor("clique"), 1)
LOCAL = [K, ISO, PER, OPEN]


def test_unknown_kind():
    with pytest.raises(ValueError):
        FunctionalSpec("Mass")
    with pytest.raises(ValueError):
        FunctionalSpec("Betti")


def test_all_closed_path(z1):
    A = ball(z1, 4)
    omega = sample_configuration(2.0**-40, 0)
    assert evaluate(K, omega, A) == 9
    assert evaluate(ISO, omega, A) == 9
    assert evaluate(PER, omega, A) == 2 * (9 - 1)
    assert evaluate(OPEN, omega, A) == 0


def test_all_open_path(z1):
    A = ball(z1, 4)
    omega = sample_configuration(1 - 2.0**-40, 0)
    assert evaluate(K, omega, A) == 1
    assert evaluate(ISO, omega, A) == 0
    assert evaluate(PER, omega, A) == 0
    assert evaluate(OPEN, omega, A) == 8


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_batched_matches_reference(model):
    A = ball(model, 3)
    for seed in range(15):
        omega = sample_configuration(0.5, seed)
        for F in LOCAL:
            assert evaluate(F, omega, A) == evaluate_reference(F, omega, A)


def test_constant_functional(z2):
    F = FunctionalSpec("Constant", value=7)
    assert evaluate(F, sample_configuration(0.3, 1), ball(z2, 3)) == 7


@pytest.mark.parametrize("F", [K, ISO, OPEN], ids=lambda f: f.label)
def test_flip_difference_bounded(F, z2):
    A = ball(z2, 3)
    rnd = random.Random(0)
    limit = 2 if F is ISO else 1
    for t in range(200):
        omega = sample_configuration(0.5, t)
        e = A.edges.endpoints(rnd.randrange(len(A.edges)))
        d = flip_difference(F, omega, e, A)
        assert abs(d) <= limit
        if F is K:
            assert d in (-1, 0)


def test_perimeter_flip_on_bridge(z1):
    # closing a bridge turns every closed edge between the halves into a double count
    A = ball(z1, 3)
    omega = sample_configuration(1 - 2.0**-40, 0)
    e = (GroupElement((0,)), GroupElement((1,)))
    assert flip_difference(PER, omega, e, A) == -2


def test_difference_zero_when_state_kept(z2):
    A = ball(z2, 2)
    omega = sample_configuration(0.5, 2)
    e = A.edges.endpoints(0)
    seen = set()
    for aux in range(40):
        omega_e = omega.with_state(e, omega.state(e))
        assert flip_difference(K, omega_e, e, A) == flip_difference(K, omega, e, A)
        seen.add(difference(K, omega, e, A, aux))
    assert seen <= {-1, 0, 1}
    assert 0 in seen


def test_stationarity_of_mean(z2, heis):
    # E[K(B_r)] does not depend on the centre
    for model in (z2, heis):
        u = model.word_to_element([0, 2, 0])
        A0, Au = ball(model, 3), ball(model, 3, center=u)
        a = sample_functional(K, 0.5, A0, 3000, 1)
        b = sample_functional(K, 0.5, Au, 3000, 50_000)
        se = np.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) <= 4 * se


def test_translation_invariance_pathwise(heis):
    omega = sample_configuration(0.5, 5, model=heis)
    u = heis.word_to_element([1, 2, 2, 0])
    A = ball(heis, 3)
    uA = ball(heis, 3, center=u)
    moved = omega.translated(heis, u)
    for F in LOCAL:
        assert evaluate(F, omega, A) == evaluate(F, moved, uA)


def test_stabilization_scan_local_functional(z2):
    e = (GroupElement((0, 0)), GroupElement((1, 0)))
    res = stabilization_scan(K, e, 3, [1, 2, 3, 4, 5, 6], 0.5, z2)
    assert res.stabilized
    assert [r for r, _ in res.history] == [1, 2, 3, 4, 5, 6]
    with pytest.raises(ValueError):
        stabilization_scan(K, e, 3, [3, 2], 0.5, z2)


def test_sigma2_of_constant_is_zero(z2):
    est = estimate_sigma2(FunctionalSpec("Constant", value=3), 0.5, EdgeOrderContext(z2), 2, 20, 5,
                          stab_radius=1)
    assert est.sigma2 == 0.0 and est.sigma2_b == 0.0


def test_sigma2_open_edge_count(z1):
    # D_e is the difference of two independent bits; E[D_e | past] = b - p
    est = estimate_sigma2(OPEN, 0.5, EdgeOrderContext(z1), 2, 800, 20, stab_radius=1, seed=2)
    assert abs(est.sigma2 - 0.25) <= 4 * est.sigma2_se
    assert est.sigma2_b == pytest.approx(est.sigma2)


def test_sigma2_contract(z2):
    with pytest.raises(ContractError):
        estimate_sigma2(K, 0.5, EdgeOrderContext(z2), 2, 5, 5, stab_radius=3)


def test_sigma2_workers_identical(zc2):
    ctx = EdgeOrderContext(zc2)
    a = estimate_sigma2(K, 0.5, ctx, 3, 30, 8, stab_radius=2, seed=1, workers=1)
    b = estimate_sigma2(K, 0.5, ctx, 3, 30, 8, stab_radius=2, seed=1, workers=3)
    assert a.per_edge == b.per_edge
    assert len(a.per_edge) == 6


def test_ks_matches_scipy():
    z = np.random.default_rng(4).normal(size=500)
    assert ks_statistic(z) == pytest.approx(stats.kstest(z, "norm").statistic, abs=1e-12)


def test_degenerate_report():
    rep = standardized_report(np.full(200, 3))
    assert rep.degenerate and rep.ks_stat is None


def test_clt_harness_open_edges(z2):
    rep = clt_harness(OPEN, 0.5, z2, 8, 2000, 0)
    assert not rep.degenerate
    assert abs(rep.mean) < 1e-9 and rep.variance == pytest.approx(1.0)
    assert rep.ks_stat < 0.05
    with pytest.raises(ValueError):
        clt_harness(OPEN, 0.5, z2, 8, 50, 0)


def test_clt_by_volume(z2):
    A = ball(z2, 8)
    b = A.edges.count_b
    # Var(OpenEdgeCount) = b p (1 - p), so sigma2 per vertex is that over |B|
    rep = clt_harness(OPEN, 0.5, z2, 8, 2000, 0, normalization="ByVolume", sigma2=0.25 * b / len(A))
    assert rep.variance == pytest.approx(1.0, abs=0.1)


def test_variance_scaling_rows(z1):
    rows = variance_scaling(OPEN, 0.5, z1, [5, 10], 2000, 3)
    for row in rows:
        assert row.double_count_ok
        assert row.b_r == 2 * row.r
        assert row.var_per_edge == pytest.approx(0.25, rel=0.1)


def test_sample_functional_workers_identical(z2):
    A = ball(z2, 4)
    a = sample_functional(K, 0.5, A, 1200, 9, workers=1)
    b = sample_functional(K, 0.5, A, 1200, 9, workers=4)
    assert np.array_equal(a, b)


def test_ergodic_average_edge_indicator(z2):
    A = ball(z2, 40)
    omega = sample_configuration(0.3, 11)
    res = ergodic_average(EdgeOpenObservable(z2.generators[0]), omega, A)
    assert res.skipped > 0
    assert abs(float(res.value) - 0.3) < 0.03


def test_ergodic_average_constant_and_cluster(z1):
    A = ball(z1, 50)
    omega = sample_configuration(0.5, 1)
    assert ergodic_average(ConstantObservable(Fraction(2, 3)), omega, A).value == Fraction(2, 3)
    res = ergodic_average(InverseLocalClusterSize(1), omega, A)
    assert res.used == len(A) - 2
    assert Fraction(1, 3) <= res.value <= 1


def test_betti_functional_evaluates(z2):
    A = ball(z2, 2)
    omega = sample_configuration(0.9, 4)
    assert evaluate(B1, omega, A) >= 0
    m = GroupModel.Zd(2)
    assert B1.rule.dim_cap >= 2 and m.degree == 4
