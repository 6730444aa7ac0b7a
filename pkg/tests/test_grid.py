import math

import numpy as np
import pytest
from scipy.integrate import quad

import leiblab as ll
from leiblab.errors import ConfigurationError, ContractViolation, DomainError
from leiblab.flux import LeibensonParams, RegLevel
from leiblab.grid import face_fluxes, weighted_l2


def test_uniform_grid_nodes_and_interval_measure():
    g = ll.build_grid(ll.euclidean(1), 1.0, 100)
    assert np.allclose(g.nodes, np.arange(101) / 100.0)
    assert g.total_volume == pytest.approx(2.0, abs=1e-14)


def test_disc_area():
    g = ll.build_grid(ll.euclidean(2), 1.0, 100)
    assert g.total_volume == pytest.approx(math.pi, abs=1e-12)


def test_sinh_grid_volume_against_quadrature():
    g = ll.build_grid(ll.hyperbolic_like(2), 1.0, 200)
    expected, _ = quad(lambda s: 2 * math.pi * math.sinh(s), 0.0, 1.0)
    assert g.total_volume == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("n,grading", [(1, "uniform"), (2, "uniform"), (3, "boundary-refined")])
def test_grid_invariants(n, grading):
    g = ll.build_grid(ll.euclidean(n), 2.0, 64, grading)
    assert np.sum(g.cell_volumes) == pytest.approx(
        ll.volume_of_ball(g.manifold, 2.0), rel=1e-12
    )
    assert np.all(g.cell_volumes[1:] > 0.0)
    if n == 1:
        assert g.cell_volumes[0] > 0.0
    assert np.all(g.face_weights > 0.0)


def test_boundary_refined_places_quarter_of_nodes_outside():
    g = ll.build_grid(ll.euclidean(1), 1.0, 100, "boundary-refined")
    outer = np.count_nonzero(g.nodes >= 0.9)
    assert outer >= 0.25 * 100


def test_build_grid_configuration_errors():
    with pytest.raises(ConfigurationError):
        ll.build_grid(ll.euclidean(1), 1.0, 8)
    with pytest.raises(ConfigurationError):
        ll.build_grid(ll.euclidean(1), -1.0, 100)
    with pytest.raises(ConfigurationError):
        ll.build_grid(ll.euclidean(1), 1.0, 100, "fancy")


def test_state_field_pins_boundary_and_checks_finiteness():
    g = ll.build_grid(ll.euclidean(1), 1.0, 16)
    s = ll.StateField(np.ones(17), 0.0, 0.25)
    assert s.values[-1] == 0.25
    with pytest.raises(ContractViolation):
        ll.StateField(np.full(17, np.nan), 0.0, 0.0)


@pytest.mark.parametrize("mode", ["limit", "regularized"])
def test_constant_states_are_steady(mode):
    g = ll.build_grid(ll.euclidean(2), 1.0, 50)
    params = LeibensonParams(2.7, 1.3)
    reg = RegLevel(100.0) if mode == "regularized" else None
    c = 0.7
    st = ll.StateField(np.full(51, c), 0.0, c)
    L = ll.apply_operator(g, st, params, reg)
    assert np.all(L == 0.0)


def test_laplacian_exact_on_quadratics():
    # p=2, q=1 on u = r^2: the second difference reproduces 2 exactly
    params = LeibensonParams(2.0, 1.0)
    g = ll.build_grid(ll.euclidean(1), 1.0, 100)
    L = ll.apply_operator(g, ll.StateField(g.nodes**2, 0.0, 1.0), params)
    assert np.max(np.abs(L[1:-1] - 2.0)) < 1e-11


def test_laplacian_second_difference_convergence():
    # transcendental profile so the truncation error is genuinely O(h^2)
    params = LeibensonParams(2.0, 1.0)
    errs = []
    for M in (100, 200, 400):
        g = ll.build_grid(ll.euclidean(1), 1.0, M)
        u = np.cos(2.0 * g.nodes)
        L = ll.apply_operator(g, ll.StateField(u, 0.0, float(u[-1])), params)
        exact = -4.0 * np.cos(2.0 * g.nodes)
        errs.append(np.max(np.abs(L[1:-1] - exact[1:-1])))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(orders) >= 1.8
    assert errs[-1] < 1e-3


def test_power_diffusion_symbolic_oracle():
    # p=2, q=2, u = 1 - r^2 on n=1: (u^2)'' = 12 r^2 - 4
    params = LeibensonParams(2.0, 2.0)
    errs = []
    for M in (100, 200, 400):
        g = ll.build_grid(ll.euclidean(1), 1.0, M)
        u = 1.0 - g.nodes**2
        L = ll.apply_operator(g, ll.StateField(u, 0.0, 0.0), params)
        exact = 12.0 * g.nodes**2 - 4.0
        errs.append(np.max(np.abs(L[1:-1] - exact[1:-1])))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    assert min(orders) >= 1.8


def test_degenerate_p_truncation_error_decays_monotonically():
    # p=3, q=1 on u = cos r over (0,1): d/dr(|u'| u') = -sin(2r) on n=1
    params = LeibensonParams(3.0, 1.0)
    errs = []
    for M in (100, 200, 400):
        g = ll.build_grid(ll.euclidean(1), 1.0, M)
        u = np.cos(g.nodes)
        L = ll.apply_operator(g, ll.StateField(u, 0.0, float(u[-1])), params)
        exact = -np.sin(2.0 * g.nodes)
        errs.append(np.max(np.abs(L[1:-1] - exact[1:-1])))
    assert errs[0] > errs[1] > errs[2]


def test_discrete_norm_examples():
    g = ll.build_grid(ll.euclidean(1), 1.0, 100)
    ones = ll.StateField(np.ones(101), 0.0, 1.0)
    assert ll.discrete_norm(g, ones, 1.0) == pytest.approx(2.0, abs=1e-13)
    threes = ll.StateField(np.full(101, 3.0), 0.0, 3.0)
    assert ll.discrete_norm(g, threes, math.inf) == 3.0

    g1000 = ll.build_grid(ll.euclidean(1), 1.0, 1000)
    u = ll.StateField(1.0 - g1000.nodes, 0.0, 0.0)
    exact = math.sqrt(2.0 / 3.0)
    assert abs(ll.discrete_norm(g1000, u, 2.0) - exact) < 1e-4


def test_discrete_norm_rejects_bad_exponent():
    g = ll.build_grid(ll.euclidean(1), 1.0, 16)
    with pytest.raises(DomainError):
        ll.discrete_norm(g, np.ones(17), 0.5)


def test_norm_monotone_in_pointwise_order():
    g = ll.build_grid(ll.euclidean(2), 1.0, 32)
    rng = np.random.default_rng(3)
    lo = rng.uniform(0.0, 1.0, 33)
    hi = lo + rng.uniform(0.0, 1.0, 33)
    for lam in (1.0, 2.0, 3.5, math.inf):
        assert ll.discrete_norm(g, hi, lam) >= ll.discrete_norm(g, lo, lam)


@pytest.mark.parametrize("mode", ["limit", "regularized"])
def test_discrete_divergence_theorem(mode):
    # telescoping: sum of V_i L_i over interior rows equals the flux through
    # the outermost interior face, to roundoff
    g = ll.build_grid(ll.euclidean(3), 2.0, 128)
    params = LeibensonParams(2.6, 1.4)
    reg = RegLevel(50.0) if mode == "regularized" else None
    rng = np.random.default_rng(7)
    u = rng.uniform(0.0, 2.0, 129)
    u[-1] = 0.3
    st = ll.StateField(u, 0.0, 0.3)
    L = ll.apply_operator(g, st, params, reg)
    budget = float(np.sum(g.cell_volumes[:-1] * L[:-1]))
    through = float(face_fluxes(g, st.values, params, reg)[-1])
    assert abs(budget - through) <= 1e-12 * max(abs(through), 1e-300)


def test_apply_operator_size_mismatch():
    g = ll.build_grid(ll.euclidean(1), 1.0, 32)
    with pytest.raises(ContractViolation):
        ll.apply_operator(g, np.ones(10), LeibensonParams(2.0, 1.0))


def test_weighted_l2_matches_norm():
    g = ll.build_grid(ll.euclidean(1), 1.0, 32)
    u = np.linspace(0.0, 1.0, 33)
    assert weighted_l2(g, u) == pytest.approx(ll.discrete_norm(g, u, 2.0), rel=1e-13)
