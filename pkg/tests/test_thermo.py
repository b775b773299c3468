import math

import numpy as np
import pytest
from runs import preset_run

from landauer_cm.hilbert import (marginal_entropy, random_density_matrix, relative_entropy,
                                 von_neumann_entropy)
from landauer_cm.lindblad import apply_generator, generator_cascade
from landauer_cm.models import BathSpec, CouplingSpec
from landauer_cm.scenario import reference_state
from landauer_cm.thermo import (cascade_heat_closed_form, detect_violations,
                                entropy_and_rate, entropy_rate, entropy_rates_of_subsets,
                                environment_heat_rate, find_intervals, finite_difference,
                                gibbs_log_partition, heat_rate, landauer_residual,
                                multipartite_terms, radiation_rate, subsystem_heat_rates,
                                violation_tolerance)


def test_entropy_rate_matches_finite_differences():
    cols = preset_run("fig1c").series
    dt = cols["t"][1] - cols["t"][0]
    fd = finite_difference(cols["S"], dt)
    inner = slice(5, -5)
    scale = np.max(np.abs(cols["S_rate"]))
    assert np.max(np.abs(fd[inner] - cols["S_rate"][inner])) < 1e-4 * scale
    fd_a = finite_difference(cols["S_A"], dt)
    assert np.max(np.abs(fd_a[inner] - cols["S_rate_A"][inner])) < 1e-4 * scale


def test_entropy_rate_formula_on_random_states():
    rng = np.random.default_rng(12)
    gen = generator_cascade(2, BathSpec.from_xi(0.5), CouplingSpec(gamma=1))
    rho = random_density_matrix((2, 2), rng).mat
    rd = apply_generator(gen, rho)
    h = 1e-6
    fd = (von_neumann_entropy(rho + h * rd) - von_neumann_entropy(rho - h * rd)) / (2 * h)
    s, rate, floored = entropy_and_rate(rho, rd)
    assert rate == pytest.approx(fd, rel=1e-6)
    assert s == pytest.approx(von_neumann_entropy(rho))
    assert not floored
    sub = entropy_rates_of_subsets(rho, rd, (2, 2), [(0,)])
    fd_a = (marginal_entropy(rho + h * rd, [0], (2, 2))
            - marginal_entropy(rho - h * rd, [0], (2, 2))) / (2 * h)
    assert sub[(0,)] == pytest.approx(fd_a, rel=1e-6)


def test_floored_flag_on_pure_state():
    gen = generator_cascade(2, BathSpec.from_xi(0.9), CouplingSpec(gamma=1))
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    rate, floored = entropy_rate(rho, apply_generator(gen, rho))
    assert floored and rate > 0
    rate, floored = entropy_rate(rho, np.zeros((4, 4)))
    assert not floored and rate == 0


def test_cascade_heat_closed_forms():
    bath = BathSpec.from_xi(0.9)
    gen = generator_cascade(2, bath, CouplingSpec(gamma=1))
    rng = np.random.default_rng(13)
    eta = bath.state()
    for _ in range(10):
        rho = random_density_matrix((2, 2), rng).mat
        rd = apply_generator(gen, rho)
        q, qa, qb = cascade_heat_closed_form(rho, bath, 1.0)
        h_loc = [bath.hamiltonian()] * 2
        h_s = np.kron(h_loc[0].mat, np.eye(2)) + np.kron(np.eye(2), h_loc[1].mat)
        assert q == pytest.approx(heat_rate(rd, h_s), abs=1e-12)
        assert [qa, qb] == pytest.approx(subsystem_heat_rates(rd, (2, 2), h_loc), abs=1e-12)
        assert qa + qb == pytest.approx(q, abs=1e-12)
        from landauer_cm.models import xx_interaction
        env = environment_heat_rate(rho, (2, 2), [0, 1], xx_interaction(), eta,
                                    bath.hamiltonian(), 1.0)
        assert env == pytest.approx(q, abs=1e-12)


def test_initial_heat_flows():
    cols = preset_run("fig1c").series
    # |uu> with xi = 0.9: Q = 4 gamma omega (xi + 1), Q_A = 2 gamma omega (1 + xi)
    assert cols["Q_rate"][0] == pytest.approx(7.6)
    assert cols["Q_rate_A"][0] == pytest.approx(3.8)
    assert np.allclose(cols["Q_rate_closed"], cols["Q_rate"], atol=1e-12)
    assert preset_run("fig1b").series["Q_rate"][0] == pytest.approx(3.8)


def test_radiation_rate():
    up_up = np.zeros((4, 4)); up_up[0, 0] = 1
    assert radiation_rate(up_up, 2) == pytest.approx(2.0)
    assert preset_run("fig1c").series["radiation_rate"][0] == pytest.approx(2.0)
    assert preset_run("fig1b").series["radiation_rate"][0] == pytest.approx(1.0)


def test_oscillator_heat_from_occupations():
    cols = preset_run("fig2d").series
    assert np.allclose(cols["Q_rate_occupation"], cols["Q_rate"], atol=1e-12)
    assert np.max(cols["fock_tail"]) < 1e-8


def test_relative_entropy_column_matches_direct_formula():
    for preset in ("fig1b", "fig1c"):
        res = preset_run(preset)
        ref = reference_state(res.setup).mat
        assert len(res.series["t"]) == len(res.trajectory)
        for i in (100, 500, 2000):
            expected = relative_entropy(res.trajectory.states[i], ref)
            assert res.series["rel_entropy"][i] == pytest.approx(expected, abs=1e-10)
    # beta E - S + ln Z needs no support check for a mixed state either
    res = preset_run("fig1b")
    rho = np.eye(2) / 2
    value = (res.setup.bath.beta * np.trace(res.setup.h_system.mat @ rho).real
             - von_neumann_entropy(rho) + gibbs_log_partition(res.setup))
    assert value == pytest.approx(relative_entropy(rho, reference_state(res.setup)), abs=1e-12)


def test_decomposition_terms():
    rng = np.random.default_rng(21)
    gen = generator_cascade(3, BathSpec.from_xi(0.7), CouplingSpec(gamma=1))
    rho = random_density_matrix((2, 2, 2), rng).mat
    terms = multipartite_terms(rho, apply_generator(gen, rho), (2, 2, 2))
    assert terms.total == pytest.approx(terms.target, abs=1e-12)


def test_residual_and_tolerance():
    assert landauer_residual(2.0, 1.5, -1.0) == pytest.approx(2.0)
    assert np.allclose(landauer_residual(1.0, np.array([1.0, 2.0]), np.array([0.5, -3.0])),
                       [1.5, -1.0])
    assert violation_tolerance(-10, 1, 0.01) == pytest.approx(1e-7)


def test_detect_violations_synthetic():
    t = np.linspace(0, 10, 101)
    vals = np.where((t > 2) & (t < 3), -1.0, 0.1)
    vals[50] = -1.0          # a single-point dip is ignored
    vals[70:72] = -1.0       # so is a two-point dip
    vals[80:83] = -5e-7      # above -tol: not a violation
    intervals = find_intervals(t, vals, tol=1e-6)
    assert len(intervals) == 1
    start, end, worst = intervals[0]
    assert start == pytest.approx(2.1) and end == pytest.approx(2.9) and worst == -1.0
    report = detect_violations("single", t, {"total": vals, "A": np.ones_like(t)}, 1e-6)
    assert report.has_violation("total") and not report.has_violation("A")
    rows = list(report.rows())
    assert len(rows) == 1 and rows[0][0] == "total"


def test_marginal_bound_violations_in_cascade():
    rep = preset_run("fig1c").report
    assert not rep.has_violation("total") and not rep.has_violation("A")
    assert rep.has_violation("B")
    start = rep.intervals["B"][0][0]
    assert 0.4 < start < 0.7


def test_finite_difference_exact_for_polynomials():
    t = np.linspace(0, 1, 11)
    y = t ** 3
    assert np.allclose(finite_difference(y, 0.1)[2:-2], 3 * t[2:-2] ** 2)
    assert math.isclose(finite_difference([0.0, 1.0], 0.5)[0], 2.0)
