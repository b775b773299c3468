import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landauer_cm.collision import (CollisionEngine, channel_increment, collide,
                                   collision_unitary, cumulative_heat, discrete_marginals,
                                   per_collision_heat, run_discrete, second_order_increment)
from landauer_cm.config import parse_config
from landauer_cm.errors import ArgumentError
from landauer_cm.hilbert import DensityMatrix, Operator, random_density_matrix
from landauer_cm.lindblad import apply_generator, generator_single
from landauer_cm.models import BathSpec, CouplingSpec, xx_interaction


def test_collision_unitary_is_unitary():
    v = xx_interaction().matrix()
    u = collision_unitary(v, 0.3).mat
    assert np.allclose(u @ u.conj().T, np.eye(4))
    assert np.allclose(collision_unitary(v.mat, 0.3).mat, u)


def test_collide_rejects_non_unitary():
    rho = DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ArgumentError):
        collide(rho, rho, Operator(2 * np.eye(4)))
    with pytest.raises(ArgumentError):
        collide(rho, rho, Operator(np.eye(8)))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), xi=st.floats(-0.99, 0.99), y=st.floats(1e-3, 3.0))
def test_collision_map_is_cptp_on_random_inputs(seed, xi, y):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix((2,), rng)
    eta = BathSpec.from_xi(xi).state()
    u = collision_unitary(xx_interaction().matrix(), y)
    out, eta_out = collide(rho, eta, u)
    for r in (out, eta_out):
        assert abs(np.trace(r.mat) - 1) < 1e-12
        assert np.linalg.eigvalsh(r.mat).min() > -1e-12
    # energy exchange is exact: XX commutes with the total free Hamiltonian
    h = BathSpec.from_xi(xi).hamiltonian().mat
    d_sys = np.trace(h @ (out.mat - rho.mat)).real
    assert d_sys + per_collision_heat(eta, eta_out, h) == pytest.approx(0.0, abs=1e-12)


def test_channel_increment_matches_direct_map():
    rng = np.random.default_rng(9)
    rho = random_density_matrix((2,), rng)
    eta = BathSpec.from_xi(0.3).state()
    v = xx_interaction().matrix()
    direct = collide(rho, eta, collision_unitary(v, 0.4))[0].mat - rho.mat
    assert np.allclose(channel_increment(rho, eta, v, 0.4), direct, atol=1e-14)


def test_second_order_term_is_the_generator():
    # y^2 K2 / tau = gamma L with y = g tau and gamma = g^2 tau
    bath = BathSpec.from_xi(0.9)
    g, tau = 3.0, 0.02
    rng = np.random.default_rng(11)
    rho = random_density_matrix((2,), rng)
    k2 = second_order_increment(rho, xx_interaction(), bath.state(), g * tau).mat / tau
    gen = generator_single(bath, CouplingSpec(g=g, tau=tau))
    assert np.allclose(k2, apply_generator(gen, rho), atol=1e-13)


@pytest.mark.parametrize("preset", ["fig1b", "fig1c"])
def test_per_collision_first_law(preset):
    cfg = parse_config("mode = discrete\ncoupling.g = 5\ncoupling.tau = 0.04\n"
                       "time.t_max = 2\n", preset=preset)
    records = run_discrete(cfg)
    assert len(records) == 50
    for rec in records:
        assert rec.delta_E + rec.delta_Q == pytest.approx(0.0, abs=1e-12)
        assert sum(rec.delta_Q_parts) == pytest.approx(rec.delta_Q, abs=1e-15)
    assert cumulative_heat(records)[-1] == pytest.approx(sum(r.delta_Q for r in records))


def test_indirect_collisions_conserve_excitations_with_the_bath():
    cfg = parse_config("mode = discrete\ncoupling.g = 1\ncoupling.tau = 0.1\n"
                       "time.t_max = 5\nfock.dim = 6\n", preset="fig2d")
    records = run_discrete(cfg)
    n_sys = np.kron(np.diag([1, 0]), np.eye(6)) + np.kron(np.eye(2), np.diag(np.arange(6)))
    # excitations leave S only through the sub-environments
    prev = None
    for rec in records:
        n_now = np.trace(n_sys @ rec.rho_after.mat).real
        if prev is not None:
            # bath qubit gains exactly what the system loses
            assert n_now - prev == pytest.approx(-rec.delta_Q, abs=1e-12)
        prev = n_now
    marg = discrete_marginals(records[1:], records[0].rho_after, (2, 6), [0])
    assert marg.shape == (len(records), 2, 2)
    assert np.allclose(np.trace(marg, axis1=1, axis2=2), 1.0)


def test_engine_argument_checks():
    from landauer_cm.scenario import build_setup
    setup = build_setup(parse_config("", preset="fig1b"))
    with pytest.raises(ArgumentError):
        CollisionEngine(setup, 0.0, 0.1)
    with pytest.raises(ArgumentError):
        CollisionEngine(setup, 1.0, 0.1).run(setup.rho0, -1)


def test_run_discrete_is_deterministic():
    cfg = parse_config("mode = discrete\ncoupling.g = 3\ncoupling.tau = 0.05\n"
                       "time.t_max = 1\n", preset="fig1c")
    a, b = run_discrete(cfg), run_discrete(cfg)
    assert all(np.array_equal(x.rho_after.mat, y.rho_after.mat) for x, y in zip(a, b))
    assert math.isclose(a[-1].n * 0.05, 1.0)
