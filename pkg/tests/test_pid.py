"""Discrete PID law: hand-rolled difference-equation oracle, componentwise
decentralized behavior, linearity, anti-windup clamping, and tuning-form
conversion."""

import math

import numpy as np
import pytest

from pidlab.errors import ConfigurationError, InvalidInputError, InvalidParameterError
from pidlab.pid import (
    MimoPidGains,
    PidGains,
    PidState,
    gains_from_dict,
    gains_to_dict,
    mimo_pid_step,
    pid_step,
    zn_form_to_gain_form,
)


def rolled_response(gains, errors, windup_limit=None):
    """Independent hand-roll of the difference equation."""
    integral = 0.0
    prev = 0.0
    us = []
    for e in errors:
        integral += e
        if windup_limit is not None:
            integral = min(max(integral, -windup_limit), windup_limit)
        us.append(gains.kp * e + gains.ki * integral + gains.kd * (e - prev))
        prev = e
    return us


def run_sequence(gains, errors, windup_limit=None):
    state = PidState()
    us = []
    for e in errors:
        u, state = pid_step(gains, state, e, windup_limit)
        us.append(u)
    return us, state


def test_zero_error_fresh_state_gives_zero():
    u, _ = pid_step(PidGains(3.0, 2.0, 1.0), PidState(), 0.0)
    assert u == 0.0


def test_pure_proportional():
    u, _ = pid_step(PidGains(1.0, 0.0, 0.0), PidState(), 0.5)
    assert u == 0.5


def test_unit_gains_two_ones():
    # kp=ki=kd=1 on e = [1, 1]: u(0) = 1+1+1, u(1) = 1+2+0.
    us, _ = run_sequence(PidGains(1.0, 1.0, 1.0), [1.0, 1.0])
    assert us == [3.0, 3.0]


@pytest.mark.parametrize("seed", range(4))
def test_matches_hand_rolled_difference_equation(seed):
    rng = np.random.default_rng(seed)
    gains = PidGains(*rng.uniform(-3, 3, size=3))
    errors = list(rng.uniform(-2, 2, size=60))
    us, _ = run_sequence(gains, errors)
    assert us == pytest.approx(rolled_response(gains, errors), abs=1e-15)


def test_rejects_non_finite_error():
    with pytest.raises(InvalidInputError):
        pid_step(PidGains(1, 0, 0), PidState(), math.nan)


def test_gains_must_be_finite():
    with pytest.raises(InvalidInputError):
        PidGains(math.inf, 0.0, 0.0)


def test_linearity_in_error_and_state():
    gains = PidGains(1.7, 0.4, 2.3)
    u1, _ = pid_step(gains, PidState(integral=0.3, prev_error=-0.2), 0.9)
    u2, _ = pid_step(gains, PidState(integral=0.6, prev_error=-0.4), 1.8)
    assert u2 == pytest.approx(2 * u1, rel=1e-12)


def test_memory_transparent_without_i_and_d():
    gains = PidGains(2.5, 0.0, 0.0)
    state = PidState(integral=123.0, prev_error=-9.0)
    u, _ = pid_step(gains, state, 0.4)
    assert u == 2.5 * 0.4


def test_windup_clamps_integral_every_step():
    rng = np.random.default_rng(5)
    gains = PidGains(0.5, 1.0, 0.1)
    state = PidState()
    for e in rng.uniform(0.5, 2.0, size=40):  # persistently positive error
        _, state = pid_step(gains, state, float(e), windup_limit=1.5)
        assert abs(state.integral) <= 1.5


def test_reset_reproduces_output_sequence():
    rng = np.random.default_rng(9)
    gains = PidGains(1.2, 0.3, 0.7)
    errors = list(rng.uniform(-1, 1, size=30))
    first, state = run_sequence(gains, errors)
    assert state.reset() == PidState()
    second, _ = run_sequence(gains, errors)
    assert first == second


# -- decentralized form ----------------------------------------------------------


def test_mimo_zero_errors():
    gains = MimoPidGains(loops=(PidGains(1, 1, 1), PidGains(2, 2, 2)))
    states = (PidState(), PidState())
    u, _ = mimo_pid_step(gains, states, (0.0, 0.0))
    assert u == (0.0, 0.0)


def test_mimo_identical_loops_symmetric():
    g = PidGains(1.3, 0.2, 0.4)
    gains = MimoPidGains(loops=(g, g))
    u, _ = mimo_pid_step(gains, (PidState(), PidState()), (0.7, 0.7))
    assert u[0] == u[1]


def test_mimo_equals_componentwise_scalar_steps():
    rng = np.random.default_rng(2)
    gains = MimoPidGains(loops=(PidGains(*rng.uniform(0, 2, 3)), PidGains(*rng.uniform(0, 2, 3))))
    limits = (1.0, 2.0)
    seq = [tuple(rng.uniform(-1, 1, size=2)) for _ in range(25)]
    states = (PidState(), PidState())
    outs = []
    for e in seq:
        u, states = mimo_pid_step(gains, states, e, windup_limits=limits)
        outs.append(u)
    per_loop = []
    for i in range(2):
        s = PidState()
        col = []
        for e in seq:
            ui, s = pid_step(gains.loops[i], s, e[i], limits[i])
            col.append(ui)
        per_loop.append(col)
    for k, u in enumerate(outs):
        assert u == (per_loop[0][k], per_loop[1][k])


def test_mimo_loop_output_ignores_other_errors():
    gains = MimoPidGains(loops=(PidGains(1, 0, 0), PidGains(1, 0, 0)))
    u_a, _ = mimo_pid_step(gains, (PidState(), PidState()), (0.5, 100.0))
    u_b, _ = mimo_pid_step(gains, (PidState(), PidState()), (0.5, -100.0))
    assert u_a[0] == u_b[0]


def test_mimo_length_mismatch():
    gains = MimoPidGains(loops=(PidGains(1, 0, 0), PidGains(1, 0, 0)))
    with pytest.raises(ConfigurationError):
        mimo_pid_step(gains, (PidState(),), (0.1, 0.2))
    with pytest.raises(ConfigurationError):
        mimo_pid_step(gains, (PidState(), PidState()), (0.1,))


# -- tuning-form conversion --------------------------------------------------------


def test_zn_form_standard_conversion():
    g = zn_form_to_gain_form(2.4, 1.0, 0.25)
    assert (g.kp, g.ki, g.kd) == (2.4, 2.4, 0.6)


def test_zn_form_infinite_ti_is_pure_p():
    g = zn_form_to_gain_form(1.0, math.inf, 0.0)
    assert (g.kp, g.ki, g.kd) == (1.0, 0.0, 0.0)


def test_zn_form_zero_kp():
    g = zn_form_to_gain_form(0.0, 2.0, 0.5)
    assert (g.kp, g.ki, g.kd) == (0.0, 0.0, 0.0)


def test_zn_form_rejects_nonpositive_ti():
    with pytest.raises(InvalidParameterError):
        zn_form_to_gain_form(1.0, 0.0, 0.1)
    with pytest.raises(InvalidParameterError):
        zn_form_to_gain_form(1.0, -2.0, 0.1)


def test_gains_dict_round_trip():
    g = PidGains(1.5, 0.25, 0.75)
    assert gains_from_dict(gains_to_dict(g)) == g
