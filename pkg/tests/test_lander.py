import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modeswitch.errors import (
    InvalidInitialState, NonDifferentiablePoint, StepOnTerminalState,
)
from modeswitch.lander import (
    Action, EnvConfig, LanderEnv, LanderState, PhysicsParams, RewardConfig,
    TerminalEvent, WorldConfig, advance, dynamics, dynamics_effective,
    dynamics_jacobians, env_config_from_mapping, env_config_to_mapping,
    gate_action, leg_tip_heights, load_env_config, observe, reward,
    save_env_config, step,
)

PARAMS = PhysicsParams()


def reference_derivative(state, m_eff, s_eff, p):
    """Independent scalar transcription of the analytic model."""
    x, y, vx, vy, ang, w = state
    return [
        vx,
        vy,
        (-math.sin(ang) * m_eff * p.main_thrust
         + math.cos(ang) * s_eff * p.side_thrust) / p.mass,
        (math.cos(ang) * m_eff * p.main_thrust
         + math.sin(ang) * s_eff * p.side_thrust - p.gravity) / p.mass,
        w,
        p.torque_scale * s_eff / p.inertia,
    ]


class TestGateAction:
    def test_negative_main_is_off(self):
        assert gate_action(Action(-0.3, 0.0)) == (0.0, 0.0)

    def test_full_main(self):
        assert gate_action(Action(1.0, 0.0)) == (1.0, 0.0)

    def test_side_has_no_deadzone(self):
        assert gate_action(Action(0.0, 0.2))[1] == 0.2

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_ranges(self, u1, u2):
        m, s = gate_action(Action(u1, u2))
        assert 0.0 <= m <= 1.0
        assert -1.0 <= s <= 1.0


class TestAction:
    @given(st.floats(allow_nan=False, allow_infinity=False),
           st.floats(allow_nan=False, allow_infinity=False))
    def test_clamped_on_construction(self, u1, u2):
        a = Action(u1, u2)
        assert -1.0 <= a.main <= 1.0
        assert -1.0 <= a.side <= 1.0


class TestDynamics:
    def test_zero_action_upright(self):
        state = LanderState(0.3, 1.0, 0.4, -0.2, 0.0, 0.05)
        d = dynamics(state, Action(-1.0, 0.0), PARAMS)
        expected = [state.vx, state.vy, 0.0, -PARAMS.gravity / PARAMS.mass,
                    state.angular_velocity, 0.0]
        np.testing.assert_allclose(d, expected, rtol=0, atol=0)

    def test_full_main_upright(self):
        state = LanderState(0.0, 1.0, 0.0, 0.0, 0.0, 0.0)
        d = dynamics(state, Action(1.0, 0.0), PARAMS)
        assert d[2] == 0.0
        assert d[3] == (PARAMS.main_thrust - PARAMS.gravity) / PARAMS.mass

    def test_matches_reference_transcription(self, rng):
        for _ in range(50):
            vec = rng.uniform(-2, 2, 6)
            action = Action(rng.uniform(-1, 1), rng.uniform(-1, 1))
            m_eff, s_eff = gate_action(action)
            got = dynamics(LanderState.from_vector(vec), action, PARAMS)
            ref = reference_derivative(vec, m_eff, s_eff, PARAMS)
            np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


class TestDynamicsJacobians:
    def test_zero_action_structure(self):
        state = LanderState(0.1, 1.0, 0.0, 0.0, 0.2, 0.0)
        a, b = dynamics_jacobians(state, Action(-1.0, 0.0), PARAMS)
        assert a[0, 2] == 1.0 and a[1, 3] == 1.0 and a[4, 5] == 1.0
        # main-thrust column stays nonzero: B is taken w.r.t. the throttle
        assert b[2, 0] != 0.0 and b[3, 0] != 0.0

    def test_angle_derivative_at_quarter_turn(self):
        state = LanderState(0.0, 1.0, 0.0, 0.0, math.pi / 2, 0.0)
        a, _ = dynamics_jacobians(state, Action(1.0, 0.0), PARAMS)
        # d(horizontal accel)/d(angle) = -cos(pi/2) * f_m / m
        assert abs(a[2, 4]) < 1e-12

    def test_matches_finite_differences(self, rng):
        h = 1e-6
        worst = 0.0
        for _ in range(100):
            vec = rng.uniform(-1.5, 1.5, 6)
            action = Action(rng.uniform(-1, 1), rng.uniform(-1, 1))
            m_eff, s_eff = gate_action(action)
            a, b = dynamics_jacobians(LanderState.from_vector(vec), action, PARAMS)
            for i in range(6):
                dv = np.zeros(6)
                dv[i] = h
                fd = (np.array(dynamics_effective(vec + dv, m_eff, s_eff, PARAMS))
                      - dynamics_effective(vec - dv, m_eff, s_eff, PARAMS)) / (2 * h)
                denom = max(1.0, float(np.max(np.abs(fd))))
                worst = max(worst, float(np.max(np.abs(fd - a[:, i]))) / denom)
            fdm = (np.array(dynamics_effective(vec, m_eff + h, s_eff, PARAMS))
                   - dynamics_effective(vec, m_eff - h, s_eff, PARAMS)) / (2 * h)
            fds = (np.array(dynamics_effective(vec, m_eff, s_eff + h, PARAMS))
                   - dynamics_effective(vec, m_eff, s_eff - h, PARAMS)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fdm - b[:, 0]))),
                        float(np.max(np.abs(fds - b[:, 1]))))
        assert worst < 1e-6

    def test_raw_action_kink_raises(self):
        state = LanderState(0.0, 1.0)
        with pytest.raises(NonDifferentiablePoint):
            dynamics_jacobians(state, Action(0.0, 0.0), PARAMS,
                               wrt_raw_action=True)

    def test_raw_action_gate_slopes(self):
        state = LanderState(0.0, 1.0, 0.0, 0.0, 0.3, 0.0)
        _, b_eff = dynamics_jacobians(state, Action(0.5, 0.1), PARAMS)
        _, b_pos = dynamics_jacobians(state, Action(0.5, 0.1), PARAMS,
                                      wrt_raw_action=True)
        _, b_neg = dynamics_jacobians(state, Action(-0.5, 0.1), PARAMS,
                                      wrt_raw_action=True)
        np.testing.assert_allclose(b_pos[:, 0], 0.5 * b_eff[:, 0])
        assert np.all(b_neg[:, 0] == 0.0)


class TestStep:
    def test_free_fall_closed_form(self):
        n = 500
        h0 = 500.0
        state = LanderState(y=h0)
        for k in range(n):
            state, _, event, _ = step(state, Action(-1.0, 0.0), PARAMS)
            assert not event.terminal
        c = PARAMS.dt * PARAMS.gravity / PARAMS.mass
        vy_expected = -n * c
        drop_expected = PARAMS.dt * c * n * (n + 1) / 2
        assert abs(state.vy - vy_expected) <= 1e-12 * abs(vy_expected)
        assert abs((h0 - state.y) - drop_expected) <= 1e-12 * drop_expected

    def test_single_thrust_step(self):
        state = LanderState(y=5.0)
        nxt, _, _, _ = step(state, Action(1.0, 0.0), PARAMS)
        assert nxt.vy == PARAMS.dt * (PARAMS.main_thrust - PARAMS.gravity) / PARAMS.mass

    def test_matches_quarter_step_reference(self):
        """Oracle: the same semi-implicit scheme run at dt/4.

        A first-order scheme carries an O(dt) bias proportional to the net
        acceleration, so the fixed sequence holds thrust near force balance;
        the refinement check then isolates scheme/sign/scale errors.
        """
        fine = PhysicsParams(dt=PARAMS.dt / 4)
        hover = PARAMS.gravity * PARAMS.mass / PARAMS.main_thrust
        throttles = [(hover + 0.004 * math.sin(0.3 * k),
                      0.02 * math.sin(0.2 * k)) for k in range(50)]
        coarse = LanderState(x=0.0, y=5.0, vx=0.05, vy=0.0, angle=0.0).as_vector()
        ref = coarse.copy()
        for m_eff, s_eff in throttles:
            coarse = advance(coarse, m_eff, s_eff, PARAMS)
            for _ in range(4):
                ref = advance(ref, m_eff, s_eff, fine)
        assert np.max(np.abs(coarse[:2] - ref[:2])) < 1e-3

    def test_step_on_terminal_raises(self):
        env = LanderEnv()
        env.reset(LanderState(y=1.25))
        event = TerminalEvent.NONE
        while not event.terminal:
            _, _, event = env.step(Action(-1.0, 0.0))
        with pytest.raises(StepOnTerminalState):
            env.step(Action(-1.0, 0.0))

    def test_gating_independence_below_zero(self):
        s0 = LanderState(0.1, 2.0, 0.2, -0.3, 0.1, 0.05)
        a = step(s0, Action(-0.3, 0.4), PARAMS)
        b = step(s0, Action(-1.0, 0.4), PARAMS)
        assert a.state == b.state and a.reward == b.reward

    def test_free_fall_keeps_horizontal_and_spin(self):
        state = LanderState(0.2, 30.0, 0.7, 0.0, 0.1, 0.3)
        for _ in range(100):
            state, _, _, _ = step(state, Action(-1.0, 0.0), PARAMS)
        assert state.vx == 0.7 and state.angular_velocity == 0.3


class TestContact:
    def test_gentle_drop_lands(self):
        env = LanderEnv()
        state = env.reset(LanderState(y=0.3, vy=-0.4))
        event = TerminalEvent.NONE
        while not event.terminal:
            state, _, event = env.step(Action(-1.0, 0.0))
        assert event is TerminalEvent.LANDED
        assert state.leg1 == 1 and state.leg2 == 1

    def test_hard_impact_crashes(self):
        env = LanderEnv()
        event = TerminalEvent.NONE
        env.reset(LanderState(y=1.25))
        while not event.terminal:
            _, _, event = env.step(Action(-1.0, 0.0))
        assert event is TerminalEvent.CRASHED

    def test_tilted_contact_crashes(self):
        env = LanderEnv()
        event = TerminalEvent.NONE
        env.reset(LanderState(y=0.25, vy=-0.3, angle=1.2))
        while not event.terminal:
            _, _, event = env.step(Action(-1.0, 0.0))
        assert event is TerminalEvent.CRASHED

    def test_out_of_bounds(self):
        env = LanderEnv()
        env.reset(LanderState(x=1.4, y=30.0, vx=2.0))
        event = TerminalEvent.NONE
        while not event.terminal:
            state, _, event = env.step(Action(-1.0, 0.0))
        assert event is TerminalEvent.OUT_OF_BOUNDS

    def test_timeout(self):
        world = WorldConfig(max_steps=25)
        env = LanderEnv(EnvConfig(world=world))
        env.reset(LanderState(y=300.0))
        event = TerminalEvent.NONE
        n = 0
        while not event.terminal:
            _, _, event = env.step(Action(-1.0, 0.0))
            n += 1
        assert event is TerminalEvent.TIMEOUT and n == 25

    def test_leg_flags_zero_above_contact_height(self, rng):
        world = WorldConfig()
        for _ in range(200):
            state = LanderState(
                y=float(rng.uniform(world.leg_contact_height + 1e-6, 2.0)),
                angle=float(rng.uniform(-1.5, 1.5)),
            )
            t1, t2 = leg_tip_heights(state.y, state.angle, world)
            assert min(t1, t2) > 0.0


class TestObserve:
    def test_zero_state(self):
        assert np.all(observe(LanderState()) == 0.0)

    def test_leg_flags_pass_through(self):
        obs = observe(LanderState(y=0.1, leg1=1, leg2=1))
        assert obs[6] == 1.0 and obs[7] == 1.0

    def test_position_scale(self):
        from modeswitch.lander import ObservationScales
        obs = observe(LanderState(x=2.0, y=0.0),
                      ObservationScales(position=0.5))
        assert obs[0] == 1.0


class TestReward:
    def test_no_movement_no_action_is_zero(self):
        s = LanderState(0.3, 1.0, 0.1, -0.2, 0.05, 0.0)
        assert reward(s, s, Action(-1.0, 0.0), TerminalEvent.NONE) == 0.0

    def test_terminal_bonuses(self):
        s = LanderState(0.3, 1.0)
        base = reward(s, s, Action(-1.0, 0.0), TerminalEvent.NONE)
        assert reward(s, s, Action(-1.0, 0.0), TerminalEvent.CRASHED) == base - 100.0
        assert reward(s, s, Action(-1.0, 0.0), TerminalEvent.LANDED) == base + 100.0

    def test_full_main_thrust_costs(self):
        s = LanderState(0.3, 1.0)
        assert reward(s, s, Action(1.0, 0.0), TerminalEvent.NONE) == -0.30

    def test_hand_evaluated_shaping_difference(self):
        cfg = RewardConfig()
        prev = LanderState(0.3, 1.0, 0.0, -1.0, 0.1, 0.0)
        nxt = LanderState(0.2, 0.8, 0.0, -0.8, 0.05, 0.0, 1, 0)
        def shaping(s):
            return (-cfg.w_dist * math.hypot(s.x, s.y)
                    - cfg.w_vel * math.hypot(s.vx, s.vy)
                    - cfg.w_angle * abs(s.angle)
                    + cfg.w_legs * (s.leg1 + s.leg2))
        expected = shaping(nxt) - shaping(prev) - cfg.c_side * 0.5
        got = reward(prev, nxt, Action(-1.0, 0.5), TerminalEvent.NONE)
        assert abs(got - expected) < 1e-12


class TestReset:
    def test_exact_state(self):
        env = LanderEnv()
        want = LanderState(0.12, 1.07, -0.3, 0.2, 0.09, -0.01)
        got = env.reset(want)
        assert got == want

    def test_below_ground_rejected(self):
        with pytest.raises(InvalidInitialState):
            LanderEnv().reset(LanderState(y=-0.1))

    def test_out_of_bounds_rejected(self):
        with pytest.raises(InvalidInitialState):
            LanderEnv().reset(LanderState(x=2.0, y=1.0))

    def test_repeat_reset_is_bitwise_deterministic(self, rng):
        env = LanderEnv()
        init = LanderState(0.1, 1.2, -0.2, -0.1, 0.08, 0.02)
        actions = [Action(rng.uniform(-1, 1), rng.uniform(-1, 1))
                   for _ in range(60)]
        runs = []
        for _ in range(2):
            env.reset(init)
            out = []
            for act in actions:
                state, r, event = env.step(act)
                out.append((state, r, event))
                if event.terminal:
                    break
            runs.append(out)
        assert runs[0] == runs[1]


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = EnvConfig(physics=PhysicsParams(gravity=3.7, main_thrust=12.0))
        path = tmp_path / "env.txt"
        save_env_config(cfg, path)
        loaded = load_env_config(path)
        assert loaded == cfg

    def test_defaults_overridable(self, tmp_path):
        path = tmp_path / "env.txt"
        path.write_text(
            "# comment\nphysics.gravity = 1.62\nreward.w_dist = 50\n"
            "world.max_steps = 400\ninit.y = 2.0\nsampler.x_min = -0.1\n"
        )
        cfg = load_env_config(path)
        assert cfg.physics.gravity == 1.62
        assert cfg.rewards.w_dist == 50.0
        assert cfg.world.max_steps == 400
        assert cfg.init.y == 2.0
        assert cfg.sampler.x == (-0.1, 0.25)
        assert cfg.physics.mass == 1.0  # untouched default

    def test_mapping_round_trip(self):
        cfg = EnvConfig()
        assert env_config_from_mapping(env_config_to_mapping(cfg)) == cfg
