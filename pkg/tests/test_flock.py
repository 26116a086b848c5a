import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emoflock import flock as fl
from emoflock.flock import (
    FlockConfig,
    FlockState,
    SimulationError,
    alignment_force,
    clamp_velocity,
    cohesion_force,
    init_flock,
    neighbors,
    separation_force,
    step,
    toroidal_delta,
)

BOUNDS = (800.0, 600.0)


def make_config(**overrides):
    base = dict(
        separation_coeff=0.05,
        alignment_coeff=0.05,
        cohesion_coeff=0.05,
        perception_range=60,
        separation_range=30,
        max_speed=2,
        flock_size=100,
    )
    base.update(overrides)
    return FlockConfig(**base)


def make_state(positions, velocities=None, bounds=BOUNDS, seed=0):
    pos = np.asarray(positions, dtype=float)
    vel = (
        np.zeros_like(pos)
        if velocities is None
        else np.asarray(velocities, dtype=float)
    )
    return FlockState(pos, vel, 0, bounds, np.random.default_rng(seed))


def brute_force_neighbors(state, i, radius):
    """Independent O(N^2)-style oracle: direct toroidal distance scan."""
    out = []
    w, h = state.bounds
    xi, yi = state.positions[i]
    for j, (xj, yj) in enumerate(state.positions):
        if j == i:
            continue
        dx = abs(xj - xi)
        dy = abs(yj - yi)
        dx = min(dx, w - dx)
        dy = min(dy, h - dy)
        if np.hypot(dx, dy) <= radius:
            out.append(j)
    return out


class TestInitFlock:
    def test_identical_seed_bit_identical(self):
        cfg = make_config(flock_size=3)
        a = init_flock(cfg, BOUNDS, seed=42)
        b = init_flock(cfg, BOUNDS, seed=42)
        assert a.positions.tobytes() == b.positions.tobytes()
        assert a.velocities.tobytes() == b.velocities.tobytes()

    def test_single_boid(self):
        cfg = make_config(flock_size=1)
        state = init_flock(cfg, (100.0, 100.0), seed=7)
        assert state.n == 1
        assert 0 <= state.positions[0, 0] < 100
        assert 0 <= state.positions[0, 1] < 100
        assert np.hypot(*state.velocities[0]) == pytest.approx(cfg.max_speed / 2)

    def test_mean_position_near_center(self):
        # Law-of-large-numbers: uniform positions average near the center.
        state = init_flock(make_config(flock_size=100), BOUNDS, seed=1)
        mean = state.positions.mean(axis=0)
        assert abs(mean[0] - 400) <= 40
        assert abs(mean[1] - 300) <= 30

    @pytest.mark.parametrize("bounds", [(0, 100), (-5, 100), (float("nan"), 1), (100, float("inf"))])
    def test_rejects_bad_bounds(self, bounds):
        with pytest.raises(ValueError):
            init_flock(make_config(), bounds, seed=0)


class TestNeighbors:
    def test_all_far_apart(self):
        state = make_state([[0, 0], [200, 0], [0, 200]])
        assert neighbors(state, 0, 60) == []

    def test_zero_radius_distinct(self):
        state = make_state([[0, 0], [10, 0]])
        assert neighbors(state, 0, 0) == []

    def test_index_out_of_range(self):
        state = make_state([[0, 0]])
        with pytest.raises(IndexError):
            neighbors(state, 1, 10)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pos = rng.random((200, 2)) * np.array(BOUNDS)
            state = make_state(pos)
            for i in (0, 57, 199):
                assert neighbors(state, i, 60) == sorted(
                    brute_force_neighbors(state, i, 60)
                )

    def test_wraps_torus(self):
        state = make_state([[1, 300], [799, 300]])
        assert neighbors(state, 0, 5) == [1]

    def test_small_world_no_duplicates(self):
        # World narrower than three grid cells must not double-count via wrap.
        state = make_state([[10, 10], [40, 10], [10, 40]], bounds=(50.0, 50.0))
        for i in range(3):
            result = neighbors(state, i, 49)
            assert result == sorted(set(result))
            assert result == sorted(brute_force_neighbors(state, i, 49))


class TestForces:
    def test_separation_empty(self):
        assert separation_force([0, 0], np.empty((0, 2)), BOUNDS).tolist() == [0, 0]

    def test_separation_single_neighbor(self):
        f = separation_force([0.0, 0.0], [[10.0, 0.0]], BOUNDS)
        assert f == pytest.approx([-0.1, 0.0])

    def test_separation_symmetric_cancellation(self):
        f = separation_force([0.0, 0.0], [[7.0, 0.0], [-7.0, 0.0]], BOUNDS)
        assert f == pytest.approx([0.0, 0.0], abs=1e-15)

    def test_separation_coincident_uses_rng(self):
        rng = np.random.default_rng(3)
        f = separation_force([5.0, 5.0], [[5.0, 5.0]], BOUNDS, rng=rng)
        assert np.hypot(*f) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            separation_force([5.0, 5.0], [[5.0, 5.0]], BOUNDS)

    def test_alignment_empty(self):
        assert alignment_force([1, 1], np.empty((0, 2))).tolist() == [0, 0]

    def test_alignment_single(self):
        assert alignment_force([0.0, 0.0], [[2.0, 0.0]]) == pytest.approx([2.0, 0.0])

    def test_alignment_mean(self):
        f = alignment_force([1.0, 1.0], [[3.0, 1.0], [1.0, 3.0]])
        assert f == pytest.approx([1.0, 1.0])

    def test_cohesion_empty(self):
        assert cohesion_force([0, 0], np.empty((0, 2)), BOUNDS).tolist() == [0, 0]

    def test_cohesion_single(self):
        assert cohesion_force([0.0, 0.0], [[50.0, 0.0]], BOUNDS) == pytest.approx([50.0, 0.0])

    def test_cohesion_centroid(self):
        f = cohesion_force([0.0, 0.0], [[30.0, 0.0], [0.0, 30.0]], BOUNDS)
        assert f == pytest.approx([15.0, 15.0])


class TestClampVelocity:
    def test_within_bound(self):
        assert clamp_velocity(np.array([1.0, 0.0]), 2).tolist() == [1.0, 0.0]

    def test_scales_down(self):
        assert clamp_velocity(np.array([3.0, 4.0]), 2.5) == pytest.approx([1.5, 2.0])

    def test_zero_vector(self):
        assert clamp_velocity(np.array([0.0, 0.0]), 1).tolist() == [0.0, 0.0]

    @given(
        vx=st.floats(-1e3, 1e3),
        vy=st.floats(-1e3, 1e3),
        vmax=st.floats(1e-3, 1e3),
    )
    def test_property_bounded_and_direction_preserved(self, vx, vy, vmax):
        v = np.array([vx, vy])
        out = clamp_velocity(v, vmax)
        speed = np.hypot(*out)
        assert speed <= vmax * (1 + 1e-12)
        if np.hypot(vx, vy) > 0:
            cross = out[0] * vy - out[1] * vx
            assert abs(cross) <= 1e-9 * max(1.0, np.hypot(vx, vy) ** 2)


class TestStep:
    def test_single_boid_pure_advection(self):
        cfg = make_config(flock_size=1)
        state = make_state([[0.0, 0.0]], [[1.0, 0.0]])
        out = step(state, cfg)
        assert out.positions[0] == pytest.approx([1.0, 0.0])
        assert out.velocities[0] == pytest.approx([1.0, 0.0])
        assert out.tick == 1

    def test_separation_pushes_apart(self):
        cfg = make_config(
            flock_size=2, separation_coeff=0.05, alignment_coeff=0, cohesion_coeff=0,
            separation_range=30, perception_range=0,
        )
        state = make_state([[0.0, 0.0], [10.0, 0.0]])
        out = step(state, cfg)
        d = np.hypot(*toroidal_delta(out.positions[0], out.positions[1], BOUNDS))
        assert d > 10

    def test_cohesion_pulls_together(self):
        cfg = make_config(
            flock_size=2, separation_coeff=0, alignment_coeff=0, cohesion_coeff=0.05,
            separation_range=0, perception_range=200, max_speed=10,
        )
        state = make_state([[0.0, 0.0], [100.0, 0.0]], bounds=(1000.0, 1000.0))
        out = step(state, cfg)
        d = np.hypot(*toroidal_delta(out.positions[0], out.positions[1], (1000.0, 1000.0)))
        assert d < 100

    def test_forces_read_prestep_state(self):
        # Swapping boid order must not change physics (synchronous update).
        cfg = make_config(flock_size=2, perception_range=200, max_speed=10)
        a = make_state([[0.0, 0.0], [100.0, 0.0]], [[0.5, 0.0], [-0.5, 0.0]])
        b = make_state([[100.0, 0.0], [0.0, 0.0]], [[-0.5, 0.0], [0.5, 0.0]])
        out_a = step(a, cfg)
        out_b = step(b, cfg)
        assert out_a.positions[0] == pytest.approx(out_b.positions[1])
        assert out_a.velocities[1] == pytest.approx(out_b.velocities[0])

    def test_matches_per_boid_force_functions(self):
        # The vectorized step must agree with the per-boid contract functions.
        cfg = make_config(flock_size=40, max_speed=5)
        state = init_flock(cfg, BOUNDS, seed=11)
        out = step(state, cfg)
        for i in range(state.n):
            near = brute_force_neighbors(state, i, cfg.separation_range)
            seen = brute_force_neighbors(state, i, cfg.perception_range)
            f = (
                cfg.separation_coeff
                * separation_force(state.positions[i], state.positions[near], BOUNDS)
                + cfg.alignment_coeff
                * alignment_force(state.velocities[i], state.velocities[seen])
                + cfg.cohesion_coeff
                * cohesion_force(state.positions[i], state.positions[seen], BOUNDS)
            )
            expected = clamp_velocity(state.velocities[i] + f, cfg.max_speed)
            assert out.velocities[i] == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_speed_bound_and_containment(self):
        cfg = make_config(flock_size=50)
        state = init_flock(cfg, BOUNDS, seed=3)
        for _ in range(200):
            state = step(state, cfg)
            speeds = np.hypot(state.velocities[:, 0], state.velocities[:, 1])
            assert (speeds <= cfg.max_speed * (1 + 1e-12)).all()
            assert (state.positions >= 0).all()
            assert (state.positions[:, 0] < BOUNDS[0]).all()
            assert (state.positions[:, 1] < BOUNDS[1]).all()

    def test_determinism(self):
        cfg = make_config(flock_size=30)
        runs = []
        for _ in range(2):
            state = init_flock(cfg, BOUNDS, seed=9)
            for _ in range(50):
                state = step(state, cfg)
            runs.append((state.positions.tobytes(), state.velocities.tobytes()))
        assert runs[0] == runs[1]

    def test_coincident_boids_deterministic(self):
        cfg = make_config(flock_size=2, separation_range=30)
        outs = []
        for _ in range(2):
            state = make_state([[50.0, 50.0], [50.0, 50.0]], seed=123)
            outs.append(step(state, cfg).positions.tobytes())
        assert outs[0] == outs[1]

    def test_nan_raises(self):
        cfg = make_config(flock_size=1)
        state = make_state([[0.0, 0.0]], [[float("nan"), 0.0]])
        with pytest.raises(SimulationError):
            step(state, cfg)

    def test_flock_size_mismatch(self):
        cfg = make_config(flock_size=3)
        state = make_state([[0.0, 0.0]])
        with pytest.raises(ValueError):
            step(state, cfg)


class TestConservation:
    def make_cluster(self, n=10, seed=2):
        rng = np.random.default_rng(seed)
        pos = 400 + rng.random((n, 2)) * 10  # all pairwise distances < 15
        vel = rng.standard_normal((n, 2)) * 1e-3
        return make_state(pos, vel)

    def test_separation_plus_cohesion_sums_to_zero(self):
        state = self.make_cluster()
        total = np.zeros(2)
        magnitudes = []
        for i in range(state.n):
            others = np.delete(state.positions, i, axis=0)
            f = separation_force(state.positions[i], others, BOUNDS) + cohesion_force(
                state.positions[i], others, BOUNDS
            )
            total += f
            magnitudes.append(np.hypot(*f))
        assert np.hypot(*total) < 1e-9 * max(np.mean(magnitudes), 1e-30)

    def test_alignment_preserves_mean_velocity(self):
        cfg = make_config(
            flock_size=10, separation_coeff=0, cohesion_coeff=0, alignment_coeff=0.05,
            perception_range=100, separation_range=0, max_speed=1e6,
        )
        state = self.make_cluster()
        for _ in range(100):
            before = state.velocities.mean(axis=0)
            state = step(state, cfg)
            after = state.velocities.mean(axis=0)
            assert np.hypot(*(after - before)) <= 1e-9 * max(np.hypot(*before), 1e-30)


class TestTrajectoryIO:
    def test_bit_exact_round_trip(self, tmp_path):
        cfg = make_config(flock_size=5)
        state = init_flock(cfg, BOUNDS, seed=17)
        states = [state]
        for _ in range(4):
            states.append(step(states[-1], cfg))
        path = tmp_path / "traj.ndjson"
        fl.write_trajectory(str(path), states)
        loaded = list(fl.read_trajectory(str(path)))
        assert len(loaded) == 5
        for original, (tick, pos, vel) in zip(states, loaded):
            assert tick == original.tick
            assert pos.tobytes() == original.positions.tobytes()
            assert vel.tobytes() == original.velocities.tobytes()

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "bad.ndjson"
        path.write_text('{"tick": 0, "boids": [1, 2, 3, 4]}\nnot json\n')
        with pytest.raises(ValueError, match="line 2"):
            list(fl.read_trajectory(str(path)))


class TestConfigValidation:
    @pytest.mark.parametrize(
        "field,value",
        [
            ("separation_coeff", -0.1),
            ("perception_range", -1),
            ("max_speed", 0),
            ("max_speed", -2),
            ("flock_size", 0),
        ],
    )
    def test_rejects_invalid(self, field, value):
        with pytest.raises(ValueError):
            make_config(**{field: value})
