"""Deterministic 2D boids simulation on a toroidal plane.

Positions and velocities live in ``(N, 2)`` float64 arrays. All distances and
displacements use the toroidal metric, neighbor search goes through a uniform
grid, and every source of randomness flows through a seeded generator carried
inside the state, so identical (config, bounds, seed, step count) always
reproduce bit-identical trajectories.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class SimulationError(RuntimeError):
    """The simulation produced a non-finite value; the state is not usable."""


@dataclass(frozen=True)
class FlockConfig:
    """The six motion parameters plus flock size.

    ``separation_coeff``/``alignment_coeff``/``cohesion_coeff`` weight the three
    steering rules, ``perception_range`` gates alignment and cohesion,
    ``separation_range`` gates repulsion, ``max_speed`` caps velocity per step.
    """

    separation_coeff: float
    alignment_coeff: float
    cohesion_coeff: float
    perception_range: float
    separation_range: float
    max_speed: float
    flock_size: int = 100

    def __post_init__(self) -> None:
        for name in (
            "separation_coeff",
            "alignment_coeff",
            "cohesion_coeff",
            "perception_range",
            "separation_range",
        ):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if not np.isfinite(self.max_speed) or self.max_speed <= 0:
            raise ValueError(f"max_speed must be finite and > 0, got {self.max_speed!r}")
        if int(self.flock_size) < 1:
            raise ValueError(f"flock_size must be >= 1, got {self.flock_size!r}")

    def lerp(self, other: "FlockConfig", fraction: float) -> "FlockConfig":
        """Componentwise linear interpolation of the six motion parameters.

        ``flock_size`` is kept from ``self``; it is structural, not a motion knob.
        """
        f = float(fraction)
        mix = lambda a, b: a + (b - a) * f  # noqa: E731
        return replace(
            self,
            separation_coeff=mix(self.separation_coeff, other.separation_coeff),
            alignment_coeff=mix(self.alignment_coeff, other.alignment_coeff),
            cohesion_coeff=mix(self.cohesion_coeff, other.cohesion_coeff),
            perception_range=mix(self.perception_range, other.perception_range),
            separation_range=mix(self.separation_range, other.separation_range),
            max_speed=mix(self.max_speed, other.max_speed),
        )


@dataclass
class FlockState:
    """Immutable-by-convention snapshot of the whole flock.

    ``step`` never mutates its input; it returns a fresh state with copied
    arrays and an advanced RNG, so snapshots are safe to hand to renderers or
    broadcast threads.
    """

    positions: np.ndarray  # (N, 2)
    velocities: np.ndarray  # (N, 2)
    tick: int
    bounds: tuple[float, float]
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return len(self.positions)


def _clone_rng(rng: np.random.Generator) -> np.random.Generator:
    clone = np.random.Generator(type(rng.bit_generator)())
    clone.bit_generator.state = rng.bit_generator.state
    return clone


def init_flock(
    config: FlockConfig, bounds: tuple[float, float], seed: int
) -> FlockState:
    """Spawn ``config.flock_size`` boids uniformly over ``bounds``.

    Velocity directions are uniform on the circle with speed ``max_speed / 2``.
    Identical (config, bounds, seed) yield bit-identical states.
    """
    width, height = float(bounds[0]), float(bounds[1])
    if not (np.isfinite(width) and np.isfinite(height)) or width <= 0 or height <= 0:
        raise ValueError(f"bounds must be finite and positive, got {bounds!r}")
    n = int(config.flock_size)
    rng = np.random.default_rng(seed)
    positions = rng.random((n, 2)) * np.array([width, height])
    angles = rng.random(n) * TWO_PI
    speed = config.max_speed / 2.0
    velocities = np.column_stack([np.cos(angles), np.sin(angles)]) * speed
    return FlockState(positions, velocities, tick=0, bounds=(width, height), rng=rng)


def toroidal_delta(a: np.ndarray, b: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    """Shortest displacement from ``a`` to ``b`` on the torus."""
    size = np.asarray(bounds, dtype=float)
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    # Positions live in [0, size), so d is within (-size, size) and a single
    # half-size comparison wraps it; cheaper than round(d / size).
    half = size / 2.0
    return np.where(d > half, d - size, np.where(d < -half, d + size, d))


def toroidal_distance(a: np.ndarray, b: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    d = toroidal_delta(a, b, bounds)
    return np.hypot(*np.moveaxis(np.atleast_2d(d), -1, 0))


def _grid_shape(bounds: tuple[float, float], cell_size: float) -> tuple[int, int]:
    # Floor division keeps actual cell extents >= cell_size, so a 3x3 cell
    # neighborhood always covers a query radius <= cell_size.
    ncx = max(1, int(bounds[0] // cell_size))
    ncy = max(1, int(bounds[1] // cell_size))
    return ncx, ncy

def _cell_coords(
    positions: np.ndarray, bounds: tuple[float, float], ncx: int, ncy: int
) -> tuple[np.ndarray, np.ndarray]:
    cells = (positions // (bounds[0] / ncx, bounds[1] / ncy)).astype(np.int64)
    np.minimum(cells, (ncx - 1, ncy - 1), out=cells)
    return cells[:, 0], cells[:, 1]


_WRAP_OFFSETS: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _wrap_offsets(ncx: int, ncy: int) -> tuple[np.ndarray, np.ndarray]:
    # Deduplicate wrap-around offsets for worlds narrower than three cells.
    key = (ncx, ncy)
    cached = _WRAP_OFFSETS.get(key)
    if cached is None:
        cached = (
            np.array(sorted({o % ncx for o in (-1, 0, 1)})),
            np.array(sorted({o % ncy for o in (-1, 0, 1)})),
        )
        _WRAP_OFFSETS[key] = cached
    return cached


def _candidate_pairs(
    positions: np.ndarray, bounds: tuple[float, float], cell_size: float
) -> tuple[np.ndarray, np.ndarray]:
    """All (i, j) index pairs, i != j, with j in i's 3x3 cell neighborhood.

    Every true neighbor pair at distance <= cell_size is guaranteed present;
    pairs beyond that distance may also appear and must be filtered by the
    caller. Output order is a deterministic function of the input.
    """
    n = len(positions)
    ncx, ncy = _grid_shape(bounds, cell_size)
    cx, cy = _cell_coords(positions, bounds, ncx, ncy)
    cell_id = cy * ncx + cx
    order = np.argsort(cell_id, kind="stable")
    counts = np.bincount(cell_id, minlength=ncx * ncy)
    starts = np.zeros(ncx * ncy + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])

    # Gather all (offset, boid) target cells in one batch.
    offs_x, offs_y = _wrap_offsets(ncx, ncy)
    tx = (cx[None, :] + offs_x[:, None]) % ncx  # (offsets, boids)
    ty = (cy[None, :] + offs_y[:, None]) % ncy
    target = (ty[:, None, :] * ncx + tx[None, :, :]).reshape(-1)
    cnt = counts[target]
    total = int(cnt.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    first = np.repeat(starts[target], cnt)
    run = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    j_all = order[first + run]
    i_all = np.repeat(
        np.tile(np.arange(n), len(offs_y) * len(offs_x)), cnt
    )
    keep = i_all != j_all
    return i_all[keep], j_all[keep]


def neighbors(state: FlockState, i: int, radius: float) -> list[int]:
    """Indices j != i with toroidal distance(i, j) <= radius, ascending."""
    n = state.n
    if not 0 <= i < n:
        raise IndexError(f"boid index {i} out of range for flock of {n}")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius!r}")
    if radius == 0 or n == 1:
        # Distance 0 pairs (exactly coincident boids) still qualify at radius 0.
        if n == 1:
            return []
        same = np.flatnonzero(
            (state.positions == state.positions[i]).all(axis=1)
        )
        return [int(j) for j in same if j != i]
    pi, pj = _candidate_pairs(state.positions, state.bounds, radius)
    mine = pi == i
    js = pj[mine]
    d = toroidal_delta(state.positions[i], state.positions[js], state.bounds)
    dist = np.hypot(d[:, 0], d[:, 1])
    return sorted(int(j) for j in js[dist <= radius])


def separation_force(
    position: np.ndarray,
    neighbor_positions: np.ndarray,
    bounds: tuple[float, float],
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Inverse-square repulsion: sum of (self - neighbor) / d^2, toroidal.

    Coincident neighbors (d = 0) contribute a unit direction drawn from
    ``rng``; without a generator they are an error.
    """
    pts = np.asarray(neighbor_positions, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(2)
    d = toroidal_delta(position, pts, bounds)
    dist = np.hypot(d[:, 0], d[:, 1])
    out = np.zeros(2)
    far = dist > 0
    if far.any():
        out += (-(d[far]) / dist[far, None] ** 2).sum(axis=0)
    n_zero = int((~far).sum())
    if n_zero:
        if rng is None:
            raise ValueError("coincident neighbor requires an rng for the kick direction")
        angles = rng.uniform(0.0, TWO_PI, size=n_zero)
        out += np.column_stack([np.cos(angles), np.sin(angles)]).sum(axis=0)
    return out


def alignment_force(velocity: np.ndarray, neighbor_velocities: np.ndarray) -> np.ndarray:
    """Mean neighbor velocity minus own velocity; zero with no neighbors."""
    vels = np.asarray(neighbor_velocities, dtype=float).reshape(-1, 2)
    if len(vels) == 0:
        return np.zeros(2)
    return vels.mean(axis=0) - np.asarray(velocity, dtype=float)


def cohesion_force(
    position: np.ndarray, neighbor_positions: np.ndarray, bounds: tuple[float, float]
) -> np.ndarray:
    """Toroidal displacement toward the neighbor centroid; zero with none."""
    pts = np.asarray(neighbor_positions, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(2)
    return toroidal_delta(position, pts, bounds).mean(axis=0)


def clamp_velocity(v: np.ndarray, max_speed: float) -> np.ndarray:
    """Scale ``v`` down to magnitude ``max_speed`` if it exceeds it."""
    if max_speed <= 0:
        raise ValueError(f"max_speed must be > 0, got {max_speed!r}")
    v = np.asarray(v, dtype=float)
    speed = float(np.hypot(v[..., 0], v[..., 1]))
    if speed <= max_speed:
        return v.copy()
    return v * (max_speed / speed)


# Below this flock size the full n x n distance matrix is cheaper than the
# grid's pair lists (small flocks that clump together approach all-pairs
# interaction anyway). Both paths apply the identical force definitions.
_DENSE_FLOCK_LIMIT = 192


def _forces_dense(
    state: FlockState, config: FlockConfig
) -> tuple[np.ndarray, np.random.Generator]:
    """All-pairs force accumulation over the full distance matrix."""
    n = state.n
    pos = state.positions
    vel = state.velocities
    width, height = float(state.bounds[0]), float(state.bounds[1])
    rng = state.rng

    px = np.ascontiguousarray(pos[:, 0])
    py = np.ascontiguousarray(pos[:, 1])
    dx = px[None, :] - px[:, None]  # displacement from row boid to column boid
    dy = py[None, :] - py[:, None]
    dx = np.where(dx > width / 2, dx - width, dx)
    dx = np.where(dx < -width / 2, dx + width, dx)
    dy = np.where(dy > height / 2, dy - height, dy)
    dy = np.where(dy < -height / 2, dy + height, dy)
    dist2 = dx * dx + dy * dy
    np.fill_diagonal(dist2, np.inf)  # a boid is never its own neighbor

    force = np.zeros((n, 2))
    big_r = config.perception_range
    small_r = config.separation_range
    if big_r > 0:
        m = (dist2 <= big_r * big_r).astype(float)
        cnt = m.sum(axis=1)
        has = cnt > 0
        denom = np.maximum(cnt, 1.0)
        vx = np.ascontiguousarray(vel[:, 0])
        vy = np.ascontiguousarray(vel[:, 1])
        ali_x = np.where(has, m @ vx / denom - vx, 0.0)
        ali_y = np.where(has, m @ vy / denom - vy, 0.0)
        coh_x = np.where(has, (m * dx).sum(axis=1) / denom, 0.0)
        coh_y = np.where(has, (m * dy).sum(axis=1) / denom, 0.0)
        force[:, 0] = config.alignment_coeff * ali_x + config.cohesion_coeff * coh_x
        force[:, 1] = config.alignment_coeff * ali_y + config.cohesion_coeff * coh_y
    m2 = (dist2 <= small_r * small_r) & (dist2 > 0)
    if m2.any():
        inv = np.zeros((n, n))
        np.divide(1.0, dist2, out=inv, where=m2)
        force[:, 0] += config.separation_coeff * -(dx * inv).sum(axis=1)
        force[:, 1] += config.separation_coeff * -(dy * inv).sum(axis=1)
    # Coincident pairs get a deterministic pseudo-random unit kick; angles
    # are consumed in (i, j) lexicographic order (= argwhere's row-major).
    zero = np.argwhere(dist2 == 0)
    if len(zero):
        rng = _clone_rng(state.rng)
        angles = rng.uniform(0.0, TWO_PI, size=len(zero))
        kicks = np.zeros((n, 2))
        np.add.at(kicks, zero[:, 0], np.column_stack([np.cos(angles), np.sin(angles)]))
        force += config.separation_coeff * kicks
    return force, rng


def _forces_sparse(
    state: FlockState, config: FlockConfig, cell: float
) -> tuple[np.ndarray | None, np.random.Generator]:
    """Grid-filtered pair-list force accumulation."""
    n = state.n
    pos = state.positions
    vel = state.velocities
    width, height = float(state.bounds[0]), float(state.bounds[1])
    rng = state.rng

    pi, pj = _candidate_pairs(pos, state.bounds, cell)
    if not len(pi):
        return None, rng
    # Flat per-axis arrays: cheaper gathers and scalar comparisons than
    # (pairs, 2) row operations.
    px = np.ascontiguousarray(pos[:, 0])
    py = np.ascontiguousarray(pos[:, 1])
    dx = px[pj] - px[pi]
    dy = py[pj] - py[pi]
    dx = np.where(dx > width / 2, dx - width, dx)
    dx = np.where(dx < -width / 2, dx + width, dx)
    dy = np.where(dy > height / 2, dy - height, dy)
    dy = np.where(dy < -height / 2, dy + height, dy)
    dist2 = dx * dx + dy * dy

    force = np.zeros((n, 2))
    big_r = config.perception_range
    small_r = config.separation_range
    if big_r > 0:
        m = dist2 <= big_r * big_r
        im = pi[m]
        jm = pj[m]
        cnt = np.bincount(im, minlength=n)
        has = cnt > 0
        denom = np.maximum(cnt, 1)
        vx = np.ascontiguousarray(vel[:, 0])
        vy = np.ascontiguousarray(vel[:, 1])
        ali_x = np.where(has, np.bincount(im, weights=vx[jm], minlength=n) / denom - vx, 0.0)
        ali_y = np.where(has, np.bincount(im, weights=vy[jm], minlength=n) / denom - vy, 0.0)
        coh_x = np.where(has, np.bincount(im, weights=dx[m], minlength=n) / denom, 0.0)
        coh_y = np.where(has, np.bincount(im, weights=dy[m], minlength=n) / denom, 0.0)
        force[:, 0] = config.alignment_coeff * ali_x + config.cohesion_coeff * coh_x
        force[:, 1] = config.alignment_coeff * ali_y + config.cohesion_coeff * coh_y
    m2 = (dist2 <= small_r * small_r) & (dist2 > 0)
    if m2.any():
        i2 = pi[m2]
        d2 = dist2[m2]
        force[:, 0] += config.separation_coeff * np.bincount(
            i2, weights=-dx[m2] / d2, minlength=n
        )
        force[:, 1] += config.separation_coeff * np.bincount(
            i2, weights=-dy[m2] / d2, minlength=n
        )
    # Coincident pairs get a deterministic pseudo-random unit kick; angles
    # are consumed in (i, j) lexicographic order.
    zero = np.flatnonzero(dist2 == 0)
    if zero.size:
        z = zero[np.lexsort((pj[zero], pi[zero]))]
        rng = _clone_rng(state.rng)
        angles = rng.uniform(0.0, TWO_PI, size=z.size)
        kicks = np.zeros((n, 2))
        np.add.at(kicks, pi[z], np.column_stack([np.cos(angles), np.sin(angles)]))
        force += config.separation_coeff * kicks
    return force, rng


def step(state: FlockState, config: FlockConfig, dt: float = 1.0) -> FlockState:
    """Advance one synchronous Euler step.

    All forces read the pre-step snapshot; per boid, in index order:
    ``v' = clamp(v + S*sep + M*align + K*coh, V)`` then ``p' = wrap(p + v'*dt)``.
    """
    n = state.n
    if n != int(config.flock_size):
        raise ValueError(
            f"state has {n} boids but config.flock_size is {config.flock_size}"
        )
    pos = state.positions
    vel = state.velocities
    bounds = np.asarray(state.bounds, dtype=float)
    # The generator is only cloned (and advanced) when a coincident pair
    # actually consumes randomness; an unconsumed generator is shared safely
    # because every consumer clones before drawing.
    rng = state.rng

    force = None
    cell = max(config.perception_range, config.separation_range)
    if cell > 0 and n > 1:
        if n <= _DENSE_FLOCK_LIMIT:
            force, rng = _forces_dense(state, config)
        else:
            force, rng = _forces_sparse(state, config, cell)

    new_v = vel + force if force is not None else vel.copy()
    speed2 = new_v[:, 0] * new_v[:, 0] + new_v[:, 1] * new_v[:, 1]
    over = speed2 > config.max_speed * config.max_speed
    if over.any():
        new_v[over] *= (config.max_speed / np.sqrt(speed2[over]))[:, None]
    if not np.isfinite(new_v).all():
        raise SimulationError(f"non-finite velocity at tick {state.tick + 1}")
    new_p = (pos + new_v * dt) % bounds
    # Tiny negative coordinates can wrap to exactly the upper bound.
    new_p = np.where(new_p >= bounds, new_p - bounds, new_p)
    if not np.isfinite(new_p).all():
        raise SimulationError(f"non-finite position at tick {state.tick + 1}")
    return FlockState(new_p, new_v, state.tick + 1, state.bounds, rng)


# --- trajectory files -------------------------------------------------------
#
# Newline-delimited JSON, one record per tick:
#   {"tick": 0, "boids": [x0, y0, vx0, vy0, x1, ...]}
# Floats are written with Python's shortest round-trip repr, so parsing the
# record reproduces the exact binary values.


def trajectory_record(state: FlockState) -> str:
    flat = np.column_stack([state.positions, state.velocities]).reshape(-1)
    return json.dumps({"tick": state.tick, "boids": [float(v) for v in flat]})


def write_trajectory(path: str, states: Iterable[FlockState]) -> int:
    count = 0
    with open(path, "w", encoding="ascii") as fh:
        for state in states:
            fh.write(trajectory_record(state) + "\n")
            count += 1
    return count


def read_trajectory(path: str) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield (tick, positions, velocities) per record, full precision."""
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                tick = int(rec["tick"])
                flat = np.asarray(rec["boids"], dtype=float).reshape(-1, 4)
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"malformed trajectory record at line {lineno}: {exc}") from exc
            yield tick, flat[:, :2].copy(), flat[:, 2:].copy()
