"""N-body engine that squeezes the cities into a ring.

Each city becomes a unit-mass particle. Every pair interacts through a
Lennard-Jones type force whose root is the pair's initial ("natural")
distance, so the system resists any change of shape. An inner circular wall
grows from the origin while an outer wall holds the particles in; once the
two walls nearly touch, the particles sit on a ring and their angular order
is read off as a tour.

Optional mechanisms:

* pressure: the outer wall grows or shrinks to keep the wall reaction per
  unit perimeter inside a band;
* bubbles: extra circular walls inserted at the centres of mass of crowded
  cells of a coarse density grid.

Coordinates are normalised so the centroid is the origin and the farthest
city lies at radius 1. Integration is semi-implicit Euler with linear drag.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import _kernel, ljf
from .errors import DomainError, NumericalBlowupError, ParseError, SingularityError
from .instances import enclosing_geometry
from .tour import Tour, extract_tour

_COINCIDENT = 1e-12


class Variant(enum.Enum):
    SIMPLE = "simple"
    PRESSURE = "pressure"
    BUBBLE = "bubble"
    PRESSURE_BUBBLE = "pressure+bubble"

    @property
    def pressure(self):
        return self in (Variant.PRESSURE, Variant.PRESSURE_BUBBLE)

    @property
    def bubbles(self):
        return self in (Variant.BUBBLE, Variant.PRESSURE_BUBBLE)

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = text.strip().lower().replace("_", "+").replace("and", "+").replace(" ", "")
        for v in cls:
            if v.value == key:
                return v
        raise DomainError(f"unknown variant {text!r}; choose from {[v.value for v in cls]}")


@dataclass(frozen=True)
class SimConfig:
    shape_ratio: float = 1.476
    force_scale: float = 1.308
    delta: float = 0.854
    wall_stiffness: float = 12767.0
    contact_width: float = 0.02
    damping: float = 4.514
    dt: float = 0.005
    inner_growth_rate: float = 0.027
    pressure_low: float = 5.0
    pressure_high: float = 29.6
    outer_adjust_rate: float = 0.073
    gap_stop: float = 0.06
    max_steps: int = 2_000_000
    density_cells: int = 12
    density_threshold: Optional[int] = 4
    bubble_radius: float = 0.17
    variant: Variant = Variant.SIMPLE
    jitter: float = 0.005
    snapshot_stride: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        positive = ("force_scale", "delta", "wall_stiffness", "contact_width", "dt",
                    "inner_growth_rate", "outer_adjust_rate", "gap_stop", "bubble_radius")
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.shape_ratio > 1:
            raise DomainError(f"shape_ratio must exceed 1, got {self.shape_ratio!r}")
        if self.damping < 0 or self.jitter < 0:
            raise DomainError("damping and jitter must be nonnegative")
        if not 0 <= self.pressure_low < self.pressure_high:
            raise DomainError("need 0 <= pressure_low < pressure_high")
        if self.max_steps < 1 or self.density_cells < 1 or self.snapshot_stride < 0:
            raise DomainError("max_steps and density_cells must be >= 1, snapshot_stride >= 0")
        if self.density_threshold is not None and self.density_threshold < 0:
            raise DomainError("density_threshold must be nonnegative")
        if not self.dt * self.inner_growth_rate < self.contact_width:
            raise DomainError("dt * inner_growth_rate must be below contact_width")

    def threshold_for(self, n):
        if self.density_threshold is not None:
            return self.density_threshold
        return math.ceil(1.5 * n / self.density_cells**2)

    def pair_shape(self, natural):
        """Per-pair LJF canonical parameters for natural distance ``natural``."""
        return ljf.canonical_from_shape(
            ljf.LjfShape(natural, self.shape_ratio * natural, self.force_scale, self.delta)
        )


CONFIG_FIELDS = {f.name: f for f in fields(SimConfig)}

# A bubble on every particle of a square grid, with a soft short-range pair
# force, lets the inner block leave through one side instead of splitting
# along diagonals; jitter picks the side.
GRID_BUBBLE_CONFIG = SimConfig(
    shape_ratio=1.108, force_scale=3.032, delta=2.811, wall_stiffness=6270.0,
    damping=0.4941, inner_growth_rate=0.04108, jitter=0.006916, density_cells=4,
    density_threshold=0, bubble_radius=0.3399, max_steps=200_000, variant=Variant.BUBBLE,
)


def parse_config_text(text, base=None):
    """Read ``key=value`` lines (``#`` comments allowed) into a config."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return config_with(base or SimConfig(), values)


def config_with(cfg, values):
    """Apply string or typed overrides to ``cfg`` by field name."""
    kwargs = {}
    for key, value in values.items():
        if key not in CONFIG_FIELDS:
            raise DomainError(f"unknown config key {key!r}")
        if isinstance(value, str):
            value = _coerce(key, value)
        kwargs[key] = value
    return replace(cfg, **kwargs)


def _coerce(key, text):
    if key == "variant":
        return Variant.parse(text)
    if key == "density_threshold":
        return None if text.lower() in ("", "none", "auto") else int(text)
    if key in ("max_steps", "density_cells", "snapshot_stride"):
        return int(float(text))
    return float(text)


def format_config(cfg):
    out = []
    for name in CONFIG_FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, Variant):
            v = v.value
        out.append(f"{name}={'auto' if v is None else v}")
    return "\n".join(out) + "\n"


@dataclass
class Bubble:
    """Static circular wall; retired for good once the growing inner wall reaches it."""

    center: np.ndarray
    radius: float = 0.0
    active: bool = True


@dataclass
class SimState:
    positions: np.ndarray
    velocities: np.ndarray
    r_inner: float
    r_outer: float
    natural: np.ndarray
    bubbles: list = field(default_factory=list)
    step: int = 0
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: float = 1.0

    def copy(self):
        return SimState(
            self.positions.copy(), self.velocities.copy(), self.r_inner, self.r_outer,
            self.natural, [Bubble(b.center.copy(), b.radius, b.active) for b in self.bubbles],
            self.step, self.center.copy(), self.scale,
        )


@dataclass
class DensityGrid:
    counts: np.ndarray
    com: np.ndarray
    lo: float
    cell_size: float

    def cell_bounds(self, i, j):
        x0 = self.lo + j * self.cell_size
        y0 = self.lo + i * self.cell_size
        return (x0, x0 + self.cell_size), (y0, y0 + self.cell_size)


class PairModel:
    """Precomputed per-pair force coefficients.

    All pairs share ``p``, ``q`` (they depend only on ``shape_ratio`` and
    ``delta``), so ``F_ij(r) = C * ((L_ij/r)**q - (L_ij/r)**p)`` with one
    constant ``C``; ``G_ij = C*L**q`` and ``H_ij = C*L**p`` are the canonical
    coefficients.
    """

    def __init__(self, natural, cfg):
        self.natural = natural
        ref = cfg.pair_shape(1.0)
        self.p, self.q = ref.p, ref.q
        self.coeff = ref.H
        self.delta = cfg.delta
        self.int_delta = int(cfg.delta) if float(cfg.delta).is_integer() and cfg.delta <= 8 else 0
        self.potential_ok = self.p != 1 and self.q != 1

    def magnitudes(self, dist):
        """Pair force magnitudes; ``dist`` must carry a nonzero diagonal (the natural diagonal is 0)."""
        s = self.natural / dist
        return self.coeff * s**self.p * (s**self.delta - 1.0)

    def energy(self, dist):
        if not self.potential_ok:
            raise DomainError("pair potential needs exponents different from 1")
        iu = np.triu_indices(len(dist), 1)
        r = dist[iu]
        L = self.natural[iu]
        s = L / r
        u = self.coeff * L * (s ** (self.q - 1) / (self.q - 1) - s ** (self.p - 1) / (self.p - 1))
        return float(u.sum())


def init_state(inst, cfg: SimConfig, seed: int = 0) -> SimState:
    center, radius = enclosing_geometry(inst)
    pos = (inst.cities - center) / radius
    diff = pos[:, None, :] - pos[None, :, :]
    natural = np.hypot(diff[..., 0], diff[..., 1])
    natural.setflags(write=False)
    if cfg.jitter > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        pos = pos + rng.uniform(-cfg.jitter, cfg.jitter, size=pos.shape)
    state = SimState(
        positions=pos,
        velocities=np.zeros_like(pos),
        r_inner=0.0,
        r_outer=1.0 + cfg.contact_width,
        natural=natural,
        center=center,
        scale=radius,
    )
    if cfg.variant.bubbles:
        state.bubbles = insert_bubbles(state, cfg)
    return state


def _pair_geometry(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return diff, dist


def pair_forces(state: SimState, cfg: SimConfig, model: Optional[PairModel] = None):
    model = model or PairModel(state.natural, cfg)
    diff, dist = _pair_geometry(state.positions)
    n = len(dist)
    np.fill_diagonal(dist, 1.0)
    if dist.min() < _COINCIDENT:
        np.fill_diagonal(dist, np.inf)
        i, j = divmod(int(np.argmin(dist)), n)
        raise SingularityError(min(i, j), max(i, j), float(dist[i, j]))
    mag = model.magnitudes(dist)
    unit = mag / dist
    return (diff * unit[..., None]).sum(axis=1)


def _radial_push(rel, dist, depth, stiffness):
    """Force ``stiffness * depth`` along ``rel`` (negative depth pulls inward).

    Zero where the direction is undefined (``dist == 0``).
    """
    safe = np.where(dist > 0, dist, 1.0)
    mag = np.where(dist > 0, stiffness * depth / safe, 0.0)
    return rel * mag[:, None]


def wall_forces(state: SimState, cfg: SimConfig):
    """Radial penalty forces from the walls and bubbles, plus the total outer reaction."""
    pos = state.positions
    k, w = cfg.wall_stiffness, cfg.contact_width
    rho = np.hypot(pos[:, 0], pos[:, 1])
    outer_depth = np.maximum(rho - (state.r_outer - w), 0.0)
    inner_depth = np.maximum((state.r_inner + w) - rho, 0.0)
    force = _radial_push(pos, rho, inner_depth - outer_depth, k)
    for b in state.bubbles:
        if not b.active:
            continue
        rel = pos - b.center
        dist = np.hypot(rel[:, 0], rel[:, 1])
        force += _radial_push(rel, dist, np.maximum((b.radius + w) - dist, 0.0), k)
    reaction = float(k * outer_depth.sum())
    return force, reaction


def wall_energy(state: SimState, cfg: SimConfig):
    pos = state.positions
    k, w = cfg.wall_stiffness, cfg.contact_width
    rho = np.hypot(pos[:, 0], pos[:, 1])
    pen = np.clip(rho - (state.r_outer - w), 0, None) ** 2
    pen += np.clip((state.r_inner + w) - rho, 0, None) ** 2
    for b in state.bubbles:
        if not b.active:
            continue
        dist = np.hypot(*(pos - b.center).T)
        pen += np.clip((b.radius + w) - dist, 0, None) ** 2
    return 0.5 * k * float(pen.sum())


def total_energy(state: SimState, cfg: SimConfig, model: Optional[PairModel] = None):
    """Kinetic + pair potential + wall penalty energy."""
    model = model or PairModel(state.natural, cfg)
    _, dist = _pair_geometry(state.positions)
    np.fill_diagonal(dist, 1.0)
    kinetic = 0.5 * float((state.velocities**2).sum())
    return kinetic + model.energy(dist) + wall_energy(state, cfg)


def pressure(outer_reaction, r_outer):
    return outer_reaction / (2.0 * math.pi * r_outer)


def adjust_outer_wall(state: SimState, cfg: SimConfig, outer_reaction):
    """New outer radius after one pressure-controller update."""
    pr = pressure(outer_reaction, state.r_outer)
    r = state.r_outer
    if pr > cfg.pressure_high:
        r += cfg.outer_adjust_rate * cfg.dt
    elif pr < cfg.pressure_low:
        r = max(r - cfg.outer_adjust_rate * cfg.dt, state.r_inner + cfg.gap_stop)
    return r


def build_density_grid(state: SimState, cells: int) -> DensityGrid:
    if cells < 1:
        raise DomainError(f"cells must be >= 1, got {cells}")
    pos = state.positions
    lo = -state.r_outer
    size = 2.0 * state.r_outer / cells
    idx = np.clip(np.floor((pos - lo) / size).astype(int), 0, cells - 1)
    counts = np.zeros((cells, cells), dtype=int)
    sums = np.zeros((cells, cells, 2))
    np.add.at(counts, (idx[:, 1], idx[:, 0]), 1)
    np.add.at(sums, (idx[:, 1], idx[:, 0]), pos)
    com = np.full((cells, cells, 2), np.nan)
    filled = counts > 0
    com[filled] = sums[filled] / counts[filled][:, None]
    return DensityGrid(counts, com, lo, size)


def insert_bubbles(state: SimState, cfg: SimConfig) -> list:
    """One zero-radius bubble at the centre of mass of every cell holding more than the threshold."""
    grid = build_density_grid(state, cfg.density_cells)
    thr = cfg.threshold_for(len(state.positions))
    rows, cols = np.nonzero(grid.counts > thr)
    return [Bubble(grid.com[i, j].copy(), 0.0) for i, j in zip(rows, cols)]


def _bubble_arrays(bubbles):
    centers = np.array([b.center for b in bubbles], dtype=float).reshape(-1, 2)
    radii = np.array([b.radius for b in bubbles], dtype=float)
    active = np.array([b.active for b in bubbles], dtype=np.bool_)
    return centers, radii, active


def _advance(state, cfg, model, n_steps, check_ring, advance_walls):
    """Run the compiled loop on copies of the state arrays; returns ``(status, new_state)``."""
    pos = np.array(state.positions, dtype=float)
    vel = np.array(state.velocities, dtype=float)
    centers, radii, active = _bubble_arrays(state.bubbles)
    status, taken, r_inner, r_outer, a, b = _kernel.advance(
        pos, vel, model.natural, float(model.coeff), float(model.p), float(model.q),
        model.int_delta,
        float(cfg.wall_stiffness), float(cfg.contact_width), float(cfg.damping),
        float(cfg.dt), float(cfg.inner_growth_rate),
        float(state.r_inner), float(state.r_outer), centers, radii, active,
        float(cfg.bubble_radius),
        bool(cfg.variant.pressure), float(cfg.pressure_low), float(cfg.pressure_high),
        float(cfg.outer_adjust_rate), float(cfg.gap_stop), int(n_steps), bool(check_ring),
        bool(advance_walls),
    )
    if status == _kernel.SINGULAR:
        i, j = int(a), int(b)
        d = float(np.hypot(*(pos[i] - pos[j])))
        raise SingularityError(i, j, d)
    if status == _kernel.BLOWUP:
        raise NumericalBlowupError(state.step + taken, a)
    bubbles = [Bubble(c, float(r), bool(on)) for c, r, on in zip(centers, radii, active)]
    new = SimState(pos, vel, r_inner, r_outer, state.natural, bubbles, state.step + taken,
                   state.center, state.scale)
    return status, new


def step(state: SimState, cfg: SimConfig, model: Optional[PairModel] = None,
         advance_walls: bool = True) -> SimState:
    """Advance one semi-implicit Euler step; returns a new state.

    ``advance_walls=False`` freezes both walls, the pressure controller and
    bubble growth.
    """
    model = model or PairModel(state.natural, cfg)
    return _advance(state, cfg, model, 1, False, advance_walls)[1]


def ring_formed(state: SimState, cfg: SimConfig):
    return state.r_outer - state.r_inner <= cfg.gap_stop * (1 + 1e-9)


@dataclass
class Snapshot:
    step: int
    positions: np.ndarray
    r_inner: float
    r_outer: float
    bubbles: list


@dataclass
class RunResult:
    tour: Tour
    trace: list
    converged: bool
    steps: int
    wall_clock_s: float
    final_state: SimState


def _snapshot(state):
    return Snapshot(state.step, state.positions.copy(), state.r_inner, state.r_outer,
                    [(tuple(b.center), b.radius) for b in state.bubbles if b.active])


def run(inst, cfg: SimConfig, seed: int = 0) -> RunResult:
    """Simulate until the walls meet (or ``max_steps``) and extract the tour."""
    t0 = time.perf_counter()
    state = init_state(inst, cfg, seed)
    model = PairModel(state.natural, cfg)
    stride = cfg.snapshot_stride
    trace = [_snapshot(state)] if stride else []
    while not ring_formed(state, cfg) and state.step < cfg.max_steps:
        chunk = cfg.max_steps - state.step
        if stride:
            chunk = min(chunk, stride - state.step % stride)
        status, state = _advance(state, cfg, model, chunk, True, True)
        if stride and state.step % stride == 0 and trace[-1].step != state.step:
            trace.append(_snapshot(state))
    converged = ring_formed(state, cfg)
    if stride and trace[-1].step != state.step:
        trace.append(_snapshot(state))
    tour = extract_tour(inst, state.positions)
    return RunResult(tour, trace, converged, state.step, time.perf_counter() - t0, state)


def write_trace_csv(trace, fh, center=(0.0, 0.0), scale=1.0):
    """CSV rows ``step,particle,x,y,r_inner,r_outer`` in normalised coordinates."""
    fh.write("step,particle,x,y,r_inner,r_outer\n")
    for snap in trace:
        for i, (x, y) in enumerate(snap.positions.tolist()):
            fh.write(f"{snap.step},{i},{x!r},{y!r},{snap.r_inner!r},{snap.r_outer!r}\n")


def read_trace_csv(text):
    """Snapshots back from :func:`write_trace_csv` output (bubbles are not stored)."""
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != "step,particle,x,y,r_inner,r_outer":
        raise ParseError("trace CSV must start with header step,particle,x,y,r_inner,r_outer")
    frames = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        try:
            step, idx = int(parts[0]), int(parts[1])
            x, y, r_in, r_out = map(float, parts[2:])
        except ValueError:
            raise ParseError(f"malformed trace row {line!r}", lineno) from None
        rows = frames.setdefault(step, ([], r_in, r_out))[0]
        if idx != len(rows):
            raise ParseError(f"particle index {idx} out of order", lineno)
        rows.append((x, y))
    return [Snapshot(step, np.array(rows), r_in, r_out, [])
            for step, (rows, r_in, r_out) in frames.items()]
