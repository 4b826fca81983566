import io
import math
from dataclasses import replace

import numpy as np
import pytest

from nbtsp import _kernel, sim
from nbtsp.errors import DomainError, NumericalBlowupError, ParseError, SingularityError
from nbtsp.instances import CityInstance, gen_grid, gen_random_uniform
from nbtsp.sim import Bubble, SimConfig, SimState, Variant

SQUARE = CityInstance("square", [(0, 0), (1, 0), (1, 1), (0, 1)])
CFG = SimConfig()


def free_state(n=6, seed=0, spread=0.02):
    """Random instance, particles displaced from rest, walls far from everything."""
    inst = gen_random_uniform(n, seed)
    st = sim.init_state(inst, replace(CFG, jitter=spread), seed)
    rng = np.random.default_rng(seed)
    st.velocities = rng.normal(scale=0.1, size=st.positions.shape)
    st.r_outer = 100.0
    st.r_inner = 0.0
    st.positions = st.positions + 3.0  # keep every particle clear of the inner band
    return st


# config --------------------------------------------------------------------

def test_default_config_is_valid_and_stable():
    assert CFG.dt * CFG.inner_growth_rate < CFG.contact_width
    assert CFG.gap_stop > 2 * CFG.contact_width


@pytest.mark.parametrize(
    "change",
    [
        dict(shape_ratio=1.0), dict(dt=0), dict(damping=-1), dict(pressure_low=6, pressure_high=5),
        dict(dt=1.0, inner_growth_rate=1.0), dict(density_cells=0), dict(max_steps=0),
        dict(density_threshold=-1), dict(variant="sideways"),
    ],
)
def test_config_validation(change):
    with pytest.raises(DomainError):
        replace(CFG, **change)


def test_config_text_round_trip():
    cfg = replace(CFG, dt=0.002, variant=Variant.PRESSURE_BUBBLE, density_threshold=3)
    assert sim.parse_config_text(sim.format_config(cfg)) == cfg
    text = "# comment\ndt = 0.004\ninner-growth-rate=0.02\nvariant=bubble\n"
    got = sim.parse_config_text(text)
    assert (got.dt, got.inner_growth_rate, got.variant) == (0.004, 0.02, Variant.BUBBLE)
    with pytest.raises(DomainError):
        sim.parse_config_text("nonsense=1")
    with pytest.raises(DomainError):
        sim.parse_config_text("dt 0.1")


def test_variant_parse():
    assert Variant.parse("Pressure+Bubble") is Variant.PRESSURE_BUBBLE
    assert Variant.parse("pressure_bubble") is Variant.PRESSURE_BUBBLE
    assert Variant.SIMPLE.pressure is False and Variant.BUBBLE.bubbles is True


def test_auto_threshold():
    cfg = replace(CFG, density_cells=8, density_threshold=None)
    assert cfg.threshold_for(48) == math.ceil(1.5 * 48 / 64)
    assert replace(cfg, density_threshold=3).threshold_for(48) == 3


# init ----------------------------------------------------------------------

@pytest.mark.parametrize("inst", [SQUARE, gen_grid(4, 4), gen_random_uniform(20, 1)])
def test_init_normalizes(inst):
    st = sim.init_state(inst, replace(CFG, jitter=0.0))
    assert np.abs(st.positions.mean(axis=0)).max() <= 1e-12
    assert abs(np.hypot(*st.positions.T).max() - 1.0) <= 1e-12
    assert st.r_inner == 0.0 and st.r_outer == 1.0 + CFG.contact_width
    assert not st.velocities.any()
    nat = st.natural
    assert np.array_equal(nat, nat.T) and not np.diag(nat).any()
    assert (nat[~np.eye(inst.n, dtype=bool)] > 0).all()


def test_square_natural_distances():
    st = sim.init_state(SQUARE, replace(CFG, jitter=0.0))
    scale = 1 / (math.sqrt(2) / 2)
    off = np.unique(np.round(st.natural[~np.eye(4, dtype=bool)], 12))
    assert off.tolist() == pytest.approx([scale, math.sqrt(2) * scale])


def test_jitter_uses_seed_and_leaves_natural():
    cfg = replace(CFG, jitter=0.01)
    a = sim.init_state(SQUARE, cfg, seed=1)
    b = sim.init_state(SQUARE, cfg, seed=1)
    c = sim.init_state(SQUARE, cfg, seed=2)
    plain = sim.init_state(SQUARE, replace(CFG, jitter=0.0))
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)
    assert np.array_equal(a.natural, plain.natural)
    assert np.abs(a.positions - plain.positions).max() <= 0.01


# forces --------------------------------------------------------------------

def test_pair_model_matches_canonical_per_pair():
    st = sim.init_state(gen_random_uniform(5, 2), CFG)
    model = sim.PairModel(st.natural, CFG)
    from nbtsp import ljf

    for i, j in [(0, 1), (2, 4), (1, 3)]:
        c = CFG.pair_shape(st.natural[i, j])
        assert c.q == pytest.approx(model.q) and c.p == pytest.approx(model.p)
        for r in (0.5, 1.0, 2.0):
            d = r * st.natural[i, j]
            expect = ljf.force_eval(c, d)
            s = st.natural[i, j] / d
            got = model.coeff * s**model.p * (s**model.delta - 1)
            assert got == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_zero_force_at_natural_distances():
    st = sim.init_state(gen_random_uniform(7, 0), replace(CFG, jitter=0.0))
    assert np.abs(sim.pair_forces(st, CFG)).max() <= 1e-12


def test_closer_than_natural_repels():
    st = sim.init_state(SQUARE, replace(CFG, jitter=0.0))
    st.positions = st.positions * 0.9
    f = sim.pair_forces(st, CFG)
    # every particle is pushed away from the centre
    assert (np.einsum("ij,ij->i", f, st.positions) > 0).all()
    st.positions = st.positions / 0.9 * 1.1
    f = sim.pair_forces(st, CFG)
    assert (np.einsum("ij,ij->i", f, st.positions) < 0).all()


def test_pair_forces_sum_to_zero():
    st = free_state(12, 4, spread=0.1)
    total = sim.pair_forces(st, CFG).sum(axis=0)
    assert np.abs(total).max() <= 1e-10 * CFG.force_scale


def test_coincident_pair_is_singular():
    st = sim.init_state(SQUARE, CFG)
    st.positions[2] = st.positions[1]
    with pytest.raises(SingularityError) as exc:
        sim.pair_forces(st, CFG)
    assert exc.value.pair == (1, 2)
    with pytest.raises(SingularityError):
        sim.step(st, CFG)


def test_wall_force_examples():
    cfg = replace(CFG, wall_stiffness=10.0, contact_width=0.1)
    st = sim.init_state(SQUARE, cfg)
    st.r_inner, st.r_outer = 0.2, 2.0
    st.positions = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    f, reaction = sim.wall_forces(st, cfg)
    assert not f.any() and reaction == 0.0
    st.positions = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    f, reaction = sim.wall_forces(st, cfg)
    assert f[0] == pytest.approx([-10.0 * 0.1, 0.0])
    assert f[1] == pytest.approx([10.0 * 0.1, 0.0])
    assert reaction == pytest.approx(2 * 10.0 * 0.1)
    st.positions = np.array([[0.25, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    f, _ = sim.wall_forces(st, cfg)
    assert f[0] == pytest.approx([10.0 * 0.05, 0.0])


def test_bubble_pushes_outward():
    cfg = replace(CFG, wall_stiffness=10.0, contact_width=0.1)
    st = sim.init_state(SQUARE, cfg)
    st.bubbles = [Bubble(np.array([0.5, 0.5]), 0.2)]
    st.positions = np.array([[0.6, 0.5], [-0.7, 0.0], [0.0, -0.7], [-0.5, -0.5]])
    f, _ = sim.wall_forces(st, cfg)
    assert f[0] == pytest.approx([10.0 * 0.2, 0.0])
    assert not f[1:].any()


def test_kernel_matches_reference_forces():
    inst = gen_random_uniform(15, 9)
    cfg = replace(CFG, variant=Variant.PRESSURE_BUBBLE, density_threshold=0, jitter=0.05)
    st = sim.init_state(inst, cfg, 3)
    st.r_inner, st.r_outer = 0.4, 0.9
    for b in st.bubbles:
        b.radius = 0.1
    st.bubbles[0].active = False
    model = sim.PairModel(st.natural, cfg)
    ref = sim.pair_forces(st, cfg, model)
    wall, reaction = sim.wall_forces(st, cfg)
    out = np.empty_like(st.positions)
    centers, radii, active = sim._bubble_arrays(st.bubbles)
    got_reaction, si, _ = _kernel.forces(
        st.positions, st.natural, model.coeff, model.p, model.q, model.int_delta,
        cfg.wall_stiffness, cfg.contact_width, st.r_inner, st.r_outer, centers, radii, active,
        out,
    )
    assert si == -1
    np.testing.assert_allclose(out, ref + wall, rtol=1e-10, atol=1e-10)
    assert got_reaction == pytest.approx(reaction, rel=1e-12)


def test_non_integer_delta_kernel_path():
    cfg = replace(CFG, delta=1.7, jitter=0.05)
    st = sim.init_state(gen_random_uniform(8, 1), cfg, 1)
    model = sim.PairModel(st.natural, cfg)
    assert model.int_delta == 0
    ref = sim.pair_forces(st, cfg, model) + sim.wall_forces(st, cfg)[0]
    out = np.empty_like(st.positions)
    c, r, on = sim._bubble_arrays([])
    _kernel.forces(st.positions, st.natural, model.coeff, model.p, model.q, 0,
                   cfg.wall_stiffness, cfg.contact_width, st.r_inner, st.r_outer, c, r, on, out)
    np.testing.assert_allclose(out, ref, rtol=1e-10, atol=1e-10)


# pressure, density, bubbles -----------------------------------------------

def test_pressure_formula():
    assert sim.pressure(0.0, 2.0) == 0.0
    assert sim.pressure(2 * 3.0, 1.5) == pytest.approx(3.0 / (math.pi * 1.5))
    assert sim.pressure(4.0, 2.0) == pytest.approx(sim.pressure(4.0, 1.0) / 2)


def test_adjust_outer_wall():
    cfg = replace(CFG, pressure_low=1.0, pressure_high=2.0, outer_adjust_rate=0.5, dt=0.01)
    st = sim.init_state(SQUARE, cfg)
    st.r_outer = 1.0
    mid = 1.5 * 2 * math.pi
    assert sim.adjust_outer_wall(st, cfg, mid) == 1.0
    assert sim.adjust_outer_wall(st, cfg, 10 * mid) == pytest.approx(1.005)
    assert sim.adjust_outer_wall(st, cfg, 0.0) == pytest.approx(0.995)
    st.r_inner = 1.0 - cfg.gap_stop - 0.001
    assert sim.adjust_outer_wall(st, cfg, 0.0) == pytest.approx(st.r_inner + cfg.gap_stop)


def test_density_grid_examples():
    st = sim.init_state(gen_grid(4, 4), replace(CFG, jitter=0.0))
    g = sim.build_density_grid(st, 2)
    assert g.counts.tolist() == [[4, 4], [4, 4]]
    for i in range(2):
        for j in range(2):
            (x0, x1), (y0, y1) = g.cell_bounds(i, j)
            cx, cy = g.com[i, j]
            assert x0 <= cx <= x1 and y0 <= cy <= y1
    st.positions = np.array([[0.1, 0.1]] * 15 + [[-0.5, -0.5]]) + np.linspace(0, 1e-3, 16)[:, None]
    g = sim.build_density_grid(st, 4)
    assert g.counts.sum() == 16 and g.counts.max() == 15
    k = np.unravel_index(g.counts.argmax(), g.counts.shape)
    assert g.com[k] == pytest.approx(st.positions[:15].mean(axis=0))
    assert np.isnan(g.com[g.counts == 0]).all()
    with pytest.raises(DomainError):
        sim.build_density_grid(st, 0)


def test_insert_bubbles():
    cfg = replace(CFG, variant=Variant.BUBBLE, density_cells=4, density_threshold=3)
    st = sim.init_state(gen_grid(4, 4), replace(cfg, jitter=0.0))
    assert sim.insert_bubbles(st, cfg) == []
    st.positions[:6] = [0.1, 0.1] + np.arange(6)[:, None] * 1e-3
    bubbles = sim.insert_bubbles(st, cfg)
    assert len(bubbles) == 1
    grid = sim.build_density_grid(st, 4)
    cell = np.floor((st.positions - grid.lo) / grid.cell_size).astype(int)
    members = (cell == cell[0]).all(axis=1)
    assert members.sum() > 3
    assert bubbles[0].center == pytest.approx(st.positions[members].mean(axis=0))
    assert bubbles[0].radius == 0.0
    grid = sim.build_density_grid(st, 4)
    assert len(sim.insert_bubbles(st, replace(cfg, density_threshold=0))) == (grid.counts > 0).sum()


def test_bubbles_grow_then_hold():
    cfg = replace(CFG, variant=Variant.BUBBLE, bubble_radius=0.01)
    st = sim.init_state(gen_random_uniform(8, 0), cfg)
    st.bubbles = [Bubble(np.array([0.7, 0.0]), 0.0), Bubble(np.array([0.0, -0.7]), 0.0)]
    model = sim.PairModel(st.natural, cfg)
    st1 = sim.step(st, cfg, model)
    assert all(b.radius == pytest.approx(cfg.inner_growth_rate * cfg.dt) for b in st1.bubbles)
    _, far = sim._advance(st, cfg, model, 2000, False, True)
    assert all(b.active and b.radius == cfg.bubble_radius for b in far.bubbles)
    assert all(np.array_equal(a.center, b.center) for a, b in zip(st.bubbles, far.bubbles))


def test_inner_wall_retires_bubbles_it_reaches():
    cfg = replace(CFG, variant=Variant.BUBBLE, bubble_radius=0.01)
    st = sim.init_state(gen_random_uniform(8, 0), cfg)
    st.bubbles = [Bubble(np.array([0.3, 0.0]), 0.0), Bubble(np.array([0.0, -0.7]), 0.0)]
    model = sim.PairModel(st.natural, cfg)
    _, far = sim._advance(st, cfg, model, 2000, False, True)
    near, outer = far.bubbles
    assert far.r_inner + 2 * cfg.contact_width >= 0.3 - near.radius
    assert not near.active and outer.active
    assert len(sim._snapshot(far).bubbles) == 1
    probe = far.copy()
    probe.positions = np.array([[0.3, 0.005]] + [[0.0, 0.9]] * 7) + np.arange(8)[:, None] * 1e-3
    probe.r_inner, probe.r_outer = 0.0, 5.0
    force, _ = sim.wall_forces(probe, cfg)
    assert not force[0].any()


# stepping ------------------------------------------------------------------

def test_step_at_rest_only_moves_inner_wall():
    cfg = replace(CFG, jitter=0.0)
    st = sim.init_state(gen_grid(4, 4), cfg)
    st1 = sim.step(st, cfg)
    assert np.array_equal(st1.positions, st.positions)
    assert st1.r_inner == pytest.approx(cfg.inner_growth_rate * cfg.dt)
    assert st1.step == 1 and st.step == 0


def test_step_deterministic():
    st = free_state(10, 2)
    a = sim.step(st, CFG)
    b = sim.step(st, CFG)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)


def test_momentum_conserved_without_walls_or_drag():
    cfg = replace(CFG, damping=0.0)
    st = free_state(10, 5)
    model = sim.PairModel(st.natural, cfg)
    p0 = st.velocities.sum(axis=0)
    for _ in range(100):
        st = sim.step(st, cfg, model, advance_walls=False)
    assert np.abs(st.velocities.sum(axis=0) - p0).max() <= 1e-10


def test_energy_non_increasing_with_frozen_walls():
    # dissipation is a continuous-time property; the stiff walls need a fine step
    cfg = replace(CFG, jitter=0.05, damping=1.0, dt=5e-5)
    st = sim.init_state(gen_random_uniform(12, 3), cfg, 3)
    st.r_inner, st.r_outer = 0.3, 0.95
    model = sim.PairModel(st.natural, cfg)
    e = sim.total_energy(st, cfg, model)
    for _ in range(4000):
        st = sim.step(st, cfg, model, advance_walls=False)
        e1 = sim.total_energy(st, cfg, model)
        assert e1 <= e + 1e-8 * abs(e)
        e = e1


def test_blowup_is_reported():
    cfg = replace(CFG, dt=10.0, inner_growth_rate=1e-4, contact_width=0.02, gap_stop=0.05)
    st = sim.init_state(gen_random_uniform(8, 0), replace(cfg, jitter=0.3), 0)
    with pytest.raises((NumericalBlowupError, SingularityError)):
        for _ in range(200):
            st = sim.step(st, cfg)


def test_blowup_error_fields():
    err = NumericalBlowupError(12, 3.5)
    assert err.step == 12 and err.max_force == 3.5


# full runs -----------------------------------------------------------------

def test_run_deterministic_and_bands():
    inst = gen_random_uniform(10, 7)
    cfg = replace(CFG, snapshot_stride=200, jitter=0.01)
    a = sim.run(inst, cfg, 5)
    b = sim.run(inst, cfg, 5)
    assert a.tour == b.tour
    assert len(a.trace) == len(b.trace)
    for s, t in zip(a.trace, b.trace):
        assert s.step == t.step and np.array_equal(s.positions, t.positions)
    assert a.converged
    fs = a.final_state
    rho = np.hypot(*fs.positions.T)
    w = cfg.contact_width
    assert (rho >= fs.r_inner - w).all() and (rho <= fs.r_outer + w).all()
    assert all(s.r_inner <= s.r_outer for s in a.trace)
    assert a.trace[0].step == 0 and a.trace[-1].step == a.steps


@pytest.mark.parametrize("variant", list(Variant))
def test_walls_ordered_for_every_variant(variant):
    cfg = replace(CFG, variant=variant, snapshot_stride=50, density_threshold=1)
    res = sim.run(gen_random_uniform(12, 1), cfg, 0)
    assert all(s.r_inner <= s.r_outer for s in res.trace)
    assert sorted(res.tour.order) == list(range(12))


def test_natural_never_mutated():
    inst = gen_random_uniform(9, 3)
    st = sim.init_state(inst, CFG)
    before = st.natural.copy()
    with pytest.raises(ValueError):
        st.natural[0, 1] = 1.0
    res = sim.run(inst, CFG)
    assert np.array_equal(res.final_state.natural, before)


def test_scale_invariance():
    inst = gen_random_uniform(9, 8)
    scaled = CityInstance("scaled", inst.cities * 4.0 + 7.0)
    a = sim.run(inst, CFG)
    b = sim.run(scaled, CFG)
    assert a.tour.order == b.tour.order


def test_non_convergence_flagged():
    res = sim.run(gen_random_uniform(8, 0), replace(CFG, max_steps=10))
    assert not res.converged and res.steps == 10
    assert sorted(res.tour.order) == list(range(8))


def test_trace_csv_round_trip():
    res = sim.run(gen_random_uniform(6, 0), replace(CFG, snapshot_stride=1000))
    buf = io.StringIO()
    sim.write_trace_csv(res.trace, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "step,particle,x,y,r_inner,r_outer"
    back = sim.read_trace_csv(text)
    assert [s.step for s in back] == [s.step for s in res.trace]
    for s, t in zip(back, res.trace):
        assert np.array_equal(s.positions, t.positions) and s.r_outer == t.r_outer
    with pytest.raises(ParseError):
        sim.read_trace_csv("a,b\n")
