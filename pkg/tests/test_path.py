"""Driving paths: joint (dW, dZ) sampling, event simulation, and the exact
multi-resolution slicing that couples every step size to one noise draw."""

import math
from dataclasses import replace

import numpy as np
import pytest

from levystep import (
    AmplitudeSpec,
    AtomSpec,
    DrivingPath,
    JumpEvent,
    LevyModel,
    PowerLawSpec,
    Region,
    build_path,
    dyadic_grid,
    sample_dw_dz,
    simulate_events,
)
from levystep.path import _sample_dw_dz_vec

IDENT = AmplitudeSpec(1.0, 1.0)


def dense_model(small_rate=4.0, tail_rate=2.0):
    # same atom positions as the shared fixture, masses scaled up so level-1
    # and level-2 slices typically hold several jumps of both regions
    half = 0.5 * small_rate
    return LevyModel(
        small=AtomSpec(((0.5, half), (-0.4, half))),
        tail=AtomSpec(((1.5, 0.5 * tail_rate), (-2.0, 0.5 * tail_rate))),
        p=IDENT, q=IDENT,
    )


# -- joint (dW, dZ) sampling -------------------------------------------------

def test_sample_dw_dz_rejects_nonpositive_delta(rng):
    for bad in (0.0, -0.25):
        with pytest.raises(ValueError):
            sample_dw_dz(bad, rng)


def test_sample_dw_dz_moments():
    # mean 0, Var dW = d, Var dZ = d^3/3, Cov = d^2/2; all within 4 s.e.
    d, n = 0.1, 30_000
    rng = np.random.default_rng(2024)
    draws = np.array([sample_dw_dz(d, rng) for _ in range(n)])
    dw, dz = draws[:, 0], draws[:, 1]
    assert abs(dw.mean()) < 4 * math.sqrt(d / n)
    assert abs(dz.mean()) < 4 * math.sqrt(d**3 / 3 / n)
    cov = np.cov(dw, dz)
    se_vw = d * math.sqrt(2 / n)
    se_vz = (d**3 / 3) * math.sqrt(2 / n)
    se_c = math.sqrt((d * d**3 / 3 + (d**2 / 2) ** 2) / n)
    assert abs(cov[0, 0] - d) < 4 * se_vw
    assert abs(cov[1, 1] - d**3 / 3) < 4 * se_vz
    assert abs(cov[0, 1] - d**2 / 2) < 4 * se_c


def test_vectorized_sampler_matches_scalar():
    # one delta, fresh generators with the same seed: identical normals in,
    # same formula out (up to pow implementation differences)
    d = 0.37
    dw_s, dz_s = sample_dw_dz(d, np.random.default_rng(5))
    dw_v, dz_v = _sample_dw_dz_vec(np.array([d]), np.random.default_rng(5))
    assert dw_s == pytest.approx(float(dw_v[0]), rel=1e-15)
    assert dz_s == pytest.approx(float(dz_v[0]), rel=1e-15)


def test_vectorized_sampler_shapes(rng):
    deltas = np.array([0.1, 0.2, 0.05])
    dw, dz = _sample_dw_dz_vec(deltas, rng)
    assert dw.shape == dz.shape == (3,)


# -- event simulation --------------------------------------------------------

def test_simulate_events_rejects_infinite_rate():
    model = LevyModel(small=PowerLawSpec(1.0, 0.5),
                      tail=AtomSpec(((1.5, 0.5),)), p=IDENT, q=IDENT)
    with pytest.raises(ValueError, match="infinite"):
        simulate_events(1.0, model, np.random.default_rng(0))


def test_simulate_events_rejects_bad_horizon(finite_model, rng):
    with pytest.raises(ValueError):
        simulate_events(0.0, finite_model, rng)


def test_simulate_events_zero_rate():
    empty = LevyModel(small=AtomSpec(()), tail=AtomSpec(()), p=IDENT, q=IDENT)
    assert simulate_events(1.0, empty, np.random.default_rng(0)) == ()


def test_simulate_events_structure(finite_model):
    rng = np.random.default_rng(99)
    for _ in range(50):
        events = simulate_events(2.0, finite_model, rng)
        times = [t for t, _, _ in events]
        assert all(0.0 < t < 2.0 for t in times)
        assert times == sorted(times)
        for _, mark, region in events:
            if region is Region.SMALL:
                assert mark in (0.5, -0.4)
            else:
                assert mark in (1.5, -2.0)


def test_simulate_events_count_law_and_region_split(finite_model):
    # N(T) ~ Poisson(rate * T) with rate 1.5; regions split 2:1 small:tail
    horizon, n_runs = 2.0, 3000
    rng = np.random.default_rng(77)
    counts = []
    n_small = n_total = 0
    for _ in range(n_runs):
        ev = simulate_events(horizon, finite_model, rng)
        counts.append(len(ev))
        n_total += len(ev)
        n_small += sum(1 for _, _, r in ev if r is Region.SMALL)
    lam = finite_model.active_rate * horizon
    mean = np.mean(counts)
    assert abs(mean - lam) < 4 * math.sqrt(lam / n_runs)
    assert 0.88 < np.var(counts) / mean < 1.12
    frac = n_small / n_total
    se = math.sqrt(frac * (1 - frac) / n_total)
    assert abs(frac - 2.0 / 3.0) < 4 * se


def test_simulate_events_deterministic(finite_model):
    a = simulate_events(1.0, finite_model, np.random.default_rng(np.random.SeedSequence((7, 3))))
    b = simulate_events(1.0, finite_model, np.random.default_rng(np.random.SeedSequence((7, 3))))
    assert a == b


# -- dyadic grids ------------------------------------------------------------

def test_dyadic_grid_basics():
    g = dyadic_grid(1.0, 2)
    assert np.array_equal(g, [0.0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        dyadic_grid(1.0, -1)


@pytest.mark.parametrize("horizon", [1.0, 0.7, 3.2])
def test_dyadic_grid_cross_level_consistent(horizon):
    # coarse grids are bitwise subsets of finer ones, even for horizons that
    # are not exactly representable
    for level in range(6):
        assert np.array_equal(dyadic_grid(horizon, level + 1)[::2],
                              dyadic_grid(horizon, level))


# -- path construction -------------------------------------------------------

def test_build_path_event_grid_is_union(finite_model):
    path = build_path(1.0, 5, finite_model, np.random.default_rng(11))
    jump_times = np.array([j.time for j in path.jumps])
    expected = np.sort(np.concatenate((dyadic_grid(1.0, 5), jump_times)))
    assert np.array_equal(path.event_times, expected)
    assert np.all(np.diff(path.event_times) > 0)
    assert np.array_equal(path.w_values,
                          np.concatenate(([0.0], np.cumsum(path.dw))))
    assert np.array_equal(path.event_times[path.cell_edges], dyadic_grid(1.0, 5))


def test_build_path_jump_records(finite_model):
    path = build_path(1.0, 5, finite_model, np.random.default_rng(11))
    assert len(path.jumps) > 0
    for j in path.jumps:
        assert path.event_times[j.event_index] == j.time
        if j.region is Region.SMALL:
            assert 0 < abs(j.mark) < 1
        else:
            assert abs(j.mark) >= 1


def test_build_path_level_array_shapes(finite_model):
    path = build_path(1.0, 4, finite_model, np.random.default_rng(3))
    for lvl in range(5):
        assert path.level_dw[lvl].size == 2**lvl
        assert path.level_dz[lvl].size == 2**lvl


def test_build_path_reproducible(finite_model):
    a = build_path(1.0, 6, finite_model, np.random.default_rng(np.random.SeedSequence((5, 0))))
    b = build_path(1.0, 6, finite_model, np.random.default_rng(np.random.SeedSequence((5, 0))))
    assert np.array_equal(a.event_times, b.event_times)
    assert np.array_equal(a.dw, b.dw)
    assert np.array_equal(a.z_locals, b.z_locals)
    assert a.jumps == b.jumps


def test_build_path_rejects_negative_level(finite_model, rng):
    with pytest.raises(ValueError):
        build_path(1.0, -1, finite_model, rng)


class ScriptedRng:
    """Just enough of the Generator surface to force chosen arrival times."""

    def __init__(self, exponentials, uniforms):
        self._exp = list(exponentials)
        self._uni = list(uniforms)

    def exponential(self, scale):
        return self._exp.pop(0)

    def random(self):
        return self._uni.pop(0)

    def choice(self, n, p=None):
        return 0

    def standard_normal(self, shape):
        return np.zeros(shape)


def test_build_path_nudges_dyadic_collision(finite_model, caplog):
    # one small jump exactly at 0.5 = 4/8: collides with the level-3 grid and
    # must move by one ulp rather than corrupt the event grid
    scripted = ScriptedRng(exponentials=[0.5, 10.0], uniforms=[0.0])
    with caplog.at_level("WARNING", logger="levystep.path"):
        path = build_path(1.0, 3, finite_model, scripted)
    assert len(path.jumps) == 1
    assert path.jumps[0].time == float(np.nextafter(0.5, np.inf))
    assert path.event_times.size == 2**3 + 1 + 1
    assert any("nudged" in rec.message for rec in caplog.records)


def test_build_path_nudges_duplicate_jump_times(finite_model):
    # two arrivals at the same instant (zero holding time): the second is
    # shifted one ulp up, both survive
    scripted = ScriptedRng(exponentials=[0.3, 0.0, 10.0], uniforms=[0.0, 0.0])
    path = build_path(1.0, 3, finite_model, scripted)
    times = [j.time for j in path.jumps]
    assert len(times) == 2
    assert times[0] == 0.3
    assert times[1] == float(np.nextafter(0.3, np.inf))
    assert np.all(np.diff(path.event_times) > 0)


# -- two-level aggregation identities ----------------------------------------

def test_two_level_coupling_is_exact():
    path = build_path(1.0, 8, dense_model(), np.random.default_rng(21))
    for level in range(8):
        parents = path.slices(level)
        children = path.slices(level + 1)
        width = 1.0 / 2 ** (level + 1)
        for i, par in enumerate(parents):
            cl, cr = children[2 * i], children[2 * i + 1]
            assert par.delta_w == cl.delta_w + cr.delta_w  # 0 ulp
            assert par.delta_z == cl.delta_z + cr.delta_z + cl.delta_w * width
            assert par.w_left == cl.w_left


def test_slices_match_direct_gap_aggregation():
    path = build_path(1.0, 6, dense_model(), np.random.default_rng(22))
    grid = path.grid(3)
    direct = [path.slice_between(float(grid[i]), float(grid[i + 1]))
              for i in range(8)]
    for tree, gap in zip(path.slices(3), direct):
        assert tree.delta_w == pytest.approx(gap.delta_w, abs=1e-12)
        assert tree.delta_z == pytest.approx(gap.delta_z, abs=1e-12)
        assert tree.jumps == gap.jumps
        assert tree.w_left == gap.w_left


def test_finest_cell_without_jumps_is_a_single_gap(finite_model):
    path = build_path(1.0, 5, finite_model, np.random.default_rng(4))
    counts = np.diff(path.cell_edges)
    cells = path.slices(5)
    bare = [i for i in range(32) if counts[i] == 1]
    assert bare  # rate 1.5 on 32 cells leaves plenty of jump-free cells
    for i in bare:
        gap = path.cell_edges[i]
        assert cells[i].delta_w == path.dw[gap]
        assert cells[i].delta_z == path.z_locals[gap]
        assert cells[i].count == 0


def test_whole_horizon_slice(finite_model):
    # the tree aggregate sums in a different order than cumsum, so compare
    # with a tolerance, not bitwise
    path = build_path(1.0, 4, finite_model, np.random.default_rng(6))
    (top,) = path.slices(0)
    assert top.delta_w == pytest.approx(float(path.w_values[-1]), abs=1e-12)
    assert top.count == len(path.jumps)


# -- arbitrary dyadic grids --------------------------------------------------

def test_slice_grid_uniform_matches_slices():
    path = build_path(1.0, 6, dense_model(), np.random.default_rng(30))
    for level in (0, 2, 4, 6):
        via_grid = path.slice_grid(path.grid(level))
        for a, b in zip(via_grid, path.slices(level)):
            assert a == b


def test_slice_grid_non_uniform_matches_slice_between():
    path = build_path(1.0, 6, dense_model(), np.random.default_rng(31))
    picker = np.random.default_rng(8)
    for _ in range(20):
        k = np.unique(np.concatenate(([0, 64], picker.integers(1, 64, size=6))))
        grid = dyadic_grid(1.0, 6)[k]
        for slc in path.slice_grid(grid):
            ref = path.slice_between(slc.left, slc.right)
            scale = max(1.0, abs(ref.delta_z))
            assert slc.delta_w == pytest.approx(ref.delta_w, abs=1e-12)
            assert abs(slc.delta_z - ref.delta_z) < 1e-12 * scale
            assert slc.jumps == ref.jumps


def test_slice_grid_validation(finite_model):
    path = build_path(1.0, 4, finite_model, np.random.default_rng(1))
    with pytest.raises(ValueError, match="two points"):
        path.slice_grid(np.array([0.0]))
    with pytest.raises(ValueError, match="span"):
        path.slice_grid(np.array([0.0, 0.5]))
    with pytest.raises(ValueError, match="increasing"):
        path.slice_grid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError, match="dyadic"):
        path.slice_grid(np.array([0.0, 0.3, 1.0]))


# -- partial slices and jump bookkeeping -------------------------------------

def test_slice_between_partial_to_jump_time():
    path = build_path(1.0, 5, dense_model(), np.random.default_rng(40))
    grid = path.grid(2)
    j = next(j for j in path.jumps if grid[0] < j.time < grid[1])
    slc = path.slice_between(0.0, j.time)
    ia, ib = 0, path.event_index(j.time)
    assert slc.delta == j.time
    assert slc.delta_w == pytest.approx(
        float(path.w_values[ib] - path.w_values[ia]), abs=1e-12)
    # right endpoint included, left excluded
    assert slc.jumps[-1].time == j.time
    assert all(0.0 < sj.time <= j.time for sj in slc.jumps)


def test_slice_between_additivity():
    path = build_path(1.0, 5, dense_model(), np.random.default_rng(41))
    a, m, b = 0.0, 0.5, 1.0
    left = path.slice_between(a, m)
    right = path.slice_between(m, b)
    full = path.slice_between(a, b)
    assert full.delta_w == pytest.approx(left.delta_w + right.delta_w, abs=1e-12)
    want_dz = left.delta_z + right.delta_z + left.delta_w * (b - m)
    assert full.delta_z == pytest.approx(want_dz, abs=1e-12)
    assert full.count == left.count + right.count


def test_slice_between_validation(finite_model):
    path = build_path(1.0, 4, finite_model, np.random.default_rng(2))
    with pytest.raises(ValueError, match="order"):
        path.slice_between(0.5, 0.5)
    with pytest.raises(ValueError, match="not an event time"):
        path.slice_between(0.0, 0.3)


def test_lookahead_fields_match_naive_scan():
    # each jump must know the next jump of each region strictly after it,
    # capped at the slice end; verify against an O(K^2) rescan
    for seed in (50, 51, 52):
        path = build_path(1.0, 5, dense_model(8.0, 4.0), np.random.default_rng(seed))
        for slc in path.slices(1):
            i_right = path.event_index(slc.right)
            w_right = float(path.w_values[i_right])
            for k, sj in enumerate(slc.jumps):
                nxt = {Region.SMALL: (slc.right, w_right),
                       Region.TAIL: (slc.right, w_right)}
                for later in slc.jumps[k + 1:]:
                    if later.region is Region.SMALL and nxt[Region.SMALL][0] == slc.right:
                        nxt[Region.SMALL] = (later.time, later.w_value)
                    if later.region is Region.TAIL and nxt[Region.TAIL][0] == slc.right:
                        nxt[Region.TAIL] = (later.time, later.w_value)
                assert (sj.next_small_time, sj.w_next_small) == nxt[Region.SMALL]
                assert (sj.next_tail_time, sj.w_next_tail) == nxt[Region.TAIL]
                assert sj.w_value == float(path.w_values[path.event_index(sj.time)])


# -- jump filtering and lookups ----------------------------------------------

def test_with_jumps_keeps_noise(finite_model):
    path = build_path(1.0, 5, dense_model(), np.random.default_rng(60))
    tail_only = path.with_jumps(j for j in path.jumps if j.region is Region.TAIL)
    assert np.array_equal(tail_only.event_times, path.event_times)
    assert np.array_equal(tail_only.w_values, path.w_values)
    assert all(j.region is Region.TAIL for j in tail_only.jumps)
    for a, b in zip(tail_only.slices(2), path.slices(2)):
        assert a.delta_w == b.delta_w and a.delta_z == b.delta_z
        assert len(a.jumps) <= len(b.jumps)


def test_with_jumps_rejects_foreign_jump(finite_model):
    path = build_path(1.0, 4, finite_model, np.random.default_rng(61))
    alien = JumpEvent(time=0.123, mark=0.5, region=Region.SMALL, event_index=1)
    with pytest.raises(ValueError, match="belong"):
        path.with_jumps([alien])
    if path.jumps:
        shifted = replace(path.jumps[0], event_index=0)
        with pytest.raises(ValueError, match="belong"):
            path.with_jumps([shifted])


def test_event_index_and_grid_lookups(finite_model):
    path = build_path(1.0, 4, finite_model, np.random.default_rng(62))
    assert path.event_index(0.0) == 0
    assert path.event_index(1.0) == path.event_times.size - 1
    with pytest.raises(ValueError):
        path.event_index(0.1234567)
    assert np.array_equal(path.grid(2), dyadic_grid(1.0, 2))
    with pytest.raises(ValueError):
        path.grid(5)
    with pytest.raises(ValueError):
        path.grid(-1)


# -- binary dump ---------------------------------------------------------------

def test_bytes_roundtrip(finite_model):
    path = build_path(1.0, 5, dense_model(), np.random.default_rng(70))
    clone = DrivingPath.from_bytes(path.to_bytes())
    assert np.array_equal(clone.event_times, path.event_times)
    assert np.array_equal(clone.dw, path.dw)
    assert np.array_equal(clone.z_locals, path.z_locals)
    assert np.array_equal(clone.w_values, path.w_values)
    assert np.array_equal(clone.cell_edges, path.cell_edges)
    assert clone.jumps == path.jumps
    for lvl in range(6):
        assert np.array_equal(clone.level_dw[lvl], path.level_dw[lvl])
        assert np.array_equal(clone.level_dz[lvl], path.level_dz[lvl])


def test_bytes_rejects_garbage(finite_model):
    path = build_path(1.0, 3, finite_model, np.random.default_rng(71))
    blob = bytearray(path.to_bytes())
    blob[0] ^= 0xFF
    with pytest.raises(ValueError, match="dump"):
        DrivingPath.from_bytes(bytes(blob))
