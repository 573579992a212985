import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatline.errors import IllPosedGridError, ValidationError
from heatline.heat import (
    HeatDistribution,
    ProtocolInstance,
    characteristic_from_distribution,
    scaled_tol,
    swap_unitary,
    tpm_distribution,
)
from heatline.interferometer import sample_shots, shot_plans
from heatline.operators import HermitianOperator, basis_state, random_hermitian
from heatline.spectroscopy import (
    CharacteristicSamples,
    GapSet,
    gap_set,
    project_simplex,
    reconstruct,
    time_grid,
)


def test_qubit_gaps():
    np.testing.assert_allclose(gap_set(HermitianOperator(np.diag([0.0, 1.0]))).gaps, [-1, 0, 1])


def test_equal_spacing_merges():
    np.testing.assert_allclose(gap_set(HermitianOperator(np.diag([0.0, 1.0, 2.0]))).gaps, [-2, -1, 0, 1, 2])


def test_gap_count_brute_force():
    rng = np.random.default_rng(21)
    for _ in range(5):
        h = random_hermitian(4, rng)
        e = np.linalg.eigvalsh(h.matrix)
        diffs = np.sort([a - b for a in e for b in e])
        tol = scaled_tol(diffs, 1e-9)
        distinct = 1 + int(np.sum(np.diff(diffs) > tol))
        assert len(gap_set(h)) == distinct


def test_gap_set_invariants():
    with pytest.raises(ValidationError):
        GapSet([1.0, 2.0])
    with pytest.raises(ValidationError):
        GapSet([-1.0, 0.0, 2.0])


def test_grid_for_qubit():
    grid = time_grid(GapSet([-1.0, 0.0, 1.0]), points=8)
    assert grid.spacing <= math.pi / 2 + 1e-15
    assert grid.span >= 2 * math.pi
    assert grid.sampling_ok and grid.resolution_ok
    assert grid.times[0] == 0.0


def test_single_gap_grid():
    np.testing.assert_array_equal(time_grid(GapSet([0.0])).times, [0.0, 1.0])


def test_too_few_points_rejected():
    with pytest.raises(ValidationError):
        time_grid(GapSet([-1.0, 0.0, 1.0]), points=4)


def test_unresolvable_grid():
    with pytest.raises(IllPosedGridError):
        time_grid(GapSet([-1.0, -1.0 + 1e-7, 0.0, 1.0 - 1e-7, 1.0]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4))
def test_random_grid_inequalities(seed, d):
    gaps = gap_set(random_hermitian(d, np.random.default_rng(seed)))
    grid = time_grid(gaps)
    dt = np.diff(grid.times)
    assert np.max(dt) <= (math.pi / 2) / gaps.q_max * (1 + 1e-12)
    assert grid.times[-1] >= 2 * math.pi / gaps.min_separation * (1 - 1e-12)


def test_noiseless_round_trip():
    rng = np.random.default_rng(30)
    h = random_hermitian(3, rng)
    gaps = gap_set(h)
    p = rng.dirichlet(np.ones(len(gaps)))
    dist = HeatDistribution(gaps.gaps, p)
    grid = time_grid(gaps)
    samples = CharacteristicSamples(grid.times, characteristic_from_distribution(dist, grid.times))
    res = reconstruct(samples, gaps)
    np.testing.assert_allclose(res.distribution.p, p, atol=1e-8)
    assert res.residual_rms < 1e-10


def test_constant_signal_single_atom():
    gaps = GapSet([-1.0, 0.0, 1.0])
    grid = time_grid(gaps)
    res = reconstruct(CharacteristicSamples(grid.times, np.ones(len(grid))), gaps)
    np.testing.assert_allclose(res.distribution.p, [0, 1, 0], atol=1e-12)


def test_rank_deficient_grid_rejected():
    gaps = GapSet([-1.0, 0.0, 1.0])
    # t multiples of 2 pi make all three columns identical
    t = 2 * math.pi * np.arange(6)
    with pytest.raises(IllPosedGridError):
        reconstruct(CharacteristicSamples(t, np.ones(6)), gaps)


def test_shot_noise_swap_within_condition_bound():
    h = HermitianOperator(np.diag([0.0, 1.0]))
    inst = ProtocolInstance(swap_unitary(2), h, 1.0, basis_state(2, 1))
    gaps = gap_set(h)
    grid = time_grid(gaps)
    m = 10**5
    est = [sample_shots(inst, t, shot_plans(m, 2024, j)) for j, t in enumerate(grid.times)]
    res = reconstruct(CharacteristicSamples.from_estimates(est), gaps)
    oracle = tpm_distribution(inst)
    bound = 5 * res.condition_estimate / math.sqrt(m)
    for q, p in zip(gaps.gaps, res.distribution.p):
        assert abs(p - oracle.probability_at(q)) <= bound


def test_simplex_projection_brute_force():
    rng = np.random.default_rng(40)
    for _ in range(20):
        v = rng.normal(size=4)
        x = project_simplex(v)
        assert x.min() >= 0 and abs(x.sum() - 1) < 1e-12
        # KKT: coordinates in the support share the same shift
        shift = (v - x)[x > 0]
        np.testing.assert_allclose(shift, shift[0], atol=1e-12)
        assert np.all(v[x == 0] <= shift[0] + 1e-12)
    np.testing.assert_allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
