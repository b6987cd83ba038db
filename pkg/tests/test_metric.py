import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoscale.exceptions import NonMonotonicTimes, NoValidNodes, OutOfDomain, ValidationError
from geoscale.geometry.metric import (
    GridSpec,
    MetricField,
    VelocitySeries,
    _largest_valid_box,
    auto_grid,
    estimate_metric_grid,
    estimate_velocities,
)
from geoscale.harness import SyntheticSpec, generate_synthetic
from geoscale.trajectory import FeatureTrajectory


# velocities ---------------------------------------------------------------
def test_linear_trajectory_velocity():
    t = np.linspace(0, 1, 11)
    v = estimate_velocities(FeatureTrajectory(t, np.column_stack([t, 2 * t])))
    np.testing.assert_allclose(v.velocities, np.tile([1.0, 2.0], (11, 1)), atol=1e-12)


def test_constant_trajectory_velocity():
    v = estimate_velocities(FeatureTrajectory(np.arange(5.0), np.ones((5, 2))))
    assert np.all(v.velocities == 0)


def test_circle_velocity_matches_derivative():
    t = np.arange(0, 2, 1e-3)
    v = estimate_velocities(FeatureTrajectory(t, np.column_stack([np.sin(t), np.cos(t)])))
    inner = slice(1, -1)
    np.testing.assert_allclose(v.velocities[inner], np.column_stack([np.cos(t), -np.sin(t)])[inner], atol=1e-6)
    assert v.velocities.shape == (len(t), 2)


def test_nonuniform_central_difference():
    t = np.array([0.0, 0.1, 0.4, 0.5])
    x = t**2
    v = estimate_velocities(FeatureTrajectory(t, x)).velocities[:, 0]
    np.testing.assert_allclose(v[1:3], [(0.16 - 0.0) / 0.4, (0.25 - 0.01) / 0.4])
    np.testing.assert_allclose([v[0], v[3]], [0.01 / 0.1, (0.25 - 0.16) / 0.1])


def test_velocity_errors():
    with pytest.raises(ValidationError):
        estimate_velocities(FeatureTrajectory([0.0, 1.0], [[0.0], [1.0]]))
    with pytest.raises(NonMonotonicTimes):
        # bypass the trajectory's own check to reach the estimator guard
        tr = FeatureTrajectory([0.0, 1.0, 2.0], [[0.0], [1.0], [2.0]])
        object.__setattr__(tr, "times", np.array([0.0, 2.0, 1.0]))
        estimate_velocities(tr)


def test_velocity_series_lookup():
    v = VelocitySeries(np.array([0.0, 1.0, 2.0]), np.array([[1.0], [2.0], [3.0]]))
    assert v.at(0.9)[0] == 2.0


# grid and domain ----------------------------------------------------------
def test_grid_spec():
    grid = GridSpec.from_box([0, 0], [6, 8], (7, 9))
    np.testing.assert_allclose(grid.spacing, [1, 1])
    assert grid.nodes().shape == (7, 9, 2)
    with pytest.raises(ValidationError):
        GridSpec.from_box([0, 0], [1, 1], (1, 3))


def test_largest_valid_box():
    valid = np.ones((4, 5), dtype=bool)
    valid[0, 0] = False
    box = _largest_valid_box(valid)
    assert box == (slice(0, 4), slice(1, 5))
    assert _largest_valid_box(np.eye(3, dtype=bool)) is None


def test_domain_excludes_invalid_corner():
    grid = GridSpec.from_box([0, 0], [3, 3], (4, 4))
    g = np.tile(np.eye(2), (4, 4, 1, 1))
    g[0, 0] = np.nan
    field = MetricField(grid, g)
    assert field.index_box == (slice(0, 4), slice(1, 4))
    with pytest.raises(OutOfDomain):
        field.metric_at([0.5, 0.5])
    np.testing.assert_allclose(field.metric_at([2.5, 2.5]), np.eye(2), atol=1e-12)


def test_no_valid_nodes():
    grid = GridSpec.from_box([0, 0], [1, 1], (3, 3))
    with pytest.raises(NoValidNodes):
        MetricField(grid, np.full((3, 3, 2, 2), np.nan))


# interpolation ------------------------------------------------------------
def test_knots_reproduced(rng):
    grid = GridSpec.from_box([0, 0], [2, 3], (5, 6))
    a = rng.normal(size=(5, 6, 2, 2))
    g = a @ np.swapaxes(a, -1, -2) + 0.5 * np.eye(2)
    field = MetricField(grid, g)
    for idx in [(0, 0), (2, 3), (4, 5)]:
        np.testing.assert_allclose(field.metric_at(grid.nodes()[idx]), g[idx], atol=1e-12)


def test_analytic_metric_mid_cell():
    fn = lambda p: np.stack([np.eye(2) + np.diag([0.0, x[0] ** 2]) for x in p])
    errs = []
    for n in (9, 17):
        grid = GridSpec.from_box([0, 0], [2, 2], (n, n))
        field = MetricField.from_function(grid, fn)
        q = np.array([1.0 + 0.5 * 2 / (n - 1), 0.7])
        errs.append(abs(field.metric_at(q)[1, 1] - (1 + q[0] ** 2)))
    # x1^2 is reproduced exactly by a cubic spline
    assert max(errs) < 1e-12


def test_eigenvalue_clamp_counts():
    grid = GridSpec.from_box([0, 0], [1, 1], (2, 2))
    g = np.tile(np.eye(2), (2, 2, 1, 1))
    field = MetricField(grid, g)
    bad = np.array([[[1.0, 1.0], [1.0, 1.0]]])  # singular after interpolation
    out = field._clamp(bad)
    assert field.clamp_count == 1
    assert np.linalg.eigvalsh(out[0])[0] >= 1e-9 * 2 * (1 - 1e-12)


def test_serialization_round_trip(rng):
    grid = GridSpec.from_box([0, 0], [1, 2], (3, 4))
    g = np.tile(np.diag([1.0, 2.0]), (3, 4, 1, 1))
    g[0, 3] = np.nan
    field = MetricField(grid, g)
    back = MetricField.from_json(field.to_json())
    assert back.to_json() == field.to_json()
    np.testing.assert_array_equal(back.valid, field.valid)
    assert field.to_dict()["format"] == "geoscale-metric-v1"


# estimation ---------------------------------------------------------------
def _iid_walk(n, seed):
    # walls sit one neighborhood radius beyond the [0, 6] x [0, 8] grid box so
    # reflections do not bias the velocity statistics at boundary nodes
    spec = SyntheticSpec(kind="noise-walk", duration_s=n / 10, sample_rate_hz=10,
                         box_lo=(-3, -4), box_hi=(9, 12), seed=seed, persistence=0.0)
    return generate_synthetic(spec)


def test_isotropic_velocities_give_identity():
    tr = _iid_walk(100_000, 1)
    grid = GridSpec.from_box([0, 0], [6, 8], (5, 5))
    field = estimate_metric_grid(tr, estimate_velocities(tr), grid, radius=2 * grid.spacing)
    # the walk's velocity has per-axis variance 1 (units per second)
    errs = [np.linalg.norm(g - np.eye(2), 2) for g in field.g_samples[field.valid]]
    assert field.valid.all()
    assert max(errs) <= 0.05


def test_rank_one_velocities_invalid():
    t = np.arange(200.0)
    x = np.column_stack([np.sin(t / 7), np.zeros_like(t)])
    v = VelocitySeries(t, np.tile([1.0, 0.0], (200, 1)))
    grid = GridSpec.from_box([-1, -1], [1, 1], (3, 3))
    with pytest.raises(NoValidNodes):
        estimate_metric_grid(FeatureTrajectory(t, x), v, grid)


def test_too_few_samples_invalid():
    tr = FeatureTrajectory(np.arange(10.0), np.random.default_rng(0).normal(size=(10, 2)))
    grid = GridSpec.from_box([-1, -1], [1, 1], (7, 9))
    with pytest.raises(NoValidNodes):
        estimate_metric_grid(tr, estimate_velocities(tr), grid)


def test_bad_parameters():
    tr = _iid_walk(1000, 0)
    grid = GridSpec.from_box([0, 0], [6, 8], (3, 3))
    with pytest.raises(ValidationError):
        estimate_metric_grid(tr, estimate_velocities(tr), grid, radius=0.0)
    with pytest.raises(ValidationError):
        estimate_metric_grid(tr, estimate_velocities(tr), grid, min_samples=1)


def test_tensor_law_for_linear_maps():
    tr = _iid_walk(20_000, 3)
    vel = estimate_velocities(tr)
    A = np.array([[1.5, 0.5], [-0.3, 1.2]])
    # a diagonal-free A maps boxes to parallelograms, so compare a diagonal
    # map where image neighborhoods are exactly the scaled boxes
    D = np.diag([2.0, 0.5])
    grid = GridSpec.from_box([0, 0], [6, 8], (4, 4))
    f1 = estimate_metric_grid(tr, vel, grid, radius=grid.spacing, ridge=0.0)
    tr2 = FeatureTrajectory(tr.times, tr.points @ D.T)
    grid2 = GridSpec(grid.origin * np.diag(D), grid.spacing * np.diag(D), grid.counts)
    f2 = estimate_metric_grid(tr2, estimate_velocities(tr2), grid2, radius=grid2.spacing, ridge=0.0)
    Dinv = np.linalg.inv(D)
    for ga, gb in zip(f1.g_samples[f1.valid], f2.g_samples[f2.valid]):
        np.testing.assert_allclose(gb, Dinv.T @ ga @ Dinv, rtol=1e-9)
    # a general linear map transforms the contravariant average exactly when
    # the neighborhood is the same sample set
    contra = np.mean(vel.velocities[:, :, None] * vel.velocities[:, None, :], axis=0)
    v2 = vel.velocities @ A.T
    contra2 = np.mean(v2[:, :, None] * v2[:, None, :], axis=0)
    np.testing.assert_allclose(contra2, A @ contra @ A.T, rtol=1e-12)


def test_estimation_is_order_independent():
    tr = _iid_walk(5000, 2)
    vel = estimate_velocities(tr)
    grid = GridSpec.from_box([0, 0], [6, 8], (4, 5))
    f1 = estimate_metric_grid(tr, vel, grid)
    perm = np.random.default_rng(0).permutation(len(tr))
    # node estimates only depend on which samples fall in each box
    tr_p = FeatureTrajectory(np.arange(len(tr), dtype=float), tr.points[perm])
    vel_p = VelocitySeries(tr_p.times, vel.velocities[perm])
    f2 = estimate_metric_grid(tr_p, vel_p, grid)
    np.testing.assert_allclose(f2.g_samples[f2.valid], f1.g_samples[f1.valid], rtol=1e-10)


def test_walk_fills_every_cell():
    spec = SyntheticSpec(kind="noise-walk", duration_s=1e4, sample_rate_hz=10, box_lo=(0, 0), box_hi=(6, 8), seed=1)
    tr = generate_synthetic(spec)
    grid = GridSpec.from_box([0, 0], [6, 8], (7, 9))
    cells = np.floor((tr.points - grid.origin) / grid.spacing).astype(int)
    cells = np.clip(cells, 0, np.array(grid.counts) - 2)
    counts = np.zeros((6, 8), dtype=int)
    np.add.at(counts, (cells[:, 0], cells[:, 1]), 1)
    assert counts.min() >= 8


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 0.99))
def test_auto_grid_covers_central_mass(frac):
    tr = _iid_walk(2000, 0)
    grid = auto_grid(tr, (4, 4), frac)
    inside = (tr.points >= grid.origin - 1e-12) & (tr.points <= grid.upper + 1e-12)
    assert np.all(inside.mean(axis=0) >= frac - 1e-3)
