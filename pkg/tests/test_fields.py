import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamlab.fields import (BeamBox, Grid, ModalField, concat, index_derivative, sbp_derivative,
                            scalar_product, simpson_weights, stretched_nodes)


def uniform_grid(box, nx=64, ny=2001, ymax=None):
    ymax = box.height if ymax is None else ymax
    y = np.linspace(0.0, ymax, ny)
    return Grid(box.x_min + box.lx * np.arange(nx) / nx, y, np.full(ny, y[1] - y[0]), box.lx)


def random_field(rng, box, size=6, slow=True):
    kidx = rng.integers(-4, 5, size)
    decay = rng.uniform(0.5, 3, size) + 1j * rng.normal(size=size) if slow else -1j * rng.normal(size=size)
    coef = rng.normal(size=(size, 3)) + 1j * rng.normal(size=(size, 3))
    return ModalField(box, kidx, rng.normal(size=size), decay, coef)


BOX = BeamBox(2 * math.pi, 8.0)


@given(st.integers(12, 80))
def test_sbp_property(n):
    D, h = sbp_derivative(n)
    Q = np.diag(h) @ D.toarray()
    boundary = np.zeros((n, n))
    boundary[0, 0], boundary[-1, -1] = -1, 1
    assert np.allclose(Q + Q.T, boundary, atol=1e-13)


def test_sbp_derivative_is_exact_on_quadratics():
    y = np.arange(20.0)
    D, _ = sbp_derivative(20)
    assert np.allclose(D @ (y ** 2), 2 * y, atol=1e-10)


def test_index_derivative_is_fourth_order():
    errors = []
    for n in (41, 81, 161):
        y = np.linspace(0, 1, n)
        h = y[1] - y[0]
        approx = index_derivative(n) @ np.sin(3 * y) / h
        errors.append(np.max(np.abs(approx - 3 * np.cos(3 * y))))
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(rates > 3.5)


def test_stencils_need_enough_nodes():
    with pytest.raises(ValueError):
        index_derivative(5)
    with pytest.raises(ValueError):
        sbp_derivative(11)
    with pytest.raises(ValueError):
        simpson_weights(4)


@settings(max_examples=30)
@given(st.floats(1.0, 50.0), st.floats(1e-4, 1e-2), st.floats(0.05, 1.0))
def test_stretched_nodes_span_and_cluster(ymax, dmin, dmax):
    y, h = stretched_nodes(ymax, dmin, dmax)
    assert y[0] == 0 and y[-1] == ymax and y.size % 2 == 1
    assert np.all(np.diff(y) > 0)
    assert np.diff(y)[0] <= 1.5 * min(dmin, dmax)
    assert simpson_weights(y.size) @ h == pytest.approx(ymax, rel=1e-6)


def test_grid_derivative_through_node_map():
    box = BeamBox(2 * math.pi, 20.0)
    grid = Grid.for_box(box, 0.1, 1e-3, 0.05)
    f = np.exp(-grid.y)[:, None] * np.cos(grid.x)[None, :]
    dy = grid.ddy(f)
    dx = grid.ddx(f)
    assert np.max(np.abs(dy + f)) < 1e-6
    assert np.max(np.abs(dx + np.exp(-grid.y)[:, None] * np.sin(grid.x)[None, :])) < 1e-10


def test_modal_norm_matches_grid_quadrature():
    rng = np.random.default_rng(0)
    modal = random_field(rng, BOX)
    field = modal.evaluate(uniform_grid(BOX))
    assert modal.l2() == pytest.approx(field.l2(), rel=1e-6)


def test_modal_norm_of_duplicated_modes():
    rng = np.random.default_rng(1)
    modal = random_field(rng, BOX)
    doubled = concat([modal, modal])
    assert doubled.l2() == pytest.approx(2 * modal.l2(), rel=1e-12)
    assert (modal - modal).l2() == pytest.approx(0.0, abs=1e-10 * modal.l2())


def test_modal_derivatives_match_grid_derivatives():
    rng = np.random.default_rng(2)
    modal = random_field(rng, BOX)
    grid = Grid.for_box(BOX, BOX.lx / 64, 1e-3, 0.02)
    field = modal.evaluate(grid)
    for axis, numeric in (("x", grid.ddx(field.u)), ("y", grid.ddy(field.u))):
        exact = modal.derivative(axis).evaluate(grid).u
        assert np.max(np.abs(numeric - exact)) <= 1e-5 * np.max(np.abs(exact))


def test_time_derivative_matches_finite_difference():
    rng = np.random.default_rng(3)
    modal = random_field(rng, BOX)
    grid = uniform_grid(BOX, ny=101)
    h = 1e-4
    numeric = (modal.evaluate(grid, 0.3 + h).u - modal.evaluate(grid, 0.3 - h).u) / (2 * h)
    exact = modal.derivative("t").evaluate(grid, 0.3).u
    assert np.max(np.abs(numeric - exact)) <= 1e-6 * np.max(np.abs(exact))


def test_wall_trace_matches_evaluation():
    rng = np.random.default_rng(4)
    modal = random_field(rng, BOX)
    trace = modal.wall_trace()
    grid = uniform_grid(BOX, ny=11)
    field = modal.evaluate(grid)
    phases = np.exp(1j * np.outer(modal.K, grid.x - BOX.x0))
    u_wall = 2 * np.real(trace[:, 0] @ phases)
    assert np.allclose(field.u[0], u_wall, atol=1e-12 * np.max(np.abs(u_wall)))


def test_scalar_product_matches_pointwise_product():
    rng = np.random.default_rng(5)
    left, right = random_field(rng, BOX, 5), random_field(rng, BOX, 4)
    grid = uniform_grid(BOX, nx=64, ny=301)
    product = scalar_product(left, right, "w", "b").evaluate(grid, 0.7).u
    direct = left.evaluate(grid, 0.7).w * right.evaluate(grid, 0.7).b
    assert np.allclose(product, direct, atol=1e-12 * np.max(np.abs(direct)))


def test_scalar_product_rejects_mismatched_cells():
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError):
        scalar_product(random_field(rng, BOX), random_field(rng, BeamBox(1.0, 1.0)))


def test_merged_keeps_the_field():
    rng = np.random.default_rng(7)
    modal = random_field(rng, BOX)
    merged = concat([modal, modal.scaled(2.0)]).merged()
    assert merged.size == modal.size
    grid = uniform_grid(BOX, ny=51)
    assert np.allclose(merged.evaluate(grid, 0.4).stack(), 3 * modal.evaluate(grid, 0.4).stack())


def test_evaluate_rejects_unresolved_grid():
    modal = ModalField(BOX, [40], [0.0], [1.0], [[1, 0, 0]])
    with pytest.raises(ValueError, match="unresolved"):
        modal.evaluate(uniform_grid(BOX, nx=32, ny=11))


def test_inconsistent_mode_arrays_are_rejected():
    with pytest.raises(ValueError):
        ModalField(BOX, [1, 2], [0.0], [1.0], [[1, 0, 0]])


def test_beam_box_dimensions():
    box = BeamBox.for_beam(1e-3, 0.5, math.pi / 4, x0=1.0)
    assert box.lx == pytest.approx(2 * 6 * 0.5 * math.sin(math.pi / 2))
    assert box.x_min == pytest.approx(1.0 - box.lx / 2)
    assert box.height == pytest.approx(box.ly / 2)
