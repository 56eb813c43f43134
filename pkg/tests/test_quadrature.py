import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ane.exceptions import NonFiniteSampleError
from ane.quadrature import (
    Domain,
    discrete_inner,
    discrete_norm,
    integrate,
    integration_accuracy,
    read_mesh_csv,
    reference_integral,
    refine_cells,
    uniform_mesh,
    write_mesh_csv,
)

UNIT1 = Domain((0.0,), (1.0,))
SQUARE = Domain.cube(-1.0, 1.0, 2)


def test_domain_rejects_empty_box():
    with pytest.raises(ValueError):
        Domain((0.0, 1.0), (1.0, 1.0))


def test_uniform_mesh_1d():
    mesh = uniform_mesh(UNIT1, [4])
    np.testing.assert_allclose(mesh.points[:, 0], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(mesh.volumes, 0.25)


def test_uniform_mesh_2d_counts():
    mesh = uniform_mesh(SQUARE, (2, 2))
    assert mesh.n_cells == 4
    np.testing.assert_allclose(mesh.volumes, 1.0)
    assert uniform_mesh(SQUARE, (400, 400)).n_cells == 160000


def test_uniform_mesh_rectangular_cells():
    mesh = uniform_mesh(Domain((0.0, 0.0), (2.0, 1.0)), (4, 2))
    np.testing.assert_allclose(mesh.half_widths, [[0.25, 0.25]] * 8)
    assert np.sum(mesh.volumes) == pytest.approx(2.0)


def test_refine_counts_1d():
    mesh = refine_cells(uniform_mesh(UNIT1, [4]), [1])
    assert mesh.n_cells == 5
    assert sorted(mesh.levels.tolist()) == [0, 0, 0, 1, 1]


def test_refine_children_tile_parent():
    mesh = uniform_mesh(SQUARE, (2, 2))
    fine = refine_cells(mesh, {3})
    kids = fine.levels == 1
    assert kids.sum() == 4
    assert fine.volumes[kids].sum() == pytest.approx(mesh.volumes[3])
    lo = fine.centers[kids] - fine.half_widths[kids]
    hi = fine.centers[kids] + fine.half_widths[kids]
    plo = mesh.centers[3] - mesh.half_widths[3]
    phi = mesh.centers[3] + mesh.half_widths[3]
    np.testing.assert_allclose(lo.min(axis=0), plo)
    np.testing.assert_allclose(hi.max(axis=0), phi)


def _cell_set(mesh):
    return sorted(tuple(np.round(np.concatenate([c, h]), 12)) for c, h in zip(mesh.centers, mesh.half_widths))


def test_refine_all_equals_finer_uniform():
    coarse = uniform_mesh(SQUARE, (2, 2))
    assert _cell_set(refine_cells(coarse, range(4))) == _cell_set(uniform_mesh(SQUARE, (4, 4)))


def _overlap(mesh):
    lo = mesh.centers - mesh.half_widths
    hi = mesh.centers + mesh.half_widths
    for i, j in itertools.combinations(range(mesh.n_cells), 2):
        inter = np.minimum(hi[i], hi[j]) - np.maximum(lo[i], lo[j])
        if np.all(inter > 1e-14):
            return True
    return False


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 10_000), min_size=1, max_size=4), min_size=1, max_size=5), st.sampled_from([1, 2, 3]))
def test_volume_conservation_under_refinement(picks, d):
    dom = Domain.cube(-1.0, 2.0, d)
    mesh = uniform_mesh(dom, (2,) * d)
    for sel in picks:
        mesh = refine_cells(mesh, {p % mesh.n_cells for p in sel})
    assert abs(np.sum(mesh.volumes) - dom.volume) <= 1e-10 * dom.volume
    lo = mesh.centers - mesh.half_widths
    hi = mesh.centers + mesh.half_widths
    assert np.all(lo >= np.array(dom.lower) - 1e-12) and np.all(hi <= np.array(dom.upper) + 1e-12)
    if mesh.n_cells <= 40:
        assert not _overlap(mesh)


def test_integrate_constants_and_affine():
    mesh = refine_cells(uniform_mesh(Domain.cube(0, 1, 2), (3, 3)), [0, 4])
    assert integrate(mesh, lambda X: np.ones(len(X))) == pytest.approx(1.0, abs=1e-15)
    for n in (1, 3, 10):
        assert integrate(uniform_mesh(UNIT1, [n]), lambda X: X[:, 0]) == pytest.approx(0.5, abs=1e-15)


def test_integrate_square_hand_sum():
    # (0.125^2 + 0.375^2 + 0.625^2 + 0.875^2) * 0.25
    assert integrate(uniform_mesh(UNIT1, [4]), lambda X: X[:, 0] ** 2) == pytest.approx(0.328125, abs=1e-15)


def test_integrate_nonfinite_names_cell():
    mesh = uniform_mesh(UNIT1, [4])
    with pytest.raises(NonFiniteSampleError) as err, np.errstate(divide="ignore"):
        integrate(mesh, lambda X: 1.0 / (X[:, 0] - 0.625))
    assert err.value.cell_index == 2


def test_midpoint_exact_on_piecewise_affine(rng):
    mesh = uniform_mesh(SQUARE, (3, 5))
    mesh = refine_cells(mesh, [0, 7, 11])
    mesh = refine_cells(mesh, [2, 20])
    # a different affine function on every cell, integrated cell by cell
    A = rng.standard_normal((mesh.n_cells, 3))
    vals = A[:, 0] + np.sum(A[:, 1:] * mesh.centers, axis=1)
    exact = np.sum(vals * mesh.volumes)
    assert integrate(mesh, vals) == pytest.approx(exact, abs=1e-12)
    g = lambda X: 1.5 - 2.0 * X[:, 0] + 0.25 * X[:, 1]
    assert abs(integrate(mesh, g) - 4 * 1.5) <= 1e-12


def test_refinement_reduces_error_monotonically():
    errs = [abs(integrate(uniform_mesh(UNIT1, [2**k]), lambda X: X[:, 0] ** 2) - 1 / 3) for k in range(1, 6)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_discrete_norm_and_inner(rng):
    mesh = uniform_mesh(UNIT1, [16])
    assert discrete_norm(mesh, lambda X: 2.0 * np.ones(len(X))) == pytest.approx(2.0)
    g = rng.standard_normal(16)
    h = rng.standard_normal(16)
    assert abs(discrete_inner(mesh, g, h)) <= discrete_norm(mesh, g) * discrete_norm(mesh, h)
    assert discrete_inner(mesh, g, h) == pytest.approx(integrate(mesh, g * h), abs=1e-15)
    assert discrete_norm(mesh, -3.0 * g) == pytest.approx(3.0 * discrete_norm(mesh, g), rel=1e-12)
    z = np.zeros(16)
    assert discrete_norm(mesh, z) == 0.0
    z[5] = 1e-3
    assert discrete_norm(mesh, z) > 0.0


def test_integration_accuracy():
    mesh = uniform_mesh(UNIT1, [7])
    affine = lambda X: 2.0 + X[:, 0]
    assert integration_accuracy(mesh, affine, 2.5) == pytest.approx(0.0, abs=1e-15)
    sq = lambda X: X[:, 0] ** 2
    assert integration_accuracy(mesh, sq, integrate(mesh, sq)) == 0.0
    with pytest.raises(ValueError):
        integration_accuracy(mesh, sq, 0.0)


@pytest.mark.parametrize("d, counts", [(1, (37,)), (2, (30, 20))])
def test_reference_integral_matches_mesh(d, counts):
    dom = Domain.cube(-1.0, 1.0, d)
    g = lambda X: np.exp(np.sum(X, axis=1))
    full = integrate(uniform_mesh(dom, counts), g)
    assert reference_integral(dom, g, counts, chunk=64) == pytest.approx(full, rel=1e-13)


def test_mesh_csv_round_trip(tmp_path):
    mesh = refine_cells(uniform_mesh(SQUARE, (2, 3)), [1, 4])
    path = tmp_path / "mesh.csv"
    write_mesh_csv(mesh, path)
    assert path.read_text().splitlines()[0] == "center_0,center_1,half_0,half_1,level"
    back = read_mesh_csv(path, SQUARE)
    np.testing.assert_array_equal(back.centers, mesh.centers)
    np.testing.assert_array_equal(back.half_widths, mesh.half_widths)
    np.testing.assert_array_equal(back.levels, mesh.levels)
