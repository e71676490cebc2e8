"""Node generation, stencil search and the node file format."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from mkmesh.nodeset import (
    DomainSpec,
    SizingError,
    StencilError,
    build_stencils,
    generate_nodes,
    load_nodes,
    save_nodes,
    uniform_grid,
)


def brute_force_neighbours(nodes, i, radius):
    d = nodes.domain.min_image(nodes.positions - nodes.positions[i])
    r = np.hypot(d[:, 0], d[:, 1])
    cand = [j for j in range(len(nodes)) if j != i and r[j] <= radius]
    return sorted(cand, key=lambda j: (r[j], j))


def test_reference_set_size_and_flags(nodes441):
    assert len(nodes441) == 441
    assert np.all(nodes441.interior)
    assert nodes441.s == pytest.approx(1 / 21, rel=1e-12)
    assert np.all(nodes441.domain.contains(nodes441.positions))


def test_quasi_uniform_spacing(nodes441):
    d = nodes441.nearest_distances()
    assert d.max() / d.min() <= 2.0
    assert d.min() > 0.5 * nodes441.s


def test_generation_is_deterministic():
    a = generate_nodes(DomainSpec.periodic(), 1 / 15, 3)
    b = generate_nodes(DomainSpec.periodic(), 1 / 15, 3)
    c = generate_nodes(DomainSpec.periodic(), 1 / 15, 4)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_spacing_too_coarse():
    with pytest.raises(SizingError):
        generate_nodes(DomainSpec.periodic(), 1.0, 1)
    with pytest.raises(SizingError):
        generate_nodes(DomainSpec.periodic(), -0.1, 1)


def test_disc_nodes():
    s = 1 / 20
    nodes = generate_nodes(DomainSpec.disc(), s, 3)
    assert abs(len(nodes) - math.pi / s ** 2) <= 0.15 * math.pi / s ** 2
    assert pdist(nodes.positions).min() >= 0.5 * s
    r = np.hypot(nodes.x, nodes.y)
    assert np.all(np.abs(r[nodes.boundary] - 1.0) < 1e-14)
    assert np.all(r[nodes.interior] < 1.0)
    assert nodes.boundary.sum() == math.ceil(2 * math.pi / s)


def test_radius_stencils_match_brute_force(nodes441):
    radius = 2.6 * nodes441.s
    st_ = build_stencils(nodes441, radius=radius)
    for i in range(0, len(nodes441), 7):
        assert list(st_[i].neighbours) == brute_force_neighbours(nodes441, i, radius)
        assert np.all(np.abs(st_[i].offsets) <= 0.5)


def test_count_stencils(nodes441):
    st_ = build_stencils(nodes441, count=20)
    assert np.all(st_.counts == 20)
    for i in (0, 100, 440):
        full = brute_force_neighbours(nodes441, i, 0.5)
        assert list(st_[i].neighbours) == full[:20]


def test_stencil_argument_errors(nodes441):
    with pytest.raises(StencilError):
        build_stencils(nodes441, count=441)
    with pytest.raises(StencilError):
        build_stencils(nodes441)
    with pytest.raises(StencilError):
        build_stencils(nodes441, radius=0.6)


def test_uniform_grid():
    g = uniform_grid(DomainSpec.periodic(), 10)
    assert len(g) == 100 and g.s == pytest.approx(0.1)
    assert len(uniform_grid(DomainSpec.periodic(), 2)) == 4
    g21 = uniform_grid(DomainSpec.periodic(), 21)
    assert np.allclose(g21.nearest_distances(), 1 / 21, rtol=1e-12)
    with pytest.raises(SizingError):
        uniform_grid(DomainSpec.periodic(), 1)


def test_uniform_grid_stencils_are_translates():
    g = uniform_grid(DomainSpec.periodic(), 12)
    st_ = build_stencils(g, radius=2.6 * g.s)
    assert np.all(st_.counts == st_.counts[0])
    # equidistant neighbours are ordered by index, so compare as sets
    rounded = np.round(st_.offsets / g.s).astype(int)
    ref = sorted(map(tuple, rounded[0]))
    assert all(sorted(map(tuple, row)) == ref for row in rounded)
    assert np.allclose(st_.offsets / g.s, rounded, atol=1e-9)


def test_save_load_round_trip(tmp_path):
    for nodes in (generate_nodes(DomainSpec.periodic(1.0, 2.0), 1 / 10, 5),
                  generate_nodes(DomainSpec.disc(0.5), 1 / 20, 2)):
        path = tmp_path / "nodes.txt"
        save_nodes(nodes, path)
        back = load_nodes(path)
        assert np.array_equal(back.positions, nodes.positions)
        assert np.array_equal(back.flags, nodes.flags)
        assert back.s == nodes.s and back.seed == nodes.seed
        assert back.domain == nodes.domain


def test_half_width_domain():
    d = DomainSpec.from_half_widths(1.0, 0.5)
    assert d.width == pytest.approx(2 * math.pi) and d.x0 == pytest.approx(-math.pi)
    nodes = generate_nodes(d, 0.3, 1)
    assert np.all(d.contains(nodes.positions))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_min_image_is_shortest(d):
    dom = DomainSpec.periodic(1.0, 2.0)
    m = dom.min_image(np.array(d))
    assert abs(m[0]) <= 0.5 + 1e-12 and abs(m[1]) <= 1.0 + 1e-12
    shift = (np.array(d) - m) / dom.box
    assert np.allclose(shift, np.round(shift), atol=1e-9)
