import math

import numpy as np
import pytest

from igacq.geometry import (
    GeometryError,
    Patch,
    SingularMapError,
    assemble_boundary,
    build_space,
    collocation_points,
    cube6_patches,
    element_frame,
    eval_nets,
    format_multipatch,
    load_multipatch,
    parse_multipatch,
    refine_uniform,
    sphere6_patches,
)
from igacq.quadrature import gauss_rule
from igacq.splinekit import KnotVector, bspline_eval_all


@pytest.fixture(scope="module")
def sphere():
    return load_multipatch("builtin:sphere6")


@pytest.fixture(scope="module")
def sphere1(sphere):
    return refine_uniform(sphere, 1)


def surface_integral(b, f, n=20):
    rule = gauss_rule(n, 2)
    fr = eval_nets(b.nets, rule.points)
    return float(np.sum(f(fr.position, fr.normal) * fr.J * rule.weights[None, :]))


class TestLoad:
    def test_builtin_sphere(self, sphere):
        assert len(sphere.patches) == 6
        assert len(sphere.interfaces) == 12
        assert sphere.degree == 4
        assert sphere.n_elements == 6

    def test_cube(self):
        b = load_multipatch("builtin:cube6")
        assert len(b.patches) == 6 and len(b.interfaces) == 12

    def test_negative_weight(self):
        k = KnotVector.from_knots([0, 0, 1, 1], 1)
        w = np.ones((2, 2))
        w[0, 0] = -1.0
        with pytest.raises(GeometryError):
            Patch(k, k, np.zeros((2, 2, 3)), w)

    def test_unmatched_edge_named(self):
        patches = cube6_patches()[:5]
        with pytest.raises(GeometryError, match="unmatched edge"):
            assemble_boundary(patches)

    def test_text_round_trip(self, tmp_path):
        text = format_multipatch(sphere6_patches())
        again = parse_multipatch(text)
        for a, b in zip(sphere6_patches(), again):
            np.testing.assert_array_equal(a.ctrl, b.ctrl)
            np.testing.assert_array_equal(a.weights, b.weights)
        path = tmp_path / "sphere.txt"
        path.write_text(text)
        assert load_multipatch(str(path)).n_elements == 6

    def test_malformed(self):
        with pytest.raises(GeometryError):
            parse_multipatch("patch 0\ndegree 1 1\nknots1 0 0 1 1\n")


class TestRefinement:
    @pytest.mark.parametrize("level,count", [(0, 6), (1, 24), (2, 96)])
    def test_element_counts(self, sphere, level, count):
        assert refine_uniform(sphere, level).n_elements == count

    def test_points_stay_on_sphere(self, sphere1):
        x = np.random.default_rng(0).random((25, 2))
        fr = eval_nets(sphere1.nets, x)
        assert np.max(np.abs(np.linalg.norm(fr.position, axis=-1) - 1.0)) < 1e-12

    def test_refinement_preserves_patch_map(self, sphere, sphere1):
        u = np.linspace(0.05, 0.95, 7)
        for a, b in zip(sphere.patches, sphere1.patches):
            assert np.max(np.abs(a.evaluate(u, u[::-1]) - b.evaluate(u, u[::-1]))) < 1e-12


class TestElementFrame:
    def test_radius_and_normal(self, sphere1):
        rng = np.random.default_rng(1)
        for e in sphere1.elements[::5]:
            fr = element_frame(e, rng.random((10, 2)))
            assert np.max(np.abs(np.linalg.norm(fr.position, axis=1) - 1.0)) < 1e-12
            assert np.max(np.abs(fr.normal - fr.position)) < 1e-10

    def test_element_matches_patch(self, sphere1):
        e = sphere1.elements[7]
        x = np.array([[0.2, 0.7], [0.9, 0.1]])
        uv = e.to_patch(x)
        patch = sphere1.patches[e.patch]
        for k in range(2):
            ref = patch.evaluate(uv[k, 0], uv[k, 1])[0]
            assert np.linalg.norm(element_frame(e, x[k:k + 1]).position[0] - ref) < 1e-12

    def test_area(self, sphere1):
        assert abs(surface_integral(sphere1, lambda x, n: np.ones(x.shape[:-1])) - 4 * math.pi) < 1e-10

    def test_outward_orientation(self, sphere):
        val = surface_integral(sphere, lambda x, n: np.einsum("...k,...k->...", x, n))
        assert abs(val - 4 * math.pi) < 1e-8

    def test_degenerate_map(self):
        net = np.zeros((1, 2, 2, 4))
        net[..., 3] = 1.0
        with pytest.raises(SingularMapError):
            eval_nets(net, np.array([[0.5, 0.5]]))


class TestInterfaces:
    def test_edges_coincide(self, sphere1):
        t = np.linspace(0, 1, 50)
        for itf in sphere1.interfaces:
            pa, pb = sphere1.patches[itf.patch_a], sphere1.patches[itf.patch_b]

            def edge_pts(p, edge, s):
                u, v = {0: (s, 0 * s), 1: (0 * s + 1, s), 2: (s, 0 * s + 1), 3: (0 * s, s)}[edge]
                return p.evaluate(u, v)

            xa = edge_pts(pa, itf.edge_a, t)
            xb = edge_pts(pb, itf.edge_b, t[::-1] if itf.reversed else t)
            assert np.max(np.abs(xa - xb)) < 1e-10


class TestSpaces:
    def test_linear_continuous_dofs(self, sphere):
        assert build_space(sphere, 1, True).n_dofs == 8

    def test_constant_discontinuous_dofs(self, sphere):
        assert build_space(sphere, 0, False).n_dofs == 6

    @pytest.mark.parametrize("p,level", [(1, 1), (2, 0), (3, 1), (2, 2)])
    def test_continuous_dof_count_formula(self, sphere, p, level):
        # maximally smooth inside each patch, glued C0 across a cube-like net
        m = p + 2 ** level - 1
        assert build_space(refine_uniform(sphere, level), p, True).n_dofs == 6 * m * m + 2

    def test_gluing_rows(self, sphere1):
        G = build_space(sphere1, 2, True).G.toarray()
        assert np.all((G == 0) | (G == 1))
        np.testing.assert_array_equal(G.sum(axis=1), 1)

    def test_partition_of_unity(self, sphere1):
        sp = build_space(sphere1, 3, True)
        x = np.random.default_rng(2).random((30, 2))
        elems = np.arange(30) % sphere1.n_elements
        vals = sp.local_values(elems, x)
        assert np.max(np.abs(vals.sum(axis=1) - 1.0)) < 1e-13

    def test_T_reproduces_bsplines(self, sphere1):
        sp = build_space(sphere1, 2, True)
        rng = np.random.default_rng(3)
        for e in sphere1.elements[::3]:
            kv1, kv2 = sp.knots[e.patch]
            x = rng.random(2)
            u, v = e.to_patch(x)
            dense = np.outer(bspline_eval_all(kv1, u), bspline_eval_all(kv2, v))
            local = sp.local_values([e.index], x[None])[0]
            dm = sp.dof_maps[e.patch]
            for k, val in zip(sp.idx[e.index], local):
                i1, i2 = np.argwhere(dm == k)[0]
                assert abs(val - dense[i1, i2]) < 1e-13


class TestCollocationPoints:
    def test_linear_corners(self, sphere):
        pts = collocation_points(build_space(sphere, 1, True))
        assert len(pts) == 8
        pos = np.array([p.position for p in pts])
        np.testing.assert_allclose(np.abs(pos), 1.0 / math.sqrt(3.0), atol=1e-12)

    def test_count_and_on_sphere(self, sphere1):
        sp = build_space(sphere1, 2, True)
        pts = collocation_points(sp)
        assert len(pts) == sp.n_dofs
        pos = np.array([p.position for p in pts])
        assert np.max(np.abs(np.linalg.norm(pos, axis=1) - 1.0)) < 1e-12

    def test_lowest_owner(self, sphere1):
        sp = build_space(sphere1, 1, True)
        for p in collocation_points(sp):
            owners = [e.index for e in sphere1.elements
                      if np.min(np.linalg.norm(
                          element_frame(e, np.array([[0, 0], [1, 0], [0, 1], [1, 1.0]])).position - p.position,
                          axis=1)) < 1e-12]
            assert p.element == min(owners)


class TestAliases:
    def test_sphere_alias(self):
        a = load_multipatch("unit-sphere-6patch")
        b = load_multipatch("builtin:sphere6")
        np.testing.assert_array_equal(a.nets, b.nets)
