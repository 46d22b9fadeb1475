import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystal_spectra import crystal as cr
from crystal_spectra import graph_core as gc
from crystal_spectra.errors import CatalogError, ValidationError


def z1():
    return cr.build_crystal(cr.standard_lattice("z1"))


def hexagonal():
    return cr.build_crystal(cr.standard_lattice("hexagonal"))


class TestBuild:
    def test_catalog_builds(self):
        for name in cr.CATALOG:
            c = cr.build_crystal(cr.standard_lattice(name))
            assert c.n >= 1 and c.l >= 1

    def test_z1_shape(self):
        c = z1()
        assert (c.dim, c.n, c.l) == (1, 1, 1)
        assert c.eta.tolist() == [[1]]

    def test_hexagonal_shape(self):
        c = hexagonal()
        assert (c.dim, c.n, c.l) == (2, 2, 3)
        assert c.eta.tolist() == [[0, 0], [1, 0], [0, 1]]

    def test_zero_edge_measure_rejected(self):
        d = cr.standard_lattice("z1").to_dict()
        d["edges"][0]["measure"] = 0
        with pytest.raises(ValidationError) as err:
            cr.build_crystal(cr.CrystalDescriptor.from_dict(d))
        assert err.value.field == "edges[0].measure"

    def test_out_of_range_vertex(self):
        desc = cr.CrystalDescriptor(1, (cr.VertexSpec("a"),), (cr.EdgeSpec(0, 3, (1,)),))
        with pytest.raises(ValidationError) as err:
            cr.build_crystal(desc)
        assert err.value.field == "edges[0].to"

    def test_wrong_eta_length(self):
        desc = cr.CrystalDescriptor(2, (cr.VertexSpec("a"),), (cr.EdgeSpec(0, 0, (1,)),))
        with pytest.raises(ValidationError):
            cr.build_crystal(desc)

    def test_unknown_catalog_name(self):
        with pytest.raises(CatalogError):
            cr.standard_lattice("unknown")


class TestJson:
    @pytest.mark.parametrize("name", sorted(cr.CATALOG))
    def test_roundtrip_lossless(self, name):
        desc = cr.standard_lattice(name)
        again = cr.CrystalDescriptor.from_json(desc.to_json())
        assert again == desc
        assert again.to_json() == desc.to_json()

    def test_roundtrip_awkward_floats(self):
        desc = cr.CrystalDescriptor(
            1, (cr.VertexSpec("v", 0.1 + 0.2, -1e-300),), (cr.EdgeSpec(0, 0, (3,), 1 / 3, 2.5e17),))
        assert cr.CrystalDescriptor.from_json(desc.to_json()) == desc

    def test_indices_accepted_for_endpoints(self):
        d = {"dimension": 1, "vertices": [{"name": "a"}], "edges": [{"from": 0, "to": 0, "eta": [1]}]}
        assert cr.CrystalDescriptor.from_dict(d) == cr.CrystalDescriptor(
            1, (cr.VertexSpec("a"),), (cr.EdgeSpec(0, 0, (1,)),))

    def test_unknown_name_reported(self):
        d = {"dimension": 1, "vertices": [{"name": "a"}], "edges": [{"from": "b", "to": "a", "eta": [1]}]}
        with pytest.raises(ValidationError) as err:
            cr.CrystalDescriptor.from_dict(d)
        assert err.value.field == "edges[0].from"

    def test_bad_json(self):
        with pytest.raises(ValidationError):
            cr.CrystalDescriptor.from_json("{not json")

    def test_file_roundtrip(self, tmp_path):
        desc = cr.standard_lattice("ladder")
        desc.save(tmp_path / "l.json")
        assert json.loads((tmp_path / "l.json").read_text())["dimension"] == 1
        assert cr.CrystalDescriptor.load(tmp_path / "l.json") == desc


class TestElements:
    def test_z_edge_index(self):
        c = z1()
        e = cr.CrystalEdge(0, (0,))
        assert cr.edge_index(c, e) == (1,)
        assert cr.edge_index(c, cr.reverse(c, e)) == (-1,)

    def test_internal_edge_index_zero(self):
        c = hexagonal()
        assert cr.edge_index(c, cr.CrystalEdge(0, (0, 0))) == (0, 0)

    def test_lift_identity(self):
        c = hexagonal()
        b = cr.CrystalVertex(1, (0, 0))
        assert cr.lift(c, (0, 0), b) == b

    def test_terminus_entire_part(self):
        c = hexagonal()
        for k in range(c.l):
            e = cr.lift(c, (3, -2), cr.CrystalEdge(k, (0, 0)))
            mu, base = cr.entire_part(cr.terminus(c, e))
            assert mu == tuple(np.add((3, -2), c.eta[k]))
            assert base.index == c.terminus[k]

    def test_edge_entire_part_is_origin_cell(self):
        c = hexagonal()
        for k in range(c.l):
            for rev in (False, True):
                e = cr.CrystalEdge(k, (1, 4), rev)
                assert cr.entire_part(e)[0] == cr.entire_part(cr.origin(c, e))[0]

    @given(st.integers(0, 2), st.integers(-50, 50), st.integers(-50, 50), st.booleans(), st.booleans())
    def test_lift_entire_part_roundtrip(self, k, a, b, is_edge, rev):
        c = hexagonal()
        base = cr.CrystalEdge(k, (0, 0), rev) if is_edge else cr.CrystalVertex(k % 2, (0, 0))
        assert cr.entire_part(cr.lift(c, (a, b), base)) == ((a, b), base)

    @given(st.integers(0, 2), st.integers(-20, 20), st.integers(-20, 20), st.booleans())
    def test_eta_invariance_and_reversal(self, k, a, b, rev):
        c = hexagonal()
        e = cr.CrystalEdge(k, (a, b), rev)
        assert cr.edge_index(c, e) == cr.edge_index(c, cr.CrystalEdge(k, (0, 0), rev))
        r = cr.reverse(c, e)
        assert cr.reverse(c, r) == e
        assert cr.origin(c, r) == cr.terminus(c, e)
        assert cr.edge_index(c, r) == tuple(-x for x in cr.edge_index(c, e))
        eta = cr.edge_index(c, e)
        assert tuple(np.subtract(cr.terminus(c, e).cell, cr.origin(c, e).cell)) == eta

    @pytest.mark.parametrize("name", sorted(cr.CATALOG))
    def test_covering_star_bijection(self, name):
        c = cr.build_crystal(cr.standard_lattice(name))
        base = c.base_graph()
        for j in range(c.n):
            v = cr.CrystalVertex(j, (5,) * c.dim)
            star = cr.outgoing_edges(c, v)
            assert len(star) == base.star(j).size
            assert all(cr.origin(c, e) == v for e in star)


class TestTruncation:
    def test_z_radius_two(self):
        t = cr.truncate(z1(), 2)
        assert (t.num_vertices, t.num_edges) == (5, 4)

    def test_hexagonal_radius_zero(self):
        t = cr.truncate(hexagonal(), 0)
        assert (t.num_vertices, t.num_edges) == (2, 1)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            cr.truncate(z1(), -1)

    @pytest.mark.parametrize("name", sorted(cr.CATALOG))
    @pytest.mark.parametrize("r", [0, 1, 3])
    def test_vertex_count(self, name, r):
        c = cr.build_crystal(cr.standard_lattice(name))
        assert cr.truncate(c, r).num_vertices == c.n * (2 * r + 1) ** c.dim

    def test_edges_have_both_ends_inside(self):
        c = hexagonal()
        t = cr.truncate(c, 2)
        expected = 0
        for mu in cr.box_cells(2, 2):
            for k in range(c.l):
                expected += bool(np.abs(mu + c.eta[k]).max() <= 2)
        assert t.num_edges == expected

    def test_measure_restriction_exact(self):
        d = cr.standard_lattice("hexagonal").to_dict()
        for i, e in enumerate(d["edges"]):
            e["measure"] = [0.3, 1.7, 2.9][i]
        d["vertices"][1]["measure"] = 0.1 + 0.2
        c = cr.build_crystal(cr.CrystalDescriptor.from_dict(d))
        t = cr.truncate(c, 2)
        assert np.all(t.measure.edge == c.m_edge[t.edge_base])
        assert np.all(t.measure.vertex.reshape(-1, 2) == c.m_vertex)

    @pytest.mark.parametrize("name", sorted(cr.CATALOG))
    def test_interior_laplacian_row(self, name):
        """Interior rows of the truncated vertex Laplacian match the crystal stencil."""
        c = cr.build_crystal(cr.standard_lattice(name))
        r = 3
        t = cr.truncate(c, r)
        for j in range(c.n):
            v = cr.CrystalVertex(j, (0,) * c.dim)
            row = {}
            for e in cr.outgoing_edges(c, v):
                w = c.m_edge[e.index] / c.m_vertex[j]
                tv = cr.terminus(c, e)
                row[tv] = row.get(tv, 0) + w
                row[v] = row.get(v, 0) - w
            lap = np.array([gc.apply_laplacian0(t.graph, np.eye(t.num_vertices)[k], t.measure)[t.vertex_id(v)]
                            for k in range(t.num_vertices)])
            expect = np.zeros(t.num_vertices)
            for u, w in row.items():
                expect[t.vertex_id(u)] += w
            np.testing.assert_allclose(lap, expect, atol=1e-14)


class TestLatticeCochain:
    def test_regrid_roundtrip(self):
        c = hexagonal()
        f = cr.LatticeCochain.random(c, 2, np.random.default_rng(1))
        assert np.all(f.regrid(5).regrid(2).vertex == f.vertex)

    def test_regrid_refuses_to_cut(self):
        c = z1()
        f = cr.LatticeCochain.random(c, 3, np.random.default_rng(1))
        with pytest.raises(ValueError):
            f.regrid(2)

    def test_truncation_roundtrip(self):
        c = hexagonal()
        f = cr.LatticeCochain.random(c, 3, np.random.default_rng(2), support_radius=2)
        t = cr.truncate(c, 4)
        g = t.from_cochain(t.to_cochain(f))
        assert np.all(g.regrid(3).vertex == f.vertex) and np.all(g.regrid(3).edge == f.edge)
