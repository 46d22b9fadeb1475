import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crystal_spectra import crystal as cr
from crystal_spectra import graph_core as gc
from crystal_spectra.errors import ConfigurationError, InsufficientDataError, ValidationError, WindowError
from crystal_spectra.floquet import TrigPolynomial, to_trig_polynomial
from crystal_spectra.perturbation import (
    PerturbedMeasure,
    PotentialSplit,
    RadialLaw,
    ScalarField,
    Symbol,
    TableEntry,
    apply_family,
    apply_perturbed_edge_H,
    apply_perturbed_H,
    build_edge_symbols,
    build_gb_symbols,
    decay_report,
    edge_decomposition_residual,
    fundamental_paths,
    gb_decomposition_residual,
    op_apply,
    op_matrix,
    path_end,
    path_telescope,
    profile_from_dict,
    random_compact_profile,
    random_edge_cochain,
    symbol_dagger,
    truncated_edge_difference,
)
from crystal_spectra.perturbation.symbols import constant_symbol

from helpers import lattice, weighted

CATALOG = ["z1", "z2", "hexagonal", "ladder"]


def _periodic_inner(crystal, f, g):
    r = max(f.radius, g.radius)
    f, g = f.regrid(r), g.regrid(r)
    return (np.sum(crystal.m_vertex * f.vertex * np.conj(g.vertex))
            + np.sum(crystal.m_edge * f.edge * np.conj(g.edge)))


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def test_profile_parses_all_parts():
    hexa = lattice("hexagonal")
    measure, pot = profile_from_dict(hexa, {
        "measure_multipliers": [{"base": "vertex:a", "mu": [1, 0], "factor": 2.0}],
        "radial_laws": [{"base": "edge:*", "exponent": 2.0, "amplitude": 0.5}],
        "potential": {"R_S": [{"base": "vertex:b", "mu": [0, 0], "value": 3.0}],
                      "R_L": {"exponent": 1.0, "amplitude": 1.0}},
    })
    cells = np.array([[1, 0], [0, 0]])
    assert measure.vertex_values(cells)[:, 0].tolist() == [2.0, 1.0]
    np.testing.assert_allclose(measure.edge_values(cells)[1], 1.5)
    np.testing.assert_allclose(measure.edge_values(cells)[0], 1 + 0.5 / 4)
    R = pot.vertex_values(cells)
    assert R[1, 1] == pytest.approx(3.0 + 1.0)
    assert R[0, 0] == pytest.approx(0.5)
    assert not pot.is_periodic and not measure.is_periodic


@pytest.mark.parametrize("doc, field", [
    ({"measure_multipliers": [{"base": "vertex:a", "mu": [0, 0], "factor": 0.0}]}, "measure_multipliers[0].factor"),
    ({"measure_multipliers": [{"base": "vertex:Q", "mu": [0, 0], "factor": 1.0}]}, "measure_multipliers[0].base"),
    ({"measure_multipliers": [{"base": "edge:7", "mu": [0, 0], "factor": 1.0}]}, "measure_multipliers[0].base"),
    ({"measure_multipliers": [{"base": "*", "mu": [0], "factor": 1.0}]}, "measure_multipliers[0].mu"),
    ({"radial_laws": [{"exponent": 1.0, "amplitude": -1.0}]}, "radial_laws[0]"),
    ({"potential": {"R_S": [{"mu": [0, 0], "value": "x"}]}}, "potential.R_S[0].value"),
    ({"surprise": 1}, "surprise"),
])
def test_profile_validation_names_the_field(doc, field):
    with pytest.raises(ValidationError) as info:
        profile_from_dict(lattice("hexagonal"), doc)
    assert info.value.field == field


def test_potential_split_difference_is_short_plus_long():
    z = weighted("z1", 1)
    short = ScalarField(z, (TableEntry("*", (2,), 1.5),))
    long_ = ScalarField(z, laws=(RadialLaw(1.0, 2.0),))
    pot = PotentialSplit(z, short, long_)
    cells = np.arange(-4, 5)[:, None]
    np.testing.assert_allclose(pot.vertex_values(cells) - z.r_vertex, pot.difference().vertex_values(cells))
    np.testing.assert_allclose(pot.edge_values(cells) - z.r_edge, pot.difference().edge_values(cells))


# ---------------------------------------------------------------------------
# perturbed operator
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", CATALOG)
def test_periodic_data_gives_the_free_operator(name):
    c = weighted(name, 2)
    f = cr.LatticeCochain.random(c, 2, np.random.default_rng(0))
    Hf = apply_perturbed_H(c, PerturbedMeasure.periodic(c), PotentialSplit.periodic(c), f)
    trunc = cr.truncate(c, Hf.radius + c.max_hop)
    g = trunc.to_cochain(f.regrid(trunc.radius))
    D = gc.apply_gauss_bonnet(trunc.graph, g, trunc.measure)
    direct = trunc.from_cochain(gc.Cochain(D.vertex + trunc.potential.vertex * g.vertex,
                                           D.edge + trunc.potential.edge * g.edge))
    assert (Hf - direct).max_abs() <= 1e-13


def test_edge_bump_acts_locally():
    z = lattice("z1")
    bump = PerturbedMeasure(z, [TableEntry("edge:0", (0,), 4.0)])
    f = cr.LatticeCochain.random(z, 6, np.random.default_rng(3))
    diff = apply_perturbed_H(z, bump, None, f) - apply_perturbed_H(z, None, None, f)
    nz = (np.abs(diff.vertex).max(axis=1) > 0) | (np.abs(diff.edge).max(axis=1) > 0)
    cells = diff.cells[nz, 0]
    # the bumped edge 0.e joins cells 0 and 1
    assert set(cells.tolist()) <= {-1, 0, 1, 2}
    assert nz.any()


@pytest.mark.parametrize("name", CATALOG)
def test_perturbed_operator_is_self_adjoint(name):
    c = weighted(name, 5)
    rng = np.random.default_rng(11)
    measure, pot = random_compact_profile(c, rng)
    for _ in range(5):
        f = cr.LatticeCochain.random(c, 2, rng)
        g = cr.LatticeCochain.random(c, 2, rng)
        lhs = _periodic_inner(c, apply_perturbed_H(c, measure, pot, f), g)
        rhs = _periodic_inner(c, f, apply_perturbed_H(c, measure, pot, g))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_window_too_small_is_rejected():
    z = lattice("z1")
    f = cr.LatticeCochain.random(z, 3, np.random.default_rng(0))
    with pytest.raises(WindowError):
        apply_perturbed_H(z, None, None, f, radius=3)


@pytest.mark.parametrize("name", CATALOG)
def test_edge_operator_matches_truncation(name):
    c = weighted(name, 8)
    rng = np.random.default_rng(4)
    measure, _ = random_compact_profile(c, rng, with_potential=False)
    f = random_edge_cochain(c, 2, rng)
    pert = apply_perturbed_edge_H(c, measure, PotentialSplit.periodic(c), f)
    free = apply_perturbed_edge_H(c, None, None, f)
    expected = truncated_edge_difference(c, measure, f)
    assert (pert - free - expected).max_abs() <= 1e-12


# ---------------------------------------------------------------------------
# symbol calculus
# ---------------------------------------------------------------------------

def _random_symbol(rng, dim=1, k=2, radius=3):
    shift = tuple(int(s) for s in rng.integers(-2, 3, dim))
    table = {tuple(mu): rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
             for mu in cr.box_cells(radius, dim)}

    def func(cells):
        return np.stack([table.get(tuple(c), np.zeros((k, k))) for c in cells]).astype(complex)

    return Symbol(shift, func, k, "random")


def test_dagger_fixes_hermitian_unshifted_symbols():
    H = np.array([[1.0, 2 - 1j], [2 + 1j, -3.0]])
    s = constant_symbol(H, (0,))
    cells = np.arange(-3, 4)[:, None]
    d = symbol_dagger(s)
    assert d.shift == (0,)
    np.testing.assert_array_equal(d(cells), s(cells))


def test_dagger_of_unit_shift_delta():
    M = np.array([[1, 2j], [3, 4 - 1j]])
    s = constant_symbol(M, (1,), support=[(0,)])
    d = symbol_dagger(s)
    assert d.shift == (-1,)
    cells = np.arange(-3, 4)[:, None]
    vals = d(cells)
    for c, v in zip(cells[:, 0], vals):
        expected = M.conj().T if c == -1 else np.zeros((2, 2))
        np.testing.assert_array_equal(v, expected)


def test_double_dagger_is_exact():
    rng = np.random.default_rng(0)
    cells = cr.box_cells(5, 2)
    for _ in range(100):
        s = _random_symbol(rng, dim=2)
        dd = symbol_dagger(symbol_dagger(s))
        assert dd.shift == s.shift
        np.testing.assert_array_equal(dd(cells), s(cells))


def test_identity_symbol_acts_as_identity():
    rng = np.random.default_rng(1)
    u = TrigPolynomial(3, 2, rng.standard_normal((49, 3)))
    out = op_apply(constant_symbol(np.eye(3), (0, 0)), u)
    np.testing.assert_array_equal(out.regrid(3).coeffs, u.coeffs)


def _quadrature_op(b, nu, coeffs, radius, N=32):
    """Evaluate the operator in xi-space and read the output coefficients back.

    ``u(xi) = sum_mu exp(-2 pi i xi mu) u(mu)``; the symbol multiplies each term
    by ``exp(2 pi i xi nu) b(mu)``.  Coefficients come from the trapezoidal
    rule, exact for trigonometric polynomials of degree below ``N``.
    """
    xi = np.arange(N) / N
    mus = np.arange(-radius, radius + 1)
    w = np.zeros(N, dtype=complex)
    for mu, cval in zip(mus, coeffs):
        w += np.exp(2j * np.pi * xi * nu) * b(mu) * cval * np.exp(-2j * np.pi * xi * mu)
    out_mus = np.arange(-radius - abs(nu), radius + abs(nu) + 1)
    return out_mus, np.array([np.mean(w * np.exp(2j * np.pi * xi * m)) for m in out_mus])


@pytest.mark.parametrize("source, target, value", [(0, -2, 1.0), (2, 0, 1 / 3)])
def test_decaying_symbol_against_quadrature(source, target, value):
    def b(mu):
        return 1.0 / (1.0 + abs(mu))

    s = Symbol((2,), lambda cells: (1.0 / (1.0 + np.abs(cells[:, 0])))[:, None, None].astype(complex), 1)
    coeffs = np.zeros((5, 1))
    coeffs[source + 2] = 1.0
    out = op_apply(s, TrigPolynomial(2, 1, coeffs))
    mus, oracle = _quadrature_op(b, 2, coeffs[:, 0], 2)
    got = out.regrid(4).coeffs[:, 0]
    np.testing.assert_allclose(got, oracle, atol=1e-14)
    assert got[target + 4] == pytest.approx(value)
    assert np.count_nonzero(np.abs(got) > 1e-14) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_op_is_linear_and_shifts_support(seed):
    rng = np.random.default_rng(seed)
    s = _random_symbol(rng, dim=1, radius=6)
    u = TrigPolynomial(3, 1, rng.standard_normal((7, 2)))
    v = TrigPolynomial(3, 1, rng.standard_normal((7, 2)))
    a = complex(rng.standard_normal(), rng.standard_normal())
    lhs = op_apply(s, TrigPolynomial(3, 1, u.coeffs + a * v.coeffs))
    rhs = op_apply(s, u) + TrigPolynomial(lhs.radius, 1, a * op_apply(s, v).coeffs)
    assert (lhs - rhs).max_abs() <= 1e-12
    nz_in = u.cells[np.any(u.coeffs != 0, axis=1), 0]
    out = op_apply(s, u)
    nz_out = out.cells[np.any(np.abs(out.coeffs) > 0, axis=1), 0]
    assert set(nz_out.tolist()) == set((nz_in - s.shift[0]).tolist())


@pytest.mark.parametrize("dim", [1, 2])
def test_matrix_of_dagger_is_conjugate_transpose(dim):
    rng = np.random.default_rng(dim)
    for _ in range(10):
        s = _random_symbol(rng, dim=dim, radius=4)
        A = op_matrix(s, 3, dim)
        B = op_matrix(symbol_dagger(s), 3, dim)
        assert np.abs(B - A.conj().T).max() <= 1e-13


# ---------------------------------------------------------------------------
# symbol families
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", CATALOG)
def test_periodic_data_gives_zero_families(name):
    c = weighted(name, 9)
    assert build_gb_symbols(c, PerturbedMeasure.periodic(c), PotentialSplit.periodic(c)).is_zero(3, c.dim)
    family, _ = build_edge_symbols(c, PerturbedMeasure.periodic(c))
    assert family.is_zero(3, c.dim)


def test_compact_bump_gives_compact_symbols():
    c = weighted("hexagonal", 1)
    bump = PerturbedMeasure(c, [TableEntry("vertex:a", (1, -1), 2.5), TableEntry("edge:2", (0, 0), 0.5)])
    fam = build_gb_symbols(c, bump)
    far = cr.box_cells(6, 2)
    far = far[np.abs(far).max(axis=1) > 3]
    for s in fam.all_symbols():
        assert np.all(s(far) == 0)
    assert not fam.is_zero(3, 2)


@pytest.mark.parametrize("name", CATALOG)
def test_gauss_bonnet_decomposition(name):
    rng = np.random.default_rng(hash(name) % 2**32)
    c = weighted(name, 13)
    for _ in range(5):
        measure, pot = random_compact_profile(c, rng)
        f = cr.LatticeCochain.random(c, 2, rng)
        assert gb_decomposition_residual(c, measure, pot, f) <= 1e-10


@pytest.mark.parametrize("name", CATALOG)
def test_edge_decomposition(name):
    rng = np.random.default_rng(7)
    c = weighted(name, 17)
    for _ in range(5):
        measure, _ = random_compact_profile(c, rng, with_potential=False)
        assert edge_decomposition_residual(c, measure, random_edge_cochain(c, 2, rng)) <= 1e-10


def test_decomposition_with_radial_laws():
    z = weighted("z1", 4)
    measure = PerturbedMeasure(z, [TableEntry("*", (1,), 2.0)], [RadialLaw(1.5, 0.7)])
    pot = PotentialSplit(z, ScalarField(z, (TableEntry("vertex:x1", (0,), 1.0),)),
                         ScalarField(z, laws=(RadialLaw(0.5, 2.0),)))
    f = cr.LatticeCochain.random(z, 4, np.random.default_rng(2))
    assert gb_decomposition_residual(z, measure, pot, f) <= 1e-10


@pytest.mark.parametrize("name", ["hexagonal", "ladder"])
def test_anchor_changes_split_not_sum(name):
    c = weighted(name, 21)
    rng = np.random.default_rng(0)
    measure, pot = random_compact_profile(c, rng)
    cells = cr.box_cells(3, c.dim)
    totals = []
    for anchor in range(c.n):
        fam = build_gb_symbols(c, measure, pot, anchor=anchor)
        fs = next(s for s in fam.paired if s.label == "b(fs)")
        const = fam.plain[0]
        totals.append(fs(cells) + symbol_dagger(fs)(cells) + const(cells))
    for t in totals[1:]:
        assert np.abs(t - totals[0]).max() <= 1e-13
    u = to_trig_polynomial(c, cr.LatticeCochain.random(c, 2, rng))
    outs = [apply_family(build_gb_symbols(c, measure, pot, anchor=a), u) for a in range(c.n)]
    assert (outs[0] - outs[-1]).max_abs() <= 1e-12


@pytest.mark.parametrize("name", CATALOG)
def test_edge_dagger_identities(name):
    c = weighted(name, 23)
    measure, _ = random_compact_profile(c, np.random.default_rng(5), with_potential=False)
    _, kinds = build_edge_symbols(c, measure)
    partner = {"a": "a", "b": "c", "c": "b", "d": "d"}
    cells = cr.box_cells(4, c.dim)
    checked = 0
    for kind, table in kinds.items():
        for (j, l), s in table.items():
            other = kinds[partner[kind]][(l, j)]
            d = symbol_dagger(s)
            assert d.shift == other.shift
            assert np.abs(d(cells) - other(cells)).max() <= 1e-13
            checked += 1
    assert checked > 0


# ---------------------------------------------------------------------------
# decay classification
# ---------------------------------------------------------------------------

def test_short_condition_known_cases():
    assert decay_report(RadialLaw(1.5, 1.0), "short", 2**14).classification == "converging"
    assert decay_report(RadialLaw(0.5, 1.0), "short", 2**14).classification == "diverging"


def test_long_condition_separates_from_short():
    slow = RadialLaw(0.5, 1.0)
    long_rep = decay_report(slow, "long", 2**14)
    assert long_rep.classification == "converging"
    assert long_rep.tends_to_zero
    assert decay_report(slow, "short", 2**14).classification == "diverging"


def test_constant_profile_is_flagged():
    rep = decay_report(lambda cells: np.full(cells.shape[0], 3.0), "long", 2**10)
    assert rep.classification == "converging"
    assert not rep.tends_to_zero
    assert rep.limit_estimate == pytest.approx(3.0)
    assert rep.note


def test_symbol_profiles_in_two_dimensions():
    z2 = lattice("z2")
    measure = PerturbedMeasure(z2, laws=[RadialLaw(2.0, 0.5)])
    fam = build_gb_symbols(z2, measure)
    rep = decay_report(fam.paired[0], "short", 64, max_points=2000)
    assert rep.classification == "converging"
    assert rep.to_dict()["terms"] == rep.terms


def test_too_few_scales():
    with pytest.raises(InsufficientDataError):
        decay_report(RadialLaw(1.0, 1.0), "short", 2)


def test_constant_field_telescopes_to_zero():
    c = lattice("hexagonal")
    const = ScalarField(c, laws=(RadialLaw(0.0, 2.5),))
    paths = fundamental_paths(c)
    for target in paths:
        assert path_telescope(c, const, 0, target, (3, -2), paths) == 0.0


def test_loop_path_on_z():
    z = lattice("z1")
    field = ScalarField(z, laws=(RadialLaw(1.0, 1.0),))
    path = [cr.CrystalEdge(0, (0,))]
    mu = np.arange(1, 200)[:, None]
    bound = path_telescope(z, field, 0, None, mu, path=path)
    np.testing.assert_allclose(bound, 1 / (1 + mu[:, 0]) - 1 / (2 + mu[:, 0]), rtol=1e-14)
    assert np.all(bound * mu[:, 0] ** 2 <= 1.0)
    assert path_end(z, 0, path) == cr.CrystalVertex(0, (1,))


@pytest.mark.parametrize("name", ["hexagonal", "ladder", "z2"])
def test_telescope_bounds_the_difference(name):
    c = lattice(name)
    rng = np.random.default_rng(6)
    names = c.vertex_names
    table = tuple(TableEntry(f"vertex:{names[rng.integers(c.n)]}",
                             tuple(int(x) for x in rng.integers(-3, 4, c.dim)), float(rng.normal()))
                  for _ in range(30))
    field = ScalarField(c, table, (RadialLaw(0.7, 1.3, "vertex:*"),))
    paths = fundamental_paths(c)
    mu = rng.integers(-4, 5, (50, c.dim))
    for j in range(c.n):
        bound = path_telescope(c, field, 0, ("vertex", j), mu, paths)
        gap = np.abs(field.vertex_values(mu)[:, j] - field.vertex_values(mu)[:, 0])
        assert np.all(gap <= bound + 1e-12)


def test_missing_path_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        path_telescope(lattice("z1"), ScalarField(lattice("z1")), 0, ("vertex", 5), (0,))
