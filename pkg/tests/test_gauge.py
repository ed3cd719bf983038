import numpy as np
import pytest

from magnls.calculus import Grid, bump, energy_EA, prepare_potential
from magnls.field import curl, curl_of_samples, field_library
from magnls.gauge import (
    MassLossError,
    composition_constant,
    corrected_potential,
    corrected_potential_samples,
    linear_bound_check,
    make_shift,
    potential_at_infinity,
    rephase_field,
    shift_apply,
    shift_invert,
    shifted_corrected_samples,
)

GRID = Grid(8.0, 129, dim=2)


def phase_on(A, y, grid=GRID, **kw):
    return rephase_field(A, y, grid, **kw)


# ---------------------------------------------------------------------------
# Re-phasing
# ---------------------------------------------------------------------------

def test_phase_zero_field_is_zero():
    ph = phase_on(field_library("zero"), (1.0, -2.0))
    assert np.all(ph.samples.values == 0.0)


def test_phase_at_origin_is_zero_for_any_field():
    ph = phase_on(field_library("landau", b=1.0), (0.0, 0.0))
    assert np.all(ph.samples.values == 0.0)


def test_phase_landau_closed_form():
    # phi_y(x) = -b y1 (x2 - y2); at y=(1,2), x=(3,5) the value is -3
    A = field_library("landau", b=1.0)
    ph = phase_on(A, (1.0, 2.0))
    X = GRID.nodes()
    exact = -1.0 * (X[..., 1] - 2.0)
    assert np.max(np.abs(ph.samples.values - exact)) <= 1e-8
    i = np.argmin(np.abs(GRID.axes[0] - 3.0))
    j = np.argmin(np.abs(GRID.axes[1] - 5.0))
    assert ph.samples.values[i, j] == pytest.approx(-3.0, abs=1e-10)


def test_phase_at_half_normalization():
    # closed form under at_half: phi_y(x) = -b y1 x2 + b y1 y2 / 2
    A = field_library("landau", b=0.7)
    y = (1.0, 2.0)
    ph = phase_on(A, y, normalization="at_half")
    X = GRID.nodes()
    exact = -0.7 * y[0] * X[..., 1] + 0.7 * y[0] * y[1] / 2.0
    assert np.max(np.abs(ph.samples.values - exact)) <= 1e-9


def test_phase_slab_derivative_relations():
    # on the slab x1 = y1 the x2-derivative of phi equals -A2(y1, x2)
    A = field_library("gaussian_decay", b0=0.5, s=1.0)
    y = np.array([0.5, -0.25])
    grid = Grid(4.0, 129, dim=2)
    ph = rephase_field(A, y, grid)
    i = np.argmin(np.abs(grid.axes[0] - y[0]))
    assert abs(grid.axes[0][i] - y[0]) < 1e-12  # y lies on the lattice
    col = ph.samples.values[i, :]
    d2 = np.gradient(col, grid.h[1])
    pts = np.stack([np.full_like(grid.axes[1], y[0]), grid.axes[1]], axis=-1)
    expected = -A(pts)[:, 1]
    assert np.max(np.abs(d2[2:-2] - expected[2:-2])) <= 1e-3  # O(h^2)


# ---------------------------------------------------------------------------
# Corrected potential
# ---------------------------------------------------------------------------

def test_corrected_potential_landau_closed_form():
    A = field_library("landau", b=0.6)
    y = (1.0, 2.0)
    ph = phase_on(A, y)
    X = GRID.nodes()
    for construction in ("direct_formula", "grad_of_phase"):
        cp = corrected_potential(A, ph, GRID, construction=construction)
        assert np.max(np.abs(cp.samples[0])) <= 1e-8
        assert np.max(np.abs(cp.samples[1] - 0.6 * (X[..., 0] - 1.0))) <= 1e-8


def test_corrected_vanishes_at_base_point():
    A = field_library("gaussian_decay", b0=0.5, s=1.0)
    y = np.array([0.75, -1.25])
    samples = corrected_potential_samples(A, y, [np.array([y[0]]), np.array([y[1]])])
    assert np.max(np.abs(samples)) <= 1e-12


def test_corrected_zero_field_stays_zero():
    A = field_library("zero")
    ph = phase_on(A, (2.0, -1.0))
    cp = corrected_potential(A, ph, GRID)
    assert np.max(np.abs(cp.samples)) <= 1e-14


def test_corrected_constructions_agree():
    A = field_library("gaussian_decay", b0=0.5, s=1.0)
    grid = Grid(4.0, 129, dim=2)
    ph = rephase_field(A, (0.5, 1.0), grid)
    direct = corrected_potential(A, ph, grid, construction="direct_formula")
    grad = corrected_potential(A, ph, grid, construction="grad_of_phase")
    h2 = grid.h[0] ** 2
    assert np.max(np.abs(direct.samples - grad.samples)) <= 5.0 * h2


def test_direct_formula_requires_jacobian():
    from magnls.field import PotentialField

    A = field_library("landau", b=1.0)
    A_nojac = PotentialField(2, A.eval_fn, None, tag="custom")
    ph = phase_on(A_nojac, (1.0, 0.0))
    with pytest.raises(ValueError, match="jacobian"):
        corrected_potential(A_nojac, ph, GRID, construction="direct_formula")


def test_slab_vanishing_gaussian():
    # (A_y)_2 vanishes on the slab x1 = y1; (A_y)_1 vanishes everywhere
    A = field_library("gaussian_decay", b0=0.5, s=1.0)
    y = np.array([0.5, -0.75])
    grid = Grid(4.0, 65, dim=2)
    cp = corrected_potential(A, rephase_field(A, y, grid), grid, construction="direct_formula")
    assert np.max(np.abs(cp.samples[0])) <= 1e-8
    slab = corrected_potential_samples(A, y, [np.array([y[0]]), grid.axes[1]])
    assert np.max(np.abs(slab[1])) <= 1e-8


def test_gauge_invariance_of_curl():
    # curl(A_y) equals curl(A) within O(h^2), factor-4 on halving h
    A = field_library("gaussian_decay", b0=0.5, s=1.0)
    y = (0.5, 0.25)
    errs = []
    for n in (65, 129):
        grid = Grid(4.0, n, dim=2)
        cp = corrected_potential(A, rephase_field(A, y, grid), grid, construction="direct_formula")
        sampled = curl_of_samples(cp.samples, grid.h)
        jac = A.jacobian(grid.nodes())
        exact = jac[..., 0, 1] - jac[..., 1, 0]
        errs.append(np.max(np.abs(sampled[(1, 2)] - exact)))
    ratio = errs[0] / errs[1]
    assert 3.4 <= ratio <= 4.6


# ---------------------------------------------------------------------------
# Linear bound
# ---------------------------------------------------------------------------

def test_linear_bound_landau_point_value():
    # |A_y(x)| = 2 at y=(1,2), x=(3,5) with bound 1 * sqrt(13)
    A = field_library("landau", b=1.0)
    y = np.array([1.0, 2.0])
    samples = corrected_potential_samples(A, y, [np.array([3.0]), np.array([5.0])])
    mag = float(np.sqrt(np.sum(samples**2)))
    assert mag == pytest.approx(2.0, abs=1e-10)
    assert mag <= 1.0 * np.sqrt(13.0)


@pytest.mark.parametrize("tag,kw", [
    ("landau", {"b": 1.0}),
    ("symmetric", {"b": 1.0}),
    ("gaussian_decay", {"b0": 0.5, "s": 1.0}),
])
def test_linear_bound_zero_violations(tag, kw):
    A = field_library(tag, **kw)
    B = curl(A, 8.0, 129)
    for y in [(0.0, 0.0), (1.0, 2.0), (-2.0, 0.5), (0.25, -0.25), (-1.5, -1.5)]:
        cp = corrected_potential(A, rephase_field(A, y, GRID), GRID, construction="direct_formula")
        rep = linear_bound_check(cp, B)
        assert rep["violating_nodes"] == 0
        assert rep["max_violation"] <= 1e-8
        assert rep["max_violation_componentwise"] <= 1e-8


# ---------------------------------------------------------------------------
# Shifts
# ---------------------------------------------------------------------------

def test_shift_roundtrip_plain_translation_exact():
    A = field_library("zero")
    u = bump(GRID, center=(1.0, -1.0), width=0.8, wave=(0.7, -0.3))
    g = make_shift(A, (1.0, 0.5), GRID)
    back = shift_invert(g, shift_apply(g, u))
    steps = GRID.is_lattice_vector(np.array([1.0, 0.5]))
    inner = (slice(0, GRID.n[0] - steps[0]), slice(0, GRID.n[1] - steps[1]))
    assert np.array_equal(back.values[inner], u.values[inner])


def test_shift_identity_at_zero():
    A = field_library("landau", b=1.0)
    u = bump(GRID, width=1.0)
    g = make_shift(A, (0.0, 0.0), GRID)
    assert np.array_equal(shift_apply(g, u).values, u.values)


def test_shift_modulus_preservation():
    A = field_library("landau", b=1.0)
    u = bump(GRID, width=0.8, wave=(0.4, 0.0))
    g = make_shift(A, (1.0, 2.0), GRID)
    moved = shift_apply(g, u)
    from magnls.gauge import _shift_values

    expected = np.abs(_shift_values(u.values, g.steps))
    assert np.max(np.abs(np.abs(moved.values) - expected)) <= 1e-14


def test_shift_roundtrip_generic_phase_near_exact():
    A = field_library("landau", b=1.0)
    u = bump(GRID, width=0.8)
    g = make_shift(A, (1.0, 1.0), GRID)
    back = shift_invert(g, shift_apply(g, u))
    steps = g.steps
    inner = (slice(0, GRID.n[0] - steps[0]), slice(0, GRID.n[1] - steps[1]))
    err = np.max(np.abs(back.values[inner] - u.values[inner]))
    assert err <= 2e-15  # a couple of ulps of the unit phase rotation


def test_shift_rejects_non_lattice():
    A = field_library("zero")
    with pytest.raises(ValueError, match="multiple"):
        make_shift(A, (0.3, 0.0), GRID)


def test_shift_mass_loss_error_names_fraction():
    A = field_library("zero")
    u = bump(GRID, center=(6.0, 0.0), width=1.0)
    g = make_shift(A, (4.0, 0.0), GRID, max_loss=1e-6)
    with pytest.raises(MassLossError, match="fraction"):
        shift_apply(g, u)


def test_energy_transport_identity():
    # E_A(g_y u) = E_{A_y(.+y)}(u) exactly when the staircase phase vanishes
    from magnls.gauge import ShiftedCorrectedField

    u = bump(GRID, center=(-3.0, 0.0), width=0.7, wave=(0.5, 0.2))
    cases = [
        (field_library("landau", b=1.0), (0.0, 2.0)),
        (field_library("gaussian_decay", b0=0.5, s=1.0), (6.0, 0.0)),
        (field_library("lattice_periodic", b=0.5, period=2.0), (2.0, 0.5)),
    ]
    for A, y in cases:
        g = make_shift(A, y, GRID, max_loss=1e-4)
        lhs = energy_EA(shift_apply(g, u), A)
        rhs = energy_EA(u, prepare_potential(ShiftedCorrectedField(A, y), GRID))
        assert abs(lhs - rhs) / lhs <= 1e-8, (A.tag, y)


def test_periodic_energy_isometry():
    A = field_library("lattice_periodic", b=0.5, period=2.0)
    u = bump(GRID, width=0.8, wave=(0.3, -0.2))
    for y in [(2.0, 0.0), (4.0, 2.0), (2.0, 1.0)]:
        g = make_shift(A, y, GRID, max_loss=1e-6)
        assert abs(energy_EA(shift_apply(g, u), A) - energy_EA(u, A)) / energy_EA(u, A) <= 1e-8


def test_commutation_within_discretization_tolerance():
    # grad_A(g_y u) = g_y(grad_{A_y(.+y)} u) holds to O(h^2) at interior nodes
    from magnls.calculus import covariant_gradient
    from magnls.gauge import _shift_values

    A = field_library("landau", b=0.5)
    y = np.array([1.0, 1.0])
    u = bump(GRID, width=0.8)
    g = make_shift(A, y, GRID)
    lhs = covariant_gradient(shift_apply(g, u), A)
    tilde = shifted_corrected_samples(A, y, GRID)
    rhs_frame = covariant_gradient(u, tilde)
    Z = g.factor()
    err = 0.0
    for m in range(2):
        rhs = Z * _shift_values(rhs_frame[m], g.steps)
        interior = (slice(16, -16), slice(16, -16))
        err = max(err, np.max(np.abs(lhs[m] - rhs)[interior]))
    assert err <= 10.0 * GRID.h[0] ** 2


# ---------------------------------------------------------------------------
# Potential at infinity
# ---------------------------------------------------------------------------

def test_potential_at_infinity_gaussian_vanishes():
    A = field_library("gaussian_decay", b0=0.4, s=1.0)
    window = Grid(2.0, 17, dim=2)
    traj = [np.array([4.0 * k, 0.0]) for k in range(1, 5)]
    a_inf, rep = potential_at_infinity(A, traj, window)
    assert rep["converged"]
    assert rep["sup_last"] <= 1e-8


def test_potential_at_infinity_landau_constant():
    A = field_library("landau", b=0.5)
    window = Grid(2.0, 17, dim=2)
    traj = [np.array([3.0 * k, 2.0 * k]) for k in range(1, 5)]
    a_inf, rep = potential_at_infinity(A, traj, window)
    assert rep["converged"]
    assert max(rep["distances"]) <= 1e-10
    x1 = window.nodes()[..., 0]
    assert np.max(np.abs(a_inf[1] - 0.5 * x1)) <= 1e-10
    assert np.max(np.abs(a_inf[0])) <= 1e-10


def test_potential_at_infinity_zero_field():
    A = field_library("zero")
    window = Grid(2.0, 9, dim=2)
    traj = [np.array([2.0**k, 0.0]) for k in range(1, 5)]
    a_inf, rep = potential_at_infinity(A, traj, window)
    assert rep["converged"] and rep["sup_last"] == 0.0


def test_potential_at_infinity_rejects_bounded_trajectory():
    A = field_library("zero")
    with pytest.raises(ValueError, match="increase strictly"):
        potential_at_infinity(A, [np.array([2.0, 0.0]), np.array([1.0, 0.0])], Grid(2.0, 9, dim=2))


# ---------------------------------------------------------------------------
# Composition law
# ---------------------------------------------------------------------------

def test_composition_constant_zero_field():
    rep = composition_constant(field_library("zero"), (1.0, 0.0), (0.0, 1.0), GRID)
    assert rep["gamma"] == pytest.approx(0.0, abs=1e-12)
    assert rep["spread"] <= 1e-12


def test_composition_constant_landau_value():
    # gamma(u, v) = (b/2)(v1 u2 - u1 v2); b=1, y1=(1,0), y2=(0,1) gives -1/2
    A = field_library("landau", b=1.0)
    rep = composition_constant(A, (1.0, 0.0), (0.0, 1.0), GRID)
    assert rep["spread"] <= 1e-8
    assert rep["gamma"] == pytest.approx(-0.5, abs=1e-8)
    assert rep["admissible"]
    assert abs(rep["gamma_inverse_pair"]) <= 1e-8
    assert rep["roundtrip_error"] <= 1e-12


def test_composition_antisymmetry():
    A = field_library("landau", b=0.8)
    y1, y2 = (1.0, 0.5), (-0.5, 1.0)
    r12 = composition_constant(A, y1, y2, GRID)
    r21 = composition_constant(A, y2, y1, GRID)
    assert r12["gamma"] == pytest.approx(-r21["gamma"], abs=1e-8)


def test_composition_gamma_y_minus_y_zero():
    A = field_library("landau", b=1.0)
    rep = composition_constant(A, (1.5, -1.0), (-1.5, 1.0), GRID)
    assert rep["gamma"] == pytest.approx(0.0, abs=1e-8)


def test_quadrature_error_carries_worst_segment():
    # a discontinuous component defeats adaptive subdivision within budget
    from magnls.field import PotentialField
    from magnls.gauge import QuadratureError

    def ev(p):
        out = np.zeros_like(p)
        out[..., 0] = np.where(p[..., 0] > 0.03, 1.0, -1.0)  # jump along the path
        return out

    A = PotentialField(2, ev, tag="custom")
    g = Grid(1.0, 9, dim=2)
    with pytest.raises(QuadratureError, match="segment"):
        rephase_field(A, (0.5, 0.5), g, quad_tol=1e-14)


def test_composition_reports_non_admissible_field():
    # a field with non-constant curl has no composition constant; the spread
    # is reported rather than raised
    A = field_library("gaussian_decay", b0=0.8, s=1.0)
    rep = composition_constant(A, (1.0, 0.0), (0.0, 1.0), Grid(4.0, 65, dim=2))
    assert rep["spread"] > 1e-8
    assert not rep["admissible"]
