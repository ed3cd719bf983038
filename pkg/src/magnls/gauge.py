"""Re-phasing functions, corrected potentials, and magnetic shifts.

The corrected potential A_y = A + grad(phi_y) vanishes at the base point y
and obeys the linear bound |A_y(x)| <= ||B||_inf |x - y|.  The phase phi_y is
built from axis-by-axis line integrals along a staircase path from y to x:

    phi_y(x) = -sum_m  int_{y_m}^{x_m} A_m(y_1..y_{m-1}, t, x_{m+1}..x_N) dt

(plus a free constant fixed by the normalization convention).  Magnetic
shifts g_y u = e^{i phi_y} u(. - y) then transport energies between gauges.
"""

from dataclasses import dataclass, field as _dfield
from typing import Optional

import numpy as np

from .calculus import ComplexField, Grid, RealField, bump
from .field import PotentialField, TwoForm, b_sup_norm

__all__ = [
    "GaugePhase",
    "CorrectedPotential",
    "ShiftOp",
    "QuadratureError",
    "MassLossError",
    "rephase_field",
    "corrected_potential",
    "corrected_potential_samples",
    "linear_bound_check",
    "make_shift",
    "shift_apply",
    "shift_invert",
    "shifted_corrected_samples",
    "ShiftedCorrectedField",
    "potential_at_infinity",
    "composition_constant",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge within the subdivision budget."""


class MassLossError(ValueError):
    """Too much of |u|^2 would be shifted out of the window."""


# ---------------------------------------------------------------------------
# Adaptive Simpson quadrature, vectorized over slice batches
# ---------------------------------------------------------------------------

def _adaptive_segment(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if float(np.max(np.abs(delta))) <= 15.0 * tol or depth <= 0:
        if depth <= 0 and float(np.max(np.abs(delta))) > 15.0 * tol:
            raise QuadratureError(
                f"segment [{a:.6g}, {b:.6g}] did not converge; worst residual "
                f"{float(np.max(np.abs(delta))):.3e} at tolerance {tol:.3e}"
            )
        return left + right + delta / 15.0
    return _adaptive_segment(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + _adaptive_segment(
        f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1
    )


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 40):
    """Integral of a (possibly array-valued) integrand from a to b."""
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    if b < a:
        return -_adaptive_simpson(f, b, a, tol, max_depth)
    fa = np.asarray(f(a), dtype=float)
    fm = np.asarray(f(0.5 * (a + b)), dtype=float)
    fb = np.asarray(f(b), dtype=float)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive_segment(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _cumulative_from(f, start: float, values: np.ndarray, tol: float) -> np.ndarray:
    """F(v) = int_start^v f(t) dt for every v in the (ascending) value array."""
    out = []
    acc = _adaptive_simpson(f, start, float(values[0]), tol)
    out.append(acc)
    for lo, hi in zip(values[:-1], values[1:]):
        acc = acc + _adaptive_simpson(f, float(lo), float(hi), tol)
        out.append(acc)
    return np.stack([np.asarray(o, dtype=float) for o in out], axis=0)


def _staircase_points(y, m: int, t: float, tail_axes):
    """Evaluation points (y_1..y_{m-1}, t, tail mesh) as an (..., N) array."""
    dim = len(y)
    if tail_axes:
        mesh = np.meshgrid(*tail_axes, indexing="ij")
        shape = mesh[0].shape
    else:
        mesh = []
        shape = ()
    pts = np.empty(shape + (dim,))
    for j in range(m - 1):
        pts[..., j] = y[j]
    pts[..., m - 1] = t
    for j, g in enumerate(mesh):
        pts[..., m + j] = g
    return pts


def _staircase_sum(component_eval, y, axes, quad_tol: float) -> np.ndarray:
    """Sum over m of the cumulative axis-m integrals, broadcast to the full mesh.

    ``component_eval(m, pts)`` must return the scalar integrand of the m-th
    term at the given points.
    """
    dim = len(axes)
    shape = tuple(len(ax) for ax in axes)
    total = np.zeros(shape)
    for m in range(1, dim + 1):
        tail_axes = axes[m:]

        def f(t, m=m, tail_axes=tail_axes):
            return component_eval(m, _staircase_points(y, m, t, tail_axes))

        cum = _cumulative_from(f, float(y[m - 1]), np.asarray(axes[m - 1]), quad_tol)
        total += cum.reshape((1,) * (m - 1) + cum.shape)
    return total


# ---------------------------------------------------------------------------
# Phase construction
# ---------------------------------------------------------------------------

@dataclass
class GaugePhase:
    """Sampled re-phasing scalar phi_y with its base point and normalization."""

    base_point: np.ndarray
    normalization: str
    samples: RealField
    quad_tol: float


def _phase_values(A: PotentialField, y: np.ndarray, axes, quad_tol: float) -> np.ndarray:
    def comp(m, pts):
        return A(pts)[..., m - 1]

    return -_staircase_sum(comp, y, axes, quad_tol)


def rephase_field(
    A: PotentialField,
    y,
    grid: Grid,
    quad_tol: float = 1e-10,
    normalization: str = "at_base",
) -> GaugePhase:
    """Build phi_y on the grid by adaptive Simpson quadrature (per-segment tol).

    ``at_base`` fixes phi_y(y) = 0; ``at_half`` fixes phi_y(y/2) = 0 (the
    convention under which the shift composition law carries a clean
    antisymmetric constant).  For y = 0 the phase is identically zero and
    the shift below reduces to the identity.
    """
    if normalization not in ("at_base", "at_half"):
        raise ValueError(f"unknown normalization '{normalization}'")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (grid.dim,):
        raise ValueError(f"base point shape {y.shape}, expected ({grid.dim},)")
    if np.all(y == 0.0):
        vals = np.zeros(grid.shape)
    else:
        vals = _phase_values(A, y, grid.axes, quad_tol)
        if normalization == "at_half":
            half = _phase_values(A, y, [np.array([yi / 2.0]) for yi in y], quad_tol)
            vals = vals - float(half.reshape(()))
    return GaugePhase(base_point=y, normalization=normalization, samples=RealField(grid, vals), quad_tol=quad_tol)


# ---------------------------------------------------------------------------
# Corrected potential
# ---------------------------------------------------------------------------

@dataclass
class CorrectedPotential:
    """Samples of A_y = A + grad(phi_y) on a grid; vanishes at the base point."""

    base_point: np.ndarray
    grid: Grid
    samples: np.ndarray  # (dim, *grid.shape)
    construction: str


def corrected_potential_samples(A: PotentialField, y, axes, quad_tol: float = 1e-10) -> np.ndarray:
    """Pointwise A_y on the tensor grid spanned by ``axes`` (needs the jacobian).

    Differentiating the staircase sum gives, per component n,

        (A_y)_n(x) = A_n(x) - A_n(y_1..y_{n-1}, x_n..x_N)
                     - sum_{m<n} int_{y_m}^{x_m} d_n A_m(y_1..y_{m-1}, t, x_{m+1}..x_N) dt,

    which vanishes identically on the slab x_1 = y_1, ..., x_{n-1} = y_{n-1}.
    """
    if not A.has_jacobian:
        raise ValueError("corrected_potential_samples needs a field with an analytic jacobian")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dim = A.dim
    shape = tuple(len(ax) for ax in axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    Avals = A(mesh)  # (*shape, dim)
    out = np.empty((dim,) + shape)
    for n in range(1, dim + 1):
        # A_n with the first n-1 coordinates pinned to y
        tail_axes = axes[n - 1:]
        tail_mesh = np.meshgrid(*tail_axes, indexing="ij")
        pin = np.empty(tail_mesh[0].shape + (dim,))
        for j in range(n - 1):
            pin[..., j] = y[j]
        for j, g in enumerate(tail_mesh):
            pin[..., n - 1 + j] = g
        pinned = A(pin)[..., n - 1]
        comp = Avals[..., n - 1] - pinned.reshape((1,) * (n - 1) + pinned.shape)
        for m in range(1, n):
            tail_m = axes[m:]

            def f(t, m=m, n=n, tail_m=tail_m):
                pts = _staircase_points(y, m, t, tail_m)
                return A.jacobian(pts)[..., m - 1, n - 1]

            cum = _cumulative_from(f, float(y[m - 1]), np.asarray(axes[m - 1]), quad_tol)
            comp = comp - cum.reshape((1,) * (m - 1) + cum.shape)
        out[n - 1] = np.broadcast_to(comp, shape)
    return out


def _phase_gradient(phase: GaugePhase) -> np.ndarray:
    """Centered-difference gradient of the sampled phase, one-sided at the boundary."""
    grid = phase.samples.grid
    vals = phase.samples.values
    out = np.empty((grid.dim,) + grid.shape)
    for axis in range(grid.dim):
        h = grid.h[axis]
        d = np.empty_like(vals)
        sl = [slice(None)] * grid.dim

        def take(i):
            s = list(sl)
            s[axis] = i
            return tuple(s)

        d[take(slice(1, -1))] = (vals[take(slice(2, None))] - vals[take(slice(0, -2))]) / (2 * h)
        d[take(0)] = (-3 * vals[take(0)] + 4 * vals[take(1)] - vals[take(2)]) / (2 * h)
        d[take(-1)] = (3 * vals[take(-1)] - 4 * vals[take(-2)] + vals[take(-3)]) / (2 * h)
        out[axis] = d
    return out


def corrected_potential(
    A: PotentialField,
    phase: GaugePhase,
    grid: Grid,
    construction: str = "auto",
) -> CorrectedPotential:
    """Sample A_y on the grid, from the phase gradient or the closed formula."""
    if construction == "auto":
        construction = "direct_formula" if A.has_jacobian else "grad_of_phase"
    y = phase.base_point
    if construction == "direct_formula":
        samples = corrected_potential_samples(A, y, grid.axes, phase.quad_tol)
    elif construction == "grad_of_phase":
        if phase.samples.grid.shape != grid.shape:
            raise ValueError("phase sampled on a different grid")
        Avals = np.moveaxis(A(grid.nodes()), -1, 0)
        samples = Avals + _phase_gradient(phase)
    else:
        raise ValueError(f"unknown construction '{construction}'")
    return CorrectedPotential(base_point=y, grid=grid, samples=samples, construction=construction)


def linear_bound_check(Ay: CorrectedPotential, B: TwoForm) -> dict:
    """Verify |A_y(x)| <= ||B||_inf |x - y| nodewise, plus the componentwise form.

    Violations are reported, never thrown; a correct construction keeps the
    worst violation at quadrature-floor level.
    """
    grid = Ay.grid
    y = Ay.base_point
    pts = grid.nodes()
    dist = np.sqrt(np.sum((pts - y) ** 2, axis=-1))
    mag = np.sqrt(np.sum(Ay.samples**2, axis=0))
    bnorm = b_sup_norm(B)
    violation = mag - bnorm * dist
    comp_violation = -np.inf
    for n in range(1, grid.dim + 1):
        rhs = np.zeros(grid.shape)
        for m in range(1, n):
            rhs += B.sup_norms.get((m, n), 0.0) * np.abs(pts[..., m - 1] - y[m - 1])
        comp_violation = max(comp_violation, float(np.max(np.abs(Ay.samples[n - 1]) - rhs)))
    return {
        "b_sup_norm": bnorm,
        "max_violation": float(np.max(violation)),
        "max_violation_componentwise": comp_violation,
        "violating_nodes": int(np.sum(violation > 1e-8)),
        "nodes": int(np.prod(grid.shape)),
    }


# ---------------------------------------------------------------------------
# Magnetic shifts
# ---------------------------------------------------------------------------

@dataclass
class ShiftOp:
    """The gauge-aware translation u -> e^{i(theta + phi_y)} u(. - y).

    y is restricted to integer multiples of the grid spacing so the identity
    checks separate gauge error from interpolation error.
    """

    grid: Grid
    y: np.ndarray
    steps: tuple
    phase: GaugePhase
    theta: float = 0.0
    max_loss: float = 1e-6
    _factor: Optional[np.ndarray] = _dfield(default=None, repr=False)

    def factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = np.exp(1j * (self.theta + self.phase.samples.values))
        return self._factor


def make_shift(
    A: PotentialField,
    y,
    grid: Grid,
    theta: float = 0.0,
    quad_tol: float = 1e-10,
    normalization: str = "at_base",
    max_loss: float = 1e-6,
) -> ShiftOp:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    steps = grid.is_lattice_vector(y)
    if steps is None:
        raise ValueError(f"shift {y.tolist()} is not an integer multiple of the grid spacing {grid.h}")
    phase = rephase_field(A, y, grid, quad_tol=quad_tol, normalization=normalization)
    return ShiftOp(grid=grid, y=y, steps=steps, phase=phase, theta=theta, max_loss=max_loss)


def _shift_values(values: np.ndarray, steps, fill=0.0) -> np.ndarray:
    """out[alpha] = values[alpha - steps], zero-filled outside the window."""
    out = np.full_like(values, fill)
    src = []
    dst = []
    for k, n in zip(steps, values.shape):
        if abs(k) >= n:
            return out
        if k >= 0:
            src.append(slice(0, n - k))
            dst.append(slice(k, n))
        else:
            src.append(slice(-k, n))
            dst.append(slice(0, n + k))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _lost_fraction(u: ComplexField, steps, invert: bool) -> float:
    """Quadrature mass fraction of |u|^2 that a (possibly inverted) shift drops."""
    W = u.grid.weights()
    dens = W * np.abs(u.values) ** 2
    total = float(np.sum(dens))
    if total == 0.0:
        return 0.0
    keep = [slice(None)] * u.grid.dim
    for axis, (k, n) in enumerate(zip(steps, u.values.shape)):
        kk = k if not invert else -k
        # forward shift keeps source indices beta with beta + k in range
        if kk >= 0:
            keep[axis] = slice(0, n - kk)
        else:
            keep[axis] = slice(-kk, n)
    kept = float(np.sum(dens[tuple(keep)]))
    return (total - kept) / total


def shift_apply(g: ShiftOp, u: ComplexField) -> ComplexField:
    """g u = e^{i(theta + phi_y)} u(. - y) on the grid; errors on excessive mass loss."""
    if u.grid.shape != g.grid.shape:
        raise ValueError("field and shift live on different grids")
    frac = _lost_fraction(u, g.steps, invert=False)
    if frac > g.max_loss:
        raise MassLossError(
            f"shift would drop a boundary-mass fraction {frac:.3e} > allowed {g.max_loss:.3e}"
        )
    shifted = _shift_values(u.values, g.steps)
    return ComplexField(u.grid, g.factor() * shifted)


def shift_invert(g: ShiftOp, v: ComplexField) -> ComplexField:
    """g^{-1} v = e^{-i(theta + phi_y(. + y))} v(. + y); exact inverse on the overlap."""
    if v.grid.shape != g.grid.shape:
        raise ValueError("field and shift live on different grids")
    frac = _lost_fraction(v, g.steps, invert=True)
    if frac > g.max_loss:
        raise MassLossError(
            f"inverse shift would drop a boundary-mass fraction {frac:.3e} > allowed {g.max_loss:.3e}"
        )
    neg = tuple(-k for k in g.steps)
    moved = _shift_values(v.values * np.conj(g.factor()), neg)
    return ComplexField(v.grid, moved)


def shifted_corrected_samples(A: PotentialField, y, grid: Grid, quad_tol: float = 1e-10) -> np.ndarray:
    """Samples of A_y(. + y) on the grid: the potential seen from the moving frame."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    axes = [ax + yi for ax, yi in zip(grid.axes, y)]
    return corrected_potential_samples(A, y, axes, quad_tol)


class ShiftedCorrectedField:
    """A_y(. + y) as a tensor-grid evaluator, for exact use inside energies.

    Exposes the ``component_on_axes`` hook the calculus module consumes, so
    midpoint samples come from the closed corrected-potential formula rather
    than from interpolation.
    """

    def __init__(self, A: PotentialField, y, quad_tol: float = 1e-10):
        self.A = A
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.quad_tol = quad_tol

    def component_on_axes(self, m: int, axes) -> np.ndarray:
        shifted = [np.asarray(ax) + yi for ax, yi in zip(axes, self.y)]
        return corrected_potential_samples(self.A, self.y, shifted, self.quad_tol)[m]


# ---------------------------------------------------------------------------
# Potential at infinity and the composition law
# ---------------------------------------------------------------------------

def potential_at_infinity(A: PotentialField, trajectory, window: Grid, tol: float = 1e-6, quad_tol: float = 1e-10):
    """Follow A_{y_k}(. + y_k) along a diverging trajectory on a fixed window.

    Returns the last sample together with a convergence report on the
    sup-distances between consecutive tail samples.
    """
    traj = [np.atleast_1d(np.asarray(y, dtype=float)) for y in trajectory]
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two points")
    norms = [float(np.linalg.norm(y)) for y in traj]
    if any(b <= a for a, b in zip(norms[:-1], norms[1:])):
        raise ValueError(f"trajectory norms must increase strictly, got {norms}")
    samples = [shifted_corrected_samples(A, y, window, quad_tol) for y in traj]
    distances = [float(np.max(np.abs(b - a))) for a, b in zip(samples[:-1], samples[1:])]
    report = {
        "distances": distances,
        "converged": bool(distances[-1] <= tol),
        "tol": tol,
        "sup_last": float(np.max(np.abs(samples[-1]))),
    }
    return samples[-1], report


def composition_constant(
    A: PotentialField,
    y1,
    y2,
    grid: Grid,
    quad_tol: float = 1e-10,
    tol: float = 1e-8,
) -> dict:
    """Estimate gamma(y1, y2) in phi_{y1+y2} = phi_{y1}(. - y2) + phi_{y2} + gamma.

    Under the at-half normalization the constant is well defined for
    lattice-periodic or constant-curl fields; the nodewise spread reports how
    far the given field is from admissibility.  Also checks gamma(y, -y) = 0
    and the inverse law by a shift round-trip on a test bump.
    """
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    steps1 = grid.is_lattice_vector(y1)
    steps2 = grid.is_lattice_vector(y2)
    if steps1 is None or steps2 is None:
        raise ValueError("y1 and y2 must be lattice vectors so shifted phases are sampled exactly")

    def phi(y):
        return rephase_field(A, y, grid, quad_tol=quad_tol, normalization="at_half").samples.values

    phi12 = phi(y1 + y2)
    phi1 = phi(y1)
    phi2 = phi(y2)
    phi1_shifted = _shift_values(phi1, steps2, fill=np.nan)
    overlap = ~np.isnan(phi1_shifted)
    gamma_field = phi12[overlap] - phi1_shifted[overlap] - phi2[overlap]
    gamma = float(np.mean(gamma_field))
    spread = float(np.max(np.abs(gamma_field - gamma))) if gamma_field.size else 0.0

    # gamma(y, -y) must vanish under the at-half convention
    phi0 = phi(np.zeros(grid.dim))
    phi1_neg = phi(-y1)
    phi1_sh = _shift_values(phi1, tuple(-k for k in steps1), fill=np.nan)
    ok = ~np.isnan(phi1_sh)
    vals = phi0[ok] - phi1_sh[ok] - phi1_neg[ok]
    gamma_pair = float(np.mean(vals))

    # inverse law: g_{-y,-theta} g_{y,theta} is the identity on the overlap
    theta = 0.7
    g_fwd = make_shift(A, y1, grid, theta=theta, quad_tol=quad_tol, normalization="at_half", max_loss=1.0)
    g_bwd = make_shift(A, -y1, grid, theta=-theta, quad_tol=quad_tol, normalization="at_half", max_loss=1.0)
    probe = bump(grid, width=min(grid.extents) / 6.0)
    roundtrip = shift_apply(g_bwd, shift_apply(g_fwd, probe))
    # nodes that never left the window: gamma + k1 stays in range
    survived = _shift_values(np.ones(grid.shape), tuple(-k for k in steps1), fill=0.0).astype(bool)
    err = np.abs(roundtrip.values - probe.values)[survived]
    roundtrip_error = float(np.max(err)) if err.size else 0.0

    return {
        "gamma": gamma,
        "spread": spread,
        "admissible": bool(spread <= tol),
        "gamma_inverse_pair": gamma_pair,
        "roundtrip_error": roundtrip_error,
        "tol": tol,
    }
