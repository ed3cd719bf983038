"""Magnetic potentials A and their field strength B = dA.

A potential is a covector-valued map on R^N; the measurable object is the
antisymmetric two-form with components B_mn = d_n A_m - d_m A_n (m < n).
This module holds the built-in family of test potentials, curl sampling on
boxes, and the sup-norm aggregate used by the linear gauge bound.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PotentialField",
    "TwoForm",
    "curl",
    "b_sup_norm",
    "field_library",
    "parse_field_spec",
]


@dataclass(frozen=True)
class PotentialField:
    """Evaluator for a magnetic potential, the single source of field truth.

    ``eval_fn`` maps an array of points with shape (..., dim) to covector
    values of the same shape.  ``jac_fn``, when present, returns the
    matrix J[..., m, n] = d_n A_m.  Evaluators are pure; they may be called
    concurrently.
    """

    dim: int
    eval_fn: Callable[[np.ndarray], np.ndarray]
    jac_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points have last axis {pts.shape[-1]}, field dim is {self.dim}")
        return self.eval_fn(pts)

    @property
    def has_jacobian(self) -> bool:
        return self.jac_fn is not None

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        if self.jac_fn is None:
            raise ValueError(f"field '{self.tag}' carries no analytic jacobian")
        pts = np.asarray(points, dtype=float)
        return self.jac_fn(pts)


@dataclass
class TwoForm:
    """Sampled field strength on a box window.

    Only components with m < n are stored; B_nm = -B_mn by convention.
    ``window`` records where the sup norms were estimated, since the true
    sup is global and the estimate is only as good as the window.
    """

    dim: int
    window: tuple
    axes: list
    components: dict  # (m, n) with m < n, 1-based -> ndarray over the window
    sup_norms: dict  # (m, n) -> float

    def component(self, m: int, n: int) -> np.ndarray:
        if m == n:
            return np.zeros_like(next(iter(self.components.values())))
        if m < n:
            return self.components[(m, n)]
        return -self.components[(n, m)]

    def sup_norm(self) -> float:
        return b_sup_norm(self)


def _normalize_window(window, dim: int):
    """Accept a scalar half-width or a sequence of (lo, hi) pairs."""
    if np.isscalar(window):
        w = float(window)
        return tuple((-w, w) for _ in range(dim))
    out = []
    for lo, hi in window:
        lo, hi = float(lo), float(hi)
        if not hi > lo:
            raise ValueError(f"empty window axis ({lo}, {hi})")
        out.append((lo, hi))
    if len(out) != dim:
        raise ValueError(f"window has {len(out)} axes, field dim is {dim}")
    return tuple(out)


def _fd_jacobian(A: PotentialField, pts: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Second-order jacobian of A on a tensor grid of points.

    pts has shape (*grid_shape, dim).  Centered stencils inside, one-sided
    second-order stencils on the two boundary layers of each axis.
    """
    vals = A(pts)  # (*shape, dim)
    dim = A.dim
    shape = vals.shape[:-1]
    jac = np.empty(shape + (dim, dim))
    for n in range(dim):  # derivative direction
        hn = h[n]
        d = np.empty_like(vals)
        sl = [slice(None)] * len(shape)

        def take(i):
            s = list(sl)
            s[n] = i
            return tuple(s)

        d[take(slice(1, -1))] = (vals[take(slice(2, None))] - vals[take(slice(0, -2))]) / (2 * hn)
        d[take(0)] = (-3 * vals[take(0)] + 4 * vals[take(1)] - vals[take(2)]) / (2 * hn)
        d[take(-1)] = (3 * vals[take(-1)] - 4 * vals[take(-2)] + vals[take(-3)]) / (2 * hn)
        jac[..., :, n] = d
    return jac


def curl(A: PotentialField, window, resolution: int) -> TwoForm:
    """Sample B_mn = d_n A_m - d_m A_n for all m < n on the window.

    Uses the analytic jacobian when the field has one, otherwise centered
    finite differences (one-sided at the window boundary).
    """
    if resolution < 3:
        raise ValueError(f"resolution must be >= 3 to form centered differences, got {resolution}")
    win = _normalize_window(window, A.dim)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in win]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if A.has_jacobian:
        jac = A.jacobian(mesh)
    else:
        h = np.array([(hi - lo) / (resolution - 1) for lo, hi in win])
        jac = _fd_jacobian(A, mesh, h)
    components = {}
    sups = {}
    for m in range(1, A.dim + 1):
        for n in range(m + 1, A.dim + 1):
            b = jac[..., m - 1, n - 1] - jac[..., n - 1, m - 1]
            components[(m, n)] = b
            sups[(m, n)] = float(np.max(np.abs(b)))
    return TwoForm(dim=A.dim, window=win, axes=axes, components=components, sup_norms=sups)


def b_sup_norm(B: TwoForm) -> float:
    """sqrt of the sum over m < n of squared per-component sup norms."""
    if not B.sup_norms:
        return 0.0
    return float(np.sqrt(sum(v * v for v in B.sup_norms.values())))


def _sample_derivative(vals: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Centered difference of samples, one-sided second-order at the boundary."""
    d = np.empty_like(vals)
    sl = [slice(None)] * vals.ndim

    def take(i):
        s = list(sl)
        s[axis] = i
        return tuple(s)

    d[take(slice(1, -1))] = (vals[take(slice(2, None))] - vals[take(slice(0, -2))]) / (2 * h)
    d[take(0)] = (-3 * vals[take(0)] + 4 * vals[take(1)] - vals[take(2)]) / (2 * h)
    d[take(-1)] = (3 * vals[take(-1)] - 4 * vals[take(-2)] + vals[take(-3)]) / (2 * h)
    return d


def curl_of_samples(samples: np.ndarray, h) -> dict:
    """B_mn from covector samples (dim, *shape) by finite differences."""
    dim = samples.shape[0]
    out = {}
    for m in range(1, dim + 1):
        for n in range(m + 1, dim + 1):
            out[(m, n)] = _sample_derivative(samples[m - 1], n - 1, h[n - 1]) - _sample_derivative(
                samples[n - 1], m - 1, h[m - 1]
            )
    return out


# ---------------------------------------------------------------------------
# Built-in family
# ---------------------------------------------------------------------------

def _zero(dim: int) -> PotentialField:
    def ev(p):
        return np.zeros_like(p)

    def jac(p):
        return np.zeros(p.shape[:-1] + (dim, dim))

    return PotentialField(dim, ev, jac, tag="zero", params={})


def _landau(b: float, dim: int = 2) -> PotentialField:
    """A(x) = (0, b x_1, 0, ...): constant field B_12 = -b."""
    if dim < 2:
        raise ValueError("landau field needs dim >= 2")

    def ev(p):
        out = np.zeros_like(p)
        out[..., 1] = b * p[..., 0]
        return out

    def jac(p):
        J = np.zeros(p.shape[:-1] + (dim, dim))
        J[..., 1, 0] = b
        return J

    return PotentialField(dim, ev, jac, tag="landau", params={"b": b})


def _symmetric(b: float, dim: int = 2) -> PotentialField:
    """A(x) = (-b x_2 / 2, b x_1 / 2, 0, ...): same field as landau(b)."""
    if dim < 2:
        raise ValueError("symmetric field needs dim >= 2")

    def ev(p):
        out = np.zeros_like(p)
        out[..., 0] = -0.5 * b * p[..., 1]
        out[..., 1] = 0.5 * b * p[..., 0]
        return out

    def jac(p):
        J = np.zeros(p.shape[:-1] + (dim, dim))
        J[..., 0, 1] = -0.5 * b
        J[..., 1, 0] = 0.5 * b
        return J

    return PotentialField(dim, ev, jac, tag="symmetric", params={"b": b})


def _gaussian_decay(b0: float, s: float = 1.0, dim: int = 2) -> PotentialField:
    """A(x) = (0, b0 exp(-|x|^2/s^2), 0, ...): field and potential vanish at infinity."""
    if dim < 2:
        raise ValueError("gaussian_decay field needs dim >= 2")
    if s <= 0:
        raise ValueError("gaussian_decay needs s > 0")

    def ev(p):
        out = np.zeros_like(p)
        r2 = np.sum(p * p, axis=-1)
        out[..., 1] = b0 * np.exp(-r2 / s**2)
        return out

    def jac(p):
        J = np.zeros(p.shape[:-1] + (dim, dim))
        r2 = np.sum(p * p, axis=-1)
        g = b0 * np.exp(-r2 / s**2)
        for n in range(dim):
            J[..., 1, n] = -2.0 * p[..., n] / s**2 * g
        return J

    return PotentialField(dim, ev, jac, tag="gaussian_decay", params={"b0": b0, "s": s})


def _lattice_periodic(b: float, period: float = 1.0, dim: int = 2) -> PotentialField:
    """A(x) = (0, b L/(2 pi) sin(2 pi x_1 / L), 0, ...).

    The field B_12 = -b cos(2 pi x_1 / L) is invariant under shifts by the
    lattice (L Z)^N; the potential itself happens to be periodic too, which
    keeps period shifts exactly energy-preserving on a grid.
    """
    if dim < 2:
        raise ValueError("lattice_periodic field needs dim >= 2")
    if period <= 0:
        raise ValueError("lattice_periodic needs period > 0")
    k = 2.0 * np.pi / period
    amp = b / k

    def ev(p):
        out = np.zeros_like(p)
        out[..., 1] = amp * np.sin(k * p[..., 0])
        return out

    def jac(p):
        J = np.zeros(p.shape[:-1] + (dim, dim))
        J[..., 1, 0] = b * np.cos(k * p[..., 0])
        return J

    return PotentialField(dim, ev, jac, tag="lattice_periodic", params={"b": b, "period": period})


_BUILTINS = {
    "zero": (_zero, ()),
    "landau": (_landau, ("b",)),
    "symmetric": (_symmetric, ("b",)),
    "gaussian_decay": (_gaussian_decay, ("b0",)),
    "lattice_periodic": (_lattice_periodic, ("b",)),
}


def field_library(tag: str, dim: int = 2, **params) -> PotentialField:
    """Construct a built-in potential by tag; all built-ins carry analytic jacobians."""
    if tag not in _BUILTINS:
        raise ValueError(f"unknown field tag '{tag}'; known: {sorted(_BUILTINS)}")
    ctor, required = _BUILTINS[tag]
    for name in required:
        if name not in params:
            raise ValueError(f"field '{tag}' requires parameter '{name}'")
    if tag == "zero":
        return ctor(dim)
    return ctor(dim=dim, **params)


# CLI grammar: zero | landau:b=<f> | symmetric:b=<f> | gauss:b0=<f>,s=<f> | periodic:b=<f>,L=<f>
_SPEC_ALIASES = {
    "zero": ("zero", {}),
    "landau": ("landau", {"b": "b"}),
    "symmetric": ("symmetric", {"b": "b"}),
    "gauss": ("gaussian_decay", {"b0": "b0", "s": "s"}),
    "periodic": ("lattice_periodic", {"b": "b", "L": "period"}),
}


def parse_field_spec(spec: str, dim: int = 2) -> PotentialField:
    """Parse a field specification string like ``landau:b=0.5``."""
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    if name not in _SPEC_ALIASES:
        raise ValueError(f"unknown field spec '{name}'; known: {sorted(_SPEC_ALIASES)}")
    tag, keymap = _SPEC_ALIASES[name]
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in keymap:
                raise ValueError(f"field spec '{name}' does not take parameter '{key}'")
            try:
                params[keymap[key]] = float(val)
            except ValueError:
                raise ValueError(f"bad numeric value '{val}' for '{key}' in field spec") from None
    return field_library(tag, dim=dim, **params)
