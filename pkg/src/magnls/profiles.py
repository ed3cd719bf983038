"""Discrete concentration-compactness: synthesis, extraction, verification.

A bounded sequence that concentrates along diverging centers is represented
as a fixed profile per center plus a remainder that is small in L^p.  The
extractor localizes mass with a lattice scan, inverts the magnetic shift
along the detected trajectory, and averages the tail; the verifier checks
the mass-splitting and superadditivity identities the decomposition must
satisfy.
"""

import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import (
    BoundaryMassWarning,
    ComplexField,
    Grid,
    bump,
    energy_EA,
    lp_norm,
)
from .field import PotentialField, parse_field_spec
from .gauge import make_shift, potential_at_infinity, shift_apply, shift_invert

__all__ = [
    "Discretization",
    "ProfileTerm",
    "Decomposition",
    "SyntheticSpec",
    "ProfileSpec",
    "local_mass_sup",
    "synthesize_sequence",
    "extract_profiles",
    "verify_decomposition",
    "ExtractOpts",
]


@dataclass
class Discretization:
    """Scan lattice: points at spacing rho whose rho_cover-balls cover the window."""

    grid: Grid
    rho: float
    rho_cover: float
    points: np.ndarray  # (M, dim)

    @classmethod
    def cubic(cls, grid: Grid, rho: float, rho_cover: Optional[float] = None) -> "Discretization":
        """Cubic lattice rho Z^dim clipped to the grid window.

        rho must be a multiple of the grid spacing so detected centers are
        valid shift vectors.  The default covering radius rho sqrt(dim)/2 is
        the smallest that covers space; the covering multiplicity of the
        doubled radius stays below 2^dim.
        """
        for h in grid.h:
            k = rho / h
            if abs(k - round(k)) > 1e-9 or round(k) < 1:
                raise ValueError(f"lattice spacing {rho} is not a positive multiple of grid spacing {h}")
        if rho_cover is None:
            rho_cover = rho * float(np.sqrt(grid.dim)) / 2.0 + 1e-12
        if rho_cover < rho / 2.0:
            raise ValueError("rho_cover too small to cover the window")
        ranges = [np.arange(-int(np.floor(L / rho)), int(np.floor(L / rho)) + 1) * rho for L in grid.extents]
        pts = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, grid.dim)
        order = np.lexsort(tuple(pts[:, i] for i in range(grid.dim - 1, -1, -1)))
        return cls(grid=grid, rho=rho, rho_cover=rho_cover, points=pts[order])

    def multiplicity_bound(self) -> int:
        """Crude bound on how many cover balls can share a point."""
        return int(np.ceil(2.0 * self.rho_cover / self.rho + 1.0)) ** self.grid.dim

    def ball_patches(self) -> list:
        """Per lattice point: (box slices, in-ball mask on the box); cached."""
        if getattr(self, "_patches", None) is None:
            grid = self.grid
            axes = grid.axes
            patches = []
            for z in self.points:
                slices = []
                for ax, (zi, h, L, ni) in enumerate(zip(z, grid.h, grid.extents, grid.n)):
                    lo = max(0, int(np.ceil((zi - self.rho_cover + L) / h - 1e-12)))
                    hi = min(ni - 1, int(np.floor((zi + self.rho_cover + L) / h + 1e-12)))
                    slices.append(slice(lo, hi + 1))
                box = tuple(slices)
                coords = np.meshgrid(*[axes[ax][box[ax]] for ax in range(grid.dim)], indexing="ij")
                r2 = sum((c - zi) ** 2 for c, zi in zip(coords, z))
                patches.append((box, r2 <= self.rho_cover**2))
            self._patches = patches
        return self._patches


def local_mass_sup(u: ComplexField, xi: Discretization, p: float) -> dict:
    """Largest |u|^p mass in a covering ball, with its (lexicographically
    smallest) maximizing lattice point.

    Also evaluates the covering chain bound
    ||u||_p^p <= C ||u||_{H_A}^2 sup_z (int_{B(z)} |u|^p)^{1-2/p}
    in the field-free form, reporting the empirical ratio with C estimated
    from the covering multiplicity.
    """
    grid = u.grid
    W = grid.weights()
    dens = W * np.abs(u.values) ** p
    best_val = -1.0
    best_point = xi.points[0]
    for z, (box, mask) in zip(xi.points, xi.ball_patches()):
        val = float(np.sum(dens[box][mask]))
        if val > best_val + 1e-15 * max(best_val, 1.0):
            best_val = val
            best_point = z
    total = float(np.sum(dens))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        zero = np.zeros((grid.dim,) + grid.shape)
        h_norm2 = energy_EA(u, zero) + lp_norm(u, 2.0) ** 2
    mult = xi.multiplicity_bound()
    denom = mult * h_norm2 * best_val ** (1.0 - 2.0 / p) if best_val > 0 else np.inf
    ratio = total / denom if denom > 0 else 0.0
    return {
        "value": best_val,
        "argmax": np.asarray(best_point, dtype=float),
        "total_mass": total,
        "chain_ratio": float(ratio),
        "multiplicity_bound": mult,
    }


# ---------------------------------------------------------------------------
# Synthetic sequences with planted ground truth
# ---------------------------------------------------------------------------

@dataclass
class ProfileSpec:
    """One planted bump: shape parameters plus a per-step trajectory rule."""

    amplitude: complex = 1.0
    width: float = 1.0
    wave: Optional[tuple] = None  # plane-wave phase factor exp(i wave . x)
    center: tuple = ()
    direction: tuple = ()  # per-step displacement; empty means stationary

    def moving(self) -> bool:
        return bool(self.direction) and any(d != 0 for d in self.direction)


@dataclass
class SyntheticSpec:
    profiles: list
    field: Optional[PotentialField] = None
    noise_amplitude: float = 0.0
    noise_decay: float = 0.1
    noise_seed: int = 0
    spreading_amplitude: float = 0.0
    spreading_width: float = 1.0

    @classmethod
    def from_json(cls, text: str, dim: int = 2) -> "SyntheticSpec":
        doc = json.loads(text)
        profiles = []
        for q in doc.get("profiles", []):
            amp = q.get("amplitude", 1.0)
            phase = q.get("phase", 0.0)
            profiles.append(
                ProfileSpec(
                    amplitude=complex(amp) * np.exp(1j * float(phase)),
                    width=float(q.get("width", 1.0)),
                    wave=tuple(q["wave"]) if "wave" in q else None,
                    center=tuple(q.get("center", ())),
                    direction=tuple(q.get("trajectory", ())),
                )
            )
        field = parse_field_spec(doc["field"], dim=dim) if "field" in doc else None
        noise = doc.get("noise", {})
        spreading = doc.get("spreading", {})
        return cls(
            profiles=profiles,
            field=field,
            noise_amplitude=float(noise.get("amplitude", 0.0)),
            noise_decay=float(noise.get("decay", 0.1)),
            noise_seed=int(noise.get("seed", 0)),
            spreading_amplitude=float(spreading.get("amplitude", 0.0)),
            spreading_width=float(spreading.get("width", 1.0)),
        )


def _profile_field(spec: ProfileSpec, grid: Grid) -> ComplexField:
    center = spec.center if spec.center else 0.0
    return bump(grid, center=center, width=spec.width, amplitude=spec.amplitude, wave=spec.wave)


def synthesize_sequence(spec: SyntheticSpec, grid: Grid, K: int, quad_tol: float = 1e-10):
    """Build u_0..u_{K-1} as planted profiles under magnetic shifts plus
    decaying noise and an optional spreading (mass-escaping) term.

    Returns the fields together with the planted ground truth (profile
    fields, trajectories).  Raises when a trajectory would push a profile
    out of the window before step K.
    """
    A = spec.field
    dim = grid.dim
    truth = {"profiles": [], "trajectories": []}
    base_fields = []
    shifts = {}
    for pr in spec.profiles:
        v = _profile_field(pr, grid)
        base_fields.append(v)
        truth["profiles"].append(v)
        if pr.moving():
            d = np.asarray(pr.direction, dtype=float)
            if grid.is_lattice_vector(d) is None:
                raise ValueError(f"trajectory step {d.tolist()} is not a lattice vector")
            margin = 4.0 * pr.width
            final = d * (K - 1)
            for L, f, c in zip(grid.extents, final, pr.center or (0.0,) * dim):
                if abs(c + f) + margin > L:
                    raise ValueError(
                        f"trajectory exits the window before step {K}: |{c} + {f}| + {margin} > {L}"
                    )
            truth["trajectories"].append([d * k for k in range(K)])
        else:
            truth["trajectories"].append([np.zeros(dim) for _ in range(K)])

    rng = np.random.default_rng(spec.noise_seed)
    envelope = bump(grid, width=min(grid.extents) / 2.0).values.real
    seq = []
    for k in range(K):
        vals = np.zeros(grid.shape, dtype=complex)
        for pr, v, traj in zip(spec.profiles, base_fields, truth["trajectories"]):
            y = traj[k]
            if np.all(y == 0.0):
                vals += v.values
            else:
                g = make_shift(A, y, grid, quad_tol=quad_tol, max_loss=1e-6) if A is not None else None
                if g is None:
                    steps = grid.is_lattice_vector(y)
                    from .gauge import _shift_values

                    vals += _shift_values(v.values, steps)
                else:
                    vals += shift_apply(g, v).values
        if spec.noise_amplitude > 0:
            eps = spec.noise_amplitude * spec.noise_decay**k
            noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
            vals += eps * envelope * noise
        if spec.spreading_amplitude > 0:
            scale = float(k + 1)
            pts = grid.nodes()
            r2 = np.sum(pts**2, axis=-1) / scale**2
            vals += (
                spec.spreading_amplitude
                * scale ** (-dim / 2.0)
                * np.exp(-r2 / (2.0 * spec.spreading_width**2))
            )
        seq.append(ComplexField(grid, vals))
    return seq, truth


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

@dataclass
class ProfileTerm:
    index: int
    trajectory: list  # y_k per step; all zeros for the index-0 term
    profile: ComplexField
    a_inf: Optional[np.ndarray]  # potential-at-infinity samples, None means the ambient A
    a_inf_converged: Optional[bool] = None
    tail_agreement: float = 0.0
    converged: bool = True


@dataclass
class Decomposition:
    terms: list
    remainder_lp: list  # per step k
    remainders: list  # final remainder fields
    warnings: list
    success: bool
    report: Optional[dict] = None


@dataclass
class ExtractOpts:
    eps_mass: float = 1e-3
    max_profiles: int = 6
    tail_window: int = 3
    agree_tol: float = 5e-2
    window_radius: float = 6.0
    quad_tol: float = 1e-10
    p: float = 4.0  # exponent for the localization scan and remainder norms


def _tail_average(fields: list, grid: Grid, wmask=None) -> ComplexField:
    acc = np.zeros(grid.shape, dtype=complex)
    for f in fields:
        acc += f.values
    acc /= len(fields)
    if wmask is not None:
        acc = np.where(wmask, acc, 0.0)
    return ComplexField(grid, acc)


def _half_tail_agreement(fields: list, grid: Grid, wmask=None) -> float:
    """Relative distance of the two half-tail averages, measured inside the
    profile window: the computable surrogate of local weak convergence."""
    half = len(fields) // 2
    if half == 0:
        return 0.0
    a = _tail_average(fields[:half], grid, wmask)
    b = _tail_average(fields[half:], grid, wmask)
    scale = max(lp_norm(_tail_average(fields, grid, wmask), 2.0), 1e-30)
    return lp_norm(ComplexField(grid, a.values - b.values), 2.0) / scale


def extract_profiles(
    seq: list,
    A: Optional[PotentialField],
    xi: Discretization,
    opts: Optional[ExtractOpts] = None,
) -> Decomposition:
    """Peel concentrating profiles off a bounded sequence.

    Step 0 takes the tail average as the stationary term (the computable
    surrogate of the weak limit; accepted only when the two half-tail
    averages agree).  Each further round locates the remainder's dominant
    mass with the lattice scan, inverts the magnetic shift along that
    trajectory, tail-averages, windows the result, and subtracts its shifted
    copies from every remainder.  Stops when the tail's local mass drops
    below eps_mass or the trajectory fails to diverge.
    """
    opts = opts or ExtractOpts()
    K = len(seq)
    if K < 2 * opts.tail_window:
        raise ValueError(f"need at least {2 * opts.tail_window} steps, got {K}")
    grid = seq[0].grid
    dim = grid.dim
    warnings_list = []
    pts = grid.nodes()
    wmask = np.sum(pts**2, axis=-1) <= opts.window_radius**2

    tail = seq[K - opts.tail_window:]
    agree0 = _half_tail_agreement(tail, grid, wmask)
    v0 = _tail_average(tail, grid, wmask)
    conv0 = agree0 <= opts.agree_tol
    if not conv0:
        warnings_list.append(
            f"stationary term: half-tail averages differ by {agree0:.3e} > {opts.agree_tol:.3e}"
        )
    terms = [
        ProfileTerm(
            index=0,
            trajectory=[np.zeros(dim) for _ in range(K)],
            profile=v0,
            a_inf=None,
            a_inf_converged=None,
            tail_agreement=agree0,
            converged=conv0,
        )
    ]
    remainders = [ComplexField(grid, u.values - v0.values) for u in seq]
    return _extract_loop(seq, remainders, terms, warnings_list, A, xi, opts, wmask)


def _extract_loop(seq, remainders, terms, warnings_list, A, xi, opts, wmask):
    K = len(seq)
    grid = seq[0].grid
    p_scan = opts.p

    for n in range(1, opts.max_profiles + 1):
        scans = [local_mass_sup(r, xi, p_scan) for r in remainders]
        tail_vals = [s["value"] for s in scans[K - opts.tail_window:]]
        if max(tail_vals) < opts.eps_mass:
            break
        traj = [s["argmax"] for s in scans]
        tail_norms = [float(np.linalg.norm(y)) for y in traj[K - opts.tail_window:]]
        # diverging means the radii keep growing by at least a lattice spacing
        # over the tail; a parked maximizer belongs to an earlier term's cell
        diverging = (
            all(b >= a - 1e-9 for a, b in zip(tail_norms[:-1], tail_norms[1:]))
            and tail_norms[-1] - tail_norms[0] >= xi.rho - 1e-9
            and tail_norms[-1] > 2.0 * xi.rho_cover
        )
        if not diverging:
            warnings_list.append(
                f"term {n}: trajectory stays bounded (tail radii {tail_norms}); remaining mass "
                "belongs to an earlier profile's cell"
            )
            break

        inverted = []
        for k in range(K - opts.tail_window, K):
            y = traj[k]
            if A is not None:
                g = make_shift(A, y, grid, quad_tol=opts.quad_tol, max_loss=0.9)
                inverted.append(shift_invert(g, remainders[k]))
            else:
                from .gauge import _shift_values

                steps = grid.is_lattice_vector(y)
                inverted.append(
                    ComplexField(grid, _shift_values(remainders[k].values, tuple(-s for s in steps)))
                )
        agree = _half_tail_agreement(inverted, grid, wmask)
        v = _tail_average(inverted, grid, wmask)
        conv = agree <= opts.agree_tol
        if not conv:
            warnings_list.append(
                f"term {n}: half-tail averages differ by {agree:.3e} > {opts.agree_tol:.3e}"
            )

        a_inf = None
        a_conv = None
        if A is not None:
            tail_traj = [traj[k] for k in range(K - opts.tail_window, K)]
            norms = [float(np.linalg.norm(y)) for y in tail_traj]
            if all(b > a for a, b in zip(norms[:-1], norms[1:])):
                # convergence is judged on the bounded profile window; the
                # samples used for energies live on the full grid (the profile
                # vanishes outside its window, so the far values are inert)
                n_probe = min(33, min(grid.n))
                if n_probe % 2 == 0:
                    n_probe -= 1
                probe = Grid(opts.window_radius, n_probe, dim=grid.dim)
                _, rep = potential_at_infinity(A, tail_traj, probe, quad_tol=opts.quad_tol)
                a_conv = rep["converged"]
                from .gauge import shifted_corrected_samples

                a_inf = shifted_corrected_samples(A, tail_traj[-1], grid, opts.quad_tol)

        for k in range(K):
            y = traj[k]
            if A is not None:
                g = make_shift(A, y, grid, quad_tol=opts.quad_tol, max_loss=0.9)
                shifted = shift_apply(g, v)
            else:
                from .gauge import _shift_values

                steps = grid.is_lattice_vector(y)
                shifted = ComplexField(grid, _shift_values(v.values, steps))
            remainders[k] = ComplexField(grid, remainders[k].values - shifted.values)

        terms.append(
            ProfileTerm(
                index=n,
                trajectory=traj,
                profile=v,
                a_inf=a_inf,
                a_inf_converged=a_conv,
                tail_agreement=agree,
                converged=conv,
            )
        )

    final_scans = [local_mass_sup(r, xi, p_scan) for r in remainders[K - opts.tail_window:]]
    success = max(s["value"] for s in final_scans) < opts.eps_mass and all(t.converged for t in terms)
    remainder_lp = [lp_norm(r, opts.p) for r in remainders]
    return Decomposition(
        terms=terms,
        remainder_lp=remainder_lp,
        remainders=remainders,
        warnings=warnings_list,
        success=success,
    )


# ---------------------------------------------------------------------------
# Verification of the splitting identities
# ---------------------------------------------------------------------------

def verify_decomposition(
    dec: Decomposition,
    seq: list,
    A: Optional[PotentialField],
    params,
    tol: float = 1e-6,
) -> dict:
    """Check the identities a valid decomposition must satisfy.

    The |u|^p masses of the terms must add up to the sequence's tail mass;
    the L^2 masses and the energies (each term measured against its own
    potential at infinity) may only fall short, never exceed.  Pairwise
    trajectory separations must grow.
    """
    K = len(seq)
    grid = seq[0].grid
    p = params.p
    uK = seq[-1]
    mass_seq = lp_norm(uK, p) ** p
    mass_terms = sum(lp_norm(t.profile, p) ** p for t in dec.terms)
    mass_defect = abs(mass_seq - mass_terms) / max(mass_seq, 1e-30)

    l2_tail = min(lp_norm(u, 2.0) ** 2 for u in seq[K // 2:])
    l2_terms = sum(lp_norm(t.profile, 2.0) ** 2 for t in dec.terms)
    l2_slack = l2_tail - l2_terms

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        zero = np.zeros((grid.dim,) + grid.shape)
        e_tail = min(energy_EA(u, A if A is not None else zero) for u in seq[K // 2:])
        e_terms = 0.0
        for t in dec.terms:
            if t.index == 0:
                e_terms += energy_EA(t.profile, A if A is not None else zero)
            else:
                e_terms += energy_EA(t.profile, t.a_inf if t.a_inf is not None else zero)
    energy_slack = e_tail - e_terms

    separations = {}
    moving = [t for t in dec.terms if t.index != 0]
    for i, ti in enumerate(dec.terms):
        for tj in dec.terms[i + 1:]:
            d = [float(np.linalg.norm(a - b)) for a, b in zip(ti.trajectory, tj.trajectory)]
            growing = all(b >= a - 1e-9 for a, b in zip(d[:-1], d[1:]))
            separations[f"{ti.index}-{tj.index}"] = {
                "final": d[-1],
                "growing": growing,
            }

    return {
        "mass_defect": float(mass_defect),
        "mass_seq": float(mass_seq),
        "mass_terms": float(mass_terms),
        "l2_slack": float(l2_slack),
        "energy_slack": float(energy_slack),
        "separations": separations,
        "remainder_lp": [float(lp_norm(r, p)) for r in dec.remainders],
        "tol": tol,
        "l2_ok": bool(l2_slack >= -tol),
        "energy_ok": bool(energy_slack >= -tol),
        "n_moving_terms": len(moving),
    }
