"""CSV/JSON serialization for grid fields and run reports.

Field CSVs carry one node per row (coordinates first, then value columns);
every file is written with a fixed float format so identical runs produce
byte-identical artifacts.
"""

import json

import numpy as np

from .calculus import Grid, RealField

__all__ = [
    "grid_header",
    "field_to_csv",
    "covector_to_csv",
    "radial_to_csv",
    "write_json",
    "surface_to_csv",
]

_FMT = "%.17g"


def grid_header(grid: Grid) -> dict:
    return {
        "dim": grid.dim,
        "extents": list(grid.extents),
        "n": list(grid.n),
        "h": list(grid.h),
    }


def _coord_columns(grid: Grid):
    pts = grid.nodes().reshape(-1, grid.dim)
    names = [f"x{i + 1}" for i in range(grid.dim)]
    return pts, names


def field_to_csv(field, path: str) -> None:
    """Node coordinates plus re/im columns (a single value column for real fields)."""
    grid = field.grid
    pts, names = _coord_columns(grid)
    vals = field.values.reshape(-1)
    if isinstance(field, RealField) or not np.iscomplexobj(vals):
        data = np.column_stack([pts, np.real(vals)])
        header = ",".join(names + ["value"])
    else:
        data = np.column_stack([pts, vals.real, vals.imag])
        header = ",".join(names + ["re", "im"])
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=header, comments="")


def covector_to_csv(grid: Grid, samples: np.ndarray, path: str) -> None:
    """Covector field samples (dim, *shape) as columns A1..Adim."""
    pts, names = _coord_columns(grid)
    comps = [samples[m].reshape(-1) for m in range(grid.dim)]
    data = np.column_stack([pts] + comps)
    header = ",".join(names + [f"A{m + 1}" for m in range(grid.dim)])
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=header, comments="")


def radial_to_csv(r: np.ndarray, columns: dict, path: str) -> None:
    data = np.column_stack([r] + list(columns.values()))
    header = ",".join(["r"] + list(columns.keys()))
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=header, comments="")


def surface_to_csv(y_points: np.ndarray, t_max: np.ndarray, values: np.ndarray, path: str) -> None:
    dim = y_points.shape[1]
    data = np.column_stack([y_points, t_max, values])
    header = ",".join([f"y{i + 1}" for i in range(dim)] + ["t_max", "I_value"])
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=header, comments="")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(_sanitize(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
