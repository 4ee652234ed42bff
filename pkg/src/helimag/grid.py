"""Structured grid, vector fields, and the discrete helicity calculus.

The domain is an axis-aligned box discretized by a uniform cell-centered
grid. Fields store one R^3 value per cell. Two families of differential
operators live here:

* Collocated operators (``partial_derivative``, ``curl``, ``helical_partial``,
  ``helical_gradient``, ``helical_laplacian``): second-order central
  differences at cell centers. Cells adjacent to the boundary use a ghost
  layer. The default ghost policy (``bc="extrapolate"``) extrapolates the
  field quadratically across the face, which is equivalent to second-order
  one-sided stencils and keeps the pointwise calculus exact on constants,
  linears and quadratics everywhere, including boundary cells. The policy
  ``bc="llg"`` fills ghosts from the Robin rule of ``fill_ghost_llg`` instead,
  imposing the zero-helical-flux boundary condition of the magnetization
  problem on the stencil.

* The flux-form helical Laplacian (``helical_laplacian_flux``): the
  variational realization used by the time integrators. The helical gradient
  is evaluated on cell faces,

      F = l_ex (u_+ - u_-)/h + (kappa/l_ex) ((u_+ + u_-)/2) x e_i,

  boundary faces carry F = 0 (the zero-flux condition exactly), and the
  Laplacian is minus the adjoint of that face gradient. This makes the
  operator symmetric negative semidefinite and the exact gradient of the
  face energy ``helical_flux_energy``, which is what the discrete energy
  law of the dynamics module relies on.

The helical derivative combines exchange and Dzyaloshinskii-Moriya coupling
into one first-order operator:

    d_i^h u = l_ex d_i u + (kappa/l_ex) (u x e_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend

__all__ = [
    "Grid",
    "VectorField",
    "MagnetizationField",
    "HelicalGradient",
    "GhostLayer",
    "fill_ghost_llg",
    "partial_derivative",
    "curl",
    "helical_partial",
    "helical_gradient",
    "helical_laplacian",
    "helical_laplacian_flux",
    "helical_flux_energy",
    "helical_flux_inner",
    "boundary_helical_flux",
    "boundary_pairing",
    "inner_product",
    "l2_norm",
    "field_from_function",
    "cross_axis",
]


@dataclass(frozen=True)
class Grid:
    """Cell-centered uniform discretization of a box with given side lengths.

    ``spacing`` is always derived as ``extents / cells`` so the defining
    invariant holds exactly in the stored representation.
    """

    extents: tuple[float, float, float]
    cells: tuple[int, int, int]

    def __post_init__(self):
        extents = tuple(float(e) for e in self.extents)
        cells = tuple(int(n) for n in self.cells)
        if len(extents) != 3 or len(cells) != 3:
            raise ValueError("Grid needs three extents and three cell counts")
        if any(e <= 0.0 for e in extents):
            raise ValueError("grid extents must be positive")
        if any(n < 1 for n in cells):
            raise ValueError("grid cell counts must be >= 1")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "cells", cells)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(e / n for e, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        h = self.spacing
        return h[0] * h[1] * h[2]

    @property
    def volume(self) -> float:
        e = self.extents
        return e[0] * e[1] * e[2]

    @property
    def total_cells(self) -> int:
        n = self.cells
        return n[0] * n[1] * n[2]

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along ``axis`` (1-based)."""
        ax = _axis_index(axis)
        h = self.spacing[ax]
        return (np.arange(self.cells[ax]) + 0.5) * h

    def meshgrid(self):
        """Cell-center coordinate arrays X, Y, Z of shape ``cells``."""
        xs = [self.axis_coordinates(a) for a in (1, 2, 3)]
        return np.meshgrid(*xs, indexing="ij")

    def compatible(self, other: "Grid", rtol: float = 1e-12) -> bool:
        if self.cells != other.cells:
            return False
        return all(
            abs(a - b) <= rtol * max(abs(a), abs(b), 1.0)
            for a, b in zip(self.extents, other.extents)
        )


class VectorField:
    """One R^3 value per cell, stored as a ``(nx, ny, nz, 3)`` float array.

    The serialized flat order is row-major with x fastest,
    ``c = ix + nx*(iy + ny*iz)``.
    """

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.cells + (3,):
            if values.shape == (grid.total_cells, 3):
                values = flat_to_box(grid, values)
            else:
                raise ValueError(
                    f"field shape {values.shape} does not match grid "
                    f"{grid.cells + (3,)}"
                )
        self.grid = grid
        self.values = values

    def copy(self) -> "VectorField":
        return type(self)(self.grid, self.values.copy())

    def flat(self) -> np.ndarray:
        """Values as ``(total_cells, 3)`` in x-fastest order."""
        return box_to_flat(self.values)

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def __repr__(self):
        return f"{type(self).__name__}(cells={self.grid.cells})"


class MagnetizationField(VectorField):
    """A VectorField constrained to the unit sphere (|m| = 1 per cell)."""

    UNIT_TOL = 1e-12

    def __init__(self, grid: Grid, values: np.ndarray, check: bool = True):
        super().__init__(grid, values)
        if check:
            drift = self.unit_norm_drift()
            if drift > self.UNIT_TOL * 10:
                raise ValueError(
                    f"magnetization is not unit length (max |1-|m|| = {drift:.3e})"
                )

    def unit_norm_drift(self) -> float:
        norms = np.linalg.norm(self.values, axis=-1)
        return float(np.max(np.abs(norms - 1.0)))

    @staticmethod
    def project(field: VectorField) -> "MagnetizationField":
        """Cellwise renormalization onto the sphere."""
        norms = np.linalg.norm(field.values, axis=-1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("cannot project a zero vector onto the sphere")
        return MagnetizationField(field.grid, field.values / norms, check=False)


@dataclass
class HelicalGradient:
    """The triple (d_1^h u, d_2^h u, d_3^h u)."""

    grid: Grid
    components: tuple[VectorField, VectorField, VectorField]

    def squared_magnitude(self) -> np.ndarray:
        """Cellwise |grad_h u|^2 (sum over the three component fields)."""
        return sum(np.sum(c.values**2, axis=-1) for c in self.components)


@dataclass
class GhostLayer:
    """One ghost plane per box face; ``lo[ax]``/``hi[ax]`` have the shape of
    the adjacent boundary slice."""

    lo: tuple[np.ndarray, np.ndarray, np.ndarray]
    hi: tuple[np.ndarray, np.ndarray, np.ndarray]


def box_to_flat(values: np.ndarray) -> np.ndarray:
    return values.transpose(2, 1, 0, 3).reshape(-1, 3)


def flat_to_box(grid: Grid, flat: np.ndarray) -> np.ndarray:
    nx, ny, nz = grid.cells
    return flat.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)


def field_from_function(grid: Grid, fn) -> VectorField:
    """Sample ``fn(X, Y, Z) -> (fx, fy, fz)`` at cell centers."""
    X, Y, Z = grid.meshgrid()
    fx, fy, fz = fn(X, Y, Z)
    values = np.stack([np.broadcast_to(c, X.shape) for c in (fx, fy, fz)], axis=-1)
    return VectorField(grid, values.astype(float))


def cross_axis(v: np.ndarray, ax: int) -> np.ndarray:
    """Cellwise cross product v x e_ax for 0-based ax."""
    out = np.empty_like(v)
    if ax == 0:
        out[..., 0] = 0.0
        out[..., 1] = v[..., 2]
        out[..., 2] = -v[..., 1]
    elif ax == 1:
        out[..., 0] = -v[..., 2]
        out[..., 1] = 0.0
        out[..., 2] = v[..., 0]
    else:
        out[..., 0] = v[..., 1]
        out[..., 1] = -v[..., 0]
        out[..., 2] = 0.0
    return out


def _axis_index(axis: int) -> int:
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")
    return axis - 1


def _take_plane(values: np.ndarray, ax: int, index: int) -> np.ndarray:
    sl = [slice(None)] * values.ndim
    sl[ax] = index
    return values[tuple(sl)]


def _extrapolated_ghosts(values: np.ndarray, ax: int):
    """Quadratic extrapolation of the field across each boundary face.

    Equivalent to second-order one-sided differences at boundary cells:
    exact for constant, linear and quadratic profiles.
    """
    n = values.shape[ax]
    if n >= 3:
        lo = (
            3.0 * _take_plane(values, ax, 0)
            - 3.0 * _take_plane(values, ax, 1)
            + _take_plane(values, ax, 2)
        )
        hi = (
            3.0 * _take_plane(values, ax, -1)
            - 3.0 * _take_plane(values, ax, -2)
            + _take_plane(values, ax, -3)
        )
    elif n == 2:
        lo = 2.0 * _take_plane(values, ax, 0) - _take_plane(values, ax, 1)
        hi = 2.0 * _take_plane(values, ax, -1) - _take_plane(values, ax, -2)
    else:
        lo = _take_plane(values, ax, 0)
        hi = lo
    return lo, hi


def _llg_ghosts(values: np.ndarray, ax: int, h: float, robin_coef: float):
    """Ghosts from the Robin rule m_g = m_in - h*(kappa/l_ex^2)(m_in x n)."""
    m_lo = _take_plane(values, ax, 0)  # outward normal -e_ax
    m_hi = _take_plane(values, ax, -1)  # outward normal +e_ax
    lo = m_lo + h * robin_coef * cross_axis(m_lo, ax)
    hi = m_hi - h * robin_coef * cross_axis(m_hi, ax)
    return lo, hi


def fill_ghost_llg(m: VectorField, params) -> GhostLayer:
    """Ghost layer realizing the Robin boundary condition of the strong form.

    For each boundary face with outward normal n and adjacent interior value
    m_in, the ghost is m_g = m_in - h*(kappa/l_ex^2)(m_in x n) with h the
    spacing along the face normal. The face-centered discrete helical flux
    l_ex (m_g - m_in)/h + (kappa/l_ex)(m_in x n) then vanishes identically.
    With kappa = 0 this reduces to the mirror (homogeneous Neumann) rule.
    """
    coef = params.kappa / params.ell_ex**2
    h = m.grid.spacing
    lo, hi = [], []
    for ax in range(3):
        g_lo, g_hi = _llg_ghosts(m.values, ax, h[ax], coef)
        lo.append(g_lo)
        hi.append(g_hi)
    return GhostLayer(lo=tuple(lo), hi=tuple(hi))


def _ghosts_for(values, ax, h, bc, params):
    if bc == "extrapolate":
        return _extrapolated_ghosts(values, ax)
    if bc == "llg":
        if params is None:
            raise ValueError('bc="llg" requires material parameters')
        return _llg_ghosts(values, ax, h, params.kappa / params.ell_ex**2)
    raise ValueError(f"unknown ghost policy {bc!r}")


def partial_derivative(
    u: VectorField, axis: int, bc: str = "extrapolate", params=None
) -> VectorField:
    """Second-order partial derivative along ``axis`` (1-based).

    Interior cells use central differences (u[c+1]-u[c-1])/(2h); boundary
    cells use the ghost policy ``bc`` (see module docstring).
    """
    ax = _axis_index(axis)
    n = u.grid.cells[ax]
    if n < 2:
        raise ValueError(
            f"partial_derivative needs at least 2 cells along axis {axis}, got {n}"
        )
    h = u.grid.spacing[ax]
    lo, hi = _ghosts_for(u.values, ax, h, bc, params)
    padded = np.concatenate(
        [np.expand_dims(lo, ax), u.values, np.expand_dims(hi, ax)], axis=ax
    )
    sl_p = [slice(None)] * 4
    sl_m = [slice(None)] * 4
    sl_p[ax] = slice(2, None)
    sl_m[ax] = slice(0, -2)
    deriv = (padded[tuple(sl_p)] - padded[tuple(sl_m)]) / (2.0 * h)
    return VectorField(u.grid, deriv)


def curl(u: VectorField, bc: str = "extrapolate", params=None) -> VectorField:
    """Central-difference curl with the same ghost policy as partial_derivative."""
    d = [partial_derivative(u, a, bc=bc, params=params).values for a in (1, 2, 3)]
    out = np.empty_like(u.values)
    out[..., 0] = d[1][..., 2] - d[2][..., 1]
    out[..., 1] = d[2][..., 0] - d[0][..., 2]
    out[..., 2] = d[0][..., 1] - d[1][..., 0]
    return VectorField(u.grid, out)


def helical_partial(
    u: VectorField, axis: int, params, bc: str = "extrapolate"
) -> VectorField:
    """d_i^h u = l_ex * d_i u + (kappa/l_ex) (u x e_i)."""
    ax = _axis_index(axis)
    du = partial_derivative(u, axis, bc=bc, params=params)
    values = params.ell_ex * du.values + (params.kappa / params.ell_ex) * cross_axis(
        u.values, ax
    )
    return VectorField(u.grid, values)


def helical_gradient(u: VectorField, params, bc: str = "extrapolate") -> HelicalGradient:
    comps = tuple(helical_partial(u, a, params, bc=bc) for a in (1, 2, 3))
    return HelicalGradient(grid=u.grid, components=comps)


def helical_laplacian(u: VectorField, params, bc: str = "extrapolate") -> VectorField:
    """Collocated helical Laplacian: sum_i d_i^h d_i^h u (composed stencil).

    Requires >= 3 cells per axis. With the default ghost policy the operator
    reproduces the pointwise identities of the continuum calculus everywhere
    (e.g. constants map to -2(kappa/l_ex)^2 u); with ``bc="llg"`` the Robin
    ghost rule is applied at both applications, which distorts boundary cells
    for fields that violate the boundary condition.
    """
    for ax in range(3):
        if u.grid.cells[ax] < 3:
            raise ValueError(
                "helical_laplacian needs at least 3 cells per axis, got "
                f"{u.grid.cells}"
            )
    out = np.zeros_like(u.values)
    for axis in (1, 2, 3):
        first = helical_partial(u, axis, params, bc=bc)
        out += helical_partial(first, axis, params, bc=bc).values
    return VectorField(u.grid, out)


def helical_laplacian_flux(m: VectorField, params) -> VectorField:
    """Flux-form helical Laplacian with the zero-flux boundary condition.

    Minus the adjoint of the face-centered helical gradient; symmetric,
    negative semidefinite, and the exact (negative) gradient of
    ``helical_flux_energy`` with respect to the cell values. This is the
    operator driving the time integrators.
    """
    out = get_backend().exchange_dmi_field(
        m.values, params.ell_ex, params.kappa, m.grid.spacing
    )
    return VectorField(m.grid, out)


def _face_fluxes(values: np.ndarray, lex: float, kappa: float, spacing):
    """Interior-face helical fluxes per axis (boundary faces are zero/BC)."""
    fluxes = []
    for ax in range(3):
        n = values.shape[ax]
        if n < 2:
            fluxes.append(None)
            continue
        sl_lo = [slice(None)] * 4
        sl_hi = [slice(None)] * 4
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        u_lo = values[tuple(sl_lo)]
        u_hi = values[tuple(sl_hi)]
        F = lex * (u_hi - u_lo) / spacing[ax]
        F += (kappa / lex) * cross_axis(0.5 * (u_lo + u_hi), ax)
        fluxes.append(F)
    return fluxes


def helical_flux_energy(m: VectorField, params) -> float:
    """(1/2) * sum over interior faces of |F|^2 * cell_volume.

    The exact quadratic form of ``helical_laplacian_flux``:
    grad_m E = -cell_volume * helical_laplacian_flux(m).
    """
    total = 0.0
    for F in _face_fluxes(m.values, params.ell_ex, params.kappa, m.grid.spacing):
        if F is not None:
            total += float(np.sum(F * F))
    return 0.5 * m.grid.cell_volume * total


def helical_flux_inner(u: VectorField, v: VectorField, params) -> float:
    """Face-based pairing <G u, G v> * cell_volume (engine helical H^1 product)."""
    if not u.grid.compatible(v.grid):
        raise ValueError("fields live on different grids")
    Fu = _face_fluxes(u.values, params.ell_ex, params.kappa, u.grid.spacing)
    Fv = _face_fluxes(v.values, params.ell_ex, params.kappa, v.grid.spacing)
    total = 0.0
    for a, b in zip(Fu, Fv):
        if a is not None:
            total += float(np.sum(a * b))
    return u.grid.cell_volume * total


def boundary_helical_flux(m: VectorField, params, ghost: GhostLayer | None = None):
    """Discrete helical flux grad_h m . n at every boundary face.

    Evaluated as l_ex (m_g - m_in)/h + (kappa/l_ex)(m_in x n) with m_g from
    ``fill_ghost_llg`` (or a supplied ghost layer). Returns a list of six
    arrays ordered (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi).
    """
    if ghost is None:
        ghost = fill_ghost_llg(m, params)
    lex, kappa = params.ell_ex, params.kappa
    h = m.grid.spacing
    faces = []
    for ax in range(3):
        m_lo = _take_plane(m.values, ax, 0)
        m_hi = _take_plane(m.values, ax, -1)
        # outward normal -e_ax: flux = l (m_g - m_in)/h + (k/l)(m_in x (-e_ax))
        flux_lo = lex * (ghost.lo[ax] - m_lo) / h[ax] - (kappa / lex) * cross_axis(
            m_lo, ax
        )
        flux_hi = lex * (ghost.hi[ax] - m_hi) / h[ax] + (kappa / lex) * cross_axis(
            m_hi, ax
        )
        faces.extend([flux_lo, flux_hi])
    return faces


def boundary_pairing(u: VectorField, v_flux_faces) -> float:
    """Surface quadrature <u, w>_dOmega for face-valued w.

    ``v_flux_faces`` is a six-entry list as returned by helical-flux style
    evaluators; u is extrapolated linearly to the face centers. Face weight
    is the face area (midpoint rule on the boundary).
    """
    h = u.grid.spacing
    areas = (h[1] * h[2], h[0] * h[2], h[0] * h[1])
    total = 0.0
    k = 0
    for ax in range(3):
        n = u.grid.cells[ax]
        for side in (0, 1):
            w = v_flux_faces[k]
            k += 1
            if side == 0:
                u0 = _take_plane(u.values, ax, 0)
                u1 = _take_plane(u.values, ax, min(1, n - 1))
            else:
                u0 = _take_plane(u.values, ax, -1)
                u1 = _take_plane(u.values, ax, max(-2, -n))
            u_face = 1.5 * u0 - 0.5 * u1 if n >= 2 else u0
            total += areas[ax] * float(np.sum(u_face * w))
    return total


def inner_product(u: VectorField, v: VectorField) -> float:
    """L^2 scalar product by the midpoint rule: sum u.v * cell_volume."""
    if not u.grid.compatible(v.grid):
        raise ValueError("fields live on different grids")
    return float(np.sum(u.values * v.values)) * u.grid.cell_volume


def l2_norm(u: VectorField) -> float:
    return float(np.sqrt(max(inner_product(u, u), 0.0)))
