"""Subsonic compressible stream-function solver on conformal annular grids.

Solves div( h(|grad psi|^2 / 2) grad psi ) = 0, h = 1/rho, around a
circle or flat plate.  The exterior of the body is mapped to the
exterior of the unit circle (identity scaling for the circle, Joukowsky
for the plate); in the conformal chart zeta = xi + i*theta with
sigma = exp(zeta) the operator keeps its divergence form and only the
metric factor H = |dz/dzeta| enters the coefficient, through
|grad_z psi|^2 = (psi_xi^2 + psi_theta^2) / H^2.

The discrete unknown is the perturbation psi~ = psi - psi_base from the
uniform-flow base psi_base = rho_inf * Im(w_inf z), whose face-integrated
fluxes are evaluated exactly from the conjugate potential Re F,
F(zeta) = rho_inf w_inf z(e^zeta).  Those exact base fluxes telescope
around every cell, so a flow that is exactly uniform (horizontal plate)
is reproduced to roundoff on any grid.

Nonlinearity is handled by Picard iteration: freeze h at the current
gradient, solve the linear five-point system, under-relax, repeat.  The
coefficient evaluation is guarded: any face whose half-squared mass flux
m reaches the sonic bound of the Bernoulli state aborts the solve (the
equation leaves its elliptic region there).  No density clamping is
applied unless the explicitly non-physical "capped" diagnostic mode is
requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (InvalidGeometryError, IterationLimitError,
                     SonicExcursionError, UnsupportedBodyError)
from .gas import BernoulliState, GasModel
from .geometry import Body, Circle, FlatPlate
from .incompressible import CircleFlow, FarField, JoukowskyPlateMap, PlateFlow

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True, eq=False)
class ConformalGrid:
    """Body-fitted polar grid in the conformal sigma plane.

    Radial levels are log-spaced (uniform in xi = log |sigma|), which
    clusters physical resolution toward the body and its edges.  Nodes
    where the conformal factor vanishes (plate-edge preimages) are
    flagged; fields are undefined there.
    """

    body: Body
    r_far: float
    n_r: int
    n_theta: int
    xi: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)          # (n_r, n_theta)
    H: np.ndarray = field(repr=False)          # |dz/dzeta| per node
    flagged: np.ndarray = field(repr=False)    # True at singular map nodes

    @property
    def d_xi(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def d_theta(self) -> float:
        return float(self.theta[1] - self.theta[0])

    def zeta(self, xi, theta):
        return np.asarray(xi) + 1j * np.asarray(theta)

    def map_z(self, zeta):
        sigma = np.exp(np.asarray(zeta, dtype=complex))
        return self._map_to_z(sigma)

    def map_dz_dzeta(self, zeta):
        """dz/dzeta = dz/dsigma * sigma (exact)."""
        sigma = np.exp(np.asarray(zeta, dtype=complex))
        return self._dz_dsigma(sigma) * sigma

    def _map_to_z(self, sigma):
        if isinstance(self.body, Circle):
            return self.body.radius * sigma
        return JoukowskyPlateMap(self.body.chord, self.body.alpha).to_z(sigma)

    def _dz_dsigma(self, sigma):
        if isinstance(self.body, Circle):
            return np.full_like(np.asarray(sigma, dtype=complex),
                                self.body.radius)
        return JoukowskyPlateMap(self.body.chord, self.body.alpha).dz_dsigma(sigma)


def build_grid(body: Body, r_far: float, n_r: int, n_theta: int) -> ConformalGrid:
    """Construct the annular grid; r_far is the physical outer distance.

    Requires r_far >= 20 body circumradii and n_r, n_theta >= 16;
    n_theta must be even so plate edges land on single flagged nodes.
    """
    if not isinstance(body, (Circle, FlatPlate)):
        raise UnsupportedBodyError(
            "conformal grid supports circle and flat plate only; general "
            "polygons are handled by the incompressible census")
    if n_r < 16 or n_theta < 16:
        raise InvalidGeometryError("grid needs n_r, n_theta >= 16")
    if n_theta % 2:
        raise InvalidGeometryError("n_theta must be even")
    if r_far < 20.0 * body.circumradius:
        raise InvalidGeometryError("outer boundary must sit beyond 20 circumradii")

    if isinstance(body, Circle):
        sigma_far = r_far / body.radius
    else:
        a = body.chord / 4.0
        sigma_far = (r_far + np.sqrt(r_far**2 - 4.0 * a**2)) / (2.0 * a)
    xi = np.linspace(0.0, np.log(sigma_far), n_r)
    theta = TWO_PI * np.arange(n_theta) / n_theta
    zeta = xi[:, None] + 1j * theta[None, :]
    sigma = np.exp(zeta)
    if isinstance(body, Circle):
        z = body.radius * sigma
        H = np.full(z.shape, body.radius) * np.abs(sigma)
    else:
        jmap = JoukowskyPlateMap(body.chord, body.alpha)
        z = jmap.to_z(sigma)
        H = np.abs(jmap.dz_dsigma(sigma) * sigma)
    flagged = H <= 1e-12 * body.circumradius
    return ConformalGrid(body=body, r_far=float(r_far), n_r=n_r,
                         n_theta=n_theta, xi=xi, theta=theta, z=z, H=H,
                         flagged=flagged)


# ---------------------------------------------------------------------------
# solution container


@dataclass(frozen=True, eq=False)
class CompressibleSolution:
    """Converged discrete stream-function flow with derived fields.

    Fields are nodal; flagged map nodes hold NaN.  ``residuals`` is the
    nonlinear cell-balance history (relative to the largest face flux)
    per Picard step.
    """

    grid: ConformalGrid
    far: FarField
    state: BernoulliState
    psi: np.ndarray
    psi_pert: np.ndarray
    rho: np.ndarray
    mach: np.ndarray
    speed: np.ndarray
    velocity: np.ndarray
    residuals: tuple
    linear_residuals: tuple
    converged: bool
    iterations: int
    max_mach: float
    max_mach_location: complex
    capped: bool
    capped_faces: int

    @property
    def max_mach_index(self):
        m = np.where(np.isnan(self.mach), -1.0, self.mach)
        return np.unravel_index(int(np.argmax(m)), m.shape)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iters: int = 200
    omega: float = 0.7
    capped: bool = False
    cap_fraction: float = 0.995


def _reference_incompressible(grid: ConformalGrid, far: FarField):
    body = grid.body
    if isinstance(body, Circle):
        return CircleFlow(body.radius, far)
    return PlateFlow(body.chord, body.alpha, far)


class _Discretization:
    """Geometry-dependent pieces shared by all Picard steps."""

    def __init__(self, grid: ConformalGrid, far: FarField, rho_inf: float):
        self.grid = grid
        self.far = far
        self.rho_inf = rho_inf
        nr, nt = grid.n_r, grid.n_theta
        dxi, dth = grid.d_xi, grid.d_theta
        xi, th = grid.xi, grid.theta

        # face-corner potentials of the uniform base, Re F at
        # (xi_{i+1/2}, theta_{j+1/2}) for i = -1..nr-1 shifted to 0..nr-1
        xe = np.concatenate([[xi[0]], 0.5 * (xi[:-1] + xi[1:]), [xi[-1]]])
        te = th + 0.5 * dth  # theta_{j+1/2}; wraps periodically
        zc = grid.map_z(xe[:, None] + 1j * te[None, :])
        self.phi_corner = np.real(rho_inf * far.w_inf * zc)  # (nr+1, nt)

        # exact base face fluxes
        # xi-face (i+1/2, j): phi(i+1/2, j-1/2) - phi(i+1/2, j+1/2)
        pc = self.phi_corner
        self.base_flux_xi = np.roll(pc[1:-1, :], 1, axis=1) - pc[1:-1, :]  # (nr-1, nt)
        # theta-face (i, j+1/2): phi(i+1/2, j+1/2) - phi(i-1/2, j+1/2)
        self.base_flux_th = pc[1:, :] - pc[:-1, :]                          # (nr, nt)

        # analytic base gradients at face midpoints (for m evaluation)
        zeta_xf = (0.5 * (xi[:-1] + xi[1:]))[:, None] + 1j * th[None, :]
        zeta_tf = xi[:, None] + 1j * te[None, :]
        fp_xf = rho_inf * far.w_inf * grid.map_dz_dzeta(zeta_xf)
        fp_tf = rho_inf * far.w_inf * grid.map_dz_dzeta(zeta_tf)
        self.base_dxi_xf = np.imag(fp_xf)   # psi_xi at xi-faces
        self.base_dth_xf = np.real(fp_xf)   # psi_theta at xi-faces
        self.base_dxi_tf = np.imag(fp_tf)
        self.base_dth_tf = np.real(fp_tf)
        self.H_xf = np.abs(grid.map_dz_dzeta(zeta_xf))
        self.H_tf = np.abs(grid.map_dz_dzeta(zeta_tf))
        self.z_xf = grid.map_z(zeta_xf)
        self.z_tf = grid.map_z(zeta_tf)
        self.dxi, self.dth = dxi, dth
        self.nr, self.nt = nr, nt

        # nodal base gradient (exact) for post-processing
        zeta_nodes = xi[:, None] + 1j * th[None, :]
        fp = rho_inf * far.w_inf * grid.map_dz_dzeta(zeta_nodes)
        self.base_dxi = np.imag(fp)
        self.base_dth = np.real(fp)

    def face_m(self, psi_t):
        """Half-squared physical gradient at xi- and theta-faces."""
        dxi, dth = self.dxi, self.dth
        # xi-faces (nr-1, nt)
        gx = self.base_dxi_xf + (psi_t[1:, :] - psi_t[:-1, :]) / dxi
        tdiff = (np.roll(psi_t, -1, axis=1) - np.roll(psi_t, 1, axis=1)) / (2 * dth)
        gt = self.base_dth_xf + 0.5 * (tdiff[1:, :] + tdiff[:-1, :])
        m_xf = 0.5 * (gx**2 + gt**2) / self.H_xf**2
        # theta-faces (nr, nt): face between (i,j) and (i,j+1)
        gt2 = self.base_dth_tf + (np.roll(psi_t, -1, axis=1) - psi_t) / dth
        xdiff = np.empty_like(psi_t)
        xdiff[1:-1, :] = (psi_t[2:, :] - psi_t[:-2, :]) / (2 * dxi)
        xdiff[0, :] = (-3 * psi_t[0, :] + 4 * psi_t[1, :] - psi_t[2, :]) / (2 * dxi)
        xdiff[-1, :] = (3 * psi_t[-1, :] - 4 * psi_t[-2, :] + psi_t[-3, :]) / (2 * dxi)
        gx2 = self.base_dxi_tf + 0.5 * (xdiff + np.roll(xdiff, -1, axis=1))
        m_tf = 0.5 * (gx2**2 + gt2**2) / self.H_tf**2
        return m_xf, m_tf

    def cell_residual(self, psi_t, h_xf, h_tf):
        """Net face flux around every interior cell (rows 1..nr-2)."""
        dxi, dth = self.dxi, self.dth
        flux_xi = h_xf * (self.base_flux_xi
                          + (psi_t[1:, :] - psi_t[:-1, :]) * dth / dxi)
        flux_th = h_tf * (self.base_flux_th
                          + (np.roll(psi_t, -1, axis=1) - psi_t) * dxi / dth)
        bal = (flux_xi[1:, :] - flux_xi[:-1, :]
               + flux_th[1:-1, :] - np.roll(flux_th[1:-1, :], 1, axis=1))
        scale = max(np.max(np.abs(flux_xi)), np.max(np.abs(flux_th)), 1e-300)
        return bal, scale

    def solve_linear(self, h_xf, h_tf, psi_body, psi_outer):
        """Direct solve of the frozen-coefficient five-point system."""
        nr, nt = self.nr, self.nt
        dxi, dth = self.dxi, self.dth
        ni = nr - 2
        idx = np.arange(ni * nt).reshape(ni, nt)

        cu = h_xf[1:, :] * dth / dxi          # couples to row i+1
        cd = h_xf[:-1, :] * dth / dxi         # couples to row i-1
        ct = h_tf[1:-1, :] * dxi / dth        # couples to j+1
        cb = np.roll(h_tf[1:-1, :], 1, axis=1) * dxi / dth  # couples to j-1
        diag = -(cu + cd + ct + cb)

        rows, cols, vals = [idx.ravel()], [idx.ravel()], [diag.ravel()]
        rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel())
        vals.append(cu[:-1, :].ravel())
        rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel())
        vals.append(cd[1:, :].ravel())
        rows.append(idx.ravel()); cols.append(np.roll(idx, -1, axis=1).ravel())
        vals.append(ct.ravel())
        rows.append(idx.ravel()); cols.append(np.roll(idx, 1, axis=1).ravel())
        vals.append(cb.ravel())

        rhs = -(h_xf[1:, :] * self.base_flux_xi[1:, :]
                - h_xf[:-1, :] * self.base_flux_xi[:-1, :]
                + h_tf[1:-1, :] * self.base_flux_th[1:-1, :]
                - np.roll(h_tf[1:-1, :] * self.base_flux_th[1:-1, :], 1, axis=1))
        rhs[0, :] -= cd[0, :] * psi_body
        rhs[-1, :] -= cu[-1, :] * psi_outer

        A = sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ni * nt, ni * nt))
        lu = splu(A)
        x = lu.solve(rhs.ravel())
        lin_res = float(np.max(np.abs(A @ x - rhs.ravel()))
                        / max(np.max(np.abs(rhs)), 1e-300))
        return x.reshape(ni, nt), lin_res


def _face_h(state: BernoulliState, m, opts: SolverOptions, where: str,
            disc: _Discretization):
    m_max = state.flux_max_m
    if opts.capped:
        capped = m >= opts.cap_fraction * m_max
        m = np.minimum(m, opts.cap_fraction * m_max)
        return state.density_from_flux(m).h, int(np.count_nonzero(capped))
    if np.any(m >= m_max):
        k = np.unravel_index(int(np.argmax(m)), m.shape)
        z = disc.z_xf[k] if where == "xi" else disc.z_tf[k]
        raise SonicExcursionError(
            f"sonic flux bound reached at {where}-face {k}, z={z:.6g}",
            location=complex(z), m_value=float(m[k]), m_max=float(m_max))
    return state.density_from_flux(m).h, 0


def solve_subsonic(grid: ConformalGrid, gas: GasModel, state: BernoulliState,
                   far: FarField, opts: SolverOptions | None = None,
                   rho_inf: float = 1.0) -> CompressibleSolution:
    """Picard solve of the compressible stream-function equation.

    Dirichlet data: psi = 0 on the body ring, psi = rho_inf * Im(W(z)) on
    the outer ring with W the exact incompressible potential for this
    body and (w_inf, Gamma).  Raises SonicExcursionError the moment any
    face leaves the subsonic (elliptic) region, IterationLimitError if
    the residual stalls.
    """
    opts = opts or SolverOptions()
    disc = _Discretization(grid, far, rho_inf)
    nr, nt = grid.n_r, grid.n_theta

    ref = _reference_incompressible(grid, far)
    psi_base_body = rho_inf * np.imag(far.w_inf * grid.z[0, :])
    psi_base_outer = rho_inf * np.imag(far.w_inf * grid.z[-1, :])
    psi_body = -psi_base_body  # total psi = 0 on the body
    psi_outer = rho_inf * np.asarray(ref.stream(grid.z[-1, :])) - psi_base_outer

    psi_t = np.zeros((nr, nt))
    psi_t[0, :] = psi_body
    psi_t[-1, :] = psi_outer
    # interior initial guess: blend the boundary data radially
    w = (grid.xi[1:-1, None] - grid.xi[0]) / (grid.xi[-1] - grid.xi[0])
    psi_t[1:-1, :] = (1 - w) * psi_body[None, :] + w * psi_outer[None, :]

    residuals, linear_residuals = [], []
    capped_total = 0
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        m_xf, m_tf = disc.face_m(psi_t)
        h_xf, nc1 = _face_h(state, m_xf, opts, "xi", disc)
        h_tf, nc2 = _face_h(state, m_tf, opts, "theta", disc)
        capped_total = max(capped_total, nc1 + nc2)

        bal, scale = disc.cell_residual(psi_t, h_xf, h_tf)
        res = float(np.max(np.abs(bal)) / scale)
        residuals.append(res)
        if res < opts.tol:
            converged = True
            break

        interior, lin_res = disc.solve_linear(h_xf, h_tf, psi_body, psi_outer)
        linear_residuals.append(lin_res)
        psi_t[1:-1, :] = ((1.0 - opts.omega) * psi_t[1:-1, :]
                          + opts.omega * interior)

    if not converged and not opts.capped:
        raise IterationLimitError(
            f"Picard stalled at residual {residuals[-1]:.3e} "
            f"after {opts.max_iters} iterations", residuals=residuals)

    # capped diagnostic runs return their last (non-physical) iterate
    return _postprocess(grid, disc, gas, state, far, psi_t, residuals,
                        linear_residuals, it, capped_total, opts, converged)


def _postprocess(grid, disc, gas, state, far, psi_t, residuals,
                 linear_residuals, iterations, capped_faces, opts,
                 converged=True):
    nr, nt = grid.n_r, grid.n_theta
    dxi, dth = grid.d_xi, grid.d_theta

    gx = np.empty_like(psi_t)
    gx[1:-1, :] = (psi_t[2:, :] - psi_t[:-2, :]) / (2 * dxi)
    gx[0, :] = (-3 * psi_t[0, :] + 4 * psi_t[1, :] - psi_t[2, :]) / (2 * dxi)
    gx[-1, :] = (3 * psi_t[-1, :] - 4 * psi_t[-2, :] + psi_t[-3, :]) / (2 * dxi)
    gt = (np.roll(psi_t, -1, axis=1) - np.roll(psi_t, 1, axis=1)) / (2 * dth)
    gx = gx + disc.base_dxi
    gt = gt + disc.base_dth

    valid = ~grid.flagged
    m = np.full(psi_t.shape, np.nan)
    m[valid] = 0.5 * (gx[valid]**2 + gt[valid]**2) / grid.H[valid]**2
    if not opts.capped and np.any(m[valid] >= state.flux_max_m):
        k = np.unravel_index(int(np.nanargmax(m)), m.shape)
        raise SonicExcursionError(
            f"sonic flux bound reached at node {k}, z={grid.z[k]:.6g}",
            location=complex(grid.z[k]), m_value=float(m[k]),
            m_max=float(state.flux_max_m))
    m_eval = np.where(valid, np.nan_to_num(m), 0.0)
    if opts.capped:
        m_eval = np.minimum(m_eval, opts.cap_fraction * state.flux_max_m)
    rho = np.full(psi_t.shape, np.nan)
    rho[valid] = state.density_from_flux(m_eval[valid]).rho
    speed = np.full(psi_t.shape, np.nan)
    speed[valid] = np.sqrt(2.0 * m_eval[valid]) / rho[valid]
    mach = np.full(psi_t.shape, np.nan)
    mach[valid] = gas.mach(speed[valid], rho[valid])

    # rho v = -grad^perp psi; as a complex vector v = -i * (psi_x + i psi_y)/rho
    dzeta_dz = np.full(psi_t.shape, np.nan, dtype=complex)
    zeta_nodes = grid.xi[:, None] + 1j * grid.theta[None, :]
    dz = grid.map_dz_dzeta(zeta_nodes)
    dzeta_dz[valid] = 1.0 / dz[valid]
    with np.errstate(invalid="ignore"):
        grad_z = (gx + 1j * gt) * np.conj(dzeta_dz)
        velocity = -1j * grad_z / rho

    psi_total = disc.rho_inf * np.imag(far.w_inf * grid.z) + psi_t
    k = np.unravel_index(int(np.nanargmax(np.where(valid, mach, -1.0))),
                         mach.shape)
    return CompressibleSolution(
        grid=grid, far=far, state=state, psi=psi_total, psi_pert=psi_t,
        rho=rho, mach=mach, speed=speed, velocity=velocity,
        residuals=tuple(residuals), linear_residuals=tuple(linear_residuals),
        converged=converged, iterations=iterations, max_mach=float(mach[k]),
        max_mach_location=complex(grid.z[k]), capped=opts.capped,
        capped_faces=capped_faces)


def incompressible_reference_solution(grid: ConformalGrid, far: FarField,
                                      rho_inf: float = 1.0) -> np.ndarray:
    """Discrete incompressible solve on the same grid (h frozen constant).

    Returns the perturbation field psi~; used as the bias-free oracle for
    low-Mach comparisons and as the first frozen iterate of the blow-up
    metric.
    """
    disc = _Discretization(grid, far, rho_inf)
    ref = _reference_incompressible(grid, far)
    psi_body = -rho_inf * np.imag(far.w_inf * grid.z[0, :])
    psi_outer = (rho_inf * np.asarray(ref.stream(grid.z[-1, :]))
                 - rho_inf * np.imag(far.w_inf * grid.z[-1, :]))
    h_xf = np.ones((grid.n_r - 1, grid.n_theta)) / rho_inf
    h_tf = np.ones((grid.n_r, grid.n_theta)) / rho_inf
    interior, _ = disc.solve_linear(h_xf, h_tf, psi_body, psi_outer)
    psi_t = np.zeros((grid.n_r, grid.n_theta))
    psi_t[0, :] = psi_body
    psi_t[-1, :] = psi_outer
    psi_t[1:-1, :] = interior
    return psi_t


def nodal_velocity_from_pert(grid: ConformalGrid, far: FarField, psi_t,
                             rho_inf: float = 1.0, rho=None) -> np.ndarray:
    """Velocity field of a perturbation solve (default: incompressible,
    rho = rho_inf everywhere)."""
    disc = _Discretization(grid, far, rho_inf)
    dxi, dth = grid.d_xi, grid.d_theta
    gx = np.empty_like(psi_t)
    gx[1:-1, :] = (psi_t[2:, :] - psi_t[:-2, :]) / (2 * dxi)
    gx[0, :] = (-3 * psi_t[0, :] + 4 * psi_t[1, :] - psi_t[2, :]) / (2 * dxi)
    gx[-1, :] = (3 * psi_t[-1, :] - 4 * psi_t[-2, :] + psi_t[-3, :]) / (2 * dxi)
    gt = (np.roll(psi_t, -1, axis=1) - np.roll(psi_t, 1, axis=1)) / (2 * dth)
    gx = gx + disc.base_dxi
    gt = gt + disc.base_dth
    valid = ~grid.flagged
    zeta_nodes = grid.xi[:, None] + 1j * grid.theta[None, :]
    dz = grid.map_dz_dzeta(zeta_nodes)
    grad_z = np.full(psi_t.shape, np.nan, dtype=complex)
    grad_z[valid] = (gx[valid] + 1j * gt[valid]) / np.conj(dz[valid])
    if rho is None:
        rho = rho_inf
    return -1j * grad_z / rho


# ---------------------------------------------------------------------------
# refinement study


@dataclass(frozen=True)
class RefinementLevel:
    grid_shape: tuple
    converged: bool
    outcome: str            # "converged" | "sonic_excursion" | "iteration_limit"
    max_mach: float | None
    corner_max_mach: float | None
    sonic_margin_ratio: float
    excursion_m_ratio: float | None
    iterations: int | None


@dataclass(frozen=True)
class RefinementStudy:
    body_kind: str
    mach_inf: float
    levels: tuple
    margin_strictly_increasing: bool
    abort_at_finest: bool
    mach_cauchy_factors: tuple


def _corner_face_mask(disc: _Discretization, grid: ConformalGrid,
                      radius: float):
    body = grid.body
    if isinstance(body, FlatPlate):
        edges = np.array([body.trailing_edge, body.leading_edge])
        near_xf = np.min(np.abs(disc.z_xf[..., None] - edges), axis=-1) <= radius
        near_tf = np.min(np.abs(disc.z_tf[..., None] - edges), axis=-1) <= radius
        return near_xf, near_tf
    ones_xf = np.ones(disc.z_xf.shape, dtype=bool)
    ones_tf = np.ones(disc.z_tf.shape, dtype=bool)
    return ones_xf, ones_tf


def refinement_study(body: Body, gas: GasModel, mach_inf: float, gamma: float,
                     grids, r_far: float | None = None,
                     corner_radius: float | None = None,
                     opts: SolverOptions | None = None) -> RefinementStudy:
    """Grid-refinement signature of (non-)existence.

    Per level the study records (a) the sonic-margin ratio
    max_faces m / m_max of the frozen-coefficient (incompressible) first
    iterate over the corner neighbourhoods - a resolution-independent
    blow-up metric that keeps growing when no subsonic solution exists -
    and (b) the guarded Picard outcome (converged max Mach, or the abort).
    Solver errors are recorded per level, never fatal to the study.
    """
    if r_far is None:
        r_far = 25.0 * body.circumradius
    if corner_radius is None:
        corner_radius = 0.15 * body.circumradius
    state = BernoulliState.from_free_stream(gas, mach_inf)
    q_inf = state.free_stream_speed(mach_inf)
    far = FarField(w_inf=q_inf, circulation=gamma)
    opts = opts or SolverOptions()

    levels = []
    for (n_r, n_theta) in grids:
        grid = build_grid(body, r_far, n_r, n_theta)
        disc = _Discretization(grid, far, 1.0)
        mask_xf, mask_tf = _corner_face_mask(disc, grid, corner_radius)

        psi_t = incompressible_reference_solution(grid, far)
        m_xf, m_tf = disc.face_m(psi_t)
        margin = max(float(np.max(m_xf[mask_xf]) / state.flux_max_m),
                     float(np.max(m_tf[mask_tf]) / state.flux_max_m))

        outcome, max_mach, corner_mach, exc_ratio, iters = "converged", None, None, None, None
        try:
            sol = solve_subsonic(grid, gas, state, far, opts)
            max_mach = sol.max_mach
            iters = sol.iterations
            near = _corner_node_mask(grid, corner_radius)
            vals = sol.mach[near & ~grid.flagged]
            corner_mach = float(np.nanmax(vals)) if vals.size else sol.max_mach
        except SonicExcursionError as exc:
            outcome = "sonic_excursion"
            exc_ratio = float(exc.m_value / exc.m_max)
        except IterationLimitError as exc:
            outcome = "iteration_limit"
            iters = len(exc.residuals)
        levels.append(RefinementLevel(
            grid_shape=(n_r, n_theta), converged=outcome == "converged",
            outcome=outcome, max_mach=max_mach, corner_max_mach=corner_mach,
            sonic_margin_ratio=margin, excursion_m_ratio=exc_ratio,
            iterations=iters))

    margins = [lv.sonic_margin_ratio for lv in levels]
    increasing = all(b > a * (1 + 1e-9) for a, b in zip(margins, margins[1:]))
    machs = [lv.max_mach for lv in levels if lv.max_mach is not None]
    cauchy = tuple(abs(b - a) for a, b in zip(machs, machs[1:]))
    return RefinementStudy(
        body_kind=body.kind, mach_inf=mach_inf, levels=tuple(levels),
        margin_strictly_increasing=bool(increasing),
        abort_at_finest=levels[-1].outcome == "sonic_excursion",
        mach_cauchy_factors=cauchy)


def _corner_node_mask(grid: ConformalGrid, radius: float):
    body = grid.body
    if isinstance(body, FlatPlate):
        edges = np.array([body.trailing_edge, body.leading_edge])
        return np.min(np.abs(grid.z[..., None] - edges), axis=-1) <= radius
    return np.ones(grid.z.shape, dtype=bool)
