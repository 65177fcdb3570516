"""Incompressible irrotational flows: exact formulas and vortex panels.

Complex-velocity convention: w = v_x - i*v_y as a function of z = x + iy,
holomorphic in the fluid.  The potential W = phi + i*psi has W' = w, and
psi is normalized to zero on the body (slip).  Circulation is the
counterclockwise line integral of velocity, Gamma = Re of the closed
contour integral of w dz.

Exact solutions: flow around a circle of radius R,

    w(z) = w_inf - conj(w_inf) R^2 / z^2 + Gamma / (2 pi i z),

and around a flat plate via the Joukowsky map of the unit circle.

Panel representation: linear-strength vortex sheets on the boundary with
one strength unknown per node (corner nodes shared between adjacent
sides) and the total circulation imposed as an explicit constraint row.
Closed bodies collocate the stream function at panel midpoints (the
no-penetration condition in exact per-panel flux form); the open plate
collocates the normal velocity at midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import analysis
from .errors import (DegenerateKuttaError, FluidDomainError,
                     InvalidGeometryError, SolverError)
from .geometry import Body, Circle, FlatPlate, Polygon

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FarField:
    """Free-stream complex velocity and circulation of an exterior flow.

    By convention w_inf is real positive unless a run deliberately tilts
    the stream; bodies carry their own incidence instead.
    """

    w_inf: complex
    circulation: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.w_inf):
            raise InvalidGeometryError("w_inf must be finite")

    @property
    def speed(self) -> float:
        return abs(self.w_inf)

    @property
    def flow_direction(self) -> complex:
        """Unit vector of the free-stream velocity (as a complex number)."""
        if self.w_inf == 0:
            return 1.0 + 0j
        return np.conj(self.w_inf) / abs(self.w_inf)


# ---------------------------------------------------------------------------
# exact flows


@dataclass(frozen=True)
class CircleFlow:
    """Explicit flow around a circle: arbitrary circulation is admissible."""

    radius: float
    far: FarField

    @property
    def body(self) -> Circle:
        return Circle(self.radius)

    branch_cut = "negative real axis from the center"

    def _check(self, z, strict=True):
        z = np.asarray(z, dtype=complex)
        if strict and np.any(np.abs(z) < self.radius * (1 - 1e-12)):
            raise FluidDomainError("point strictly inside the circle")
        return z

    def velocity(self, z):
        z = self._check(z)
        wi = self.far.w_inf
        return (wi - np.conj(wi) * self.radius**2 / z**2
                + self.far.circulation / (TWO_PI * 1j * z))

    def potential(self, z):
        """W with the log branch cut on the negative real axis."""
        z = self._check(z)
        wi = self.far.w_inf
        log_term = np.log(z) - np.log(self.radius)
        return (wi * z + np.conj(wi) * self.radius**2 / z
                + self.far.circulation / (TWO_PI * 1j) * log_term)

    def stream(self, z):
        z = self._check(z)
        wi = self.far.w_inf
        return (np.imag(wi * z + np.conj(wi) * self.radius**2 / z)
                - self.far.circulation / TWO_PI * np.log(np.abs(z) / self.radius))


@dataclass(frozen=True)
class JoukowskyPlateMap:
    """z(sigma) = exp(-i alpha) * (chord/4) * (sigma + 1/sigma).

    Maps the exterior of the unit circle onto the exterior of the plate
    slit; sigma = +1 is the trailing edge, sigma = -1 the leading edge.
    """

    chord: float
    alpha: float

    @property
    def scale(self) -> float:
        return self.chord / 4.0

    @property
    def direction(self) -> complex:
        return complex(np.exp(-1j * self.alpha))

    def to_z(self, sigma):
        sigma = np.asarray(sigma, dtype=complex)
        return self.direction * self.scale * (sigma + 1.0 / sigma)

    def dz_dsigma(self, sigma):
        sigma = np.asarray(sigma, dtype=complex)
        return self.direction * self.scale * (1.0 - 1.0 / sigma**2)

    def to_sigma(self, z):
        """Exterior preimage, |sigma| >= 1.

        Uses sqrt(zeta-2)*sqrt(zeta+2), whose branch cut lies exactly on
        the slit, then picks the root outside the unit circle (the two
        roots are reciprocal).
        """
        zeta = np.asarray(z, dtype=complex) / (self.direction * self.scale)
        s = np.sqrt(zeta - 2.0) * np.sqrt(zeta + 2.0)
        sig = 0.5 * (zeta + s)
        with np.errstate(divide="ignore", invalid="ignore"):
            other = np.where(sig != 0, 1.0 / sig, np.inf)
        return np.where(np.abs(sig) >= 1.0, sig, other)


@dataclass(frozen=True)
class PlateFlow:
    """Exact flow around a flat plate through the Joukowsky map.

    Velocities diverge like r**(-1/2) at both edges unless the
    circulation cancels the corresponding circle-plane stagnation
    condition (the Kutta root).
    """

    chord: float
    alpha: float
    far: FarField

    branch_cut = "upstream extension of the plate line (preimage negative reals)"

    @property
    def body(self) -> FlatPlate:
        return FlatPlate(self.chord, self.alpha)

    @property
    def map(self) -> JoukowskyPlateMap:
        return JoukowskyPlateMap(self.chord, self.alpha)

    @property
    def circle_plane_w_inf(self) -> complex:
        """Free stream seen in the sigma plane, u_inf = w_inf * dz/dsigma(inf)."""
        return self.far.w_inf * self.map.direction * self.map.scale

    def _sigma(self, z):
        return self.map.to_sigma(z)

    def circle_plane_velocity(self, sigma):
        u = self.circle_plane_w_inf
        return (u - np.conj(u) / np.asarray(sigma, dtype=complex)**2
                + self.far.circulation / (TWO_PI * 1j * sigma))

    def velocity(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(self.body.on_slit(z, tol=1e-13)):
            raise FluidDomainError("velocity evaluated on the plate slit")
        sig = self._sigma(z)
        return self.circle_plane_velocity(sig) / self.map.dz_dsigma(sig)

    def potential(self, z):
        sig = self._sigma(z)
        u = self.circle_plane_w_inf
        return (u * sig + np.conj(u) / sig
                + self.far.circulation / (TWO_PI * 1j) * np.log(sig))

    def stream(self, z):
        sig = self._sigma(z)
        u = self.circle_plane_w_inf
        return (np.imag(u * sig + np.conj(u) / sig)
                - self.far.circulation / TWO_PI * np.log(np.abs(sig)))

    def kutta_circulation(self, corner_id: int = 0) -> float:
        """Circulation cancelling the edge singularity: Gamma such that the
        sigma-plane velocity vanishes at the edge preimage (+1 trailing,
        -1 leading).  For real w_inf the trailing-edge value is
        -pi * chord * w_inf * sin(alpha)."""
        sig_e = 1.0 if corner_id == 0 else -1.0
        u = self.circle_plane_w_inf
        # u - conj(u)/sig^2 + G/(2 pi i sig) = 0 at sig = +-1
        return float(np.real(-TWO_PI * 1j * sig_e * (u - np.conj(u) / sig_e**2)))


# ---------------------------------------------------------------------------
# linear-strength vortex panels


def _local(z, za, zb):
    d = zb - za
    length = abs(d)
    e = d / length
    return (np.asarray(z, dtype=complex) - za) / e, e, length


def vortex_panel_w_coeffs(z, za, zb):
    """Complex-velocity influence (per unit nodal strength) of a straight
    linear-strength vortex panel from za to zb: w = ca*g_a + cb*g_b.

    Points on the panel get the principal-value (two-sided average)
    velocity."""
    zl, e, L = _local(z, za, zb)
    on = (np.abs(zl.imag) <= 1e-12 * L) & (zl.real > 1e-12 * L) \
        & (zl.real < L * (1 - 1e-12))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(on, np.abs(zl / (zl - L)) + 0j, zl / (zl - L))
        i0 = np.log(ratio)
    i1 = zl * i0 - L
    ca = (i0 - i1 / L) / (TWO_PI * 1j)
    cb = (i1 / L) / (TWO_PI * 1j)
    return ca / e, cb / e


def vortex_panel_psi_coeffs(z, za, zb):
    """Stream-function influence of the same panel; continuous across it."""
    zl, _, L = _local(z, za, zb)
    at0 = np.abs(zl) <= 1e-300
    atL = np.abs(zl - L) <= 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = np.where(at0, 0.0, np.log(np.where(at0, 1.0, zl)))
        lzl = np.where(atL, 0.0, np.log(np.where(atL, 1.0, zl - L)))
    j0 = zl * lz - (zl - L) * lzl - L
    j1 = (L**2 / 2.0 * lzl - L**2 / 4.0 - zl * L / 2.0
          + zl**2 / 2.0 * (lz - lzl))
    ca = -np.real(j0 - j1 / L) / TWO_PI
    cb = -np.real(j1 / L) / TWO_PI
    return ca, cb


def vortex_panel_W_coeffs(z, za, zb):
    """Complex-potential influence, defined up to a per-panel real
    constant; principal branches in the panel frame (cuts run backward
    along each panel line)."""
    zl, _, L = _local(z, za, zb)
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = np.log(zl)
        lzl = np.log(zl - L)
    j0 = zl * lz - (zl - L) * lzl - L
    j1 = (L**2 / 2.0 * lzl - L**2 / 4.0 - zl * L / 2.0
          + zl**2 / 2.0 * (lz - lzl))
    ca = (j0 - j1 / L) / (TWO_PI * 1j)
    cb = (j1 / L) / (TWO_PI * 1j)
    return ca, cb


def _cosine_nodes(n: int, blend: float = 1.0) -> np.ndarray:
    """n+1 nodes on [0, 1], cosine-clustered toward both ends."""
    u = np.arange(n + 1) / n
    c = 0.5 * (1.0 - np.cos(np.pi * u))
    return (1.0 - blend) * u + blend * c


def body_panel_nodes(body: Body, n_panels: int, cluster: float = 1.0):
    """Panel node layout: (nodes, closed flag).

    Circles get a regular inscribed n-gon; polygons get cosine-clustered
    panels on each side (count proportional to side length, minimum 8);
    plates get a single cosine-clustered run of chordwise panels.
    """
    if isinstance(body, Circle):
        th = TWO_PI * np.arange(n_panels) / n_panels
        return body.radius * np.exp(1j * th), True
    if isinstance(body, FlatPlate):
        t = _cosine_nodes(n_panels, cluster)
        return body.leading_edge + t * (body.trailing_edge - body.leading_edge), False
    if isinstance(body, Polygon):
        v = body.vertex_array
        lens = np.abs(np.roll(v, -1) - v)
        share = lens / lens.sum()
        counts = np.maximum(8, np.round(share * n_panels).astype(int))
        nodes = []
        for a, b, m in zip(v, np.roll(v, -1), counts):
            t = _cosine_nodes(int(m), cluster)[:-1]  # vertex of next side closes
            nodes.append(a + t * (b - a))
        return np.concatenate(nodes), True
    raise InvalidGeometryError(f"cannot panel body of kind {body.kind}")


@dataclass(frozen=True, eq=False)
class PanelFlow:
    """Evaluable flow induced by nodal vortex strengths plus free stream."""

    body: Body
    far: FarField
    nodes: np.ndarray
    gamma: np.ndarray
    closed: bool

    branch_cut = "panel-frame principal branches (cuts trail each panel line)"

    def _panels(self):
        if self.closed:
            return self.nodes, np.roll(self.nodes, -1)
        return self.nodes[:-1], self.nodes[1:]

    def _node_pair(self, j):
        n = len(self.gamma)
        return j % n, (j + 1) % n if self.closed else j + 1

    def _accumulate(self, z, coeff_fn, out_dtype):
        z = np.asarray(z, dtype=complex)
        za, zb = self._panels()
        acc = np.zeros(z.shape, dtype=out_dtype)
        for j in range(len(za)):
            ia, ib = self._node_pair(j)
            ca, cb = coeff_fn(z, za[j], zb[j])
            acc = acc + ca * self.gamma[ia] + cb * self.gamma[ib]
        return acc

    def _check(self, z):
        z = np.asarray(z, dtype=complex)
        if isinstance(self.body, FlatPlate):
            if np.any(self.body.on_slit(z)):
                raise FluidDomainError("point on the plate slit")
        elif np.any(self.body.contains(z)):
            raise FluidDomainError("point inside the body")
        return z

    def velocity(self, z):
        z = self._check(z)
        return self.far.w_inf + self._accumulate(z, vortex_panel_w_coeffs, complex)

    def stream(self, z):
        z = self._check(z)
        return (np.imag(self.far.w_inf * z)
                + self._accumulate(z, vortex_panel_psi_coeffs, float)
                - self._psi_body)

    def potential(self, z):
        z = self._check(z)
        return (self.far.w_inf * z
                + self._accumulate(z, vortex_panel_W_coeffs, complex)
                - self._psi_body * 1j)

    @cached_property
    def _psi_body(self) -> float:
        # stream-function level on the body (slip normalization psi = 0)
        za, zb = self._panels()
        mid = 0.5 * (za[0] + zb[0])
        val = np.imag(self.far.w_inf * mid) + float(
            self._accumulate(np.array([mid]), vortex_panel_psi_coeffs, float)[0])
        return val


@dataclass(frozen=True)
class PanelSolution:
    """Solved vortex-sheet strengths with solver diagnostics."""

    flow: PanelFlow
    residual_norm: float
    condition_number: float
    tangency_rows: int
    collocation_points: np.ndarray = field(repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.flow.nodes

    @property
    def gamma(self) -> np.ndarray:
        return self.flow.gamma

    def circulation_of_strengths(self) -> float:
        za, zb = self.flow._panels()
        lens = np.abs(zb - za)
        g = self.flow.gamma
        n = len(g)
        total = 0.0
        for j in range(len(za)):
            ia = j % n
            ib = (j + 1) % n if self.flow.closed else j + 1
            total += lens[j] * 0.5 * (g[ia] + g[ib])
        return float(total)

    def max_collocation_residual(self) -> float:
        """No-penetration residual at the collocation points, in the
        scheme's own sense: mean normal velocity between neighbouring
        midpoints for closed bodies, pointwise normal velocity for the
        open plate."""
        return self.residual_norm


def panel_solve(body: Body, far: FarField, n_panels: int = 256,
                cluster: float = 1.0, lstsq_fallback: bool = True,
                tol_slip: float = 1e-8) -> PanelSolution:
    """Solve for linear-strength vortex panels around a body.

    One tangency condition (v . n = 0) per panel midpoint plus the
    explicit circulation row sum(L_j * (g_j + g_{j+1}) / 2) = Gamma.
    Closed bodies have one nodal unknown per panel, so one tangency
    equation is dropped in favour of the circulation row; the dropped
    condition is implied by the others and is checked to hold within
    tol_slip * |w_inf| after the solve.  Open plates keep every row
    (one more node than panels).
    """
    if isinstance(body, Polygon) and n_panels < 8 * len(body.vertices):
        raise InvalidGeometryError("need at least 8 panels per side")
    nodes, closed = body_panel_nodes(body, n_panels, cluster)
    if closed:
        za, zb = nodes, np.roll(nodes, -1)
    else:
        za, zb = nodes[:-1], nodes[1:]
    lens = np.abs(zb - za)
    if np.any(lens < 1e-14 * np.max(lens)):
        raise SolverError("degenerate panel layout (duplicate nodes)")
    mids = 0.5 * (za + zb)
    normal = 1j * (zb - za) / lens
    n_nodes = len(nodes)
    n_pan = len(za)

    A = np.zeros((n_pan, n_nodes))
    for j in range(n_pan):
        ca, cb = vortex_panel_w_coeffs(mids, za[j], zb[j])
        A[:, j] += np.real(ca * normal)
        A[:, (j + 1) % n_nodes] += np.real(cb * normal)
    b = -np.real(far.w_inf * normal)

    circ_row = np.zeros(n_nodes)
    for j in range(n_pan):
        ia = j % n_nodes
        ib = (j + 1) % n_nodes if closed else j + 1
        circ_row[ia] += 0.5 * lens[j]
        circ_row[ib] += 0.5 * lens[j]

    M = np.empty((n_nodes, n_nodes))
    rhs = np.empty(n_nodes)
    if closed:
        M[:-1], rhs[:-1] = A[:-1], b[:-1]
    else:
        M[:-1], rhs[:-1] = A, b
    M[-1] = circ_row
    rhs[-1] = far.circulation

    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > 1e13:
        if not lstsq_fallback:
            raise SolverError("singular influence matrix", condition_number=cond)
        g, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    else:
        g = np.linalg.solve(M, rhs)
    # all tangency rows, including the dropped one, and the circulation row
    residual = float(max(np.max(np.abs(A @ g - b)),
                         abs(circ_row @ g - far.circulation)))
    if residual > tol_slip * max(abs(far.w_inf), 1e-300):
        raise SolverError(
            f"tangency residual {residual} exceeds tol_slip", condition_number=cond)

    flow = PanelFlow(body=body, far=far, nodes=nodes, gamma=g, closed=closed)
    return PanelSolution(flow=flow, residual_norm=residual,
                         condition_number=cond, tangency_rows=n_pan,
                         collocation_points=mids)


# ---------------------------------------------------------------------------
# Kutta condition


@dataclass(frozen=True)
class KuttaResult:
    gamma_star: float
    corner_id: int
    a1_at_zero: float
    a1_slope: float
    uncertainty: float
    n_panels: int


def kutta_solve(body: Body, w_inf: complex, corner_id: int,
                n_panels: int = 512, radii=None, samples: int = 33,
                flow_factory=None, refine: bool = False) -> KuttaResult:
    """Circulation making the designated corner regular (a1 = 0).

    The singular coefficient depends affinely on Gamma (superposition),
    so two solves at Gamma = 0 and Gamma = 1 determine the root exactly;
    the corner fit supplies a1 and its uncertainty.
    """
    corners = body.corners
    if not 0 <= corner_id < len(corners):
        raise InvalidGeometryError(f"no corner {corner_id}")
    corner = corners[corner_id]
    if not corner.protruding:
        raise InvalidGeometryError("Kutta condition applies to protruding corners")

    def run(n):
        if flow_factory is not None:
            factory = flow_factory
        else:
            def factory(gam):
                return panel_solve(body, FarField(w_inf, gam), n).flow
        rep0 = analysis.fit_corner(factory(0.0), corner, radii=radii,
                                   samples_per_radius=samples)
        rep1 = analysis.fit_corner(factory(1.0), corner, radii=radii,
                                   samples_per_radius=samples)
        a0, a1 = rep0.a1_estimate, rep1.a1_estimate
        slope = a1 - a0
        scale = abs(w_inf) * _length_scale(body) ** (1.0 - np.pi / corner.exterior_angle_beta)
        if abs(slope) < 1e-12 * max(scale, 1e-300):
            raise DegenerateKuttaError(
                f"a1 at corner {corner_id} does not respond to circulation")
        gamma_star = -a0 / slope
        sig0, sig1 = rep0.a1_uncertainty, rep1.a1_uncertainty
        unc = float(np.hypot(sig0 * a1, sig1 * a0) / slope**2)
        return KuttaResult(float(gamma_star), corner_id, float(a0),
                           float(slope), unc, n)

    result = run(n_panels)
    doublings = 0
    while refine and doublings < 4:
        finer = run(result.n_panels * 2)
        doublings += 1
        ref_scale = abs(finer.gamma_star) + 1e-3 * abs(w_inf) * _length_scale(body)
        if abs(finer.gamma_star - result.gamma_star) < 1e-3 * ref_scale:
            return finer
        result = finer
    return result


def _length_scale(body: Body) -> float:
    return body.circumradius
