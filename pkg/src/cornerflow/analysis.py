"""Corner-singularity fits, contour integrals, far-field fits, censuses.

Near a corner of fluid-side angle beta the stream function expands as

    psi = sum_k a_k r**(k*pi/beta) * sin(k*pi*theta/beta)

in wall-aligned polar coordinates, so the velocity carries the exponent
pi/beta - 1 of the leading mode: negative (unbounded) at protruding
corners unless a_1 = 0.  The k = 1 mode is one-signed across the wedge;
every higher mode changes sign, which is why a regular corner with a
nonzero local field must see both signs of psi.

Contour integrals use the identity  oint w dz = Gamma + i * (mass flux),
so circulation and flux share one quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import FitQualityError, FluidDomainError
from .geometry import Body, Contour, Corner, probe_ring

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# contour integrals


def _complex_contour_integral(flow, contour: Contour, refine_check=False):
    if flow.body is not None and not contour.clears_body(flow.body):
        raise FluidDomainError("contour intersects the body")
    z, dz = contour.quadrature()
    val = np.sum(flow.velocity(z) * dz)
    if not refine_check:
        return val, None
    z2, dz2 = contour.refined().quadrature()
    val2 = np.sum(flow.velocity(z2) * dz2)
    return val2, abs(val2 - val)


def circulation(flow, contour: Contour) -> float:
    """Counterclockwise circulation oint v . dx = Re oint w dz."""
    val, _ = _complex_contour_integral(flow, contour)
    return float(np.real(val))


def mass_flux(flow, contour: Contour) -> float:
    """Net outward volume flux oint v . n ds = Im oint w dz; zero for any
    closed fluid contour around the body (conservation of mass)."""
    val, _ = _complex_contour_integral(flow, contour)
    return float(np.imag(val))


def potential_increment(flow, contour: Contour) -> complex:
    """Increment of W along one counterclockwise loop (oint w dz);
    detects the multivaluedness Gamma of the potential."""
    val, _ = _complex_contour_integral(flow, contour)
    return complex(val)


# ---------------------------------------------------------------------------
# corner fits


@dataclass(frozen=True)
class CornerReport:
    """Fitted singular behaviour at one corner."""

    corner_id: int
    beta: float
    a1_estimate: float
    a1_uncertainty: float
    higher_modes: tuple
    fitted_exponent: float
    singular: bool
    sign_attainment: str
    fit_condition: float
    fit_residual: float

    @property
    def singular_exponent(self) -> float:
        """Velocity exponent pi/beta - 1 of the leading mode."""
        return np.pi / self.beta - 1.0


def default_fit_radii(corner: Corner, body_scale: float) -> np.ndarray:
    """Geometric ladder of probe radii spanning a decade, kept inside the
    corner clearance."""
    r_hi = min(0.25 * body_scale, 0.5 * corner.clearance)
    return np.geomspace(0.025 * r_hi / 0.25, r_hi, 6)


def _flow_scale(flow, body_scale: float, beta: float) -> float:
    """Natural magnitude of a1 for this flow/body: |w_inf| * R**(1-pi/beta)."""
    w = abs(getattr(flow.far, "w_inf", 1.0)) or 1.0
    return w * body_scale ** (1.0 - np.pi / beta)


def fit_corner(flow, corner: Corner, radii=None, samples_per_radius: int = 33,
               n_modes: int = 4, tol_a1: float = 1e-3,
               sign_tol: float | None = None, exponent_radii=None) -> CornerReport:
    """Least-squares fit of psi to the corner expansion.

    Reports the leading coefficient a1 with its covariance-based
    uncertainty, plus an independent exponent estimate from the log-log
    slope of the per-ring maximum speed on a deeper ring ladder (local
    slopes extrapolated to r = 0 against the known next-mode gap
    r**(pi/beta)).  ``singular`` means |a1| exceeds tol_a1 times the
    scale-invariant magnitude |w_inf|*R**(1-pi/beta).
    """
    body_scale = flow.body.circumradius if flow.body is not None else 1.0
    if radii is None:
        radii = default_fit_radii(corner, body_scale)
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3 or radii.max() / radii.min() < 9.99:
        raise FitQualityError("need >= 3 radii spanning a decade")
    beta = corner.exterior_angle_beta
    pts = probe_ring(corner, radii, samples_per_radius)
    r, theta = corner.local_polar(pts)
    psi = np.asarray(flow.stream(pts), dtype=float)

    k = np.arange(1, n_modes + 1)
    r_ref = radii.max()
    # columns scaled by r_ref**(k pi/beta) for conditioning
    design = ((r[..., None] / r_ref) ** (k * np.pi / beta)
              * np.sin(k * np.pi * theta[..., None] / beta))
    X = design.reshape(-1, n_modes)
    y = psi.ravel()
    cond = float(np.linalg.cond(X))
    if cond > 1e8:
        raise FitQualityError(f"corner fit ill-conditioned (cond={cond:.3g})")
    coef_scaled, rss, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_modes:
        raise FitQualityError("rank-deficient corner fit")
    dof = max(X.shape[0] - n_modes, 1)
    rss_val = float(rss[0]) if np.size(rss) else float(np.sum((X @ coef_scaled - y) ** 2))
    sigma2 = rss_val / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    coef = coef_scaled / r_ref ** (k * np.pi / beta)
    a1_sigma = float(np.sqrt(cov[0, 0])) / r_ref ** (np.pi / beta)

    slope = _exponent_slope(flow, corner, exponent_radii, samples_per_radius,
                            body_scale)

    scale = _flow_scale(flow, body_scale, beta)
    singular = bool(abs(coef[0]) > tol_a1 * scale)
    verdict = sign_attainment(flow, corner, radii.min(), max(64, samples_per_radius),
                              tol=sign_tol)
    return CornerReport(
        corner_id=corner.corner_id, beta=float(beta),
        a1_estimate=float(coef[0]), a1_uncertainty=a1_sigma,
        higher_modes=tuple(float(c) for c in coef[1:]),
        fitted_exponent=float(slope), singular=singular,
        sign_attainment=verdict, fit_condition=cond,
        fit_residual=float(np.sqrt(sigma2)),
    )


def _exponent_slope(flow, corner: Corner, radii, samples: int,
                    body_scale: float) -> float:
    """Velocity exponent from per-ring max speeds, with the local log-log
    slope extrapolated to the corner against the next-mode gap
    r**(pi/beta) (the mode ladder is spaced by pi/beta in the exponent)."""
    beta = corner.exterior_angle_beta
    if radii is None:
        r_hi = min(0.02 * body_scale, 0.4 * corner.clearance)
        radii = np.geomspace(0.1 * r_hi, r_hi, 6)
    radii = np.asarray(radii, dtype=float)
    pts = probe_ring(corner, radii, samples)
    speeds = np.maximum(np.max(np.abs(np.asarray(flow.velocity(pts))), axis=1),
                        1e-300)
    local = np.diff(np.log(speeds)) / np.diff(np.log(radii))
    x = np.sqrt(radii[:-1] * radii[1:]) ** (np.pi / beta)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, local, rcond=None)
    return float(coef[0])


def sign_attainment(flow, corner: Corner, radius: float, samples: int = 64,
                    n_radii: int = 3, shrink: float = 2.0,
                    tol: float | None = None) -> str:
    """Do psi's signs both appear arbitrarily close to the corner?

    Samples the wedge at ``n_radii`` shrinking radii; "both" requires a
    clear positive and negative value at every radius.  The k = 1 mode
    alone is one-signed over the wedge, so a corner dominated by it
    reports positive_only/negative_only; a regular corner with nonzero
    local field reports both.
    """
    body_scale = flow.body.circumradius if flow.body is not None else 1.0
    w_scale = abs(getattr(flow.far, "w_inf", 1.0)) or 1.0
    radii = radius / shrink ** np.arange(n_radii)
    verdicts = []
    for r in radii:
        if tol is None:
            # noise floor shrinks with the leading admissible mode
            level = 1e-9 * w_scale * body_scale * (r / body_scale) ** (
                np.pi / corner.exterior_angle_beta)
        else:
            level = tol
        pts = probe_ring(corner, [r], samples)
        psi = np.asarray(flow.stream(pts), dtype=float).ravel()
        has_pos = bool(np.max(psi) > level)
        has_neg = bool(np.min(psi) < -level)
        if has_pos and has_neg:
            verdicts.append("both")
        elif has_pos:
            verdicts.append("positive_only")
        elif has_neg:
            verdicts.append("negative_only")
        else:
            verdicts.append("indeterminate")
    first = verdicts[0]
    if all(v == first for v in verdicts):
        return first
    if all(v in ("both", "positive_only") for v in verdicts) and "both" in verdicts:
        return "indeterminate"
    return "indeterminate"


# ---------------------------------------------------------------------------
# far field


@dataclass(frozen=True)
class LaurentFit:
    """Leading far-field Laurent coefficients of w."""

    c0: complex
    c1: complex
    c2: complex
    residual: float

    @property
    def gamma_estimate(self) -> float:
        # c1 = Gamma / (2 pi i)
        return float(-TWO_PI * np.imag(self.c1))

    @property
    def re_c1(self) -> float:
        """Mass-flux indicator; zero for a valid flow around a closed body."""
        return float(np.real(self.c1))


def farfield_fit(flow, r_list=None, samples: int = 64,
                 residual_tol: float = 1e-3) -> LaurentFit:
    """Least squares of w against {1, 1/z, 1/z^2} on far circles."""
    body_scale = flow.body.circumradius if flow.body is not None else 1.0
    if r_list is None:
        r_list = body_scale * np.array([10.0, 20.0, 40.0])
    r_list = np.asarray(r_list, dtype=float)
    if np.any(r_list < 4.0 * body_scale):
        raise FluidDomainError("far-field radii must exceed 4 circumradii")
    th = TWO_PI * np.arange(samples) / samples
    z = (r_list[:, None] * np.exp(1j * th)[None, :]).ravel()
    w = np.asarray(flow.velocity(z)).ravel()
    X = np.stack([np.ones_like(z), 1.0 / z, 1.0 / z**2], axis=1)
    coef, *_ = np.linalg.lstsq(X, w, rcond=None)
    resid = float(np.max(np.abs(X @ coef - w)))
    w_scale = abs(getattr(flow.far, "w_inf", 1.0)) or 1.0
    if resid > residual_tol * w_scale:
        raise FitQualityError(
            f"far-field fit residual {resid:.3g} too large; radii too small?")
    return LaurentFit(c0=complex(coef[0]), c1=complex(coef[1]),
                      c2=complex(coef[2]), residual=resid)


# ---------------------------------------------------------------------------
# corner census over circulation


@dataclass(frozen=True)
class CornerCensusEntry:
    corner_id: int
    root: float
    slope: float
    a1_at_zero: float
    root_uncertainty: float


@dataclass(frozen=True)
class CensusResult:
    """Exact affine-root census of corner regularity over circulation.

    ``a1`` of every corner is affine in Gamma, so corner i is regular only
    at Gamma = root_i; distinct roots mean no circulation regularizes two
    corners at once, hence at least n-1 of n corners stay singular at
    every Gamma.  A swept grid provides a redundancy check at finite
    fit tolerance.
    """

    corners: tuple
    sweep_gammas: tuple
    sweep_singular_ids: tuple
    min_singular_count: int
    regularizes_all_somewhere: bool
    coincident_pairs: tuple

    def singular_ids_at(self, gamma: float, tol_scale: float) -> list[int]:
        out = []
        for entry in self.corners:
            a1 = entry.a1_at_zero + entry.slope * gamma
            if abs(a1) > tol_scale:
                out.append(entry.corner_id)
        return out


def corner_census(body: Body, w_inf: complex, gamma_grid=None,
                  n_panels: int = 256, tol_a1: float = 1e-3,
                  coincidence_tol: float | None = None) -> CensusResult:
    """Affine a1(Gamma) census over all protruding corners of a polygon.

    Two panel solves (Gamma = 0, 1) fix every corner's affine form
    exactly; the census then reads off roots and sweeps a 33-point grid
    spanning all roots with margin as a redundancy check.
    """
    from .incompressible import FarField, panel_solve  # deferred: avoids cycle

    corners = [c for c in body.corners if c.protruding]
    if len(corners) < 2:
        raise FluidDomainError("census needs at least two protruding corners")
    flow0 = panel_solve(body, FarField(w_inf, 0.0), n_panels).flow
    flow1 = panel_solve(body, FarField(w_inf, 1.0), n_panels).flow

    entries = []
    for c in corners:
        rep0 = fit_corner(flow0, c, tol_a1=tol_a1)
        rep1 = fit_corner(flow1, c, tol_a1=tol_a1)
        slope = rep1.a1_estimate - rep0.a1_estimate
        if slope == 0.0:
            root, unc = np.inf, np.inf
        else:
            root = -rep0.a1_estimate / slope
            unc = float(np.hypot(rep0.a1_uncertainty * rep1.a1_estimate,
                                 rep1.a1_uncertainty * rep0.a1_estimate)
                        / slope**2)
        entries.append(CornerCensusEntry(
            corner_id=c.corner_id, root=float(root), slope=float(slope),
            a1_at_zero=float(rep0.a1_estimate), root_uncertainty=unc))

    roots = np.array([e.root for e in entries])
    scale = abs(w_inf) * body.circumradius
    if coincidence_tol is None:
        coincidence_tol = 1e-3 * scale
    coincident = []
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            if abs(roots[i] - roots[j]) < coincidence_tol:
                coincident.append((entries[i].corner_id, entries[j].corner_id))

    if gamma_grid is None:
        lo, hi = roots.min(), roots.max()
        margin = max(0.25 * (hi - lo), 0.1 * scale)
        gamma_grid = np.linspace(lo - margin, hi + margin, 33)
    gamma_grid = np.asarray(gamma_grid, dtype=float)

    beta_scales = {
        e.corner_id: tol_a1 * _flow_scale(
            flow0, body.circumradius,
            next(c.exterior_angle_beta for c in corners if c.corner_id == e.corner_id))
        for e in entries
    }
    sweep = []
    for gam in gamma_grid:
        ids = []
        for e in entries:
            a1 = e.a1_at_zero + e.slope * gam
            if abs(a1) > beta_scales[e.corner_id]:
                ids.append(e.corner_id)
        sweep.append(tuple(ids))
    min_count = min(len(ids) for ids in sweep)
    # exact affine verdict: is there any Gamma where every |a1| is small?
    # distinct roots => impossible; coincident roots are reported, not claimed
    regular_everywhere = bool(
        len(entries) >= 2
        and np.all(np.abs(roots - roots[0]) < coincidence_tol))
    return CensusResult(
        corners=tuple(entries), sweep_gammas=tuple(float(g) for g in gamma_grid),
        sweep_singular_ids=tuple(sweep), min_singular_count=int(min_count),
        regularizes_all_somewhere=regular_everywhere,
        coincident_pairs=tuple(coincident))


# ---------------------------------------------------------------------------
# sign-component census


@dataclass(frozen=True)
class SignComponentCensus:
    bounded_positive: int
    bounded_negative: int
    inconclusive: bool
    grid_shape: tuple


def sign_component_census(flow, window, resolution: int = 400,
                          tol: float | None = None) -> SignComponentCensus:
    """Count bounded connected components of {psi > 0} and {psi < 0}.

    Flood fill over a rectilinear window around the body; components not
    touching the window edge count as bounded.  Cells with |psi| below
    the noise floor stay unsigned so the psi = 0 streamline cannot leak
    spurious components.  Both counts are zero for a valid flow (the sign
    sets are unbounded and connected, by the maximum principle).
    """
    (x0, x1), (y0, y1) = window
    body = flow.body
    if tol is None:
        w_scale = abs(getattr(flow.far, "w_inf", 1.0)) or 1.0
        tol = 1e-6 * w_scale * body.circumradius
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    Z = xs[None, :] + 1j * ys[:, None]
    near_body = np.abs(Z - body.centroid) <= 1.2 * body.circumradius + 0.05 * (x1 - x0)
    mask_body = np.zeros(Z.shape, dtype=bool)
    if np.any(near_body):
        mask_body[near_body] = _near_body_mask(body, Z[near_body],
                                               pad=1.5 * (x1 - x0) / resolution)
    psi = np.full(Z.shape, np.nan)
    fluid = ~mask_body
    psi[fluid] = flow.stream(Z[fluid])

    counts = {}
    for sign in (+1, -1):
        cells = fluid & (sign * psi > tol)
        labels, n = ndimage.label(cells)
        edge = np.unique(np.concatenate([
            labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]))
        bounded = [k for k in range(1, n + 1) if k not in edge]
        counts[sign] = len(bounded)

    # resolution check: corner lobes need a few cells between sign changes
    cell = (x1 - x0) / resolution
    inconclusive = cell > 0.02 * body.circumradius
    return SignComponentCensus(bounded_positive=counts[+1],
                               bounded_negative=counts[-1],
                               inconclusive=bool(inconclusive),
                               grid_shape=Z.shape)


def _near_body_mask(body: Body, z, pad: float):
    from .geometry import FlatPlate
    if isinstance(body, FlatPlate):
        zl = (np.asarray(z, dtype=complex)) / body.direction
        return (np.abs(zl.imag) <= pad) & (np.abs(zl.real) <= 0.5 * body.chord + pad)
    inside = body.contains(z)
    bnd = body.boundary(256)
    dmin = np.min(np.abs(np.asarray(z, dtype=complex)[..., None] - bnd[None, :]), axis=-1)
    return inside | (dmin <= pad)
