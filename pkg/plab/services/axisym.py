"""Swirl-free axisymmetric fields: realization, structure checks, Biot-Savart and division by r."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..errors import AxisymmetryError, DivergenceError, GridError, SupportError
from ..models import AxisymProfile, Component, Grid, PartitionOfUnity, SpectralField, VectorField
from . import spectral_core as sc

logger = logging.getLogger(__name__)

QUADRATURE_NODES = 8
ROTATION_ANGLE = 0.7
DIVERGENCE_TOLERANCE = 1e-8
# largest relative non-angular part tolerated before dividing by r
STRUCTURE_GUARD = 1e-4


def _in_plane(grid: Grid):
    x1, x2 = grid.mesh[0], grid.mesh[1]
    return x1, x2, np.hypot(x1, x2)


def radial_component(v: VectorField) -> np.ndarray:
    x1, x2, r = _in_plane(v.grid)
    return (x1 * v[0].samples + x2 * v[1].samples) / r


def angular_component(v: VectorField) -> np.ndarray:
    x1, x2, r = _in_plane(v.grid)
    return (x1 * v[1].samples - x2 * v[0].samples) / r


def axial_component(v: VectorField) -> np.ndarray:
    return np.asarray(v[2].samples)


def realize(profile: AxisymProfile, grid: Grid) -> VectorField:
    if grid.dim != 3:
        raise GridError(f"axisymmetric fields need a 3-d grid, got dim={grid.dim}")
    if profile.support_radius > grid.box_length / 4:
        raise SupportError(
            f"profile {profile.name!r} support radius {profile.support_radius:.4g} does not fit "
            f"the central half-box (radius {grid.box_length / 4:.4g})"
        )
    z_axis = grid.axis
    on_axis = np.abs(profile.u_r(np.zeros_like(z_axis), z_axis))
    if np.max(on_axis) > 1e-12 * max(1.0, float(np.max(np.abs(profile.u_z(np.zeros_like(z_axis), z_axis))))):
        raise AxisymmetryError(f"profile {profile.name!r} has u_r != 0 on the axis")
    x1, x2, r = _in_plane(grid)
    z = grid.mesh[2]
    ur = profile.u_r(r, z)
    uz = profile.u_z(r, z)
    logger.debug("realized %s on n=%d", profile.name, grid.n)
    return VectorField.from_arrays(grid, (ur * x1 / r, ur * x2 / r, uz))


def default_sample_points() -> np.ndarray:
    """(radius, angle, z) triples used for rotation checks."""
    radii = (0.3, 0.7, 1.1, 1.5)
    angles = (0.3, 1.1, 2.0)
    heights = (-0.6, 0.0, 0.4)
    return np.array([(r, a, z) for r in radii for a in angles for z in heights])


def _plane_points(axis: int) -> np.ndarray:
    """Points on the plane x_{axis} = 0, used for the odd-component checks."""
    pts = []
    for s in (-1.0, -0.4, 0.4, 1.0):
        for z in (-0.5, 0.3):
            p = [0.0, 0.0, z]
            p[1 - axis] = s
            pts.append(p)
    return np.array(pts)


def _cartesian(points: np.ndarray, shift: float = 0.0) -> np.ndarray:
    r, a, z = points[:, 0], points[:, 1] + shift, points[:, 2]
    return np.column_stack((r * np.cos(a), r * np.sin(a), z))


def rotation_invariance(v: VectorField, points: np.ndarray | None = None, angle: float = ROTATION_ANGLE) -> float:
    """Max gap of (v_r, v_z) between sample points and their rotations about the z axis."""
    points = default_sample_points() if points is None else points
    out = 0.0
    for shift in (0.0, angle):
        pts = _cartesian(points, shift)
        a = points[:, 1] + shift
        v1, v2, v3 = (sc.evaluate_at(c, pts) for c in v)
        vr = v1 * np.cos(a) + v2 * np.sin(a)
        if shift == 0.0:
            base_r, base_z = vr, v3
        else:
            out = float(np.max(np.abs(vr - base_r) + np.abs(v3 - base_z)))
    return out


def quarter_turn(a: np.ndarray) -> np.ndarray:
    """Samples of a at R x, R the rotation by pi/2 about the z axis; R maps the cell-centred grid onto itself."""
    return a.transpose(1, 0, 2)[:, ::-1, :]


def quarter_turn_gap(v: VectorField) -> float:
    """Max of |v(R x) - R v(x)| over the grid."""
    v1, v2, v3 = (c.samples for c in v)
    return float(max(
        np.max(np.abs(quarter_turn(v1) + v2)),
        np.max(np.abs(quarter_turn(v2) - v1)),
        np.max(np.abs(quarter_turn(v3) - v3)),
    ))


def _odd_gap(a: np.ndarray, axis: int) -> float:
    return float(np.max(np.abs(a + np.flip(a, axis))))


@dataclass
class AxisymmetryReport:
    """Violations of the swirl-free axisymmetric structure.

    ``blocks`` holds, per q, the worst relative violation among the block
    checks that are exact on the periodic lattice: odd parity of the block
    and of its curl, quarter-turn invariance and omega^3 = 0. ``block_leaks``
    holds the angular part of each block and the radial part of its curl.
    Those are zero on R^3 but not on the torus, where the tails of the block
    kernels pick up the periodic images.
    """

    v_sup: float
    omega_sup: float
    violations: dict[str, float] = field(default_factory=dict)
    blocks: dict[int, float] = field(default_factory=dict)
    block_leaks: dict[int, float] = field(default_factory=dict)

    _OMEGA_KEYS = ("omega3", "omega_radial", "omega1_plane", "omega2_plane")

    def relative(self, name: str) -> float:
        scale = self.omega_sup if name in self._OMEGA_KEYS else self.v_sup
        value = self.violations[name]
        return value / scale if scale > 0 else value

    def max_relative(self) -> float:
        vals = [self.relative(k) for k in self.violations]
        vals.extend(self.blocks.values())
        return max(vals) if vals else 0.0

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_relative() <= tol


def _plane_checks(v: VectorField) -> tuple[float, float]:
    return (
        float(np.max(np.abs(sc.evaluate_at(v[0], _plane_points(0))))),
        float(np.max(np.abs(sc.evaluate_at(v[1], _plane_points(1))))),
    )


def check_axisymmetry(v: VectorField, pu: PartitionOfUnity | None = None, *, blocks: bool = True,
                      curl: bool = True, points: np.ndarray | None = None) -> AxisymmetryReport:
    """Measure how far v is from a swirl-free axisymmetric field."""
    if v.grid.dim != 3:
        raise GridError("axisymmetry checks need a 3-d grid")
    report = AxisymmetryReport(v_sup=v.max_abs(), omega_sup=0.0)
    viol = report.violations
    viol["angular"] = float(np.max(np.abs(angular_component(v))))
    viol["rotation"] = rotation_invariance(v, points)
    viol["v1_plane"], viol["v2_plane"] = _plane_checks(v)
    if curl:
        w = sc.curl(v)
        report.omega_sup = w.max_abs()
        viol["omega3"] = w[2].max_abs()
        viol["omega_radial"] = float(np.max(np.abs(radial_component(w))))
        # omega is odd where u is even: omega^1 vanishes on x2 = 0, omega^2 on x1 = 0
        viol["omega1_plane"] = float(np.max(np.abs(sc.evaluate_at(w[0], _plane_points(1)))))
        viol["omega2_plane"] = float(np.max(np.abs(sc.evaluate_at(w[1], _plane_points(0)))))
    if blocks and report.v_sup > 0:
        for q, b in sc.decompose_vector(v, pu or sc.build_partition()).items():
            report.blocks[q], report.block_leaks[q] = _block_checks(b, report, curl)
    return report


def _block_checks(b: VectorField, report: AxisymmetryReport, curl: bool) -> tuple[float, float]:
    v_scale = report.v_sup
    exact = [
        _odd_gap(b[0].samples, 0) / v_scale,
        _odd_gap(b[1].samples, 1) / v_scale,
        quarter_turn_gap(b) / v_scale,
    ]
    leaks = [float(np.max(np.abs(angular_component(b)))) / v_scale]
    if curl and report.omega_sup > 0:
        w = sc.curl(b)
        w_scale = report.omega_sup
        exact += [
            w[2].max_abs() / w_scale,
            _odd_gap(w[0].samples, 1) / w_scale,
            _odd_gap(w[1].samples, 0) / w_scale,
        ]
        leaks.append(float(np.max(np.abs(radial_component(w)))) / w_scale)
    return max(exact), max(leaks)


def biot_savart(omega: VectorField, validate: bool = True) -> VectorField:
    """Mean-free divergence-free u with curl u = omega."""
    grid = omega.grid
    if grid.dim != 3:
        raise GridError("Biot-Savart needs a 3-d grid")
    if validate:
        sup = omega.max_abs()
        mean = max(abs(c.mean()) for c in omega)
        if mean > sc.MEAN_TOLERANCE * max(sup, np.finfo(float).tiny):
            raise DivergenceError(f"vorticity must have zero mean, measured {mean:.3e}")
        viol = sc.divergence_violation(omega)
        if viol > DIVERGENCE_TOLERANCE:
            raise DivergenceError(
                f"vorticity must be divergence-free, sup|div| / sup = {viol:.3e} > {DIVERGENCE_TOLERANCE:g}"
            )
    k1, k2, k3 = grid.derivative_wavevector
    k2sum = np.broadcast_to(k1 ** 2 + k2 ** 2 + k3 ** 2, grid.spectral_shape)
    inv = np.divide(1.0, k2sum, out=np.zeros(grid.spectral_shape), where=k2sum > 0)
    a1, a2, a3 = (c.coefficients for c in omega)
    comps = (
        1j * (k2 * a3 - k3 * a2) * inv,
        1j * (k3 * a1 - k1 * a3) * inv,
        1j * (k1 * a2 - k2 * a1) * inv,
    )
    return VectorField(tuple(SpectralField.from_coefficients(grid, c) for c in comps), divergence_free=True)


def _check_structure(v: VectorField, component: Component, tol: float):
    sup = v.max_abs()
    if sup == 0:
        return
    if component is Component.THETA:
        leak = max(float(np.max(np.abs(radial_component(v)))), v[2].max_abs())
        what = "radial/axial part of an angular field"
    else:
        leak = float(np.max(np.abs(angular_component(v))))
        what = "angular part of a swirl-free field"
    if leak > tol * sup:
        raise AxisymmetryError(f"{what} is {leak / sup:.3e} x sup, above {tol:g}; division by r would be singular")


def quotient_by_r(v: VectorField, component: str | Component = Component.THETA, tol: float = STRUCTURE_GUARD,
                  validate: bool = True) -> SpectralField:
    """(e . v) / r for e = e_theta or e_r, regular across the axis.

    Cells within two grid spacings of the axis use
    (e . v)/r = int_0^1 e . (cos t d1 v + sin t d2 v)(s x1, s x2, z) ds
    with Gauss-Legendre nodes in s.
    """
    component = Component(component)
    grid = v.grid
    if grid.dim != 3:
        raise GridError("quotient_by_r needs a 3-d grid")
    if validate:
        _check_structure(v, component, tol)
    x1, x2, r = _in_plane(grid)
    numer = angular_component(v) if component is Component.THETA else radial_component(v)
    out = numer.copy()
    out /= r
    near = r[:, :, 0] < 2.0 * grid.spacing
    ii, jj = np.nonzero(near)
    if ii.size:
        px, py = grid.axis[ii], grid.axis[jj]
        pr = np.hypot(px, py)
        c, s = px / pr, py / pr
        nodes, weights = leggauss(QUADRATURE_NODES)
        tau, w = 0.5 * (nodes + 1.0), 0.5 * weights
        pts = np.column_stack(((px[:, None] * tau).ravel(), (py[:, None] * tau).ravel()))
        shape = (ii.size, QUADRATURE_NODES, grid.n)

        def radial_derivative(comp: SpectralField) -> np.ndarray:
            d1 = sc.evaluate_columns(sc.partial(comp, 0), pts).reshape(shape)
            d2 = sc.evaluate_columns(sc.partial(comp, 1), pts).reshape(shape)
            return c[:, None, None] * d1 + s[:, None, None] * d2

        if component is Component.THETA:
            e1, e2 = -s, c
        else:
            e1, e2 = c, s
        integrand = e1[:, None, None] * radial_derivative(v[0]) + e2[:, None, None] * radial_derivative(v[1])
        out[ii, jj, :] = np.einsum("k,pkz->pz", w, integrand)
    return SpectralField.from_samples(grid, out)


def omega_from_alpha(alpha: SpectralField) -> VectorField:
    """Cartesian vorticity r alpha e_theta = alpha (-x2, x1, 0)."""
    x1, x2, _ = _in_plane(alpha.grid)
    a = alpha.samples
    return VectorField.from_arrays(alpha.grid, (-x2 * a, x1 * a, np.zeros_like(a)))


def swirl(grid: Grid, amplitude: float, width: float = 0.6) -> VectorField:
    """Pure swirl u_theta e_theta with a Gaussian profile; used to build failing inputs."""
    x1, x2, r = _in_plane(grid)
    z = grid.mesh[2]
    g = amplitude * np.exp(-(r ** 2 + z ** 2) / width ** 2)
    return VectorField.from_arrays(grid, (-x2 * g, x1 * g, np.zeros_like(g)))

