"""Damped Newton solver for the support-function Monge-Ampere equation.

The equation solved on the unit sphere is

    h * det(W) = f,      W = Hess h + h I,

with ``Hess`` the covariant Hessian in the node frame and ``f`` a positive
density.  ``W`` is the reversed second fundamental form of the convex body
with support function ``h``; positive definiteness of ``W`` at every node is
the discrete convexity certificate, and ``det W`` is the reciprocal Gauss
curvature at the boundary point with outward normal at the node.

The Newton iteration works on harmonic coefficients: each step solves the
Galerkin projection of the linearized equation, a dense square system with
one row per coefficient, then backtracks along the step until the iterate
keeps ``h`` positive, keeps ``W`` positive definite, and decreases the
residual sup-norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, ConvexityError, InvalidParameter
from .grid import (
    DEFAULT_BANDWIDTH,
    HarmonicCoeffs,
    ScalarField,
    SphericalGrid,
    build_grid,
    coeff_count,
    lm_index,
    same_grid,
)

__all__ = [
    "SupportFunction",
    "DensityFunction",
    "SolveOptions",
    "NewtonResult",
    "ma_residual",
    "linearized_operator",
    "check_convexity",
    "newton_solve",
    "holder_proxy_seminorm",
]


def _curvature_data(grid: SphericalGrid, values: np.ndarray):
    """Components of W = Hess h + h I, its determinant and minimal eigenvalue."""
    h11, h12, h22 = grid.hessian_components(values)
    w11 = h11 + values
    w22 = h22 + values
    det = w11 * w22 - h12 * h12
    mean = 0.5 * (w11 + w22)
    spread = np.sqrt(0.25 * (w11 - w22) ** 2 + h12 * h12)
    return w11, h12, w22, det, mean - spread


class SupportFunction:
    """Support function of a smooth convex body, certified on construction.

    Stores node values together with harmonic coefficients and the curvature
    data of ``W = Hess h + h I``.  Construction fails with
    :class:`ConvexityError` if ``h`` is not strictly positive or ``W`` is not
    positive definite at some node; the error names the first offending node.
    """

    def __init__(self, grid: SphericalGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (grid.n_coeffs,):
            raise InvalidParameter(
                f"support function on bandwidth {grid.L} needs {grid.n_coeffs} "
                f"coefficients, got shape {coeffs.shape}"
            )
        values = grid.synthesize_coeffs(coeffs)
        w11, w12, w22, det, min_eig = _curvature_data(grid, values)
        if np.min(values) <= 0.0:
            node = int(np.argmin(values))
            raise ConvexityError(
                f"support function is not positive at node {node} "
                f"(value {values[node]:.3e})",
                node=node,
            )
        if np.min(min_eig) <= 0.0:
            node = int(np.argmin(min_eig))
            raise ConvexityError(
                f"curvature matrix W is not positive definite at node {node} "
                f"(minimal eigenvalue {min_eig[node]:.3e})",
                node=node,
                eigenvalue=float(min_eig[node]),
            )
        self.grid = grid
        self.coeffs = coeffs
        self.values = values
        self.w11, self.w12, self.w22 = w11, w12, w22
        self.det_w = det
        self.min_eig_w = min_eig
        for arr in (self.coeffs, self.values, self.w11, self.w12, self.w22,
                    self.det_w, self.min_eig_w):
            arr.setflags(write=False)

    @classmethod
    def from_field(cls, field: ScalarField) -> "SupportFunction":
        """Certify node values as a support function.

        The values must be band-limited on their grid (synthesized from
        coefficients or sampled from a smooth body); data that the harmonic
        projection does not reproduce is rejected rather than silently
        smoothed.
        """
        coeffs = field.grid.analyze_values(field.values)
        back = field.grid.synthesize_coeffs(coeffs)
        scale = 1.0 + np.max(np.abs(field.values))
        if np.max(np.abs(back - field.values)) > 1e-8 * scale:
            raise InvalidParameter(
                "field is not band-limited on its grid; cannot certify it "
                "as a support function"
            )
        return cls(field.grid, coeffs)

    @classmethod
    def constant(cls, grid: SphericalGrid, value: float) -> "SupportFunction":
        """The sphere of radius ``value`` about the origin."""
        if value <= 0.0:
            raise InvalidParameter(f"constant support value must be positive, got {value}")
        c = np.zeros(grid.n_coeffs)
        c[0] = value * np.sqrt(4.0 * np.pi)
        return cls(grid, c)

    @property
    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.values)

    def h_min(self) -> float:
        return float(np.min(self.values))

    def h_sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self) -> str:
        return (f"SupportFunction(L={self.grid.L}, h_min={self.h_min():.4g}, "
                f"h_sup={self.h_sup():.4g})")


class DensityFunction:
    """Positive density on the sphere, stored as harmonic coefficients.

    Carries two-sided bounds ``lam_lo <= f <= lam_hi`` (checked at the nodes
    of the construction grid) and a Holder-type regularity proxy, the
    exponent-1/2 difference quotient seminorm of :func:`holder_proxy_seminorm`.
    """

    def __init__(self, coeffs: HarmonicCoeffs, lam_lo: float, lam_hi: float,
                 grid: SphericalGrid | None = None):
        if not (0.0 < lam_lo <= lam_hi):
            raise InvalidParameter(
                f"density bounds must satisfy 0 < lam_lo <= lam_hi, got "
                f"({lam_lo}, {lam_hi})"
            )
        self.coeffs = coeffs
        self.lam_lo = float(lam_lo)
        self.lam_hi = float(lam_hi)
        check_grid = grid if grid is not None else build_grid(max(coeffs.L, 4))
        vals = self.values_on(check_grid)
        tol = 1e-12 * max(1.0, lam_hi)
        if np.min(vals) < lam_lo - tol or np.max(vals) > lam_hi + tol:
            raise InvalidParameter(
                f"density violates its bounds [{lam_lo}, {lam_hi}]: "
                f"range [{vals.min():.6g}, {vals.max():.6g}]"
            )
        self.seminorm = holder_proxy_seminorm(ScalarField(check_grid, vals))

    @classmethod
    def constant(cls, value: float) -> "DensityFunction":
        if value <= 0.0:
            raise InvalidParameter(f"constant density must be positive, got {value}")
        c = np.zeros(1)
        c[0] = value * np.sqrt(4.0 * np.pi)
        return cls(HarmonicCoeffs(0, c), value, value)

    @classmethod
    def from_harmonics(cls, terms, base: float = 1.0,
                       grid: SphericalGrid | None = None) -> "DensityFunction":
        """Density ``base + sum amp * Y_lm / sup|Y_lm|``.

        Each harmonic is scaled to unit sup-norm over the whole sphere (not
        just the grid nodes) before its amplitude is applied, so
        ``(1, 0, 0.1)`` produces exactly ``1 + 0.1 (u . e3)``.  Bounds are
        the attained range on the grid.
        """
        terms = list(terms)
        if not terms:
            raise InvalidParameter("at least one (l, m, amplitude) term required")
        Lmax = max(int(l) for l, _, _ in terms)
        if grid is None:
            grid = build_grid(max(4, Lmax))
        if Lmax > grid.L:
            raise InvalidParameter(
                f"harmonic degree {Lmax} exceeds grid bandwidth {grid.L}"
            )
        c = np.zeros(coeff_count(Lmax))
        for l, m, amp in terms:
            c[lm_index(int(l), int(m))] += float(amp) / _harmonic_sup(int(l), int(m))
        c[0] += base * np.sqrt(4.0 * np.pi)
        coeffs = HarmonicCoeffs(Lmax, c)
        vals = grid.synthesize_coeffs(coeffs.embedded(grid.L).values)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if lo <= 0.0:
            raise InvalidParameter(f"density is not positive (min {lo:.6g})")
        return cls(coeffs, lo, hi, grid=grid)

    def values_on(self, grid: SphericalGrid) -> np.ndarray:
        if self.coeffs.L > grid.L:
            raise InvalidParameter(
                f"density bandwidth {self.coeffs.L} exceeds grid bandwidth {grid.L}"
            )
        return grid.synthesize_coeffs(self.coeffs.embedded(grid.L).values)

    def field_on(self, grid: SphericalGrid) -> ScalarField:
        return ScalarField(grid, self.values_on(grid))

    def mean(self) -> float:
        """Average of f over the sphere (from the zonal coefficient)."""
        return float(self.coeffs.values[0]) / np.sqrt(4.0 * np.pi)

    def __repr__(self) -> str:
        return (f"DensityFunction(L={self.coeffs.L}, bounds=({self.lam_lo:.4g}, "
                f"{self.lam_hi:.4g}))")


def _harmonic_sup(l: int, m: int) -> float:
    """Sup-norm of the real harmonic (l, m) over the sphere.

    The longitude factor attains 1, so this is the maximum over colatitude of
    the normalized Legendre part.  Zonal harmonics peak at the poles where
    ``|P_l| = 1``, giving the normalization constant exactly; for ``m != 0``
    the pole values vanish and dense interior sampling locates the maximum.
    """
    from .grid import _legendre_norm, _theta_basis

    if m == 0:
        return float(_legendre_norm(np.array(float(l)), np.array(0.0)))
    theta = np.linspace(0.0, np.pi, 4097)[1:-1]
    theta_part, _ = _theta_basis(l, np.cos(theta))
    return float(np.sqrt(2.0) * np.max(np.abs(theta_part[:, l, abs(m)])))


def holder_proxy_seminorm(field: ScalarField, alpha: float = 0.5) -> float:
    """Regularity proxy: sup deviation from 1 plus a difference quotient.

    Computes ``max|f - 1|`` plus the maximum of ``|f(x) - f(y)| / d(x,y)**alpha``
    over node pairs at geodesic distance ``0 < d <= pi / L``.  A bounded value
    under grid refinement indicates Holder-alpha regularity at the grid scale;
    the default exponent is 1/2.
    """
    grid = field.grid
    v = field.values
    cosd = np.clip(grid.nodes @ grid.nodes.T, -1.0, 1.0)
    d = np.arccos(cosd)
    mask = (d > 0.0) & (d <= np.pi / grid.L)
    if not mask.any():
        return float(np.max(np.abs(v - 1.0)))
    diffs = np.abs(v[:, None] - v[None, :])[mask] / d[mask] ** alpha
    return float(np.max(np.abs(v - 1.0)) + np.max(diffs))


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the damped Newton iteration.

    Attributes
    ----------
    tolerance : float
        Residual sup-norm at which the solve is accepted.
    max_iterations : int
        Newton iteration cap.
    backtrack_factor : float
        Step shrink factor during backtracking.
    min_step : float
        Smallest admissible backtracking step before giving up.
    positivity_floor : float
        Iterates must keep ``min h`` above this floor.
    """

    tolerance: float = 1e-10
    max_iterations: int = 50
    backtrack_factor: float = 0.5
    min_step: float = 2.0 ** -20
    positivity_floor: float = 1e-8

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise InvalidParameter("tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be at least 1")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise InvalidParameter("backtrack_factor must lie in (0, 1)")
        if not (0.0 < self.min_step <= 1.0):
            raise InvalidParameter("min_step must lie in (0, 1]")
        if self.positivity_floor <= 0.0:
            raise InvalidParameter("positivity_floor must be positive")


@dataclass
class NewtonResult:
    """Outcome of :func:`newton_solve`.

    ``rows`` holds one ``(iter, residual_sup, min_h, min_eig_W, step_size)``
    tuple per iteration (iteration 0 describes the initial iterate with step
    size 0), matching the CSV report schema of :meth:`report_csv`.
    ``condition_number`` is the 2-norm conditioning of the final linearized
    system, recorded so ill-conditioning is visible rather than assumed away.
    """

    h: SupportFunction
    converged: bool
    iterations: int
    residual_sup: float
    rows: list
    condition_number: float

    def report_csv(self) -> str:
        lines = ["iter,residual_sup,min_h,min_eig_W,step_size"]
        for it, res, hmin, eig, step in self.rows:
            lines.append(f"{it},{res!r},{hmin!r},{eig!r},{step!r}")
        return "\n".join(lines) + "\n"


def ma_residual(h: SupportFunction, f: DensityFunction) -> ScalarField:
    """Monge-Ampere residual field ``h det(W) - f`` at the grid nodes."""
    bad = np.flatnonzero(h.min_eig_w <= 0.0)
    if bad.size:
        node = int(bad[0])
        raise ConvexityError(
            f"curvature matrix W is not positive definite at node {node}",
            node=node,
            eigenvalue=float(h.min_eig_w[node]),
        )
    return ScalarField(h.grid, h.values * h.det_w - f.values_on(h.grid))


def linearized_operator(h: SupportFunction, phi: ScalarField) -> ScalarField:
    """Derivative of ``h det(W(h))`` at ``h`` applied to a perturbation.

    The derivative is ``det(W) phi + h U : (Hess phi + phi I)`` with ``U`` the
    cofactor matrix of ``W``.  At the unit sphere it reduces to the Helmholtz
    operator ``Lap phi + 3 phi``.
    """
    if not same_grid(h.grid, phi.grid):
        raise InvalidParameter(
            f"support function (L={h.grid.L}) and perturbation (L={phi.grid.L}) "
            "must share a grid"
        )
    p11, p12, p22 = h.grid.hessian_components(phi.values)
    u_term = (h.w22 * (p11 + phi.values) - 2.0 * h.w12 * p12
              + h.w11 * (p22 + phi.values))
    return ScalarField(h.grid, h.det_w * phi.values + h.values * u_term)


def check_convexity(field: ScalarField) -> tuple[np.ndarray, bool]:
    """Minimal eigenvalue field of ``W = Hess h + h I`` and its positivity.

    Returns ``(min_eig, ok)`` where ``ok`` also requires ``h > 0`` at every
    node, so it is exactly the admissibility test of the solvers.
    """
    _, _, _, _, min_eig = _curvature_data(field.grid, field.values)
    ok = bool(np.min(min_eig) > 0.0 and np.min(field.values) > 0.0)
    return min_eig, ok


def _jacobian_matrix(grid: SphericalGrid, values: np.ndarray,
                     w11: np.ndarray, w12: np.ndarray, w22: np.ndarray,
                     det: np.ndarray) -> np.ndarray:
    """Galerkin matrix of the linearized operator in coefficient space."""
    s = grid._spec
    diag_y = det + values * (w11 + w22)
    j_node = (diag_y[:, None] * s.Y
              + values[:, None] * (w22[:, None] * s.H11
                                   - 2.0 * w12[:, None] * s.H12
                                   + w11[:, None] * s.H22))
    return s.A @ j_node


def newton_solve(f: DensityFunction, h0: SupportFunction | None = None,
                 opts: SolveOptions | None = None,
                 grid: SphericalGrid | None = None) -> NewtonResult:
    """Solve ``h det(W) = f`` by damped Newton iteration.

    Parameters
    ----------
    f : DensityFunction
        Right-hand side density.
    h0 : SupportFunction, optional
        Initial iterate.  Defaults to the constant ``(mean f)**(1/3)``, the
        exact solution when ``f`` is constant.
    opts : SolveOptions, optional
    grid : SphericalGrid, optional
        Grid to solve on when no initial iterate fixes one; defaults to the
        bandwidth-16 grid.

    Returns
    -------
    NewtonResult
        With ``h`` satisfying ``sup |h det W - f| <= opts.tolerance``.

    Raises
    ------
    ConvergenceFailure
        If the iteration cap is hit or backtracking cannot find an
        admissible decreasing step; carries the last residual.
    """
    opts = opts or SolveOptions()
    if h0 is not None:
        work_grid = h0.grid
        if grid is not None and not same_grid(grid, work_grid):
            raise InvalidParameter("explicit grid conflicts with initial iterate grid")
    else:
        work_grid = grid if grid is not None else build_grid(DEFAULT_BANDWIDTH)
        h0 = SupportFunction.constant(work_grid, f.mean() ** (1.0 / 3.0))

    fv = f.values_on(work_grid)
    coeffs = h0.coeffs.copy()
    values = h0.values.copy()
    w11, w12, w22 = h0.w11.copy(), h0.w12.copy(), h0.w22.copy()
    det = h0.det_w.copy()
    min_eig = h0.min_eig_w.copy()

    residual = values * det - fv
    res_sup = float(np.max(np.abs(residual)))
    rows = [(0, res_sup, float(values.min()), float(min_eig.min()), 0.0)]
    matrix = None

    for it in range(1, opts.max_iterations + 1):
        if res_sup <= opts.tolerance:
            break
        matrix = _jacobian_matrix(work_grid, values, w11, w12, w22, det)
        rhs = -(work_grid._spec.A @ residual)
        try:
            delta = np.linalg.solve(matrix, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(
                f"linearized system is singular at iteration {it}: {exc}",
                residual=res_sup, iterations=it - 1,
            ) from exc

        step = 1.0
        accepted = False
        while step >= opts.min_step:
            cand = coeffs + step * delta
            cand_values = work_grid.synthesize_coeffs(cand)
            if np.min(cand_values) > opts.positivity_floor:
                cw11, cw12, cw22, cdet, cmin_eig = _curvature_data(work_grid, cand_values)
                if np.min(cmin_eig) > 0.0:
                    cand_res = cand_values * cdet - fv
                    cand_sup = float(np.max(np.abs(cand_res)))
                    if cand_sup < res_sup:
                        coeffs, values = cand, cand_values
                        w11, w12, w22, det, min_eig = cw11, cw12, cw22, cdet, cmin_eig
                        residual, res_sup = cand_res, cand_sup
                        accepted = True
                        break
            step *= opts.backtrack_factor
        if not accepted:
            raise ConvergenceFailure(
                f"backtracking failed below step {opts.min_step} at iteration {it}",
                residual=res_sup, iterations=it,
            )
        rows.append((it, res_sup, float(values.min()), float(min_eig.min()), step))

    converged = res_sup <= opts.tolerance
    if not converged:
        raise ConvergenceFailure(
            f"Newton did not reach tolerance {opts.tolerance:.3e} in "
            f"{opts.max_iterations} iterations (residual {res_sup:.3e})",
            residual=res_sup, iterations=opts.max_iterations,
        )
    if matrix is None:
        matrix = _jacobian_matrix(work_grid, values, w11, w12, w22, det)
    condition = float(np.linalg.cond(matrix))
    result_h = SupportFunction(work_grid, coeffs)
    return NewtonResult(
        h=result_h,
        converged=True,
        iterations=rows[-1][0],
        residual_sup=res_sup,
        rows=rows,
        condition_number=condition,
    )
