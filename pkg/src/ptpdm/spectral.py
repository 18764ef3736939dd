"""Finite-difference spectra of H and of its PDM partner h.

Both Hamiltonians are tridiagonal on a uniform Dirichlet grid.  H uses the
three-point Laplacian with a complex diagonal; h uses the conservative
midpoint scheme for ``p f(x) p / 2`` so its matrix is symmetric by
construction.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expr as ex
from .errors import DegeneracyError, MassError
from .perturbative import ModelSpec, PDMModel, derive_pdm

DENSE_LIMIT = 400
SOLVER_FLOOR = 1e-12
NOISE_FACTOR = 100.0
SLOPE_WINDOW = (3.5, 4.5)
REALITY_TOL = 1e-7


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("grid requires x_min < x_max")
        if self.n < 16:
            raise ValueError("grid requires n >= 16")
        if self.boundary != "dirichlet":
            raise ValueError("only Dirichlet boundaries are supported")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n + 1)

    @property
    def symmetric(self) -> bool:
        return abs(self.x_min + self.x_max) <= 1e-14 * (self.x_max - self.x_min)

    def _nodes(self, offsets) -> np.ndarray:
        xs = self.x_min + self.spacing * offsets
        if self.symmetric:
            # exact x -> -x symmetry of the node set
            xs = 0.5 * (xs - xs[::-1])
        return xs

    @property
    def points(self) -> np.ndarray:
        return self._nodes(np.arange(1, self.n + 1, dtype=float))

    @property
    def midpoints(self) -> np.ndarray:
        """x_{i+1/2} for i = 0..n (n + 1 values, including the wall halves)."""
        return self._nodes(np.arange(0, self.n + 1, dtype=float) + 0.5)

    def refine(self) -> "Grid":
        """Same interval with the spacing halved exactly (n -> 2n + 1)."""
        return dataclasses.replace(self, n=2 * self.n + 1)


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Tridiagonal ``p f p / 2 + U`` on a grid.

    ``f`` holds the kinetic factor at the n + 1 midpoints and ``U`` the
    (possibly complex) potential at the n nodes.
    """

    kind: str  # "complex-general" | "real-symmetric"
    f: np.ndarray
    U: np.ndarray
    grid: Grid

    @property
    def n(self) -> int:
        return self.U.size

    @property
    def diag(self) -> np.ndarray:
        return (self.f[:-1] + self.f[1:]) / (2.0 * self.grid.spacing**2) + self.U

    @property
    def off(self) -> np.ndarray:
        return -self.f[1:-1] / (2.0 * self.grid.spacing**2)

    def sparse(self):
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csc")

    def dense(self) -> np.ndarray:
        return self.sparse().toarray()

    def is_symmetric(self) -> bool:
        a = self.sparse()
        return (a != a.T).nnz == 0

    def pt_deviation(self) -> float:
        """max |A_ij - conj(A_{n-1-i, n-1-j})| / max|A| (zero for a PT-symmetric grid)."""
        d, o = self.diag, self.off
        dd = np.max(np.abs(d - np.conj(d[::-1])))
        do = np.max(np.abs(o - np.conj(o[::-1]))) if o.size else 0.0
        return float(max(dd, do) / max(np.max(np.abs(d)), 1e-300))

    def rayleigh(self, v: np.ndarray) -> complex:
        """v^T A v / v^T v with the kinetic part summed as squared differences.

        A is complex symmetric, so this bilinear quotient is stationary at
        eigenvectors; the difference form avoids cancellation against 1/dx^2.
        """
        dv = np.diff(np.concatenate(([0.0], v, [0.0])))
        num = 0.5 * np.sum(self.f * dv * dv) / self.grid.spacing**2 + np.sum(self.U * v * v)
        return complex(num / np.sum(v * v))


def _kinetic_unit(g: Grid) -> np.ndarray:
    return np.ones(g.n + 1)


def discretize_pt(m: ModelSpec, g: Grid, pdm: PDMModel | None = None) -> HamiltonianMatrix:
    """H = p^2/2 + Vr + i eps Vi, three-point stencil."""
    Vi = (pdm or derive_pdm(m)).Vi
    xs = g.points
    U = ex.evaluate_real(m.Vr, xs).astype(complex)
    if m.epsilon != 0 and not Vi.is_zero:
        U = U + 1j * m.epsilon * ex.evaluate_real(Vi, xs)
    return HamiltonianMatrix("complex-general", _kinetic_unit(g), U, g)


def discretize_pdm(m: ModelSpec, pdm: PDMModel, g: Grid) -> HamiltonianMatrix:
    """h = p f p / 2 + Vr + eps^2 Veff2 with f = 1 + eps^2 M2 at midpoints."""
    eps2 = m.epsilon**2
    xs, xm = g.points, g.midpoints
    if eps2 == 0 or pdm.M2.is_zero:
        f = _kinetic_unit(g)
    else:
        f = 1.0 + eps2 * ex.evaluate_real(pdm.M2, xm)
    if np.any(f <= 0):
        raise MassError("non-positive mass factor 1 + eps^2 M2 on the grid")
    U = ex.evaluate_real(m.Vr, xs)
    if eps2 != 0 and not pdm.Veff2.is_zero:
        U = U + eps2 * ex.evaluate_real(pdm.Veff2, xs)
    return HamiltonianMatrix("real-symmetric", f, U, g)


def _symmetric_lowest(a: HamiltonianMatrix, k: int, vectors: bool):
    d = a.diag.real
    res = sla.eigh_tridiagonal(d, a.off.real, select="i", select_range=(0, k - 1), eigvals_only=not vectors)
    return res


def eigen_lowest(a: HamiltonianMatrix, k: int, vectors: bool = False, polish: bool = False):
    """Lowest ``k`` eigenvalues sorted by real part (and vectors if asked).

    ``polish`` replaces each eigenvalue by the Rayleigh quotient of its vector.
    """
    if not 1 <= k <= a.n:
        raise ValueError("k must satisfy 1 <= k <= n")
    if a.kind == "real-symmetric":
        if not polish:
            return _symmetric_lowest(a, k, vectors)
        w, v = _symmetric_lowest(a, k, True)
        w = np.array([a.rayleigh(v[:, j]).real for j in range(k)])
        return (w, v) if vectors else w
    if a.n <= DENSE_LIMIT or k + 4 >= a.n - 1:
        w, v = sla.eig(a.dense())
    else:
        # shift below the Hermitian part's ground state; nearest eigenvalues are the lowest
        herm = dataclasses.replace(a, kind="real-symmetric", U=a.U.real)
        e0 = float(_symmetric_lowest(herm, 1, False)[0])
        sigma = e0 - max(1.0, 0.1 * abs(e0))
        try:
            w, v = spla.eigs(a.sparse(), k=min(k + 4, a.n - 2), sigma=sigma, which="LM",
                             v0=np.ones(a.n, dtype=complex))
        except spla.ArpackNoConvergence as err:
            raise RuntimeError(f"eigensolver did not converge: {err}") from err
    order = np.argsort(w.real, kind="stable")[:k]
    if polish:
        w = w.copy()
        for j in order:
            w[j] = a.rayleigh(v[:, j])
    if vectors:
        return w[order], v[:, order]
    return w[order]


def lowest_with_refinement(build, g: Grid, k: int):
    """Eigenvalues on g and on g.refine(); returns (coarse, fine, richardson, error)."""
    a = eigen_lowest(build(g), k)
    b = eigen_lowest(build(g.refine()), k)
    rich = (4.0 * b - a) / 3.0
    return a, b, rich, np.abs(b - a) * 4.0 / 3.0


@dataclass
class SpectralReport:
    eps_values: list
    levels: int
    E_pt: np.ndarray  # (n_eps, k) complex
    E_pdm: np.ndarray  # (n_eps, k) real
    im_max: np.ndarray  # (n_eps,)
    gaps: np.ndarray  # (n_eps, k)
    grid_error: np.ndarray  # (n_eps, k) estimate of the gap discretization error
    noise_floor: np.ndarray  # (n_eps, k) bool, True when excluded from the fit
    slopes: np.ndarray  # (k,), NaN when fewer than 4 usable points
    grid_n: int
    slope_window: tuple = SLOPE_WINDOW
    reality_tol: float = REALITY_TOL

    def reality_ok(self) -> bool:
        scale = np.maximum(1.0, np.abs(self.E_pt.real))
        return bool(np.all(np.abs(self.E_pt.imag) <= self.reality_tol * scale))

    def slopes_ok(self) -> bool:
        lo, hi = self.slope_window
        return bool(np.all(np.isfinite(self.slopes)) and np.all((self.slopes >= lo) & (self.slopes <= hi)))

    @property
    def passed(self) -> bool:
        return self.reality_ok() and self.slopes_ok()

    def rows(self):
        """(epsilon, level, re_E_pt, im_E_pt, E_pdm, gap) ordered by epsilon then level."""
        for i, e in enumerate(self.eps_values):
            for n in range(self.levels):
                z = self.E_pt[i, n]
                yield (e, n, float(z.real), float(z.imag), float(self.E_pdm[i, n]), float(self.gaps[i, n]))

    def to_json(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "eps_values": list(self.eps_values),
            "levels": self.levels,
            "max_imag": [float(v) for v in self.im_max],
            "slopes": [None if not np.isfinite(s) else float(s) for s in self.slopes],
            "slope_window": list(self.slope_window),
            "noise_floor": self.noise_floor.tolist(),
            "grid_error": self.grid_error.tolist(),
            "reality_ok": self.reality_ok(),
            "slopes_ok": self.slopes_ok(),
        }


def fit_slope(eps, gaps) -> float:
    eps, gaps = np.asarray(eps, float), np.asarray(gaps, float)
    if eps.size < 4:
        return math.nan
    return float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])


def _solve_point(m: ModelSpec, pdm: PDMModel, g: Grid, eps: float, k: int, refine: bool):
    mm = m.with_epsilon(eps)
    pp = dataclasses.replace(pdm, epsilon=eps)
    Ept = eigen_lowest(discretize_pt(mm, g, pp), k)
    Epdm = eigen_lowest(discretize_pdm(mm, pp, g), k)
    gap = np.abs(Ept.real - Epdm)
    if refine:
        gf = g.refine()
        gap_f = np.abs(eigen_lowest(discretize_pt(mm, gf, pp), k).real - eigen_lowest(discretize_pdm(mm, pp, gf), k))
        err = np.abs(gap - gap_f) * 4.0 / 3.0
    else:
        err = np.zeros(k)
    err = np.maximum(err, SOLVER_FLOOR * np.maximum(1.0, np.abs(Epdm)))
    return Ept, Epdm, gap, err


def compare_spectra(m: ModelSpec, g: Grid, eps_values, k: int, pdm: PDMModel | None = None,
                    jobs: int = 1, refine: bool = True, slope_window=SLOPE_WINDOW) -> SpectralReport:
    """Spectra of H and h across an eps sweep with an O(eps^4) gap fit."""
    eps_values = [float(e) for e in eps_values]
    pos = [e for e in eps_values if e > 0]
    if len(eps_values) < 4 or len(pos) < 4 or max(pos) < 4 * min(pos):
        raise ValueError("eps sweep needs >= 4 positive values spanning a factor of 4")
    pdm = pdm or derive_pdm(m)

    def run(e):
        return _solve_point(m, pdm, g, e, k, refine)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, eps_values))
    else:
        results = [run(e) for e in eps_values]

    E_pt = np.array([r[0] for r in results])
    E_pdm = np.array([r[1] for r in results])
    gaps = np.array([r[2] for r in results])
    err = np.array([r[3] for r in results])
    noise = gaps < NOISE_FACTOR * err
    slopes = np.full(k, math.nan)
    eps_arr = np.array(eps_values)
    for n in range(k):
        use = ~noise[:, n] & (eps_arr > 0)
        slopes[n] = fit_slope(eps_arr[use], gaps[use, n])
    return SpectralReport(
        eps_values=eps_values, levels=k, E_pt=E_pt, E_pdm=E_pdm,
        im_max=np.max(np.abs(E_pt.imag), axis=1), gaps=gaps, grid_error=err,
        noise_floor=noise, slopes=slopes, grid_n=g.n, slope_window=tuple(slope_window),
    )


# ---------------------------------------------------------- second order

@dataclass
class SecondOrderCorrection:
    level: int
    E0: float
    truncated: float  # sum over retained states
    resolvent: float  # exact reduced-resolvent value on the grid
    tail: float
    pdm_expectation: float
    retained: int


def _h0_matrix(m: ModelSpec, g: Grid) -> HamiltonianMatrix:
    return HamiltonianMatrix("real-symmetric", _kinetic_unit(g), ex.evaluate_real(m.Vr, g.points), g)


def pdm_expectation(psi: np.ndarray, pdm: PDMModel, g: Grid) -> float:
    """<psi| p M2 p / 2 + Veff2 |psi> with the conservative midpoint scheme."""
    dpsi = np.diff(np.concatenate(([0.0], psi, [0.0])))
    M2 = ex.evaluate_real(pdm.M2, g.midpoints)
    kin = 0.5 * np.sum(M2 * dpsi**2) / g.spacing**2
    return float(kin + np.sum(ex.evaluate_real(pdm.Veff2, g.points) * psi**2))


def rs_second_order_oracle(m: ModelSpec, g: Grid, k: int, pdm: PDMModel | None = None,
                           retained: int = 400) -> list[SecondOrderCorrection]:
    """E_n^(2) = -sum_{m != n} |<m|Vi|n>|^2 / (E_n - E_m) for H0 + i eps Vi."""
    pdm = pdm or derive_pdm(m)
    h0 = _h0_matrix(m, g)
    r = min(g.n, max(retained, k + 1))
    w, v = sla.eigh_tridiagonal(h0.diag, h0.off, select="i", select_range=(0, r - 1))
    if np.any(np.diff(w[: k + 1]) < 1e-6):
        raise DegeneracyError("near-degenerate levels among the retained states")
    Vi = ex.evaluate_real(pdm.Vi, g.points) if not pdm.Vi.is_zero else np.zeros(g.n)
    T = h0.sparse()
    out = []
    for n in range(k):
        psi = v[:, n]
        En = float(w[n])
        if not np.any(Vi):
            out.append(SecondOrderCorrection(n, En, 0.0, 0.0, 0.0, pdm_expectation(psi, pdm, g), r))
            continue
        col = v.T @ (Vi * psi)
        mask = np.arange(r) != n
        trunc = float(np.sum(col[mask] ** 2 / (w[mask] - En)))
        # reduced resolvent through the bordered system [[H0 - En, psi], [psi^T, 0]]
        rhs = Vi * psi
        rhs = rhs - psi * (psi @ rhs)
        B = sp.bmat([[T - En * sp.identity(g.n, format="csc"), psi[:, None]], [psi[None, :], None]], format="csc")
        y = spla.spsolve(B, np.concatenate((rhs, [0.0])))[: g.n]
        exact = float(rhs @ y)
        out.append(SecondOrderCorrection(n, En, trunc, exact, abs(exact - trunc), pdm_expectation(psi, pdm, g), r))
    return out


def neville(xs, ys, x0: float = 0.0) -> float:
    """Polynomial extrapolation of (xs, ys) to x0."""
    xs = list(map(float, xs))
    p = list(map(float, ys))
    n = len(xs)
    for j in range(1, n):
        for i in range(n - j):
            p[i] = ((x0 - xs[i + j]) * p[i] + (xs[i] - x0) * p[i + 1]) / (xs[i] - xs[i + j])
    return p[0]


def full_solve_second_order(m: ModelSpec, g: Grid, level: int, eps_ladder, pdm: PDMModel | None = None) -> float:
    """E^(2) from full complex solves: Neville in eps^2 of (Re E(eps) - E0) / eps^2."""
    pdm = pdm or derive_pdm(m)
    E0 = float(eigen_lowest(_h0_matrix(m, g), level + 1, polish=True)[level])
    vals = []
    for e in eps_ladder:
        E = eigen_lowest(discretize_pt(m.with_epsilon(e), g, pdm), level + 1, polish=True)[level]
        vals.append((E.real - E0) / e**2)
    return neville([e * e for e in eps_ladder], vals)


def full_solve_plateau(m: ModelSpec, g: Grid, level: int, base: float, steps: int = 8,
                       pdm: PDMModel | None = None) -> tuple[float, float]:
    """Scan eps ladders base * 2^-j and keep the most stable three-point estimate.

    Large eps suffers from higher orders, tiny eps from roundoff; the estimate
    whose neighbour agrees best sits on the plateau between.  Returns
    (value, |difference to neighbour|).
    """
    pdm = pdm or derive_pdm(m)
    E0 = float(eigen_lowest(_h0_matrix(m, g), level + 1, polish=True)[level])
    eps = [base * 2.0**-j for j in range(steps + 3)]
    q = []
    for e in eps:
        E = eigen_lowest(discretize_pt(m.with_epsilon(e), g, pdm), level + 1, polish=True)[level]
        q.append((E.real - E0) / e**2)
    est = [neville([e * e for e in eps[j:j + 3]], q[j:j + 3]) for j in range(steps + 1)]
    diffs = [abs(est[j] - est[j + 1]) for j in range(steps)]
    j = int(np.argmin(diffs))
    return est[j + 1], diffs[j]


@dataclass
class ThreeWayResult:
    level: int
    full_solve: float
    rs_oracle: float
    pdm_expectation: float
    tail: float
    tolerance: float
    full_solve_uncertainty: float = 0.0

    @property
    def spread(self) -> float:
        v = (self.full_solve, self.rs_oracle, self.pdm_expectation)
        return max(v) - min(v)

    @property
    def passed(self) -> bool:
        return self.spread <= self.tolerance


def three_way_second_order(m: ModelSpec, g: Grid, level: int = 0, pdm: PDMModel | None = None,
                           base: float | None = None, retained: int = 400,
                           coupling_scale: float = 1.0) -> ThreeWayResult:
    """Compare E_n^(2) from full solves, the RS sum, and <n|h2|n>.

    All three are Richardson-extrapolated in the grid spacing (g and its
    refinement).  ``coupling_scale`` reports E^(2) per unit of a physical
    coupling g with eps = coupling_scale * g (values scale by its square).
    The agreement tolerance is the larger of 1e-6 and the RS truncation
    tail; the eps-extrapolation uncertainty of the full solve is reported
    alongside but does not widen it.
    """
    pdm = pdm or derive_pdm(m)
    fine = g.refine()
    rs_c = rs_second_order_oracle(m, g, level + 1, pdm, retained)[level]
    rs_f = rs_second_order_oracle(m, fine, level + 1, pdm, retained)[level]
    if base is None:
        E = eigen_lowest(_h0_matrix(m, g), level + 2)
        spacing = float(E[level + 1] - E[level])
        base = math.sqrt(1e-2 * max(1.0, spacing) / max(abs(rs_c.resolvent), 1e-12))
    full_c, unc_c = full_solve_plateau(m, g, level, base, pdm=pdm)
    full_f, unc_f = full_solve_plateau(m, fine, level, base, pdm=pdm)

    def rich(a, b):
        return (4.0 * b - a) / 3.0

    s2 = coupling_scale**2
    tail = max(rs_c.tail, rs_f.tail) * s2
    return ThreeWayResult(
        level=level,
        full_solve=rich(full_c, full_f) * s2,
        rs_oracle=rich(rs_c.resolvent, rs_f.resolvent) * s2,
        pdm_expectation=rich(rs_c.pdm_expectation, rs_f.pdm_expectation) * s2,
        tail=tail,
        tolerance=max(1e-6, tail),
        full_solve_uncertainty=(4.0 * unc_f + unc_c) / 3.0 * s2,
    )


# ----------------------------------------------------- unperturbed oracles

@dataclass
class UnperturbedResult:
    computed: np.ndarray
    exact: np.ndarray
    variation: float = 0.0  # domain-truncation sensitivity (0 if not swept)

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.computed - self.exact)

    @property
    def rel_error(self) -> np.ndarray:
        return self.abs_error / np.abs(self.exact)


def unperturbed_levels(Vr, g: Grid, k: int) -> np.ndarray:
    """Richardson-extrapolated lowest ``k`` levels of p^2/2 + Vr on ``g``."""
    m = ModelSpec(Vr, domain=(g.x_min, g.x_max))
    return lowest_with_refinement(lambda gg: _h0_matrix(m, gg), g, k)[2]


def harmonic_levels(n: int = 2400, domain=(-12.0, 12.0), k: int = 6) -> UnperturbedResult:
    Vr = ex.mul(ex.const(Fraction(1, 2)), ex.power(ex.X, 2))
    E = unperturbed_levels(Vr, Grid(domain[0], domain[1], n), k)
    return UnperturbedResult(E, np.arange(k) + 0.5)


def poschl_teller_levels(lam: int = 3, n: int = 2400, k: int = 4, deltas=(1e-2, 5e-3, 2.5e-3)) -> UnperturbedResult:
    """Levels of lam(lam-1) sec^2(x)/2 on (-pi/2 + delta, pi/2 - delta), extrapolated in delta.

    Near a wall the state behaves like (pi/2 - |x|)^lam, so cutting the
    interval at distance delta shifts a level by O(delta^(2 lam - 1)); the two
    smallest deltas are Richardson-combined with that exponent.  ``variation``
    is the largest relative change between the extrapolated value and the
    individual sweep points.
    """
    Vr = ex.mul(lam * (lam - 1), ex.const(Fraction(1, 2)), ex.power(ex.sec(ex.X), 2))
    deltas = sorted(deltas, reverse=True)
    if len(deltas) < 2:
        raise ValueError("delta extrapolation needs at least two offsets")
    runs = np.array([unperturbed_levels(Vr, Grid(-math.pi / 2 + d, math.pi / 2 - d, n), k) for d in deltas])
    r = (deltas[-2] / deltas[-1]) ** (2 * lam - 1)
    best = (r * runs[-1] - runs[-2]) / (r - 1)
    variation = float(np.max(np.abs(runs - best) / np.abs(best)))
    exact = np.array([(j + lam) ** 2 / 2 for j in range(k)], dtype=float)
    return UnperturbedResult(best, exact, variation)
