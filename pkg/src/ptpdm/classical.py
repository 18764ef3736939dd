"""Classical limit of the Poschl-Teller PDM model and orbit integration.

Phase-space functions for the potential V0 sec^2(k x) with coupling eps
(dimensional, energy units).  Write s = sec(k x), t = tan(k x) and
g(x) = 1 - eps^2/(2 V0^2) s^4 (5 s^2 - 4):

    m_c = m0 g
    H_c = p^2/(2 m_c) + V0 s^2 + eps^2/(4 V0) s^6 (5 s^2 - 4)
    X_c = x + i eps/(2 k V0^2) (V0 s^2 + p^2/m0) - eps^2/(4 k V0^3) s^2 (V0 s^2 - p^2/m0) t
    P_c = p - i eps/V0 s^2 t p + eps^2/(4 V0^3) s^2 [V0 s^4 + (3 s^2 - 2) p^2/m0] p
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import MassError, SingularRegionError
from .operators import NormalOp
from .perturbative import ModelSpec, observable_orders

NU_LADDER = (1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4, 1e-5, 1e-6)
REPORT_NUS = (1e-2, 1e-4, 1e-6)
LIMIT_TOL = 1e-9
DRIFT_TOL = 1e-6


@dataclass(frozen=True)
class ClassicalModel:
    V0: float
    k: float
    m0: float
    eps: float

    def __post_init__(self):
        if self.V0 <= 0 or self.k <= 0 or self.m0 <= 0:
            raise ValueError("V0, k and m0 must be positive")
        if self.mass_factor(0.0) <= 0:
            raise MassError("classical mass is non-positive at the origin")

    # --- closed forms
    def _st(self, x):
        kx = self.k * np.asarray(x, dtype=float)
        return 1.0 / np.cos(kx), np.tan(kx)

    def mass_factor(self, x):
        s, _ = self._st(x)
        return 1.0 - self.eps**2 / (2 * self.V0**2) * s**4 * (5 * s**2 - 4)

    def mass(self, x):
        return self.m0 * self.mass_factor(x)

    def potential(self, x):
        s, _ = self._st(x)
        return self.V0 * s**2 + self.eps**2 / (4 * self.V0) * s**6 * (5 * s**2 - 4)

    def H(self, x, p):
        return np.asarray(p) ** 2 / (2 * self.mass(x)) + self.potential(x)

    def X(self, x, p):
        s, t = self._st(x)
        p2 = np.asarray(p) ** 2 / self.m0
        V0, e, k = self.V0, self.eps, self.k
        return (np.asarray(x) + 1j * e / (2 * k * V0**2) * (V0 * s**2 + p2)
                - e**2 / (4 * k * V0**3) * s**2 * (V0 * s**2 - p2) * t)

    def P(self, x, p):
        s, t = self._st(x)
        p = np.asarray(p)
        p2 = p**2 / self.m0
        V0, e = self.V0, self.eps
        return (p - 1j * e / V0 * s**2 * t * p
                + e**2 / (4 * V0**3) * s**2 * (V0 * s**4 + (3 * s**2 - 2) * p2) * p)

    # --- Hamilton's equations
    def dH_dp(self, x, p):
        return np.asarray(p) / self.mass(x)

    def dH_dx(self, x, p):
        s, t = self._st(x)
        k, V0, e = self.k, self.V0, self.eps
        g = self.mass_factor(x)
        dg = -e**2 / (2 * V0**2) * (30 * s**6 - 16 * s**4) * k * t
        dV = 2 * V0 * s**2 * k * t + e**2 / (4 * V0) * (40 * s**8 - 24 * s**6) * k * t
        return -np.asarray(p) ** 2 * dg / (2 * self.m0 * g**2) + dV

    @property
    def omega(self) -> float:
        """Small-oscillation frequency from V''(0) / m(0).

        At eps = 0 this is sqrt(2 V0 k^2 / m0), from V0 sec^2(kx) ~ V0 + V0 k^2 x^2.
        """
        curvature = 2 * self.V0 * self.k**2 + 4 * self.eps**2 * self.k**2 / self.V0
        return math.sqrt(curvature / float(self.mass(0.0)))

    @property
    def period_estimate(self) -> float:
        return 2 * math.pi / self.omega

    def check_mass(self, xs) -> bool:
        return bool(np.all(self.mass_factor(xs) > 0))


def build_classical_pt_model(V0: float, k: float, m0: float, eps_dim: float, x_range=None) -> ClassicalModel:
    cm = ClassicalModel(float(V0), float(k), float(m0), float(eps_dim))
    if x_range is not None:
        xs = np.linspace(x_range[0], x_range[1], 201)
        if not cm.check_mass(xs):
            raise MassError("classical mass is non-positive on the requested range")
    return cm


# ------------------------------------------------------------------ orbits

@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    X: np.ndarray
    P: np.ndarray
    method: str

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1e-300))

    def period(self) -> float:
        """Mean spacing of upward zero crossings of x - mean(x)."""
        y = self.x - np.mean(self.x)
        idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
        if idx.size < 2:
            return math.nan
        tc = self.t[idx] - y[idx] * (self.t[idx + 1] - self.t[idx]) / (y[idx + 1] - y[idx])
        return float(np.mean(np.diff(tc)))


def _guard(cm: ClassicalModel, x: float):
    if abs(cm.k * x) >= math.pi / 2 * (1 - 1e-9) or cm.mass_factor(x) <= 0:
        raise SingularRegionError(f"orbit reached a singular region at x = {x:.6g}")


def _scalar_grad(cm: ClassicalModel):
    """Fast scalar (dH/dx, dH/dp) for the stepping loops."""
    k, V0, e2, m0 = cm.k, cm.V0, cm.eps**2, cm.m0
    lim = math.pi / 2 * (1 - 1e-9)

    def grad(x, p):
        kx = k * x
        if abs(kx) >= lim:
            raise SingularRegionError(f"orbit reached a singular region at x = {x:.6g}")
        s = 1.0 / math.cos(kx)
        t = math.tan(kx)
        s2 = s * s
        s4 = s2 * s2
        g = 1.0 - e2 / (2 * V0 * V0) * s4 * (5 * s2 - 4)
        if g <= 0:
            raise SingularRegionError(f"orbit reached a non-positive mass at x = {x:.6g}")
        dg = -e2 / (2 * V0 * V0) * (30 * s4 * s2 - 16 * s4) * k * t
        dV = 2 * V0 * s2 * k * t + e2 / (4 * V0) * (40 * s4 * s4 - 24 * s4 * s2) * k * t
        return -p * p * dg / (2 * m0 * g * g) + dV, p / (m0 * g)

    return grad


# fourth-order symmetric composition (triple jump)
_C1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_TRIPLE = (_C1, 1.0 - 2.0 * _C1, _C1)


def integrate_trajectory(cm: ClassicalModel, x0: float, p0: float, t_end: float | None = None,
                         dt: float | None = None, steps: int | None = None, order: int = 4,
                         tol: float = 1e-15, max_iter: int = 100) -> Trajectory:
    """Symplectic integration of Hamilton's equations for H_c.

    Leapfrog when eps = 0 (separable H), implicit midpoint otherwise; with
    ``order=4`` each step is a triple-jump composition of the base method.
    ``dt`` defaults to period_estimate / 1000.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    _guard(cm, x0)
    dt = cm.period_estimate / 1000 if dt is None else float(dt)
    if steps is None:
        steps = int(round((t_end if t_end is not None else 10 * cm.period_estimate) / dt))
    grad = _scalar_grad(cm)
    separable = cm.eps == 0
    m0 = cm.m0

    def leapfrog(x, p, h):
        p = p - 0.5 * h * grad(x, 0.0)[0]
        x = x + h * p / m0
        return x, p - 0.5 * h * grad(x, 0.0)[0]

    def midpoint(x, p, h):
        gx, gp = grad(x, p)
        xn, pn = x + h * gp, p - h * gx
        for _ in range(max_iter):
            gx, gp = grad(0.5 * (x + xn), 0.5 * (p + pn))
            xk, pk = x + h * gp, p - h * gx
            done = abs(xk - xn) <= tol * max(1.0, abs(xk)) and abs(pk - pn) <= tol * max(1.0, abs(pk))
            xn, pn = xk, pk
            if done:
                return xn, pn
        return xn, pn

    base = leapfrog if separable else midpoint
    subs = _TRIPLE if order == 4 else (1.0,)
    x = np.empty(steps + 1)
    p = np.empty(steps + 1)
    xi, pi = float(x0), float(p0)
    x[0], p[0] = xi, pi
    for i in range(steps):
        for c in subs:
            xi, pi = base(xi, pi, c * dt)
        x[i + 1], p[i + 1] = xi, pi
    t = dt * np.arange(steps + 1)
    return Trajectory(t=t, x=x, p=p, energy=cm.H(x, p), X=cm.X(x, p), P=cm.P(x, p),
                      method=("leapfrog" if separable else "implicit-midpoint") + f"/order{order}")


# ---------------------------------------------------------- hbar -> 0 limit

def quantum_pt_parameters(V0: float, k: float, m0: float, eps_dim: float, nu: float) -> dict:
    """lambda, hbar and the dimensionless eps that realise (V0, k, m0, eps) at energy scale nu."""
    lam = 0.5 + math.sqrt(0.25 + 2 * V0 / nu)
    hbar = math.sqrt(m0 * nu) / k
    eps = eps_dim * nu / (2 * V0 * (V0 - nu))
    return {"lam": lam, "hbar": hbar, "eps": eps}


def _pt_model(lam: float, eps: float) -> ModelSpec:
    Vr = ex.mul(0.5 * lam * (lam - 1), ex.power(ex.sec(ex.X), 2))
    return ModelSpec(Vr, c0="1/3", c1="-1/3", epsilon=eps)


def _symbol(op: NormalOp, xd: np.ndarray, pd: np.ndarray) -> np.ndarray:
    """sum_j C_j(x) (i p)^j with x, p commuting."""
    vals = op.values(xd)
    out = np.zeros(xd.shape, dtype=complex)
    for j in range(vals.shape[0]):
        out += vals[j] * (1j * pd) ** j
    return out


def quantum_symbols(V0: float, k: float, m0: float, eps_dim: float, nu: float, xc, pc):
    """Quantum X and P at energy scale nu, evaluated as phase-space functions."""
    q = quantum_pt_parameters(V0, k, m0, eps_dim, nu)
    m = _pt_model(q["lam"], q["eps"])
    X = observable_orders("x", m).at(q["eps"])
    P = observable_orders("p", m).at(q["eps"])
    xd = k * np.asarray(xc, dtype=float)
    pd = np.asarray(pc, dtype=float) / (q["hbar"] * k)
    return _symbol(X, xd, pd) / k, _symbol(P, xd, pd) * (q["hbar"] * k)


@dataclass
class LimitReport:
    raw_deviation: dict  # nu -> max relative deviation
    extrapolated_deviation: float
    points: int
    tolerance: float = LIMIT_TOL

    @property
    def monotone(self) -> bool:
        v = [self.raw_deviation[n] for n in sorted(self.raw_deviation, reverse=True)]
        return all(b < a for a, b in zip(v, v[1:]))

    @property
    def passed(self) -> bool:
        return self.extrapolated_deviation <= self.tolerance


def phase_space_samples(cm: ClassicalModel, n: int = 20, seed: int = 0, reach: float = 0.8):
    rng = np.random.default_rng(seed)
    xmax = reach * math.pi / (2 * cm.k)
    pmax = math.sqrt(2 * cm.m0 * cm.V0)
    return rng.uniform(-xmax, xmax, n), rng.uniform(-pmax, pmax, n)


def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def check_hbar_limit(cm: ClassicalModel, xc=None, pc=None, nus=NU_LADDER, report_nus=REPORT_NUS,
                     seed: int = 0) -> LimitReport:
    """Compare quantum X, P (commuting symbols) with X_c, P_c as nu -> 0.

    The symbols are polynomial-extrapolated in sqrt(nu) to nu = 0.
    """
    if xc is None:
        xc, pc = phase_space_samples(cm, seed=seed)
    xc, pc = np.asarray(xc, float), np.asarray(pc, float)
    Xc, Pc = cm.X(xc, pc), cm.P(xc, pc)
    nus = sorted(set(nus) | set(report_nus), reverse=True)
    Xs, Ps = [], []
    raw = {}
    for nu in nus:
        Xq, Pq = quantum_symbols(cm.V0, cm.k, cm.m0, cm.eps, nu, xc, pc)
        Xs.append(Xq)
        Ps.append(Pq)
        if nu in report_nus:
            raw[nu] = max(_rel(Xq, Xc), _rel(Pq, Pc))
    h = [math.sqrt(nu) for nu in nus]
    Xe = _neville_vec(h, Xs)
    Pe = _neville_vec(h, Ps)
    return LimitReport(raw, max(_rel(Xe, Xc), _rel(Pe, Pc)), xc.size)


def _neville_vec(xs, ys) -> np.ndarray:
    """Elementwise Neville extrapolation to 0 of complex arrays."""
    p = [np.asarray(y, dtype=complex).copy() for y in ys]
    n = len(xs)
    for j in range(1, n):
        for i in range(n - j):
            p[i] = (-xs[i + j] * p[i] + xs[i] * p[i + 1]) / (xs[i] - xs[i + j])
    return p[0]
