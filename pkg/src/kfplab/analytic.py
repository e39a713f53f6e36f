"""Closed-form kernel, exact solutions, decay bounds and a mesh-free
convolution oracle for the degenerate diffusion-transport equation

    d/dt f = d^2/dv^2 f + v d/dx f

together with its Lagrangian form (z = x + t v) and its rescaled form in
self-similar variables (s = log(1 + t), vt = v e^{-s/2}, zt = z e^{-3s/2},
amplitude e^{2s}). Everything in this module is the analytic ground truth the
finite element solvers are judged against.

The fundamental solution in the sheared frame is

    G_t(v, z) = sqrt(3)/(2 pi t^2) * exp(-(3 z^2 + (2 t v - 3 z)^2)/(4 t^3)),

a unit-mass Gaussian with covariance [[2t, t^2], [t^2, 2t^3/3]]. The solution
for the Gaussian initial state exp(-v^2 - x^2) is itself Gaussian, obtained by
adding covariances; the closed forms below were derived that way and are
cross-validated against the quadrature oracle in the test suite.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import RectDomain

SQRT3 = math.sqrt(3.0)


class QuadratureError(RuntimeError):
    """Raised when the oracle's quadrature refinement fails to stabilize."""


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

class GaussianSum:
    """Finite sum of axis-aligned Gaussians a * exp(-av (v-cv)^2 - ax (x-cx)^2).

    This is the only family of initial data the convolution oracle accepts;
    it is closed under the superposition tests and has a known mass and a
    trivially computable effective support box.
    """

    def __init__(self, terms):
        self.terms = [tuple(map(float, t)) for t in terms]
        for amp, cv, cx, av, ax in self.terms:
            if av <= 0 or ax <= 0:
                raise ValueError("Gaussian decay rates must be positive")

    def __call__(self, v, x):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(v, x).shape)
        for amp, cv, cx, av, ax in self.terms:
            out = out + amp * np.exp(-av * (v - cv) ** 2 - ax * (x - cx) ** 2)
        return out

    def mass(self) -> float:
        return sum(amp * math.pi / math.sqrt(av * ax) for amp, cv, cx, av, ax in self.terms)

    def support_box(self, k: float = 8.0):
        """Box outside which every term has decayed below exp(-k^2)."""
        vlo = min(cv - k / math.sqrt(av) for _, cv, _, av, _ in self.terms)
        vhi = max(cv + k / math.sqrt(av) for _, cv, _, av, _ in self.terms)
        xlo = min(cx - k / math.sqrt(ax) for _, _, cx, _, ax in self.terms)
        xhi = max(cx + k / math.sqrt(ax) for _, _, cx, _, ax in self.terms)
        return vlo, vhi, xlo, xhi

    def scaled(self, c: float) -> "GaussianSum":
        return GaussianSum([(c * a, cv, cx, av, ax) for a, cv, cx, av, ax in self.terms])


class GaussianIC(GaussianSum):
    """The reference initial state exp(-v^2 - x^2): mass pi, sup norm 1."""

    l1_norm = math.pi
    linf_norm = 1.0

    def __init__(self):
        super().__init__([(1.0, 0.0, 0.0, 1.0, 1.0)])


gaussian_ic = GaussianIC()


# ---------------------------------------------------------------------------
# kernel and its norms
# ---------------------------------------------------------------------------

def kernel_G(t: float, v, z):
    """Fundamental solution G_t(v, z) in the sheared frame, t > 0."""
    if t <= 0:
        raise ValueError("kernel is defined for t > 0 only")
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    pref = SQRT3 / (2.0 * math.pi * t * t)
    return pref * np.exp(-(3.0 * z ** 2 + (2.0 * t * v - 3.0 * z) ** 2) / (4.0 * t ** 3))


def kernel_Lq_norm(t: float, q) -> float:
    """||G_t||_{L^q}: q^{-1/q} (sqrt(3)/(2 pi t^2))^{(q-1)/q}, sup norm at q=inf."""
    if t <= 0:
        raise ValueError("kernel norms are defined for t > 0 only")
    pref = SQRT3 / (2.0 * math.pi * t * t)
    if q == math.inf or q == "inf":
        return pref
    q = float(q)
    if q < 1:
        raise ValueError("q must satisfy q >= 1")
    return q ** (-1.0 / q) * pref ** ((q - 1.0) / q)


def kernel_covariance(t: float) -> np.ndarray:
    """Covariance matrix [[2t, t^2], [t^2, 2t^3/3]] of the unit-mass kernel."""
    return np.array([[2.0 * t, t * t], [t * t, 2.0 * t ** 3 / 3.0]])


def kernel_Lq_quadrature(t: float, q, n_nodes: int = 400) -> float:
    """||G_t||_q by tensor Gauss-Legendre over the +-8 sigma kernel box.

    Independent of the closed form above; the sup norm is sampled on a fine
    grid around the origin instead of integrated.
    """
    if q == math.inf or q == "inf":
        sv = math.sqrt(2.0 * t)
        sz = math.sqrt(2.0 * t ** 3 / 3.0)
        g1 = np.linspace(-0.5 * sv, 0.5 * sv, 1001)
        g2 = np.linspace(-0.5 * sz, 0.5 * sz, 1001)
        V, Z = np.meshgrid(g1, g2, indexing="ij")
        return float(kernel_G(t, V, Z).max())
    q = float(q)
    sv = 8.0 * math.sqrt(2.0 * t)
    sz = 8.0 * math.sqrt(2.0 * t ** 3 / 3.0)
    val = _tensor_gauss(lambda v, z: kernel_G(t, v, z) ** q, (-sv, sv, -sz, sz), n_nodes)
    return float(val ** (1.0 / q))


# ---------------------------------------------------------------------------
# exact solutions for the Gaussian initial state
# ---------------------------------------------------------------------------

def _denominator(t):
    return 3.0 + 12.0 * t + 4.0 * t ** 3 + 4.0 * t ** 4


def exact_original(t, v, x):
    """Solution in the original (v, x) variables."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    den = _denominator(t)
    num = (3.0 + 3.0 * t ** 2 + 4.0 * t ** 3) * v ** 2 + 6.0 * t * (1.0 + 2.0 * t) * v * x + 3.0 * (1.0 + 4.0 * t) * x ** 2
    return np.exp(-num / den) / np.sqrt(den / 3.0)


def exact_lagrangian(t, v, z):
    """Solution in the sheared (v, z = x + t v) variables."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    den = _denominator(t)
    num = (3.0 + 4.0 * t ** 3) * v ** 2 - 12.0 * t ** 2 * v * z + 3.0 * (1.0 + 4.0 * t) * z ** 2
    return np.exp(-num / den) / np.sqrt(den / 3.0)


def exact_selfsimilar(s, vt, zt):
    """Solution in self-similar variables, written directly in E = e^s.

    Expanded independently of exact_lagrangian; the change-of-variables
    identity between the two is asserted in the tests.
    """
    s = np.asarray(s, dtype=float)
    vt = np.asarray(vt, dtype=float)
    zt = np.asarray(zt, dtype=float)
    E = np.exp(s)
    den = 4.0 * E ** 4 - 12.0 * E ** 3 + 12.0 * E ** 2 + 8.0 * E - 9.0
    num = ((4.0 * E ** 4 - 12.0 * E ** 3 + 12.0 * E ** 2 - E) * vt ** 2
           + (-12.0 * E ** 4 + 24.0 * E ** 3 - 12.0 * E ** 2) * vt * zt
           + (12.0 * E ** 4 - 9.0 * E ** 3) * zt ** 2)
    return E ** 2 * SQRT3 * np.exp(-num / den) / np.sqrt(den)


def exact_solution(form: str, time, point):
    """Dispatch on the formulation tag; point is (a, b) or arrays thereof."""
    a, b = point
    if form == "original":
        return exact_original(time, a, b)
    if form == "lagrangian":
        return exact_lagrangian(time, a, b)
    if form == "selfsimilar":
        return exact_selfsimilar(time, a, b)
    raise ValueError(f"unknown formulation {form!r}")


def steady_state(vt, zt):
    """Long-time profile of the self-similar solution, an elliptic Gaussian
    of magnitude sqrt(3)/2; equals pi * G_1 pointwise."""
    vt = np.asarray(vt, dtype=float)
    zt = np.asarray(zt, dtype=float)
    return 0.5 * SQRT3 * np.exp(-vt ** 2 + 3.0 * vt * zt - 3.0 * zt ** 2)


def linf_envelope(s: float, l1_norm: float, linf_norm: float) -> float:
    """Upper bound for ||g~(s)||_inf from Young's inequality, s > 0:
    min of the kernel-driven branch and the pure-growth branch."""
    if s <= 0:
        raise ValueError("the envelope is defined for s > 0")
    if l1_norm < 0 or linf_norm < 0:
        raise ValueError("norms must be nonnegative")
    branch1 = SQRT3 / (2.0 * math.pi) * l1_norm / (1.0 - math.exp(-s)) ** 2
    branch2 = math.exp(2.0 * s) * linf_norm
    return min(branch1, branch2)


# ---------------------------------------------------------------------------
# time and variable maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormulationTime:
    """Physical time t and rescaled time s = log(1 + t), kept in exact sync."""

    t: float
    s: float

    @staticmethod
    def from_t(t: float) -> "FormulationTime":
        if t < 0:
            raise ValueError("t must be nonnegative")
        return FormulationTime(t, math.log1p(t))

    @staticmethod
    def from_s(s: float) -> "FormulationTime":
        if s < 0:
            raise ValueError("s must be nonnegative")
        return FormulationTime(math.expm1(s), s)


def map_variables(direction: str, time: float, point):
    """Coordinate maps between the three frames.

    Returns (mapped_time, mapped_point, amplitude_factor). The shear maps
    keep time and carry factor 1; the self-similar maps exchange t and s and
    carry the amplitude e^{2s} (multiply a Lagrangian-frame value by the
    factor to obtain the self-similar-frame value, divide for the inverse).
    """
    a, b = (np.asarray(c, dtype=float) for c in point)
    if direction == "to_lagrangian":
        return time, (a, b + time * a), 1.0
    if direction == "from_lagrangian":
        return time, (a, b - time * a), 1.0
    if direction == "to_selfsimilar":
        ft = FormulationTime.from_t(time)
        amp = math.exp(2.0 * ft.s)
        return ft.s, (a * math.exp(-0.5 * ft.s), b * math.exp(-1.5 * ft.s)), amp
    if direction == "from_selfsimilar":
        ft = FormulationTime.from_s(time)
        amp = math.exp(2.0 * ft.s)
        return ft.t, (a * math.exp(0.5 * ft.s), b * math.exp(1.5 * ft.s)), amp
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# truncated-domain constants
# ---------------------------------------------------------------------------

def poincare_constant(domain: RectDomain, t: float) -> float:
    """C(t) in the directional Poincare inequality on the rectangle."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    r = domain.side_z / domain.side_v * t
    return 1.0 if r <= 1.0 else r


def poincare_coefficient(domain: RectDomain, t: float) -> float:
    """The constant |O1| / (sqrt(2) C(t)) multiplying ||d_v g + t d_z g||."""
    return domain.side_v / (math.sqrt(2.0) * poincare_constant(domain, t))


def domain_condition(domain: RectDomain) -> bool:
    """Whether the truncated domain is large enough that the rescaled energy
    bound does not force decay to zero."""
    s1, s2 = domain.side_v, domain.side_z
    if s2 <= s1:
        return s1 > math.sqrt(2.0)
    return s2 > s1 ** 2 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# convolution oracle
# ---------------------------------------------------------------------------

def _tensor_gauss(f, box, m):
    a, b, c, d = box
    xg, wg = leggauss(m)
    xs = 0.5 * (b - a) * xg + 0.5 * (a + b)
    wx = 0.5 * (b - a) * wg
    ys = 0.5 * (d - c) * xg + 0.5 * (c + d)
    wy = 0.5 * (d - c) * wg
    V, Z = np.meshgrid(xs, ys, indexing="ij")
    return float(np.einsum("i,j,ij->", wx, wy, f(V, Z)))


def convolution_oracle(f0: GaussianSum, t: float, points, *, abs_tol: float = 1e-9,
                       start_nodes: int = 32, max_nodes: int = 4096) -> np.ndarray:
    """Reference solution values f(t, v, x) by quadrature of the kernel
    convolution, refined until two successive Gauss grids agree to abs_tol.

    The integration box covers +-8 standard deviations of the kernel along
    each axis, intersected with the effective support of the shifted initial
    data (outside the intersection the integrand is below exp(-64)).
    """
    if t <= 0:
        raise ValueError("the oracle is defined for t > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sv = 8.0 * math.sqrt(2.0 * t)
    sz = 8.0 * math.sqrt(2.0 * t ** 3 / 3.0)
    vlo0, vhi0, xlo0, xhi0 = f0.support_box()
    out = np.empty(len(pts))
    for k, (v, x) in enumerate(pts):
        z = x + v * t
        lo_v = max(-sv, v - vhi0)
        hi_v = min(sv, v - vlo0)
        lo_z = max(-sz, z - xhi0)
        hi_z = min(sz, z - xlo0)
        if lo_v >= hi_v or lo_z >= hi_z:
            out[k] = 0.0
            continue
        box = (lo_v, hi_v, lo_z, hi_z)
        integrand = lambda nu, ze: kernel_G(t, nu, ze) * f0(v - nu, z - ze)
        prev = _tensor_gauss(integrand, box, start_nodes)
        m = start_nodes
        converged = False
        while m < max_nodes:
            m *= 2
            cur = _tensor_gauss(integrand, box, m)
            if abs(cur - prev) < abs_tol:
                converged = True
                prev = cur
                break
            prev = cur
        if not converged:
            raise QuadratureError(f"oracle quadrature did not stabilize at t={t}, point=({v}, {x})")
        out[k] = prev
    return out


def oracle_sup_norm(f0: GaussianSum, t: float, half_width: float | None = None,
                    grid: int = 33) -> float:
    """Sampled sup of |f(t)| over a centered grid sized to the solution spread."""
    if half_width is None:
        sigma_v = math.sqrt(2.0 * t + 0.5)
        sigma_x = math.sqrt(2.0 * t ** 3 / 3.0 + t ** 2 / 2.0 + 0.5)
        vlo, vhi, xlo, xhi = f0.support_box(k=1.0)
        half_v = 2.0 * sigma_v + max(abs(vlo), abs(vhi))
        half_x = 2.0 * sigma_x + max(abs(xlo), abs(xhi))
    else:
        half_v = half_x = half_width
    vs = np.linspace(-half_v, half_v, grid)
    xs = np.linspace(-half_x, half_x, grid)
    V, X = np.meshgrid(vs, xs, indexing="ij")
    pts = np.column_stack([V.ravel(), X.ravel()])
    return float(np.abs(convolution_oracle(f0, t, pts)).max())
