"""Benchmark problems: Helmholtz with impedance data, Gaussian-bump and L-shape Poisson,
space-time viscous Burgers, plus manufactured in-span problems and a Burgers reference solver.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.special as sps
from scipy.interpolate import RegularGridInterpolator

from piranns.mesh import Domain

OPERATORS = ("poisson", "helmholtz", "burgers")


class SingularPointError(ValueError):
    pass


def bessel_j(order, x):
    """Bessel function of the first kind of order 0 or 1 for ``0 <= x <= 1000``."""
    if order not in (0, 1):
        raise ValueError(f"only orders 0 and 1 are supported, got {order}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be non-negative")
    if np.any(x > 1e3):
        raise ValueError("argument above 1000 is outside the supported range")
    out = sps.j0(x) if order == 0 else sps.j1(x)
    return float(out) if out.ndim == 0 else out


def _dirichlet(face):
    return "dirichlet"


@dataclass
class Problem:
    """A PDE with data on a :class:`Domain`.

    ``g(x, face)`` is the boundary datum and ``boundary_kind(face)`` one of
    ``"dirichlet"``, ``"impedance"`` or ``"none"``. Burgers problems use the
    first coordinate as time.
    """

    name: str
    operator: str
    domain: Domain
    f: object
    g: object
    g_grad: object = None
    boundary_kind: object = _dirichlet
    exact: object = None
    exact_grad: object = None
    k: float = 0.0
    nu: float = 0.0
    is_complex: bool = False
    beta_interior: float = 0.1
    beta_boundary: float = 0.1
    reference: object = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")

    @property
    def dim(self):
        return self.domain.dim

    @property
    def linear(self):
        return self.operator != "burgers"

    def operator_residual(self, val, grad, hess_diag):
        """``D[u]`` (without ``f``) from values, gradients (P, d) and pure second derivatives (P, d)."""
        if self.operator == "poisson":
            return -hess_diag.sum(axis=1)
        if self.operator == "helmholtz":
            return -hess_diag.sum(axis=1) - self.k ** 2 * val
        return grad[:, 0] + val * grad[:, 1] - self.nu * hess_diag[:, 1]


def _radius(x):
    return np.sqrt(np.sum(np.atleast_2d(x) ** 2, axis=1))


def helmholtz(k):
    """Impedance problem on [-0.5, 0.5]^2 with a radial Bessel-type exact solution."""
    k = float(k)
    c = (np.cos(k) + 1j * np.sin(k)) / (k * (bessel_j(0, k) + 1j * bessel_j(1, k)))

    def exact(x):
        r = _radius(x)
        return np.cos(k * r) / k - c * bessel_j(0, k * r)

    def radial_slope_over_r(r):
        # u'(r) / r, finite at r = 0
        out = np.empty(r.shape, dtype=complex)
        small = r < 1e-8
        rs = r[~small]
        out[~small] = (-np.sin(k * rs) + c * k * bessel_j(1, k * rs)) / rs
        out[small] = -k + c * k * k / 2.0
        return out

    def exact_grad(x):
        x = np.atleast_2d(x)
        return radial_slope_over_r(_radius(x))[:, None] * x

    def f(x):
        r = _radius(x)
        out = np.full(r.shape, k)
        pos = r > 1e-12
        out[pos] = np.sin(k * r[pos]) / r[pos]
        return out

    def g(x, face):
        x = np.atleast_2d(x)
        return exact_grad(x) @ face.normal - 1j * k * exact(x)

    return Problem(
        name=f"helmholtz_k{k:g}", operator="helmholtz",
        domain=Domain.box((-0.5, -0.5), (0.5, 0.5)),
        f=f, g=g, boundary_kind=lambda face: "impedance",
        exact=exact, exact_grad=exact_grad, k=k, is_complex=True,
    )


def gaussian_bump(dim=2, sharpness=1000.0, center=0.5):
    """Poisson problem on the unit cube with ``u = exp(-sharpness |x - center|^2)``."""
    a = float(sharpness)
    c = np.full(dim, center)

    def exact(x):
        x = np.atleast_2d(x)
        return np.exp(-a * np.sum((x - c) ** 2, axis=1))

    def exact_grad(x):
        x = np.atleast_2d(x)
        return -2.0 * a * (x - c) * exact(x)[:, None]

    def laplacian(x):
        x = np.atleast_2d(x)
        rho2 = np.sum((x - c) ** 2, axis=1)
        return exact(x) * (4.0 * a * a * rho2 - 2.0 * a * dim)

    def g_grad(x, face):
        return exact_grad(x)

    return Problem(
        name=f"bump{dim}d", operator="poisson", domain=Domain.unit_cube(dim),
        f=lambda x: -laplacian(x), g=lambda x, face: exact(x), g_grad=g_grad,
        exact=exact, exact_grad=exact_grad, info={"laplacian": laplacian, "center": c},
    )


LSHAPE_EXPONENT = 2.0 / 3.0


def lshape_angle(x):
    x = np.atleast_2d(x)
    theta = np.arctan2(x[:, 1], x[:, 0])
    return np.where(theta < 0, theta + 2.0 * np.pi, theta)


def lshape():
    """Laplace problem on the L-shape with the corner singularity ``r^(2/3) sin(2 theta / 3)``."""
    al = LSHAPE_EXPONENT

    def exact(x):
        return _radius(x) ** al * np.sin(al * lshape_angle(x))

    def exact_grad(x):
        x = np.atleast_2d(x)
        r = _radius(x)
        if np.any(r == 0.0):
            raise SingularPointError("gradient is singular at the re-entrant corner")
        th = lshape_angle(x)
        amp = al * r ** (al - 1.0)
        return np.stack([amp * np.sin((al - 1.0) * th), amp * np.cos((al - 1.0) * th)], axis=1)

    def g_grad(x, face):
        x = np.atleast_2d(x)
        out = np.zeros_like(x)
        ok = _radius(x) > 0
        out[ok] = exact_grad(x[ok])
        return out

    return Problem(
        name="lshape", operator="poisson", domain=Domain.lshape(),
        f=lambda x: np.zeros(np.atleast_2d(x).shape[0]), g=lambda x, face: exact(x),
        g_grad=g_grad, exact=exact, exact_grad=exact_grad,
    )


def burgers(nu=0.01 / np.pi, reference=None):
    """Space-time Burgers on (t, x) in [0, 1]^2 with ``u(0, x) = sin(2 pi x)`` and zero walls.

    ``reference`` (a :class:`ReferenceGrid`) supplies the error target when given.
    """

    def kind(face):
        if face.normal_axis == 0:
            return "dirichlet" if face.side < 0 else "none"
        return "dirichlet"

    def g(x, face):
        x = np.atleast_2d(x)
        if face.normal_axis == 0:
            return np.sin(2.0 * np.pi * x[:, 1])
        return np.zeros(x.shape[0])

    def g_grad(x, face):
        x = np.atleast_2d(x)
        out = np.zeros_like(x)
        if face.normal_axis == 0:
            out[:, 1] = 2.0 * np.pi * np.cos(2.0 * np.pi * x[:, 1])
        return out

    exact = None if reference is None else (lambda x: reference.interp(np.atleast_2d(x)[:, 0], np.atleast_2d(x)[:, 1]))
    return Problem(
        name="burgers", operator="burgers", domain=Domain.unit_cube(2),
        f=lambda x: np.zeros(np.atleast_2d(x).shape[0]), g=g, g_grad=g_grad, boundary_kind=kind,
        exact=exact, nu=float(nu), beta_interior=0.01, beta_boundary=0.0, reference=reference,
    )


def manufactured(fs, part, j, i, operator="poisson", k=0.0, nu=0.0, amplitude=1.0):
    """A problem whose exact solution is ``amplitude`` times basis function ``i`` of element ``j``.

    The target lies in the span of the features, so a consistent solve recovers it exactly.
    """
    d = part.dim

    def deriv(x, alpha):
        return amplitude * fs.basis(part, j, np.atleast_2d(x), alpha, check=False)[:, i]

    def unit(*axes):
        out = [0] * d
        for a in axes:
            out[a] += 1
        return tuple(out)

    def exact(x):
        return deriv(x, None)

    def exact_grad(x):
        return np.stack([deriv(x, unit(a)) for a in range(d)], axis=1)

    def hess_diag(x):
        return np.stack([deriv(x, unit(a, a)) for a in range(d)], axis=1)

    probe = Problem("probe", operator, part.domain, None, None, k=k, nu=nu)

    def f(x):
        return probe.operator_residual(exact(x), exact_grad(x), hess_diag(x))

    if operator == "helmholtz":
        def g(x, face):
            return exact_grad(x) @ face.normal - 1j * k * exact(x)
        kind = lambda face: "impedance"
    elif operator == "burgers":
        def g(x, face):
            return exact(x)
        kind = burgers().boundary_kind
    else:
        def g(x, face):
            return exact(x)
        kind = _dirichlet

    return Problem(
        name=f"manufactured_{operator}", operator=operator, domain=part.domain, f=f, g=g,
        g_grad=lambda x, face: exact_grad(x), boundary_kind=kind,
        exact=(lambda x: exact(x) + 0j) if operator == "helmholtz" else exact,
        exact_grad=exact_grad, k=k, nu=nu, is_complex=operator == "helmholtz",
        beta_interior=0.01 if operator == "burgers" else 0.1,
        beta_boundary=0.0 if operator == "burgers" else 0.1,
    )


@dataclass
class ReferenceGrid:
    """Values ``u[i, j]`` at times ``t[i]`` and positions ``x[j]``."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.t.size, self.x.size):
            raise ValueError(f"grid values have shape {self.u.shape}, expected {(self.t.size, self.x.size)}")
        for name, nodes in (("t", self.t), ("x", self.x)):
            if nodes.size < 2 or np.any(np.diff(nodes) <= 0):
                raise ValueError(f"{name} nodes must be strictly ascending with at least two entries")
        self._interp = RegularGridInterpolator((self.t, self.x), self.u, method="linear")

    def interp(self, t, x):
        """Bilinear interpolation inside the grid's hull."""
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        return self._interp(np.stack([t.ravel(), x.ravel()], axis=1)).reshape(t.shape)

    def subsample(self, nt=101, nx=201):
        """The grid restricted to about ``nt`` times and ``nx`` positions (end nodes kept)."""
        ti = np.unique(np.round(np.linspace(0, self.t.size - 1, nt)).astype(int))
        xi = np.unique(np.round(np.linspace(0, self.x.size - 1, nx)).astype(int))
        return ReferenceGrid(self.t[ti], self.x[xi], self.u[np.ix_(ti, xi)])

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([""] + [repr(float(v)) for v in self.x])
            for ti, row in zip(self.t, self.u):
                w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])


def load_reference_grid(path):
    """Read a grid CSV: empty corner cell, x nodes on row 1, t nodes in column 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3:
        raise ValueError(f"{path}: need a header row and at least two time rows")
    header = rows[0]
    if header[0].strip() != "":
        raise ValueError(f"{path}: top-left cell must be empty")
    width = len(header)
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: rows have unequal lengths")
    try:
        x = np.array([float(v) for v in header[1:]])
        t = np.array([float(r[0]) for r in rows[1:]])
        u = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as err:
        raise ValueError(f"{path}: {err}") from None
    return ReferenceGrid(t, x, u)


def burgers_fd_oracle(nu=0.01 / np.pi, nx=512, nt=None, t_final=1.0, cfl=0.2):
    """Finite-difference reference for ``u_t + u u_x = nu u_xx`` with ``u(0, x) = sin(2 pi x)``.

    Conservative central advection advanced with second-order Adams-Bashforth,
    Crank-Nicolson diffusion, homogeneous Dirichlet walls on [0, 1]. ``nt``
    defaults to the step count giving Courant number ``cfl``.
    """
    if nx < 64:
        raise ValueError("nx must be at least 64")
    dx = 1.0 / nx
    x = np.linspace(0.0, 1.0, nx + 1)
    u = np.sin(2.0 * np.pi * x)
    u[0] = u[-1] = 0.0
    umax = max(np.max(np.abs(u)), 1e-12)
    if nt is None:
        nt = int(np.ceil(t_final * umax / (cfl * dx)))
    dt = t_final / nt
    if umax * dt / dx > 0.5:
        raise ValueError(f"Courant number {umax * dt / dx:.3f} exceeds 0.5; increase nt")
    t = np.linspace(0.0, t_final, nt + 1)
    out = np.empty((nt + 1, nx + 1))
    out[0] = u
    mu = nu * dt / dx ** 2
    m = nx - 1
    # banded (I - dt/2 nu D2) on interior nodes
    ab = np.zeros((3, m))
    ab[0, 1:] = -mu / 2.0
    ab[1, :] = 1.0 + mu
    ab[2, :-1] = -mu / 2.0

    def advection(v):
        flux = 0.5 * v * v
        return -(flux[2:] - flux[:-2]) / (2.0 * dx)

    prev = None
    for n in range(nt):
        ui = u[1:-1]
        lap = u[2:] - 2.0 * ui + u[:-2]
        adv = advection(u)
        explicit = adv if prev is None else 1.5 * adv - 0.5 * prev
        rhs = ui + 0.5 * mu * lap + dt * explicit
        prev = adv
        new = np.zeros_like(u)
        new[1:-1] = sla.solve_banded((1, 1), ab, rhs, check_finite=False)
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"Burgers reference blew up at step {n + 1}")
        u = new
        out[n + 1] = u
    return ReferenceGrid(t, x, out)
