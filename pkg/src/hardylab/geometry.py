"""Model domains D = {rho < 0} in C^n (n = 1, 2) given by quadric defining functions.

Every shipped family has the form

    rho(z) = sum_j alpha_j |z_j|^2 + beta_j Re(z_j^2) - 1,

so the complex gradient is d rho/dz_j = alpha_j conj(z_j) + beta_j z_j, the
holomorphic Hessian is diag(beta) and the Levi form is diag(alpha).  The
Wirtinger convention is d/dz = (d/dx - i d/dy)/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("ball", "complex-ellipsoid", "real-ellipsoid", "perturbed-ball")


class GeometryError(ValueError):
    """Invalid domain parameters or a point the geometry cannot handle."""


class OutOfCollarError(GeometryError):
    """Point lies outside the closed domain and outside the collar."""


class ConsistencyError(RuntimeError):
    """Numerical data violate an internal identity (e.g. a non-Hermitian Levi form)."""


def to_complex(x):
    """Map real coordinates (..., 2n) ordered (x1, y1, x2, y2, ...) to complex (..., n)."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z):
    """Inverse of :func:`to_complex`."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


@dataclass(frozen=True)
class GeometryRecord:
    rho: np.ndarray
    grad: np.ndarray        # real gradient, (..., 2n)
    drho: np.ndarray        # complex gradient d rho/dz_j, (..., n)
    hessian: np.ndarray     # d^2 rho/dz_j dz_k, (..., n, n)
    levi: np.ndarray        # d^2 rho/dz_j dzbar_k, (..., n, n)


@dataclass(frozen=True)
class DefiningFunction:
    """Immutable quadric defining function.

    Parameters follow the harness config: ``a`` holds semi-axes (complex
    ellipsoid uses |z_j|/a_j, the real ellipsoid uses x_j/a_j and y_j/b_j) and
    ``eps`` is the amplitude of the Re(z_1^2) perturbation of the ball.
    """

    kind: str
    n: int = 2
    a: tuple = ()
    b: tuple = ()
    eps: float = 0.0
    collar: float = None        # default max(0.2, t_max of the family)
    alpha: np.ndarray = field(init=False, repr=False, compare=False)
    beta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.n not in (1, 2):
            raise GeometryError("complex dimension must be 1 or 2")
        if self.collar is None:
            object.__setattr__(self, "collar", max(0.2, 0.25 if self.kind == "ball" else 0.1))
        if not self.collar > 0:
            raise GeometryError("collar half-width must be positive")
        n = self.n
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if self.kind == "ball":
            alpha, beta = np.ones(n), np.zeros(n)
        elif self.kind == "complex-ellipsoid":
            if a.shape != (n,) or np.any(a <= 0):
                raise GeometryError(f"complex ellipsoid needs {n} positive semi-axes a")
            alpha, beta = 1.0 / a**2, np.zeros(n)
        elif self.kind == "real-ellipsoid":
            if a.shape != (n,) or b.shape != (n,) or np.any(a <= 0) or np.any(b <= 0):
                raise GeometryError(f"real ellipsoid needs {n} positive semi-axes a and b")
            alpha = 0.5 * (1.0 / a**2 + 1.0 / b**2)
            beta = 0.5 * (1.0 / a**2 - 1.0 / b**2)
        else:
            if abs(self.eps) > 0.2:
                raise GeometryError("perturbation amplitude must satisfy |eps| <= 0.2")
            alpha, beta = np.ones(n), np.zeros(n)
            beta[0] = self.eps
        object.__setattr__(self, "a", tuple(a.tolist()))
        object.__setattr__(self, "b", tuple(b.tolist()))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        alpha.setflags(write=False)
        beta.setflags(write=False)

    # -- pointwise data, complex coordinates z of shape (..., n) ---------------
    def rho(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sum(self.alpha * np.abs(z) ** 2 + self.beta * (z * z).real, axis=-1) - 1.0

    def drho(self, z):
        z = np.asarray(z, dtype=complex)
        return self.alpha * np.conj(z) + self.beta * z

    def grad(self, z):
        """Real gradient (..., 2n): d rho/dx_j = 2 Re rho_j, d rho/dy_j = -2 Im rho_j."""
        return to_real(2.0 * np.conj(self.drho(z)))

    def grad_norm(self, z):
        return 2.0 * np.linalg.norm(self.drho(z), axis=-1)

    def normal(self, z):
        """Outward unit normal as a complex vector 2 conj(d rho)/|grad rho|."""
        v = np.conj(self.drho(z))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    @property
    def hessian(self):
        return np.diag(self.beta).astype(complex)

    @property
    def levi(self):
        return np.diag(self.alpha).astype(complex)

    def quad(self, v):
        """Second-order part of rho along v: rho(c + tau v) = rho(c) + 2 tau Re<d rho(c), v> + tau^2 quad(v)."""
        v = np.asarray(v, dtype=complex)
        return np.sum(self.alpha * np.abs(v) ** 2 + self.beta * (v * v).real, axis=-1)

    def levi_quadratic(self, u):
        """Levi form L(u) = sum alpha_j |u_j|^2."""
        return np.sum(self.alpha * np.abs(u) ** 2, axis=-1)

    def is_torus_invariant(self):
        """True when rho depends only on |z_1|, ..., |z_n|."""
        return not np.any(self.beta)

    def ray_hit(self, c0, theta, tol=1e-15, maxiter=8):
        """Solve rho(c0 + R theta) = 0 for R > 0, c0 inside D.

        rho is exactly quadratic along the ray, so the positive root is taken in
        cancellation-free form and then polished by Newton steps.
        """
        c0 = np.asarray(c0, dtype=complex)
        theta = np.asarray(theta, dtype=complex)
        c = self.rho(c0)
        if np.any(c >= 0):
            raise GeometryError("ray centre must lie inside the domain")
        a = self.quad(theta)
        b = 2.0 * np.sum(self.drho(c0) * theta, axis=-1).real
        disc = np.sqrt(b * b - 4.0 * a * c)
        R = np.where(b >= 0, -2.0 * c / (b + disc), (disc - b) / (2.0 * a))
        R = np.broadcast_to(R, theta.shape[:-1]).copy()
        for _ in range(maxiter):
            p = c0 + R[..., None] * theta
            f = self.rho(p)
            df = 2.0 * np.sum(self.drho(p) * theta, axis=-1).real
            step = f / df
            R -= step
            if np.all(np.abs(step) <= tol * np.maximum(np.abs(R), 1.0)):
                break
        else:
            bad = int(np.argmax(np.abs(step)))
            raise GeometryError(f"radial Newton projection did not converge at index {bad}")
        if np.any(R <= 0):
            raise GeometryError("radial projection produced a non-positive radius")
        return R


def eval_geometry(df: DefiningFunction, x, complex_input=False) -> GeometryRecord:
    """All derivative data of rho at x (real (..., 2n) or, if complex_input, complex (..., n))."""
    z = np.asarray(x, dtype=complex) if complex_input else to_complex(x)
    if z.shape[-1] != df.n:
        raise GeometryError(f"expected points in C^{df.n}")
    rho = df.rho(z)
    if np.any(rho > df.collar):
        raise OutOfCollarError(f"point outside the closed domain and the collar (rho = {np.max(rho):.3g})")
    drho = df.drho(z)
    shape = z.shape[:-1] + (df.n, df.n)
    return GeometryRecord(
        rho=rho,
        grad=to_real(2.0 * np.conj(drho)),
        drho=drho,
        hessian=np.broadcast_to(df.hessian, shape),
        levi=np.broadcast_to(df.levi, shape),
    )


def min_levi_eigenvalue(df: DefiningFunction, sample, complex_input=False, tol=1e-12):
    """Smallest Levi-form eigenvalue over a nonempty sample of collar points."""
    rec = eval_geometry(df, sample, complex_input=complex_input)
    L = rec.levi.reshape(-1, df.n, df.n)
    if L.shape[0] == 0:
        raise GeometryError("empty sample")
    herm = np.max(np.abs(L - np.conj(np.swapaxes(L, -1, -2))))
    if herm > tol:
        raise ConsistencyError(f"Levi form not Hermitian (defect {herm:.3g})")
    return float(np.min(np.linalg.eigvalsh(L)))


@dataclass(frozen=True)
class ShiftedDomain:
    """D_t = {rho + t < 0}; t > 0 shrinks the domain, t < 0 enlarges it."""

    base: DefiningFunction
    t: float

    def __post_init__(self):
        if abs(self.t) > t_max(self.base):
            raise GeometryError(f"|t| exceeds t_max = {t_max(self.base)} for {self.base.kind}")

    def rho(self, z):
        return self.base.rho(z) + self.t

    def check_nesting(self, boundary_points):
        """Verify the nesting of closures on sampled points of bD (returns bool)."""
        r = self.rho(boundary_points)
        if self.t > 0:
            return bool(np.all(r > 0))
        if self.t < 0:
            return bool(np.all(r < 0))
        return True


def t_max(df: DefiningFunction) -> float:
    """Largest admissible |t| for shifted domains and flows of this family."""
    return 0.25 if df.kind == "ball" else 0.1


def from_spec(spec: dict) -> DefiningFunction:
    """Build a DefiningFunction from a harness domain dict."""
    spec = dict(spec)
    kind = spec.pop("kind")
    return DefiningFunction(kind=kind, **spec)


def leray_levi_coefficients(df: DefiningFunction, w):
    """Per-point coefficients c_j with (2 pi i)^(-n) j*(dz_j ^ (dbar d rho)^(n-1)) = c_j dsigma.

    Uses d rho ^ xi = h vol, so that the pulled-back density of xi against
    dsigma (outward normal first) is h/|grad rho|.  The Leray-Levi density is
    sum_j rho_j(w) c_j(w).
    """
    w = np.asarray(w, dtype=complex)
    d = df.drho(w)
    gn = 2.0 * np.linalg.norm(d, axis=-1)
    cd = np.conj(d)
    if df.n == 1:
        return cd / (np.pi * gn)[..., None]
    L = df.levi
    c = np.empty_like(d)
    c[..., 0] = L[1, 1] * cd[..., 0] - L[1, 0] * cd[..., 1]
    c[..., 1] = L[0, 0] * cd[..., 1] - L[0, 1] * cd[..., 0]
    return c / (np.pi**2 * gn)[..., None]


def leray_levi_density(df: DefiningFunction, w):
    """Density of the Leray-Levi measure against dsigma at boundary points w."""
    w = np.asarray(w, dtype=complex)
    return np.sum(df.drho(w) * leray_levi_coefficients(df, w), axis=-1).real
