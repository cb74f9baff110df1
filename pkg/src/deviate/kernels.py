"""Parametric kernel families with analytic derivatives.

Each family supplies the density f(x | mu, sigma), its first derivatives with
respect to mu and sigma, the Hessian in mu, and exact sampling.  The sigma
derivative uses the symmetrized convention: the returned matrix holds the
entrywise partial derivatives of the density extended to unconstrained square
matrices, evaluated at the symmetric point.  Under this convention the
Gaussian family satisfies the heat identity

    d^2 f / dmu dmu^T  =  2 * df/dsigma

exactly, which heavy-tailed families do not.  The directional derivative of f
along a symmetric perturbation E of sigma is sum(grad_sigma * E), so an
off-diagonal entry contributes through both of its positions.

All densities are evaluated in log space; pdf() exponentiates at the end.
Points are supplied as (n,) arrays when dim == 1 or (n, d) arrays otherwise;
a bare scalar or a single length-d vector is also accepted.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError
from .util import as_generator

EIG_FLOOR = 1e-8
SYM_TOL = 1e-12
PDF_FLOOR = 1e-300


def _as_matrix(sigma) -> np.ndarray:
    arr = np.asarray(sigma, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if arr.size != 1:
            raise ValueError("sigma must be a scalar or a square matrix")
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"sigma must be square, got shape {arr.shape}")
    return arr


@dataclass
class ParamPoint:
    """A location-scale parameter pair (mu, sigma).

    mu is stored as a (d,) vector and sigma as a (d, d) symmetric positive
    definite matrix; scalars are accepted for d = 1.  Construction validates
    symmetry (tolerance 1e-12) and a smallest-eigenvalue floor of 1e-8.
    """

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).ravel()
        self.sigma = _as_matrix(self.sigma)
        d = self.mu.size
        if self.sigma.shape != (d, d):
            raise ValueError(
                f"mu has dim {d} but sigma has shape {self.sigma.shape}"
            )
        if not np.all(np.isfinite(self.mu)) or not np.all(np.isfinite(self.sigma)):
            raise DomainError("parameters must be finite")
        scale = max(1.0, float(np.abs(self.sigma).max()))
        asym = float(np.abs(self.sigma - self.sigma.T).max())
        if asym > SYM_TOL * scale:
            raise DomainError(f"sigma is not symmetric (max asymmetry {asym:.3e})")
        self.sigma = 0.5 * (self.sigma + self.sigma.T)
        lo = float(np.linalg.eigvalsh(self.sigma).min())
        if lo < EIG_FLOOR:
            raise DomainError(
                f"sigma smallest eigenvalue {lo:.3e} is below the floor {EIG_FLOOR:.0e}"
            )

    @property
    def dim(self) -> int:
        return self.mu.size

    def close_to(self, other: "ParamPoint", tol: float = 0.0) -> bool:
        return (
            self.dim == other.dim
            and float(np.abs(self.mu - other.mu).max(initial=0.0)) <= tol
            and float(np.abs(self.sigma - other.sigma).max(initial=0.0)) <= tol
        )


@dataclass
class CompactDomain:
    """Box bounds for mu plus eigenvalue bounds for sigma.

    Encodes the compact feasible set: mixing weights live in [0, 1], mu in an
    axis-aligned box, and sigma in the set of symmetric matrices whose
    eigenvalues lie in [eig_lo, eig_hi].
    """

    mu_box: np.ndarray  # (d, 2) rows of (lo, hi)
    eig_lo: float = 1e-6
    eig_hi: float = 1e6

    def __post_init__(self):
        self.mu_box = np.asarray(self.mu_box, dtype=float).reshape(-1, 2)
        if np.any(self.mu_box[:, 0] >= self.mu_box[:, 1]):
            raise ValueError("mu_box rows must be (lo, hi) with lo < hi")
        if not (0.0 < self.eig_lo < self.eig_hi):
            raise ValueError("need 0 < eig_lo < eig_hi")

    @classmethod
    def default(cls, dim: int, half_width: float = 100.0) -> "CompactDomain":
        box = np.tile([-half_width, half_width], (dim, 1))
        return cls(mu_box=box)

    @property
    def dim(self) -> int:
        return self.mu_box.shape[0]

    def contains(self, point: ParamPoint, slack: float = 0.0) -> bool:
        if point.dim != self.dim:
            raise ValueError("dimension mismatch between point and domain")
        in_box = np.all(point.mu >= self.mu_box[:, 0] - slack) and np.all(
            point.mu <= self.mu_box[:, 1] + slack
        )
        eigs = np.linalg.eigvalsh(point.sigma)
        return bool(
            in_box
            and eigs.min() >= self.eig_lo - slack
            and eigs.max() <= self.eig_hi + slack
        )

    def project(self, mu, sigma) -> tuple[np.ndarray, np.ndarray]:
        """Clip mu into the box and sigma eigenvalues into [eig_lo, eig_hi]."""
        mu = np.clip(np.atleast_1d(np.asarray(mu, dtype=float)), self.mu_box[:, 0], self.mu_box[:, 1])
        sigma = _as_matrix(sigma)
        sigma = 0.5 * (sigma + sigma.T)
        vals, vecs = np.linalg.eigh(sigma)
        lo = max(self.eig_lo, EIG_FLOOR)
        clipped = np.clip(vals, lo, self.eig_hi)
        if not np.array_equal(clipped, vals):
            sigma = (vecs * clipped) @ vecs.T
            sigma = 0.5 * (sigma + sigma.T)
        return mu, sigma


class _Prepared:
    """Cholesky factorization and derived quantities for one sigma."""

    def __init__(self, sigma: np.ndarray):
        try:
            self.chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise DomainError("sigma is not positive definite") from exc
        self.inv = np.linalg.inv(sigma)
        self.logdet = 2.0 * float(np.log(np.diag(self.chol)).sum())


class KernelFamily(abc.ABC):
    """Common interface of the parametric families."""

    tag: str

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)

    @property
    def free_sigma(self) -> bool:
        """Whether sigma is a free parameter of the family."""
        return True

    def validate_point(self, point: ParamPoint) -> ParamPoint:
        if point.dim != self.dim:
            raise ValueError(
                f"point has dim {point.dim}, family has dim {self.dim}"
            )
        return point

    def point(self, mu, sigma=None) -> ParamPoint:
        """Build a validated ParamPoint for this family."""
        if sigma is None:
            raise ValueError(f"family {self.tag} requires an explicit sigma")
        return self.validate_point(ParamPoint(mu, sigma))

    def _rows(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if self.dim == 1 else arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ValueError(f"data shape {np.shape(x)} does not match dim {self.dim}")
        return arr

    @abc.abstractmethod
    def log_pdf(self, x, point: ParamPoint) -> np.ndarray:
        """Log density at each row of x, shape (n,)."""

    def pdf(self, x, point: ParamPoint) -> np.ndarray:
        return np.exp(self.log_pdf(x, point))

    @abc.abstractmethod
    def grad_params(self, x, point: ParamPoint) -> tuple[np.ndarray, np.ndarray]:
        """Density-scale gradients (df/dmu, df/dsigma), shapes (n, d) and (n, d, d)."""

    @abc.abstractmethod
    def hessian_mu(self, x, point: ParamPoint) -> np.ndarray:
        """Density-scale Hessian d^2 f / dmu dmu^T, shape (n, d, d)."""

    @abc.abstractmethod
    def sample(self, point: ParamPoint, n: int, rng=None) -> np.ndarray:
        """Draw n rows, shape (n, d)."""

    def second_derivs_1d(self, x, point: ParamPoint):
        """All distinct second derivatives for dim == 1.

        Returns (f_mumu, f_musigma, f_sigmasigma) as (n,) arrays, where sigma
        denotes the scalar variance parameter.
        """
        raise NotImplementedError(
            f"analytic second derivatives are only available in 1d for {self.tag}"
        )


class GaussianFamily(KernelFamily):
    """Gaussian location-scale family N(mu, sigma)."""

    tag = "gaussian_loc_scale"

    def _core(self, x, point):
        p = self.validate_point(point)
        rows = self._rows(x)
        prep = _Prepared(p.sigma)
        z = rows - p.mu
        a = z @ prep.inv  # (n, d) rows of sigma^{-1} (x - mu)
        u = np.einsum("ni,ni->n", z, a)
        log_f = -0.5 * (self.dim * np.log(2.0 * np.pi) + prep.logdet + u)
        return prep, a, log_f

    def log_pdf(self, x, point):
        return self._core(x, point)[2]

    def grad_params(self, x, point):
        prep, a, log_f = self._core(x, point)
        f = np.exp(log_f)
        outer = np.einsum("ni,nj->nij", a, a)
        gmu = f[:, None] * a
        gsigma = 0.5 * f[:, None, None] * (outer - prep.inv)
        return gmu, gsigma

    def hessian_mu(self, x, point):
        prep, a, log_f = self._core(x, point)
        f = np.exp(log_f)
        outer = np.einsum("ni,nj->nij", a, a)
        return f[:, None, None] * (outer - prep.inv)

    def sample(self, point, n, rng=None):
        p = self.validate_point(point)
        rng = as_generator(rng)
        z = rng.standard_normal((int(n), self.dim))
        return p.mu + z @ np.linalg.cholesky(p.sigma).T

    def second_derivs_1d(self, x, point):
        if self.dim != 1:
            return super().second_derivs_1d(x, point)
        p = self.validate_point(point)
        s = float(p.sigma[0, 0])
        z = (self._rows(x)[:, 0]) - float(p.mu[0])
        f = np.exp(self.log_pdf(x, p))
        f_mumu = f * (z**2 / s**2 - 1.0 / s)
        f_mus = f * (z**3 / (2.0 * s**3) - 3.0 * z / (2.0 * s**2))
        f_ss = f * (z**4 / (4.0 * s**4) - 3.0 * z**2 / (2.0 * s**3) + 3.0 / (4.0 * s**2))
        return f_mumu, f_mus, f_ss


class GaussianFixedScaleFamily(GaussianFamily):
    """Gaussian location family with sigma frozen at a known matrix."""

    tag = "gaussian_location_fixed_sigma"

    def __init__(self, dim: int, sigma_fixed):
        super().__init__(dim)
        self.sigma_fixed = _as_matrix(sigma_fixed)
        if self.sigma_fixed.shape != (self.dim, self.dim):
            raise ValueError("sigma_fixed shape does not match dim")
        ParamPoint(np.zeros(self.dim), self.sigma_fixed)  # validates PD + symmetry

    @property
    def free_sigma(self) -> bool:
        return False

    def validate_point(self, point: ParamPoint) -> ParamPoint:
        point = super().validate_point(point)
        if float(np.abs(point.sigma - self.sigma_fixed).max()) > 1e-9:
            raise DomainError("point.sigma differs from the family's fixed sigma")
        return point

    def point(self, mu, sigma=None) -> ParamPoint:
        if sigma is None:
            sigma = self.sigma_fixed
        return self.validate_point(ParamPoint(mu, sigma))


class StudentTFamily(KernelFamily):
    """Multivariate Student-t location-scale family with fixed odd dof > 1."""

    tag = "student_t_fixed_dof"
    _allow_any_dof = False

    def __init__(self, dim: int, dof: int):
        super().__init__(dim)
        if not self._allow_any_dof:
            if int(dof) != dof or dof <= 1 or int(dof) % 2 == 0:
                raise ValueError("dof must be an odd integer greater than 1")
        self.dof = int(dof)

    def _core(self, x, point):
        p = self.validate_point(point)
        rows = self._rows(x)
        prep = _Prepared(p.sigma)
        z = rows - p.mu
        a = z @ prep.inv
        u = np.einsum("ni,ni->n", z, a)
        nu, d = float(self.dof), self.dim
        log_c = gammaln((nu + d) / 2.0) - gammaln(nu / 2.0) - (d / 2.0) * np.log(nu * np.pi)
        log_f = log_c - 0.5 * prep.logdet - ((nu + d) / 2.0) * np.log1p(u / nu)
        return prep, a, u, log_f

    def log_pdf(self, x, point):
        return self._core(x, point)[3]

    def grad_params(self, x, point):
        prep, a, u, log_f = self._core(x, point)
        nu, d = float(self.dof), self.dim
        f = np.exp(log_f)
        w = (nu + d) / (nu + u)
        outer = np.einsum("ni,nj->nij", a, a)
        gmu = (f * w)[:, None] * a
        gsigma = 0.5 * f[:, None, None] * (w[:, None, None] * outer - prep.inv)
        return gmu, gsigma

    def hessian_mu(self, x, point):
        prep, a, u, log_f = self._core(x, point)
        nu, d = float(self.dof), self.dim
        f = np.exp(log_f)
        w = (nu + d) / (nu + u)
        coef = w**2 + 2.0 * w / (nu + u)
        outer = np.einsum("ni,nj->nij", a, a)
        return f[:, None, None] * (coef[:, None, None] * outer - w[:, None, None] * prep.inv)

    def sample(self, point, n, rng=None):
        p = self.validate_point(point)
        rng = as_generator(rng)
        n = int(n)
        z = rng.standard_normal((n, self.dim))
        g = rng.chisquare(self.dof, size=n)
        scale = np.sqrt(self.dof / g)
        return p.mu + (z * scale[:, None]) @ np.linalg.cholesky(p.sigma).T

    def second_derivs_1d(self, x, point):
        if self.dim != 1:
            return super().second_derivs_1d(x, point)
        p = self.validate_point(point)
        s = float(p.sigma[0, 0])
        nu = float(self.dof)
        z = (self._rows(x)[:, 0]) - float(p.mu[0])
        u = z**2 / s
        w = (nu + 1.0) / (nu + u)
        f = np.exp(self.log_pdf(x, p))
        f_mumu = f * ((w**2 + 2.0 * w / (nu + u)) * (z / s) ** 2 - w / s)
        f_mus = (f * w * z / s**2) * (0.5 * w * u + u / (nu + u) - 1.5)
        g = (w * u - 1.0) / s
        dg = (w * u**2 / (nu + u) - 2.0 * w * u + 1.0) / s**2
        f_ss = 0.25 * f * g**2 + 0.5 * f * dg
        return f_mumu, f_mus, f_ss


class CauchyFamily(StudentTFamily):
    """Cauchy location-scale family (Student-t with one degree of freedom)."""

    tag = "cauchy_standard"
    _allow_any_dof = True

    def __init__(self, dim: int = 1):
        super().__init__(dim, dof=1)

    def standard_point(self) -> ParamPoint:
        return self.point(np.zeros(self.dim), np.eye(self.dim))


@dataclass
class FrozenDensity:
    """A kernel family evaluated at one fixed parameter point."""

    family: KernelFamily
    point: ParamPoint

    def __post_init__(self):
        self.point = self.family.validate_point(self.point)

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def tag(self) -> str:
        return self.family.tag

    def log_pdf(self, x) -> np.ndarray:
        return self.family.log_pdf(x, self.point)

    def pdf(self, x) -> np.ndarray:
        return self.family.pdf(x, self.point)

    def sample(self, n: int, rng=None) -> np.ndarray:
        return self.family.sample(self.point, n, rng)


def standard_cauchy_density(dim: int = 1) -> FrozenDensity:
    fam = CauchyFamily(dim)
    return FrozenDensity(fam, fam.standard_point())


def gaussian_density(mu, sigma) -> FrozenDensity:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    fam = GaussianFamily(mu.size)
    return FrozenDensity(fam, fam.point(mu, sigma))


def sigma_grad_to_logchol(gsigma: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Push a symmetric sigma gradient to the log-Cholesky parameterization.

    With sigma = L L^T, phi(L) differentiates to dphi/dL = 2 * tril(G @ L) for
    a symmetric gradient G.  Diagonal entries are then scaled by L_ii, which
    is the chain rule for parameterizing the diagonal by its logarithm.
    """
    grad_l = 2.0 * np.tril(gsigma @ chol)
    grad_l[np.diag_indices_from(grad_l)] *= np.diag(chol)
    return grad_l
