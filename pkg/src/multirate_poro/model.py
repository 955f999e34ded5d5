"""Physical parameters and the (p, q) <-> (xi, eta) change of variables.

With q = div u the reformulated unknowns are

    eta = c0 p + alpha q,    xi = alpha p - lambda q,

and the inverse map is p = k1 xi + k2 eta, q = k1 eta - k3 xi where
k1, k2, k3 = (alpha, lambda, c0) / (alpha^2 + lambda c0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import permeability_tensor
from .errors import InvalidArgumentError

log = logging.getLogger(__name__)


def derive_lame(E: float, nu: float) -> tuple[float, float]:
    """Lame constants (lambda, mu) from Young's modulus and Poisson ratio."""
    if not E > 0:
        raise InvalidArgumentError(f"Young's modulus must be positive, got {E}")
    if not 0 < nu < 0.5:
        raise InvalidArgumentError(f"Poisson ratio must lie in (0, 0.5), got {nu}")
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return lam, mu


def lame_to_young(lam: float, mu: float) -> tuple[float, float]:
    """Inverse of :func:`derive_lame`."""
    E = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    return E, nu


def derive_kappas(alpha: float, lam: float, c0: float) -> tuple[float, float, float]:
    if alpha <= 0 or lam <= 0 or c0 <= 0:
        raise InvalidArgumentError("alpha, lambda and c0 must be positive")
    d = alpha**2 + lam * c0
    return alpha / d, lam / d, c0 / d


@dataclass(frozen=True)
class PhysicalParams:
    E: float
    nu: float
    c0: float
    alpha: float
    K: object = 1.0  # scalar or 2x2 tensor
    mu_f: float = 1.0
    rho_f: float = 0.0
    g: tuple = (0.0, 0.0)
    lam: float = field(init=False)
    mu: float = field(init=False)
    B: float = field(init=False)
    k1: float = field(init=False)
    k2: float = field(init=False)
    k3: float = field(init=False)

    def __post_init__(self):
        if not self.c0 > 0:
            raise InvalidArgumentError("c0 must be positive: c0 = 0 makes kappa_3 vanish and the xi block singular")
        if not 0 < self.alpha <= 1:
            raise InvalidArgumentError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.mu_f > 0:
            raise InvalidArgumentError("fluid viscosity must be positive")
        permeability_tensor(self.K)
        lam, mu = derive_lame(self.E, self.nu)
        k1, k2, k3 = derive_kappas(self.alpha, lam, self.c0)
        for name, val in dict(lam=lam, mu=mu, B=lam + 2.0 * mu / 3.0, k1=k1, k2=k2, k3=k3).items():
            object.__setattr__(self, name, val)
        log.debug("params: lambda=%g mu=%g B=%g k=(%g, %g, %g)", lam, mu, self.B, k1, k2, k3)

    @property
    def K_tensor(self) -> np.ndarray:
        return permeability_tensor(self.K)

    @property
    def K_max(self) -> float:
        return float(np.linalg.eigvalsh(self.K_tensor).max())

    def with_overrides(self, **kw) -> "PhysicalParams":
        return replace(self, **kw)


def to_reformulated(p, q, params: PhysicalParams):
    """(p, q) -> (xi, eta)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    xi = params.alpha * p - params.lam * q
    eta = params.c0 * p + params.alpha * q
    return xi, eta


def recover_pq(xi, eta, params: PhysicalParams):
    """(xi, eta) -> (p, q)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return params.k1 * xi + params.k2 * eta, params.k1 * eta - params.k3 * xi
