"""Anisotropic scaling, the Cayley-type map and the rescaled domains Ω̂_δ.

Ω̂_δ is the image of a base domain under w = Φ(L_δ(z)).  It is never built
as an image set; membership is always decided by pulling w back to z.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import domains
from .domains import BoundingBox, DomainSpec, PolyhedralSpec, as_batch, as_point
from .errors import ConfigError, EmptyDomainError, PoleError


@dataclass(frozen=True)
class ScalingConfig:
    n: int
    m: int
    delta: float

    def __post_init__(self):
        if not 2 <= self.m <= self.n:
            raise ConfigError(f"need 2 <= m <= n, got n={self.n}, m={self.m}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def weights(self) -> np.ndarray:
        d = self.delta
        w = np.full(self.n, d ** -1.0)
        w[0] = d ** -2.0
        w[1:self.m] = d ** -1.5
        return w


def scale(config: ScalingConfig, z) -> np.ndarray:
    """L_δ: coordinatewise multiplication by the weights."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != config.n:
        raise ConfigError("dimension mismatch")
    return z * config.weights


def unscale(config: ScalingConfig, zt) -> np.ndarray:
    zt = np.asarray(zt, dtype=complex)
    if zt.shape[-1] != config.n:
        raise ConfigError("dimension mismatch")
    return zt / config.weights


def _cayley(m: int, Zt: np.ndarray) -> np.ndarray:
    W = np.empty_like(Zt)
    den = Zt[:, :m] + 1j
    W[:, :m] = (Zt[:, :m] - 1j) / den
    W[:, m:] = 2 * Zt[:, m:] / den[:, :1]
    return W


def _cayley_inverse(m: int, W: np.ndarray) -> np.ndarray:
    Zt = np.empty_like(W)
    den = 1 - W[:, :m]
    Zt[:, :m] = 1j * (1 + W[:, :m]) / den
    Zt[:, m:] = 1j * W[:, m:] / den[:, :1]
    return Zt


def cayley(config: ScalingConfig, zt) -> np.ndarray:
    """Φ: Möbius in the first m coordinates, 2 z̃_j / (z̃_1 + i) in the rest."""
    single = np.ndim(zt) == 1
    Zt = as_batch(zt, config.n)
    if np.any(Zt[:, :config.m] == -1j):
        raise PoleError("z̃_j = -i for some j <= m")
    W = _cayley(config.m, Zt)
    return W[0] if single else W


def cayley_inverse(config: ScalingConfig, w) -> np.ndarray:
    single = np.ndim(w) == 1
    W = as_batch(w, config.n)
    if np.any(W[:, :config.m] == 1):
        raise PoleError("w_j = 1 for some j <= m")
    Zt = _cayley_inverse(config.m, W)
    return Zt[0] if single else Zt


def xi_delta(config: ScalingConfig) -> np.ndarray:
    d = config.delta
    xi = np.zeros(config.n, complex)
    xi[0] = 1j * d ** 2
    xi[1:config.m] = 1j * d ** 1.5
    return xi


def quadric_model(n: int, m: int, eps0: float = 0.2,
                  hermitian_parts: Sequence[np.ndarray] | None = None) -> PolyhedralSpec:
    """{Im z_j > z A_j z*, j <= m} in the polydisk box of radius eps0."""
    if hermitian_parts is None:
        hermitian_parts = tuple(np.eye(n) for _ in range(m))
    return PolyhedralSpec(n, m, tuple(hermitian_parts), BoundingBox((eps0,) * n))


def superset_mask(n: int, m: int, W: np.ndarray) -> np.ndarray:
    """Φ of the unscaled Siegel-type set: |w_1|² + ½Σ_{j>m}|w_j|² < 1, |w_k| < 1."""
    a = np.abs(W[:, 0]) ** 2 + 0.5 * np.sum(np.abs(W[:, m:]) ** 2, axis=1) < 1
    return a & np.all(np.abs(W[:, 1:m]) < 1, axis=1)


def superset_box(n: int, m: int) -> BoundingBox:
    return BoundingBox(tuple([1.0] * m + [2 ** 0.5] * (n - m)))


@dataclass(frozen=True, eq=False)
class RescaledDomain:
    config: ScalingConfig
    base: DomainSpec

    def __post_init__(self):
        if self.base.dim != self.config.n:
            raise ConfigError("base domain dimension differs from n")

    def contains(self, W) -> np.ndarray:
        W = as_batch(W, self.config.n)
        m = self.config.m
        ok = np.all(W[:, :m] != 1, axis=1)
        out = np.zeros(len(W), dtype=bool)
        if np.any(ok):
            with np.errstate(all="ignore"):
                Z = unscale(self.config, _cayley_inverse(m, W[ok]))
            fin = np.all(np.isfinite(Z), axis=1)
            idx = np.flatnonzero(ok)[fin]
            out[idx] = self.base.contains(Z[fin])
        return out

    def forward(self, Z) -> np.ndarray:
        """Φ ∘ L_δ on a batch of base points."""
        Zt = scale(self.config, as_batch(Z, self.config.n))
        return _cayley(self.config.m, Zt)

    def to_domain(self) -> DomainSpec:
        cfg = self.config
        return DomainSpec(cfg.n, self.contains, superset_box(cfg.n, cfg.m), "generic",
                          name=f"rescaled(delta={cfg.delta:g})",
                          meta={"delta": cfg.delta, "n": cfg.n, "m": cfg.m})


def rescaled_membership(rd: RescaledDomain, w) -> bool:
    w = as_point(w, rd.config.n)
    return bool(rd.contains(w[None, :])[0])


def rescaled_quadric(n: int, m: int, delta: float, eps0: float = 0.2) -> RescaledDomain:
    return RescaledDomain(ScalingConfig(n, m, delta), quadric_model(n, m, eps0).to_domain())


# --------------------------------------------------------------------------
# sandwich

@dataclass(frozen=True)
class SandwichReport:
    delta: float
    epsilon_hat: float
    inner_violations: int
    outer_violations: int
    inner_count: int
    outer_count: int
    superset_violations: int
    samples: int
    seed: int

    @property
    def ok(self) -> bool:
        return self.inner_violations == 0 and self.outer_violations == 0


def sandwich_check(rd: RescaledDomain, epsilon_hat: float, samples: int = 100_000,
                   seed: int = 0) -> SandwichReport:
    """Empirical test of (1-ε̂)𝓘 ⊂ Ω̂_δ ⊂ (1+ε̂)𝓘.

    Inner: points of the shrunken product model not in Ω̂_δ.  Outer: base
    points pushed forward that fall outside the enlarged product model.
    """
    if not 0 < epsilon_hat < 1:
        raise ConfigError("epsilon_hat must lie in (0, 1)")
    n, m = rd.config.n, rd.config.m
    inner_pts = domains.sample(domains.product_domain(n, m, 1 - epsilon_hat), samples, seed).points
    outer_base = domains.sample(rd.base, samples, seed).points
    if len(inner_pts) == 0 or len(outer_base) == 0:
        raise EmptyDomainError("sandwich sample set is empty")
    inner_viol = int(np.sum(~rd.contains(inner_pts)))
    W = rd.forward(outer_base)
    outer_viol = int(np.sum(~domains.product_model_mask(n, m, W, 1 + epsilon_hat)))
    sup_viol = int(np.sum(~superset_mask(n, m, W)))
    return SandwichReport(rd.config.delta, epsilon_hat, inner_viol, outer_viol,
                          len(inner_pts), len(outer_base), sup_viol, samples, seed)


def sandwich_sweep(n: int, m: int, deltas: Iterable[float], epsilon_hat: float,
                   samples: int = 100_000, seed: int = 0, eps0: float = 0.2) -> list[SandwichReport]:
    return [sandwich_check(rescaled_quadric(n, m, d, eps0), epsilon_hat, samples, seed)
            for d in deltas]


# --------------------------------------------------------------------------
# Ramadanov-type convergence

@dataclass(frozen=True)
class ConvergenceRow:
    param: float
    K: float
    reference: float

    @property
    def ratio(self) -> float:
        return self.K / self.reference

    @property
    def deviation(self) -> float:
        return abs(self.ratio - 1)


def ramadanov_harness(generator: Callable[[float], DomainSpec], params: Iterable[float], z,
                      reference: float | Callable[[float], float], degree: int | None = None,
                      samples: int = 2_000_000, seed: int = 0,
                      method: str = "auto") -> list[ConvergenceRow]:
    """K_{D_s}(z) for each s, with a fixed numerical budget.

    ``reference`` is either the limit K_D(z) or a function of s giving the
    exact value expected for D_s.
    """
    from .kernel import build_kernel

    rows = []
    for s in params:
        spec = generator(s)
        K = build_kernel(spec, degree, samples, seed, method).eval(z)
        ref = reference(s) if callable(reference) else float(reference)
        rows.append(ConvergenceRow(float(s), K, ref))
    return rows
