"""Exact reference values for balls, polydisks and their products.

Invariant constants are kept as ``rational * pi**p`` so that comparisons
between them are decided in exact arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .domains import BoundingBox, DomainSpec, as_batch, as_point
from .errors import ConfigError, DimensionError, InternalError
from .kernel import BergmanJet


@dataclass(frozen=True)
class ExactConstant:
    rational_part: Fraction
    pi_power: int

    def __post_init__(self):
        object.__setattr__(self, "rational_part", Fraction(self.rational_part))
        if self.pi_power < 0:
            raise ValueError("pi_power must be non-negative")

    @property
    def float_value(self) -> float:
        return float(self.rational_part) * math.pi ** self.pi_power

    def __float__(self) -> float:
        return self.float_value

    def __mul__(self, other: "ExactConstant") -> "ExactConstant":
        return ExactConstant(self.rational_part * other.rational_part,
                             self.pi_power + other.pi_power)

    def __str__(self) -> str:
        r = self.rational_part
        coef = str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"
        if self.pi_power == 0:
            return coef
        return f"{coef}*pi^{self.pi_power}"


def j_ball(k: int) -> ExactConstant:
    """J of the unit ball in ℂᵏ: (k+1)^k π^k / k!."""
    if k < 0:
        raise ConfigError("k must be non-negative")
    return ExactConstant(Fraction((k + 1) ** k, math.factorial(k)), k)


def j_polydisk(j: int) -> ExactConstant:
    """J of the polydisk Δʲ: (2π)^j."""
    if j < 0:
        raise ConfigError("j must be non-negative")
    return ExactConstant(Fraction(2 ** j), j)


def j_product(n: int, m: int) -> ExactConstant:
    """J of 𝔹^{n-m+1} × Δ^{m-1}, cross-checked against the single-formula form."""
    if not 1 <= m <= n:
        raise ConfigError(f"need 1 <= m <= n, got n={n}, m={m}")
    k = n - m + 1
    value = j_ball(k) * j_polydisk(m - 1)
    direct = ExactConstant(Fraction((k + 1) ** k * 2 ** (m - 1), math.factorial(k)), n)
    if value != direct:
        raise InternalError(f"product constant mismatch at n={n}, m={m}")
    return value


def a_seq(k: int) -> Fraction:
    """a_k = (k+1)^k / (2^k k!), i.e. j_ball(k) / (2π)^k."""
    return Fraction((k + 1) ** k, 2 ** k * math.factorial(k))


@dataclass(frozen=True)
class Lemma52Report:
    monotone: bool
    first_failure: int | None
    terms_checked: int
    distinct: bool
    first_equal_pair: tuple[int, int] | None
    pairs_checked: int

    @property
    def ok(self) -> bool:
        return self.monotone and self.distinct


def lemma52_verify(n_max: int, pairs_n_max: int = 100) -> Lemma52Report:
    """Exact check that a_k increases strictly for k <= n_max and that
    j_ball(n) != j_product(n, m) for 2 <= m <= n <= pairs_n_max."""
    if n_max < 2:
        raise ConfigError("n_max must be at least 2")
    first_failure = None
    prev = a_seq(1)
    for k in range(2, n_max + 1):
        cur = a_seq(k)
        if not cur > prev:
            first_failure = k
            break
        prev = cur

    first_equal = None
    pairs = 0
    for n in range(2, pairs_n_max + 1):
        jb = j_ball(n)
        for m in range(2, n + 1):
            jp = j_product(n, m)
            pairs += 1
            # same pi power, so compare the rational parts
            if jb.pi_power != jp.pi_power:
                raise InternalError("pi powers differ")
            if jb.rational_part == jp.rational_part and first_equal is None:
                first_equal = (n, m)
    return Lemma52Report(first_failure is None, first_failure, n_max,
                         first_equal is None, first_equal, pairs)


def constants_table(n_max: int) -> list[dict]:
    rows = []
    for n in range(2, n_max + 1):
        jb = j_ball(n)
        for m in range(2, n + 1):
            jp = j_product(n, m)
            rows.append({"n": n, "m": m, "j_ball": str(jb), "j_product": str(jp),
                         "equal": jb == jp, "j_ball_float": jb.float_value,
                         "j_product_float": jp.float_value})
    return rows


# --------------------------------------------------------------------------
# closed-form kernels of products of balls

def ball_moment(alpha: Sequence[int]) -> tuple[Fraction, int]:
    """∫_{𝔹ᵏ} |z^α|² dV = π^k α! / (k+|α|)!, returned as (rational, pi power)."""
    k = len(alpha)
    num = math.prod(math.factorial(a) for a in alpha)
    return Fraction(num, math.factorial(k + sum(alpha))), k


@dataclass(frozen=True, eq=False)
class ProductModel:
    """Product of balls, one per coordinate group, all dilated by ``radius``.

    ``groups`` partitions {0, ..., n-1}; a group of size one is a disk.
    """

    groups: tuple[tuple[int, ...], ...]
    radius: float = 1.0
    kind: str = "closed-form-product"

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        flat = sorted(i for g in groups for i in g)
        if not groups or any(not g for g in groups) or flat != list(range(len(flat))):
            raise ConfigError(f"groups must partition 0..n-1: {groups}")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def ball(cls, k: int, radius: float = 1.0) -> "ProductModel":
        if k < 1:
            raise ConfigError("ball dimension must be positive")
        return cls((tuple(range(k)),), radius, "closed-form-ball")

    @classmethod
    def polydisk(cls, k: int, radius: float = 1.0) -> "ProductModel":
        if k < 1:
            raise ConfigError("polydisk dimension must be positive")
        return cls(tuple((i,) for i in range(k)), radius, "closed-form-polydisk")

    @classmethod
    def ball_polydisk(cls, n: int, m: int, radius: float = 1.0) -> "ProductModel":
        """𝓘(𝔹^{n-m+1} × Δ^{m-1}): the ball uses w_1 and w_{m+1..n}."""
        if not 2 <= m <= n:
            raise ConfigError(f"need 2 <= m <= n, got n={n}, m={m}")
        ball_group = (0,) + tuple(range(m, n))
        return cls((ball_group,) + tuple((j,) for j in range(1, m)), radius)

    @property
    def n(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def name(self) -> str:
        parts = [f"B{len(g)}{list(g)}" for g in self.groups]
        return "x".join(parts) + ("" if self.radius == 1 else f"*{self.radius:g}")

    # exact data ---------------------------------------------------------

    def j_exact(self) -> ExactConstant:
        out = ExactConstant(Fraction(1), 0)
        for g in self.groups:
            out = out * j_ball(len(g))
        return out

    def volume(self) -> float:
        v = math.prod(math.pi ** len(g) / math.factorial(len(g)) for g in self.groups)
        return v * self.radius ** (2 * self.n)

    def moment(self, alpha: Sequence[int]) -> float:
        """∫ |z^α|² dV over the model domain."""
        alpha = tuple(alpha)
        if len(alpha) != self.n:
            raise DimensionError("multi-index length differs from n")
        val = 1.0
        for g in self.groups:
            r, p = ball_moment([alpha[i] for i in g])
            val *= float(r) * math.pi ** p
        return val * self.radius ** (2 * self.n + 2 * sum(alpha))

    # domain --------------------------------------------------------------

    def contains(self, Z) -> np.ndarray:
        X = as_batch(Z, self.n) / self.radius
        ok = np.ones(len(X), dtype=bool)
        for g in self.groups:
            ok &= np.sum(np.abs(X[:, list(g)]) ** 2, axis=1) < 1.0
        return ok

    @cached_property
    def domain(self) -> DomainSpec:
        n, R = self.n, self.radius
        group_of = {i: g for g in self.groups for i in g}

        def bounds(j, prefix):
            # earlier coordinates of the same group eat into the budget
            used = np.zeros(len(prefix))
            for i in group_of[j]:
                if i < j:
                    used += prefix[:, i] ** 2
            return np.sqrt(np.clip(R * R - used, 0.0, None))

        return DomainSpec(n, self.contains, BoundingBox((R,) * n), self.kind,
                          closed_form=self, radial_bounds=bounds, name=self.name)

    # kernel, jets and metric ----------------------------------------------

    def _scaled(self, z) -> np.ndarray:
        return as_point(z, self.n) / self.radius

    def kernel(self, z) -> float:
        x = self._scaled(z)
        K = 1.0
        for g in self.groups:
            k = len(g)
            s = 1.0 - float(np.sum(np.abs(x[list(g)]) ** 2))
            if s <= 0:
                raise ValueError("point outside the model domain")
            K *= math.factorial(k) / math.pi ** k * s ** (-(k + 1))
        return K * self.radius ** (-2 * self.n)

    def jet(self, z) -> BergmanJet:
        x = self._scaled(z)
        n, R = self.n, self.radius
        K = 1.0
        logd = np.zeros(n, complex)  # ∂_i log K_g for the group containing i
        inner = np.zeros((n, n), complex)  # ddK_g / K_g within groups
        for g in self.groups:
            k, idx = len(g), list(g)
            xg = x[idx]
            s = 1.0 - float(np.sum(np.abs(xg) ** 2))
            if s <= 0:
                raise ValueError("point outside the model domain")
            K *= math.factorial(k) / math.pi ** k * s ** (-(k + 1))
            logd[idx] = (k + 1) * xg.conj() / s
            blk = (k + 1) * (np.eye(k) / s + (k + 2) * np.outer(xg.conj(), xg) / s ** 2)
            inner[np.ix_(idx, idx)] = blk
        ddK = K * np.outer(logd, logd.conj())
        for g in self.groups:
            idx = list(g)
            ddK[np.ix_(idx, idx)] = K * inner[np.ix_(idx, idx)]
        scale = R ** (-2 * n)
        return BergmanJet(K * scale, K * scale * logd / R, ddK * scale / R ** 2)

    def metric(self, z) -> np.ndarray:
        """G[i, j] = ∂_i ∂̄_j log K, block diagonal over groups."""
        x = self._scaled(z)
        G = np.zeros((self.n, self.n), complex)
        for g in self.groups:
            k, idx = len(g), list(g)
            xg = x[idx]
            s = 1.0 - float(np.sum(np.abs(xg) ** 2))
            G[np.ix_(idx, idx)] = (k + 1) * (np.eye(k) / s + np.outer(xg.conj(), xg) / s ** 2)
        return G / self.radius ** 2

    def canonical_invariant(self, z) -> float:
        return float(np.real(np.linalg.det(self.metric(z)))) / self.kernel(z)

    def ricci(self, z, u) -> float:
        """Ricci curvature along u; every factor is Einstein with constant -1."""
        as_point(z, self.n)
        u = as_point(u, self.n)
        if not np.any(u):
            raise ValueError("direction must be nonzero")
        return -1.0


def ball_model(k: int, radius: float = 1.0) -> ProductModel:
    return ProductModel.ball(k, radius)


def polydisk_model(k: int, radius: float = 1.0) -> ProductModel:
    return ProductModel.polydisk(k, radius)


def product_model(n: int, m: int, radius: float = 1.0) -> ProductModel:
    return ProductModel.ball_polydisk(n, m, radius)
