"""Bounded domains in ℂⁿ: membership, sampling, pullbacks and presets.

A domain is an open set given by a vectorised membership predicate together
with a polydisk bounding box.  Points are 1-D complex arrays of length n;
batches are (N, n) arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import sampling
from .errors import (DimensionError, EmptyDomainError, ConfigError,
                     RoundTripError)

KINDS = ("generic", "reinhardt", "closed-form-ball", "closed-form-polydisk",
         "closed-form-product")

Membership = Callable[[np.ndarray], np.ndarray]
RadialBound = Callable[[int, np.ndarray], np.ndarray]


def as_point(z: Any, dim: int | None = None) -> np.ndarray:
    """Validate a single point of ℂⁿ and return it as a complex vector."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {z.shape}")
    if dim is not None and z.shape[0] != dim:
        raise DimensionError(f"point has dim {z.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(z)):
        raise ValueError("point has non-finite entries")
    return z


def as_batch(z: Any, dim: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != dim:
        raise DimensionError(f"batch has shape {z.shape}, expected (N, {dim})")
    return z


@dataclass(frozen=True)
class BoundingBox:
    """Polydisk box {|z_j - c_j| < r_j}.

    Sampling uses the enclosing product of squares, so :meth:`volume` is the
    Lebesgue measure of that cube, ``prod (2 r_j)^2``.
    """

    radii: tuple[float, ...]
    center: tuple[complex, ...] | None = None

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii or any(not (r > 0 and math.isfinite(r)) for r in radii):
            raise ConfigError(f"box radii must be positive and finite: {radii}")
        object.__setattr__(self, "radii", radii)
        if self.center is None:
            object.__setattr__(self, "center", (0j,) * len(radii))
        else:
            c = tuple(complex(x) for x in self.center)
            if len(c) != len(radii):
                raise DimensionError("box center and radii differ in length")
            object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return len(self.radii)

    @property
    def r(self) -> np.ndarray:
        return np.array(self.radii)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center, dtype=complex)

    def volume(self) -> float:
        return float(np.prod((2.0 * self.r) ** 2))

    def contains(self, Z: np.ndarray) -> np.ndarray:
        return np.all(np.abs(Z - self.c) < self.r, axis=1)

    def scaled(self, t: float) -> "BoundingBox":
        return BoundingBox(tuple(t * r for r in self.radii),
                           tuple(t * c for c in self.center))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A bounded open domain.

    ``membership`` maps an (N, n) batch to a boolean mask and must use strict
    inequalities only.  The box is always intersected in :meth:`contains`.
    Reinhardt domains also carry ``radial_bounds(j, prefix)``, the supremum of
    ``|z_j|`` given ``|z_0|, ..., |z_{j-1}|`` (the columns of ``prefix``).
    """

    dim: int
    membership: Membership
    box: BoundingBox
    kind: str = "generic"
    closed_form: Any = None
    radial_bounds: RadialBound | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.box.dim != self.dim:
            raise DimensionError("box dimension differs from domain dimension")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if self.kind == "reinhardt" and self.radial_bounds is None:
            raise ConfigError("reinhardt domains need radial_bounds")

    def contains(self, Z: Any) -> np.ndarray:
        Z = as_batch(Z, self.dim)
        inside = self.box.contains(Z)
        if np.any(inside):
            with np.errstate(all="ignore"):
                inside[inside] = np.asarray(self.membership(Z[inside]), dtype=bool)
        return inside

    def as_generic(self) -> "DomainSpec":
        """Same set, but forces the QMC code paths."""
        return DomainSpec(self.dim, self.membership, self.box, "generic",
                          name=self.name + " [generic]", meta=dict(self.meta))

    def with_box(self, box: BoundingBox) -> "DomainSpec":
        return DomainSpec(self.dim, self.membership, box, self.kind,
                          self.closed_form, self.radial_bounds, self.name,
                          dict(self.meta))


def membership(spec: DomainSpec, z: Any) -> bool:
    """True iff ``z`` satisfies every defining inequality of ``spec``."""
    z = as_point(z, spec.dim)
    return bool(spec.contains(z[None, :])[0])


# --------------------------------------------------------------------------
# sampling

@dataclass(frozen=True)
class SampleResult:
    points: np.ndarray
    drawn: int
    acceptance_ratio: float
    box_volume: float

    @property
    def volume(self) -> float:
        return self.acceptance_ratio * self.box_volume

    @property
    def volume_stderr(self) -> float:
        """Binomial standard error of :attr:`volume`."""
        p = self.acceptance_ratio
        return self.box_volume * math.sqrt(max(p * (1 - p), 0.0) / self.drawn)


def sample(spec: DomainSpec, count: int, seed: int = 0,
           min_budget: int = sampling.BLOCK,
           threads: int | None = None) -> SampleResult:
    """Low-discrepancy points of the box filtered by membership."""
    if count <= 0:
        raise ValueError("count must be positive")
    box = spec.box
    parts = sampling.map_blocks(lambda Z: Z[spec.contains(Z)], box.c, box.r,
                                count, seed, threads)
    pts = np.concatenate(parts, axis=0)
    if len(pts) == 0:
        if count < min_budget:
            probe = sample(spec, min_budget, seed, min_budget, threads)
            if probe.acceptance_ratio > 0:
                return SampleResult(pts, count, 0.0, box.volume())
        raise EmptyDomainError(
            f"no point of {max(count, min_budget)} box samples hit {spec.name or 'domain'}")
    return SampleResult(pts, count, len(pts) / count, box.volume())


def estimate_volume(spec: DomainSpec, count: int, seed: int = 0) -> float:
    return sample(spec, count, seed).volume


# --------------------------------------------------------------------------
# model product domain I(B^{n-m+1} x Delta^{m-1})

def product_model_membership(n: int, m: int, w: Any) -> bool:
    """|w_1|^2 + sum_{j>m} |w_j|^2 < 1 and |w_k| < 1 for 2 <= k <= m."""
    if not 2 <= m <= n:
        raise ConfigError(f"need 2 <= m <= n, got n={n}, m={m}")
    w = as_point(w, n)
    return bool(product_model_mask(n, m, w[None, :])[0])


def product_model_mask(n: int, m: int, W: np.ndarray, scale: float = 1.0) -> np.ndarray:
    a = W / scale
    ball = np.abs(a[:, 0]) ** 2 + np.sum(np.abs(a[:, m:]) ** 2, axis=1) < 1.0
    disks = np.all(np.abs(a[:, 1:m]) < 1.0, axis=1)
    return ball & disks


# --------------------------------------------------------------------------
# presets

def reinhardt(dim: int, bounds: RadialBound, box: BoundingBox,
              name: str = "reinhardt") -> DomainSpec:
    """Complete Reinhardt domain {r_j < bounds(j, r_0..r_{j-1}) for all j}."""

    def mem(Z):
        r = np.abs(Z)
        ok = np.ones(len(Z), dtype=bool)
        for j in range(dim):
            b = np.nan_to_num(np.asarray(bounds(j, r[:, :j]), dtype=float), nan=0.0)
            ok &= r[:, j] < b
        return ok

    return DomainSpec(dim, mem, box, "reinhardt", radial_bounds=bounds, name=name)


def ball(k: int, radius: float = 1.0) -> DomainSpec:
    from .closed_forms import ProductModel
    return ProductModel.ball(k, radius).domain


def polydisk(k: int, radius: float = 1.0) -> DomainSpec:
    from .closed_forms import ProductModel
    return ProductModel.polydisk(k, radius).domain


def disk(radius: float = 1.0) -> DomainSpec:
    return ball(1, radius)


def product_domain(n: int, m: int, scale: float = 1.0) -> DomainSpec:
    """Closed-form 𝓘(𝔹^{n-m+1} × Δ^{m-1}), optionally dilated by ``scale``."""
    from .closed_forms import ProductModel
    return ProductModel.ball_polydisk(n, m, scale).domain


def ellipsoid(weights: Sequence[float]) -> DomainSpec:
    """{sum_j w_j |z_j|^2 < 1}, handled by the Reinhardt fast path."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ConfigError("ellipsoid weights must be positive")

    def bounds(j, prefix):
        used = prefix ** 2 @ w[:j] if j else np.zeros(len(prefix))
        return np.sqrt(np.clip(1.0 - used, 0.0, None) / w[j])

    box = BoundingBox(tuple(1.0 / np.sqrt(w)))
    spec = reinhardt(len(w), bounds, box, name=f"ellipsoid{tuple(w.tolist())}")
    spec.meta.update(shape="ellipsoid", weights=w.tolist())
    return spec


def thullen(p: float) -> DomainSpec:
    """{|z_1|^2 + |z_2|^{2p} < 1}; strongly pseudoconvex away from z_2 = 0 boundary."""

    def bounds(j, prefix):
        if j == 0:
            return np.ones(len(prefix))
        return np.clip(1.0 - prefix[:, 0] ** 2, 0.0, None) ** (1.0 / (2 * p))

    return reinhardt(2, bounds, BoundingBox((1.0, 1.0)), name=f"thullen(p={p})")


# --------------------------------------------------------------------------
# holomorphic maps and pullbacks

@dataclass(frozen=True, eq=False)
class HolomorphicMap:
    """A holomorphic map with an explicit inverse, both acting on (N, n) batches."""

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    dim: int
    name: str = "map"

    def __call__(self, Z):
        return self.forward(np.asarray(Z, dtype=complex))

    def inverted(self) -> "HolomorphicMap":
        return HolomorphicMap(self.inverse, self.forward, self.dim, f"{self.name}^-1")

    def image_box(self, spec: DomainSpec, count: int = 8192, seed: int = 0,
                  pad: float = 0.1) -> BoundingBox:
        pts = sample(spec, count, seed).points
        img = self.forward(pts)
        lo = img.real.min(axis=0) + 1j * img.imag.min(axis=0)
        hi = img.real.max(axis=0) + 1j * img.imag.max(axis=0)
        c = 0.5 * (lo + hi)
        r = np.max(np.abs(img - c), axis=0)
        r = np.where(r > 0, r, 1e-12) * (1.0 + pad)
        return BoundingBox(tuple(r), tuple(c))


@dataclass(frozen=True, eq=False)
class AffineMap(HolomorphicMap):
    """z -> A z + b with A invertible (column convention)."""

    matrix: np.ndarray = None
    offset: np.ndarray = None

    @classmethod
    def make(cls, matrix, offset=None) -> "AffineMap":
        A = np.atleast_2d(np.asarray(matrix, dtype=complex))
        n = A.shape[0]
        b = np.zeros(n, complex) if offset is None else np.asarray(offset, dtype=complex)
        Ainv = np.linalg.inv(A)
        return cls(lambda Z: Z @ A.T + b, lambda W: (W - b) @ Ainv.T, n,
                   "affine", A, b)

    @property
    def jacobian_det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def image_box(self, spec, count=0, seed=0, pad=0.0) -> BoundingBox:
        # exact: |sum_k A_jk (c_k + t_k)| over |t_k| < r_k
        box = spec.box
        c = self.matrix @ box.c + self.offset
        r = np.abs(self.matrix) @ box.r
        return BoundingBox(tuple(r * (1 + pad)), tuple(c))


def pullback(spec: DomainSpec, hmap: HolomorphicMap, box: BoundingBox | None = None,
             check_samples: int = 4096, seed: int = 0, tol: float = 1e-9) -> DomainSpec:
    """Image domain ``hmap(spec)`` described by membership(w) = spec(hmap⁻¹(w))."""
    if hmap.dim != spec.dim:
        raise DimensionError("map and domain dimensions differ")
    pts = sample(spec, check_samples, seed).points
    back = hmap.inverse(hmap.forward(pts))
    err = np.max(np.abs(back - pts)) if len(pts) else 0.0
    if not err <= tol * max(1.0, float(np.max(np.abs(pts)))):
        raise RoundTripError(f"inverse fails round trip: max error {err:.3e}")
    if box is None:
        box = hmap.image_box(spec, max(check_samples, 8192), seed)

    def mem(W):
        with np.errstate(all="ignore"):
            Z = hmap.inverse(W)
        ok = np.all(np.isfinite(Z), axis=1)
        out = np.zeros(len(W), dtype=bool)
        out[ok] = spec.contains(Z[ok])
        return out

    return DomainSpec(spec.dim, mem, box, "generic",
                      name=f"{hmap.name}({spec.name})")


# --------------------------------------------------------------------------
# strongly pseudoconvex polyhedral (quadric) models

def hermitian_form(A: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """sum_{a,b} A[a,b] z_a conj(z_b) for each row of Z (row convention)."""
    return np.real(np.einsum("ia,ab,ib->i", Z, A, Z.conj()))


@dataclass(frozen=True)
class EigBounds:
    A0: float
    A0_star: float


@dataclass(frozen=True, eq=False)
class PolyhedralSpec:
    """{Im z_j > Φ_j(z) for j = 1..m} ∩ box, with Φ_j = z A_j z* + R_j(z)."""

    n: int
    m: int
    hermitian_parts: tuple[np.ndarray, ...]
    box: BoundingBox
    remainders: tuple[Callable[[np.ndarray], np.ndarray] | None, ...] | None = None
    check_definite: bool = True

    def __post_init__(self):
        if not 2 <= self.m <= self.n:
            raise ConfigError(f"need 2 <= m <= n, got n={self.n}, m={self.m}")
        parts = tuple(np.array(A, dtype=complex) for A in self.hermitian_parts)
        if len(parts) != self.m:
            raise ConfigError("need one Hermitian part per face")
        for A in parts:
            if A.shape != (self.n, self.n):
                raise DimensionError("Hermitian part has wrong shape")
            if np.max(np.abs(A - A.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
                raise ConfigError("Hermitian part is not Hermitian")
            if self.check_definite and np.linalg.eigvalsh(A)[0] <= 0:
                raise ConfigError("Hermitian part is not positive definite")
        object.__setattr__(self, "hermitian_parts", parts)
        if self.remainders is None:
            object.__setattr__(self, "remainders", (None,) * self.m)
        elif len(self.remainders) != self.m:
            raise ConfigError("need one remainder per face")
        if self.box.dim != self.n:
            raise DimensionError("box dimension differs from n")

    def phi(self, j: int, Z: np.ndarray) -> np.ndarray:
        """Φ_{j+1} on a batch (0-based face index)."""
        val = hermitian_form(self.hermitian_parts[j], Z)
        R = self.remainders[j]
        return val if R is None else val + R(Z)

    def contains(self, Z) -> np.ndarray:
        return self.to_domain().contains(Z)

    def eig_bounds(self) -> EigBounds:
        eigs = [np.linalg.eigvalsh(A) for A in self.hermitian_parts]
        return EigBounds(min(e[0] for e in eigs), max(e[-1] for e in eigs[1:]))

    def to_domain(self, name: str = "") -> DomainSpec:
        def mem(Z):
            ok = np.ones(len(Z), dtype=bool)
            for j in range(self.m):
                ok &= Z[:, j].imag > self.phi(j, Z)
            return ok

        zero = all(R is None for R in self.remainders)
        meta = {"m": self.m, "hermitian_parts": [A.copy() for A in self.hermitian_parts],
                "remainder": "none" if zero else "closure"}
        return DomainSpec(self.n, mem, self.box, "generic",
                          name=name or f"polyhedral(n={self.n},m={self.m})", meta=meta)


# --------------------------------------------------------------------------
# JSON

def _cmat_to_json(A: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(A)]


def _cmat_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def domain_to_json(obj: DomainSpec | PolyhedralSpec) -> str:
    """Serialise a polyhedral spec or a closed-form domain."""
    if isinstance(obj, PolyhedralSpec):
        if any(R is not None for R in obj.remainders):
            raise ValueError("closure remainders cannot be serialised")
        doc = {"dim": obj.n, "kind": "generic", "m": obj.m,
               "box": list(obj.box.radii),
               "hermitian_parts": [_cmat_to_json(A) for A in obj.hermitian_parts],
               "remainder": "none"}
    elif obj.closed_form is not None:
        cf = obj.closed_form
        doc = {"dim": obj.dim, "kind": obj.kind, "box": list(obj.box.radii),
               "groups": [list(g) for g in cf.groups], "radius": cf.radius,
               "remainder": "none"}
    elif obj.meta.get("shape") == "ellipsoid":
        doc = {"dim": obj.dim, "kind": "reinhardt", "box": list(obj.box.radii),
               "weights": obj.meta["weights"], "remainder": "none"}
    elif "hermitian_parts" in obj.meta and obj.meta.get("remainder") == "none":
        doc = {"dim": obj.dim, "kind": "generic", "m": obj.meta["m"],
               "box": list(obj.box.radii),
               "hermitian_parts": [_cmat_to_json(A) for A in obj.meta["hermitian_parts"]],
               "remainder": "none"}
    else:
        raise ValueError(f"domain {obj.name!r} has no JSON representation")
    return json.dumps(doc)


def domain_from_json(text: str | dict) -> DomainSpec | PolyhedralSpec:
    doc = json.loads(text) if isinstance(text, str) else text
    kind = doc.get("kind", "generic")
    if "hermitian_parts" in doc:
        parts = [_cmat_from_json(A) for A in doc["hermitian_parts"]]
        return PolyhedralSpec(int(doc["dim"]), int(doc.get("m", len(parts))), tuple(parts),
                              BoundingBox(tuple(doc["box"])))
    if kind.startswith("closed-form"):
        from .closed_forms import ProductModel
        pm = ProductModel(tuple(tuple(g) for g in doc["groups"]), float(doc.get("radius", 1.0)))
        return pm.domain
    if kind == "reinhardt" and "weights" in doc:
        return ellipsoid(doc["weights"])
    raise ConfigError(f"cannot build a domain from JSON kind {kind!r}")


# --------------------------------------------------------------------------
# localization preset

DUMBBELL_CENTER = -1.2


def dumbbell_hartogs(cut: bool = False, sep: float = 1.2, neck: float = 0.25,
                     weight: float = 0.5) -> DomainSpec:
    """Hartogs domain {|z_2|² < exp(-2 weight |z_1 - c|²)} over a planar dumbbell.

    The base is two unit disks centred at ±sep joined by a strip of half-width
    ``neck``; c = -sep.  The weight is strictly subharmonic, so the domain is
    pseudoconvex and strongly pseudoconvex at p = (c, 1), which is a peak
    point.  ``cut=True`` intersects with the neighbourhood |z_1 - c| < 1 of p.
    Both variants share one bounding box so their samples match.
    """
    c = -sep

    def mem(Z):
        z1, z2 = Z[:, 0], Z[:, 1]
        if cut:
            base = np.abs(z1 - c) < 1
        else:
            base = ((np.abs(z1 - c) < 1) | (np.abs(z1 + c) < 1)
                    | ((np.abs(z1.real) < sep) & (np.abs(z1.imag) < neck)))
        return base & (np.abs(z2) ** 2 < np.exp(-2 * weight * np.abs(z1 - c) ** 2))

    name = "dumbbell-hartogs" + ("[cut]" if cut else "")
    return DomainSpec(2, mem, BoundingBox((sep + 1.0, 1.0)), "generic", name=name,
                      meta={"peak": [c, 1.0]})
