"""Truncated Bergman kernels from orthonormalised monomials.

The Gram matrix of the monomials ``m_α(w)``, ``w = (z - c) / s``, is
integrated over the domain (QMC, radial quadrature or exact moments) and
orthonormalised; the rows of the coefficient matrix ``C`` define
``φ_j = Σ_α C[j, α] m_α``.  Because the basis functions are polynomials in
``z`` and integration is with respect to Lebesgue measure in ``z``, kernel
values are already in original coordinates; derivatives pick up the chain
rule factor ``1 / s_i``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import sampling
from .domains import DomainSpec, as_point, as_batch
from .errors import (ConfigError, DegenerateGramError, DimensionError,
                     EmptyDomainError, ExtrapolationWarning, InternalError,
                     ZeroKernelError)

DEFAULT_SAMPLES = 2_000_000
QUAD_NODES = 256


def default_degree(n: int) -> int:
    return {1: 12, 2: 10, 3: 6}.get(n, 4)


def monomial_basis(n: int, d: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree <= d: by degree, then descending lex."""
    if n < 1 or d < 0:
        raise ConfigError("need n >= 1 and d >= 0")

    def comps(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in comps(total - first, parts - 1):
                yield (first,) + rest

    return [a for deg in range(d + 1) for a in comps(deg, n)]


def _powers(W: np.ndarray, dmax: int) -> np.ndarray:
    """P[..., k, p] = W[..., k] ** p for 0 <= p <= dmax."""
    P = np.empty(W.shape + (dmax + 1,), dtype=complex)
    P[..., 0] = 1.0
    for p in range(1, dmax + 1):
        P[..., p] = P[..., p - 1] * W
    return P


def monomial_values(W: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """(N, B) matrix of m_α(w) for a batch of points."""
    P = _powers(W, int(exps.max(initial=0)))
    M = P[:, 0, exps[:, 0]]
    for k in range(1, exps.shape[1]):
        M = M * P[:, k, exps[:, k]]
    return M


def monomial_jet(w: np.ndarray, exps: np.ndarray):
    """Values, gradients and holomorphic Hessians of the monomials at one point.

    Returns m0 (B,), m1 (n, B), m2 (n, n, B).
    """
    n = len(w)
    P = _powers(w, int(exps.max(initial=0)))

    def shifted(shift):
        e = exps - shift
        ok = np.all(e >= 0, axis=1)
        e = np.maximum(e, 0)
        val = np.ones(len(exps), dtype=complex)
        for k in range(n):
            val = val * P[k, e[:, k]]
        return np.where(ok, val, 0.0)

    m0 = shifted(np.zeros(n, dtype=int))
    m1 = np.empty((n, len(exps)), dtype=complex)
    m2 = np.empty((n, n, len(exps)), dtype=complex)
    eye = np.eye(n, dtype=int)
    for i in range(n):
        m1[i] = exps[:, i] * shifted(eye[i])
        for l in range(i, n):
            if i == l:
                c = exps[:, i] * (exps[:, i] - 1)
            else:
                c = exps[:, i] * exps[:, l]
            m2[i, l] = m2[l, i] = c * shifted(eye[i] + eye[l])
    return m0, m1, m2


@dataclass(frozen=True)
class Preconditioner:
    """Affine change w = (z - center) / scale applied before building monomials."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def for_domain(cls, spec: DomainSpec) -> "Preconditioner":
        return cls(spec.box.c.copy(), spec.box.r.copy())

    @classmethod
    def identity(cls, n: int) -> "Preconditioner":
        return cls(np.zeros(n, complex), np.ones(n))

    def apply(self, Z: np.ndarray) -> np.ndarray:
        return (Z - self.center) / self.scale

    def to_json(self) -> dict:
        return {"center": [[float(c.real), float(c.imag)] for c in self.center],
                "scale": [float(s) for s in self.scale]}

    @classmethod
    def from_json(cls, doc: dict) -> "Preconditioner":
        return cls(np.array([complex(a, b) for a, b in doc["center"]]),
                   np.array(doc["scale"], dtype=float))


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    sample_count: int
    volume_estimate: float
    method: str = "qmc"

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _resolve_method(spec: DomainSpec, method: str) -> str:
    if method == "auto":
        if spec.kind.startswith("closed-form"):
            return "exact"
        return "radial" if spec.kind == "reinhardt" else "qmc"
    if method not in ("qmc", "radial", "exact"):
        raise ConfigError(f"unknown gram method {method!r}")
    if method == "exact" and spec.closed_form is None:
        raise ConfigError("exact gram needs a closed-form domain")
    if method == "radial" and spec.radial_bounds is None:
        raise ConfigError("radial gram needs a Reinhardt domain")
    return method


def _radial_moments(spec: DomainSpec, exps: np.ndarray, nodes: int) -> np.ndarray:
    """∫ |z^α|² dV by nested Gauss-Legendre in the moduli.

    The innermost radius is integrated analytically; the others use
    ``nodes``-point rules on [0, bound(prefix)].
    """
    n = spec.dim
    t, wt = np.polynomial.legendre.leggauss(nodes)
    prefix = np.zeros((1, 0))
    weights = np.ones(1)
    for j in range(n - 1):
        b = np.nan_to_num(np.asarray(spec.radial_bounds(j, prefix), dtype=float), nan=0.0)
        b = np.clip(b, 0.0, None)
        r = 0.5 * b[:, None] * (t[None, :] + 1.0)
        w = weights[:, None] * 0.5 * b[:, None] * wt[None, :]
        prefix = np.concatenate([np.repeat(prefix, nodes, axis=0), r.reshape(-1, 1)], axis=1)
        weights = w.reshape(-1)
    blast = np.nan_to_num(np.asarray(spec.radial_bounds(n - 1, prefix), dtype=float), nan=0.0)
    blast = np.clip(blast, 0.0, None)
    out = np.empty(len(exps))
    for k, a in enumerate(exps):
        f = weights * blast ** (2 * a[-1] + 2) / (2 * a[-1] + 2)
        for j in range(n - 1):
            f = f * prefix[:, j] ** (2 * a[j] + 1)
        out[k] = f.sum()
    return (2 * math.pi) ** n * out


def gram(spec: DomainSpec, basis: Sequence[Sequence[int]], samples: int = DEFAULT_SAMPLES,
         seed: int = 0, method: str = "auto", precond: Preconditioner | None = None,
         threads: int | None = None) -> GramMatrix:
    """Gram matrix of the (preconditioned) monomials over ``spec``."""
    exps = np.asarray(basis, dtype=int).reshape(len(basis), -1)
    if exps.shape[1] != spec.dim:
        raise DimensionError("basis length differs from domain dimension")
    if samples <= 0:
        raise ConfigError("samples must be positive")
    method = _resolve_method(spec, method)
    if precond is None:
        precond = Preconditioner.for_domain(spec)
    if method in ("radial", "exact") and np.any(precond.center != 0):
        method = "qmc"  # monomials are only orthogonal about the origin

    if method == "qmc":
        box = spec.box

        def block(Z):
            Z = Z[spec.contains(Z)]
            M = monomial_values(precond.apply(Z), exps)
            return M.T @ M.conj(), len(Z)

        parts = sampling.map_blocks(block, box.c, box.r, samples, seed, threads)
        hits = sum(p[1] for p in parts)
        if hits == 0:
            raise EmptyDomainError(f"no sample hit {spec.name or 'the domain'}")
        vol = box.volume()
        G = sampling.ordered_sum([p[0] for p in parts]) * (vol / samples)
        asym = np.max(np.abs(G - G.conj().T))
        if asym > 1e-12 * np.max(np.abs(G)):
            raise InternalError(f"gram asymmetry {asym:.3e}")
        G = 0.5 * (G + G.conj().T)
        return GramMatrix(G, samples, vol * hits / samples, "qmc")

    if method == "radial":
        diag = _radial_moments(spec, exps, QUAD_NODES)
    else:
        diag = np.array([spec.closed_form.moment(a) for a in exps])
    diag = diag / np.prod(precond.scale[None, :] ** (2 * exps), axis=1)
    vol = float(diag[0]) if not exps[0].any() else float("nan")
    return GramMatrix(np.diag(diag).astype(complex), 0, vol, method)


def orthonormalize(G: GramMatrix | np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Coefficients C with C G Cᴴ = I_rank.

    Full-rank Gram matrices (after diagonal equilibration) use an inverse
    Cholesky factor; otherwise eigen-directions below ``tol * λ_max`` are
    dropped.  Up to three refinement passes follow in both cases.
    """
    A = np.asarray(G.entries if isinstance(G, GramMatrix) else G, dtype=complex)
    if tol <= 0:
        raise ConfigError("tol must be positive")
    d = np.real(np.diag(A))
    D = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    Ah = D[:, None] * A * D[None, :]
    Ah = 0.5 * (Ah + Ah.conj().T)
    lam, V = np.linalg.eigh(Ah)
    if not lam[-1] > 0:
        raise DegenerateGramError("gram matrix has no positive eigenvalue")
    keep = lam > tol * lam[-1]
    rank = int(keep.sum())
    C = None
    if rank == len(lam):
        try:
            L = np.linalg.cholesky(Ah)
            C = np.linalg.inv(L) * D[None, :]
        except np.linalg.LinAlgError:
            C = None
    if C is None:
        C = (V[:, keep].conj().T / np.sqrt(lam[keep])[:, None]) * D[None, :]
    # refinement: re-orthonormalise against the original matrix
    for _ in range(3):
        E = _sandwich(C, A).astype(complex)
        E = 0.5 * (E + E.conj().T)
        if np.max(np.abs(E - np.eye(rank))) <= 1e-13:
            break
        try:
            C = np.linalg.solve(np.linalg.cholesky(E), C)
        except np.linalg.LinAlgError as exc:
            raise DegenerateGramError("refinement failed") from exc
    res = orthonormality_residual(C, A)
    if res >= 1e-8:
        raise DegenerateGramError(f"orthonormality residual {res:.2e}")
    return C, rank


def _sandwich(C: np.ndarray, A: np.ndarray) -> np.ndarray:
    # extended precision: in double, forming C A Cᴴ alone costs eps * cond(A)
    Cl = C.astype(np.clongdouble)
    return Cl @ A.astype(np.clongdouble) @ Cl.conj().T


def orthonormality_residual(C: np.ndarray, A: np.ndarray) -> float:
    return float(np.max(np.abs(_sandwich(C, A) - np.eye(C.shape[0]))))


@dataclass(frozen=True)
class BergmanJet:
    """K, ∂K/∂z_i and ∂²K/∂z_i∂z̄_j at one point."""

    K: float
    dK: np.ndarray
    ddK: np.ndarray

    def __post_init__(self):
        if not self.K > 0:
            raise ZeroKernelError(f"kernel value {self.K} is not positive")


@dataclass(frozen=True, eq=False)
class KernelModel:
    basis: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray
    effective_rank: int
    domain: DomainSpec | None
    preconditioner: Preconditioner
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.basis[0])

    @property
    def exps(self) -> np.ndarray:
        return np.asarray(self.basis, dtype=int)

    def _check(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        if self.domain is not None and not self.domain.contains(z[None, :])[0]:
            warnings.warn(f"evaluating kernel outside {self.domain.name or 'domain'} at {z}",
                          ExtrapolationWarning, stacklevel=3)
        return z

    def evaluation_vectors(self, z):
        """(φ_j(z)), (∂_i φ_j(z)), (∂_i ∂_l φ_j(z)) in original coordinates."""
        z = as_point(z, self.n)
        s = self.preconditioner.scale
        m0, m1, m2 = monomial_jet(self.preconditioner.apply(z), self.exps)
        C = self.coeffs
        a0 = C @ m0
        a1 = (m1 @ C.T) / s[:, None]
        a2 = (m2 @ C.T) / (s[:, None, None] * s[None, :, None])
        return a0, a1, a2

    def eval(self, z) -> float:
        z = self._check(z)
        a0, _, _ = self.evaluation_vectors(z)
        K = float(np.sum(np.abs(a0) ** 2))
        if not K > 0:
            raise ZeroKernelError("kernel vanished")
        return K

    def values(self, Z) -> np.ndarray:
        """K on a batch of points (no extrapolation check)."""
        Z = as_batch(Z, self.n)
        M = monomial_values(self.preconditioner.apply(Z), self.exps)
        return np.sum(np.abs(M @ self.coeffs.T) ** 2, axis=1)

    def jet(self, z) -> BergmanJet:
        z = self._check(z)
        a0, a1, _ = self.evaluation_vectors(z)
        K = float(np.sum(np.abs(a0) ** 2))
        if not K > 0:
            raise ZeroKernelError("kernel vanished")
        dK = a1 @ a0.conj()
        ddK = a1 @ a1.conj().T
        ddK = 0.5 * (ddK + ddK.conj().T)
        return BergmanJet(K, dK, ddK)

    def to_json(self) -> str:
        C = self.coeffs
        return json.dumps({
            "basis": [list(a) for a in self.basis],
            "coeffs_re": C.real.tolist(), "coeffs_im": C.imag.tolist(),
            "effective_rank": self.effective_rank,
            "preconditioner": self.preconditioner.to_json(),
            "provenance": self.provenance,
        })

    @classmethod
    def from_json(cls, text: str, domain: DomainSpec | None = None) -> "KernelModel":
        doc = json.loads(text)
        C = np.array(doc["coeffs_re"]) + 1j * np.array(doc["coeffs_im"])
        return cls(tuple(tuple(a) for a in doc["basis"]), C, int(doc["effective_rank"]),
                   domain, Preconditioner.from_json(doc["preconditioner"]),
                   dict(doc.get("provenance", {})))


def build_kernel(spec: DomainSpec, degree: int | None = None,
                 samples: int = DEFAULT_SAMPLES, seed: int = 0, method: str = "auto",
                 tol: float = 1e-10, threads: int | None = None) -> KernelModel:
    degree = default_degree(spec.dim) if degree is None else degree
    basis = monomial_basis(spec.dim, degree)
    method = _resolve_method(spec, method)
    pre = Preconditioner.for_domain(spec)
    G = gram(spec, basis, samples, seed, method, pre, threads)
    C, rank = orthonormalize(G, tol)
    prov = {"degree": degree, "samples": G.sample_count, "seed": seed,
            "method": G.method, "domain": spec.name,
            "volume_estimate": G.volume_estimate,
            "residual": orthonormality_residual(C, G.entries)}
    return KernelModel(tuple(tuple(a) for a in basis), C, rank, spec, pre, prov)


def kernel_eval(model: KernelModel, z) -> float:
    return model.eval(z)


def kernel_jet(model: KernelModel, z) -> BergmanJet:
    return model.jet(z)


def convergence_report(spec: DomainSpec, z, degrees: Iterable[int],
                       samples: int = DEFAULT_SAMPLES, seed: int = 0,
                       method: str = "auto") -> list[dict[str, Any]]:
    """K(z) for each degree; ``increment`` is the change from the previous row."""
    rows = []
    prev = None
    for d in degrees:
        model = build_kernel(spec, d, samples, seed, method)
        K = model.eval(z)
        rows.append({"degree": d, "basis_size": len(model.basis),
                     "rank": model.effective_rank, "K": K,
                     "increment": float("nan") if prev is None else K - prev,
                     "samples": samples, "seed": seed, "method": model.provenance["method"]})
        prev = K
    return rows
