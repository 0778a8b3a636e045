"""Constrained extremal problems over a truncated orthonormal basis.

A function ``f = Σ c_j φ_j`` has ``‖f‖ = ‖c‖`` and ``f(z) = a0 · c`` where
``a0 = (φ_j(z))``.  Linear conditions on derivatives of ``f`` at ``z`` are
therefore orthogonality conditions ``c ⊥ conj(a)``, and every problem here
reduces to a projection or a singular value problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import as_point
from .errors import ConfigError, RankDeficiencyError
from .geometry import MetricTensor, bergman_metric, ricci_stencil, DEFAULT_STEP

DEP_TOL = 1e-12


@dataclass(frozen=True)
class ExtremalResult:
    value: float
    maximizer_coeffs: np.ndarray
    constraints_applied: int

    @property
    def unsquared(self) -> float:
        return math.sqrt(self.value)


def orthonormal_constraints(vectors: list[np.ndarray]) -> np.ndarray:
    """Gram-Schmidt with one reorthogonalisation pass; columns of the result."""
    Q: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=complex)
        nrm0 = np.linalg.norm(w)
        for _ in range(2):
            for q in Q:
                w = w - q * np.vdot(q, w)
        nrm = np.linalg.norm(w)
        if nrm0 == 0 or nrm <= DEP_TOL * nrm0:
            raise RankDeficiencyError("constraint vectors are numerically dependent")
        Q.append(w / nrm)
    if not Q:
        return np.zeros((0, 0), complex)
    return np.column_stack(Q)


def _project_out(Q: np.ndarray, v: np.ndarray) -> np.ndarray:
    if Q.size == 0:
        return v.copy()
    for _ in range(2):
        v = v - Q @ (Q.conj().T @ v)
    return v


def lambda_k(model, z, k: int) -> ExtremalResult:
    """sup |∂f/∂z_k(z)|² over unit f with f(z) = 0 and ∂f/∂z_j(z) = 0 for j < k.

    ``k`` is 1-based.  The value is the squared supremum.
    """
    z = as_point(z, model.n)
    n = len(z)
    if not 1 <= k <= n:
        raise ConfigError(f"k must lie in 1..{n}")
    a0, a1, _ = model.evaluation_vectors(z)
    cons = [a0.conj()] + [a1[j].conj() for j in range(k - 1)]
    Q = orthonormal_constraints(cons)
    v = _project_out(Q, a1[k - 1].conj())
    val = float(np.real(np.vdot(v, v)))
    if val <= 0:
        raise RankDeficiencyError("k-th derivative functional lies in the constraint span")
    return ExtremalResult(val, v / math.sqrt(val), len(cons))


def lambda_product(model, z) -> float:
    return math.prod(lambda_k(model, z, k).value for k in range(1, model.n + 1))


def _complement(Q: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of Q."""
    full, _ = np.linalg.qr(np.column_stack([Q, np.eye(dim, dtype=complex)]), mode="complete")
    N = full[:, Q.shape[1]:dim]
    # qr may leave tiny components along Q; clean them
    return _project_out(Q, N)


def big_I(model, z, u, G: MetricTensor | None = None, convention: str = "paper",
          reduce: str = "trace") -> ExtremalResult:
    """Second-order extremal quantity along u.

    On the subspace {f(z) = 0, ∇f(z) = 0} consider the Hermitian form
    q(c) = v(c)ᴴ G⁻¹ v(c) with v_l = Σ_i u_i ∂_i∂_l f(z).  ``reduce="trace"``
    returns the trace of q over that subspace (the sum over any orthonormal
    basis), which is the quantity entering the Ricci identity;
    ``reduce="sup"`` returns its top eigenvalue.  Both agree in dimension one.
    The maximiser is the top eigenvector in either case.

    ``convention="transpose"`` uses Gᵀ in place of G, the alternative
    placement of the conjugation.
    """
    if convention not in ("paper", "transpose"):
        raise ConfigError(f"unknown convention {convention!r}")
    if reduce not in ("trace", "sup"):
        raise ConfigError(f"unknown reduction {reduce!r}")
    z = as_point(z, model.n)
    n = len(z)
    u = as_point(u, n)
    if not np.any(u):
        raise ValueError("direction must be nonzero")
    a0, a1, a2 = model.evaluation_vectors(z)
    if G is None:
        G = bergman_metric(model.jet(z))
    Gm = G.G if convention == "paper" else G.G.T
    cons = [a0.conj()] + [a1[i].conj() for i in range(n)]
    Q = orthonormal_constraints(cons)
    N = _complement(Q, len(a0))
    if N.shape[1] == 0:
        return ExtremalResult(0.0, np.zeros(len(a0), complex), len(cons))
    B = np.einsum("i,ilj->lj", u, a2)  # (B c)_l = Σ_i u_i ∂_i∂_l f
    L = np.linalg.cholesky(Gm)
    M = np.linalg.solve(L, B @ N)
    _, s, Vh = np.linalg.svd(M)
    c = N @ Vh[0].conj()
    c = _project_out(Q, c)
    c = c / np.linalg.norm(c)
    value = float(np.sum(s ** 2)) if reduce == "trace" else float(s[0] ** 2)
    return ExtremalResult(value, c, len(cons))


@dataclass(frozen=True)
class IdentityReport:
    J: float
    K: float
    lam: float
    identity1_rel: float
    identity1_rel_unsquared: float
    R_stencil: float
    R_extremal: float
    identity2_abs: float


def verify_identities(model, z, u, step: float = DEFAULT_STEP) -> IdentityReport:
    """J against λ/K^{n+1} and stencil Ricci against (n+1) - I/(g²K)."""
    from .geometry import ricci_via_extremal

    z = as_point(z, model.n)
    n = len(z)
    jet = model.jet(z)
    M = bergman_metric(jet)
    J = M.detG / jet.K
    lams = [lambda_k(model, z, k).value for k in range(1, n + 1)]
    lam = math.prod(lams)
    lam_unsq = math.prod(math.sqrt(x) for x in lams)
    Rs = ricci_stencil(model, z, u, step).R
    Re = ricci_via_extremal(model, z, u).R
    return IdentityReport(J, jet.K, lam, abs(J - lam / jet.K ** (n + 1)) / J,
                          abs(J - lam_unsq / jet.K ** (n + 1)) / J, Rs, Re, abs(Rs - Re))
