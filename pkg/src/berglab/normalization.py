"""Holomorphic normal form for the 2-jets of m quadric faces.

Input faces are ρ_j(x) = 2 Re(ℓ_j · x) + x H_j x*, with row vectors x and
``ℓ_j = ∂ρ_j(0)``.  The output is a degree-two holomorphic map z = F(x) after
which face 1 reads Im z_1 > |z_1|² + |z'P|² + |z''|² + O(3) and face j ≥ 2
reads Im z_j > z H^z_j z* + O(3), where z' = (z_2..z_m), z'' = (z_{m+1}..z_n).

The map is x -> ξ = x M -> w = ξ T⁻¹ -> z, with z_j = w_j for j ≥ 2 and
z_1 = w_1 + i((1 - a) w_1² - 2 w_1 s(w)), s(w) = Σ_{β≥2} H^w_1[β, 0] w_β.
Terms of face 1 that are multiples of y_1 = Im z_1 are absorbed by a positive
factor of the defining function, which does not change the domain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .domains import BoundingBox, PolyhedralSpec, hermitian_form
from .errors import ConfigError, DegeneratePolyhedronError, InternalError, RoundTripError

NORMAL_FORM_TOL = 1e-10
ROUND_TRIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RawPolyhedron:
    n: int
    m: int
    linear_parts: np.ndarray  # (m, n)
    quadratic_parts: np.ndarray  # (m, n, n)

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.linear_parts, dtype=complex))
        H = np.asarray(self.quadratic_parts, dtype=complex)
        n, m = self.n, self.m
        if not 2 <= m <= n:
            raise ConfigError(f"need 2 <= m <= n, got n={n}, m={m}")
        if L.shape != (m, n) or H.shape != (m, n, n):
            raise ConfigError("linear or quadratic parts have the wrong shape")
        if np.linalg.matrix_rank(L, tol=1e-10 * max(1.0, np.abs(L).max())) < m:
            raise DegeneratePolyhedronError("linear parts are not independent over ℂ")
        for j in range(m):
            if np.abs(H[j] - H[j].conj().T).max() > 1e-12 * max(1.0, np.abs(H[j]).max()):
                raise DegeneratePolyhedronError(f"quadratic part {j + 1} is not Hermitian")
        object.__setattr__(self, "linear_parts", L)
        object.__setattr__(self, "quadratic_parts", H)

    def rho(self, j: int, X: np.ndarray) -> np.ndarray:
        """ρ_{j+1} on a batch of points in original coordinates."""
        lin = 2.0 * np.real(X @ self.linear_parts[j])
        return lin + hermitian_form(self.quadratic_parts[j], X)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "m": self.m,
                           "linear_parts": _c2j(self.linear_parts),
                           "quadratic_parts": [_c2j(h) for h in self.quadratic_parts]})

    @classmethod
    def from_json(cls, text: str | dict) -> "RawPolyhedron":
        doc = json.loads(text) if isinstance(text, str) else text
        try:
            return cls(int(doc["n"]), int(doc["m"]), _j2c(doc["linear_parts"]),
                       np.array([_j2c(h) for h in doc["quadratic_parts"]]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (ConfigError, DegeneratePolyhedronError)):
                raise
            raise ConfigError(f"malformed polyhedron document: {exc}") from exc


def _c2j(A) -> list:
    A = np.asarray(A)
    if A.ndim == 1:
        return [[float(x.real), float(x.imag)] for x in A]
    return [_c2j(row) for row in A]


def _j2c(doc) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def random_raw(n: int, m: int, seed: int) -> RawPolyhedron:
    """Seeded, reasonably conditioned random instance."""
    rng = np.random.default_rng(seed)
    L = 0.5j * np.eye(n)[:m] + 0.3 * (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
    H = []
    for _ in range(m):
        B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H.append(np.eye(n) + 0.25 * B @ B.conj().T / n)
    return RawPolyhedron(n, m, L, np.array(H))


# --------------------------------------------------------------------------
# steps

@dataclass(frozen=True)
class AffineStep:
    M: np.ndarray
    hermitian: np.ndarray  # (m, n, n): H^ξ_j = M⁻¹ H_j M⁻ᴴ


def _gram_schmidt_complete(cols: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of span(cols) (in order) followed by standard basis
    vectors orthogonalised in index order."""
    basis: list[np.ndarray] = []

    def push(v):
        w = np.array(v, dtype=complex)
        nrm0 = np.linalg.norm(w)
        for _ in range(2):
            for q in basis:
                w = w - q * np.vdot(q, w)
        nrm = np.linalg.norm(w)
        if nrm > 1e-10 * max(nrm0, 1e-300):
            basis.append(w / nrm)
            return True
        return False

    for c in cols.T:
        if not push(c):
            raise DegeneratePolyhedronError("vectors are linearly dependent")
    for k in range(dim):
        if len(basis) == dim:
            break
        push(np.eye(dim)[k])
    return np.column_stack(basis)


def affine_reduce(raw: RawPolyhedron) -> AffineStep:
    """ξ = x M with 2 Re(ℓ_j · x) = -Im ξ_j for j <= m."""
    n, m = raw.n, raw.m
    lead = -2j * raw.linear_parts.T  # (n, m)
    Q = _gram_schmidt_complete(lead, n)
    M = np.column_stack([lead, Q[:, m:]])
    if np.linalg.cond(M) > 1e12:
        raise DegeneratePolyhedronError("linear parts are nearly dependent")
    Minv = np.linalg.inv(M)
    H = np.array([Minv @ h @ Minv.conj().T for h in raw.quadratic_parts])
    return AffineStep(M, H)


def face1_diagonalize(A: np.ndarray) -> np.ndarray:
    """C with C A Cᴴ = I for Hermitian positive definite A."""
    A = np.asarray(A, dtype=complex)
    try:
        L = np.linalg.cholesky(0.5 * (A + A.conj().T))
    except np.linalg.LinAlgError as exc:
        raise DegeneratePolyhedronError("face 1 is not strongly plurisubharmonic") from exc
    C = np.linalg.inv(L)
    res = np.abs(C @ A @ C.conj().T - np.eye(len(A))).max()
    if res > 1e-12 * max(1.0, np.linalg.cond(A)):
        raise InternalError(f"face-1 diagonalisation residual {res:.2e}")
    return C


def unitary_complement(alphas: np.ndarray) -> np.ndarray:
    """Unitary U whose first columns span the alphas (columns of ``alphas``)
    and whose remaining columns are orthogonal to all of them."""
    alphas = np.atleast_2d(np.asarray(alphas, dtype=complex))
    return _gram_schmidt_complete(alphas, alphas.shape[0])


def solve_P(hat_alphas: np.ndarray) -> np.ndarray:
    """P with P S = I, S having the hat-alphas as columns."""
    S = np.atleast_2d(np.asarray(hat_alphas, dtype=complex))
    if np.linalg.cond(S) > 1e12:
        raise DegeneratePolyhedronError("reduced alphas are dependent")
    return np.linalg.inv(S)


@dataclass(frozen=True)
class Absorption:
    a11: complex
    s_coeffs: np.ndarray  # s(w) = s_coeffs · w (zero in slot 0)

    def q(self, W: np.ndarray) -> np.ndarray:
        w1 = W[:, 0]
        return (1 - self.a11) * w1 ** 2 - 2 * w1 * (W @ self.s_coeffs)

    def forward(self, W: np.ndarray) -> np.ndarray:
        Z = W.copy()
        Z[:, 0] = W[:, 0] + 1j * self.q(W)
        return Z

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        W = Z.copy()
        alpha = 1j * (1 - self.a11)
        beta = 1 - 2j * (Z @ self.s_coeffs)
        root = np.sqrt(beta ** 2 + 4 * alpha * Z[:, 0])
        root = np.where(np.real(root * np.conj(beta)) < 0, -root, root)
        W[:, 0] = 2 * Z[:, 0] / (beta + root)
        return W


def absorb_quadratic(Hw1: np.ndarray) -> Absorption:
    """z_1 = w_1 + i((1 - a) w_1² - 2 w_1 s(w)) with a = H^w_1[0, 0]."""
    s = np.array(Hw1[:, 0], dtype=complex)
    s[0] = 0
    return Absorption(complex(np.real(Hw1[0, 0])), s)


# --------------------------------------------------------------------------
# full pipeline

@dataclass(frozen=True, eq=False)
class NormalizationResult:
    raw: RawPolyhedron
    M: np.ndarray
    C: np.ndarray
    U: np.ndarray
    P: np.ndarray
    T: np.ndarray
    absorption: Absorption
    hermitian_z: np.ndarray  # (m, n, n): quadratic parts in z coordinates
    target: np.ndarray  # normal-form matrix of face 1
    normal_form_residual: float
    linear_residual: float

    @property
    def n(self) -> int:
        return self.raw.n

    @property
    def m(self) -> int:
        return self.raw.m

    def forward(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        W = np.linalg.solve(self.T.T, (X @ self.M).T).T
        return self.absorption.forward(W)

    def inverse(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        W = self.absorption.inverse(Z)
        return np.linalg.solve(self.M.T, (W @ self.T).T).T

    def defining_factor(self, Z: np.ndarray) -> np.ndarray:
        """Positive factor c_1 with ρ_1 = c_1 (-Im z_1 + Φ_1) near 0."""
        a = self.absorption
        return 1 + 2 * (1 - a.a11.real) * Z[:, 0].imag - 4 * np.imag(Z @ a.s_coeffs)

    def phi(self, j: int, Z) -> np.ndarray:
        """Exact Φ_{j+1} in z coordinates (quadratic part plus remainder)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        rho = self.raw.rho(j, self.inverse(Z))
        if j == 0:
            c = self.defining_factor(Z)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = Z[:, 0].imag + rho / c
            return np.where(c > 0, val, np.inf)
        return Z[:, j].imag + rho

    def normalized(self, box_radius: float = 0.2) -> PolyhedralSpec:
        parts = (self.target,) + tuple(self.hermitian_z[1:])

        def remainder(j):
            quad = parts[j]
            return lambda Z: self.phi(j, Z) - hermitian_form(quad, Z)

        rem = tuple(remainder(j) for j in range(self.m))
        return PolyhedralSpec(self.n, self.m, parts, BoundingBox((box_radius,) * self.n), rem)

    def round_trip_error(self, count: int = 10_000, radius: float = 0.2, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        Z = radius * (rng.uniform(-1, 1, (count, self.n)) + 1j * rng.uniform(-1, 1, (count, self.n)))
        e1 = np.abs(self.forward(self.inverse(Z)) - Z).max()
        X = self.inverse(Z)
        e2 = np.abs(self.inverse(self.forward(X)) - X).max()
        return float(max(e1, e2))

    def to_json(self) -> str:
        a = self.absorption
        return json.dumps({
            "n": self.n, "m": self.m,
            "M": _c2j(self.M), "C": _c2j(self.C), "U": _c2j(self.U), "P": _c2j(self.P),
            "T": _c2j(self.T), "a11": a.a11.real, "s_coeffs": _c2j(a.s_coeffs),
            "hermitian_parts": [_c2j(self.target)] + [_c2j(h) for h in self.hermitian_z[1:]],
            "normal_form_residual": self.normal_form_residual,
            "linear_residual": self.linear_residual,
            "map": "z = F(x): xi = x M, w = xi T^-1, z_j = w_j (j>=2), "
                   "z_1 = w_1 + i((1 - a11) w_1^2 - 2 w_1 (s . w))",
        })


def target_matrix(n: int, m: int, P: np.ndarray) -> np.ndarray:
    Tm = np.zeros((n, n), complex)
    Tm[0, 0] = 1
    Tm[1:m, 1:m] = P @ P.conj().T
    Tm[m:, m:] = np.eye(n - m)
    return Tm


def _real_quadratic_matrix(f, n: int) -> np.ndarray:
    """Symmetric matrix of a real quadratic form on ℂⁿ = ℝ²ⁿ by polarisation.

    Coordinates are ordered (x_1..x_n, y_1..y_n).
    """
    E = np.concatenate([np.eye(n), 1j * np.eye(n)])
    d = np.array([f(e[None, :])[0] for e in E])
    S = np.empty((2 * n, 2 * n))
    for a in range(2 * n):
        S[a, a] = d[a]
        for b in range(a + 1, 2 * n):
            S[a, b] = S[b, a] = 0.5 * (f((E[a] + E[b])[None, :])[0] - d[a] - d[b])
    return S


def check_normal_form(res: NormalizationResult) -> tuple[float, float]:
    """Residuals of the linear and quadratic identities of the composed 2-jet.

    Linear: T M⁻¹ ℓ_j = (i/2) e_j, i.e. the linear part of ρ_j is -Im z_j.
    Quadratic: face 1's 2-jet minus the target differs only by multiples of
    y_1; faces j >= 2 agree exactly with their reported Hermitian parts.
    """
    n, m = res.n, res.m
    TMinv = res.T @ np.linalg.inv(res.M)
    lin = max(np.abs(TMinv @ res.raw.linear_parts[j] - 0.5j * np.eye(n)[j]).max()
              for j in range(m))
    quad = 0.0
    for j in range(m):
        Hz = TMinv @ res.raw.quadratic_parts[j] @ TMinv.conj().T
        if j == 0:
            def f(Z, Hz=Hz):
                return (np.real(res.absorption.q(Z)) + hermitian_form(Hz, Z)
                        - hermitian_form(res.target, Z))
            S = _real_quadratic_matrix(f, n)
            keep = np.ones(2 * n, dtype=bool)
            keep[n] = False  # the y_1 row and column are absorbed
            quad = max(quad, np.abs(S[np.ix_(keep, keep)]).max())
        else:
            quad = max(quad, np.abs(Hz - res.hermitian_z[j]).max())
    return float(lin), float(quad)


def normalize(raw: RawPolyhedron) -> NormalizationResult:
    n, m = raw.n, raw.m
    step = affine_reduce(raw)
    H1 = step.hermitian[0]
    A = H1[1:, 1:]
    for j in range(1, m):
        if np.linalg.eigvalsh(step.hermitian[j])[0] <= 0:
            raise DegeneratePolyhedronError(f"face {j + 1} is not strongly plurisubharmonic")
    C = face1_diagonalize(A)
    alphas = C[:, : m - 1]  # column j-1 carries face j's linear functional
    U = unitary_complement(alphas)
    hat = (U.conj().T @ alphas)[: m - 1]
    P = solve_P(hat)
    blk = np.eye(n - 1, dtype=complex)
    blk[: m - 1, : m - 1] = P
    Tp = blk @ U.conj().T @ C
    T = np.eye(n, dtype=complex)
    T[1:, 1:] = Tp
    Hw = np.array([T @ h @ T.conj().T for h in step.hermitian])
    Hw = 0.5 * (Hw + np.conj(np.transpose(Hw, (0, 2, 1))))
    absorption = absorb_quadratic(Hw[0])
    target = target_matrix(n, m, P)
    res = NormalizationResult(raw, step.M, C, U, P, T, absorption, Hw, target, 0.0, 0.0)
    lin, quad = check_normal_form(res)
    scale = max(1.0, np.abs(target).max())
    if lin > NORMAL_FORM_TOL or quad > NORMAL_FORM_TOL * scale:
        raise InternalError(f"normal form check failed: linear {lin:.2e}, quadratic {quad:.2e}")
    return NormalizationResult(raw, step.M, C, U, P, T, absorption, Hw, target, quad, lin)


def check_round_trip(res: NormalizationResult, count: int = 10_000, seed: int = 0) -> float:
    err = res.round_trip_error(count, seed=seed)
    if err > ROUND_TRIP_TOL:
        raise RoundTripError(f"round trip error {err:.2e}")
    return err
