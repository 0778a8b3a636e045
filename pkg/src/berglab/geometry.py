"""Bergman metric, canonical invariant and Ricci curvature.

Everything here consumes ``BergmanJet`` objects, so the same code serves
truncated numerical kernels and closed-form models.  Any object with a
``jet(z)`` method and a ``domain`` attribute counts as a model.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol, Sequence

import numpy as np

from .domains import DomainSpec, as_point
from .errors import DegenerateMetricError, StepTooLargeError
from .kernel import BergmanJet

DEFAULT_STEP = 1e-3


class JetModel(Protocol):
    domain: DomainSpec

    def jet(self, z) -> BergmanJet: ...


@dataclass(frozen=True)
class MetricTensor:
    G: np.ndarray
    detG: float
    min_eig: float

    def length2(self, u: np.ndarray) -> float:
        """g(z, u)² = Σ g_{ij̄} u_i ū_j."""
        return float(np.real(u @ self.G @ u.conj()))


@dataclass(frozen=True)
class InvariantSample:
    z: np.ndarray
    K: float
    detG: float
    J: float
    note: str = ""


@dataclass(frozen=True)
class RicciSample:
    z: np.ndarray
    u: np.ndarray
    R: float
    method: str


def bergman_metric(jet: BergmanJet) -> MetricTensor:
    """g_{ij̄} = (K ∂_i∂̄_j K - ∂_i K ∂̄_j K) / K²."""
    K = jet.K
    G = (K * jet.ddK - np.outer(jet.dK, jet.dK.conj())) / K ** 2
    G = 0.5 * (G + G.conj().T)
    eig = np.linalg.eigvalsh(G)
    if not eig[0] > 0:
        raise DegenerateMetricError(f"metric not positive definite (min eig {eig[0]:.3e})")
    return MetricTensor(G, float(np.prod(eig)), float(eig[0]))


def canonical_invariant(jet: BergmanJet, z=None, note: str = "") -> InvariantSample:
    M = bergman_metric(jet)
    zz = np.asarray(z, dtype=complex) if z is not None else np.array([], complex)
    return InvariantSample(zz, jet.K, M.detG, M.detG / jet.K, note)


def _note(model) -> str:
    prov = getattr(model, "provenance", None)
    if prov:
        return f"numeric degree={prov.get('degree')} samples={prov.get('samples')} method={prov.get('method')}"
    return "closed-form"


def invariant_at(model: JetModel, z) -> InvariantSample:
    z = as_point(z)
    return canonical_invariant(model.jet(z), z, _note(model))


def _unit(u, n: int) -> np.ndarray:
    u = as_point(u, n)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    return u / nrm


def ricci_tensor_stencil(model: JetModel, z, step: float = DEFAULT_STEP) -> np.ndarray:
    """R_{αβ̄} = -∂_α∂̄_β log det G from central differences in 2n real coordinates."""
    z = as_point(z)
    n = len(z)
    h = float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    E = np.concatenate([np.eye(n), 1j * np.eye(n)])  # real coordinate directions
    dom = getattr(model, "domain", None)
    if dom is not None:
        probe = [z + s * h * E[a] for a in range(2 * n) for s in (-2, 2)]
        probe += [z + h * (sa * E[a] + sb * E[b]) for a in range(2 * n)
                  for b in range(a + 1, 2 * n) for sa in (-1, 1) for sb in (-1, 1)]
        if not np.all(dom.contains(np.array(probe))):
            raise StepTooLargeError(f"stencil of half-width {h} leaves the domain at {z}")

    def F(p):
        return float(np.log(bergman_metric(model.jet(p)).detG))

    f0 = F(z)
    H = np.empty((2 * n, 2 * n))
    for a in range(2 * n):
        H[a, a] = (F(z + h * E[a]) - 2 * f0 + F(z - h * E[a])) / h ** 2
        for b in range(a + 1, 2 * n):
            H[a, b] = H[b, a] = (F(z + h * (E[a] + E[b])) - F(z + h * (E[a] - E[b]))
                                 - F(z - h * (E[a] - E[b])) + F(z - h * (E[a] + E[b]))) / (4 * h ** 2)
    Hxx, Hyy = H[:n, :n], H[n:, n:]
    Hxy, Hyx = H[:n, n:], H[n:, :n]
    ddbar = 0.25 * ((Hxx + Hyy) + 1j * (Hxy - Hyx))
    return -ddbar


def ricci_stencil(model: JetModel, z, u, step: float = DEFAULT_STEP) -> RicciSample:
    z = as_point(z)
    u = _unit(u, len(z))
    Ric = ricci_tensor_stencil(model, z, step)
    M = bergman_metric(model.jet(z))
    R = float(np.real(u @ Ric @ u.conj())) / M.length2(u)
    return RicciSample(z, u, R, "stencil")


def ricci_via_extremal(model, z, u) -> RicciSample:
    """R = (n+1) - I(z, u) / (g(z, u)² K), with g(z, u)² = Σ g_{ij̄} u_i ū_j."""
    from .extremal import big_I

    z = as_point(z)
    u = _unit(u, len(z))
    jet = model.jet(z)
    M = bergman_metric(jet)
    I = big_I(model, z, u, M).value
    R = (len(z) + 1) - I / (M.length2(u) * jet.K)
    return RicciSample(z, u, R, "extremal-identity")


def ricci_closed_form(model, z, u) -> RicciSample:
    z = as_point(z)
    u = _unit(u, len(z))
    return RicciSample(z, u, model.ricci(z, u), "closed-form")


# --------------------------------------------------------------------------
# scans and CSV

CSV_BASE = ["K", "detG", "J", "R", "method", "degree", "samples", "seed"]


def csv_header(n: int) -> list[str]:
    cols = []
    for j in range(1, n + 1):
        cols += [f"re_z{j}", f"im_z{j}"]
    return cols + CSV_BASE


@dataclass
class ScanRow:
    sample: InvariantSample
    ricci: RicciSample | None = None
    extra: dict = field(default_factory=dict)

    def as_list(self, provenance: dict) -> list[Any]:
        z = self.sample.z
        out: list[Any] = []
        for c in z:
            out += [f"{c.real:.17g}", f"{c.imag:.17g}"]
        R = "" if self.ricci is None else f"{self.ricci.R:.17g}"
        method = self.ricci.method if self.ricci is not None else provenance.get("method", "")
        return out + [f"{self.sample.K:.17g}", f"{self.sample.detG:.17g}",
                      f"{self.sample.J:.17g}", R, method, provenance.get("degree", ""),
                      provenance.get("samples", ""), provenance.get("seed", "")]


def invariant_scan(model: JetModel, points: Iterable, u=None,
                   ricci_method: str = "stencil", step: float = DEFAULT_STEP) -> list[ScanRow]:
    """J (and optionally R along u) at each point, in input order."""
    rows = []
    for z in points:
        z = as_point(z)
        s = invariant_at(model, z)
        r = None
        if u is not None:
            if ricci_method == "stencil":
                r = ricci_stencil(model, z, u, step)
            elif ricci_method == "extremal":
                r = ricci_via_extremal(model, z, u)
            else:
                r = ricci_closed_form(model, z, u)
        rows.append(ScanRow(s, r))
    return rows


def scan_to_csv(rows: Sequence[ScanRow], provenance: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = len(rows[0].sample.z) if rows else 0
    w.writerow(csv_header(n))
    for r in rows:
        w.writerow(r.as_list(provenance))
    return buf.getvalue()
