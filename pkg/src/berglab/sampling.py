"""Deterministic low-discrepancy sampling of polydisk boxes.

Points come from a scrambled Sobol' sequence in the unit cube of dimension
2n, mapped affinely onto the product of squares ``|Re z_j - Re c_j| < r_j``,
``|Im z_j - Im c_j| < r_j``.  The index range is cut into fixed blocks of
``BLOCK`` points; each block is regenerated independently with
``fast_forward`` so a parallel evaluation sees exactly the serial point list.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np
from scipy.stats import qmc

BLOCK = 2**16

T = TypeVar("T")


def thread_count() -> int:
    """Worker count: ``BERGLAB_THREADS`` if set, else the hardware count."""
    env = os.environ.get("BERGLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def n_blocks(count: int) -> int:
    return -(-count // BLOCK)


def cube_block(dim: int, seed: int, index: int, count: int) -> np.ndarray:
    """Rows ``[index*BLOCK, min((index+1)*BLOCK, count))`` of the sequence."""
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    start = index * BLOCK
    if start:
        engine.fast_forward(start)
    # always draw a full power-of-two block to keep Sobol' balance
    pts = engine.random(BLOCK)
    return pts[: min(BLOCK, count - start)]


def box_block(center: np.ndarray, radii: np.ndarray, seed: int, index: int,
              count: int) -> np.ndarray:
    """Complex points of block ``index`` inside the box; shape (b, n)."""
    n = len(radii)
    u = cube_block(2 * n, seed, index, count)
    re = center.real + radii * (2.0 * u[:, :n] - 1.0)
    im = center.imag + radii * (2.0 * u[:, n:] - 1.0)
    return re + 1j * im


def iter_box(center: np.ndarray, radii: np.ndarray, count: int,
             seed: int) -> Iterator[np.ndarray]:
    for k in range(n_blocks(count)):
        yield box_block(center, radii, seed, k, count)


def map_blocks(fn: Callable[[np.ndarray], T], center: np.ndarray,
               radii: np.ndarray, count: int, seed: int,
               threads: int | None = None) -> list[T]:
    """Apply ``fn`` to every block; results are returned in block order."""
    center = np.asarray(center, dtype=complex)
    radii = np.asarray(radii, dtype=float)

    def work(k: int) -> T:
        return fn(box_block(center, radii, seed, k, count))

    nb = n_blocks(count)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or nb == 1:
        return [work(k) for k in range(nb)]
    with ThreadPoolExecutor(max_workers=min(threads, nb)) as pool:
        return list(pool.map(work, range(nb)))


def ordered_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Left-to-right reduction (fixed order, hence bitwise reproducible)."""
    total = np.array(parts[0], copy=True)
    for p in parts[1:]:
        total = total + p
    return total
