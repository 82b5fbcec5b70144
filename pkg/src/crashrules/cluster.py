"""Lloyd's K-means on label codes, the WCSS sweep and elbow selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from crashrules._parallel import ordered_map
from crashrules.encode import LabelEncodedMatrix

DEFAULT_K_RANGE = range(2, 11)
TOL = 1e-9
KNEE_TIE_TOL = 1e-12


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    wcss: float
    iterations: int
    seed: int
    restart: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "restart": self.restart,
            "wcss": self.wcss,
            "iterations": self.iterations,
            "converged": self.converged,
            "sizes": self.sizes,
            "centroids": self.centroids.tolist(),
            "assignments": self.assignments.tolist(),
        }


@dataclass
class ElbowCurve:
    points: list[tuple[int, float]]
    chosen_k: int
    models: dict[int, ClusterModel] = field(default_factory=dict, repr=False, compare=False)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "wcss"])
            for k, w in self.points:
                writer.writerow([k, repr(float(w))])


def _as_points(matrix) -> np.ndarray:
    if isinstance(matrix, LabelEncodedMatrix):
        return matrix.as_points()
    points = np.asarray(matrix, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    return points


def squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _means(points: np.ndarray, assignments: np.ndarray, k: int, fallback: np.ndarray) -> np.ndarray:
    counts = np.bincount(assignments, minlength=k)
    sums = np.stack([np.bincount(assignments, weights=points[:, j], minlength=k) for j in range(points.shape[1])], axis=1)
    out = fallback.copy()
    filled = counts > 0
    out[filled] = sums[filled] / counts[filled, None]
    return out


def lloyd_step(points, centroids) -> tuple[np.ndarray, np.ndarray, float]:
    """One assignment + update pass.

    Each point goes to its nearest centroid, ties to the lowest index. A
    cluster left empty takes the point farthest from its own updated
    centroid (drawn from clusters with at least two members). Returns the
    assignments, the new centroids and the WCSS of that pairing.
    """
    points = _as_points(points)
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim == 1:
        centroids = centroids[:, None]
    if len(centroids) == 0:
        raise ValueError("need at least one centroid")
    if centroids.shape[1] != points.shape[1]:
        raise ValueError(f"centroid dimension {centroids.shape[1]} != point dimension {points.shape[1]}")
    k = len(centroids)
    assignments = np.argmin(squared_distances(points, centroids), axis=1)
    new = _means(points, assignments, k, centroids)
    sizes = np.bincount(assignments, minlength=k)
    for empty in np.flatnonzero(sizes == 0):
        own = ((points - new[assignments]) ** 2).sum(axis=1)
        own[sizes[assignments] < 2] = -1.0
        donor_point = int(np.argmax(own))
        if own[donor_point] < 0:
            # fewer points than clusters; nothing can be moved
            continue
        donor = assignments[donor_point]
        assignments[donor_point] = empty
        sizes[donor] -= 1
        sizes[empty] = 1
        new[empty] = points[donor_point]
        new[donor] = points[assignments == donor].mean(axis=0)
    diff = points - new[assignments]
    wcss = float(np.einsum("nd,nd->", diff, diff))
    return assignments, new, wcss


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def run_lloyd(points, init, max_iter: int = 300, tol: float = TOL, seed: int = 0, restart: int = 0) -> ClusterModel:
    """Iterate :func:`lloyd_step` from explicit initial centroids until they stop moving."""
    points = _as_points(points)
    centroids = np.asarray(init, dtype=np.float64).reshape(-1, points.shape[1])
    history = []
    converged = False
    assignments = None
    wcss = float("nan")
    it = 0
    for it in range(1, max_iter + 1):
        assignments, new, wcss = lloyd_step(points, centroids)
        history.append(wcss)
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        if shift < tol:
            converged = True
            break
    return ClusterModel(
        k=len(centroids),
        centroids=centroids,
        assignments=assignments,
        wcss=wcss,
        iterations=it,
        seed=seed,
        restart=restart,
        converged=converged,
        history=history,
    )


def kmeans_fit(
    matrix,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    restarts: int = 10,
    n_jobs: int | None = None,
) -> ClusterModel:
    """Best-of-``restarts`` K-means with k-means++ seeding.

    Restart ``r`` draws from the ``r``-th child of ``SeedSequence(seed)``, so
    results do not depend on whether restarts run in parallel. The lowest
    WCSS wins; equal WCSS goes to the earlier restart.
    """
    points = _as_points(matrix)
    n = len(points)
    if n == 0:
        raise ValueError("cannot cluster an empty matrix")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    children = np.random.SeedSequence(seed).spawn(restarts)

    def one(r: int) -> ClusterModel:
        rng = np.random.default_rng(children[r])
        init = kmeans_plus_plus(points, k, rng)
        return run_lloyd(points, init, max_iter=max_iter, seed=seed, restart=r)

    best = None
    for model in ordered_map(one, range(restarts), n_jobs):
        if best is None or model.wcss < best.wcss:
            best = model
    return best


def wcss_sweep(
    matrix,
    k_range: Iterable[int] = DEFAULT_K_RANGE,
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 300,
    n_jobs: int | None = None,
) -> ElbowCurve:
    """Fit every k in ``k_range`` and pick the elbow of the resulting WCSS curve."""
    points = _as_points(matrix)
    ks = list(k_range)
    bad = [k for k in ks if k < 1 or k > len(points)]
    if bad:
        raise ValueError(f"k={bad[0]} outside [1, {len(points)}]")
    models = {k: kmeans_fit(points, k, seed=seed, max_iter=max_iter, restarts=restarts, n_jobs=n_jobs) for k in ks}
    curve_points = [(k, models[k].wcss) for k in ks]
    chosen = select_elbow(curve_points) if len(ks) >= 3 else ks[0]
    return ElbowCurve(curve_points, chosen, models)


def knee_distances(points: Sequence[tuple[int, float]]) -> list[float]:
    """Distance of each normalized curve point from the first-to-last chord.

    The k axis is rank-normalized to [0, 1] and WCSS is min-max normalized,
    so neither unit choice nor a constant WCSS factor moves the knee.
    """
    ks = [k for k, _ in points]
    ws = np.array([w for _, w in points], dtype=np.float64)
    m = len(ks)
    lo, hi = ws.min(), ws.max()
    if hi == lo:
        return [0.0] * m
    x = np.arange(m) / (m - 1)
    y = (ws - lo) / (hi - lo)
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    dist = np.abs(dx * (y[0] - y) - (x[0] - x) * dy) / np.hypot(dx, dy)
    return dist.tolist()


def select_elbow(curve) -> int:
    """Pick the k farthest from the chord joining the ends of the WCSS curve.

    Ties (within 1e-12) go to the smallest k.
    """
    points = curve.points if isinstance(curve, ElbowCurve) else list(curve)
    if len(points) < 3:
        raise ValueError(f"elbow selection needs at least 3 curve points, got {len(points)}")
    points = sorted(points)
    dist = knee_distances(points)
    top = max(dist)
    for (k, _), d in zip(points, dist):
        if d >= top - KNEE_TIE_TOL:
            return k
    raise AssertionError("unreachable")
