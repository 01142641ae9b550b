"""Dimensionality reduction to 2-d for the dashboard: exact PCA and t-SNE.

Both reducers sit behind the same persistence interface and can be swapped
per run. t-SNE is the exact O(n^2) symmetric-SNE variant with a hard cap of
20000 points; PCA is the scalable fallback for larger archives.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EchomapError
from .loader import ArtifactLayout, EmbeddingSet, atomic_write_text

log = logging.getLogger(__name__)

REDUCER_NAMES = ("pca", "tsne")

TSNE_MAX_POINTS = 20000
TSNE_DEFAULT_PERPLEXITY = 30.0
TSNE_DEFAULT_ITERATIONS = 1000
TSNE_LEARNING_RATE = 200.0
TSNE_EARLY_EXAGGERATION = 12.0
TSNE_EXAGGERATION_ITERS = 250


@dataclass
class PcaResult:
    transformed: np.ndarray                  # (n, out_dim)
    explained_variance_ratios: np.ndarray    # (out_dim,)
    components: np.ndarray                   # (out_dim, dim)
    mean: np.ndarray                         # (dim,)


def pca_fit_transform(embeddings: np.ndarray, out_dim: int) -> PcaResult:
    """Exact PCA via eigendecomposition of the covariance matrix.

    Components come in descending eigenvalue order; each component's sign is
    fixed so its largest-magnitude loading is positive. Zero-variance input
    yields all-zero output with a notice.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs a 2-d matrix with at least 2 rows")
    n, dim = x.shape
    if not (1 <= out_dim <= min(n, dim)):
        raise ValueError(f"out_dim must be in [1, {min(n, dim)}], got {out_dim}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if total <= 0:
        log.warning("PCA input has zero variance; returning all-zero projection")
        return PcaResult(np.zeros((n, out_dim)), np.zeros(out_dim),
                         np.zeros((out_dim, dim)), mean)
    components = eigvecs[:, :out_dim].T
    for i in range(out_dim):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    transformed = xc @ components.T
    ratios = eigvals[:out_dim] / total
    return PcaResult(transformed, ratios, components, mean)


def _conditional_probabilities(d2: np.ndarray, perplexity: float,
                               tol: float = 1e-5, max_steps: int = 200
                               ) -> np.ndarray:
    """Per-point Gaussian kernels with entropy matched to log(perplexity)."""
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        row = np.delete(d2[i], i)
        for _ in range(max_steps):
            expo = np.exp(-row * beta)
            total = expo.sum()
            if total <= 0:
                h = 0.0
                probs = np.zeros_like(row)
            else:
                probs = expo / total
                h = float(beta * (row * probs).sum() + np.log(total))
            diff = h - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        p[i, np.arange(n) != i] = probs
    return p


def tsne_fit_transform(embeddings: np.ndarray,
                       perplexity: float = TSNE_DEFAULT_PERPLEXITY,
                       iterations: int = TSNE_DEFAULT_ITERATIONS,
                       seed: int = 0) -> np.ndarray:
    """Exact symmetric-SNE gradient descent to 2-d.

    PCA initialization (first component rescaled to std 1e-4), early
    exaggeration x12 for the first 250 iterations, learning rate 200 with the
    usual per-parameter gains and momentum schedule (0.5 then 0.8). Fully
    deterministic for a fixed seed; the seed only matters when the PCA
    initialization is degenerate.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("embeddings must be a 2-d matrix")
    n = x.shape[0]
    if n > TSNE_MAX_POINTS:
        raise EchomapError(
            f"exact t-SNE is capped at {TSNE_MAX_POINTS} points, got {n}; "
            "subsample the embeddings or switch the reducer to pca")
    if perplexity <= 0:
        raise ValueError("perplexity must be positive")
    if n < 3 * perplexity:
        raise ValueError(
            f"t-SNE needs n >= 3 x perplexity (n={n}, perplexity={perplexity})")

    sq = (x * x).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    cond = _conditional_probabilities(d2, perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    if n >= 2 and min(n, x.shape[1]) >= 2:
        init = pca_fit_transform(x, 2).transformed
    else:
        init = np.zeros((n, 2))
    std0 = init[:, 0].std()
    if std0 > 0:
        y = init / std0 * 1e-4
    else:
        y = np.random.default_rng(seed).standard_normal((n, 2)) * 1e-4

    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration = TSNE_EARLY_EXAGGERATION
    p_run = p * exaggeration
    for it in range(iterations):
        if it == TSNE_EXAGGERATION_ITERS:
            p_run = p
        ysq = (y * y).sum(axis=1)
        num = 1.0 / (1.0 + np.maximum(ysq[:, None] + ysq[None, :] - 2.0 * (y @ y.T), 0.0))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (p_run - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        momentum = 0.5 if it < TSNE_EXAGGERATION_ITERS else 0.8
        flips = update * grad < 0.0
        gains[flips] += 0.2
        gains[~flips] *= 0.8
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - TSNE_LEARNING_RATE * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y


@dataclass
class ReducedEmbeddings:
    """2-d points of one audio file, aligned with its segments."""

    relpath: str
    points: list[tuple[float, float]]
    timestamps: list[tuple[float, float]]
    reducer: str
    model: str


def _reduced_document(model: str, reducer: str, relpath: str,
                      points: np.ndarray,
                      timestamps: list[tuple[float, float]],
                      source_identity: Optional[tuple[int, int]]) -> str:
    doc = {
        "reducer": reducer,
        "model": model,
        "files": {
            relpath: {
                "points": [[round(float(px), 6), round(float(py), 6)]
                           for px, py in points],
                "timestamps": [[float(s), float(e)] for s, e in timestamps],
            }
        },
    }
    if source_identity is not None:
        doc["source"] = {"size": int(source_identity[0]),
                         "mtime": int(source_identity[1])}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def read_reduced(layout: ArtifactLayout, model: str, reducer: str,
                 relpath: str) -> ReducedEmbeddings:
    path = layout.reduced_path(model, reducer, relpath)
    doc = json.loads(path.read_text("utf-8"))
    body = doc["files"][relpath]
    return ReducedEmbeddings(
        relpath=relpath,
        points=[(float(px), float(py)) for px, py in body["points"]],
        timestamps=[(float(s), float(e)) for s, e in body["timestamps"]],
        reducer=doc["reducer"], model=doc["model"])


def reduced_complete(layout: ArtifactLayout, model: str, reducer: str,
                     relpath: str, source_identity: tuple[int, int],
                     n_points: int) -> bool:
    path = layout.reduced_path(model, reducer, relpath)
    if not path.exists():
        return False
    try:
        doc = json.loads(path.read_text("utf-8"))
        source = doc.get("source") or {}
        return (int(source.get("size", -1)) == source_identity[0]
                and int(source.get("mtime", -1)) == source_identity[1]
                and len(doc["files"][relpath]["points"]) == n_points)
    except (OSError, ValueError, KeyError):
        return False


def reduce_and_persist(layout: ArtifactLayout, model: str, reducer: str,
                       sets: list[EmbeddingSet],
                       identities: Optional[dict[str, tuple[int, int]]] = None,
                       seed: int = 0,
                       perplexity: Optional[float] = None,
                       iterations: int = TSNE_DEFAULT_ITERATIONS) -> list:
    """Fit one reducer over the whole dataset and mirror per-file JSON files.

    The fit is cached through the same identity rules as embeddings: when
    every per-file document exists and matches its source identity, the call
    is a no-op. Coordinates are written with 6 decimals, so reruns are
    byte-identical.
    """
    if reducer not in REDUCER_NAMES:
        raise EchomapError(f"unknown reducer {reducer!r}; choose from {REDUCER_NAMES}")
    identities = identities or {}
    if sets and all(
            reduced_complete(layout, model, reducer, s.relpath,
                             identities.get(s.relpath, (-1, -1)), len(s.timestamps))
            for s in sets):
        log.info("reduction %s/%s already complete; skipping fit", model, reducer)
        return [layout.reduced_path(model, reducer, s.relpath) for s in sets]

    stacked = np.concatenate([s.matrix for s in sets], axis=0) if sets \
        else np.zeros((0, 2))
    n = stacked.shape[0]
    if n < 2:
        raise EchomapError("reduction needs at least 2 segments")
    if reducer == "pca":
        points = pca_fit_transform(stacked, 2).transformed
    else:
        perp = perplexity if perplexity is not None \
            else min(TSNE_DEFAULT_PERPLEXITY, n / 3.0)
        points = tsne_fit_transform(stacked, perplexity=perp,
                                    iterations=iterations, seed=seed)

    written = []
    offset = 0
    for s in sets:
        rows = points[offset:offset + len(s.timestamps)]
        offset += len(s.timestamps)
        path = layout.reduced_path(model, reducer, s.relpath)
        atomic_write_text(path, _reduced_document(
            model, reducer, s.relpath, rows, s.timestamps,
            identities.get(s.relpath)))
        written.append(path)
    return written
