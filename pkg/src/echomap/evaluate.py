"""Embedding-space evaluation: clustering scores, probes, benchmarking.

Everything here runs from persisted artifacts alone (embeddings + labels);
no audio access. The metric primitives are implemented directly because
their exact semantics are pinned: AMI uses the hypergeometric expected
mutual information with the arithmetic-mean normalizer, ARI is pair
counting, average precision is the rank-sum form with ties broken by
original index, and k-means stops on a 1e-4 centroid shift.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import EchomapError
from .labels import GroundTruthMatrix, SegmentLabels
from .loader import ArtifactLayout, atomic_write_bytes, atomic_write_text

log = logging.getLogger(__name__)

KNN_DEFAULT_K = 5
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
KMEANS_SHIFT_TOL = 1e-4

CLUSTERING_LABEL_SETS = ("time_of_day", "day_of_year", "parent_directory",
                         "audio_file_name")


# ---------------------------------------------------------------------------
# agreement metrics

def _contingency(labels_a: Sequence, labels_b: Sequence) -> np.ndarray:
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label lengths differ: {len(labels_a)} vs {len(labels_b)}")
    if len(labels_a) == 0:
        raise ValueError("labelings must be non-empty")
    _, ia = np.unique(np.asarray(labels_a, dtype=object), return_inverse=True)
    _, ib = np.unique(np.asarray(labels_b, dtype=object), return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    a = table.sum(axis=1, keepdims=True)
    b = table.sum(axis=0, keepdims=True)
    nz = table > 0
    t = table[nz].astype(np.float64)
    outer = (a @ b)[nz].astype(np.float64)
    return float((t / n * np.log(n * t / outer)).sum())


def _expected_mutual_information(a_counts: np.ndarray, b_counts: np.ndarray) -> float:
    """E[MI] over the permutation (hypergeometric) model, in nats."""
    n = int(a_counts.sum())
    lg = gammaln
    log_fact_n = lg(n + 1)
    emi = 0.0
    for ai in a_counts:
        ai = int(ai)
        base_a = lg(ai + 1) + lg(n - ai + 1)
        for bj in b_counts:
            bj = int(bj)
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_p = (base_a + lg(bj + 1) + lg(n - bj + 1)
                     - log_fact_n - lg(nij + 1) - lg(ai - nij + 1)
                     - lg(bj - nij + 1) - lg(n - ai - bj + nij + 1))
            emi += float(((nij / n) * np.log(n * nij / (ai * bj)) * np.exp(log_p)).sum())
    return emi


def ami(labels_a: Sequence, labels_b: Sequence) -> float:
    """Adjusted mutual information with the arithmetic-mean normalizer.

    (MI - E[MI]) / (mean(H_a, H_b) - E[MI]); 1.0 by convention when both
    partitions are trivial.
    """
    table = _contingency(labels_a, labels_b)
    a_counts = table.sum(axis=1)
    b_counts = table.sum(axis=0)
    h_a, h_b = _entropy(a_counts), _entropy(b_counts)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    n = int(table.sum())
    if table.shape[0] == n and table.shape[1] == n:
        # both all-singletons: identical partitions, but the normalizer
        # (mean entropy - E[MI]) vanishes analytically
        return 1.0
    mi = _mutual_information(table)
    emi = _expected_mutual_information(a_counts, b_counts)
    denominator = (h_a + h_b) / 2.0 - emi
    # Guard against sign flips when the denominator collapses numerically.
    eps = np.finfo(np.float64).eps
    if denominator < 0:
        denominator = min(denominator, -eps)
    else:
        denominator = max(denominator, eps)
    return float((mi - emi) / denominator)


def ari(labels_a: Sequence, labels_b: Sequence) -> float:
    """Pair-counting adjusted Rand index; 1.0 when both partitions are trivial."""
    table = _contingency(labels_a, labels_b)
    n = int(table.sum())

    def comb2(x):
        x = x.astype(np.int64)
        return (x * (x - 1)) // 2

    sum_ij = int(comb2(table).sum())
    sum_a = int(comb2(table.sum(axis=1)).sum())
    sum_b = int(comb2(table.sum(axis=0)).sum())
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    maximum = (sum_a + sum_b) / 2.0
    if maximum == expected:
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))


# ---------------------------------------------------------------------------
# k-means

def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = x[assign == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
            else:
                # Re-seat an empty cluster at the point farthest from its center.
                farthest = int(d2[np.arange(len(x)), assign].argmax())
                new_centers[j] = x[farthest]
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < KMEANS_SHIFT_TOL:
            break
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(x)), assign].sum())
    return assign, centers, inertia


def kmeans(embeddings: np.ndarray, k: int, seed: int
           ) -> tuple[np.ndarray, float]:
    """Seeded k-means++ with 10 restarts; returns (assignments, inertia)."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("embeddings must be a 2-d matrix")
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k ({k}) exceeds the number of points ({n})")
    master = np.random.default_rng(seed)
    restart_seeds = master.integers(0, 2 ** 63 - 1, size=KMEANS_RESTARTS)
    best: Optional[tuple[np.ndarray, float]] = None
    for rs in restart_seeds:
        rng = np.random.default_rng(int(rs))
        centers = _kmeans_pp_init(x, k, rng)
        assign, _, inertia = _lloyd(x, centers)
        if best is None or inertia < best[1]:
            best = (assign, inertia)
    return best[0], best[1]


# ---------------------------------------------------------------------------
# ranking metrics

def average_precision(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Rank-sum AP: mean of precision@k over positive ranks.

    Ranks are by descending score; ties keep the original index order.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    positives = int(y.sum())
    if positives == 0:
        raise ValueError("average_precision needs at least one positive label")
    order = np.lexsort((np.arange(len(s)), -s))
    hits = y[order].astype(np.float64)
    precision_at = np.cumsum(hits) / np.arange(1, len(s) + 1)
    return float(precision_at[hits > 0].sum() / positives)


def _per_class_ap(scores: np.ndarray, truth: np.ndarray,
                  class_names: Sequence[str]) -> tuple[dict[str, float], list[str]]:
    """AP per class; classes without positives are excluded with a notice."""
    per_class: dict[str, float] = {}
    excluded: list[str] = []
    for c, name in enumerate(class_names):
        if truth[:, c].any():
            per_class[name] = average_precision(scores[:, c], truth[:, c])
        else:
            excluded.append(name)
    if excluded:
        log.info("classes without positives excluded from mAP: %s",
                 ", ".join(excluded))
    return per_class, excluded


# ---------------------------------------------------------------------------
# probing

@dataclass
class ProbeSplits:
    """Disjoint stratified row indices into a ground-truth matrix."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    class_names: list[str]          # classes kept after the >= 3 positives rule
    dropped_classes: list[str] = field(default_factory=list)

    @property
    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "val": len(self.val),
                "test": len(self.test)}


def _largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    raw = [f * total for f in fractions]
    floors = [int(np.floor(r)) for r in raw]
    shortfall = total - sum(floors)
    remainders = sorted(range(len(raw)), key=lambda i: (raw[i] - floors[i], -i),
                        reverse=True)
    for i in remainders[:shortfall]:
        floors[i] += 1
    return floors


def split(ground_truth: GroundTruthMatrix, fractions: Sequence[float],
          seed: int) -> ProbeSplits:
    """Stratified train/val/test split of the annotated rows.

    Classes with fewer than 3 positive rows are excluded (warning names the
    class); rows without any kept class are excluded as unannotated. Each
    split receives at least one positive row of every kept class; split sizes
    follow the fractions by largest remainder.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) \
            or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be three positive values summing to 1")
    matrix = ground_truth.matrix
    pos_counts = matrix.sum(axis=0)
    kept_cols = [c for c in range(matrix.shape[1]) if pos_counts[c] >= 3]
    dropped = [ground_truth.class_names[c] for c in range(matrix.shape[1])
               if pos_counts[c] < 3]
    for name in dropped:
        log.warning("class %s has fewer than 3 positive rows; excluded from probing",
                    name)
    if not kept_cols:
        raise EchomapError("no class has >= 3 positive rows; probing is impossible")
    kept = matrix[:, kept_cols]
    annotated = np.flatnonzero(kept.any(axis=1))
    targets = _largest_remainder(len(annotated), fractions)

    rng = np.random.default_rng(seed)
    n_splits = 3
    class_order = sorted(range(len(kept_cols)),
                         key=lambda c: (kept[annotated, c].sum(),
                                        ground_truth.class_names[kept_cols[c]]))
    assigned: dict[int, int] = {}
    counts = [0] * n_splits
    pos_in_split = np.zeros((n_splits, len(kept_cols)), dtype=np.int64)

    for c in class_order:
        rows_c = [int(r) for r in annotated[kept[annotated, c]]]
        rng.shuffle(rows_c)
        pos_c = len(rows_c)
        for r in rows_c:
            if r in assigned:
                continue
            open_splits = [s for s in range(n_splits) if counts[s] < targets[s]]
            if not open_splits:
                open_splits = list(range(n_splits))
            uncovered = [s for s in open_splits if pos_in_split[s, c] == 0]
            pool = uncovered or open_splits
            # Largest per-class deficit wins; ties fall to the emptier split,
            # then to the lower split index. All deterministic.
            deficits = [(fractions[s] * pos_c - pos_in_split[s, c],
                         targets[s] - counts[s], -s) for s in pool]
            chosen = max(zip(deficits, pool))[1]
            assigned[r] = chosen
            counts[chosen] += 1
            pos_in_split[chosen] += kept[r].astype(np.int64)

    buckets: list[list[int]] = [[], [], []]
    for r, s in assigned.items():
        buckets[s].append(r)
    train, val, test = (np.array(sorted(b), dtype=np.int64) for b in buckets)
    kept_names = [ground_truth.class_names[c] for c in kept_cols]
    return ProbeSplits(train, val, test, kept_names, dropped)


@dataclass
class ProbeResult:
    probe_type: str
    per_class_ap: dict[str, float]
    map_score: float
    split_sizes: dict[str, int]
    excluded_classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"probe_type": self.probe_type, "per_class_ap": self.per_class_ap,
                "map": self.map_score, "split_sizes": self.split_sizes,
                "excluded_classes": self.excluded_classes}


def _score_sealed_test(probe_type: str, scores: np.ndarray, truth: np.ndarray,
                       class_names: Sequence[str],
                       split_sizes: dict[str, int]) -> ProbeResult:
    # The single place test labels are read: after all scores are computed.
    per_class, excluded = _per_class_ap(scores, truth, class_names)
    if not per_class:
        raise EchomapError("test split has no positive labels for any class")
    map_score = float(np.mean(list(per_class.values())))
    return ProbeResult(probe_type, per_class, map_score, split_sizes, excluded)


def knn_probe(embeddings: np.ndarray, ground_truth: GroundTruthMatrix,
              splits: ProbeSplits, k: int = KNN_DEFAULT_K) -> ProbeResult:
    """k-nearest-neighbour probe: per-class score of a test row is the
    fraction of its k euclidean neighbours positive for that class."""
    x = np.asarray(embeddings, dtype=np.float64)
    cols = [ground_truth.class_names.index(n) for n in splits.class_names]
    train_x, test_x = x[splits.train], x[splits.test]
    train_y = ground_truth.matrix[np.ix_(splits.train, cols)].astype(np.float64)
    test_y = ground_truth.matrix[np.ix_(splits.test, cols)]
    if len(splits.test) == 0:
        raise EchomapError("test split is empty")
    if k < 1 or k > len(train_x):
        raise ValueError(f"k must be in [1, train size = {len(train_x)}], got {k}")
    d2 = ((test_x[:, None, :] - train_x[None, :, :]) ** 2).sum(axis=2)
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
    scores = train_y[neighbors].mean(axis=1)
    return _score_sealed_test("knn", scores, test_y, splits.class_names,
                              splits.sizes)


@dataclass
class ProbeHyperparams:
    learning_rate: float = 1e-2
    max_epochs: int = 500
    patience: int = 25


@dataclass
class LinearProbe:
    """Single fully connected layer with sigmoid outputs."""

    weights: np.ndarray        # (dim, n_classes)
    bias: np.ndarray           # (n_classes,)
    model_name: str
    class_list: list[str]

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        z = np.asarray(embeddings, dtype=np.float64) @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def save(self, layout: ArtifactLayout, model: str) -> tuple:
        weights_path = layout.evaluations_dir(model) / "probe_linear_weights.npy"
        classes_path = layout.evaluations_dir(model) / "probe_linear_classes.json"
        stacked = np.vstack([self.weights, self.bias[None, :]]).astype("<f8")
        buf = io.BytesIO()
        np.save(buf, stacked, allow_pickle=False)
        atomic_write_bytes(weights_path, buf.getvalue())
        atomic_write_text(classes_path, json.dumps(
            {"model": self.model_name, "classes": self.class_list},
            sort_keys=True))
        return weights_path, classes_path

    @classmethod
    def load(cls, layout: ArtifactLayout, model: str) -> "LinearProbe":
        weights_path = layout.evaluations_dir(model) / "probe_linear_weights.npy"
        classes_path = layout.evaluations_dir(model) / "probe_linear_classes.json"
        stacked = np.load(weights_path, allow_pickle=False)
        meta = json.loads(classes_path.read_text("utf-8"))
        return cls(stacked[:-1], stacked[-1], meta["model"], list(meta["classes"]))


def _bce_and_grad(w, b, x, y):
    # loss: per-sample mean of the class-summed binary cross-entropy
    z = x @ w + b
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    eps = 1e-12
    bce = -(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss = float(bce.sum(axis=1).mean())
    diff = (p - y) / x.shape[0]
    return loss, x.T @ diff, diff.sum(axis=0)


def _val_map(w, b, x, y):
    z = x @ w + b
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    aps = [average_precision(p[:, c], y[:, c]) for c in range(y.shape[1])
           if y[:, c].any()]
    return float(np.mean(aps)) if aps else 0.0


def train_linear_probe(embeddings: np.ndarray, ground_truth: GroundTruthMatrix,
                       splits: ProbeSplits, model_name: str = "",
                       hyperparams: Optional[ProbeHyperparams] = None
                       ) -> tuple[LinearProbe, ProbeResult]:
    """Train a multi-label linear probe with full-batch gradient descent.

    Binary cross-entropy on sigmoid outputs, zero-initialized parameters
    (the objective is convex), learning rate 1e-2, up to 500 epochs with
    early stopping once the validation mAP has sat below its best for 25
    consecutive epochs. Epochs that tie the best validation mAP refresh the
    kept parameters, so ranking-saturated fixtures still train to calibrated
    scores (the probe also generates thresholded predictions later). The
    kept parameters are scored once on the sealed test split.
    """
    hp = hyperparams or ProbeHyperparams()
    x = np.asarray(embeddings, dtype=np.float64)
    cols = [ground_truth.class_names.index(n) for n in splits.class_names]
    if len(splits.train) == 0:
        raise EchomapError("train split is empty")
    # Standardize with train-split statistics so the pinned learning rate
    # converges on common-mode-dominated embeddings; the affine transform is
    # folded back into the returned weights, keeping the probe a plain
    # linear layer.
    mu = x[splits.train].mean(axis=0)
    sigma = x[splits.train].std(axis=0)
    sigma = np.where(sigma > 1e-12, sigma, 1.0)
    xs = {name: (x[idx] - mu) / sigma for name, idx in
          (("train", splits.train), ("val", splits.val), ("test", splits.test))}
    ys = {name: ground_truth.matrix[np.ix_(idx, cols)].astype(np.float64)
          for name, idx in
          (("train", splits.train), ("val", splits.val), ("test", splits.test))}
    n_classes = len(cols)
    w = np.zeros((x.shape[1], n_classes))
    b = np.zeros(n_classes)
    best = (w.copy(), b.copy())
    best_val = -np.inf
    stale = 0
    for epoch in range(hp.max_epochs):
        loss, gw, gb = _bce_and_grad(w, b, xs["train"], ys["train"])
        if not np.isfinite(loss):
            raise EchomapError(
                f"linear probe diverged at epoch {epoch}: loss={loss}, "
                f"|w|max={np.abs(w).max():.3g}")
        w -= hp.learning_rate * gw
        b -= hp.learning_rate * gb
        val_map = _val_map(w, b, xs["val"], ys["val"]) if len(splits.val) else 0.0
        if val_map >= best_val:
            best_val = val_map
            best = (w.copy(), b.copy())
            stale = 0
        else:
            stale += 1
            if stale >= hp.patience:
                break
    w_std, b_std = best
    folded_w = w_std / sigma[:, None]
    folded_b = b_std - (mu / sigma) @ w_std
    probe = LinearProbe(folded_w, folded_b, model_name, list(splits.class_names))
    scores = probe.predict(x[splits.test])
    result = _score_sealed_test("linear", scores, ys["test"].astype(bool),
                                splits.class_names, splits.sizes)
    return probe, result


# ---------------------------------------------------------------------------
# clustering task

@dataclass
class ClusteringResult:
    scope: str             # "full" | "annotated_only"
    label_set: str
    k: int
    ami_score: float
    ari_score: float
    n_scored: int
    assignments: list[int]

    def to_dict(self) -> dict:
        return {"scope": self.scope, "label_set": self.label_set, "k": self.k,
                "ami": self.ami_score, "ari": self.ari_score,
                "n_scored": self.n_scored, "assignments": self.assignments}


def _label_vector(values: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """(defined-row mask, label array) for a label set that may hold None."""
    mask = np.array([v is not None for v in values], dtype=bool)
    labels = np.array([str(v) for v, m in zip(values, mask) if m], dtype=object)
    return mask, labels


def run_clustering_task(embeddings: np.ndarray, default_labels: SegmentLabels,
                        ground_truth: Optional[GroundTruthMatrix],
                        seed: int) -> dict:
    """KMeans the embedding space and score it against every label set.

    Full-dataset clusterings are scored against the default label sets (and
    the ground-truth classes where defined); with annotations, everything is
    repeated on the annotated-only subset, and the ground truth is also
    cross-scored directly against the default labels.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n = x.shape[0]
    label_sets: dict[str, list] = {name: default_labels.label_values(name)
                                   for name in CLUSTERING_LABEL_SETS}
    gt_rows: Optional[list] = None
    if ground_truth is not None:
        if ground_truth.matrix.shape[0] != n:
            raise ValueError("ground truth rows disagree with embeddings")
        gt_rows = ground_truth.row_class_labels()
        label_sets["ground_truth"] = gt_rows

    results: list[ClusteringResult] = []
    skipped: list[dict] = []

    def _cluster_scope(scope: str, rows: np.ndarray) -> None:
        for name, values in label_sets.items():
            sub = [values[i] for i in rows]
            mask, labels = _label_vector(sub)
            distinct = len(set(labels.tolist()))
            if distinct < 2:
                skipped.append({"scope": scope, "label_set": name,
                                "reason": f"fewer than 2 distinct values ({distinct})"})
                log.info("clustering vs %s skipped in %s scope: %d distinct value(s)",
                         name, scope, distinct)
                continue
            k = distinct
            if k > len(rows):
                skipped.append({"scope": scope, "label_set": name,
                                "reason": "more classes than points"})
                continue
            assign, _ = kmeans(x[rows], k, seed)
            scored = assign[mask]
            results.append(ClusteringResult(
                scope, name, k,
                ami(scored.tolist(), labels.tolist()),
                ari(scored.tolist(), labels.tolist()),
                int(mask.sum()), assign.tolist()))

    _cluster_scope("full", np.arange(n))
    cross: list[dict] = []
    if ground_truth is not None:
        annotated = ground_truth.annotated_rows
        if len(annotated) >= 2:
            _cluster_scope("annotated_only", annotated)
        gt_sub = [gt_rows[i] for i in annotated]
        for name in CLUSTERING_LABEL_SETS:
            sub = [default_labels.label_values(name)[i] for i in annotated]
            mask, labels = _label_vector(sub)
            gt_masked = [g for g, m in zip(gt_sub, mask) if m]
            if len(set(labels.tolist())) < 2 or len(set(gt_masked)) < 2:
                continue
            cross.append({"scope": "annotated_only", "label_set_a": "ground_truth",
                          "label_set_b": name,
                          "ami": ami(gt_masked, labels.tolist()),
                          "ari": ari(gt_masked, labels.tolist()),
                          "n_scored": len(gt_masked)})

    if not results and not cross:
        log.warning("clustering task skipped entirely: no label set with >= 2 "
                    "distinct values")
    return {"results": [r.to_dict() for r in results], "cross": cross,
            "skipped": skipped, "seed": seed}


# ---------------------------------------------------------------------------
# benchmarking classifier predictions

def benchmark_predictions(events, ground_truth: GroundTruthMatrix) -> dict:
    """Score prediction events against the ground truth with macro mAP.

    Events are mapped back onto the segment grid (a segment's score for a
    class is the highest score of any overlapping event of that class).
    Prediction classes with no annotation counterpart are ignored with a
    notice; zero name overlap is an error.
    """
    pred_classes = sorted({e.class_name for e in events})
    matched = [c for c in pred_classes if c in ground_truth.class_names]
    ignored = [c for c in pred_classes if c not in ground_truth.class_names]
    if events and not matched:
        raise EchomapError(
            "no overlap between prediction classes "
            f"({', '.join(pred_classes)}) and annotation classes "
            f"({', '.join(ground_truth.class_names)})")
    if ignored:
        log.info("prediction classes without annotations ignored: %s",
                 ", ".join(ignored))
    rows_by_file: dict[str, list[tuple[int, float, float]]] = {}
    for i, (relpath, start, end) in enumerate(ground_truth.timestamps):
        rows_by_file.setdefault(relpath, []).append((i, start, end))
    n = ground_truth.matrix.shape[0]
    col = {name: i for i, name in enumerate(ground_truth.class_names)}
    scores = np.zeros((n, len(ground_truth.class_names)))
    for event in events:
        if event.class_name not in col:
            continue
        c = col[event.class_name]
        for i, start, end in rows_by_file.get(event.audiofilename, []):
            if min(end, event.end) - max(start, event.start) > 0:
                scores[i, c] = max(scores[i, c], event.score)
    per_class, excluded = _per_class_ap(scores, ground_truth.matrix,
                                        ground_truth.class_names)
    if not per_class:
        raise EchomapError("annotations contain no positive rows to score against")
    return {"per_class_ap": per_class,
            "map": float(np.mean(list(per_class.values()))),
            "ignored_prediction_classes": ignored,
            "excluded_classes": excluded}
