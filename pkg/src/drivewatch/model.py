"""Min-max scaling, 2-cluster Lloyd's KMeans, cluster labeling against a
regular-driving baseline, per-window prediction, and versioned persistence."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConstantFeatureWarning,
    CorruptModel,
    DegenerateDataWarning,
    EmptyBaseline,
    EmptyTrainingSet,
    NonFiniteFeature,
    SchemaMismatch,
    TooFewPoints,
    VersionMismatch,
)
from .features import GROUP_SLICES, FeatureSchema, WindowFeatures, schema_for

MODEL_FILE_VERSION = 1
LABEL_REGULAR = "regular"
LABEL_IRREGULAR = "irregular"


@dataclass
class MinMaxScaler:
    """Per-feature linear map of the training range onto [0, 1].

    Constant features map to 0; out-of-range inputs extrapolate beyond
    [0, 1] on purpose (flagged, not clipped) so live distances stay
    meaningful.
    """

    min_: np.ndarray
    max_: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "MinMaxScaler":
        X = np.asarray(matrix, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingSet("scaler needs a non-empty 2-D matrix")
        if X.shape[0] < 2:
            raise EmptyTrainingSet("scaler needs >= 2 rows")
        if not np.all(np.isfinite(X)):
            raise NonFiniteFeature("training matrix contains non-finite values")
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        constant = np.flatnonzero(hi == lo)
        if constant.size:
            warnings.warn(
                f"{constant.size} constant feature column(s): {constant.tolist()}",
                ConstantFeatureWarning,
                stacklevel=2,
            )
        return cls(lo, hi)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise NonFiniteFeature("vector contains non-finite values")
        span = self.max_ - self.min_
        safe = np.where(span > 0, span, 1.0)
        out = (x - self.min_) / safe
        return np.where(span > 0, out, 0.0)

    def to_dict(self) -> dict:
        return {"min": self.min_.tolist(), "max": self.max_.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MinMaxScaler":
        return cls(np.array(data["min"], dtype=float), np.array(data["max"], dtype=float))


# --- Lloyd's clustering ----------------------------------------------------


@dataclass
class KMeansResult:
    centroids: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list[float]
    assignments: np.ndarray


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def partition_inertia(X: np.ndarray, assign: np.ndarray, k: int = 2) -> float:
    """Sum of squared distances of points to their cluster means.

    Shared by Lloyd's and the exhaustive search so optimal results compare
    exactly (identical arithmetic on identical partitions).
    """
    total = 0.0
    for j in range(k):
        members = X[assign == j]
        if members.shape[0] == 0:
            continue
        c = members.mean(axis=0)
        total += float(np.sum((members - c) ** 2))
    return total


def _partition_means(X: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((k, X.shape[1]), dtype=float)
    for j in range(k):
        members = X[assign == j]
        out[j] = members.mean(axis=0)
    return out


def _farthest_point_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    first = int(rng.integers(X.shape[0]))
    chosen = [first]
    min_sq = np.sum((X - X[first]) ** 2, axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_sq))
        chosen.append(nxt)
        min_sq = np.minimum(min_sq, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[chosen].copy()


def kmeans_fit(
    matrix: np.ndarray,
    k: int = 2,
    rng_seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    init: np.ndarray | None = None,
) -> KMeansResult:
    """Lloyd's iterations with greedy farthest-point seeding.

    Assignment breaks ties toward the lower cluster index; an emptied
    cluster seizes the point currently farthest from its own centroid.
    Inertia (recomputed after each mean update) is asserted non-increasing.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise TooFewPoints("need a 2-D matrix with >= 1 feature")
    n = X.shape[0]
    if n < k:
        raise TooFewPoints(f"{n} points for k={k}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("clustering matrix contains non-finite values")

    if np.all(X == X[0]):
        warnings.warn("all points identical; centroids coincide", DegenerateDataWarning, stacklevel=2)
        centroids = np.tile(X[0], (k, 1))
        return KMeansResult(centroids, 0.0, 0, [0.0], np.zeros(n, dtype=int))

    if init is not None:
        centroids = np.asarray(init, dtype=float).copy()
        if centroids.shape != (k, X.shape[1]):
            raise ValueError(f"init must be {k}x{X.shape[1]}")
    else:
        centroids = _farthest_point_init(X, k, np.random.default_rng(rng_seed))

    history: list[float] = []
    assign = np.zeros(n, dtype=int)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_distances(X, centroids)
        assign = np.argmin(d2, axis=1)
        for j in range(k):
            if np.any(assign == j):
                continue
            # Seize the point farthest from its current centroid.
            cur = d2[np.arange(n), assign]
            cur[np.isin(np.arange(n), np.flatnonzero(assign == j))] = -np.inf
            assign[int(np.argmax(cur))] = j
        new_centroids = _partition_means(X, assign, k)
        inertia = partition_inertia(X, assign, k)
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"inertia increased: {history[-1]} -> {inertia}")
        history.append(inertia)
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift <= tol:
            break
    return KMeansResult(centroids, history[-1], iterations, history, assign)


def kmeans_fit_exhaustive_pairs(
    matrix: np.ndarray, max_iter: int = 300, tol: float = 1e-6
) -> KMeansResult:
    """Small-instance oracle mode: Lloyd's from every distinct point pair."""
    X = np.asarray(matrix, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise TooFewPoints(f"{n} points for k=2")
    best: KMeansResult | None = None
    seen: set[tuple] = set()
    for i in range(n):
        for j in range(i + 1, n):
            key = (tuple(X[i]), tuple(X[j]))
            if key in seen or key[0] == key[1]:
                continue
            seen.add(key)
            result = kmeans_fit(X, k=2, max_iter=max_iter, tol=tol, init=np.array([X[i], X[j]]))
            if best is None or result.inertia < best.inertia:
                best = result
    if best is None:
        # Every point identical; the degenerate path handles it.
        return kmeans_fit(X, k=2, max_iter=max_iter, tol=tol)
    return best


def exhaustive_two_partition(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Optimal 2-partition by enumeration; independent check for tiny n."""
    X = np.asarray(matrix, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise TooFewPoints(f"{n} points for 2-partition")
    if n > 20:
        raise ValueError("exhaustive search limited to n <= 20")
    best_assign: np.ndarray | None = None
    best = float("inf")
    # Fix point 0 in cluster 0 to halve the enumeration.
    for mask in range(1, 2 ** (n - 1)):
        assign = np.zeros(n, dtype=int)
        for b in range(n - 1):
            if mask >> b & 1:
                assign[b + 1] = 1
        inertia = partition_inertia(X, assign, 2)
        if inertia < best:
            best = inertia
            best_assign = assign
    assert best_assign is not None
    return best_assign, best


def silhouette_score(matrix: np.ndarray, assign: np.ndarray) -> float:
    """Mean silhouette coefficient for a clustering assignment.

    s(i) = (b - a) / max(a, b) with a = mean intra-cluster distance and
    b = mean distance to the other cluster; singletons score 0.
    """
    X = np.asarray(matrix, dtype=float)
    labels = np.asarray(assign)
    n = X.shape[0]
    if n < 3 or len(np.unique(labels)) < 2:
        return 0.0
    dist = np.sqrt(np.maximum(_sq_distances(X, X), 0.0))
    scores = np.empty(n)
    for i in range(n):
        own = labels == labels[i]
        own[i] = False
        other = labels != labels[i]
        if not own.any():
            scores[i] = 0.0
            continue
        a = float(dist[i, own].mean())
        b = float(dist[i, other].mean())
        top = max(a, b)
        scores[i] = 0.0 if top == 0 else (b - a) / top
    return float(np.mean(scores))


# --- cluster labeling -------------------------------------------------------


def assign_labels(
    centroids: np.ndarray, baseline_scaled: np.ndarray
) -> tuple[dict[int, str], dict]:
    """Map cluster indices to labels using regular-driving baseline windows.

    The cluster capturing the minority of baseline windows is irregular;
    a 50/50 tie marks the cluster whose centroid lies farther from the
    baseline mean.
    """
    B = np.atleast_2d(np.asarray(baseline_scaled, dtype=float))
    if B.size == 0:
        raise EmptyBaseline("no baseline windows")
    assign = np.argmin(_sq_distances(B, centroids), axis=1)
    counts = [int(np.sum(assign == 0)), int(np.sum(assign == 1))]
    tie = counts[0] == counts[1]
    if tie:
        bc = B.mean(axis=0)
        dists = np.linalg.norm(centroids - bc, axis=1)
        irregular = int(np.argmax(dists))
    else:
        irregular = int(np.argmin(counts))
    label_map = {
        irregular: LABEL_IRREGULAR,
        1 - irregular: LABEL_REGULAR,
    }
    evidence = {"baseline_counts": counts, "tie_broken": tie}
    return label_map, evidence


# --- prediction ---------------------------------------------------------------


@dataclass
class Prediction:
    window_start_ms: int
    window_end_ms: int
    cluster: int
    label: str
    distances: tuple[float, float]
    margin: float
    group_deviation: dict[str, float]
    extrapolated: bool
    eye_included: bool


@dataclass
class IrregularityModel:
    """One fitted variant: scaler + 2 centroids + label map over a schema."""

    scaler: MinMaxScaler
    centroids: np.ndarray
    label_map: dict[int, str]
    schema: FeatureSchema
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.centroids.shape[0] != 2:
            raise ValueError("exactly 2 centroids required")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")
        if sorted(self.label_map.values()) != [LABEL_IRREGULAR, LABEL_REGULAR]:
            raise ValueError("label_map must be a bijection onto {regular, irregular}")

    @property
    def regular_cluster(self) -> int:
        return next(i for i, lbl in self.label_map.items() if lbl == LABEL_REGULAR)

    def predict_vector(self, vector: np.ndarray, start_ms: int = 0, end_ms: int = 0) -> Prediction:
        x = np.asarray(vector, dtype=float)
        if x.shape != (len(self.schema),):
            raise SchemaMismatch(f"vector has {x.shape[0]} features, schema expects {len(self.schema)}")
        scaled = self.scaler.transform(x)
        d = np.sqrt(np.sum((self.centroids - scaled) ** 2, axis=1))
        cluster = int(np.argmin(d))
        regular = self.regular_cluster
        irregular = 1 - regular
        c_reg = self.centroids[regular]
        deviation: dict[str, float] = {}
        for group, (lo, hi) in GROUP_SLICES.items():
            if hi > len(self.schema):
                continue
            deviation[group] = float(np.linalg.norm(scaled[lo:hi] - c_reg[lo:hi]))
        return Prediction(
            window_start_ms=start_ms,
            window_end_ms=end_ms,
            cluster=cluster,
            label=self.label_map[cluster],
            distances=(float(d[0]), float(d[1])),
            margin=float(d[regular] - d[irregular]),
            group_deviation=deviation,
            extrapolated=bool(np.any((scaled < 0.0) | (scaled > 1.0))),
            eye_included=self.schema.eye_included,
        )

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "scaler": self.scaler.to_dict(),
            "centroids": [row.tolist() for row in self.centroids],
            "label_map": {str(i): lbl for i, lbl in self.label_map.items()},
            "train_meta": self.train_meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IrregularityModel":
        return cls(
            scaler=MinMaxScaler.from_dict(data["scaler"]),
            centroids=np.array(data["centroids"], dtype=float),
            label_map={int(i): lbl for i, lbl in data["label_map"].items()},
            schema=FeatureSchema.from_dict(data["schema"]),
            train_meta=data.get("train_meta", {}),
        )


@dataclass
class ModelArtifact:
    """Trained artifact holding the eye-enabled and eye-less variants."""

    variants: dict[str, IrregularityModel]

    @property
    def primary(self) -> IrregularityModel:
        return self.variants.get("eye") or self.variants["eyeless"]

    def variant_for(self, eye_included: bool) -> IrregularityModel:
        if eye_included and "eye" in self.variants:
            return self.variants["eye"]
        if "eyeless" in self.variants:
            return self.variants["eyeless"]
        raise SchemaMismatch("model has no eye-less variant for an eye-less window")

    def predict(self, wf: WindowFeatures) -> Prediction:
        """Score one window, selecting the variant by the window's schema."""
        eye = wf.eye is not None
        model = self.variant_for(eye)
        vector = wf.vector()
        if len(model.schema) < vector.shape[0]:
            vector = vector[: len(model.schema)]
        return model.predict_vector(vector, wf.window_start_ms, wf.window_end_ms)


def predict(artifact: ModelArtifact, wf: WindowFeatures) -> Prediction:
    return artifact.predict(wf)


# --- training ----------------------------------------------------------------


def _fit_variant(
    matrix: np.ndarray,
    baseline_mask: np.ndarray,
    schema: FeatureSchema,
    rng_seed: int,
    max_iter: int,
    tol: float,
) -> IrregularityModel:
    scaler = MinMaxScaler.fit(matrix)
    scaled = scaler.transform(matrix)
    result = kmeans_fit(scaled, k=2, rng_seed=rng_seed, max_iter=max_iter, tol=tol)
    if not np.any(baseline_mask):
        raise EmptyBaseline("no baseline windows for label assignment")
    label_map, evidence = assign_labels(result.centroids, scaled[baseline_mask])
    meta = {
        "n_windows": int(matrix.shape[0]),
        "rng_seed": rng_seed,
        "iterations_run": result.iterations,
        "inertia": result.inertia,
        **evidence,
    }
    return IrregularityModel(scaler, result.centroids, label_map, schema, meta)


def train_artifact(
    windows: list[WindowFeatures],
    baseline: list[bool],
    rng_seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ModelArtifact:
    """Fit both variants: eye-less from every window, eye from gaze-ok ones."""
    if len(windows) != len(baseline):
        raise ValueError("windows and baseline flags must align")
    if not windows:
        raise EmptyTrainingSet("no feature windows")
    d_eyeless = len(schema_for(False))
    eyeless_matrix = np.array([wf.vector()[:d_eyeless] for wf in windows])
    baseline_mask = np.array(baseline, dtype=bool)
    variants: dict[str, IrregularityModel] = {
        "eyeless": _fit_variant(eyeless_matrix, baseline_mask, schema_for(False), rng_seed, max_iter, tol)
    }
    eye_rows = [i for i, wf in enumerate(windows) if wf.eye is not None]
    if len(eye_rows) >= 2 and any(baseline_mask[i] for i in eye_rows):
        eye_matrix = np.array([windows[i].vector() for i in eye_rows])
        eye_baseline = baseline_mask[eye_rows]
        variants["eye"] = _fit_variant(eye_matrix, eye_baseline, schema_for(True), rng_seed, max_iter, tol)
    return ModelArtifact(variants)


# --- persistence --------------------------------------------------------------


def _canonical_payload(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def save_model(artifact: ModelArtifact, path: str | Path) -> None:
    """Versioned JSON with a sha256 checksum; floats keep full precision."""
    primary = artifact.primary
    eyeless = artifact.variants.get("eyeless")
    payload = {"version": MODEL_FILE_VERSION, **primary.to_dict()}
    if primary.schema.eye_included and eyeless is not None:
        payload["eyeless"] = eyeless.to_dict()
    else:
        payload["eyeless"] = None
    checksum = hashlib.sha256(_canonical_payload(payload).encode()).hexdigest()
    Path(path).write_text(json.dumps({**payload, "checksum": checksum}, indent=2) + "\n")


def load_model(path: str | Path) -> ModelArtifact:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or "checksum" not in data:
        raise CorruptModel(f"{path}: missing checksum")
    checksum = data.pop("checksum")
    if data.get("version") != MODEL_FILE_VERSION:
        raise VersionMismatch(f"{path}: unsupported model file version {data.get('version')!r}")
    expect = hashlib.sha256(_canonical_payload(data).encode()).hexdigest()
    if checksum != expect:
        raise CorruptModel(f"{path}: checksum mismatch")
    eyeless_data = data.pop("eyeless", None)
    primary = IrregularityModel.from_dict(data)
    variants: dict[str, IrregularityModel] = {}
    if primary.schema.eye_included:
        variants["eye"] = primary
        if eyeless_data is not None:
            variants["eyeless"] = IrregularityModel.from_dict(eyeless_data)
    else:
        variants["eyeless"] = primary
    return ModelArtifact(variants)
