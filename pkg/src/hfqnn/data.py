"""ADS-B ingestion and preprocessing: CSV loading, correlation-based feature
pruning, ratio sampling, z-score standardisation, stratified 70/20/10
splitting, label encoding, and synthetic data generators.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import warnings
import zlib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, SchemaError, ShapeError, StateError

log = logging.getLogger(__name__)

# Column order used for every feature matrix. geoaltitude precedes
# baroaltitude so the correlation pruning (which drops the later column of a
# collinear pair) keeps the geometric altitude.
FEATURES = ("time", "icao24", "lat", "lon", "velocity", "heading", "geoaltitude", "baroaltitude")
NUMERIC = tuple(f for f in FEATURES if f != "icao24")
SPLIT_FRACTIONS = (0.7, 0.2, 0.1)
CACHE_VERSION = 1

_ALIASES = {
    "time": ("time", "timestamp", "unixtime", "ts"),
    "icao24": ("icao24", "icao", "icaoaddress", "hexident"),
    "lat": ("lat", "latitude"),
    "lon": ("lon", "lng", "long", "longitude"),
    "velocity": ("velocity", "speed", "groundspeed", "gs"),
    "heading": ("heading", "track", "trueheading"),
    "baroaltitude": ("baroaltitude", "barometricaltitude", "baroalt", "altbaro"),
    "geoaltitude": ("geoaltitude", "geometricaltitude", "geoalt", "altgeom"),
    "label": ("label", "class", "attack", "isattack", "anomaly", "isanomaly", "target", "y"),
}
_LABEL_WORDS = {
    "0": 0, "1": 1, "normal": 0, "attack": 1, "anomaly": 1, "false": 0, "true": 1, "benign": 0,
}


@dataclass(frozen=True)
class FlightRecord:
    time: float
    icao24: str
    lat: float
    lon: float
    velocity: float
    heading: float
    baroaltitude: float
    geoaltitude: float
    label: int


@dataclass
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    # position of each row in the matrix it was drawn from
    row_ids: np.ndarray | None = None
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.feature_names = tuple(self.feature_names)
        if self.values.ndim != 2:
            raise ShapeError(f"feature values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] != self.labels.shape[0]:
            raise ShapeError(f"{self.values.shape[0]} rows but {self.labels.shape[0]} labels")
        if self.values.shape[1] != len(self.feature_names):
            raise ShapeError(f"{self.values.shape[1]} columns but {len(self.feature_names)} feature names")
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.labels))
        self.row_ids = np.asarray(self.row_ids, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, values=self.values[idx], labels=self.labels[idx], row_ids=self.row_ids[idx])

    def columns(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise SchemaError(f"feature matrix lacks columns {missing}")
        cols = [self.feature_names.index(n) for n in names]
        dropped = tuple(n for n in self.feature_names if n not in names)
        return replace(self, values=self.values[:, cols], feature_names=tuple(names), dropped=self.dropped + dropped)


@dataclass
class SplitSet:
    train: FeatureMatrix
    val: FeatureMatrix
    test: FeatureMatrix


@dataclass(frozen=True)
class SamplingPlan:
    n_attack: int
    ratio: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_attack < 1:
            raise ConfigError(f"n_attack must be >= 1, got {self.n_attack}")
        if not self.ratio > 0:
            raise ConfigError(f"ratio must be > 0, got {self.ratio}")

    @property
    def n_normal(self) -> int:
        return math.floor(self.ratio * self.n_attack)


# ---------------------------------------------------------------- loading


def _norm_header(name: str) -> str:
    return "".join(ch for ch in name.strip().lower() if ch.isalnum())


def _parse_label(raw: str) -> int:
    key = raw.strip().lower()
    if key in _LABEL_WORDS:
        return _LABEL_WORDS[key]
    value = float(key)
    if value not in (0.0, 1.0):
        raise ValueError(f"label {raw!r}")
    return int(value)


def read_csv(path) -> tuple[list[FlightRecord], int]:
    """Parse an ADS-B CSV. Returns the records and the number of skipped rows."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty")
        normed = {_norm_header(h): i for i, h in enumerate(header)}
        colmap, missing = {}, []
        for name, aliases in _ALIASES.items():
            hit = next((normed[a] for a in aliases if a in normed), None)
            if hit is None:
                missing.append(name)
            else:
                colmap[name] = hit
        if missing:
            raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")

        records, skipped = [], 0
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                nums = {k: float(row[colmap[k]]) for k in NUMERIC}
                if not all(math.isfinite(v) for v in nums.values()):
                    raise ValueError("non-finite")
                label = _parse_label(row[colmap["label"]])
                records.append(FlightRecord(icao24=row[colmap["icao24"]].strip(), label=label, **nums))
            except (ValueError, IndexError):
                skipped += 1
    if not records:
        raise DataError(f"{path}: no usable rows ({skipped} skipped)")
    if skipped:
        warnings.warn(f"{path}: skipped {skipped} malformed row(s)", stacklevel=2)
    return records, skipped


def load_csv(path) -> list[FlightRecord]:
    return read_csv(path)[0]


def write_csv(records: Iterable[FlightRecord], path) -> None:
    names = [f.name for f in fields(FlightRecord)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in records:
            writer.writerow([repr(getattr(r, n)) if isinstance(getattr(r, n), float) else getattr(r, n) for n in names])


def _icao_code(icao: str) -> float:
    try:
        return float(int(icao, 16))
    except ValueError:
        return float(zlib.crc32(icao.encode()))


def records_to_features(records: Sequence[FlightRecord]) -> FeatureMatrix:
    if not records:
        raise DataError("no records")
    values = np.array(
        [[_icao_code(r.icao24) if f == "icao24" else getattr(r, f) for f in FEATURES] for r in records],
        dtype=float,
    )
    labels = np.array([r.label for r in records], dtype=np.int64)
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 (normal) or 1 (attack)")
    return FeatureMatrix(values, FEATURES, labels)


def dataset_digest(fm: FeatureMatrix) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(fm.feature_names).encode())
    h.update(np.ascontiguousarray(fm.values).tobytes())
    h.update(np.ascontiguousarray(fm.labels).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- feature selection


def correlation_matrix(features: FeatureMatrix) -> np.ndarray:
    """Pearson correlation. Zero-variance columns get 0 off the diagonal."""
    x = features.values
    if x.shape[0] < 2:
        raise DataError(f"correlation needs at least 2 rows, got {x.shape[0]}")
    centered = x - x.mean(axis=0)
    std = np.sqrt((centered**2).mean(axis=0))
    flat = std == 0
    if flat.any():
        names = [n for n, f in zip(features.feature_names, flat) if f]
        warnings.warn(f"zero-variance column(s) {names}; correlation set to 0", stacklevel=2)
    safe = np.where(flat, 1.0, std)
    z = centered / safe
    corr = (z.T @ z) / x.shape[0]
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = np.clip((corr + corr.T) / 2, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def select_features(features: FeatureMatrix, threshold: float = 0.90) -> FeatureMatrix:
    """Drop ``icao24``, then for each pair with |corr| >= threshold drop the later column."""
    if not 0 < threshold <= 1:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    keep = [n for n in features.feature_names if n != "icao24"]
    if not keep:
        raise ConfigError("no features left after dropping icao24")
    sub = features.columns(keep)
    corr = correlation_matrix(sub) if len(sub) >= 2 else np.eye(len(keep))
    alive = [True] * len(keep)
    for i in range(len(keep)):
        if not alive[i]:
            continue
        for j in range(i + 1, len(keep)):
            # tolerance absorbs rounding in an exact-collinearity correlation of 1
            if alive[j] and abs(corr[i, j]) >= threshold - 1e-12:
                alive[j] = False
    kept = [n for n, a in zip(keep, alive) if a]
    if not kept:
        raise ConfigError("feature selection dropped every feature")
    return sub.columns(kept)


# ---------------------------------------------------------------- sampling and splitting


def sample_stratified(data, plan: SamplingPlan) -> FeatureMatrix:
    """Draw exactly ``n_attack`` attack rows and ``floor(ratio * n_attack)`` normal rows, shuffled."""
    fm = data if isinstance(data, FeatureMatrix) else records_to_features(data)
    rng = np.random.default_rng(plan.seed)
    attack = np.flatnonzero(fm.labels == 1)
    normal = np.flatnonzero(fm.labels == 0)
    if len(attack) < plan.n_attack or len(normal) < plan.n_normal:
        raise DataError(
            f"insufficient rows: requested {plan.n_attack} attack / {plan.n_normal} normal, "
            f"available {len(attack)} attack / {len(normal)} normal"
        )
    chosen = np.concatenate(
        [rng.choice(attack, plan.n_attack, replace=False), rng.choice(normal, plan.n_normal, replace=False)]
    )
    return fm.take(rng.permutation(chosen))


def _apportion(total: int, fractions: Sequence[float]) -> list[list[int]]:
    """All floor/ceil roundings of ``total * fractions`` that sum to ``total``."""
    targets = [total * f for f in fractions]
    options = [sorted({math.floor(t), math.ceil(t)}) for t in targets]
    return [list(c) for c in itertools.product(*options) if sum(c) == total]


def stratified_counts(class_sizes: Sequence[int], fractions=SPLIT_FRACTIONS) -> np.ndarray:
    """Integer [class, split] table: every cell, and every split total, rounds its exact target.

    Controlled rounding of a two-way table always exists; with two classes and
    three splits the search space is at most 9 candidates.
    """
    n = sum(class_sizes)
    split_targets = np.array([n * f for f in fractions])
    best, best_err = None, None
    for rows in itertools.product(*(_apportion(c, fractions) for c in class_sizes)):
        table = np.array(rows)
        cols = table.sum(axis=0)
        if np.any(np.abs(cols - split_targets) >= 1):
            continue
        exact = np.outer(class_sizes, fractions)
        err = float(np.sum((table - exact) ** 2) + np.sum((cols - split_targets) ** 2))
        if best_err is None or err < best_err - 1e-12:
            best, best_err = table, err
    if best is None:  # pragma: no cover - controlled rounding guarantees a solution
        raise DataError(f"no stratified allocation for class sizes {class_sizes}")
    return best


def split_70_20_10(features: FeatureMatrix, seed: int) -> SplitSet:
    n = len(features)
    if n < 10:
        raise DataError(f"splitting needs at least 10 rows, got {n}")
    classes = np.unique(features.labels)
    members = [np.flatnonzero(features.labels == c) for c in classes]
    for c, m in zip(classes, members):
        if len(m) < 3:
            raise DataError(f"class {c} has only {len(m)} row(s); need at least 3 to stratify")
    counts = stratified_counts([len(m) for m in members])
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for m, row in zip(members, counts):
        perm = rng.permutation(m)
        bounds = np.cumsum(row)[:-1]
        for s, chunk in enumerate(np.split(perm, bounds)):
            parts[s].append(chunk)
    train, val, test = (features.take(rng.permutation(np.concatenate(p))) for p in parts)
    return SplitSet(train, val, test)


# ---------------------------------------------------------------- standardisation


class Standardizer:
    """Per-column z-score with population standard deviation."""

    def __init__(self, mean=None, scale=None, feature_names: Sequence[str] | None = None):
        self.mean = None if mean is None else np.asarray(mean, dtype=float)
        self.scale = None if scale is None else np.asarray(scale, dtype=float)
        self.feature_names = None if feature_names is None else tuple(feature_names)

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.scale is not None

    def fit(self, train: FeatureMatrix) -> "Standardizer":
        if len(train) == 0:
            raise DataError("cannot fit a standardizer on an empty split")
        self.mean = train.values.mean(axis=0)
        std = train.values.std(axis=0)
        flat = std == 0
        if flat.any():
            names = [n for n, f in zip(train.feature_names, flat) if f]
            warnings.warn(f"zero-variance column(s) {names}; using unit scale", stacklevel=2)
        self.scale = np.where(flat, 1.0, std)
        self.feature_names = train.feature_names
        return self

    def _check(self, fm: FeatureMatrix) -> None:
        if not self.fitted:
            raise StateError("standardizer has not been fitted")
        if fm.n_features != len(self.mean):
            raise ShapeError(f"standardizer fitted on {len(self.mean)} features, got {fm.n_features}")

    def transform(self, fm: FeatureMatrix) -> FeatureMatrix:
        self._check(fm)
        return replace(fm, values=(fm.values - self.mean) / self.scale)

    def inverse_transform(self, fm: FeatureMatrix) -> FeatureMatrix:
        self._check(fm)
        return replace(fm, values=fm.values * self.scale + self.mean)


def fit_standardizer(train: FeatureMatrix) -> Standardizer:
    return Standardizer().fit(train)


def apply_standardizer(stats: Standardizer | None, fm: FeatureMatrix) -> FeatureMatrix:
    if stats is None:
        raise StateError("standardizer has not been fitted")
    return stats.transform(fm)


# ---------------------------------------------------------------- labels


def encode_labels(labels, loss) -> np.ndarray:
    """One-hot [N, 2] for ``bce``; integer passthrough for ``ce``."""
    y = np.asarray(labels)
    if y.ndim != 1 or (y.size and not np.isin(y, (0, 1)).all()):
        raise DataError("labels must be a 1-D vector of 0/1 values")
    y = y.astype(np.int64)
    kind = str(getattr(loss, "value", loss)).lower()
    if kind == "bce":
        return np.eye(2)[y]
    if kind == "ce":
        return y
    raise ConfigError(f"unknown loss kind {loss!r}")


# ---------------------------------------------------------------- split cache


def split_cache_key(digest: str, plan: SamplingPlan, seed: int, threshold: float) -> str:
    payload = json.dumps(
        {"v": CACHE_VERSION, "data": digest, "n_attack": plan.n_attack, "ratio": plan.ratio,
         "plan_seed": plan.seed, "seed": seed, "threshold": threshold},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def save_split_cache(directory, key: str, split: SplitSet) -> Path:
    path = Path(directory) / f"split-{key}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {"version": np.array(CACHE_VERSION)}
    for name in ("train", "val", "test"):
        fm = getattr(split, name)
        arrays[f"{name}_values"] = fm.values
        arrays[f"{name}_labels"] = fm.labels
        arrays[f"{name}_rows"] = fm.row_ids
    arrays["names"] = np.array(split.train.feature_names)
    arrays["dropped"] = np.array(split.train.dropped, dtype=str)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_split_cache(directory, key: str) -> SplitSet | None:
    path = Path(directory) / f"split-{key}.npz"
    if not path.exists():
        return None
    with np.load(path) as z:
        if int(z["version"]) != CACHE_VERSION:
            log.warning("ignoring split cache %s with version %s", path, int(z["version"]))
            return None
        names = tuple(str(n) for n in z["names"])
        dropped = tuple(str(n) for n in z["dropped"])
        parts = [
            FeatureMatrix(z[f"{s}_values"], names, z[f"{s}_labels"], z[f"{s}_rows"], dropped)
            for s in ("train", "val", "test")
        ]
    return SplitSet(*parts)


# ---------------------------------------------------------------- synthetic data

_EARTH_M_PER_DEG = 111_320.0

# Fixed airway corridors as (lat, lon, heading). Normal traffic flies along one
# of these, so position and heading are jointly informative per row.
_CORRIDORS = (
    (44.0, -8.0, 60.0),
    (49.0, -6.0, 120.0),
    (41.0, 2.0, 15.0),
    (47.0, 8.0, 250.0),
)
_CORRIDOR_SPAN_M = 600_000.0


def _trajectory(
    rng: np.random.Generator, steps: int, corridor: int, dt: float = 10.0
) -> dict[str, np.ndarray]:
    lat_c, lon_c, hdg_c = _CORRIDORS[corridor]
    along = rng.uniform(0, _CORRIDOR_SPAN_M)
    across = rng.normal(0, 3_000.0)
    rad_c = np.deg2rad(hdg_c)
    north = along * np.cos(rad_c) - across * np.sin(rad_c)
    east = along * np.sin(rad_c) + across * np.cos(rad_c)
    lat0 = lat_c + north / _EARTH_M_PER_DEG
    lon0 = lon_c + east / (_EARTH_M_PER_DEG * np.cos(np.deg2rad(lat_c)))
    t0 = 1.6e9 + rng.uniform(0, 86_400)
    heading = (hdg_c + rng.normal(0, 2.0) + np.cumsum(rng.normal(0, 0.3, steps))) % 360
    velocity = rng.uniform(180, 260) + np.cumsum(rng.normal(0, 0.3, steps))
    alt = rng.uniform(8_000, 12_000) + np.cumsum(rng.normal(0, 2.0, steps))
    rad = np.deg2rad(heading)
    dlat = velocity * dt * np.cos(rad) / _EARTH_M_PER_DEG
    lat = lat0 + np.concatenate([[0.0], np.cumsum(dlat[:-1])])
    dlon = velocity * dt * np.sin(rad) / (_EARTH_M_PER_DEG * np.cos(np.deg2rad(lat)))
    lon = lon0 + np.concatenate([[0.0], np.cumsum(dlon[:-1])])
    return {
        "time": t0 + dt * np.arange(steps),
        "lat": lat,
        "lon": lon,
        "velocity": velocity,
        "heading": heading,
        "baroaltitude": alt,
    }


def generate_synthetic(
    n_normal: int,
    n_attack: int,
    seed: int,
    drift: float = 0.05,
    steps: int = 10,
    geo_offset: float = 120.0,
) -> list[FlightRecord]:
    """Synthetic corridor traffic with drift and merge attacks.

    Normal flights follow one of a few fixed airways. Drift attacks push the
    reported position off the airway by ``drift`` degrees per step. Merge
    attacks splice in positions from a flight on another airway while keeping
    the original heading and speed. Geometric altitude is barometric altitude
    plus ``geo_offset`` so the two are exactly collinear.
    """
    if n_normal < 0 or n_attack < 0:
        raise ConfigError("record counts must be non-negative")
    rng = np.random.default_rng(seed)
    n_routes = len(_CORRIDORS)

    def rows(count: int, label: int) -> list[FlightRecord]:
        out: list[FlightRecord] = []
        flight = 0
        while len(out) < count:
            route = int(rng.integers(0, n_routes))
            traj = _trajectory(rng, steps, route)
            icao = f"{rng.integers(0, 2**24):06x}"
            if label == 1 and flight % 2 == 0:
                # Push sideways relative to the airway.
                side = np.deg2rad(_CORRIDORS[route][2] + rng.choice([-90.0, 90.0]))
                rate = drift * rng.uniform(0.5, 1.5)
                k = np.arange(1, steps + 1)
                traj["lat"] = traj["lat"] + rate * np.cos(side) * k
                traj["lon"] = traj["lon"] + rate * np.sin(side) * k
            elif label == 1:
                other_route = (route + int(rng.integers(1, n_routes))) % n_routes
                other = _trajectory(rng, steps, other_route)
                cut = int(rng.integers(1, steps // 2))
                for key in ("lat", "lon"):
                    traj[key] = np.concatenate([traj[key][:cut], other[key][cut:]])
            for i in range(steps):
                if len(out) == count:
                    break
                baro = float(traj["baroaltitude"][i])
                out.append(
                    FlightRecord(
                        time=float(traj["time"][i]),
                        icao24=icao,
                        lat=float(traj["lat"][i]),
                        lon=float(traj["lon"][i]),
                        velocity=float(traj["velocity"][i]),
                        heading=float(traj["heading"][i]),
                        baroaltitude=baro,
                        geoaltitude=baro + geo_offset,
                        label=label,
                    )
                )
            flight += 1
        return out

    return rows(n_normal, 0) + rows(n_attack, 1)


def make_separable(
    n_samples: int = 600,
    n_informative: int = 2,
    n_noise: int = 4,
    seed: int = 0,
    margin: float = 0.3,
) -> FeatureMatrix:
    """Linearly separable binary set: the label is the side of a random hyperplane
    through the informative features; points inside ``margin`` are pushed out.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=n_informative)
    direction /= np.linalg.norm(direction)
    informative = rng.normal(size=(n_samples, n_informative))
    proj = informative @ direction
    labels = (proj > 0).astype(np.int64)
    sign = np.where(labels == 1, 1.0, -1.0)
    informative += np.outer(sign * np.maximum(margin - np.abs(proj), 0.0), direction)
    noise = rng.normal(size=(n_samples, n_noise))
    values = np.hstack([informative, noise])
    names = [f"x{i}" for i in range(n_informative)] + [f"noise{i}" for i in range(n_noise)]
    return FeatureMatrix(values, names, labels)
