"""Distance-to-centroid anomaly scoring over final node embeddings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

RADIUS_EPS = 1e-9


@dataclass(frozen=True)
class BenignProfile:
    centroid: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("profile radius must be positive")
        if not np.isfinite(self.centroid).all():
            raise ValueError("profile centroid must be finite")

    def save(self, path: Union[str, Path]) -> None:
        doc = {"centroid": [float(x) for x in self.centroid], "radius": float(self.radius)}
        Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BenignProfile":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(np.asarray(doc["centroid"], dtype=np.float64), float(doc["radius"]))


@dataclass(frozen=True)
class Alert:
    interval: int
    node: int
    score: float
    attr: str = ""
    node_key: str = ""

    def to_json(self) -> dict:
        return {
            "interval": self.interval,
            "node_key": self.node_key,
            "score": self.score,
            "attr": self.attr,
        }


def fit_profile(benign: Sequence, quantile: float = 0.999, eps: float = RADIUS_EPS) -> BenignProfile:
    """Centroid and distance-quantile radius of a benign embedding set."""
    X = np.asarray(benign, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_profile needs a non-empty 2-D set of embeddings")
    centroid = X.mean(axis=0)
    dist = np.linalg.norm(X - centroid, axis=1)
    return BenignProfile(centroid, max(float(np.quantile(dist, quantile)), eps))


def score(embeddings, profile: BenignProfile) -> np.ndarray:
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != profile.centroid.shape[0]:
        raise ValueError(
            f"embedding dim {X.shape[-1] if X.ndim else None} does not match "
            f"profile dim {profile.centroid.shape[0]}"
        )
    return np.linalg.norm(X - profile.centroid, axis=1)


def detect(
    node_ids: Iterable[int],
    embeddings,
    profile: BenignProfile,
    interval: int = 0,
    attrs: Sequence[str] | None = None,
    keys: Sequence[str] | None = None,
) -> tuple[list[tuple[int, float]], list[Alert]]:
    """Score nodes and raise alerts for those beyond the profile radius.

    ``attrs`` / ``keys``, when given, are indexed by node id. Both returned
    lists are ordered by score descending, then node id ascending.
    """
    ids = [int(i) for i in node_ids]
    s = score(embeddings, profile) if ids else np.zeros(0)
    ranked = sorted(zip(ids, s.tolist()), key=lambda p: (-p[1], p[0]))
    alerts = [
        Alert(
            interval,
            v,
            sc,
            attrs[v] if attrs is not None else "",
            keys[v] if keys is not None else str(v),
        )
        for v, sc in ranked
        if sc > profile.radius
    ]
    return ranked, alerts


class CentroidDistanceDetector(OutlierMixin, BaseEstimator):
    """Flags embeddings farther than a benign distance quantile from the centroid.

    Parameters
    ----------
    quantile : float, default=0.999
        Quantile of benign distances used as the alert radius.
    eps : float, default=1e-9
        Lower clamp on the radius.

    Attributes
    ----------
    centroid_ : ndarray of shape (n_features,)
    radius_ : float
    """

    def __init__(self, quantile: float = 0.999, eps: float = RADIUS_EPS):
        self.quantile = quantile
        self.eps = eps

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not 0 <= self.quantile <= 1:
            raise ValueError("quantile must lie in [0, 1]")
        prof = fit_profile(X, self.quantile, self.eps)
        self.centroid_ = prof.centroid
        self.radius_ = prof.radius
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def profile_(self) -> BenignProfile:
        check_is_fitted(self, ["centroid_", "radius_"])
        return BenignProfile(self.centroid_, self.radius_)

    def score_samples(self, X) -> np.ndarray:
        """Negated distance, so larger means more normal (sklearn convention)."""
        check_is_fitted(self, ["centroid_", "radius_"])
        X = check_array(X, dtype=np.float64)
        return -score(X, self.profile_)

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X) + self.radius_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) < 0, -1, 1)
