"""Classification in reduced spaces, cross-validation over LDA dimension,
centroid-based class merging, and reduced-attribute evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lda
from .errors import BadTargetCount, EmptyClass, FoldClassMissing
from .features import LabeledDataset, apply_standardization, standardization
from .signal_io import FoldAssignment

logger = logging.getLogger(__name__)

D_TOLERANCE = 0.01


@dataclass
class GroupingMap:
    """Label name -> initial category, and initial category -> merged class id."""

    initial: dict[str, str]
    final: dict[str, int] = field(default_factory=dict)
    k_final: Optional[int] = None

    def merged_id(self, label_name: str) -> int:
        return self.final[self.initial[label_name]]


class CentroidClassifier:
    """Nearest class centroid, Euclidean; ties go to the lowest class id."""

    def __init__(self, classes: np.ndarray, centroids: np.ndarray):
        self.classes = classes
        self.centroids = centroids

    def predict(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        d2 = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return self.classes[np.argmin(d2, axis=1)]


class KNNClassifier:
    """k nearest neighbours, majority vote; vote ties go to the lowest class id."""

    def __init__(self, z: np.ndarray, y: np.ndarray, k: int = 5):
        self.z = z
        self.y = y
        self.k = min(k, len(y))
        self.classes = np.unique(y)

    def predict(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        out = np.empty(len(z), dtype=self.y.dtype)
        for i in range(0, len(z), 512):
            block = z[i : i + 512]
            d2 = ((block[:, None, :] - self.z[None, :, :]) ** 2).sum(axis=2)
            nn = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            votes = (self.y[nn][:, :, None] == self.classes[None, None, :]).sum(axis=1)
            out[i : i + 512] = self.classes[np.argmax(votes, axis=1)]
        return out


def fit_centroid_classifier(z: np.ndarray, y: np.ndarray, classes=None) -> CentroidClassifier:
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    y = np.asarray(y)
    cls = np.unique(y) if classes is None else np.asarray(classes)
    centroids = np.empty((len(cls), z.shape[1]))
    for j, c in enumerate(cls):
        members = z[y == c]
        if len(members) == 0:
            raise EmptyClass(f"class {c} has no training rows")
        centroids[j] = members.mean(axis=0)
    return CentroidClassifier(cls, centroids)


def make_classifier(kind: str, z, y, classes=None):
    if kind == "centroid":
        return fit_centroid_classifier(z, y, classes)
    if kind == "knn":
        return KNNClassifier(np.asarray(z, dtype=np.float64), np.asarray(y))
    raise ValueError(f"unknown classifier {kind!r}")


@dataclass
class CVReport:
    per_dimension: list[tuple[int, float, list[float]]]
    baseline_accuracy: float
    baseline_folds: list[float]
    chosen_d: Optional[int]
    confusion: np.ndarray
    class_names: list[str]
    attrs: Optional[list[int]] = None

    def accuracy_at(self, d: int) -> float:
        for dd, acc, _ in self.per_dimension:
            if dd == d:
                return acc
        raise KeyError(d)

    def to_dict(self) -> dict:
        return {
            "per_dimension": [
                {"d": d, "mean_accuracy": acc, "fold_accuracies": folds}
                for d, acc, folds in self.per_dimension
            ],
            "baseline_accuracy": self.baseline_accuracy,
            "baseline_fold_accuracies": self.baseline_folds,
            "chosen_d": self.chosen_d,
            "confusion": self.confusion.tolist(),
            "class_names": self.class_names,
            "attrs": self.attrs,
        }


def choose_dimension(per_dimension, tolerance: float = D_TOLERANCE) -> int:
    """Smallest d whose mean accuracy is within ``tolerance`` of the best."""
    best = max(acc for _, acc, _ in per_dimension)
    return min(d for d, acc, _ in per_dimension if acc >= best - tolerance)


def confusion_matrix(y_true, y_pred, k: int) -> np.ndarray:
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def _check_folds(y: np.ndarray, folds: FoldAssignment, k: int):
    if len(folds.fold_of) != len(y):
        raise ValueError(f"fold assignment covers {len(folds.fold_of)} of {len(y)} samples")
    for f in range(folds.n_folds):
        missing = np.setdiff1d(np.arange(k), y[folds.train_indices(f)])
        if len(missing):
            raise FoldClassMissing(f"fold {f} training split lacks classes {missing.tolist()}")


def _split_standardize(raw, train, test):
    mean, std = standardization(raw[train])
    return apply_standardization(raw[train], mean, std), apply_standardization(raw[test], mean, std)


def cross_validate(
    data: LabeledDataset,
    folds: FoldAssignment,
    d_range: Optional[Sequence[int]] = None,
    epsilon: Optional[float] = None,
    classifier: str = "centroid",
) -> CVReport:
    """Fold-wise LDA + classifier accuracy for each projection dimension.

    Standardization, the LDA fit and the classifier see only the training
    split of each fold. The unprojected standardized features give the
    baseline. The confusion matrix is summed over folds at the chosen d.
    """
    k = data.n_classes
    y = data.labels
    d_range = list(range(1, k)) if d_range is None else sorted(set(int(d) for d in d_range))
    if not d_range or d_range[0] < 1 or d_range[-1] > k - 1:
        raise ValueError(f"d_range must lie in [1, {k - 1}], got {d_range}")
    _check_folds(y, folds, k)
    classes = np.arange(k)

    correct = {d: [] for d in d_range}
    preds = {d: np.empty(len(y), dtype=np.int64) for d in d_range}
    base_folds = []
    for train, test in folds.splits():
        xtr, xte = _split_standardize(data.raw, train, test)
        base = make_classifier(classifier, xtr, y[train], classes)
        base_folds.append(float(np.mean(base.predict(xte) == y[test])))
        model = lda.fit(xtr, y[train], d_range[-1], epsilon)
        ztr, zte = lda.transform(model, xtr), lda.transform(model, xte)
        for d in d_range:
            clf = make_classifier(classifier, ztr[:, :d], y[train], classes)
            p = clf.predict(zte[:, :d])
            preds[d][test] = p
            correct[d].append(float(np.mean(p == y[test])))

    per_dim = [(d, float(np.mean(correct[d])), correct[d]) for d in d_range]
    chosen = choose_dimension(per_dim)
    return CVReport(
        per_dimension=per_dim,
        baseline_accuracy=float(np.mean(base_folds)),
        baseline_folds=base_folds,
        chosen_d=chosen,
        confusion=confusion_matrix(y, preds[chosen], k),
        class_names=list(data.class_names),
    )


def evaluate_reduced(
    data: LabeledDataset,
    attrs: Sequence[int],
    folds: FoldAssignment,
    classifier: str = "centroid",
) -> CVReport:
    """Cross-validated accuracy using only the columns ``attrs`` (0-based), no LDA."""
    attrs = [int(a) for a in attrs]
    if not attrs:
        raise ValueError("attrs must be non-empty")
    k = data.n_classes
    y = data.labels
    _check_folds(y, folds, k)
    classes = np.arange(k)
    raw = data.raw[:, attrs]
    pred = np.empty(len(y), dtype=np.int64)
    fold_acc = []
    for train, test in folds.splits():
        xtr, xte = _split_standardize(raw, train, test)
        clf = make_classifier(classifier, xtr, y[train], classes)
        pred[test] = clf.predict(xte)
        fold_acc.append(float(np.mean(pred[test] == y[test])))
    return CVReport(
        per_dimension=[],
        baseline_accuracy=float(np.mean(fold_acc)),
        baseline_folds=fold_acc,
        chosen_d=None,
        confusion=confusion_matrix(y, pred, k),
        class_names=list(data.class_names),
        attrs=attrs,
    )


@dataclass
class MergeResult:
    mapping: np.ndarray  # old class id -> merged class id
    tree: list  # nested lists of old class ids, one entry per final group
    labels: np.ndarray
    groups: list[list[int]]


def complete_linkage(points: np.ndarray, k_final: int):
    """Agglomerate rows of ``points`` until ``k_final`` clusters remain.

    Cluster distance is the largest pairwise point distance; ties merge the
    pair whose smallest members come first. Returns (groups, trees), with
    groups as sorted member lists ordered by their smallest member.
    """
    k = len(points)
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    clusters = [[i] for i in range(k)]
    trees: list = list(range(k))
    while len(clusters) > k_final:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                dab = dist[np.ix_(clusters[a], clusters[b])].max()
                if best is None or dab < best[0]:
                    best = (dab, a, b)
        _, a, b = best
        clusters[a] = sorted(clusters[a] + clusters[b])
        trees[a] = [trees[a], trees[b]]
        del clusters[b], trees[b]
    order = sorted(range(len(clusters)), key=lambda i: clusters[i][0])
    return [clusters[i] for i in order], [trees[i] for i in order]


def merge_classes(z: np.ndarray, y: np.ndarray, k_final: int, n_classes: Optional[int] = None) -> MergeResult:
    """Merge classes whose centroids in ``z`` are close (complete linkage).

    Merged ids are assigned in order of each group's smallest original id.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    k = int(y.max()) + 1 if n_classes is None else n_classes
    if not 1 <= k_final <= k:
        raise BadTargetCount(f"k_final must be in [1, {k}], got {k_final}")
    clf = fit_centroid_classifier(z, y, np.arange(k))
    groups, tree = complete_linkage(clf.centroids, k_final)
    mapping = np.empty(k, dtype=np.int64)
    for g, members in enumerate(groups):
        mapping[members] = g
    return MergeResult(mapping=mapping, tree=tree, labels=mapping[y], groups=groups)
