"""Soft-margin RBF support vector machine trained by SMO.

Binary models solve the standard dual

    max_a  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

with sequential minimal optimisation: each step picks the maximal-violating
pair using second-order working-set selection and solves the two-variable
subproblem analytically. Multiclass models are one-vs-one with majority voting.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numba
import numpy as np

from .registry import EmotionClass

MODEL_FORMAT = "aggrofuse-svm"
MODEL_VERSION = 1
_TAU = 1e-12


class SVMError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    gamma: float = 1.0
    tolerance: float = 1e-3
    max_iter: int = 1_000_000
    k: int = 10
    split: float = 0.8
    seed: int = 0
    scale: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise SVMError("C must be positive")
        if not self.gamma > 0:
            raise SVMError("gamma must be positive")
        if not self.tolerance > 0:
            raise SVMError("tolerance must be positive")
        if self.k < 2:
            raise SVMError("need at least 2 folds")
        if not 0.0 < self.split < 1.0:
            raise SVMError("split must lie in (0, 1)")


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise SVMError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(X, Y, gamma: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise SVMError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@numba.njit(cache=True)
def _smo_solve(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    it = 0
    converged = False
    while it < max_iter:
        # i: maximal -y*G over I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0:
                            a = _TAU
                        obj = -(b * b) / a
                        if obj <= best:
                            best = obj
                            j = t
        if i < 0 or j < 0 or gmax - gmin < eps:
            converged = True
            break
        it += 1

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * K[i, t] * dai + y[j] * K[j, t] * daj)

    # offset: mean of y*G over free variables, else midpoint of the feasible range
    ub = np.inf
    lb = -np.inf
    total = 0.0
    nfree = 0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            total += yg
    rho = total / nfree if nfree > 0 else (ub + lb) / 2.0
    return alpha, rho, it, converged


@dataclass
class BinaryModel:
    """Decision ``f(x) = sum_i coef_i K(sv_i, x) + bias``; positive means the +1 class."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.bias)
        return rbf_matrix(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def dual_objective(alpha, y, K) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def kkt_violation(alpha, y, f, C: float) -> float:
    """Largest violation of the soft-margin KKT conditions in units of y*f(x)."""
    alpha, y, f = (np.asarray(a, dtype=float) for a in (alpha, y, f))
    m = y * f
    zero = alpha <= 0
    upper = alpha >= C
    free = ~zero & ~upper
    viol = np.zeros(len(alpha))
    viol[zero] = np.maximum(0.0, 1.0 - m[zero])
    viol[upper] = np.maximum(0.0, m[upper] - 1.0)
    viol[free] = np.abs(m[free] - 1.0)
    return float(viol.max(initial=0.0))


def train_binary(X, y, cfg: TrainConfig | None = None, K: np.ndarray | None = None) -> BinaryModel:
    """Train a binary soft-margin SVM; ``y`` holds +1/-1 labels.

    The KKT conditions are checked on the training set afterwards and the result
    stored in ``diagnostics``. Hitting the iteration cap issues a warning and
    still returns the model.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise SVMError("X must be (n, d) with one label per row")
    if not np.isfinite(X).all():
        raise SVMError("non-finite feature values")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise SVMError("labels must be +1/-1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SVMError("both classes must be present")
    if K is None:
        K = rbf_matrix(X, X, cfg.gamma)
    alpha, rho, iters, converged = _smo_solve(np.ascontiguousarray(K), y, float(cfg.C),
                                              float(cfg.tolerance), int(cfg.max_iter))
    if not converged:
        warnings.warn(f"SMO stopped at the iteration cap ({cfg.max_iter}) before converging")
    bias = -rho
    f = K @ (alpha * y) + bias
    sv = alpha > 0
    diagnostics = {
        "iterations": int(iters),
        "converged": bool(converged),
        "n_support": int(sv.sum()),
        "kkt_violation": kkt_violation(alpha, y, f, cfg.C),
        "equality_residual": float(abs(np.dot(alpha, y))),
        "dual_objective": dual_objective(alpha, y, K),
        "alpha": alpha,
    }
    return BinaryModel(X[sv].copy(), (alpha * y)[sv], float(bias), cfg.gamma, cfg.C, diagnostics)


# -- multiclass --------------------------------------------------------------------

@dataclass
class MinMaxScaler:
    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, X) -> "MinMaxScaler":
        X = np.asarray(X, dtype=float)
        lo, hi = X.min(0), X.max(0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return cls(lo, span)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.lo) / self.span


@dataclass
class MulticlassModel:
    """One-vs-one model; ``pairs[(a, b)]`` is positive for class ``a``."""

    classes: tuple[int, ...]
    pairs: dict[tuple[int, int], BinaryModel]
    gamma: float
    C: float
    dim: int
    scaler: MinMaxScaler | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.classes)
        if len(self.pairs) != k * (k - 1) // 2:
            raise SVMError(f"expected {k * (k - 1) // 2} pairwise models, got {len(self.pairs)}")

    def _prepare(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise SVMError(f"dimension mismatch: model expects {self.dim}, got {X.shape[1]}")
        return self.scaler.transform(X) if self.scaler is not None else X

    def decisions(self, X) -> dict[tuple[int, int], np.ndarray]:
        Xs = self._prepare(X)
        svs = [m.support_vectors for m in self.pairs.values() if len(m.dual_coef)]
        if not svs:
            return {p: np.full(len(Xs), m.bias) for p, m in self.pairs.items()}
        # one kernel evaluation against all distinct support vectors
        allsv, inverse = np.unique(np.concatenate(svs), axis=0, return_inverse=True)
        Kall = rbf_matrix(Xs, allsv, self.gamma)
        out, pos = {}, 0
        for p, m in self.pairs.items():
            n = len(m.dual_coef)
            cols = inverse.reshape(-1)[pos:pos + n]
            pos += n
            out[p] = (Kall[:, cols] @ m.dual_coef if n else 0.0) + m.bias
        return out

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Predicted class codes and vote-share confidences for every row."""
        dec = self.decisions(X)
        n = len(next(iter(dec.values()))) if dec else len(np.atleast_2d(X))
        k = len(self.classes)
        pos = {c: i for i, c in enumerate(self.classes)}
        wins = np.zeros((n, k), dtype=np.int64)
        margin = np.zeros((n, k))
        for (a, b), d in dec.items():
            ia, ib = pos[a], pos[b]
            wins[:, ia] += d > 0
            wins[:, ib] += d <= 0
            margin[:, ia] += d
            margin[:, ib] -= d
        # rank by wins, then summed margin, then lower class code
        order = np.lexsort((-np.arange(k)[None, :].repeat(n, 0), margin, wins), axis=1)
        best = order[:, -1]
        rows = np.arange(n)
        classes = np.asarray(self.classes)[best]
        conf = wins[rows, best] / (k - 1)
        return classes, conf

    def to_dict(self) -> dict:
        svs = [m.support_vectors for m in self.pairs.values() if len(m.dual_coef)]
        allsv = np.unique(np.concatenate(svs), axis=0) if svs else np.zeros((0, self.dim))
        index = {row.tobytes(): i for i, row in enumerate(allsv)}
        pairs = []
        for (a, b), m in self.pairs.items():
            pairs.append({"classes": [a, b], "bias": m.bias,
                          "support": [index[r.tobytes()] for r in m.support_vectors],
                          "coef": m.dual_coef.tolist()})
        return {
            "format": MODEL_FORMAT, "version": MODEL_VERSION,
            "classes": list(self.classes), "gamma": self.gamma, "C": self.C, "dim": self.dim,
            "scaler": None if self.scaler is None else
            {"min": self.scaler.lo.tolist(), "span": self.scaler.span.tolist()},
            "meta": self.meta,
            "support_vectors": allsv.tolist(),
            "pairs": pairs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MulticlassModel":
        if d.get("format") != MODEL_FORMAT:
            raise SVMError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise SVMError(f"unsupported model version {d.get('version')}")
        allsv = np.asarray(d["support_vectors"], dtype=float).reshape(-1, d["dim"])
        pairs = {}
        for p in d["pairs"]:
            a, b = p["classes"]
            pairs[(a, b)] = BinaryModel(allsv[p["support"]], np.asarray(p["coef"], dtype=float),
                                        float(p["bias"]), d["gamma"], d["C"])
        sc = d.get("scaler")
        scaler = None if sc is None else MinMaxScaler(np.asarray(sc["min"]), np.asarray(sc["span"]))
        return cls(tuple(d["classes"]), pairs, d["gamma"], d["C"], d["dim"], scaler, d.get("meta", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MulticlassModel":
        return cls.from_dict(json.loads(text))


def train_multiclass(X, labels, cfg: TrainConfig | None = None) -> MulticlassModel:
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if len(X) != len(labels):
        raise SVMError("one label per row required")
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise SVMError("need at least two classes")
    scaler = MinMaxScaler.fit(X) if cfg.scale else None
    Xs = scaler.transform(X) if scaler is not None else X
    K = rbf_matrix(Xs, Xs, cfg.gamma)
    pairs = {}
    for a, b in combinations(classes, 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        pairs[(a, b)] = train_binary(Xs[idx], y, cfg, K[np.ix_(idx, idx)])
    return MulticlassModel(classes, pairs, cfg.gamma, cfg.C, X.shape[1], scaler)


def predict(model: MulticlassModel, x) -> tuple[EmotionClass, float]:
    """Class with most pairwise wins and its vote share wins/(k-1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SVMError("predict takes a single feature vector")
    c, conf = model.predict_batch(x[None, :])
    return EmotionClass(int(c[0])), float(conf[0])


# -- cross-validation -----------------------------------------------------------------

def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold index per row; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            warnings.warn(f"class {c} has {len(idx)} rows for {k} folds; "
                          "it is left out one row at a time")
        idx = rng.permutation(idx)
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


@dataclass
class CVResult:
    confusions: list[np.ndarray]
    accuracies: list[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def total_confusion(self) -> np.ndarray:
        return np.sum(self.confusions, axis=0)


def kfold_cv(X, labels, cfg: TrainConfig | None = None, n_classes: int = len(EmotionClass)) -> CVResult:
    """Stratified, seeded k-fold cross-validation of the one-vs-one model."""
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if cfg.k > len(labels):
        raise SVMError(f"{cfg.k} folds for {len(labels)} rows")
    fold = stratified_folds(labels, cfg.k, cfg.seed)
    confusions, accs = [], []
    for f in range(cfg.k):
        test = fold == f
        if not test.any():
            continue
        train = ~test
        model = train_multiclass(X[train], labels[train], cfg)
        pred, _ = model.predict_batch(X[test])
        cm = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(cm, (labels[test], pred), 1)
        confusions.append(cm)
        accs.append(float(np.trace(cm) / cm.sum()))
    return CVResult(confusions, accs)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
