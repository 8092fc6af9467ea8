"""ProtoNN: sparse projection + labeled prototypes under an RBF kernel.

Scores are

    score(x) = sum_j Z[:, j] * exp(-gamma**2 * ||B[:, j] - W @ x||**2)

and training minimizes the squared error against one-hot labels by
alternating mini-batch gradient steps on Z, B and W, each followed by an
iterative-hard-thresholding projection onto its sparsity budget.

Epochs are safeguarded: an epoch that raises the class-balanced training
objective is rolled back and the step sizes are halved, so the monitored
loss never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetInfeasible, DimensionMismatch, SingleClassTrainingSet, TooFewSamples

N_LABELS = 2


@dataclass(frozen=True)
class ProtoNNConfig:
    proj_dim: int = 10
    n_prototypes: int = 20
    gamma: float | str = "auto"
    sparsity_W: float = 1.0
    sparsity_B: float = 1.0
    sparsity_Z: float = 1.0
    epochs: int = 100
    batch: int = 256
    lr_W: float = 0.05
    lr_B: float = 0.05
    lr_Z: float = 0.05
    kmeans_iters: int = 25
    seed: int = 0

    def __post_init__(self):
        for name in ("sparsity_W", "sparsity_B", "sparsity_Z"):
            s = getattr(self, name)
            if not 0 < s <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {s}")
        if self.n_prototypes < N_LABELS:
            raise ValueError("need at least one prototype per class")
        if self.proj_dim < 1 or self.epochs < 0 or self.batch < 2:
            raise ValueError("proj_dim >= 1, epochs >= 0 and batch >= 2 required")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError("gamma must be positive or 'auto'")

    @classmethod
    def from_mapping(cls, kv: dict[str, str], **overrides) -> "ProtoNNConfig":
        conv = {
            "proj_dim": int, "n_prototypes": int, "epochs": int, "batch": int, "seed": int,
            "kmeans_iters": int, "sparsity_W": float, "sparsity_B": float, "sparsity_Z": float,
            "lr_W": float, "lr_B": float, "lr_Z": float,
        }
        kwargs = {k: f(kv[k]) for k, f in conv.items() if k in kv}
        if "gamma" in kv:
            kwargs["gamma"] = "auto" if kv["gamma"] == "auto" else float(kv["gamma"])
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    nnz: list[tuple[int, int, int]] = field(default_factory=list)
    best_epoch: int = 0


@dataclass
class ProtoNNModel:
    W: np.ndarray  # (proj_dim, input_dim)
    B: np.ndarray  # (proj_dim, n_prototypes)
    Z: np.ndarray  # (N_LABELS, n_prototypes)
    gamma: float
    sparsity: tuple[float, float, float] = (1.0, 1.0, 1.0)
    history: TrainHistory | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        self.Z = np.asarray(self.Z, dtype=np.float64)
        if self.B.shape[0] != self.W.shape[0] or self.Z.shape[1] != self.B.shape[1]:
            raise ValueError(f"inconsistent shapes W{self.W.shape} B{self.B.shape} Z{self.Z.shape}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def proj_dim(self) -> int:
        return self.W.shape[0]

    @property
    def n_prototypes(self) -> int:
        return self.B.shape[1]

    @property
    def n_labels(self) -> int:
        return self.Z.shape[0]

    def copy(self) -> "ProtoNNModel":
        return ProtoNNModel(self.W.copy(), self.B.copy(), self.Z.copy(), self.gamma, self.sparsity)


# --- inference ---------------------------------------------------------------


def _kernel(model: ProtoNNModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    P = X @ model.W.T  # (n, proj_dim)
    diff = P[:, :, None] - model.B[None, :, :]  # (n, proj_dim, m)
    sq = np.einsum("nkm,nkm->nm", diff, diff)
    return P, np.exp(-(model.gamma**2) * sq)


def score(model: ProtoNNModel, x) -> np.ndarray:
    """Label scores for one input ``(d,)`` -> ``(L,)`` or a batch ``(n, d)`` -> ``(n, L)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"model expects {model.input_dim} inputs, got {x.shape[-1]}")
    X = np.atleast_2d(x)
    _, K = _kernel(model, X)
    out = K @ model.Z.T
    return out[0] if x.ndim == 1 else out


def decide(scores) -> np.ndarray | int:
    """Argmax over the two label scores; ties go to class 1."""
    s = np.asarray(scores)
    pred = (s[..., 1] >= s[..., 0]).astype(np.int64)
    return int(pred) if pred.ndim == 0 else pred


def predict(model: ProtoNNModel, x):
    return decide(score(model, x))


def model_size_bytes(model: ProtoNNModel) -> int:
    """Stored 32-bit values times 4; a dense (budget 1) block counts every entry."""
    total = 0
    for M, s in zip((model.W, model.B, model.Z), model.sparsity):
        total += M.size if s >= 1.0 else int(np.count_nonzero(M))
    return 4 * total


# --- sparsity ----------------------------------------------------------------


def budget_count(numel: int, s: float) -> int:
    """Entries kept under budget ``s``: ``ceil(s * numel)``, float noise ignored."""
    return min(numel, math.ceil(round(s * numel, 9)))


def hard_threshold(M, s: float) -> np.ndarray:
    """Keep the ``ceil(s * numel)`` largest-magnitude entries of ``M``.

    Ties at the cut are resolved in favor of the earlier flat index.
    """
    if not 0 < s <= 1:
        raise ValueError(f"sparsity budget must lie in (0, 1], got {s}")
    M = np.asarray(M, dtype=np.float64)
    k = budget_count(M.size, s)
    if k >= M.size:
        return M.copy()
    order = np.argsort(-np.abs(M), axis=None, kind="stable")
    out = np.zeros(M.size)
    keep = order[:k]
    out[keep] = M.reshape(-1)[keep]
    return out.reshape(M.shape)


# --- loss and gradients ------------------------------------------------------


def onehot(y, n_labels: int = N_LABELS) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((y.size, n_labels))
    out[np.arange(y.size), y] = 1.0
    return out


def loss(model: ProtoNNModel, X, Y) -> float:
    """Mean over rows of ``||Y - score(X)||**2``; ``Y`` is one-hot."""
    R = score(model, np.atleast_2d(X)) - Y
    return float(np.mean(np.sum(R * R, axis=1)))


def balanced_loss(model: ProtoNNModel, X, y) -> float:
    """Average of the per-class mean squared errors."""
    y = np.asarray(y)
    Y = onehot(y, model.n_labels)
    parts = [loss(model, X[y == c], Y[y == c]) for c in np.unique(y)]
    return float(np.mean(parts))


def _residual_terms(model: ProtoNNModel, X, Y):
    P, K = _kernel(model, X)
    E = K @ model.Z.T - Y  # (n, L)
    H = 2.0 * (E @ model.Z) * K  # dLoss/dK_ij times K_ij
    return P, K, E, H


def _grad_Z(model, X, Y):
    _, K, E, _ = _residual_terms(model, X, Y)
    return 2.0 * E.T @ K / X.shape[0]


def _grad_B(model, X, Y):
    P, _, _, H = _residual_terms(model, X, Y)
    g2 = model.gamma**2
    return -2.0 * g2 * (model.B * H.sum(axis=0) - P.T @ H) / X.shape[0]


def _grad_W(model, X, Y):
    P, _, _, H = _residual_terms(model, X, Y)
    g2 = model.gamma**2
    dP = 2.0 * g2 * (H @ model.B.T - H.sum(axis=1)[:, None] * P)
    return dP.T @ X / X.shape[0]


def train_gradients(model: ProtoNNModel, X, Y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of :func:`loss` with respect to W, B and Z."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    return _grad_W(model, X, Y), _grad_B(model, X, Y), _grad_Z(model, X, Y)


# --- initialization ----------------------------------------------------------


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns ``(k, dim)`` centroids."""
    n = points.shape[0]
    if n <= k:
        return points[np.arange(k) % n].copy()
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = points[idx]
        closest = np.minimum(closest, np.sum((points - centers[c]) ** 2, axis=1))
    for _ in range(iters):
        dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(dist, axis=1)
        new = centers.copy()
        for c in range(k):
            members = points[assign == c]
            if len(members):
                new[c] = members.mean(axis=0)
        if np.array_equal(new, centers):
            break
        centers = new
    return centers


def _top_directions(X: np.ndarray, k: int) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    W = np.zeros((k, X.shape[1]))
    r = min(k, vt.shape[0])
    W[:r] = vt[:r]
    pivot = np.argmax(np.abs(W), axis=1)
    signs = np.sign(W[np.arange(k), pivot])
    signs[signs == 0] = 1.0
    return W * signs[:, None]


def initialize(X, y, cfg: ProtoNNConfig, rng: np.random.Generator) -> ProtoNNModel:
    """Warm start: PCA projection, per-class k-means prototypes, one-hot labels."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    W = _top_directions(X, cfg.proj_dim)
    P = X @ W.T
    counts = (cfg.n_prototypes // N_LABELS, cfg.n_prototypes - cfg.n_prototypes // N_LABELS)
    protos, labels = [], []
    for c, k in enumerate(counts):
        protos.append(_kmeans(P[y == c], k, rng, cfg.kmeans_iters))
        labels.extend([c] * k)
    B = np.vstack(protos).T
    Z = onehot(np.array(labels)).T
    if cfg.gamma == "auto":
        dist = np.sqrt(np.sum((P[:, :, None] - B[None, :, :]) ** 2, axis=1))
        med = float(np.median(dist))
        gamma = 2.5 / med if med > 0 else 1.0
    else:
        gamma = float(cfg.gamma)
    return ProtoNNModel(W=W, B=B, Z=Z, gamma=gamma,
                        sparsity=(cfg.sparsity_W, cfg.sparsity_B, cfg.sparsity_Z))


# --- training ----------------------------------------------------------------


def _project(model: ProtoNNModel) -> None:
    s_w, s_b, s_z = model.sparsity
    model.W = hard_threshold(model.W, s_w)
    model.B = hard_threshold(model.B, s_b)
    model.Z = hard_threshold(model.Z, s_z)


def _nnz(model: ProtoNNModel) -> tuple[int, int, int]:
    return tuple(int(np.count_nonzero(M)) for M in (model.W, model.B, model.Z))


def _balanced_order(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One epoch of indices alternating class 0 / class 1; minority resampled."""
    idx0 = rng.permutation(np.flatnonzero(y == 0))
    idx1 = rng.permutation(np.flatnonzero(y == 1))
    n = max(idx0.size, idx1.size)

    def stretch(idx):
        reps = np.tile(idx, n // idx.size)
        extra = rng.choice(idx, n - reps.size, replace=False)
        return np.concatenate([reps, extra])

    order = np.empty(2 * n, dtype=np.int64)
    order[0::2] = stretch(idx0)
    order[1::2] = stretch(idx1)
    return order


def train(X, y, cfg: ProtoNNConfig = ProtoNNConfig(), X_val=None, y_val=None) -> ProtoNNModel:
    """Fit a ProtoNN model; returns the parameters with the best validation loss.

    Without a validation set the training objective picks the epoch. The
    returned model carries a :class:`TrainHistory`.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one label per row")
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise SingleClassTrainingSet("training labels contain a single class")
    if X.shape[0] < cfg.n_prototypes:
        raise TooFewSamples(f"{X.shape[0]} samples for {cfg.n_prototypes} prototypes")
    if cfg.proj_dim > X.shape[1]:
        raise DimensionMismatch(f"proj_dim {cfg.proj_dim} exceeds input dim {X.shape[1]}")
    for name, numel in (("W", cfg.proj_dim * X.shape[1]), ("B", cfg.proj_dim * cfg.n_prototypes),
                        ("Z", N_LABELS * cfg.n_prototypes)):
        s = getattr(cfg, f"sparsity_{name}")
        if s * numel < 1:
            raise BudgetInfeasible(f"budget {s} of {numel} {name} entries is less than one entry")
    if X_val is None:
        X_val, y_val = X, y
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)

    rng = np.random.default_rng(cfg.seed)
    model = initialize(X, y, cfg, rng)
    _project(model)
    Y = onehot(y)

    history = TrainHistory()
    cur_loss = balanced_loss(model, X, y)
    best = model.copy()
    best_val = balanced_loss(model, X_val, y_val)
    history.train_loss.append(cur_loss)
    history.val_loss.append(best_val)
    history.accepted.append(True)
    history.nnz.append(_nnz(model))

    backoff = 1.0
    for epoch in range(1, cfg.epochs + 1):
        decay = backoff / math.sqrt(epoch)
        eta_w, eta_b, eta_z = cfg.lr_W * decay, cfg.lr_B * decay, cfg.lr_Z * decay
        cand = model.copy()
        order = _balanced_order(y, rng)
        for start in range(0, order.size, cfg.batch):
            idx = order[start : start + cfg.batch]
            Xb, Yb = X[idx], Y[idx]
            cand.Z = hard_threshold(cand.Z - eta_z * _grad_Z(cand, Xb, Yb), cand.sparsity[2])
            cand.B = hard_threshold(cand.B - eta_b * _grad_B(cand, Xb, Yb), cand.sparsity[1])
            cand.W = hard_threshold(cand.W - eta_w * _grad_W(cand, Xb, Yb), cand.sparsity[0])
        cand_loss = balanced_loss(cand, X, y)
        accepted = bool(np.isfinite(cand_loss) and cand_loss <= cur_loss)
        if accepted:
            model, cur_loss = cand, cand_loss
        else:
            backoff *= 0.5
        val = balanced_loss(model, X_val, y_val)
        if accepted and val < best_val:
            best, best_val = model.copy(), val
            history.best_epoch = epoch
        history.train_loss.append(cur_loss)
        history.val_loss.append(val)
        history.accepted.append(accepted)
        history.nnz.append(_nnz(model))

    best.history = history
    return best
