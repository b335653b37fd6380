"""Loss-surface slices, a roughness-based smoothness score, and SMOOTH stability."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import WarningDataset
from .errors import GridTooSmall, TooFewLeaves, UnsupportedModel
from .learners import Model
from .learners.base import balanced_weights
from .learners.ffnet import forward, network_params, sample_weights, weighted_bce
from .treatments import smooth

ROUGHNESS_FLOOR = 1e-12


@dataclass(eq=False)
class LandscapeGrid:
    coords: np.ndarray  # G values spanning [-alpha, alpha]
    losses: np.ndarray  # losses[i, j] at (a=coords[i], b=coords[j])
    alpha: float
    center_loss: float
    directions: tuple = ()

    @property
    def G(self) -> int:
        return len(self.coords)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "b", "loss"])
            for i, a in enumerate(self.coords):
                for j, b in enumerate(self.coords):
                    w.writerow([repr(float(a)), repr(float(b)), repr(float(self.losses[i, j]))])

    @classmethod
    def from_csv(cls, path) -> LandscapeGrid:
        rows = list(csv.DictReader(Path(path).open(newline="")))
        coords = np.array(sorted({float(r["a"]) for r in rows}))
        pos = {v: i for i, v in enumerate(coords)}
        losses = np.empty((len(coords), len(coords)))
        for r in rows:
            losses[pos[float(r["a"])], pos[float(r["b"])]] = float(r["loss"])
        mid = len(coords) // 2
        alpha = float(coords[-1]) if len(coords) else 0.0
        return cls(coords, losses, alpha, float(losses[mid, mid]))

    def to_svg(self, path, cell: int = 12) -> None:
        """Grayscale heatmap, dark = low loss."""
        lo, hi = float(self.losses.min()), float(self.losses.max())
        span = hi - lo or 1.0
        G = self.G
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{G * cell}" height="{G * cell}">']
        for i in range(G):
            for j in range(G):
                level = int(round(255 * (self.losses[i, j] - lo) / span))
                # b runs left to right, a runs bottom to top
                x, y = j * cell, (G - 1 - i) * cell
                parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                             f'fill="rgb({level},{level},{level})"/>')
        parts.append("</svg>")
        Path(path).write_text("\n".join(parts) + "\n")


def lattice(G: int, alpha: float) -> np.ndarray:
    """G evenly spaced points on [-alpha, alpha]; the middle point is exactly 0 for odd G."""
    if G < 1:
        raise ValueError("G must be >= 1")
    if G == 1:
        return np.zeros(1)
    half = (G - 1) / 2.0
    return alpha * (np.arange(G) - half) / half


def filter_normalized(like, rng, scope: str = "filter"):
    """A Gaussian direction shaped like ``like`` (a list of (W, b) layers).

    With ``scope="filter"`` each unit's incoming weight column is rescaled
    to the norm of the matching column of W; ``"layer"`` rescales whole
    matrices. Bias directions are zero.
    """
    out = []
    for W, b in like:
        D = rng.standard_normal(W.shape)
        if scope == "filter":
            dn = np.linalg.norm(D, axis=0)
            wn = np.linalg.norm(W, axis=0)
            D = D * (wn / np.where(dn == 0, 1.0, dn))
        else:
            dn = np.linalg.norm(D)
            D = D * (np.linalg.norm(W) / (dn or 1.0))
        out.append((D, np.zeros_like(b)))
    return out


def surface(theta, loss_fn: Callable, d1, d2, G: int = 25, alpha: float = 1.0) -> LandscapeGrid:
    """Evaluate ``loss_fn`` on theta + a*d1 + b*d2 over the G x G lattice.

    ``theta``, ``d1`` and ``d2`` are matching lists of arrays.
    """
    coords = lattice(G, alpha)
    losses = np.empty((G, G))
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            point = [t + a * u + b * v for t, u, v in zip(theta, d1, d2)]
            losses[i, j] = loss_fn(point)
    center = float(loss_fn(list(theta)))
    if not np.all(np.isfinite(losses)):
        raise FloatingPointError("loss surface contains non-finite values")
    return LandscapeGrid(coords, losses, float(alpha), center, (d1, d2))


def _flat_layers(layers):
    return [a for W, b in layers for a in (W, b)]


def _pair_layers(flat):
    return [(flat[i], flat[i + 1]) for i in range(0, len(flat), 2)]


def loss_surface(model: Model, data: WarningDataset, G: int = 25, alpha: float = 1.0,
                 rng_seed=None, scope: str = "filter") -> LandscapeGrid:
    """Training-loss slice of a feedforward model along two random filter-normalized directions."""
    if model.kind != "ffnet" or model.meta.get("constant"):
        raise UnsupportedModel("loss surfaces need a trained feedforward network")
    rng = np.random.default_rng(rng_seed)
    layers = network_params(model)
    d1 = filter_normalized(layers, rng, scope)
    d2 = filter_normalized(layers, rng, scope)
    X = data.features
    y = data.labels.astype(np.float64)
    weights = model.meta.get("class_weights") or balanced_weights(y)
    w = sample_weights(y, weights)

    def loss_fn(flat):
        logits, _, _ = forward(_pair_layers(flat), X)
        return weighted_bce(logits, y, w)

    return surface(_flat_layers(layers), loss_fn, _flat_layers(d1), _flat_layers(d2), G, alpha)


def roughness(grid: LandscapeGrid) -> float:
    """Mean absolute gap between each interior cell and its 4-neighbour average."""
    L = np.asarray(grid.losses if isinstance(grid, LandscapeGrid) else grid, dtype=np.float64)
    if L.shape[0] < 3 or L.shape[1] < 3:
        raise GridTooSmall(f"need at least a 3x3 grid, got {L.shape}")
    inner = L[1:-1, 1:-1]
    around = (L[:-2, 1:-1] + L[2:, 1:-1] + L[1:-1, :-2] + L[1:-1, 2:]) / 4.0
    return float(np.mean(np.abs(inner - around)))


def smoothness(grid) -> float:
    return 1.0 / (roughness(grid) + ROUGHNESS_FLOOR)


def smoothness_change(before, after) -> float:
    """Percent change in smoothness from ``before`` to ``after``."""
    if np.shape(getattr(before, "losses", before)) != np.shape(getattr(after, "losses", after)):
        raise ValueError("grids must share a resolution")
    s0, s1 = smoothness(before), smoothness(after)
    return 100.0 * (s1 - s0) / s0


# --- SMOOTH stability --------------------------------------------------------

def kmeans(points, k: int, rng, max_iter: int = 50):
    """Lloyd iterations from k-means++ seeds. Returns (centers, assignment)."""
    P = np.asarray(points, dtype=np.float64)
    n = len(P)
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    centers = [P[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(((P[:, None, :] - np.array(centers)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        idx = int(rng.integers(n)) if total == 0 else int(rng.choice(n, p=d2 / total))
        centers.append(P[idx])
    centers = np.array(centers)
    assign = np.full(n, -1)
    for _ in range(max_iter):
        d2 = ((P[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        for c in range(k):
            members = P[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return centers, assign


@dataclass
class StabilityResult:
    repeats: int
    k: int
    medians: np.ndarray  # (repeats * k) x d leaf medians
    cluster_deviation: list = field(default_factory=list)  # median L1 deviation per cluster
    headline: float = 0.0  # median deviation as % of the data's L1 norm
    l1_norm: float = 0.0
    cluster_seed: int = 0  # seeds k-means; lets the headline be recomputed from the medians


def stability_from_medians(medians, k: int, l1_norm: float, cluster_seed: int = 0,
                           repeats: int | None = None) -> StabilityResult:
    medians = np.asarray(medians, dtype=np.float64)
    repeats = repeats if repeats is not None else len(medians) // k
    _, assign = kmeans(medians, k, np.random.default_rng(cluster_seed))
    deviations, per_cluster = [], []
    for c in range(k):
        members = medians[assign == c]
        if not len(members):
            continue
        centre = np.median(members, axis=0)
        dev = np.abs(members - centre).sum(axis=1)
        deviations.extend(dev.tolist())
        per_cluster.append(float(np.median(dev)))
    typical = float(np.median(deviations)) if deviations else 0.0
    headline = 0.0 if l1_norm == 0 else 100.0 * typical / l1_norm
    return StabilityResult(repeats, k, medians, per_cluster, headline, l1_norm, cluster_seed)


def smooth_stability(train: WarningDataset, repeats: int = 20, rng_seed=None) -> StabilityResult:
    """How far SMOOTH's leaf medians wander across repeated runs."""
    rng = np.random.default_rng(rng_seed)
    cluster_seed = int(rng.integers(2**31))
    _, _, tree = smooth(train, rng, return_tree=True)
    k = len(tree.leaves)
    if k < 2:
        raise TooFewLeaves(f"SMOOTH on {train.n} rows yields {k} leaf; need at least 2")
    medians = []
    for _ in range(repeats):
        _, _, tree = smooth(train, rng, return_tree=True)
        medians.append(tree.leaf_medians())
    l1 = float(np.abs(train.features).sum())
    return stability_from_medians(np.vstack(medians), k, l1, cluster_seed, repeats)
