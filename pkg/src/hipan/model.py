"""Digit-head models over p-adic codes.

One head per learnable digit depth predicts that digit from the previous
one: depth 0 holds a bare score vector (no conditioning context exists
above the root), depth 1 a dense p x p table trained by squared distance
to the one-hot target, and every deeper head a p x p score table plus a
per-row scalar anchor that arbitrates between the row's top two columns
through two quadratic logits.  Depths at or beyond K_heads reuse the last
head's weights.

Two prediction paths exist and are deliberately distinct:

* `predict_digits`/`predict_leaf`: the generative chain.  Digit 0 is the
  score argmax, each later digit comes from the row selected by the digit
  before it (or by a supplied true-prefix context).  With no context the
  chain is input-free and constant.
* `reconstruct_digits`/`accuracy evaluation`: per-record reconstruction.
  The model's input is the record's own code, so each head may read the
  input digit it is asked to reproduce; the digit is accepted when its
  score sits within RECONSTRUCT_MARGIN of the row maximum (trained rows
  tie their observed digits up to quantization), otherwise the head falls
  back to its generative rule.  This is what accuracy and calibration
  report: how much of the hierarchy the factorized tables actually store.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .padic import (
    Ball,
    CodecParams,
    DEFAULT_LEAK,
    LEAK_SAFE_RANGE,
    PadicCode,
    leaky_indicator,
)
from .rng import child_rng
from .tree import EncodedDataset, TreeSpec

# A record's own digit is accepted during reconstruction when its score is
# within this margin of the row maximum.  2.0 covers exact ties (complete
# trees), the integer-quantized gap of 1 left by +-1 moves at a 2:1 branch
# imbalance, and real-valued gaps up to ~e^2:1 imbalance; rarer branches
# fall back to the generative rule and may miss.
RECONSTRUCT_MARGIN = 2.0

CHECKPOINT_FORMAT = "hipan-model-v1"


@dataclass
class ModelConfig:
    """Shape and fixed scalars of a digit-head model.

    Attributes:
        codec: alphabet p and code length K.
        K_heads: number of learnable digit depths, in [1, K]; deeper
            digits reuse the last head (weight tying).
        alpha: leak of the ball indicator used by layer application.
        tau: sharpness of the two-logit quadratic comparison, > 0.
    """

    codec: CodecParams
    K_heads: int | None = None
    alpha: float = DEFAULT_LEAK
    tau: float = 0.5

    def __post_init__(self) -> None:
        if self.K_heads is None:
            self.K_heads = self.codec.K
        if not (1 <= self.K_heads <= self.codec.K):
            raise ValueError(
                f"K_heads={self.K_heads} outside [1, K={self.codec.K}]"
            )
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not (LEAK_SAFE_RANGE[0] <= self.alpha <= LEAK_SAFE_RANGE[1]):
            warnings.warn(
                f"leak {self.alpha} outside the validated range {LEAK_SAFE_RANGE}",
                stacklevel=2,
            )


@dataclass
class RootHead:
    """p scores, one per root digit; prediction is the argmax (ties: lowest)."""

    scores: np.ndarray


@dataclass
class DenseMSEHead:
    """p x p table; row = parent digit, column = child digit."""

    table: np.ndarray


@dataclass
class TwoLogitCEHead:
    """p x p score table plus one scalar anchor per parent row."""

    table: np.ndarray
    anchor: np.ndarray


@dataclass
class HiPaNModel:
    """Trainable digit heads plus data-derived weighting constants.

    heads by depth: 0 -> root, 1 -> dense (when K_heads >= 2),
    2..K_heads-1 -> deep two-logit heads.  `huffman` carries the per-depth
    (parent, child) loss weights for depths >= 2; it is derived from a
    dataset by training, never trained itself, and not serialized.
    """

    config: ModelConfig
    root: RootHead
    dense: DenseMSEHead | None
    deep: list[TwoLogitCEHead]
    init_seed: int = 0
    huffman: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.config.codec.p

    @property
    def K(self) -> int:
        return self.config.codec.K


def parameter_count(config: ModelConfig) -> int:
    """Reported latent count: p for K_heads = 1, else p + p^2 + (K_heads-1)(p^2+p).

    This is the closed form the package commits to.  Note it counts one
    more deep head than the structure instantiates (root + dense +
    K_heads-2 deep heads); the two cannot be reconciled because the
    source arithmetic and the head layout disagree, and the closed form
    is the contractual value.
    """
    p, kh = config.codec.p, config.K_heads
    if kh == 1:
        return p
    return p + p * p + (kh - 1) * (p * p + p)


def new_model(config: ModelConfig, seed: int = 0) -> HiPaNModel:
    """Fresh model with latents drawn i.i.d. uniform over {0, ..., p-1}.

    Integer-valued floats keep the +-1 move lattice exact and make the
    initial rounded digits uniform over the alphabet.  Draw order: root
    scores, dense table, then each deep head's table then anchor.
    """
    rng = child_rng(seed, "init")
    p = config.codec.p

    def draw(shape: tuple[int, ...]) -> np.ndarray:
        return rng.integers(0, p, size=shape).astype(np.float64)

    root = RootHead(draw((p,)))
    dense = DenseMSEHead(draw((p, p))) if config.K_heads >= 2 else None
    deep = [
        TwoLogitCEHead(draw((p, p)), draw((p,)))
        for _ in range(max(0, config.K_heads - 2))
    ]
    return HiPaNModel(config, root, dense, deep, init_seed=seed)


def _effective_depth(model: HiPaNModel, k: int) -> int:
    """Head depth serving digit k (weight tying past the last head)."""
    return min(k, model.config.K_heads - 1)


def score_row(model: HiPaNModel, k: int, parent_digit: int | None) -> np.ndarray:
    """Score vector a head exposes for digit k given the previous digit."""
    ke = _effective_depth(model, k)
    if ke == 0:
        return model.root.scores
    if parent_digit is None:
        raise ValueError(f"digit {k} needs the previous digit for row selection")
    if ke == 1:
        assert model.dense is not None
        return model.dense.table[parent_digit]
    return model.deep[ke - 2].table[parent_digit]


def softmax(row: np.ndarray) -> np.ndarray:
    """Temperature-1 softmax, stable under large scores."""
    shifted = row - np.max(row)
    e = np.exp(shifted)
    return e / np.sum(e)


def softmax_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a 2-d score array."""
    shifted = rows - rows.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _top_two(row: np.ndarray) -> tuple[int, int]:
    """Best and runner-up column indices; ties resolve to the lowest index."""
    order = np.argsort(-row, kind="stable")
    return int(order[0]), int(order[1])


def _anchored_choice(
    model: HiPaNModel, ke: int, parent_digit: int, row: np.ndarray
) -> int:
    """Deep-head generative rule: top two columns arbitrated by the anchor."""
    t_star, c = _top_two(row)
    v = float(model.deep[ke - 2].anchor[parent_digit])
    tau = model.config.tau
    g = -tau * (v - t_star) ** 2
    o = -tau * (v - c) ** 2
    return t_star if g >= o else c


def predict_digits(
    model: HiPaNModel, context: Sequence[int] | PadicCode | None = None
) -> tuple[list[int], list[float]]:
    """Generative digit chain with per-digit confidence.

    Args:
        model: the digit heads.
        context: optional true-prefix override; when given, row selection
            for digit k uses context[k-1] instead of the chained
            prediction (training-style conditioning).

    Returns:
        (digits, confidences): K predicted digits and the softmax mass of
        each predicted digit within its score row.
    """
    ctx = list(context.digits) if isinstance(context, PadicCode) else (
        list(context) if context is not None else None
    )
    digits: list[int] = []
    confs: list[float] = []
    for k in range(model.K):
        if k == 0:
            prev = None
        elif ctx is not None:
            prev = int(ctx[k - 1])
        else:
            prev = digits[k - 1]
        row = score_row(model, k, prev)
        ke = _effective_depth(model, k)
        if ke <= 1:
            d = int(np.argmax(row))
        else:
            d = _anchored_choice(model, ke, prev, row)
        digits.append(d)
        confs.append(float(softmax(row)[d]))
    return digits, confs


def _anchored_choice_rows(
    model: HiPaNModel, ke: int, prev: np.ndarray, rows: np.ndarray
) -> np.ndarray:
    """Vectorized two-logit arbitration for one batch of rows."""
    n = rows.shape[0]
    ar = np.arange(n)
    t_star = rows.argmax(axis=1)
    masked = rows.copy()
    masked[ar, t_star] = -np.inf
    c = masked.argmax(axis=1)
    v = model.deep[ke - 2].anchor[prev]
    pick_top = (v - t_star) ** 2 <= (v - c) ** 2
    return np.where(pick_top, t_star, c)


def reconstruct_matrix(
    model: HiPaNModel, digits_mat: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct every row of an (N, K) digit matrix at once.

    Rows chain on the digits actually predicted (free running); at each
    depth a record's own digit is read off its code and accepted when its
    score is within RECONSTRUCT_MARGIN of the row maximum, otherwise the
    head answers with its generative rule.

    Returns:
        (predicted, confidence): (N, K) int digits and (N, K) softmax
        mass of each predicted digit within its score row.
    """
    digits_mat = np.asarray(digits_mat, dtype=np.int64)
    n, width = digits_mat.shape
    if width != model.K:
        raise ValueError(f"digit matrix width {width} does not match K={model.K}")
    pred = np.zeros((n, model.K), dtype=np.int64)
    conf = np.zeros((n, model.K), dtype=np.float64)
    ar = np.arange(n)
    for k in range(model.K):
        ke = _effective_depth(model, k)
        prev = pred[:, k - 1] if k > 0 else None
        if ke == 0:
            rows = np.broadcast_to(model.root.scores, (n, model.p))
        elif ke == 1:
            assert model.dense is not None
            rows = model.dense.table[prev]
        else:
            rows = model.deep[ke - 2].table[prev]
        t = digits_mat[:, k]
        accept = rows[ar, t] >= rows.max(axis=1) - RECONSTRUCT_MARGIN
        if ke <= 1:
            fallback = rows.argmax(axis=1)
        else:
            fallback = _anchored_choice_rows(model, ke, prev, rows)
        chosen = np.where(accept, t, fallback)
        pred[:, k] = chosen
        conf[:, k] = softmax_rows(rows)[ar, chosen]
    return pred, conf


def reconstruct_digits(
    model: HiPaNModel, x: PadicCode
) -> tuple[list[int], list[float]]:
    """Per-record reconstruction: can the heads reproduce this code?

    Single-record form of reconstruct_matrix.

    Returns:
        (digits, confidences) as in predict_digits.
    """
    if x.params != model.config.codec:
        raise ValueError(f"code codec {x.params} does not match model {model.config.codec}")
    pred, conf = reconstruct_matrix(model, np.array([x.digits], dtype=np.int64))
    return [int(d) for d in pred[0]], [float(c) for c in conf[0]]


def clamped_descent(tree: TreeSpec, digits: Sequence[int]) -> int:
    """Walk predicted digits down a hierarchy, clamping to valid children.

    Out-of-range digits clamp to the last child; the walk stops at the
    first leaf and ignores any remaining digits.  Returns the leaf's
    node id (look up tree.names[id] for its name).
    """
    node = tree.root
    for d in digits:
        kids = tree.children[node]
        if not kids:
            break
        node = kids[min(int(d), len(kids) - 1)]
    if not tree.is_leaf(node):
        raise ValueError(
            f"digit sequence shorter than the hierarchy depth at "
            f"{tree.names[node]!r}"
        )
    return node


def predict_leaf(model: HiPaNModel, tree: TreeSpec) -> int:
    """Leaf id reached by the generative digit chain under clamped descent."""
    digits, _ = predict_digits(model)
    return clamped_descent(tree, digits)


def reconstruct_leaf(model: HiPaNModel, tree: TreeSpec, x: PadicCode) -> int:
    """Leaf id reached by reconstructing a record's code."""
    digits, _ = reconstruct_digits(model, x)
    return clamped_descent(tree, digits)


def vdp_layer_apply(
    coeffs: Mapping[Ball, float] | Iterable[tuple[Ball, float]],
    x: PadicCode,
    alpha: float = DEFAULT_LEAK,
) -> np.ndarray:
    """Apply one indicator layer: coefficient times leaky membership.

    Args:
        coeffs: balls of one common depth with their coefficients; a dict
            iterates in insertion order.
        x: input code.
        alpha: leak outside each ball.

    Returns:
        Array of coefficient * indicator values in iteration order.

    Raises:
        ValueError: when the balls mix depths.
    """
    pairs = list(coeffs.items() if isinstance(coeffs, Mapping) else coeffs)
    if not pairs:
        return np.zeros(0)
    depths = {ball.depth for ball, _ in pairs}
    if len(depths) > 1:
        raise ValueError(f"layer mixes ball depths {sorted(depths)}")
    return np.array(
        [c * leaky_indicator(ball, x, alpha) for ball, c in pairs], dtype=np.float64
    )


def activation_path(x: PadicCode) -> list[Ball]:
    """The nested balls a code activates, shallowest (depth 1) first."""
    return [Ball(x, depth) for depth in range(1, x.params.K + 1)]


@dataclass(frozen=True)
class BallSummary:
    """What a digit prefix denotes inside an encoded hierarchy."""

    depth: int
    member_count: int
    members: tuple[str, ...]
    subtree_root: str | None


def describe_ball(
    dataset: EncodedDataset, tree: TreeSpec, prefix: Sequence[int]
) -> BallSummary:
    """Summarize the ball of codes extending a digit prefix.

    Members are dataset records whose codes start with the prefix; the
    subtree root is the hierarchy node the prefix walks to (None when the
    prefix leaves the hierarchy).
    """
    prefix = [int(d) for d in prefix]
    if len(prefix) > dataset.codec.K:
        raise ValueError(f"prefix longer than K={dataset.codec.K}")
    members = tuple(
        r.leaf for r in dataset.records if list(r.code.digits[: len(prefix)]) == prefix
    )
    node: int | None = tree.root
    for d in prefix:
        kids = tree.children[node]
        if not kids:
            node = node if d == 0 else None
            if node is None:
                break
            continue
        if d >= len(kids):
            node = None
            break
        node = kids[d]
    return BallSummary(
        depth=len(prefix),
        member_count=len(members),
        members=members,
        subtree_root=None if node is None else tree.names[node],
    )


def model_state(model: HiPaNModel) -> dict:
    """JSON-ready model snapshot: header scalars + flat row-major tables."""
    cfg = model.config
    body: dict[str, list[float]] = {"root": model.root.scores.ravel().tolist()}
    if model.dense is not None:
        body["dense"] = model.dense.table.ravel().tolist()
    for i, head in enumerate(model.deep):
        body[f"deep{i}.table"] = head.table.ravel().tolist()
        body[f"deep{i}.anchor"] = head.anchor.ravel().tolist()
    return {
        "format": CHECKPOINT_FORMAT,
        "p": cfg.codec.p,
        "K": cfg.codec.K,
        "K_heads": cfg.K_heads,
        "alpha": cfg.alpha,
        "tau": cfg.tau,
        "seed": model.init_seed,
        "tables": body,
    }


def model_from_state(state: dict) -> HiPaNModel:
    """Inverse of model_state.

    Raises:
        ValueError: unknown format tag or malformed tables.
    """
    if state.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unknown model state format {state.get('format')!r}")
    codec = CodecParams(int(state["p"]), int(state["K"]))
    config = ModelConfig(
        codec, int(state["K_heads"]), float(state["alpha"]), float(state["tau"])
    )
    p = codec.p
    tables = state["tables"]

    def pull(name: str, shape: tuple[int, ...]) -> np.ndarray:
        arr = np.array(tables[name], dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise ValueError(f"table {name} has {arr.size} values, wanted {shape}")
        return arr.reshape(shape)

    root = RootHead(pull("root", (p,)))
    dense = DenseMSEHead(pull("dense", (p, p))) if config.K_heads >= 2 else None
    deep = [
        TwoLogitCEHead(pull(f"deep{i}.table", (p, p)), pull(f"deep{i}.anchor", (p,)))
        for i in range(max(0, config.K_heads - 2))
    ]
    return HiPaNModel(config, root, dense, deep, init_seed=int(state.get("seed", 0)))


__all__ = [
    "BallSummary",
    "CHECKPOINT_FORMAT",
    "DenseMSEHead",
    "HiPaNModel",
    "ModelConfig",
    "RECONSTRUCT_MARGIN",
    "RootHead",
    "TwoLogitCEHead",
    "activation_path",
    "clamped_descent",
    "describe_ball",
    "model_from_state",
    "model_state",
    "new_model",
    "parameter_count",
    "predict_digits",
    "predict_leaf",
    "reconstruct_digits",
    "reconstruct_leaf",
    "reconstruct_matrix",
    "score_row",
    "softmax",
    "softmax_rows",
    "vdp_layer_apply",
]
