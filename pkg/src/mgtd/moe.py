"""Mixture-of-Experts document classifier over a hashed embedding.

A linear gate maps the document embedding to expert logits. Hard mode routes
each input to the argmax expert (winner-takes-all); soft mode mixes every
expert's logits by the softmax gate weights. Both modes return the gate
logits alongside the output so an auxiliary load-balance loss can be added
during training.

Hard-mode training uses a straight-through surrogate: the forward pass and
the expert gradients follow the selected expert, while the gate receives the
gradient of the soft mixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import word_tokenize
from .hashing import bucket, sign
from .optim import Adam


class MoEError(ValueError):
    """Raised for unusable mixture configurations or inputs."""


def embed(text: str, dim: int = 512) -> np.ndarray:
    """Signed feature hashing of lowercased word tokens, L2-normalized.

    Empty text embeds to the zero vector; everything else has unit norm.
    """
    v = np.zeros(dim)
    for token in word_tokenize(text):
        t = token.lower()
        v[bucket(t, dim)] += sign(t)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def embed_many(texts, dim: int = 512) -> np.ndarray:
    return np.stack([embed(t, dim) for t in texts])


@dataclass
class Expert:
    """Two-layer ReLU MLP: (hidden x dim) then (classes x hidden)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class MoEModel:
    mode: str  # "Hard" or "Soft"
    classes: tuple
    gate_w: np.ndarray  # experts x dim
    gate_b: np.ndarray
    experts: list[Expert]
    dropout_rate: float = 0.1
    aux_weight: float = 0.01
    history: dict = field(default_factory=dict, compare=False)

    @property
    def embed_dim(self) -> int:
        return self.gate_w.shape[1]

    @property
    def num_experts(self) -> int:
        return len(self.experts)

    def params(self) -> list[np.ndarray]:
        out = [self.gate_w, self.gate_b]
        for e in self.experts:
            out.extend(e.params())
        return out

    def to_record(self) -> dict:
        return {
            "mode": self.mode,
            "classes": list(self.classes),
            "embed_dim": self.embed_dim,
            "hidden": int(self.experts[0].w1.shape[0]),
            "num_experts": self.num_experts,
            "dropout_rate": self.dropout_rate,
            "aux_weight": self.aux_weight,
            "gate_w": self.gate_w.tolist(),
            "gate_b": self.gate_b.tolist(),
            "experts": [
                {"w1": e.w1.tolist(), "b1": e.b1.tolist(), "w2": e.w2.tolist(), "b2": e.b2.tolist()}
                for e in self.experts
            ],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MoEModel":
        experts = [
            Expert(
                w1=np.asarray(e["w1"]), b1=np.asarray(e["b1"]),
                w2=np.asarray(e["w2"]), b2=np.asarray(e["b2"]),
            )
            for e in rec["experts"]
        ]
        return cls(
            mode=rec["mode"],
            classes=tuple(rec["classes"]),
            gate_w=np.asarray(rec["gate_w"]),
            gate_b=np.asarray(rec["gate_b"]),
            experts=experts,
            dropout_rate=rec["dropout_rate"],
            aux_weight=rec["aux_weight"],
        )


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_moe(
    mode: str,
    classes,
    num_experts: int,
    embed_dim: int = 512,
    hidden: int = 128,
    seed: int = 0,
    dropout_rate: float = 0.1,
    aux_weight: float = 0.01,
) -> MoEModel:
    """Fresh model with symmetric-uniform fan-in weights and zero biases."""
    if mode not in ("Hard", "Soft"):
        raise MoEError(f"mode must be 'Hard' or 'Soft', got {mode!r}")
    if num_experts < 1:
        raise MoEError("need at least one expert")
    if not 0.0 <= dropout_rate < 1.0:
        raise MoEError("dropout_rate must be in [0, 1)")
    classes = tuple(classes)
    if len(classes) < 2:
        raise MoEError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    gate_w = _uniform(rng, embed_dim, (num_experts, embed_dim))
    experts = [
        Expert(
            w1=_uniform(rng, embed_dim, (hidden, embed_dim)),
            b1=np.zeros(hidden),
            w2=_uniform(rng, hidden, (len(classes), hidden)),
            b2=np.zeros(len(classes)),
        )
        for _ in range(num_experts)
    ]
    return MoEModel(
        mode=mode,
        classes=classes,
        gate_w=gate_w,
        gate_b=np.zeros(num_experts),
        experts=experts,
        dropout_rate=dropout_rate,
        aux_weight=aux_weight,
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(model: MoEModel, X: np.ndarray, training: bool, rng):
    """Returns (output_logits, gate_logits, cache for backward)."""
    if X.ndim != 2 or X.shape[1] != model.embed_dim:
        raise MoEError(f"embedding dimension {X.shape[-1]} does not match model {model.embed_dim}")
    if training and model.dropout_rate > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        keep = rng.random(X.shape) >= model.dropout_rate
        X = X * keep / (1.0 - model.dropout_rate)
    gate_logits = X @ model.gate_w.T + model.gate_b
    pre = []  # per-expert hidden pre-activations
    hid = []
    outs = []
    for e in model.experts:
        a = X @ e.w1.T + e.b1
        h = np.maximum(a, 0.0)
        pre.append(a)
        hid.append(h)
        outs.append(h @ e.w2.T + e.b2)
    out_stack = np.stack(outs)  # E x B x C
    if model.mode == "Hard":
        choice = np.argmax(gate_logits, axis=1)
        output = out_stack[choice, np.arange(X.shape[0])]
    else:
        weights = _softmax(gate_logits)
        output = np.einsum("be,ebc->bc", weights, out_stack)
        choice = None
    cache = {"X": X, "gate_logits": gate_logits, "pre": pre, "hid": hid,
             "out_stack": out_stack, "choice": choice}
    return output, gate_logits, cache


def moe_forward(model: MoEModel, embedding: np.ndarray, training: bool = False, rng=None):
    """Forward pass for one document embedding.

    Returns (output_logits over classes, gate_logits over experts). Dropout
    touches the embedding only while ``training`` is set.
    """
    emb = np.asarray(embedding, dtype=np.float64)
    if emb.ndim != 1:
        raise MoEError("moe_forward expects a single embedding vector")
    output, gate_logits, _ = _forward_batch(model, emb[None, :], training, rng)
    return output[0], gate_logits[0]


def aux_load_balance_loss(gate_logits: np.ndarray) -> float:
    """E times the squared deviation of mean gate probabilities from uniform."""
    g = np.asarray(gate_logits, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape[0] < 1:
        raise MoEError("need at least one row of gate logits")
    num = g.shape[1]
    importance = _softmax(g).mean(axis=0)
    return float(num * np.sum((importance - 1.0 / num) ** 2))


def loss_and_gradients(model: MoEModel, X, y_idx, l2: float, training: bool, rng):
    """Total loss (CE + aux + l2) and gradients in model.params() order."""
    n = X.shape[0]
    output, gate_logits, cache = _forward_batch(model, X, training, rng)
    Xd = cache["X"]
    probs = _softmax(output)
    ce = float(-np.mean(np.log(np.clip(probs[np.arange(n), y_idx], 1e-300, None))))
    dout = probs
    dout[np.arange(n), y_idx] -= 1.0
    dout /= n

    gw = _softmax(gate_logits)
    out_stack = cache["out_stack"]
    num = model.num_experts

    grads = []
    # gate: CE path through the soft mixture (exact for Soft, surrogate for Hard)
    s = np.einsum("bc,ebc->be", dout, out_stack)
    dgate = gw * (s - np.sum(gw * s, axis=1, keepdims=True))
    aux = aux_load_balance_loss(gate_logits)
    if model.aux_weight != 0.0:
        importance = gw.mean(axis=0)
        u = 2.0 * num * (importance - 1.0 / num) / n
        daux = gw * (u - np.sum(gw * u, axis=1, keepdims=True))
        dgate = dgate + model.aux_weight * daux
    grads.append(dgate.T @ Xd + l2 * model.gate_w)
    grads.append(dgate.sum(axis=0))

    for i, e in enumerate(model.experts):
        if model.mode == "Hard":
            mask = (cache["choice"] == i)[:, None]
            do = np.where(mask, dout, 0.0)
        else:
            do = gw[:, i][:, None] * dout
        dh = do @ e.w2
        da = dh * (cache["pre"][i] > 0)
        grads.append(da.T @ Xd + l2 * e.w1)
        grads.append(da.sum(axis=0))
        grads.append(do.T @ cache["hid"][i] + l2 * e.w2)
        grads.append(do.sum(axis=0))

    loss = ce + model.aux_weight * aux
    if l2 > 0.0:
        sq = float(np.sum(model.gate_w**2))
        for e in model.experts:
            sq += float(np.sum(e.w1**2)) + float(np.sum(e.w2**2))
        loss += 0.5 * l2 * sq
    return loss, grads


def _evaluate_loss(model: MoEModel, X, y_idx, l2: float) -> float:
    loss, _ = loss_and_gradients(model, X, y_idx, l2, training=False, rng=None)
    return loss


def _clone(model: MoEModel) -> MoEModel:
    return MoEModel.from_record(model.to_record())


def moe_train(
    model: MoEModel,
    embeddings: np.ndarray,
    labels,
    config,
    val_embeddings=None,
    val_labels=None,
) -> MoEModel:
    """Train a copy of ``model`` with mini-batch Adam; returns the copy.

    Minimizes cross-entropy plus ``aux_weight`` times the load-balance loss.
    Deterministic for a fixed config seed; early-stops on validation loss
    when validation data is supplied.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    index = {c: i for i, c in enumerate(model.classes)}
    try:
        y = np.asarray([index[l] for l in labels])
    except KeyError as exc:
        raise MoEError(f"label {exc.args[0]!r} is not in model classes") from exc
    if len(set(labels)) < 2:
        raise MoEError("need at least 2 distinct labels in training data")
    model = _clone(model)
    params = model.params()
    opt = Adam([p.shape for p in params], config.learning_rate)
    rng = np.random.default_rng(config.seed)
    val = None
    if val_embeddings is not None:
        val = (np.asarray(val_embeddings, dtype=np.float64),
               np.asarray([index[l] for l in val_labels]))
    history = {"train_loss": [], "val_loss": []}
    best = None
    best_val = np.inf
    stale = 0
    n = X.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = loss_and_gradients(model, X[idx], y[idx], config.l2, True, rng)
            opt.step(params, grads)
        history["train_loss"].append(_evaluate_loss(model, X, y, config.l2))
        if val is not None:
            vloss = _evaluate_loss(model, val[0], val[1], config.l2)
            history["val_loss"].append(vloss)
            if vloss < best_val - 1e-12:
                best_val = vloss
                best = [p.copy() for p in params]
                stale = 0
            else:
                stale += 1
                if stale > config.early_stop_patience:
                    break
    if best is not None:
        for p, b in zip(params, best):
            p[:] = b
    model.history = history
    return model


def moe_predict_proba(model: MoEModel, embeddings: np.ndarray):
    """(class probabilities, gate weight distribution) per row."""
    X = np.asarray(embeddings, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    output, gate_logits, _ = _forward_batch(model, X, training=False, rng=None)
    probs = _softmax(output)
    gates = _softmax(gate_logits)
    if single:
        return probs[0], gates[0]
    return probs, gates


def moe_predict(model: MoEModel, embeddings: np.ndarray):
    probs, _ = moe_predict_proba(model, embeddings)
    if probs.ndim == 1:
        return model.classes[int(np.argmax(probs))]
    return [model.classes[i] for i in np.argmax(probs, axis=1)]


# ---------------------------------------------------------------------------
# Plain two-layer MLP: the degenerate single-expert configuration
# ---------------------------------------------------------------------------


def mlp_train(expert: Expert, classes, embeddings, labels, config) -> Expert:
    """Train a standalone two-layer MLP with the same loop as the mixture."""
    X = np.asarray(embeddings, dtype=np.float64)
    index = {c: i for i, c in enumerate(classes)}
    y = np.asarray([index[l] for l in labels])
    expert = Expert(*(p.copy() for p in expert.params()))
    params = expert.params()
    opt = Adam([p.shape for p in params], config.learning_rate)
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb, yb = X[idx], y[idx]
            a = Xb @ expert.w1.T + expert.b1
            h = np.maximum(a, 0.0)
            out = h @ expert.w2.T + expert.b2
            probs = _softmax(out)
            dout = probs
            dout[np.arange(len(yb)), yb] -= 1.0
            dout /= len(yb)
            dh = dout @ expert.w2
            da = dh * (a > 0)
            grads = [
                da.T @ Xb + config.l2 * expert.w1,
                da.sum(axis=0),
                dout.T @ h + config.l2 * expert.w2,
                dout.sum(axis=0),
            ]
            opt.step(params, grads)
    return expert


def mlp_forward(expert: Expert, embeddings: np.ndarray) -> np.ndarray:
    X = np.asarray(embeddings, dtype=np.float64)
    h = np.maximum(X @ expert.w1.T + expert.b1, 0.0)
    return h @ expert.w2.T + expert.b2
