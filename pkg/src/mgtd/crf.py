"""Linear-chain CRF for human/AI token labeling.

Emission scores come from hashed sparse indicator features per token; the
chain adds label-transition, start, and end potentials. Training maximizes
conditional log-likelihood with exact forward-backward marginals; decoding
is Viterbi with ties broken toward label H (index 0).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .corpus import extract_boundaries, word_tokenize
from .hashing import bucket
from .optim import Adam

LABELS = ("H", "M")


class CrfError(ValueError):
    """Raised for unusable CRF inputs."""


@dataclass(frozen=True)
class FeaturizerSettings:
    feature_space: int = 2**18
    position_buckets: int = 8


_SHAPE_RE = re.compile(r"(.)\1*")


def _word_shape(token: str) -> str:
    mapped = "".join(
        "X" if c.isupper() else "x" if c.islower() else "d" if c.isdigit() else "p"
        for c in token
    )
    return _SHAPE_RE.sub(lambda m: m.group(1), mapped)


def token_feature_strings(tokens, i: int, buckets: int) -> list[str]:
    """Feature templates for token ``i``: identity, lowercase form, shape,
    position bucket, neighbors, and character trigrams."""
    token = tokens[i]
    lowered = token.lower()
    n = len(tokens)
    feats = [
        f"w={token}",
        f"lw={lowered}",
        f"shape={_word_shape(token)}",
        f"pos={min(buckets - 1, i * buckets // n)}",
        f"prev={tokens[i - 1].lower() if i > 0 else '<bos>'}",
        f"next={tokens[i + 1].lower() if i < n - 1 else '<eos>'}",
    ]
    feats.extend(f"tri={lowered[j:j + 3]}" for j in range(len(lowered) - 2))
    return feats


def featurize_tokens(tokens, settings: FeaturizerSettings) -> list[np.ndarray]:
    """Per-token arrays of active hashed feature indices (sorted, unique)."""
    out = []
    for i in range(len(tokens)):
        idx = {bucket(f, settings.feature_space) for f in
               token_feature_strings(tokens, i, settings.position_buckets)}
        out.append(np.fromiter(sorted(idx), dtype=np.int64))
    return out


@dataclass
class CrfModel:
    emission: np.ndarray  # labels x feature_space
    transitions: np.ndarray  # labels x labels
    start: np.ndarray
    end: np.ndarray
    settings: FeaturizerSettings = field(default_factory=FeaturizerSettings)
    labels: tuple = LABELS
    history: dict = field(default_factory=dict, compare=False)

    def params(self) -> list[np.ndarray]:
        return [self.emission, self.transitions, self.start, self.end]

    def to_record(self) -> dict:
        rows = []
        for row in self.emission:
            nz = np.flatnonzero(row)
            rows.append({"indices": nz.tolist(), "values": row[nz].tolist()})
        return {
            "labels": list(self.labels),
            "feature_space": self.settings.feature_space,
            "position_buckets": self.settings.position_buckets,
            "emission": rows,
            "transitions": self.transitions.tolist(),
            "start": self.start.tolist(),
            "end": self.end.tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CrfModel":
        settings = FeaturizerSettings(
            feature_space=rec["feature_space"], position_buckets=rec["position_buckets"]
        )
        emission = np.zeros((len(rec["labels"]), settings.feature_space))
        for l, row in enumerate(rec["emission"]):
            emission[l, row["indices"]] = row["values"]
        return cls(
            emission=emission,
            transitions=np.asarray(rec["transitions"], dtype=np.float64),
            start=np.asarray(rec["start"], dtype=np.float64),
            end=np.asarray(rec["end"], dtype=np.float64),
            settings=settings,
            labels=tuple(rec["labels"]),
        )


def init_crf(settings: FeaturizerSettings = FeaturizerSettings()) -> CrfModel:
    num = len(LABELS)
    return CrfModel(
        emission=np.zeros((num, settings.feature_space)),
        transitions=np.zeros((num, num)),
        start=np.zeros(num),
        end=np.zeros(num),
        settings=settings,
    )


def emissions(tokens, model: CrfModel) -> np.ndarray:
    """n x L matrix of emission scores for a token sequence."""
    if not tokens:
        raise CrfError("need at least one token")
    feats = featurize_tokens(tokens, model.settings)
    return emissions_from_features(feats, model)


def emissions_from_features(feats, model: CrfModel) -> np.ndarray:
    em = np.empty((len(feats), len(model.labels)))
    for t, idx in enumerate(feats):
        em[t] = model.emission[:, idx].sum(axis=1)
    return em


def path_score(em: np.ndarray, model: CrfModel, label_idx) -> float:
    """Score of one labeling: start + emissions + transitions + end."""
    y = np.asarray(label_idx)
    score = model.start[y[0]] + em[np.arange(len(y)), y].sum() + model.end[y[-1]]
    if len(y) > 1:
        score += model.transitions[y[:-1], y[1:]].sum()
    return float(score)


def _forward(em: np.ndarray, model: CrfModel) -> np.ndarray:
    n = em.shape[0]
    alpha = np.empty_like(em)
    alpha[0] = model.start + em[0]
    for t in range(1, n):
        alpha[t] = em[t] + logsumexp(alpha[t - 1][:, None] + model.transitions, axis=0)
    return alpha


def _backward(em: np.ndarray, model: CrfModel) -> np.ndarray:
    n = em.shape[0]
    beta = np.empty_like(em)
    beta[n - 1] = model.end
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(model.transitions + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def forward_logZ(em: np.ndarray, model: CrfModel) -> float:
    """Log-partition over all labelings, by the stable forward recursion."""
    if not np.all(np.isfinite(em)):
        raise CrfError("emissions must be finite")
    alpha = _forward(em, model)
    return float(logsumexp(alpha[-1] + model.end))


def forward_backward(em: np.ndarray, model: CrfModel):
    """(logZ, per-position marginals, per-step pairwise marginals)."""
    alpha = _forward(em, model)
    beta = _backward(em, model)
    log_z = float(logsumexp(alpha[-1] + model.end))
    unary = np.exp(alpha + beta - log_z)
    n = em.shape[0]
    pairwise = np.empty((max(n - 1, 0), len(model.labels), len(model.labels)))
    for t in range(n - 1):
        joint = alpha[t][:, None] + model.transitions + (em[t + 1] + beta[t + 1])[None, :]
        pairwise[t] = np.exp(joint - log_z)
    return log_z, unary, pairwise


def nll_and_gradient(tokens, gold_labels, model: CrfModel, feats=None):
    """Negative log-likelihood of the gold labeling and exact gradients.

    Gradients are expected feature counts under the model minus the observed
    gold counts, keyed by parameter name.
    """
    if feats is None:
        feats = featurize_tokens(tokens, model.settings)
    label_index = {l: i for i, l in enumerate(model.labels)}
    try:
        y = np.asarray([label_index[l] for l in gold_labels])
    except KeyError as exc:
        raise CrfError(f"label {exc.args[0]!r} is not in the model alphabet") from exc
    if len(y) != len(feats):
        raise CrfError("labels and tokens disagree on length")
    em = emissions_from_features(feats, model)
    log_z, unary, pairwise = forward_backward(em, model)
    loss = log_z - path_score(em, model, y)

    grad_emission = np.zeros_like(model.emission)
    coeff = unary.copy()
    coeff[np.arange(len(y)), y] -= 1.0
    for t, idx in enumerate(feats):
        for l in range(len(model.labels)):
            grad_emission[l, idx] += coeff[t, l]
    grad_transitions = pairwise.sum(axis=0) if len(y) > 1 else np.zeros_like(model.transitions)
    if len(y) > 1:
        np.subtract.at(grad_transitions, (y[:-1], y[1:]), 1.0)
    grad_start = unary[0].copy()
    grad_start[y[0]] -= 1.0
    grad_end = unary[-1].copy()
    grad_end[y[-1]] -= 1.0
    return float(loss), {
        "emission": grad_emission,
        "transitions": grad_transitions,
        "start": grad_start,
        "end": grad_end,
    }


def viterbi_decode(em: np.ndarray, model: CrfModel):
    """Best labeling and its path score; ties prefer the lower label index."""
    n = em.shape[0]
    score = model.start + em[0]
    back = np.zeros((n, len(model.labels)), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, None] + model.transitions  # prev x cur
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(len(model.labels))] + em[t]
    score = score + model.end
    last = int(np.argmax(score))
    best = float(score[last])
    path = [last]
    for t in range(n - 1, 0, -1):
        last = int(back[t, last])
        path.append(last)
    path.reverse()
    return [model.labels[i] for i in path], best


def train_crf(
    train_docs,
    config,
    val_docs=None,
    settings: FeaturizerSettings = FeaturizerSettings(),
) -> CrfModel:
    """Fit by Adam on per-document NLL plus (l2/2)|theta|^2.

    One document per step. When validation documents are given, training
    early-stops on validation token accuracy with the configured patience
    and keeps the best-epoch parameters.
    """
    docs = list(train_docs)
    if not docs:
        raise CrfError("training corpus is empty")
    seen = {l for d in docs for l in d.token_labels}
    if len(seen) < 2:
        raise CrfError("training corpus carries a single label; nothing to learn")
    model = init_crf(settings)
    feats = [featurize_tokens(d.tokens, settings) for d in docs]
    params = model.params()
    opt = Adam([p.shape for p in params], config.learning_rate)
    rng = np.random.default_rng(config.seed)
    history = {"train_nll": [], "val_accuracy": []}
    best = None
    best_acc = -np.inf
    stale = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(docs))
        for i in order:
            doc = docs[i]
            _, grads = nll_and_gradient(doc.tokens, doc.token_labels, model, feats=feats[i])
            grad_list = [grads["emission"], grads["transitions"], grads["start"], grads["end"]]
            if config.l2 > 0.0:
                for g, p in zip(grad_list, params):
                    g += config.l2 * p
            opt.step(params, grad_list)
        nll = np.mean(
            [
                nll_and_gradient(d.tokens, d.token_labels, model, feats=f)[0]
                for d, f in zip(docs, feats)
            ]
        )
        history["train_nll"].append(float(nll))
        if val_docs is not None:
            acc = token_accuracy(model, val_docs)
            history["val_accuracy"].append(acc)
            if acc > best_acc + 1e-12:
                best_acc = acc
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


def token_accuracy(model: CrfModel, docs) -> float:
    correct = 0
    total = 0
    for doc in docs:
        decoded, _ = viterbi_decode(emissions(doc.tokens, model), model)
        correct += sum(d == g for d, g in zip(decoded, doc.token_labels))
        total += len(decoded)
    return correct / total if total else 0.0


def segment(text: str, model: CrfModel) -> dict:
    """Tokenize, decode, and report labels plus authorship boundaries."""
    tokens = word_tokenize(text)
    if not tokens:
        raise CrfError("cannot segment empty text")
    decoded, score = viterbi_decode(emissions(tokens, model), model)
    return {
        "tokens": tokens,
        "token_labels": "".join(decoded),
        "boundaries": extract_boundaries(decoded),
        "score": score,
    }
