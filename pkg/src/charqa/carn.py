"""Character-aware reasoning network.

Per QA candidate, the question+answer token sequence is encoded by a shared
two-layer self-attention encoder, fused with the visual semantic stream by a
co-attention decoder, then with the subtitle stream by a second decoder. The
five pooled candidate vectors pass through one self-attention block and a
shared scalar head, softmaxed into answer probabilities. Name tokens live in
their own embedding table, trained from scratch, separate from words; words
missing from the vocabulary embed as the mean of their character vectors.

The QA loss is cross-entropy on the gold option; the naming head trains
jointly through the regularized-KL term, weighted by lambda.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import nn
from .castlist import CastList, map_speaker
from .corpus import Clip, QAItem, DEFAULT_HUMAN_WORDS
from .errors import (ClampWarning, ConfigError, EmptyContextWarning,
                     SchemaVersionError, VocabError)
from .naming import (NameDistributionSeq, NamingParams, assign_names, broadcast_targets,
                     naming_backward, naming_forward, rkl_loss_with_grad)
from .semantics import build_semantic_stream

CHECKPOINT_VERSION = "charqa-ckpt-1"
PROB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Modality flags and the ablation grid


@dataclass(frozen=True)
class ModalityConfig:
    """Which streams feed the network, and where names are injected.

    The name switch is split per stream (objs_names / rels_names) because the
    ablation grid includes mixed rows like Objs_nm + Rels.
    """

    use_sub: bool = True
    use_objs: bool = True
    use_rels: bool = True
    objs_names: bool = True
    rels_names: bool = True

    def __post_init__(self):
        if not (self.use_sub or self.use_objs or self.use_rels):
            raise ConfigError("at least one modality must be enabled")
        if self.objs_names and not self.use_objs:
            raise ConfigError("objs_names requires use_objs")
        if self.rels_names and not self.use_rels:
            raise ConfigError("rels_names requires use_rels")

    def label(self) -> str:
        parts = []
        if self.use_sub:
            parts.append("Sub")
        if self.use_objs:
            parts.append("Objs_nm" if self.objs_names else "Objs")
        if self.use_rels:
            parts.append("Rels_nm" if self.rels_names else "Rels")
        return " + ".join(parts)

    @classmethod
    def from_label(cls, label: str) -> "ModalityConfig":
        kw = dict(use_sub=False, use_objs=False, use_rels=False,
                  objs_names=False, rels_names=False)
        for part in [p.strip() for p in label.replace(",", " + ").split(" + ") if p.strip()]:
            key = part.lower()
            if key == "sub":
                kw["use_sub"] = True
            elif key == "objs":
                kw["use_objs"] = True
            elif key == "objs_nm":
                kw.update(use_objs=True, objs_names=True)
            elif key == "rels":
                kw["use_rels"] = True
            elif key == "rels_nm":
                kw.update(use_rels=True, rels_names=True)
            else:
                raise ConfigError(f"unknown modality part {part!r}")
        return cls(**kw)


VARIANT_LABELS = (
    "Sub",
    "Sub + Objs",
    "Sub + Rels",
    "Sub + Objs_nm",
    "Sub + Rels_nm",
    "Sub + Objs + Rels",
    "Sub + Objs + Rels_nm",
    "Sub + Objs_nm + Rels",
    "Sub + Objs_nm + Rels_nm",
)

FULL_VARIANT = VARIANT_LABELS[-1]


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocab:
    words: tuple[str, ...]
    names: tuple[str, ...]  # cast names + UNKNAME, the name-table rows
    chars: tuple[str, ...]
    word_index: dict = field(init=False, repr=False, compare=False)
    name_index: dict = field(init=False, repr=False, compare=False)
    char_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "word_index", {w: i for i, w in enumerate(self.words)})
        object.__setattr__(self, "name_index", {n: i for i, n in enumerate(self.names)})
        object.__setattr__(self, "char_index", {c: i for i, c in enumerate(self.chars)})
        if set(self.words) & set(self.names):
            raise VocabError("word and name index spaces must be disjoint")


def build_vocab(clips: list[Clip], cast: CastList) -> Vocab:
    """Collect every token the corpus can feed the network.

    Cast names are excluded from the word table (they live in the name
    table); the character table covers every character of every token, so
    unseen words at evaluation time can still embed.
    """
    tokens: set[str] = set()
    for clip in clips:
        for line in clip.subtitles:
            tokens.update(line.tokens)
        for qa in clip.qas:
            tokens.update(qa.question)
            for ans in qa.answers:
                tokens.update(ans)
        for frame in clip.frames:
            for label, attr in frame.objects:
                tokens.add(label)
                if attr is not None:
                    tokens.add(attr)
            for t in frame.triples:
                tokens.update(t.tokens)
            for _, word in frame.human_boxes:
                tokens.add(word)
    names = cast.label_names()
    words = sorted(tokens - set(names))
    chars = sorted({ch for tok in tokens | set(names) for ch in tok})
    return Vocab(tuple(words), tuple(names), tuple(chars))


# ---------------------------------------------------------------------------
# Token streams


def subtitle_stream(subtitles, cast: CastList):
    """Tokens of each line prefixed by its speaker mapped through the cast
    (principal name or UNKNAME), flags marking the name positions."""
    labels = cast.label_names()
    toks: list[str] = []
    flags: list[bool] = []
    for line in subtitles:
        toks.append(labels[map_speaker(line.speaker, cast)])
        flags.append(True)
        toks.extend(line.tokens)
        flags.extend(False for _ in line.tokens)
    return toks, flags


def qa_stream(question, answer, cast: CastList):
    """[question ; answer] token concatenation; cast members are names."""
    toks = list(question) + list(answer)
    return toks, [t in cast for t in toks]


def visual_stream(frames, modality: ModalityConfig, face_names, cast: CastList,
                  human_words=DEFAULT_HUMAN_WORDS):
    if not (modality.use_objs or modality.use_rels):
        return [], []
    stream = build_semantic_stream(
        frames, face_names, human_words,
        use_objs=modality.use_objs, use_rels=modality.use_rels,
        objs_names=modality.objs_names, rels_names=modality.rels_names,
        name_set=frozenset(cast.names),
    )
    return list(stream.tokens), list(stream.name_flags)


# ---------------------------------------------------------------------------
# Embedding (word / name / character tables)

_WORD, _NAME, _CHAR = 0, 1, 2


def embed_sequence(params, vocab: Vocab, tokens, flags):
    """(n, d_model) embedding matrix plus a scatter plan for backward."""
    word_t = params["embed.word"]
    name_t = params["embed.name"]
    char_t = params["embed.char"]
    rows = []
    plan = []
    for tok, is_name in zip(tokens, flags):
        if not tok:
            raise VocabError("empty token cannot be embedded")
        if is_name and tok in vocab.name_index:
            i = vocab.name_index[tok]
            rows.append(name_t[i])
            plan.append((_NAME, i))
        elif tok in vocab.word_index:
            i = vocab.word_index[tok]
            rows.append(word_t[i])
            plan.append((_WORD, i))
        else:
            ids = []
            for ch in tok:
                j = vocab.char_index.get(ch)
                if j is None:
                    raise VocabError(f"token {tok!r}: character {ch!r} not in character table")
                ids.append(j)
            rows.append(char_t[ids].mean(axis=0))
            plan.append((_CHAR, tuple(ids)))
    d = word_t.shape[1]
    x = np.stack(rows) if rows else np.zeros((0, d))
    return x, plan


def embed_backward(grads, params, plan, dx):
    gw = grads.setdefault("embed.word", np.zeros_like(params["embed.word"]))
    gn = grads.setdefault("embed.name", np.zeros_like(params["embed.name"]))
    gc = grads.setdefault("embed.char", np.zeros_like(params["embed.char"]))
    for (kind, ref), drow in zip(plan, dx):
        if kind == _WORD:
            gw[ref] += drow
        elif kind == _NAME:
            gn[ref] += drow
        else:
            share = drow / len(ref)
            for j in ref:
                gc[j] += share


@lru_cache(maxsize=256)
def _pe(n: int, d: int) -> np.ndarray:
    return nn.sinusoidal_positions(n, d)


def prepare_sequence(params, vocab: Vocab, tokens, flags, n_pad: int = 0):
    """Embed + sinusoidal positional encoding; optional all-zero pad rows.

    Pads embed to the zero vector (no positional encoding either) and are
    reported as False in the mask.
    """
    x, plan = embed_sequence(params, vocab, tokens, flags)
    n, d = x.shape
    x = x + _pe(n, d) if n else x
    if n_pad:
        x = np.concatenate([x, np.zeros((n_pad, d))], axis=0)
    mask = np.concatenate([np.ones(n, dtype=bool), np.zeros(n_pad, dtype=bool)])
    return x, mask, plan


# ---------------------------------------------------------------------------
# Spec-level ops (wrappers over the nn stacks)


def attention(q, k, key_mask=None):
    """softmax(QK^T/sqrt(d_h)) K, keys reused as values."""
    return nn.attention(q, k, key_mask)


def encode(x, params, prefix: str = "enc", n_layers: int = 2, key_mask=None):
    """Self-attention encoder stack; output length equals input length."""
    y, _ = nn.stack_forward(params, prefix, n_layers, x, None, key_mask)
    return y


def co_attend(h_input, h_context, params, prefix: str = "dec_v",
              n_layers: int = 2, context_mask=None):
    """Cross-attention stack: queries from h_input, keys/values from
    h_context. An empty context is an identity pass-through (warned)."""
    if h_context is None or h_context.shape[0] == 0:
        warnings.warn("empty co-attention context; passing input through",
                      EmptyContextWarning, stacklevel=2)
        return h_input
    y, _ = nn.stack_forward(params, prefix, n_layers, h_input, h_context, context_mask)
    return y


def multi_task_loss(p_a: np.ndarray, gold: int, rkl_value: float, lam: float = 1.0) -> float:
    """-log p_a[gold] + lambda * rkl; probability floored at 1e-12."""
    if rkl_value < 0:
        raise ValueError("rkl_value must be >= 0")
    pg = float(p_a[gold])
    if pg < PROB_FLOOR:
        warnings.warn(f"gold probability {pg:.3e} clamped to {PROB_FLOOR:.0e}",
                      ClampWarning, stacklevel=2)
        pg = PROB_FLOOR
    return -float(np.log(pg)) + lam * rkl_value


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    d_ff: int = 128
    d_h1: int = 64
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ans_layers: int = 1
    d_f: int = 256
    epsilon: float = 0.05

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError("d_model must be divisible by heads")
        for name in ("d_model", "d_ff", "d_h1", "heads", "enc_layers",
                     "dec_layers", "ans_layers", "d_f"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in [0, 1)")


@dataclass
class ItemResult:
    loss: float
    ce: float
    rkl: float
    p_a: np.ndarray
    correct: bool
    clamped: bool = False
    empty_context: int = 0


class Model:
    """Parameters + vocabulary + cast; forward/backward for single items."""

    def __init__(self, vocab: Vocab, cast: CastList, config: ModelConfig = ModelConfig(),
                 human_words=DEFAULT_HUMAN_WORDS, rng=None, params=None):
        self.vocab = vocab
        self.cast = cast
        self.config = config
        self.human_words = tuple(human_words)
        if params is not None:
            self.params = params
        else:
            self.params = self._init_params(rng if rng is not None else np.random.default_rng(0))

    def _init_params(self, rng) -> dict[str, np.ndarray]:
        c = self.config
        p: dict[str, np.ndarray] = {}
        p["embed.word"] = rng.standard_normal((len(self.vocab.words), c.d_model))
        p["embed.name"] = rng.standard_normal((len(self.vocab.names), c.d_model))
        p["embed.char"] = rng.standard_normal((len(self.vocab.chars), c.d_model))
        nn.init_stack(rng, p, "enc", c.enc_layers, c.d_model, c.d_ff, c.heads)
        nn.init_stack(rng, p, "dec_v", c.dec_layers, c.d_model, c.d_ff, c.heads)
        nn.init_stack(rng, p, "dec_s", c.dec_layers, c.d_model, c.d_ff, c.heads)
        nn.init_stack(rng, p, "ans", c.ans_layers, c.d_model, c.d_ff, c.heads)
        p["ans.head.w"] = rng.standard_normal(c.d_model) / np.sqrt(c.d_model)
        p["ans.head.b"] = np.zeros(())
        head = NamingParams.init(rng, c.d_f, c.d_h1, self.cast.size)
        p["naming.w1"] = head.w1
        p["naming.b1"] = head.b1
        p["naming.w2"] = head.w2
        p["naming.b2"] = head.b2
        return p

    # -- naming ----------------------------------------------------------

    def naming_params(self) -> NamingParams:
        p = self.params
        return NamingParams(p["naming.w1"], p["naming.b1"], p["naming.w2"], p["naming.b2"])

    @staticmethod
    def face_table(clip: Clip):
        faces = sorted(clip.all_faces(), key=lambda f: f.face_id)
        ids = tuple(f.face_id for f in faces)
        if not faces:
            return ids, np.zeros((0, 1))
        return ids, np.stack([f.embedding for f in faces])

    def predict_faces(self, clip: Clip) -> NameDistributionSeq:
        ids, table = self.face_table(clip)
        if not ids:
            return NameDistributionSeq((), np.zeros((0, self.cast.size)))
        rows, _ = naming_forward(self.naming_params(), table)
        return NameDistributionSeq(ids, rows)

    def name_assignments(self, clip: Clip) -> dict[int, str]:
        if not any(True for _ in clip.all_faces()):
            return {}
        return assign_names(self.predict_faces(clip), self.cast)

    # -- QA forward ------------------------------------------------------

    def _encode_stream(self, tokens, flags):
        """Embed + PE + shared encoder; None for an empty stream."""
        if not tokens:
            return None, None
        x, _, plan = prepare_sequence(self.params, self.vocab, tokens, flags)
        h, cache = nn.stack_forward(self.params, "enc", self.config.enc_layers, x)
        return h, (plan, cache, len(tokens))

    def forward_item(self, view: Clip, qa: QAItem, modality: ModalityConfig,
                     face_names: dict[int, str]):
        """Probabilities over the 5 candidates, plus the full backward cache."""
        c = self.config
        p = self.params
        vis_toks, vis_flags = visual_stream(view.frames, modality, face_names,
                                            self.cast, self.human_words)
        sub_toks, sub_flags = (subtitle_stream(view.subtitles, self.cast)
                               if modality.use_sub else ([], []))
        h_v, vis_cache = self._encode_stream(vis_toks, vis_flags)
        h_s, sub_cache = self._encode_stream(sub_toks, sub_flags)
        empty_context = int(h_v is None) + int(h_s is None)

        pooled = []
        cand_caches = []
        for ans in qa.answers:
            toks, flags = qa_stream(qa.question, ans, self.cast)
            x, _, plan = prepare_sequence(p, self.vocab, toks, flags)
            h_q, enc_cache = nn.stack_forward(p, "enc", c.enc_layers, x)
            if h_v is None:
                u, dv_cache = h_q, None
            else:
                u, dv_cache = nn.stack_forward(p, "dec_v", c.dec_layers, h_q, h_v)
            if h_s is None:
                v, ds_cache = u, None
            else:
                v, ds_cache = nn.stack_forward(p, "dec_s", c.dec_layers, u, h_s)
            pooled.append(v.mean(axis=0))
            cand_caches.append((plan, enc_cache, dv_cache, ds_cache, v.shape[0]))

        m = np.stack(pooled)
        a, ans_cache = nn.stack_forward(p, "ans", c.ans_layers, m)
        logits = a @ p["ans.head.w"] + p["ans.head.b"]
        p_a = nn.softmax(logits, axis=-1)
        cache = (vis_cache, sub_cache, cand_caches, ans_cache, a, empty_context)
        return p_a, cache

    def backward_item(self, cache, dlogits: np.ndarray, grads: dict) -> None:
        """Accumulate parameter gradients for one item, given dL/dlogits."""
        c = self.config
        p = self.params
        vis_cache, sub_cache, cand_caches, ans_cache, a, _ = cache

        grads["ans.head.w"] = grads.get("ans.head.w", 0) + a.T @ dlogits
        grads["ans.head.b"] = grads.get("ans.head.b", 0) + dlogits.sum()
        da = dlogits[:, None] * p["ans.head.w"][None, :]
        dm, _ = nn.stack_backward(p, "ans", ans_cache, da, grads)

        d_hv = None
        d_hs = None
        for i, (plan, enc_cache, dv_cache, ds_cache, n_pos) in enumerate(cand_caches):
            dv = np.repeat(dm[i][None, :] / n_pos, n_pos, axis=0)
            if ds_cache is not None:
                du, dctx = nn.stack_backward(p, "dec_s", ds_cache, dv, grads)
                d_hs = dctx if d_hs is None else d_hs + dctx
            else:
                du = dv
            if dv_cache is not None:
                dh_q, dctx = nn.stack_backward(p, "dec_v", dv_cache, du, grads)
                d_hv = dctx if d_hv is None else d_hv + dctx
            else:
                dh_q = du
            dx, _ = nn.stack_backward(p, "enc", enc_cache, dh_q, grads)
            embed_backward(grads, p, plan, dx)

        for d_h, stream_cache in ((d_hv, vis_cache), (d_hs, sub_cache)):
            if d_h is None or stream_cache is None:
                continue
            plan, enc_cache, _ = stream_cache
            dx, _ = nn.stack_backward(p, "enc", enc_cache, d_h, grads)
            embed_backward(grads, p, plan, dx)

    # -- joint loss ------------------------------------------------------

    def item_loss_and_grads(self, clip: Clip, view: Clip, qa: QAItem,
                            modality: ModalityConfig, face_names: dict[int, str],
                            lam: float = 1.0, grads: dict | None = None,
                            targets=None) -> ItemResult:
        """Eq.-style joint objective on one QA item: CE + lambda * clip RKL.

        The RKL term always runs over the full clip (naming supervision does
        not depend on the QA window). face_names is the current discrete
        assignment; no gradient flows through it.
        """
        p_a, cache = self.forward_item(view, qa, modality, face_names)
        gold = qa.correct_index
        pg = float(p_a[gold])
        clamped = pg < PROB_FLOOR
        ce = -float(np.log(max(pg, PROB_FLOOR)))

        ids, table = self.face_table(clip)
        if targets is None:
            targets = broadcast_targets(clip, self.cast, self.config.epsilon)
        rkl = 0.0
        if ids and targets.entries:
            rows, ncache = naming_forward(self.naming_params(), table)
            preds = NameDistributionSeq(ids, rows)
            rkl, drows = rkl_loss_with_grad(preds, targets)
            if grads is not None and lam != 0.0:
                for k, g in naming_backward(self.naming_params(), ncache, lam * drows).items():
                    key = "naming." + k
                    grads[key] = grads.get(key, 0) + g

        if grads is not None:
            dlogits = p_a.copy()
            dlogits[gold] -= 1.0
            self.backward_item(cache, dlogits, grads)

        return ItemResult(ce + lam * rkl, ce, rkl, p_a,
                          correct=int(np.argmax(p_a)) == gold,
                          clamped=clamped, empty_context=cache[-1])

    def score(self, view: Clip, qa: QAItem, modality: ModalityConfig,
              face_names: dict[int, str]) -> np.ndarray:
        p_a, _ = self.forward_item(view, qa, modality, face_names)
        return p_a

    # -- persistence -----------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": self.config.__dict__,
            "human_words": list(self.human_words),
            "vocab": {"words": list(self.vocab.words), "names": list(self.vocab.names),
                      "chars": list(self.vocab.chars)},
            "cast": self.cast.to_dict(),
        }
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **self.params)

    @classmethod
    def load(cls, path) -> "Model":
        with np.load(path) as z:
            meta = json.loads(bytes(z["__meta__"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise SchemaVersionError(
                    f"unsupported checkpoint version {meta.get('version')!r}"
                    f" (expected {CHECKPOINT_VERSION!r})"
                )
            params = {k: z[k].copy() for k in z.files if k != "__meta__"}
        vocab = Vocab(tuple(meta["vocab"]["words"]), tuple(meta["vocab"]["names"]),
                      tuple(meta["vocab"]["chars"]))
        cast = CastList.from_dict(meta["cast"])
        config = ModelConfig(**meta["config"])
        return cls(vocab, cast, config, human_words=tuple(meta["human_words"]), params=params)


__all__ = [
    "CHECKPOINT_VERSION", "PROB_FLOOR", "ModalityConfig", "VARIANT_LABELS",
    "FULL_VARIANT", "Vocab", "build_vocab", "subtitle_stream", "qa_stream",
    "visual_stream", "embed_sequence", "embed_backward", "prepare_sequence",
    "attention", "encode", "co_attend", "multi_task_loss", "ModelConfig",
    "ItemResult", "Model",
]
