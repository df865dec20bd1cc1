"""Training, evaluation (w/ and w/o time stamps), the ablation grid, and the
finite-difference gradient-check runner.

Runs are deterministic given (config, seed): batch order comes from a seeded
generator, parameter updates iterate keys in sorted order, and metrics files
are formatted with fixed precision, so identical configs produce
byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .carn import (FULL_VARIANT, VARIANT_LABELS, ModalityConfig, Model, ModelConfig,
                   build_vocab)
from .castlist import CastList, build_cast_list, count_speakers, scaled_min_count
from .corpus import Clip, clip_view
from .errors import EmptyInputError, NonFiniteLossError
from .naming import (NameDistributionSeq, NamingParams, broadcast_targets, face_accuracy,
                     naming_backward, naming_forward, rkl_loss_with_grad, smoothed_onehot)

METRICS_COLUMNS = ("variant", "use_ts", "qa_acc", "qa_acc_visual",
                   "qa_acc_textual", "face_acc", "seed")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64  # scales down automatically to the corpus size
    learning_rate: float = 1e-3
    epochs: int = 10
    lam: float = 1.0
    epsilon: float = 0.05
    seed: int = 0
    use_ts: bool = True
    modality: ModalityConfig = ModalityConfig()
    model: ModelConfig = ModelConfig()
    min_count: int | None = None  # None: scale the 500-line rule to corpus size
    max_ratio: float = 1.0 / 10.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["modality"] = self.modality.label()
        d["model"] = dict(self.model.__dict__)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = dict(d)
        if isinstance(kw.get("modality"), str):
            kw["modality"] = ModalityConfig.from_label(kw["modality"])
        if isinstance(kw.get("model"), dict):
            kw["model"] = ModelConfig(**kw["model"])
        return cls(**kw)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class MetricsReport:
    variant: str
    use_ts: bool
    qa_acc: float
    qa_acc_visual: float
    qa_acc_textual: float
    face_acc: float
    seed: int
    config_hash: str = ""
    n_items: int = 0
    n_visual: int = 0
    n_textual: int = 0
    n_faces: int = 0
    losses: list = field(default_factory=list)  # per-epoch mean joint loss
    warnings: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("qa_acc", "qa_acc_visual", "qa_acc_textual", "face_acc"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def row(self) -> str:
        return ",".join([
            self.variant, str(int(self.use_ts)),
            f"{self.qa_acc:.6f}", f"{self.qa_acc_visual:.6f}",
            f"{self.qa_acc_textual:.6f}", f"{self.face_acc:.6f}", str(self.seed),
        ])

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "use_ts": self.use_ts, "qa_acc": self.qa_acc,
            "qa_acc_visual": self.qa_acc_visual, "qa_acc_textual": self.qa_acc_textual,
            "face_acc": self.face_acc, "seed": self.seed, "config_hash": self.config_hash,
            "n_items": self.n_items, "n_visual": self.n_visual,
            "n_textual": self.n_textual, "n_faces": self.n_faces,
            "losses": self.losses, "warnings": self.warnings,
        }


def write_metrics_csv(reports, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for r in reports:
            fh.write(r.row() + "\n")


def metrics_csv_text(reports) -> str:
    buf = io.StringIO()
    buf.write(",".join(METRICS_COLUMNS) + "\n")
    for r in reports:
        buf.write(r.row() + "\n")
    return buf.getvalue()


def _build_cast(clips, config: TrainConfig) -> CastList:
    counts = count_speakers(clips)
    total = sum(counts.values())
    min_count = config.min_count if config.min_count is not None else scaled_min_count(total)
    return build_cast_list(counts, min_count=min_count, max_ratio=config.max_ratio)


# ---------------------------------------------------------------------------
# Training


def train(corpus: list[Clip], config: TrainConfig = TrainConfig()):
    """Joint training of the reasoning network and the naming head.

    Returns (model, MetricsReport). Name assignments feeding the semantic
    streams are refreshed from the naming head at the start of every batch.
    """
    if not corpus:
        raise EmptyInputError("corpus is empty")
    items = [(ci, qi) for ci, clip in enumerate(corpus) for qi in range(len(clip.qas))]
    if not items:
        raise EmptyInputError("corpus has no QA items")

    cast = _build_cast(corpus, config)
    vocab = build_vocab(corpus, cast)
    model_cfg = replace(config.model, epsilon=config.epsilon)
    master = np.random.SeedSequence(config.seed)
    init_rng, shuffle_rng = [np.random.default_rng(s) for s in master.spawn(2)]
    model = Model(vocab, cast, model_cfg, rng=init_rng)
    optimizer = nn.Adam(lr=config.learning_rate)

    # Static per-clip structures: broadcast targets and per-item views.
    targets = [broadcast_targets(clip, cast, config.epsilon) for clip in corpus]
    views = {}
    for ci, qi in items:
        view, _ = clip_view(corpus[ci], corpus[ci].qas[qi], config.use_ts)
        views[(ci, qi)] = view

    batch_size = min(config.batch_size, len(items))
    losses = []
    clamped = 0
    empty_ctx = 0
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(len(items))
        epoch_loss = 0.0
        for start in range(0, len(items), batch_size):
            batch = [items[int(i)] for i in order[start:start + batch_size]]
            names = {ci: model.name_assignments(corpus[ci]) for ci in sorted({b[0] for b in batch})}
            grads: dict[str, np.ndarray] = {}
            for ci, qi in batch:
                clip = corpus[ci]
                res = model.item_loss_and_grads(
                    clip, views[(ci, qi)], clip.qas[qi], config.modality,
                    names[ci], lam=config.lam, grads=grads, targets=targets[ci])
                if not math.isfinite(res.loss):
                    raise NonFiniteLossError(f"loss became non-finite on clip {clip.clip_id}")
                epoch_loss += res.loss
                clamped += res.clamped
                empty_ctx += res.empty_context
            scale = 1.0 / len(batch)
            for k in grads:
                grads[k] = grads[k] * scale
            optimizer.step(model.params, grads)
        losses.append(epoch_loss / len(items))

    report = evaluate(model, corpus, use_ts=config.use_ts, modality=config.modality,
                      seed=config.seed)
    report.variant = config.modality.label()
    report.config_hash = config.hash()
    report.losses = losses
    report.warnings = {"clamped": clamped, "empty_context": empty_ctx}
    return model, report


def evaluate(model: Model, corpus: list[Clip], use_ts: bool,
             modality: ModalityConfig = ModalityConfig(), seed: int = 0) -> MetricsReport:
    """Top-1 QA accuracy (overall and per question type) plus face naming
    accuracy against the truth sidecar. Read-only on the model."""
    if not corpus:
        raise EmptyInputError("corpus is empty")
    correct = {"all": 0, "visual": 0, "textual": 0}
    totals = {"all": 0, "visual": 0, "textual": 0}
    face_correct = 0
    face_total = 0
    for clip in corpus:
        face_names = model.name_assignments(clip)
        for qa in clip.qas:
            view, _ = clip_view(clip, qa, use_ts)
            p_a = model.score(view, qa, modality, face_names)
            hit = int(np.argmax(p_a)) == qa.correct_index
            totals["all"] += 1
            correct["all"] += hit
            tag = qa.qtype if qa.qtype in ("visual", "textual") else "textual"
            totals[tag] += 1
            correct[tag] += hit
        if clip.truth:
            preds = model.predict_faces(clip)
            n = len(preds.face_ids)
            if n:
                face_correct += round(face_accuracy(preds, clip.truth, model.cast) * n)
                face_total += n
    if totals["all"] == 0:
        raise EmptyInputError("corpus has no QA items")

    def acc(tag):
        return correct[tag] / totals[tag] if totals[tag] else 0.0

    return MetricsReport(
        variant=modality.label(), use_ts=use_ts, qa_acc=acc("all"),
        qa_acc_visual=acc("visual"), qa_acc_textual=acc("textual"),
        face_acc=face_correct / face_total if face_total else 0.0,
        seed=seed, n_items=totals["all"], n_visual=totals["visual"],
        n_textual=totals["textual"], n_faces=face_total,
    )


def ablate(corpus: list[Clip], config: TrainConfig = TrainConfig(),
           variants=VARIANT_LABELS):
    """Train each ablation variant once, evaluate w/ and w/o time stamps.

    Returns a list of MetricsReports, two per variant (use_ts True, False),
    in grid order.
    """
    reports = []
    for label in variants:
        cfg = replace(config, modality=ModalityConfig.from_label(label))
        model, _ = train(corpus, cfg)
        for use_ts in (True, False):
            r = evaluate(model, corpus, use_ts=use_ts, modality=cfg.modality,
                         seed=cfg.seed)
            r.config_hash = cfg.hash()
            reports.append(r)
    return reports


def format_report(reports) -> str:
    """Readable two-column (w/ ts, w/o ts) table over the variant rows."""
    by_variant: dict[str, dict[bool, MetricsReport]] = {}
    for r in reports:
        by_variant.setdefault(r.variant, {})[r.use_ts] = r
    width = max(len(v) for v in by_variant) + 2
    lines = [f"{'variant':<{width}} {'w/ ts':>8} {'w/o ts':>8} {'face':>8}"]
    for v, pair in by_variant.items():
        w = pair.get(True)
        wo = pair.get(False)
        face = w.face_acc if w else (wo.face_acc if wo else 0.0)
        lines.append(
            f"{v:<{width}} "
            f"{w.qa_acc if w else float('nan'):>8.4f} "
            f"{wo.qa_acc if wo else float('nan'):>8.4f} "
            f"{face:>8.4f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Gradient checks


@dataclass
class GradCheckReport:
    component: str
    tolerance: float
    worst: dict = field(default_factory=dict)  # param key -> max rel error

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.worst.values())

    def merge(self, errors: dict) -> None:
        for k, v in errors.items():
            self.worst[k] = max(self.worst.get(k, 0.0), v)

    def prefix_summary(self) -> dict:
        out: dict[str, float] = {}
        for k, v in self.worst.items():
            p = k.split(".")[0]
            out[p] = max(out.get(p, 0.0), v)
        return out

    def format(self) -> str:
        lines = [f"[{self.component}] tolerance {self.tolerance:g} "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for k in sorted(self.worst):
            mark = "ok " if self.worst[k] <= self.tolerance else "BAD"
            lines.append(f"  {mark} {k:<24} {self.worst[k]:.3e}")
        return "\n".join(lines)


def _random_distribution_instance(rng, n_faces, n_classes, epsilon):
    """Faces partitioned over frames, one smoothed target per frame."""
    embeddings = rng.standard_normal((n_faces, int(rng.integers(2, 6))))
    frame_of = rng.integers(0, max(1, n_faces // 2) + 1, size=n_faces)
    entries = []
    for fr in sorted(set(int(f) for f in frame_of)):
        cls = int(rng.integers(0, n_classes))
        g = smoothed_onehot(cls, n_classes, epsilon)
        for i in np.flatnonzero(frame_of == fr):
            entries.append((int(i), fr, g))
    from .naming import TargetSeq
    return embeddings, TargetSeq(tuple(entries), epsilon)


def check_naming(rng, tolerance: float = 1e-4):
    """One random config: rkl(softmax head) vs finite differences."""
    n_classes = int(rng.integers(2, 8))
    epsilon = float(rng.choice([0.01, 0.05, 0.2]))
    n_faces = int(rng.integers(1, 7))
    embeddings, targets = _random_distribution_instance(rng, n_faces, n_classes, epsilon)
    d_f = embeddings.shape[1]
    head = NamingParams.init(rng, d_f, int(rng.integers(2, 6)), n_classes)
    params = {"w1": head.w1, "b1": head.b1, "w2": head.w2, "b2": head.b2}

    def loss():
        rows, _ = naming_forward(head, embeddings)
        preds = NameDistributionSeq(tuple(range(n_faces)), rows)
        return rkl_loss_with_grad(preds, targets)[0]

    rows, cache = naming_forward(head, embeddings)
    preds = NameDistributionSeq(tuple(range(n_faces)), rows)
    _, drows = rkl_loss_with_grad(preds, targets)
    analytic = naming_backward(head, cache, drows)
    return nn.check_gradients(loss, params, analytic)


def check_encoder(rng, tolerance: float = 1e-4):
    """One random config: scalar probe of the self-attention stack."""
    heads = int(rng.choice([1, 2, 4]))
    d_model = 8
    d_ff = int(rng.integers(4, 13))
    n = int(rng.integers(2, 7))
    params: dict[str, np.ndarray] = {}
    nn.init_stack(rng, params, "enc", 2, d_model, d_ff, heads)
    x = rng.standard_normal((n, d_model))
    probe = rng.standard_normal((n, d_model))

    def loss():
        y, _ = nn.stack_forward(params, "enc", 2, x)
        return float(np.sum(y * probe))

    _, cache = nn.stack_forward(params, "enc", 2, x)
    grads: dict[str, np.ndarray] = {}
    nn.stack_backward(params, "enc", cache, probe, grads)
    return nn.check_gradients(loss, params, grads)


def check_coattention(rng, tolerance: float = 1e-4):
    """One random config: scalar probe of the cross-attention stack."""
    heads = int(rng.choice([1, 2, 4]))
    d_model = 8
    d_ff = int(rng.integers(4, 13))
    n_q = int(rng.integers(2, 6))
    n_c = int(rng.integers(2, 6))
    params: dict[str, np.ndarray] = {}
    nn.init_stack(rng, params, "dec", 2, d_model, d_ff, heads)
    x = rng.standard_normal((n_q, d_model))
    context = rng.standard_normal((n_c, d_model))
    probe = rng.standard_normal((n_q, d_model))

    def loss():
        y, _ = nn.stack_forward(params, "dec", 2, x, context)
        return float(np.sum(y * probe))

    _, cache = nn.stack_forward(params, "dec", 2, x, context)
    grads: dict[str, np.ndarray] = {}
    nn.stack_backward(params, "dec", cache, probe, grads)
    return nn.check_gradients(loss, params, grads)


def _mini_setup(rng):
    """Hand-built one-frame clip with tiny sequences for full-model checks."""
    from .castlist import CastList
    from .corpus import (BBox, Clip, FaceDetection, Frame, QAItem, RelationTriple,
                         SubtitleLine)
    from .carn import Vocab

    d_f = 6
    emb = rng.standard_normal(d_f)
    emb /= np.linalg.norm(emb)
    face = FaceDetection(0, 0, BBox(10, 10, 20, 20), emb)
    human = BBox(5, 5, 30, 60)
    frame = Frame(0, 0.0, [face], [(human, "man")],
                  [("cup", None)], [RelationTriple("man", "holds", "cup", human)])
    line = SubtitleLine("Ada", ["so", "story"], 0.0, 0.9)
    # "holdz" stays out of the word table: the char-mean OOV path must carry
    # gradient too, or the full-model check would skip embed.char entirely.
    qa = QAItem(["who", "holdz", "cup"],
                [["Ada"], ["Ben"], ["cup"], ["so"], ["story"]], 0, (0.0, 0.9))
    clip = Clip("mini", [frame], [line], [qa], {0: "Ada"})
    cast = CastList(("Ada", "Ben"), (10, 5))
    vocab = Vocab(("cup", "holds", "man", "so", "story", "who"),
                  cast.label_names(),
                  tuple(sorted(set("cupholdsmanstorywhoAdaBenUNKNAMEz"))))
    cfg = ModelConfig(d_model=8, d_ff=10, d_h1=5, heads=4, d_f=d_f,
                      epsilon=float(rng.choice([0.01, 0.05, 0.2])))
    model = Model(vocab, cast, cfg, rng=rng)
    return model, clip, qa


def check_full(rng, tolerance: float = 1e-4, max_entries_per_tensor: int = 2):
    """One random config: joint CE + lambda*RKL on a tiny handmade item."""
    model, clip, qa = _mini_setup(rng)
    lam = float(rng.choice([0.5, 1.0, 2.0]))
    face_names = model.name_assignments(clip)
    targets = broadcast_targets(clip, model.cast, model.config.epsilon)
    modality = ModalityConfig()

    def loss():
        return model.item_loss_and_grads(clip, clip, qa, modality, face_names,
                                         lam=lam, targets=targets).loss

    grads: dict[str, np.ndarray] = {}
    model.item_loss_and_grads(clip, clip, qa, modality, face_names,
                              lam=lam, grads=grads, targets=targets)
    return nn.check_gradients(loss, model.params, grads, keys=sorted(model.params),
                              max_entries_per_tensor=max_entries_per_tensor, rng=rng)


GRAD_CHECKS = {
    "naming": check_naming,
    "encoder": check_encoder,
    "coattention": check_coattention,
    "full": check_full,
}


def grad_check(component: str = "all", tolerance: float = 1e-4,
               n_configs: int = 10, seed: int = 0):
    """Run the finite-difference suites; failures are report entries, not
    exceptions. Returns a list of GradCheckReports."""
    names = list(GRAD_CHECKS) if component == "all" else [component]
    reports = []
    for name in names:
        fn = GRAD_CHECKS[name]
        rep = GradCheckReport(name, tolerance)
        spawn = sorted(GRAD_CHECKS).index(name)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(spawn,)))
        for _ in range(n_configs):
            rep.merge(fn(rng, tolerance))
        reports.append(rep)
    return reports


__all__ = [
    "METRICS_COLUMNS", "TrainConfig", "MetricsReport", "write_metrics_csv",
    "metrics_csv_text", "train", "evaluate", "ablate", "format_report",
    "GradCheckReport", "check_naming", "check_encoder", "check_coattention",
    "check_full", "grad_check", "GRAD_CHECKS",
]
