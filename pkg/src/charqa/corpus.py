"""Clip data model, synthetic corpus generator, and JSON Lines persistence.

A clip bundles per-frame detections (faces with embeddings, human boxes,
objects, relation triples), subtitle lines, and multiple-choice QA items.
The generator produces clips with a known face->character truth sidecar so
that weak-supervision experiments can be scored exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CorpusParseError, SchemaVersionError

SCHEMA_VERSION = "carn-corpus-1"

DEFAULT_HUMAN_WORDS = ("man", "woman", "person", "boy", "girl", "guy", "lady", "people")

# Small on purpose: with few distinct objects the candidate sets of different
# visual questions collide, so answer-set lookup cannot beat reading the scene.
DEFAULT_OBJECT_VOCAB = (
    "bottle", "flower", "book", "glass", "plate",
    "phone", "mug", "pen", "bag", "box",
)

DEFAULT_PREDICATE_VOCAB = ("hold", "carry", "lift")

DEFAULT_SPATIAL_PREDICATES = ("on", "under", "near", "beside")

DEFAULT_ATTRIBUTE_VOCAB = ("red", "blue", "green", "small", "big", "old")

# Sized to frames_per_clip on purpose: every clip says the same few words in
# a different order, so dialogue carries no per-clip fingerprint a
# subtitles-only model could memorize visual answers from.
DEFAULT_DIALOGUE_VOCAB = ("okay", "really", "listen", "tomorrow", "party", "meeting")

PRINCIPAL_NAME_POOL = (
    "Ada", "Ben", "Cleo", "Dev", "Esme", "Finn", "Gia", "Hugo",
    "Iris", "Jude", "Kira", "Liam", "Mona", "Nils", "Opal", "Pax",
)

# Name-shaped fillers for QA distractors when the cast is tiny.
FILLER_NAME_POOL = ("Quinn", "Rory", "Sage", "Tess", "Uma", "Vik")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates {vals}")
        if min(vals) < 0:
            raise ValueError(f"negative box coordinates {vals}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"box has no positive area {vals}")

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def intersection_area(self, other: "BBox") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        if w <= 0 or h <= 0:
            return 0.0
        return w * h


@dataclass(eq=False)
class FaceDetection:
    face_id: int
    frame_id: int
    box: BBox
    embedding: np.ndarray  # unit-norm, shape (d_f,)

    def __eq__(self, other):
        if not isinstance(other, FaceDetection):
            return NotImplemented
        return (
            self.face_id == other.face_id
            and self.frame_id == other.frame_id
            and self.box == other.box
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True)
class RelationTriple:
    subject: str
    predicate: str
    object: str
    subject_box: BBox | None = None
    object_box: BBox | None = None

    def __post_init__(self):
        if not (self.subject and self.predicate and self.object):
            raise ValueError("triple tokens must be non-empty")

    @property
    def tokens(self):
        return (self.subject, self.predicate, self.object)


@dataclass
class Frame:
    frame_id: int
    time: float
    faces: list[FaceDetection] = field(default_factory=list)
    human_boxes: list[tuple[BBox, str]] = field(default_factory=list)
    objects: list[tuple[str, str | None]] = field(default_factory=list)
    triples: list[RelationTriple] = field(default_factory=list)


@dataclass
class SubtitleLine:
    speaker: str
    tokens: list[str]
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise ValueError(f"subtitle interval reversed ({self.t_start}, {self.t_end})")
        if not self.speaker:
            raise ValueError("speaker must be non-empty")


@dataclass
class QAItem:
    question: list[str]
    answers: list[list[str]]  # exactly 5 candidates
    correct_index: int
    ts_interval: tuple[float, float]
    qtype: str = "textual"  # "visual" | "textual"

    def __post_init__(self):
        if len(self.answers) != 5:
            raise ValueError(f"expected 5 answers, got {len(self.answers)}")
        if not 0 <= self.correct_index < 5:
            raise ValueError(f"correct_index {self.correct_index} out of range")
        if self.ts_interval[0] > self.ts_interval[1]:
            raise ValueError(f"ts_interval reversed {self.ts_interval}")


@dataclass
class Clip:
    clip_id: str
    frames: list[Frame]
    subtitles: list[SubtitleLine]
    qas: list[QAItem]
    truth: dict[int, str] | None = None  # face_id -> character name, eval only

    def duration(self) -> float:
        t = 0.0
        if self.frames:
            t = max(t, max(f.time for f in self.frames))
        if self.subtitles:
            t = max(t, max(s.t_end for s in self.subtitles))
        return t

    def all_faces(self):
        for f in self.frames:
            yield from f.faces


@dataclass
class GenConfig:
    k_principals: int = 4
    n_extras: int = 2
    n_clips: int = 20
    frames_per_clip: int = 6
    d_f: int = 256
    noise_sigma: float = 0.1
    cooccur_rho: float = 0.9
    fps: float = 1.0
    object_vocab: tuple[str, ...] = DEFAULT_OBJECT_VOCAB
    predicate_vocab: tuple[str, ...] = DEFAULT_PREDICATE_VOCAB
    spatial_predicates: tuple[str, ...] = DEFAULT_SPATIAL_PREDICATES
    attribute_vocab: tuple[str, ...] = DEFAULT_ATTRIBUTE_VOCAB
    dialogue_vocab: tuple[str, ...] = DEFAULT_DIALOGUE_VOCAB
    human_words: tuple[str, ...] = DEFAULT_HUMAN_WORDS
    qa_templates: tuple[str, ...] = ("visual", "visual", "textual_who", "textual_who")
    bystander_rate: float = 0.5
    extra_face_rate: float = 0.08
    speaker_unk_rate: float = 0.01
    obj_support_frac: float = 0.5
    object_noise_rate: float = 0.25
    attribute_rate: float = 0.7
    seed: int = 0

    def validate(self):
        if self.k_principals < 1:
            raise ConfigError("k_principals must be >= 1")
        if self.n_extras < 0:
            raise ConfigError("n_extras must be >= 0")
        if self.n_clips < 1:
            raise ConfigError("n_clips must be >= 1")
        if self.frames_per_clip < 1:
            raise ConfigError("frames_per_clip must be >= 1")
        if self.d_f < 1:
            raise ConfigError("d_f must be >= 1")
        if not (self.noise_sigma >= 0 and math.isfinite(self.noise_sigma)):
            raise ConfigError("noise_sigma must be a finite value >= 0")
        if not 0.0 <= self.cooccur_rho <= 1.0:
            raise ConfigError("cooccur_rho must lie in [0, 1]")
        if self.fps <= 0:
            raise ConfigError("fps must be > 0")
        if not 0.0 <= self.obj_support_frac <= 1.0:
            raise ConfigError("obj_support_frac must lie in [0, 1]")
        if not 0.0 <= self.object_noise_rate <= 1.0:
            raise ConfigError("object_noise_rate must lie in [0, 1]")
        if not self.object_vocab:
            raise ConfigError("object_vocab must be non-empty")
        if not self.predicate_vocab:
            raise ConfigError("predicate_vocab must be non-empty")
        if len(self.dialogue_vocab) < self.frames_per_clip:
            raise ConfigError("dialogue_vocab too small for frames_per_clip")
        for t in self.qa_templates:
            if t not in ("visual", "textual_who"):
                raise ConfigError(f"qa_templates contains unknown template {t!r}")

    def principal_names(self):
        pool = list(PRINCIPAL_NAME_POOL)
        while len(pool) < self.k_principals:
            pool.append(f"Char{len(pool) + 1}")
        return pool[: self.k_principals]

    def extra_names(self):
        return [f"Guest{i + 1}" for i in range(self.n_extras)]


# ---------------------------------------------------------------------------
# Generation


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        v = np.ones_like(v)
        n = np.linalg.norm(v)
    return v / n


def _sample_face_embedding(rng, proto, sigma):
    return _unit(proto + sigma * rng.standard_normal(proto.shape))


# Frame canvas and face slot geometry: four disjoint slots so that human
# boxes drawn around a face never swallow a neighbour's face.
_CANVAS_W, _CANVAS_H = 640.0, 360.0
_SLOT_W = _CANVAS_W / 4.0


def _face_box(rng, slot):
    side = rng.uniform(40.0, 56.0)
    x0 = slot * _SLOT_W + rng.uniform(4.0, _SLOT_W - side - 4.0)
    y0 = rng.uniform(60.0, 160.0)
    return BBox(x0, y0, x0 + side, y0 + side)


def _human_box(rng, face: BBox):
    # Person box containing the face, clipped to the slot margins.
    x0 = max(0.0, face.x0 - rng.uniform(8.0, 18.0))
    x1 = min(_CANVAS_W, face.x1 + rng.uniform(8.0, 18.0))
    y0 = max(0.0, face.y0 - rng.uniform(4.0, 10.0))
    y1 = min(_CANVAS_H, face.y1 + rng.uniform(90.0, 150.0))
    return BBox(x0, y0, x1, y1)


def _object_box(rng):
    w = rng.uniform(20.0, 60.0)
    h = rng.uniform(20.0, 60.0)
    x0 = rng.uniform(0.0, _CANVAS_W - w)
    y0 = rng.uniform(0.0, _CANVAS_H - h)
    return BBox(x0, y0, x0 + w, y0 + h)


def _gen_clip(cfg: GenConfig, clip_idx: int, protos: dict[str, np.ndarray]) -> Clip:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1, clip_idx)))
    principals = cfg.principal_names()
    extras = cfg.extra_names()
    n_frames = cfg.frames_per_clip
    dt = 1.0 / cfg.fps

    # Two clip actors carry the interaction event; with k=1 there is one.
    n_actors = min(2, len(principals))
    actors = [str(a) for a in rng.choice(principals, size=n_actors, replace=False)]
    event_pred = str(rng.choice(list(cfg.predicate_vocab)))
    actor_objects = {
        a: str(o)
        for a, o in zip(actors, rng.choice(list(cfg.object_vocab), size=n_actors, replace=False))
    }
    obj_supported = {a: bool(rng.random() < cfg.obj_support_frac) for a in actors}

    # One single-topic subtitle line per frame; actors split the timeline in
    # blocks.  One token per line keeps the window of any question down to a
    # handful of heavily reused words, so dialogue alone cannot fingerprint
    # a clip.
    topics = [str(t) for t in rng.choice(list(cfg.dialogue_vocab), size=n_frames, replace=False)]
    scene = [actors[0] if i < (n_frames + 1) // 2 else actors[-1] for i in range(n_frames)]
    speakers = []
    for i in range(n_frames):
        s = scene[i]
        r = rng.random()
        if extras and r < cfg.speaker_unk_rate:
            s = str(rng.choice(extras))
        elif r < cfg.speaker_unk_rate + 0.15 and len(principals) > n_actors:
            s = str(rng.choice([p for p in principals if p not in actors]))
        speakers.append(s)

    subtitles = []
    for i, (s, topic) in enumerate(zip(speakers, topics)):
        subtitles.append(SubtitleLine(s, [topic], i * dt, (i + 0.9) * dt))

    # Face presence per frame: the speaker with probability rho, up to two
    # bystander principals, at most one extra.  Slots keep boxes disjoint.
    face_plan = []  # per frame: list of names
    for i in range(n_frames):
        present = []
        if speakers[i] in principals and rng.random() < cfg.cooccur_rho:
            present.append(speakers[i])
        others = [p for p in principals if p not in present]
        n_by = int(rng.choice([0, 1, 2], p=[1 - cfg.bystander_rate, cfg.bystander_rate * 0.7, cfg.bystander_rate * 0.3]))
        n_by = min(n_by, len(others), 3 - len(present))
        if n_by > 0:
            present.extend(str(x) for x in rng.choice(others, size=n_by, replace=False))
        if extras and len(present) < 4 and rng.random() < cfg.extra_face_rate:
            present.append(str(rng.choice(extras)))
        face_plan.append(present)

    # Guarantee each actor's face shows up inside their own scene block
    # (preferably while speaking), otherwise the clip would hold no event
    # triple for them and their visual question would have no evidence.
    for a in actors:
        block = [i for i in range(n_frames) if scene[i] == a]
        if any(a in face_plan[i] for i in block):
            continue
        speaking = [i for i in block if speakers[i] == a]
        i = int(rng.choice(speaking if speaking else block))
        if len(face_plan[i]) >= 4:
            face_plan[i] = face_plan[i][:3]
        face_plan[i].append(a)

    # Background vocab is split per clip: plain_pool feeds the plain object
    # detections, rel_pool feeds non-event triples (and the occasional
    # detector confusion controlled by object_noise_rate).  Distractors are
    # drawn from the rel side, so the plain-object stream correlates with
    # the answer without pinning it down.
    reserved = set(actor_objects.values())
    bg_objects = [o for o in cfg.object_vocab if o not in reserved]
    bg_perm = [bg_objects[i] for i in rng.permutation(len(bg_objects))]
    plain_pool = bg_perm[: len(bg_perm) // 2]
    rel_pool = bg_perm[len(bg_perm) // 2 :]
    if len(rel_pool) < 4 or not plain_pool:
        raise ConfigError("object_vocab too small for distinct distractor/detection pools")

    frames = []
    next_face_id = 0
    truth: dict[int, str] = {}
    actor_triple_frames: dict[str, list[int]] = {a: [] for a in actors}
    for i in range(n_frames):
        slots = list(rng.permutation(4))
        faces = []
        name_by_face = {}
        for name in face_plan[i]:
            box = _face_box(rng, int(slots.pop()))
            emb = _sample_face_embedding(rng, protos[name], cfg.noise_sigma)
            fd = FaceDetection(next_face_id, i, box, emb)
            faces.append(fd)
            truth[next_face_id] = name
            name_by_face[next_face_id] = name
            next_face_id += 1

        human_boxes = []
        triples = []
        objects = []
        for fd in faces:
            name = name_by_face[fd.face_id]
            if name in actors and scene[i] == name:
                # The interaction is detected during the actor's own scene;
                # a bystander glimpse in the other half does not drag their
                # handled object into frame.
                hb = _human_box(rng, fd.box)
                human_boxes.append((hb, str(rng.choice(list(cfg.human_words)))))
                obj = actor_objects[name]
                triples.append(RelationTriple(human_boxes[-1][1], event_pred, obj,
                                              subject_box=hb, object_box=_object_box(rng)))
                actor_triple_frames[name].append(i)
                # The detector co-fires on the handled object at most once
                # per clip; repeated detections would hand the Objs-only
                # variant a frequency cue the relation stream is meant to own.
                if obj_supported[name]:
                    objects.append((obj, None))
                    obj_supported[name] = False
            elif name in principals and rng.random() < 0.15:
                hb = _human_box(rng, fd.box)
                human_boxes.append((hb, str(rng.choice(list(cfg.human_words)))))
                triples.append(RelationTriple(human_boxes[-1][1], str(rng.choice(list(cfg.spatial_predicates))),
                                              str(rng.choice(rel_pool)), subject_box=hb))

        # Background scene: plain object detections plus object-object
        # spatial triples.  A detector confusion (object_noise_rate) draws
        # the detection from the relation pool instead, so plain-detection
        # presence alone cannot cleanly separate candidates.
        for _ in range(int(rng.integers(1, 3))):
            pool = rel_pool if rng.random() < cfg.object_noise_rate else plain_pool
            label = str(rng.choice(pool))
            attr = str(rng.choice(list(cfg.attribute_vocab))) if rng.random() < cfg.attribute_rate else None
            objects.append((label, attr))
        if rng.random() < 0.15:
            a_o, b_o = rng.choice(rel_pool, size=2, replace=False)
            triples.append(RelationTriple(str(a_o), str(rng.choice(list(cfg.spatial_predicates))), str(b_o)))

        frames.append(Frame(i, i * dt, faces, human_boxes, objects, triples))

    # Visual distractors come from other (non-event) triples in the clip;
    # pad with extra background triples until four distinct ones exist.
    rel_set = set(rel_pool)
    vis_pool = sorted({t.object for f in frames for t in f.triples} & rel_set)
    unused = [o for o in rel_pool if o not in vis_pool]
    while len(vis_pool) < 4:
        o = unused.pop(0)
        f = frames[int(rng.integers(0, n_frames))]
        f.triples.append(RelationTriple(str(rng.choice(plain_pool)),
                                        str(rng.choice(list(cfg.spatial_predicates))), o))
        vis_pool = sorted(set(vis_pool) | {o})

    duration = (n_frames - 1) * dt + 0.9 * dt
    all_names = principals + extras + list(FILLER_NAME_POOL)
    textual_lines = [i for i, s in enumerate(speakers) if s in principals] or [0]
    rng.shuffle(textual_lines)

    def _five(correct_tokens, distractor_tokens):
        answers = [correct_tokens] + [[d] for d in distractor_tokens]
        order = rng.permutation(5)
        correct_index = int(np.argwhere(order == 0)[0, 0])
        return [answers[j] for j in order], correct_index

    qas = []
    vis_i = tex_i = 0
    for tmpl in cfg.qa_templates:
        if tmpl == "visual":
            actor = actors[vis_i % len(actors)]
            vis_i += 1
            distractors = [str(x) for x in rng.choice(vis_pool, size=4, replace=False)]
            answers, correct_index = _five([actor_objects[actor]], distractors)
            span = actor_triple_frames[actor]
            t0 = max(0.0, min(span) * dt - 0.5 * dt)
            t1 = min(duration, (max(span) + 0.95) * dt)
            qas.append(QAItem(["what", "does", actor, event_pred], answers, correct_index,
                              (t0, t1), qtype="visual"))
        else:  # textual_who
            line_i = textual_lines[tex_i % len(textual_lines)]
            tex_i += 1
            line = subtitles[line_i]
            distractors = [str(x) for x in rng.choice([n for n in all_names if n != line.speaker],
                                                      size=4, replace=False)]
            answers, correct_index = _five([line.speaker], distractors)
            t0 = max(0.0, line.t_start - 0.5 * dt)
            t1 = min(duration, line.t_end + 0.5 * dt)
            qas.append(QAItem(["who", "says", topics[line_i]], answers, correct_index,
                              (t0, t1), qtype="textual"))

    return Clip(f"clip{clip_idx:05d}", frames, subtitles, qas, truth)


def generate_corpus(cfg: GenConfig) -> list[Clip]:
    """Generate a deterministic synthetic corpus from the config (seed included).

    Each character owns a latent unit-norm prototype; every face observation is
    normalize(prototype + noise_sigma * gaussian).  A speaking character's face
    appears in temporally overlapping frames with probability cooccur_rho.
    """
    cfg.validate()
    proto_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    protos = {}
    for name in cfg.principal_names() + cfg.extra_names():
        protos[name] = _unit(proto_rng.standard_normal(cfg.d_f))
    return [_gen_clip(cfg, i, protos) for i in range(cfg.n_clips)]


# ---------------------------------------------------------------------------
# Serialization (JSON Lines, one clip per line)


def _box_to_list(b: BBox | None):
    return None if b is None else [b.x0, b.y0, b.x1, b.y1]


def _box_from_list(v):
    return None if v is None else BBox(*v)


def clip_to_dict(clip: Clip) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "clip_id": clip.clip_id,
        "frames": [
            {
                "frame_id": f.frame_id,
                "time": f.time,
                "faces": [
                    {
                        "face_id": fc.face_id,
                        "frame_id": fc.frame_id,
                        "box": _box_to_list(fc.box),
                        "embedding": [float(x) for x in fc.embedding],
                    }
                    for fc in f.faces
                ],
                "human_boxes": [{"box": _box_to_list(b), "word": w} for b, w in f.human_boxes],
                "objects": [{"label": label, "attribute": attr} for label, attr in f.objects],
                "triples": [
                    {
                        "subject": t.subject,
                        "predicate": t.predicate,
                        "object": t.object,
                        "subject_box": _box_to_list(t.subject_box),
                        "object_box": _box_to_list(t.object_box),
                    }
                    for t in f.triples
                ],
            }
            for f in clip.frames
        ],
        "subtitles": [
            {"speaker": s.speaker, "tokens": s.tokens, "t_start": s.t_start, "t_end": s.t_end}
            for s in clip.subtitles
        ],
        "qas": [
            {
                "question": q.question,
                "answers": q.answers,
                "correct_index": q.correct_index,
                "ts_interval": [q.ts_interval[0], q.ts_interval[1]],
                "qtype": q.qtype,
            }
            for q in clip.qas
        ],
        "truth": None if clip.truth is None else {str(k): v for k, v in clip.truth.items()},
    }


def clip_from_dict(d: dict) -> Clip:
    frames = [
        Frame(
            f["frame_id"],
            f["time"],
            [
                FaceDetection(fc["face_id"], fc["frame_id"], _box_from_list(fc["box"]),
                              np.asarray(fc["embedding"], dtype=np.float64))
                for fc in f["faces"]
            ],
            [(_box_from_list(h["box"]), h["word"]) for h in f["human_boxes"]],
            [(o["label"], o["attribute"]) for o in f["objects"]],
            [
                RelationTriple(t["subject"], t["predicate"], t["object"],
                               _box_from_list(t["subject_box"]), _box_from_list(t["object_box"]))
                for t in f["triples"]
            ],
        )
        for f in d["frames"]
    ]
    subtitles = [SubtitleLine(s["speaker"], list(s["tokens"]), s["t_start"], s["t_end"]) for s in d["subtitles"]]
    qas = [
        QAItem(list(q["question"]), [list(a) for a in q["answers"]], q["correct_index"],
               (q["ts_interval"][0], q["ts_interval"][1]), q.get("qtype", "textual"))
        for q in d["qas"]
    ]
    truth = d["truth"]
    if truth is not None:
        truth = {int(k): v for k, v in truth.items()}
    return Clip(d["clip_id"], frames, subtitles, qas, truth)


def write_corpus(clips: list[Clip], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clip in clips:
            fh.write(json.dumps(clip_to_dict(clip), separators=(",", ":")))
            fh.write("\n")


def read_corpus(path) -> list[Clip]:
    clips = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusParseError(line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(d, dict) or "schema_version" not in d:
                raise CorpusParseError(line_no, "missing schema_version")
            if d["schema_version"] != SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"line {line_no}: unsupported schema_version {d['schema_version']!r}"
                    f" (expected {SCHEMA_VERSION!r})"
                )
            try:
                clips.append(clip_from_dict(d))
            except (KeyError, TypeError, ValueError) as e:
                raise CorpusParseError(line_no, f"bad clip record: {e}") from e
    return clips


# ---------------------------------------------------------------------------
# Per-question views


def clip_view(clip: Clip, qa: QAItem, use_ts: bool) -> tuple[Clip, bool]:
    """Restrict a clip to the QA item's time-stamp interval.

    With use_ts the view keeps only frames whose time lies inside the interval
    and subtitle lines whose span intersects it; without, the clip is returned
    unchanged.  Returns (view, warned) where warned flags a time-stamped view
    that came back with no frames and no subtitles.
    """
    if not use_ts:
        return clip, False
    t0, t1 = qa.ts_interval
    frames = [f for f in clip.frames if t0 <= f.time <= t1]
    subs = [s for s in clip.subtitles if s.t_start <= t1 and s.t_end >= t0]
    warned = not frames and not subs
    view = Clip(clip.clip_id, frames, subs, [qa], clip.truth)
    return view, warned


def validate_clip(clip: Clip) -> None:
    """Check cross-field invariants the dataclasses cannot see locally."""
    ids = [f.frame_id for f in clip.frames]
    if ids != sorted(ids) or len(set(ids)) != len(ids):
        raise ValueError(f"{clip.clip_id}: frame_ids not strictly increasing")
    face_ids = [fc.face_id for fc in clip.all_faces()]
    if len(set(face_ids)) != len(face_ids):
        raise ValueError(f"{clip.clip_id}: duplicate face_ids")
    for f in clip.frames:
        for fc in f.faces:
            if fc.frame_id != f.frame_id:
                raise ValueError(f"{clip.clip_id}: face {fc.face_id} frame_id mismatch")
            n = np.linalg.norm(fc.embedding)
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"{clip.clip_id}: face {fc.face_id} embedding norm {n}")
    if clip.truth is not None:
        if set(clip.truth) != set(face_ids):
            raise ValueError(f"{clip.clip_id}: truth keys do not cover faces exactly")
    dur = clip.duration()
    for q in clip.qas:
        if not (0.0 <= q.ts_interval[0] and q.ts_interval[1] <= dur + 1e-9):
            raise ValueError(f"{clip.clip_id}: ts_interval {q.ts_interval} outside duration {dur}")


def subset_of(view: Clip, clip: Clip) -> bool:
    """True when every frame/subtitle of the view is taken from the clip."""
    frame_ids = {f.frame_id for f in clip.frames}
    sub_keys = {(s.speaker, tuple(s.tokens), s.t_start, s.t_end) for s in clip.subtitles}
    return all(f.frame_id in frame_ids for f in view.frames) and all(
        (s.speaker, tuple(s.tokens), s.t_start, s.t_end) in sub_keys for s in view.subtitles
    )


__all__ = [
    "SCHEMA_VERSION", "BBox", "FaceDetection", "RelationTriple", "Frame",
    "SubtitleLine", "QAItem", "Clip", "GenConfig", "generate_corpus",
    "write_corpus", "read_corpus", "clip_to_dict", "clip_from_dict",
    "clip_view", "validate_clip", "subset_of",
    "DEFAULT_HUMAN_WORDS",
]
