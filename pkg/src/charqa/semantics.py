"""Per-frame visual semantics: face-to-human matching, character name
injection into relation triples, name-augmented object streams, and the
flattening of everything into aligned (token, name_flag) sequences.

Matching normalizes overlap by face area rather than IoU: faces are small
relative to person boxes, so IoU would be near zero even for a correct
containment. The argmax under any monotone normalization is what matters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import BBox, FaceDetection, Frame, RelationTriple

UNMATCHED = None


@dataclass(frozen=True)
class FaceHumanAssignment:
    """For each human box (by index) the face_id it matched, or UNMATCHED."""

    human_boxes: tuple[BBox, ...]
    matches: tuple[int | None, ...]

    def __post_init__(self):
        if len(self.human_boxes) != len(self.matches):
            raise ValueError("matches must align with human_boxes")

    def face_for_box(self, box: BBox) -> int | None:
        """Resolve a triple endpoint box to its matched face.

        Exact coordinate equality wins; otherwise the human box with the
        largest positive intersection (ties to the lowest index).
        """
        best = UNMATCHED
        best_area = 0.0
        for hb, face_id in zip(self.human_boxes, self.matches):
            if hb == box:
                return face_id
            a = hb.intersection_area(box)
            if a > best_area:
                best_area = a
                best = face_id
        return best


def overlap_score(face: BBox, human: BBox) -> float:
    """area(face ∩ human) / area(face), in [0, 1]."""
    return face.intersection_area(human) / face.area


def match_faces_to_humans(faces: list[FaceDetection], human_boxes: list[BBox]) -> FaceHumanAssignment:
    """Per human box, the face with maximal overlap score; 0 -> UNMATCHED.

    Ties go to the lowest face_id (faces are scanned in face_id order and
    only a strictly better score displaces the incumbent).
    """
    ordered = sorted(faces, key=lambda f: f.face_id)
    matches = []
    for hb in human_boxes:
        best = UNMATCHED
        best_score = 0.0
        for fc in ordered:
            s = overlap_score(fc.box, hb)
            if s > best_score:
                best_score = s
                best = fc.face_id
        matches.append(best)
    return FaceHumanAssignment(tuple(human_boxes), tuple(matches))


def replace_names(triples: list[RelationTriple],
                  assignment: FaceHumanAssignment,
                  face_names: dict[int, str],
                  human_words) -> list[RelationTriple]:
    """Rewrite human-referring triple endpoints to predicted character names.

    An endpoint changes only when its token is in human_words, its box
    resolves through the assignment to a face, and that face has a name in
    face_names. Everything else (predicates, counts, boxes) is preserved,
    so the operation is idempotent once no human words remain.
    """
    human_words = set(human_words)

    def resolve(token: str, box: BBox | None) -> str:
        if token not in human_words or box is None:
            return token
        face_id = assignment.face_for_box(box)
        if face_id is UNMATCHED:
            return token
        return face_names.get(face_id, token)

    out = []
    for t in triples:
        s = resolve(t.subject, t.subject_box)
        o = resolve(t.object, t.object_box)
        if s == t.subject and o == t.object:
            out.append(t)
        else:
            out.append(RelationTriple(s, t.predicate, o, t.subject_box, t.object_box))
    return out


def frame_names(frame: Frame, face_names: dict[int, str]) -> list[str]:
    """Names detected in the frame, face_id order, first occurrence kept."""
    seen = []
    for fc in sorted(frame.faces, key=lambda f: f.face_id):
        name = face_names.get(fc.face_id)
        if name is not None and name not in seen:
            seen.append(name)
    return seen


def object_tokens(objects) -> list[tuple[str, bool]]:
    """Plain object stream: optional attribute token then the label token."""
    toks = []
    for label, attr in objects:
        if attr is not None:
            toks.append((attr, False))
        toks.append((label, False))
    return toks


def augment_objects_with_names(objects, names: list[str]) -> list[tuple[str, bool]]:
    """Cross product of frame objects with frame names.

    Each (object, name) pair emits the object tokens immediately followed
    by the name token; with no names the objects pass through unchanged.
    """
    if not names:
        return object_tokens(objects)
    toks = []
    for label, attr in objects:
        for name in names:
            if attr is not None:
                toks.append((attr, False))
            toks.append((label, False))
            toks.append((name, True))
    return toks


def flatten_relations(frames: list[Frame]) -> list[str]:
    """Concatenate triples as S P O token runs, detection order within each
    frame, frames ascending by frame_id; boxes are discarded."""
    toks = []
    for frame in sorted(frames, key=lambda f: f.frame_id):
        for t in frame.triples:
            toks.extend(t.tokens)
    return toks


@dataclass(frozen=True)
class SemanticStream:
    object_tokens: tuple[str, ...]
    object_flags: tuple[bool, ...]
    relation_tokens: tuple[str, ...]
    relation_flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.object_tokens) != len(self.object_flags):
            raise ValueError("object flags must align with tokens")
        if len(self.relation_tokens) != len(self.relation_flags):
            raise ValueError("relation flags must align with tokens")
        if len(self.relation_tokens) % 3 != 0:
            raise ValueError("relation tokens must come in S,P,O runs")

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.object_tokens + self.relation_tokens

    @property
    def name_flags(self) -> tuple[bool, ...]:
        return self.object_flags + self.relation_flags


def build_semantic_stream(frames: list[Frame],
                          face_names: dict[int, str],
                          human_words,
                          use_objs: bool,
                          use_rels: bool,
                          objs_names: bool,
                          rels_names: bool,
                          name_set=frozenset()) -> SemanticStream:
    """Assemble the visual token stream for a set of frames.

    The full objects stream precedes the full relations stream; within each,
    frames run in temporal order. face_names holds the current (predicted or
    oracle) face labels; name_set marks which relation tokens count as names
    after replacement (cast membership).
    """
    obj_toks: list[tuple[str, bool]] = []
    rel_toks: list[str] = []
    ordered = sorted(frames, key=lambda f: f.frame_id)
    for frame in ordered:
        if use_objs:
            if objs_names:
                obj_toks.extend(augment_objects_with_names(frame.objects, frame_names(frame, face_names)))
            else:
                obj_toks.extend(object_tokens(frame.objects))
    if use_rels:
        if rels_names:
            named_frames = []
            for frame in ordered:
                assignment = match_faces_to_humans(frame.faces, [b for b, _ in frame.human_boxes])
                triples = replace_names(frame.triples, assignment, face_names, human_words)
                named_frames.append(Frame(frame.frame_id, frame.time, frame.faces,
                                          frame.human_boxes, frame.objects, triples))
            rel_toks = flatten_relations(named_frames)
        else:
            rel_toks = flatten_relations(ordered)
    names = set(name_set)
    return SemanticStream(
        tuple(t for t, _ in obj_toks),
        tuple(f for _, f in obj_toks),
        tuple(rel_toks),
        tuple(t in names for t in rel_toks),
    )


__all__ = [
    "UNMATCHED", "FaceHumanAssignment", "overlap_score", "match_faces_to_humans",
    "replace_names", "frame_names", "object_tokens", "augment_objects_with_names",
    "flatten_relations", "SemanticStream", "build_semantic_stream",
]
