import numpy as np
import pytest

from charqa.castlist import CastList
from charqa.corpus import (BBox, Clip, FaceDetection, Frame, GenConfig, QAItem,
                           RelationTriple, SubtitleLine, generate_corpus)


@pytest.fixture(scope="session")
def small_corpus():
    """10 clips, small feature dim; shared by smoke tests."""
    return generate_corpus(GenConfig(k_principals=3, n_extras=1, n_clips=10,
                                     d_f=16, seed=11))


@pytest.fixture
def tiny_clip():
    """One frame, one face, one event triple, two subtitle lines."""
    emb = np.zeros(4)
    emb[0] = 1.0
    face = FaceDetection(0, 0, BBox(10, 10, 20, 20), emb)
    human = BBox(5, 5, 40, 80)
    frame = Frame(0, 0.0, [face], [(human, "man")], [("cup", None)],
                  [RelationTriple("man", "hold", "cup", human)])
    subs = [SubtitleLine("Ada", ["so", "story"], 0.0, 0.9),
            SubtitleLine("Ben", ["well", "idea"], 1.0, 1.9)]
    qa = QAItem(["what", "does", "Ada", "hold"],
                [["cup"], ["fork"], ["vase"], ["lamp"], ["bell"]],
                0, (0.0, 0.9), qtype="visual")
    return Clip("tiny_0", [frame], subs, [qa], {0: "Ada"})


@pytest.fixture
def tiny_cast():
    return CastList(("Ada", "Ben"), (10, 5))
