"""
Cast list from subtitle statistics
==================================

The principal-character list is pure counting: a speaker joins the cast
when they have more than min_count subtitle lines AND at least one tenth
of the busiest speaker's line count. Everyone else maps to UNKNAME.
"""

from charqa.castlist import (UNKNAME, build_cast_list, count_speakers,
                             map_speaker, scaled_min_count)
from charqa.corpus import GenConfig, generate_corpus

# The rule on a hand-made season: Ted dominates, Guest is frequent enough
# in absolute terms but falls under the 1/10-of-max ratio filter.
counts = {"Ted": 5400, "Lily": 3200, "Marshall": 2900, "Guest": 510, "Cameo": 80}
cast = build_cast_list(counts, min_count=500)
print(f"counts        {counts}")
print(f"principals    {cast.names}")
print(f"label space   {cast.label_names()}  (k={cast.k}, unk at {cast.unk_index})")

for who in ("Ted", "Guest", "Cameo", "Stranger"):
    print(f"  map_speaker({who!r:>10}) -> {map_speaker(who, cast)}")

# Strictness matters: exactly min_count lines is NOT enough.
print(f"\nat exactly 500 lines: "
      f"{build_cast_list({'A': 501, 'B': 500}, min_count=500).names}")

# On generated corpora the thresholds scale down with corpus size, so the
# same two filters keep working at desk scale.
corpus = generate_corpus(GenConfig(k_principals=4, n_extras=2, n_clips=40,
                                   d_f=16, seed=7))
counts = count_speakers(corpus)
total = sum(counts.values())
mc = scaled_min_count(total)
cast = build_cast_list(counts, min_count=mc)
print(f"\ncorpus lines  {dict(sorted(counts.items(), key=lambda kv: -kv[1]))}")
print(f"scaled min_count({total}) = {mc}")
print(f"principals    {cast.names}")
print(f"extras fold into {UNKNAME!r} at index {cast.unk_index}")
