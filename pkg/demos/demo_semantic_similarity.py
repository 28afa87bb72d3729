"""
Semantic and spatial similarity between detections
==================================================

Detections that share a box or a family of labels should look alike to the
regulariser.  This walk-through builds the similarity matrix for a small
scene of two objects, each seen three times under related dog or cat labels.
"""

# +
import numpy as np

from mapc import data, formats
from mapc.candidates import expand_detections
from mapc.similarity import SimilarityParams, build_similarity_model
from mapc.taxonomy import lin_similarity, load_taxonomy

np.set_printoptions(precision=3, suppress=True)
tax = load_taxonomy(str(data.path("fixture_taxonomy.json")))
# -

# Information content grows from the root to the leaves: rare, specific
# classes carry more of it.

for name in ("entity", "animal", "dog", "beagle", "doggy_bag"):
    print(f"{name:>10}  p={tax.probability[tax.id_of(name)]:.3f}  IC={tax.ic(tax.id_of(name)):.3f}")

# Lin similarity is high for siblings and zero when the only shared ancestor
# is the root.  Note that a doggy bag is a bag: the string overlap with "dog"
# means nothing to the hierarchy.

pairs = [("beagle", "dachshund"), ("beagle", "tabby"), ("beagle", "doggy_bag"), ("couch", "settee")]
for a, b in pairs:
    print(f"lin({a}, {b}) = {lin_similarity(tax, tax.id_of(a), tax.id_of(b)):.3f}")

# Now the six-point scene.  Points 0-2 cover one dog, points 3-5 one cat.

dets, _ = formats.parse_detections(formats.read_json(data.path("six_point.detections.json")), tax)
cands = expand_detections(dets, theta_bg=0.3)
for p in cands.points:
    print(p.point_id, tax.name_of(p.class_id), p.score, cands.box_of(p).as_list())

# The pairwise similarity mixes overlap and label similarity with weight
# lambda.  The block structure is the clustering the regulariser should find.

for lam in (1.0, 0.5, 0.0):
    m = build_similarity_model(cands, tax, SimilarityParams(lam=lam))
    print(f"lambda = {lam}")
    print(m.pair_sim)

# Self-similarity encodes how much the detector trusts a point; it is the
# negative inverse of the score margin over the background threshold.

m = build_similarity_model(cands, tax, SimilarityParams())
print(m.self_sim)
