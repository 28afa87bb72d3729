"""
Watching exemplars emerge
=========================

Max-sum message passing starts with every point in the background and
gradually lets exemplars appear.  We trace a run on the six-point scene and
check the answer against exhaustive search.
"""

# +
import numpy as np

from mapc import data, formats
from mapc.candidates import expand_detections
from mapc.inference import InferenceConfig, ObjectiveWeights, iteration_trace, mapc_cluster
from mapc.oracle import brute_force_regularize
from mapc.similarity import SimilarityParams, build_similarity_model
from mapc.taxonomy import load_taxonomy

tax = load_taxonomy(str(data.path("fixture_taxonomy.json")))
dets, _ = formats.parse_detections(formats.read_json(data.path("six_point.detections.json")), tax)
cands = expand_detections(dets, theta_bg=0.3)
model = build_similarity_model(cands, tax, SimilarityParams())
weights = ObjectiveWeights()
# -

result = mapc_cluster(cands, model, weights, InferenceConfig(trace_enabled=True))
trace = iteration_trace(result)
print("iterations:", result.iterations_run, "converged:", result.converged)

# Exemplar count per iteration, printed as a small text strip.

counts = [len(set(a[a >= 0])) for a in trace]
print("".join(str(c) for c in counts))

# The first iteration at which each snapshot changes:

for t in range(1, len(trace)):
    if not np.array_equal(trace[t], trace[t - 1]):
        print(t, trace[t].tolist())

# Exhaustive search over every feasible assignment agrees.

best = brute_force_regularize(model, weights, cands.box_ids)
print("message passing:", result.assignment.tolist(), round(result.objective_value, 4))
print("oracle:         ", best.best_assignment.tolist(), round(best.best_value, 4))
print("assignments scored:", best.enumerated_count)

# Raising w_a makes exemplars expensive; past some point no cluster pays for
# its exemplar and everything goes to the background.

for w_a in (0.03, 0.1, 0.3, 1.0):
    w = ObjectiveWeights(w_a=w_a)
    r = mapc_cluster(cands, model, w)
    print(f"w_a={w_a:<5} exemplars={r.exemplar_ids}")
