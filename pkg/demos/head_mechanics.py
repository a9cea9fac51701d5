"""How the group-structured output head turns logits into predictions.

A classifier for N classes and D sensitive groups gets N*D output nodes;
the node for (class y, group d) sits at index y + d*N. Training softmaxes
only the true group's N-logit slice. At prediction time the group is
unknown, so we average the per-group softmax columns and take the argmax.
"""
import numpy as np

from fedbias.head import (
    group_conditional_probs,
    predict,
    predict_known_group,
    conditional_cross_entropy,
)

N, D = 3, 2

logits = np.array([1.0, 2.0, 0.5, 0.2, 2.5, 0.1])
print("raw logits (group 0 slice | group 1 slice):")
print(" ", logits[:N], "|", logits[N:])

dist = group_conditional_probs(logits, N, D)
print("\nper-group class probabilities (rows = groups):")
for d in range(D):
    row = ", ".join(f"{p:.3f}" for p in dist.probs[d])
    print(f"  group {d}: [{row}]")

print("\ncolumn means (uniform prior over groups):")
print(" ", ", ".join(f"{p:.3f}" for p in dist.probs.mean(axis=0)))
print("marginal prediction:", predict(dist))
for d in range(D):
    print(f"prediction if group {d} were known:", predict_known_group(dist, d))

# The marginal and the known-group rules can disagree: a class that is
# mediocre in every group can still win the average.
tricky = np.log(np.array([0.50, 0.45, 0.05, 0.05, 0.45, 0.50]))
tdist = group_conditional_probs(tricky, N, D)
print("\na disagreement case:")
for d in range(D):
    row = ", ".join(f"{p:.3f}" for p in tdist.probs[d])
    print(f"  group {d}: [{row}]")
print("  marginal prediction:", predict(tdist))
print("  known-group predictions:",
      [predict_known_group(tdist, d) for d in range(D)])

# The training loss only ever sees the true group's slice.
print("\ncross-entropy of class 1 under each group's slice:")
for d in range(D):
    print(f"  group {d}: {conditional_cross_entropy(dist, 1, d):.4f}")
