"""
Classes as paths in a binary tree
=================================

Ten classes are encoded by four binary decisions.  Only 11 of the 15 tree
nodes lie on a used path, so the network has 11 outputs.
"""

import numpy as np

from tagi.heads import ClassTree, HeadConfig, class_decode, class_encode, class_marginals, decision_fractions
from tagi.net import GaussianVector

tree = ClassTree(10)
print(tree)
for c in (0, 5, 9):
    pairs = class_encode(c, tree)
    print(c, pairs, "->", class_decode(pairs, tree))

# a confident output vector pointing at class 5, and an uninformative one
confident = np.zeros(tree.output_units)
for unit, sign in class_encode(5, tree):
    confident[unit] = 1.5 * sign
outputs = GaussianVector(np.stack([confident, np.zeros(tree.output_units)]), np.full((2, 11), 0.05))
probs = class_marginals(outputs, HeadConfig(alpha=1 / 3), tree)
print(np.round(probs, 3))

print("correct / incorrect / unknown at phi = 0.5, 0.9:")
print(decision_fractions(probs, [5, 5], [0.5, 0.9]))
