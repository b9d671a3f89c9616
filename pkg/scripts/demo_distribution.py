#!/usr/bin/env python3
"""Small tour of the distribution API on a binary depth-2 base tree."""

import numpy as np

from rootedtrees import (
    FullTreeRule,
    TreeDistribution,
    TreeShape,
    UniformRule,
    enumerate_subtrees,
    format_subtree,
    normalization_sum,
)

shape = TreeShape(2, 2)
print(f"shape {shape}: {shape.subtree_count()} rooted subtrees")

for rule in [UniformRule(), FullTreeRule(0.5)]:
    dist = TreeDistribution(shape, rule)
    print(f"\nrule {rule}:")
    print(f"  normalization sum = {normalization_sum(dist)}")
    print(f"  entropy = {dist.entropy():.6f} nats")
    tree, prob = dist.mode()
    print(f"  mode (p = {prob:.4f}):")
    for line in format_subtree(tree, shape.k_max).splitlines():
        print(f"    {line}")
    sample = dist.sample(np.random.default_rng(0))
    print(f"  sample: {format_subtree(sample, shape.k_max).splitlines()}")

dist = TreeDistribution(shape, UniformRule())
total = sum(np.exp(dist.log_prob(t)) for t in enumerate_subtrees(shape))
print(f"\nsum of exp(log_prob) over all subtrees = {total}")
