"""Tour of the policy/value network: geometry, sampling, gradient checks.

Run from the repository root:  python3 demos/03_policy_network.py
"""

import numpy as np

from paintrl import ARCHS, forward, init_params, sample_action
from paintrl.gradcheck import run_gradcheck
from paintrl.net import trunk_shapes

# ------------------------------------------------------------------
# The full-scale preset expects 41x82x3 observations (two 41x41 patches
# side by side) and stacks three conv layers into a 512-unit trunk.
shapes, flat = trunk_shapes(ARCHS["default"], 41, 82)
print("default preset on 41x82x3 observations:")
for i, s in enumerate(shapes):
    print(f"  conv{i} output: {s[0]} x {s[1]} x {s[2]}")
print(f"  flattened {flat} -> fc {ARCHS['default'].fc_units} -> heads 6 + 6 + 1")

params = init_params(41, 82, seed=0)
n_weights = sum(w.size for _, w in params.param_items())
print(f"  parameters: {n_weights:,}")

# ------------------------------------------------------------------
# Forward pass: 6 squashed action means, 6 log-stds, one value estimate.
rng = np.random.default_rng(1)
obs = rng.uniform(0, 1, (41, 82, 3))
out = forward(params, obs)
print("\naction mean :", np.round(out.mean, 3))
print("log std     :", np.round(out.log_std, 3))
print("value       : %.4f" % out.value)

# Sampling is an explicit-seed diagonal Gaussian; the log density refers to
# the unclipped draw.
action, log_prob, raw = sample_action(out, np.random.default_rng(42))
print("sampled     :", np.round(action, 3), " log_prob = %.3f" % log_prob)

# ------------------------------------------------------------------
# Every gradient in the trainer is hand-derived; verify against central
# finite differences (the same check backs `paintrl gradcheck`).
print("\nfinite-difference verification (step 1e-5, float64):")
result = run_gradcheck(seed=0)
print(result.report())
