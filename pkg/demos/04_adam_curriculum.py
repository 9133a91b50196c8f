"""
Moment-based training and checkpoint resume
===========================================

The second optimizer keeps real-valued latents and updates them with
bias-corrected first and second moments, projecting to the nearest
digit (wrap-aware) only when a prediction is needed.  Training writes
checkpoints on a fixed epoch interval, and a run resumed from any of
them finishes bit-identical to the uninterrupted one.
"""

import os
import tempfile

from hipan import (
    AdamConfig,
    ModelConfig,
    TrainPlan,
    accuracy_report,
    checkpoint_fingerprint,
    default_plan,
    encode_tree,
    gen_synthetic,
    load_checkpoint,
    new_model,
    train,
    uniform_plan,
)
from hipan.checkpoint import load_model

tree = gen_synthetic("complete", 3, 4, seed=0)
ds = encode_tree(tree)

# Same curriculum as the coordinate-search demo, denser checkpoints.
plan = TrainPlan(default_plan(ds.codec.K).phases, checkpoint_interval=10)

workdir = tempfile.mkdtemp(prefix="hipan-demo-")
full_dir = os.path.join(workdir, "full")

model = new_model(ModelConfig(ds.codec), seed=0)
result = train(
    model, ds, AdamConfig(), plan, seed=0, tree=tree, checkpoint_dir=full_dir
)
rep = accuracy_report(model, ds, tree)
print("leaf accuracy:", rep.leaf_accuracy, " root accuracy:", rep.root_accuracy)
print("checkpoints written:")
for path in result.checkpoints:
    print("  ", os.path.basename(path))

# Pick a mid-run checkpoint and continue from it in a fresh directory.
mid_path = result.checkpoints[0]
doc = load_checkpoint(mid_path)
print("resuming from", os.path.basename(mid_path), "cursor", doc["cursor"])

resumed_model = load_model(doc)
resumed = train(
    resumed_model, ds, AdamConfig(), plan, seed=0, tree=tree,
    checkpoint_dir=os.path.join(workdir, "resumed"), resume=doc,
)

# Fingerprints hash everything except the timestamp field, so equality
# here means the two final models match to the last bit.
full_fp = checkpoint_fingerprint(load_checkpoint(result.checkpoints[-1]))
res_fp = checkpoint_fingerprint(load_checkpoint(resumed.checkpoints[-1]))
print("full    ", full_fp[:16], "...")
print("resumed ", res_fp[:16], "...")
print("bit-identical resume:", full_fp == res_fp)

# A flat plan is available when the staged curriculum is not wanted:
# every digit trains in every epoch at one learning rate.
flat = uniform_plan(ds.codec.K, epochs=60, lr=0.01)
flat_model = new_model(ModelConfig(ds.codec), seed=0)
train(flat_model, ds, AdamConfig(), flat, seed=0, tree=tree)
print("flat-plan leaf accuracy:", accuracy_report(flat_model, ds, tree).leaf_accuracy)
