"""Fit the full ten-variant classifier zoo on one synthetic population.

Variant names decompose as <view>_<embedding?>_<head>:

  view       All_* trains on divers and swimmers together; Diver_* trains
             on diver frames only.
  embedding  *_NN_* routes features through the trained 16-d embedding
             before the head sees them; plain variants classify the raw 45
             ratios.
  head       KNN majority vote, a one-vs-rest linear SVM, or (for *_NN
             alone) the softmax layer that comes with the network.

The point of the zoo is the comparison: the embedding variants should hold
up when the head only gets a handful of frames per decision.

Run it:  python3 demos/classifier_zoo.py
"""

from diverid.classifiers import VARIANTS, HeadConfig, build_variant, identify
from diverid.datagen import (
    kind_of_labels,
    make_feature_dataset,
    sample_population,
    select_kind,
    split,
)
from diverid.embedding import TrainConfig, train_embedding
from diverid.reporting import (
    accuracy_vs_frames,
    classification_accuracy,
    frames_report,
    variant_accuracy_report,
)

pop = sample_population(3, 3, seed=5)
kinds = kind_of_labels(pop)
x, y = make_feature_dataset(pop, 500, seed=5)
xtr, ytr, xte, yte = split(x, y, 0.8, seed=5)

net, _ = train_embedding(
    xtr, ytr, TrainConfig(epochs=150, min_epochs=150, batch_size=256,
                          dims=(45, 128, 64, 16), seed=5))

head_cfg = HeadConfig().reseeded(5)
rows = []
models = {}
for name, variant in VARIANTS.items():
    if variant.dataset_kind == "diver":
        f_tr, l_tr = select_kind(xtr, ytr, kinds, "diver")
        f_te, l_te = select_kind(xte, yte, kinds, "diver")
    else:
        f_tr, l_tr, f_te, l_te = xtr, ytr, xte, yte
    model = build_variant(variant, f_tr, l_tr,
                          pretrained_embed=net if variant.uses_embedding else None,
                          cfg=head_cfg)
    models[name] = model
    rows.append((name,
                 classification_accuracy(model, f_tr, l_tr),
                 classification_accuracy(model, f_te, l_te)))

print("per-frame accuracy, all ten variants "
      "(Diver_* rows are scored on diver frames only):\n")
print(variant_accuracy_report(rows)[1])

# identification is a vote over a block of frames, not a single guess
sample = xte[yte == ytr[0]][:25]
result = identify(models["All_NN_KNN"], sample)
print(f"\nAll_NN_KNN on a 25-frame block of identity {ytr[0]}: "
      f"label {result.label}, votes {result.votes}")

# how many frames does a decision need? sweep the embedding variants
# against their raw-feature counterparts
sweep = {n: models[n] for n in ("All_KNN", "All_NN_KNN", "All_SVM", "All_NN_SVM")}
results, skipped = accuracy_vs_frames(sweep, xte, yte, [1, 5, 10, 25],
                                      groups_per_identity=15, seed=5)
print("\nblock-vote accuracy by frames per decision:\n")
print(frames_report(results, [1, 5, 10, 25])[1])
if skipped:
    print(f"(skipped counts with too few test frames: {skipped})")
