"""Run one offline and one online identification mission, tick by tick.

The robot starts in open water with up to three divers somewhere around
it. A state machine drives the episode: sweep until a person enters the
field of view (SEARCH), servo to a 2 m standoff with two PID loops
(APPROACH), hold position while collecting pose frames that survive the
filter (DATA_COLLECTION), then either classify against pre-trained models
(offline) or first train a fresh model set on the frames just gathered
(online, MODEL_TRAINING) before deciding whether this is the diver it was
sent to find. Wrong person: yaw away (ANGLE_YAW) and keep searching.

Zero sensor noise here so the episodes are short and the log is easy to
read. At the default noise level roughly one frame in nine is rejected by
the filter and the distance estimate wobbles; missions still conclude, they
just spend longer collecting.

Run it:  python3 demos/mission_walkthrough.py
"""

from diverid.body import ZERO_NOISE
from diverid.classifiers import VARIANTS, HeadConfig, build_variant
from diverid.datagen import make_feature_dataset, sample_population, split
from diverid.embedding import TrainConfig, train_embedding
from diverid.mission import MissionConfig, run_mission
from diverid.simworld import make_scene


def show(log):
    print(f"  outcome: {log.outcome}  (target {log.target_label}, "
          f"concluded diver {log.concluded_diver})")
    print(f"  identification counts: {log.counts}")
    print("  transitions:")
    for t, a, b in log.transition_log:
        print(f"    t={t:6.1f}s  {a} -> {b}")
    for ev in log.events:
        print(f"  identified diver at slot {ev.diver_index}: true label "
              f"{ev.true_label}, predicted {ev.predicted_label} ({ev.outcome})")


print("training the model set the offline mission will carry...")
pop = sample_population(3, 1, seed=3)
x, y = make_feature_dataset(pop, 600, seed=3, noise=ZERO_NOISE)
xtr, ytr, xte, yte = split(x, y, 0.8, seed=3)
net, _ = train_embedding(
    xtr, ytr, TrainConfig(epochs=150, min_epochs=150, batch_size=256,
                          dims=(45, 128, 64, 16), seed=3))
models = {
    name: build_variant(VARIANTS[name], xtr, ytr,
                        pretrained_embed=net if VARIANTS[name].uses_embedding else None,
                        cfg=HeadConfig().reseeded(3))
    for name in ("All_KNN", "All_NN_KNN")
}

print("\n= offline mission: find diver 1 among three =")
scene = make_scene(pop, [0, 1, 2], seed=42, noise=ZERO_NOISE)
cfg = MissionConfig(target=1, identify_with="All_NN_KNN")
log = run_mission(scene, cfg, models=models)
show(log)

# a few ticks from the first approach, to watch the controller close in
first = next(i for i, t in enumerate(log.ticks) if t.state == "APPROACH")
approach = []
for tick in log.ticks[first:]:
    if tick.state != "APPROACH":
        break
    approach.append(tick)
print("  first approach, every 6th tick:")
for tick in approach[::6]:
    print(f"    t={tick.t:5.1f}s  d={tick.drp_distance:5.2f}m  "
          f"bearing={tick.drp_bearing:+.3f}rad  v={tick.v:+.2f}m/s")

print("\n= online mission: no prior models at all =")
scene = make_scene(pop, [0, 1, 2], seed=43, noise=ZERO_NOISE)
cfg = MissionConfig(mode="online", target=2, identify_with="All_NN_KNN")
log = run_mission(scene, cfg, embed_net=net)
show(log)
print(f"  trained on a {log.training_matrix_shape[0]}x"
      f"{log.training_matrix_shape[1]} matrix gathered in-mission, "
      f"{log.training_wall_time:.2f}s of wall time")
