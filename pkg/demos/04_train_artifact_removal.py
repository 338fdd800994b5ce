"""Train the three-layer network to remove under-sampling artifacts from FBP
images, at a miniature scale so it finishes in a few minutes.

Run:  python demos/04_train_artifact_removal.py
The full-size desk experiment is `patrec reproduce-paper --scale desk`.
"""

import time
from pathlib import Path

import numpy as np

from patrec.containers import export_png
from patrec.evaluation import rel_mse
from patrec.fbp import fbp_reconstruct
from patrec.geometry import GridImage, Sinogram, arc_below
from patrec.neural import TrainConfig, save_params, snet_apply, train
from patrec.phantom import sample_phantom
from patrec.rng import derive_seed
from patrec.wave import ForwardConfig, WaveOperator, add_noise

out = Path("demo_out")
out.mkdir(exist_ok=True)

grid = GridImage.zeros(64, 64, (-10.0, 10.0, -20.0, 5.0))
geom = arc_below(50.0, 28, -11.1)
n, t_end = 1024, 67.3
dt = t_end / (n - 1)
fwd_cfg = ForwardConfig(t_end=t_end)
op = WaveOperator(grid, geom, n, dt, fwd_cfg)


def build_pairs(master_seed, count):
    pairs, truths = [], []
    for i in range(count):
        _, phantom = sample_phantom(derive_seed(master_seed, i), grid)
        sino = add_noise(
            Sinogram(geom, dt, op.apply(phantom.values)), 0.1,
            seed=derive_seed(master_seed + 1, i),
        )
        pairs.append((fbp_reconstruct(sino, grid).values, phantom.values))
        truths.append(phantom)
    return pairs, truths


print("simulating 24 training + 6 evaluation phantoms ...")
train_pairs, _ = build_pairs(100, 24)
eval_pairs, eval_truths = build_pairs(200, 6)

cfg = TrainConfig(learning_rate=0.001, momentum=0.99, batch_size=1, sweeps=20, seed=3)
t0 = time.time()
params, history = train(train_pairs, "snet", cfg, eval_dataset=eval_pairs)
print(f"trained {cfg.sweeps} sweeps in {time.time() - t0:.0f}s; "
      f"train loss {history[0]['train_loss']:.4f} -> {history[-1]['train_loss']:.4f}")

fbp_scores, net_scores = [], []
for (fbp_vals, _), truth in zip(eval_pairs, eval_truths):
    fbp_img = truth.with_values(fbp_vals)
    net_img = snet_apply(params, fbp_img, dtype=np.float32)
    fbp_scores.append(rel_mse(truth, fbp_img))
    net_scores.append(rel_mse(truth, net_img))
print(f"held-out relMSE: FBP {np.mean(fbp_scores):.4f} -> network {np.mean(net_scores):.4f}")

save_params(out / "snet_demo.patw", params)
export_png(out / "network_cleanup.png", net_img)
print(f"wrote {out}/snet_demo.patw, network_cleanup.png")
