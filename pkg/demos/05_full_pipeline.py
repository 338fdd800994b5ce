"""Drive the whole experiment chain through the pipeline API at a miniature
scale: phantoms -> noisy sinograms -> FBP -> network training -> TV ->
evaluation report.

Run:  python demos/05_full_pipeline.py            (a few minutes)
The desk- and full-scale versions of the same chain:
    patrec reproduce-paper --out run_desk --scale desk
    patrec reproduce-paper --out run_full --scale full
"""

import time
from pathlib import Path

from patrec.pipeline import PipelineConfig, reproduce

out = Path("demo_out") / "mini_run"
cfg = PipelineConfig(
    width=32, height=32,
    num_times=512,
    n_train=16, n_eval=4,
    sweeps=4,
    tv_iterations=20,
    unet_depth=2, unet_base=8,
    seed=11,
)

t0 = time.time()
report = reproduce(cfg, out)
print(f"pipeline finished in {time.time() - t0:.0f}s; artifacts under {out}/")
print()
print(report.to_text())
print("method means:", {m: round(report.mean(m), 4) for m in sorted(report.per_image)})
