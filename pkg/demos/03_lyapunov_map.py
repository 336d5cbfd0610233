"""Coarse Lyapunov map over (mu, lambda), saved as a sign heatmap."""
from pathlib import Path

from optosync import GridSpec, SystemParams, find_logic_regions, sweep_lyapunov
from optosync.svg import render_heatmap

grid = GridSpec(mu_min=0.0, mu_max=0.008, mu_steps=5, lambda_min=0.0, lambda_max=0.2, lambda_steps=6)
field = sweep_lyapunov(SystemParams.fig2(), grid)
print(field.classification)
print("AND cells:", find_logic_regions(field, "AND"))
Path("lyapunov_map.svg").write_text(render_heatmap(field, "sign", title="largest exponent sign"))
