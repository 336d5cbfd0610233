"""Attractor type of the mechanical motion as the drive amplitude grows."""
from optosync import IntegratorConfig, SystemParams, attractor_report

for E in (5.0, 20.0, 60.0):
    rep = attractor_report(SystemParams.fig2(E=E), IntegratorConfig(t_end=2000.0))
    print(f"E={E:5.1f}  {rep['attractor']:12s} amplitudes {rep['mean_amplitude']}")
