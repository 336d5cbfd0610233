"""Covariance evolution for the locked setting: S_c' and S_p' series plus a time average."""
import math

import numpy as np

from optosync import (IntegratorConfig, MeanState, SystemParams, evolve, measure_series,
                      min_physical_eigenvalue, time_average, vacuum_covariance)

traj = evolve(SystemParams.fig2(mu=0.004, lam=0.16), MeanState.initial(math.pi / 2),
              vacuum_covariance(), IntegratorConfig(t_end=1000.0, sample_every=20))
ms = measure_series(traj)
print("smallest physicality eigenvalue:", float(np.min(min_physical_eigenvalue(traj.covs))))
print("S_c' at t=1000:", ms.sc_prime[-1])
ok = np.isfinite(ms.sp_prime)
print("time-averaged S_p':", time_average(ms.times[ok], ms.sp_prime[ok]))
