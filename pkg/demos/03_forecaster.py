"""
Forecasting load and PV three slots ahead
=========================================

Each cluster has its own GRU model, bundled with the package and keyed by
the PV peak of the cluster. The model reads the last six (load, PV) rows
and predicts the next three.
"""

import numpy as np

from nanogrid_p2p.core import ScenarioConfig, Scheme
from nanogrid_p2p.forecaster import ModelStore, persistence_forecast
from nanogrid_p2p.simctl import simulate

# %%
# One simulated day without trading gives realistic histories for the six
# clusters of the first PV class.
res = simulate(ScenarioConfig(scheme=Scheme.WITHOUT_P2P, use_published_peaks=True, seed=42))
load, pv = res.records.unscheduled, res.records.pv
store = ModelStore()

# %%
# Compare the model against "tomorrow looks like now" over the daylight slots.
for c, peak in enumerate(res.peaks_kw):
    model = store.get(peak)
    series = np.column_stack([load[c], pv[c]])
    hist = np.stack([series[n - 6:n] for n in range(42, 117)])
    truth = np.stack([series[n:n + 3] for n in range(42, 117)])
    err_gru = np.sqrt(np.mean((model.forecast(hist) - truth) ** 2, axis=(0, 1)))
    err_pers = np.sqrt(np.mean((persistence_forecast(hist) - truth) ** 2, axis=(0, 1)))
    print(f"cluster {c + 1} ({peak:5.2f} kW): RMSE load {err_gru[0]:.2f} vs {err_pers[0]:.2f} kW, "
          f"pv {err_gru[1]:.2f} vs {err_pers[1]:.2f} kW (GRU vs persistence)")
