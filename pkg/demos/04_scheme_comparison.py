"""
Daily cost of the three power-management schemes
================================================

The same residents, appliance requests and EV arrivals are replayed under
no trading, one-slot trading and look-ahead trading, for both PV classes
with the published cluster peaks. Costs are averaged over a few seeds.
"""

import numpy as np

from nanogrid_p2p.core import RpvClass, ScenarioConfig, Scheme
from nanogrid_p2p.simctl import run

SEEDS = range(4)
SCHEMES = (Scheme.WITHOUT_P2P, Scheme.CONVENTIONAL_P2P, Scheme.PROPOSED_P2P)

# %%
for rpv in (RpvClass.RPV1, RpvClass.RPV2):
    print(f"\n{rpv.value}: mean daily cost per cluster ($)")
    print("scheme        " + " ".join(f"   c{c}" for c in range(1, 7)) + "   total")
    totals = {}
    for scheme in SCHEMES:
        costs = np.mean([run(ScenarioConfig(scheme=scheme, rpv_class=rpv, use_published_peaks=True, seed=s))
                         .report.cluster_cost_usd for s in SEEDS], axis=0)
        totals[scheme] = costs.sum()
        print(f"{scheme.short:13s} " + " ".join(f"{v:5.2f}" for v in costs) + f"  {costs.sum():6.2f}")
    base = totals[Scheme.WITHOUT_P2P]
    for scheme in SCHEMES[1:]:
        print(f"{scheme.short} saves {100 * (1 - totals[scheme] / base):.1f}% against no trading")
