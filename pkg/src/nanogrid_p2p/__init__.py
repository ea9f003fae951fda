"""Cooperative P2P PV trading among nanogrid clusters.

Modules: ``core`` (time and configuration), ``behavior`` (residents,
appliances, EVs), ``environment`` (PV and weather), ``hvac``, ``trading``
(roles, clearing, settlement), ``scheduler`` (GA load scheduling),
``forecaster`` (GRU), ``accounting`` (tariff and cost reports) and
``simctl`` (simulation loop and CLI).
"""
