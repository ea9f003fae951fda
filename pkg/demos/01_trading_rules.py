"""
Trading roles and market clearing
=================================

Each cluster decides every ten minutes whether to buy, sell or stay out of
the P2P market. The one-slot rule looks at the current net load only; the
look-ahead rule adds three forecast slots before deciding.
"""

from nanogrid_p2p.trading import OrderBook, clear_market, role_conventional, role_proposed, settle

# %%
# A cluster drawing 12 kW with 2 kW of PV exceeds the 9 kW grid limit by 1 kW.
print(role_conventional(12.0, 2.0, 9.0))

# %%
# With PV above load it offers the surplus.
print(role_conventional(2.0, 5.0, 9.0))

# %%
# Now the current slot looks harmless (8 kW load, 6 kW PV), but the next
# three slots are forecast at 14 kW load and 2 kW PV. Summed over the four
# slots the net load is 38 kW against a 36 kW budget, so the look-ahead rule
# buys in advance.
print(role_proposed((8.0, 6.0), [(14.0, 2.0)] * 3, 9.0))

# %%
# Clearing is proportional on the long side of the book. Two sellers offer
# 4 and 2 kW, one buyer wants 3 kW: each seller delivers half its offer.
alloc = clear_market(OrderBook(offers=[(0, 4.0), (1, 2.0)], requests=[(2, 3.0)]))
for cluster, kw in sorted(alloc.traded_kw.items()):
    print(f"cluster {cluster + 1}: {kw:+.2f} kW  settlement ${settle(kw, 0.10):+.4f}")
print("money balance:", sum(settle(kw, 0.10) for kw in alloc.traded_kw.values()))
