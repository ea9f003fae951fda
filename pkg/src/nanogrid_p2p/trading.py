"""Buy/sell role assignment, cooperative market clearing and settlement."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence


class Role(enum.IntEnum):
    """Sign of the trading switch: +1 buy, -1 sell, 0 no trade."""

    BUY = 1
    SELL = -1
    IDLE = 0


@dataclass(frozen=True)
class TradeRole:
    role: Role
    amount_kw: float = 0.0

    def __post_init__(self):
        if self.role is Role.IDLE:
            if self.amount_kw != 0.0:
                raise ValueError("idle role carries no amount")
        elif not self.amount_kw > 0:
            raise ValueError("buy/sell amounts must be positive")

    @classmethod
    def buy(cls, amount_kw: float) -> "TradeRole":
        return cls(Role.BUY, amount_kw) if amount_kw > 0 else IDLE

    @classmethod
    def sell(cls, amount_kw: float) -> "TradeRole":
        return cls(Role.SELL, amount_kw) if amount_kw > 0 else IDLE

    @property
    def sign(self) -> int:
        return int(self.role)

    def capped(self, limit_kw: float) -> "TradeRole":
        """Same role with the amount limited to ``limit_kw`` (Idle if nothing is left)."""
        if self.role is Role.IDLE:
            return self
        return TradeRole.buy(min(self.amount_kw, limit_kw)) if self.role is Role.BUY else TradeRole.sell(
            min(self.amount_kw, limit_kw)
        )


IDLE = TradeRole(Role.IDLE)


def role_conventional(pw_load: float, pw_pv: float, pw_max: float) -> TradeRole:
    """Role from the present slot only.

    Buys the part of the net load above ``pw_max``; sells current PV
    surplus when the net load is below ``pw_max`` and PV is producing.
    """
    net = pw_load - pw_pv
    if net > pw_max:
        return TradeRole.buy(net - pw_max)
    if net < pw_max and pw_pv > 0:
        return TradeRole.sell(max(0.0, pw_pv - pw_load))
    return IDLE


def role_proposed(
    current: tuple[float, float],
    forecasts: Sequence[tuple[float, float]],
    pw_max: float,
    k: int = 3,
    average_horizon_amount: bool = False,
) -> TradeRole:
    """Role from the current (load, pv) pair plus ``k`` forecast pairs.

    The accumulated net load over the ``k + 1`` slots is compared with
    ``(k + 1) * pw_max``. Posted amounts are the raw horizon sums unless
    ``average_horizon_amount`` divides them by ``k + 1``.
    """
    if len(forecasts) != k:
        raise ValueError(f"expected {k} forecast pairs, got {len(forecasts)}")
    pairs = [tuple(current)] + [tuple(f) for f in forecasts]
    # fsum is exact, so constant sequences reduce exactly to the one-slot rule
    accumulated = math.fsum(load - pv for load, pv in pairs)
    threshold = (k + 1) * pw_max
    scale = 1.0 / (k + 1) if average_horizon_amount else 1.0
    if accumulated > threshold:
        return TradeRole.buy((accumulated - threshold) * scale)
    if accumulated < threshold and current[1] > 0:
        surplus = math.fsum(pv - load for load, pv in pairs)
        return TradeRole.sell(max(0.0, surplus) * scale)
    return IDLE


@dataclass
class OrderBook:
    offers: list[tuple[int, float]] = field(default_factory=list)
    requests: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for cid, qty in [*self.offers, *self.requests]:
            if not qty > 0:
                raise ValueError("order quantities must be positive")
            if cid in seen:
                raise ValueError(f"cluster {cid} appears more than once in the book")
            seen.add(cid)

    @classmethod
    def from_roles(cls, roles: dict[int, TradeRole]) -> "OrderBook":
        offers = [(c, r.amount_kw) for c, r in roles.items() if r.role is Role.SELL]
        requests = [(c, r.amount_kw) for c, r in roles.items() if r.role is Role.BUY]
        return cls(offers, requests)


@dataclass(frozen=True)
class Allocation:
    """Cleared quantities; ``traded_kw`` is + for received and - for delivered."""

    traded_kw: dict[int, float]
    total_traded_kw: float


def clear_market(book: OrderBook) -> Allocation:
    """Proportional cooperative clearing.

    The traded total is the smaller side of the book; each producer
    delivers in proportion to its offer and each consumer receives in
    proportion to its request.
    """
    supply = math.fsum(q for _, q in book.offers)
    demand = math.fsum(q for _, q in book.requests)
    total = min(supply, demand)
    traded: dict[int, float] = {c: 0.0 for c, _ in [*book.offers, *book.requests]}
    if total > 0:
        for c, q in book.offers:
            traded[c] = -(q if total == supply else total * q / supply)
        for c, q in book.requests:
            traded[c] = q if total == demand else total * q / demand
    return Allocation(traded, total)


def settle(traded_kw: float, smp: float) -> float:
    """Money for one slot of traded power: buyers pay (+), sellers earn (-)."""
    if smp < 0:
        raise ValueError("smp must be non-negative")
    return traded_kw / 6 * smp
