"""Per-slot flexible-load scheduling by genetic algorithm.

Each slot and cluster the GA picks which pending flexible requests run now
(gene 1) and which wait (gene 0). Candidates are scored by electricity
cost, grid dependency and accumulated delay, folded into one weighted
fitness with a penalty on grid draw at or above ``pw_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .behavior import LoadRequest


class InfeasibleSlotError(RuntimeError):
    """Grid draw would reach ``pw_max``; more flexible load must wait."""

    def __init__(self, grid_kw: float, pw_max: float):
        self.grid_kw = grid_kw
        self.pw_max = pw_max
        super().__init__(f"grid draw {grid_kw:.6g} kW is not below pw_max {pw_max:.6g} kW")


@dataclass(frozen=True)
class PowerSplit:
    """How one slot's demand is covered.

    ``pv_traded_kw`` is the part of the received P2P power actually consumed.
    """

    pv_self_kw: float
    pv_traded_kw: float
    grid_kw: float

    @property
    def demand_kw(self) -> float:
        return self.pv_self_kw + self.pv_traded_kw + self.grid_kw


def allocate_power(nonflex_kw: float, flex_kw: float, pv_self_kw: float, pv_traded_kw: float,
                   pw_max: float, check: bool = True) -> PowerSplit:
    """Cover demand from own PV first, then traded PV, then the grid.

    Own PV goes to non-flexible load before flexible load, and traded PV
    likewise, so the per-category breakdown never changes the totals. One
    load may be split between sources.
    """
    if min(nonflex_kw, flex_kw, pv_self_kw, pv_traded_kw) < 0:
        raise ValueError("allocate_power inputs must be non-negative")
    demand = nonflex_kw + flex_kw
    own = min(pv_self_kw, demand)
    traded = min(pv_traded_kw, demand - own)
    grid = demand - own - traded
    if check and grid >= pw_max:
        raise InfeasibleSlotError(grid, pw_max)
    return PowerSplit(own, traded, grid)


@dataclass(frozen=True)
class SlotContext:
    """Everything the fitness function needs for one cluster in one slot.

    ``traded_in_kw`` is P2P power received (0 for sellers), usable for load;
    ``traded_signed_kw`` is + received / - delivered, as billed.
    """

    power_kw: np.ndarray
    delay_slots: np.ndarray
    forced: np.ndarray
    nonflex_kw: float
    pv_avail_kw: float
    traded_in_kw: float = 0.0
    traded_signed_kw: float = 0.0
    ec: float = 0.10
    smp: float = 0.10
    pw_max: float = 9.0

    def __post_init__(self):
        p = np.asarray(self.power_kw, dtype=np.float64).reshape(-1)
        d = np.asarray(self.delay_slots, dtype=np.float64).reshape(-1)
        f = np.asarray(self.forced, dtype=np.bool_).reshape(-1)
        if not (len(p) == len(d) == len(f)):
            raise ValueError("power, delay and forced arrays must have equal length")
        if np.any(p < 0) or np.any(d < 0):
            raise ValueError("power and delay must be non-negative")
        if min(self.nonflex_kw, self.pv_avail_kw, self.traded_in_kw) < 0:
            raise ValueError("nonflex, pv and traded-in power must be non-negative")
        object.__setattr__(self, "power_kw", p)
        object.__setattr__(self, "delay_slots", d)
        object.__setattr__(self, "forced", f)

    @property
    def size(self) -> int:
        return len(self.power_kw)


@dataclass(frozen=True)
class ObjectiveVector:
    cost_usd: float
    grid_dependency_kw: float
    total_delay_slots: float
    violation_kw: float = 0.0

    def __post_init__(self):
        if self.total_delay_slots < 0:
            raise ValueError("total delay cannot be negative")


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 100
    crossover_prob: float = 0.8
    mutation_prob: float = 0.01
    weights: tuple[float, float, float] = (1.0, 0.05, 0.01)
    penalty_per_kw: float = 1e3

    def __post_init__(self):
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ValueError("GA probabilities must lie in [0, 1]")
        if len(self.weights) != 3 or any(not w >= 0 for w in self.weights) or not sum(self.weights) > 0:
            raise ValueError("weights must be three non-negative numbers, not all zero")
        if self.population < 2 or self.generations < 0:
            raise ValueError("population must be >= 2 and generations >= 0")
        if self.penalty_per_kw < 0:
            raise ValueError("penalty must be non-negative")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def from_dict(cls, doc: dict) -> "GaParams":
        doc = dict(doc)
        if "weights" in doc:
            doc["weights"] = tuple(doc["weights"])
        return cls(**doc)


# grid < pw_max is strict; the fitness treats draws within this band of
# pw_max as violations so that a tiny penalty never buys a draw at the limit
GRID_MARGIN_KW = 0.01


def evaluate_objectives(genes: Sequence[int], ctx: SlotContext) -> ObjectiveVector:
    """Objectives of one candidate; forced genes are treated as 1."""
    g = np.asarray(genes, dtype=bool).reshape(-1)
    if len(g) != ctx.size:
        raise ValueError(f"expected {ctx.size} genes, got {len(g)}")
    run = g | ctx.forced
    flex = math.fsum(ctx.power_kw[run])
    delay = math.fsum(ctx.delay_slots[~run] + 1.0)
    split = allocate_power(ctx.nonflex_kw, flex, ctx.pv_avail_kw, ctx.traded_in_kw, ctx.pw_max, check=False)
    cost = (split.grid_kw * ctx.ec) / 6 + ctx.traded_signed_kw * ctx.smp / 6
    grid_dep = split.grid_kw - split.pv_self_kw - split.pv_traded_kw
    violation = max(0.0, split.grid_kw - ctx.pw_max + GRID_MARGIN_KW)
    return ObjectiveVector(cost, grid_dep, delay, violation)


def scalarize(obj: ObjectiveVector, params: GaParams = GaParams()) -> float:
    """Weighted sum of the objectives plus the constraint penalty; lower is better."""
    wc, wg, wd = params.weights
    return (wc * obj.cost_usd + wg * obj.grid_dependency_kw + wd * obj.total_delay_slots
            + params.penalty_per_kw * obj.violation_kw)


# --- compiled GA kernel -------------------------------------------------------

@njit(inline="always")
def _next(state):
    # xorshift64*
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(2685821657736338717)


@njit(inline="always")
def _uniform(state):
    return (_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _fitness_all(pop, fit, power, delay, nonflex, pv, traded_in, trade_usd, ec, pw_max, wc, wg, wd, pen, margin):
    P, n = pop.shape
    for i in range(P):
        flex = 0.0
        dl = 0.0
        for j in range(n):
            if pop[i, j]:
                flex += power[j]
            else:
                dl += delay[j] + 1.0
        demand = nonflex + flex
        own = min(pv, demand)
        rem = demand - own
        traded = min(traded_in, rem)
        grid = rem - traded
        cost = (grid * ec) / 6.0 + trade_usd
        f = wc * cost + wg * (grid - own - traded) + wd * dl
        v = grid - pw_max + margin
        if v > 0.0:
            f += pen * v
        fit[i] = f


@njit(cache=True)
def _evolve(power, delay, forced, nonflex, pv, traded_in, trade_usd, ec, pw_max,
            wc, wg, wd, pen, margin, P, G, pc, pm, seed):
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(0x632BE59BD9B4E019)
    for _ in range(4):
        _next(state)
    n = power.shape[0]
    pop = np.zeros((P, n), np.uint8)
    new = np.zeros((P, n), np.uint8)
    fit = np.empty(P)
    for i in range(P):
        for j in range(n):
            pop[i, j] = 1 if forced[j] else np.uint8(_next(state) >> np.uint64(63))
    hist = np.empty(G + 1)
    best = np.zeros(n, np.uint8)
    best_fit = np.inf
    lq = np.log1p(-pm) if 0.0 < pm < 1.0 else 0.0
    for g in range(G + 1):
        _fitness_all(pop, fit, power, delay, nonflex, pv, traded_in, trade_usd, ec, pw_max, wc, wg, wd, pen, margin)
        for i in range(P):
            if fit[i] < best_fit:
                best_fit = fit[i]
                best[:] = pop[i]
        hist[g] = best_fit
        if g == G:
            break
        new[0] = best
        i = 1
        while i < P:
            a = int(_uniform(state) * P)
            b = int(_uniform(state) * P)
            p1 = a if fit[a] <= fit[b] else b
            a = int(_uniform(state) * P)
            b = int(_uniform(state) * P)
            p2 = a if fit[a] <= fit[b] else b
            cross = _uniform(state) < pc
            bits = np.uint64(0)
            left = 0
            for j in range(n):
                take_second = False
                if cross:
                    if left == 0:
                        bits = _next(state)
                        left = 64
                    take_second = (bits & np.uint64(1)) == np.uint64(1)
                    bits >>= np.uint64(1)
                    left -= 1
                if take_second:
                    new[i, j] = pop[p2, j]
                    if i + 1 < P:
                        new[i + 1, j] = pop[p1, j]
                else:
                    new[i, j] = pop[p1, j]
                    if i + 1 < P:
                        new[i + 1, j] = pop[p2, j]
            i += 2
        # bit-flip mutation: jump between flipped genes with geometric gaps
        total = (P - 1) * n
        if pm >= 1.0:
            for r in range(1, P):
                for j in range(n):
                    new[r, j] ^= 1
        elif pm > 0.0 and total > 0:
            pos = -1
            while True:
                pos += 1 + int(np.log(1.0 - _uniform(state)) / lq)
                if pos >= total:
                    break
                new[1 + pos // n, pos % n] ^= 1
        for r in range(1, P):
            for j in range(n):
                if forced[j]:
                    new[r, j] = 1
        pop, new = new, pop
    return best, hist


@dataclass(frozen=True)
class GaResult:
    genes: np.ndarray
    fitness: float
    history: np.ndarray = field(repr=False)


def run_ga(ctx: SlotContext, params: GaParams = GaParams(), seed: int = 0) -> GaResult:
    """Generational GA with tournament-2 selection, uniform crossover,
    bit-flip mutation and one elite; returns the best candidate ever seen.

    ``history[g]`` is the best fitness after generation ``g`` (index 0 is the
    initial population).
    """
    if ctx.size == 0:
        empty = np.zeros(0, dtype=np.uint8)
        f = scalarize(evaluate_objectives(empty, ctx), params)
        return GaResult(empty, f, np.full(params.generations + 1, f))
    wc, wg, wd = params.weights
    best, hist = _evolve(
        ctx.power_kw, ctx.delay_slots, ctx.forced, float(ctx.nonflex_kw), float(ctx.pv_avail_kw),
        float(ctx.traded_in_kw), float(ctx.traded_signed_kw * ctx.smp / 6), float(ctx.ec), float(ctx.pw_max),
        wc, wg, wd, float(params.penalty_per_kw), GRID_MARGIN_KW, int(params.population), int(params.generations),
        float(params.crossover_prob), float(params.mutation_prob), int(seed) & 0x7FFFFFFFFFFFFFFF,
    )
    return GaResult(best.astype(np.uint8), float(hist[-1]), hist)


def ga_optimize(ctx: SlotContext, params: GaParams = GaParams(), rng: np.random.Generator | int = 0) -> np.ndarray:
    """Best switching vector for the slot (1 = run now)."""
    seed = int(rng.integers(0, 2**63)) if isinstance(rng, np.random.Generator) else int(rng)
    return run_ga(ctx, params, seed).genes


def exhaustive_optimum(ctx: SlotContext, params: GaParams = GaParams()) -> tuple[np.ndarray, float]:
    """Brute-force minimum over all 2^n gene vectors (small n only)."""
    if ctx.size > 20:
        raise ValueError("exhaustive search is limited to 20 genes")
    best_genes, best_fit = None, math.inf
    for code in range(1 << ctx.size):
        genes = np.array([(code >> j) & 1 for j in range(ctx.size)], dtype=np.uint8)
        if np.any(ctx.forced & (genes == 0)):
            continue
        f = scalarize(evaluate_objectives(genes, ctx), params)
        if f < best_fit:
            best_genes, best_fit = genes, f
    return best_genes, best_fit


def advance_delays(pending: list[LoadRequest], genes: Sequence[int], d_max: int) -> list[LoadRequest]:
    """Apply one slot of the schedule to the pending requests, in place.

    Deferred requests age by one slot. A request that runs consumes one slot
    of its duration (EVs also store this slot's energy); it is dropped from
    the returned list when finished. A request that runs but is not finished
    stays in the list; the caller decides whether it keeps competing (EVs)
    or runs to completion (appliances).
    """
    if len(genes) != len(pending):
        raise ValueError("genes and pending lists differ in length")
    out = []
    for req, gene in zip(pending, genes):
        if gene:
            if req.is_ev:
                stored = min(req.energy_kwh, req.demand_kw() * req.efficiency / 6)
                req.energy_kwh = max(0.0, req.energy_kwh - stored)
                req.remaining_slots -= 1
                if req.energy_kwh <= 1e-9:
                    continue
                req.remaining_slots = max(req.remaining_slots, 1)
            else:
                req.remaining_slots -= 1
                if req.remaining_slots <= 0:
                    continue
            out.append(req)
        else:
            req.accumulated_delay_slots += 1
            if req.accumulated_delay_slots > d_max:
                raise AssertionError(
                    f"request {req.appliance_index} of house {req.house} deferred beyond d_max={d_max}"
                )
            out.append(req)
    return out


def is_forced(req: LoadRequest, now_abs: int, d_max: int) -> bool:
    """Whether the request must run this slot to respect its deadline."""
    if req.is_ev:
        return req.remaining_slots >= req.deadline_slot - now_abs
    return req.accumulated_delay_slots >= d_max


def ev_charging_feasible(remaining: Sequence[int], slots_left: Sequence[int], max_parallel: int) -> bool:
    """Whether every EV can still finish when at most ``max_parallel`` charge per slot.

    EV ``i`` needs ``remaining[i]`` charging slots within the next
    ``slots_left[i]`` slots and can use at most one charger slot per slot.
    Within the first ``h`` slots, EV ``i`` must already have charged
    ``remaining[i] - (slots_left[i] - h)`` slots; the schedule exists iff
    that forced work never exceeds ``max_parallel * h``. Finished sessions
    are ignored.
    """
    pairs = [(r, L) for r, L in zip(remaining, slots_left) if r > 0]
    remaining, slots_left = [r for r, _ in pairs], [L for _, L in pairs]
    if any(r > L for r, L in zip(remaining, slots_left)):
        return False
    for h in range(1, max(slots_left, default=0) + 1):
        must = sum(max(0, r - max(0, L - h)) for r, L in zip(remaining, slots_left))
        if must > max_parallel * h:
            return False
    return True


def forced_ev_mask(remaining: Sequence[int], slots_left: Sequence[int], max_parallel: int) -> np.ndarray:
    """Smallest set of EVs that must charge this slot to keep all deadlines.

    EVs are added in order of least slack until the sessions left after this
    slot are feasible with ``max_parallel`` chargers. If no set works, all
    EVs are forced.
    """
    remaining = np.asarray(remaining, dtype=int)
    slots_left = np.asarray(slots_left, dtype=int)
    forced = np.zeros(len(remaining), dtype=bool)
    for i in [*np.argsort(slots_left - remaining, kind="stable"), None]:
        after = np.maximum(remaining - forced, 0)
        if ev_charging_feasible(after.tolist(), (slots_left - 1).tolist(), max_parallel):
            return forced
        if i is None:
            break
        forced[i] = True
    return np.ones(len(remaining), dtype=bool)


# kW kept free for base load and HVAC when deciding how many EVs may charge at once
EV_RESERVE_KW = 2.5


def ev_parallel_limit(pw_max: float, charge_rate_kw: float, reserve_kw: float = EV_RESERVE_KW) -> int:
    """Number of EVs that can charge together under the grid cap, at least one."""
    return max(1, int((pw_max - GRID_MARGIN_KW - reserve_kw) // charge_rate_kw))


def forced_mask(pending: Sequence[LoadRequest], now_abs: int, d_max: int, max_parallel_ev: int) -> np.ndarray:
    """Requests that must run this slot.

    Appliances are forced once their delay reaches ``d_max``. EVs are forced
    early enough that all sessions can finish by their deadlines with at most
    ``max_parallel_ev`` charging in any slot.
    """
    forced = np.array([not r.is_ev and is_forced(r, now_abs, d_max) for r in pending], dtype=bool)
    ev_idx = [i for i, r in enumerate(pending) if r.is_ev]
    if ev_idx:
        ev_forced = forced_ev_mask([pending[i].remaining_slots for i in ev_idx],
                                   [pending[i].deadline_slot - now_abs for i in ev_idx], max_parallel_ev)
        forced[ev_idx] = ev_forced
    return forced
