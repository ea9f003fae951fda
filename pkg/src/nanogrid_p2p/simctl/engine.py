"""The per-slot simulation loop over all clusters.

Slot order: residents move and emit requests; thermostats decide HVAC;
the unscheduled load is formed; roles are assigned and the market is
cleared (P2P schemes only); each cluster's GA picks which flexible loads
run; power is allocated, the rooms, EVs and delays are stepped; costs and
logs are recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..accounting import DEFAULT_TARIFF, CostLedger, SmpCurve, Tariff, load_smp
from ..behavior import (
    ROOMS,
    ApplianceSpec,
    EmissionProfile,
    EvModel,
    LoadRequest,
    MobilityModel,
    default_catalog,
    default_emission_profiles,
    load_emission_profiles,
    load_ev_arrival,
    new_ev_session,
    sample_ev_arrival,
    sample_requests,
    step_resident,
)
from ..core import SLOTS_PER_DAY, SLOTS_PER_HOUR, RpvClass, ScenarioConfig, Scheme, TimeSlot
from ..environment import (
    PUBLISHED_PEAKS_KW,
    ReferenceCurve,
    WeatherProfile,
    draw_cluster_peaks,
    load_reference_curve,
    load_weather,
)
from ..forecaster import INPUT_STEPS, ModelStore, persistence_forecast
from ..hvac import AC_KW, HEATER_KW, HvacCommand, RoomState, ThermalParams, hvac_control, step_co2, step_thermal
from ..scheduler import GRID_MARGIN_KW, GaParams, SlotContext, allocate_power, ev_parallel_limit, forced_mask, run_ga
from ..trading import IDLE, OrderBook, Role, TradeRole, clear_market, role_conventional, role_proposed

# random stream purposes; a stream is keyed by (seed, cluster, house, purpose)
MOBILITY, REQUESTS, EV_ARRIVALS, ROOM_INIT = 0, 1, 2, 3
PV_PEAKS, GA = 10, 11

BALANCE_TOL_KW = 1e-9


def stream(seed: int, purpose: int, cluster: int = 0, house: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(cluster, house, purpose)))


@dataclass
class Inputs:
    """Exogenous data shared by every cluster of a run."""

    catalog: list[ApplianceSpec]
    profiles: EmissionProfile
    mobility: MobilityModel
    ev: EvModel
    thermal: ThermalParams
    weather: WeatherProfile
    pv_curve: ReferenceCurve
    tariff: Tariff
    smp: SmpCurve
    ga: GaParams

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Inputs":
        ev_kwargs = dict(cfg.ev)
        if cfg.ev_arrival_csv:
            ev_kwargs["arrival_prob"] = load_ev_arrival(cfg.ev_arrival_csv)
        if "arrival_prob" in ev_kwargs:
            ev_kwargs["arrival_prob"] = np.asarray(ev_kwargs["arrival_prob"], dtype=float)
        return cls(
            catalog=default_catalog(),
            profiles=load_emission_profiles(cfg.emission_csv) if cfg.emission_csv else default_emission_profiles(),
            mobility=MobilityModel(),
            ev=EvModel(**ev_kwargs),
            thermal=ThermalParams(**cfg.thermal),
            weather=load_weather(cfg.weather_csv) if cfg.weather_csv else WeatherProfile(),
            pv_curve=load_reference_curve(cfg.reference_curve_csv) if cfg.reference_curve_csv else ReferenceCurve.default(),
            tariff=DEFAULT_TARIFF,
            smp=load_smp(cfg.smp_csv) if cfg.smp_csv else SmpCurve(),
            ga=GaParams.from_dict(cfg.ga),
        )


def cluster_peaks(cfg: ScenarioConfig) -> list[float]:
    if cfg.rpv_class is RpvClass.FIXED:
        return list(cfg.fixed_peaks_kw)
    if cfg.fixed_peaks_kw is not None:
        return list(cfg.fixed_peaks_kw)
    if cfg.use_published_peaks:
        peaks = PUBLISHED_PEAKS_KW[cfg.rpv_class]
        if len(peaks) != cfg.cluster_count:
            raise ValueError(f"published peaks exist for {len(peaks)} clusters, not {cfg.cluster_count}")
        return list(peaks)
    return draw_cluster_peaks(cfg.rpv_class, cfg.cluster_count, stream(cfg.seed, PV_PEAKS))


@dataclass
class House:
    room: int
    temp_c: np.ndarray
    co2_ppm: np.ndarray
    rng_mobility: np.random.Generator
    rng_requests: np.random.Generator
    rng_ev: np.random.Generator
    ev_busy_until: int = -1


@dataclass
class Cluster:
    index: int
    peak_kw: float
    pv_kw: np.ndarray
    houses: list[House]
    pending: list[LoadRequest] = field(default_factory=list)
    running: list[LoadRequest] = field(default_factory=list)
    history: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class Violation:
    kind: str
    abs_slot: int
    cluster: int
    detail: str


@dataclass
class EvSession:
    cluster: int
    house: int
    arrival_slot: int
    deadline_slot: int
    energy_kwh: float
    stored_kwh: float = 0.0
    drawn_kwh: float = 0.0
    completed_slot: int | None = None


@dataclass
class SlotRecord:
    """Per-slot, per-cluster quantities kept for logs and audits."""

    pw_load: np.ndarray
    unscheduled: np.ndarray
    pv: np.ndarray
    pv_self: np.ndarray
    pv_traded: np.ndarray
    grid: np.ndarray
    hvac: np.ndarray
    ev: np.ndarray
    total_delay: np.ndarray
    hvac_shed: np.ndarray

    @classmethod
    def empty(cls, clusters: int, slots: int) -> "SlotRecord":
        return cls(*(np.zeros((clusters, slots)) for _ in range(10)))


@dataclass
class SimulationResult:
    config: ScenarioConfig
    peaks_kw: list[float]
    records: SlotRecord
    ledger: CostLedger
    trades: list[tuple]
    schedule: list[tuple]
    ev_sessions: list[EvSession]
    violations: list[Violation]
    max_delay: int

    @property
    def ev_arrivals(self) -> list[tuple[int, int, int]]:
        return [(s.arrival_slot, s.cluster, s.house) for s in self.ev_sessions]


class Simulation:
    def __init__(self, cfg: ScenarioConfig, inputs: Inputs | None = None, models: ModelStore | None = None):
        self.cfg = cfg
        self.inputs = inputs or Inputs.from_config(cfg)
        self.peaks = cluster_peaks(cfg)
        self.models = None
        if cfg.scheme is Scheme.PROPOSED_P2P:
            self.models = [self._model_for(models, p) for p in self.peaks]

    def _model_for(self, store: ModelStore | None, peak: float):
        store = store or ModelStore([self.cfg.forecaster_dir] if self.cfg.forecaster_dir else None)
        if self.cfg.allow_training and store.path_for(peak) is None:
            from .runner import train_model_for_peak
            store.put(peak, train_model_for_peak(self.cfg, peak))
        return store.get(peak)

    def _init_clusters(self) -> list[Cluster]:
        cfg, seed = self.cfg, self.cfg.seed
        clusters = []
        for c in range(cfg.cluster_count):
            houses = []
            for h in range(cfg.houses_per_cluster):
                init = stream(seed, ROOM_INIT, c, h)
                houses.append(House(
                    room=int(init.integers(1, ROOMS + 1)),
                    temp_c=init.uniform(23.5, 25.5, ROOMS),
                    co2_ppm=init.uniform(450.0, 550.0, ROOMS),
                    rng_mobility=stream(seed, MOBILITY, c, h),
                    rng_requests=stream(seed, REQUESTS, c, h),
                    rng_ev=stream(seed, EV_ARRIVALS, c, h),
                ))
            clusters.append(Cluster(c, self.peaks[c], self.inputs.pv_curve.profile(self.peaks[c]), houses))
        return clusters

    def run(self) -> SimulationResult:
        cfg, inp = self.cfg, self.inputs
        max_ev = ev_parallel_limit(cfg.pw_max_kw, inp.ev.charge_rate_kw)
        n_slots = cfg.days * SLOTS_PER_DAY
        C = cfg.cluster_count
        clusters = self._init_clusters()
        rec = SlotRecord.empty(C, n_slots)
        ledger = CostLedger(C, n_slots)
        trades: list[tuple] = []
        schedule: list[tuple] = []
        sessions: dict[int, EvSession] = {}
        all_sessions: list[EvSession] = []
        violations: list[Violation] = []
        max_delay = 0
        ga_seeds = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0, 0, GA)).generate_state(n_slots * C, np.uint64)

        for n in range(n_slots):
            ts = TimeSlot.from_absolute(n)
            s = ts.slot_of_day
            t_out = float(inp.weather.outdoor_temp_c[s])
            ec = float(inp.tariff.rate[s])
            smp = float(inp.smp.price[s])

            # 1-2: behaviour, thermostats and the unscheduled load
            desired: list[HvacCommand] = []
            occupied_all = []
            unscheduled = np.zeros(C)
            for cl in clusters:
                self._sample_behaviour(cl, ts, sessions, all_sessions)
                occupied = np.array([[h.room == r + 1 for r in range(ROOMS)] for h in cl.houses])
                temps = np.array([h.temp_c for h in cl.houses])
                co2 = np.array([h.co2_ppm for h in cl.houses])
                cmd = hvac_control(RoomState(temps, co2), occupied, inp.thermal)
                desired.append(cmd)
                occupied_all.append(occupied)
                hvac_kw = float(np.sum(cmd.power_kw))
                load = (math.fsum(r.power_kw for r in cl.running)
                        + math.fsum(r.demand_kw() for r in cl.pending) + hvac_kw)
                unscheduled[cl.index] = load
                cl.history.append((load, float(cl.pv_kw[s])))
            pv_now = np.array([cl.pv_kw[s] for cl in clusters])

            # 3-4: roles and market
            traded = np.zeros(C)
            if cfg.scheme is not Scheme.WITHOUT_P2P:
                roles = {}
                for cl in clusters:
                    role = self._role(cl, unscheduled[cl.index], pv_now[cl.index])
                    roles[cl.index] = self._cap_role(role, unscheduled[cl.index], pv_now[cl.index])
                book = OrderBook.from_roles(roles)
                alloc = clear_market(book)
                for c, q in alloc.traded_kw.items():
                    traded[c] = q
                for c, role in roles.items():
                    if role.role is not Role.IDLE:
                        trades.append((ts.day, s, c + 1, role.role.name.capitalize(), role.amount_kw,
                                       abs(traded[c]), smp, traded[c] * smp / 6))

            # 5-6: scheduling, allocation and plant update per cluster
            for cl in clusters:
                c = cl.index
                traded_in = max(0.0, traded[c])
                pv_avail = max(0.0, pv_now[c] + min(0.0, traded[c]))
                base_kw = math.fsum(r.power_kw for r in cl.running)
                forced = forced_mask(cl.pending, n, cfg.d_max_slots, max_ev)
                power = np.array([r.demand_kw() for r in cl.pending])
                delay = np.array([r.accumulated_delay_slots for r in cl.pending], dtype=float)
                forced_kw = math.fsum(power[forced]) if len(power) else 0.0

                cmd, shed = self._guard_hvac(desired[c], occupied_all[c],
                                             cfg.pw_max_kw + pv_avail + traded_in - base_kw - forced_kw)
                hvac_kw = float(np.sum(cmd.power_kw))
                nonflex = base_kw + hvac_kw

                ctx = SlotContext(power, delay, forced, nonflex, pv_avail, traded_in, traded[c], ec, smp, cfg.pw_max_kw)
                if ctx.size == 0 or forced.all():
                    genes = np.ones(ctx.size, dtype=np.uint8)
                else:
                    genes = run_ga(ctx, inp.ga, int(ga_seeds[n * C + c])).genes
                genes = genes.astype(bool) | forced
                flex_kw = math.fsum(power[genes]) if len(power) else 0.0
                ev_kw = math.fsum(p for p, g, r in zip(power, genes, cl.pending) if g and r.is_ev)
                split = allocate_power(nonflex, flex_kw, pv_avail, traded_in, cfg.pw_max_kw, check=False)

                for r, g, f in zip(cl.pending, genes, forced):
                    action = "force" if f else ("run" if g else "defer")
                    schedule.append((ts.day, s, c + 1, r.appliance_index, action,
                                     r.accumulated_delay_slots + (0 if g else 1)))

                # audits on the applied schedule
                pw_load = nonflex + flex_kw
                if split.grid_kw >= cfg.pw_max_kw:
                    violations.append(Violation("grid", n, c, f"grid {split.grid_kw:.6f} kW >= {cfg.pw_max_kw}"))
                if split.pv_self_kw > pv_now[c] + BALANCE_TOL_KW:
                    violations.append(Violation("pv_self", n, c, f"self PV {split.pv_self_kw} > {pv_now[c]}"))
                if abs(split.pv_self_kw + split.pv_traded_kw + split.grid_kw - pw_load) > BALANCE_TOL_KW:
                    violations.append(Violation("balance", n, c, "load != pv_self + pv_traded + grid"))

                self._advance(cl, genes, n, sessions)
                for r in cl.pending:
                    max_delay = max(max_delay, r.accumulated_delay_slots)
                    if r.accumulated_delay_slots > cfg.d_max_slots:
                        violations.append(Violation("delay", n, c, f"appliance {r.appliance_index} delay "
                                                                  f"{r.accumulated_delay_slots}"))

                # room plant
                for h, house in enumerate(cl.houses):
                    sub = HvacCommand(cmd.cool_on[h], cmd.heat_on[h], cmd.fan_on[h])
                    state = RoomState(house.temp_c, house.co2_ppm)
                    house.temp_c = step_thermal(state, sub, t_out, inp.thermal)
                    house.co2_ppm = step_co2(state, sub.fan_on, occupied_all[c][h], inp.weather.outdoor_co2_ppm,
                                             inp.thermal)

                grid_usd = split.grid_kw * ec / 6
                trade_usd = traded[c] * smp / 6
                ledger.record(c, n, grid_usd, trade_usd)
                rec.pw_load[c, n] = pw_load
                rec.unscheduled[c, n] = unscheduled[c]
                rec.pv[c, n] = pv_now[c]
                rec.pv_self[c, n] = split.pv_self_kw
                rec.pv_traded[c, n] = split.pv_traded_kw
                rec.grid[c, n] = split.grid_kw
                rec.hvac[c, n] = hvac_kw
                rec.ev[c, n] = ev_kw
                rec.total_delay[c, n] = math.fsum(r.accumulated_delay_slots for r in cl.pending)
                rec.hvac_shed[c, n] = shed

        for sess in all_sessions:
            if sess.completed_slot is None and sess.deadline_slot <= n_slots:
                violations.append(Violation("ev", sess.deadline_slot, sess.cluster,
                                            f"house {sess.house} EV not full by its deadline"))
        return SimulationResult(cfg, self.peaks, rec, ledger, trades, schedule, all_sessions, violations, max_delay)

    # --- pieces of the loop ----------------------------------------------------

    def _sample_behaviour(self, cl: Cluster, ts: TimeSlot, sessions: dict, all_sessions: list) -> None:
        cfg, inp = self.cfg, self.inputs
        n = ts.absolute
        for h, house in enumerate(cl.houses):
            house.room = step_resident(house.room, inp.mobility, house.rng_mobility)
            for req in sample_requests(ts, house.room, inp.profiles, inp.catalog, house.rng_requests, house=h):
                (cl.running if req.immediate else cl.pending).append(req)
            if ts.slot_of_day % SLOTS_PER_HOUR == 0:
                busy = n < house.ev_busy_until
                if sample_ev_arrival(ts.hour, inp.ev, busy, house.rng_ev):
                    req = new_ev_session(inp.ev, h, ts, cfg.d_max_slots)
                    cl.pending.append(req)
                    # the charger stays reserved until the deadline in every scheme
                    house.ev_busy_until = req.deadline_slot
                    sess = EvSession(cl.index, h, n, req.deadline_slot, req.energy_kwh)
                    sessions[id(req)] = sess
                    all_sessions.append(sess)

    def _role(self, cl: Cluster, load: float, pv: float) -> TradeRole:
        cfg = self.cfg
        if cfg.scheme is Scheme.CONVENTIONAL_P2P:
            return role_conventional(load, pv, cfg.pw_max_kw)
        hist = np.array(cl.history[-INPUT_STEPS:])
        # the first slots of a run have too little history for the network
        if len(cl.history) <= INPUT_STEPS:
            fc = persistence_forecast(hist)
        else:
            fc = self.models[cl.index].forecast(hist)
        fc = fc[: cfg.horizon_k]
        return role_proposed((load, pv), [tuple(r) for r in fc], cfg.pw_max_kw, cfg.horizon_k,
                             cfg.average_horizon_amount)

    @staticmethod
    def _cap_role(role: TradeRole, load: float, pv: float) -> TradeRole:
        """Offers are limited to this slot's surplus and bids to this slot's deficit."""
        if role.role is Role.SELL:
            return role.capped(max(0.0, pv - load))
        if role.role is Role.BUY:
            return role.capped(max(0.0, load - pv))
        return IDLE

    def _guard_hvac(self, cmd: HvacCommand, occupied: np.ndarray, headroom_kw: float) -> tuple[HvacCommand, float]:
        """Hold cooling/heating back for one slot when HVAC would push the grid to pw_max.

        Vacant rooms are held back first, then occupied ones; fans always run.
        Returns the applied command and the kW held back.
        """
        limit = headroom_kw - GRID_MARGIN_KW
        total = float(np.sum(cmd.power_kw))
        if total < limit:
            return cmd, 0.0
        cool, heat = cmd.cool_on.copy(), cmd.heat_on.copy()
        order = [idx for occ in (False, True) for idx in zip(*np.nonzero((cool | heat) & (occupied == occ)))]
        shed = 0.0
        for idx in order:
            if total - shed < limit:
                break
            shed += AC_KW if cool[idx] else HEATER_KW
            cool[idx] = heat[idx] = False
        return HvacCommand(cool, heat, cmd.fan_on), shed

    def _advance(self, cl: Cluster, genes: np.ndarray, n: int, sessions: dict) -> None:
        # started appliances keep running; those already running use up this slot
        still = []
        for r in cl.running:
            r.remaining_slots -= 1
            if r.remaining_slots > 0:
                still.append(r)
        cl.running = still
        pending = []
        for r, g in zip(cl.pending, genes):
            if not g:
                r.accumulated_delay_slots += 1
                pending.append(r)
            elif r.is_ev:
                sess = sessions[id(r)]
                drawn = r.demand_kw() / 6
                stored = min(r.energy_kwh, drawn * r.efficiency)
                r.energy_kwh -= stored
                r.remaining_slots -= 1
                sess.stored_kwh += stored
                sess.drawn_kwh += drawn
                if r.energy_kwh <= 1e-9:
                    sess.completed_slot = n + 1
                else:
                    r.remaining_slots = max(r.remaining_slots, 1)
                    pending.append(r)
            else:
                r.remaining_slots -= 1
                if r.remaining_slots > 0:
                    cl.running.append(r)
        cl.pending = pending
