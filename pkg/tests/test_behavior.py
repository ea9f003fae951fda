from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanogrid_p2p.behavior import (
    EV_INDEX,
    EmissionProfile,
    EvModel,
    LoadRequest,
    MobilityModel,
    default_catalog,
    default_emission_profiles,
    ev_required_slots,
    new_ev_session,
    sample_ev_arrival,
    sample_requests,
    step_resident,
)
from nanogrid_p2p.core import TimeSlot
from nanogrid_p2p.scheduler import advance_delays


def _room_frequencies(start, model, rng, n=100_000):
    counts = np.zeros(4)
    for _ in range(n):
        counts[step_resident(start, model, rng) - 1] += 1
    return counts / n


def test_deterministic_row(rng):
    P = np.full((4, 4), 0.25)
    P[0] = [1, 0, 0, 0]
    model = MobilityModel(P)
    assert all(step_resident(1, model, rng) == 1 for _ in range(1000))


def test_default_mobility_room1(rng):
    freq = _room_frequencies(1, MobilityModel(), rng)
    np.testing.assert_allclose(freq, 0.25, atol=0.01)


def test_default_mobility_room2(rng):
    freq = _room_frequencies(2, MobilityModel(), rng)
    # room 2 may stay, go to room 1 or to room 3
    np.testing.assert_allclose(freq[[0, 1, 2]], 1 / 3, atol=0.01)
    assert freq[3] == 0


def test_mobility_rows_validated():
    with pytest.raises(ValueError):
        MobilityModel(np.full((4, 4), 0.3))


def test_no_requests_when_probabilities_zero(rng):
    for room in range(1, 5):
        assert sample_requests(60, room, EmissionProfile.zeros(), default_catalog(), rng) == []


def test_certain_washing_machine_request(rng):
    prof = EmissionProfile.zeros().with_probability(7, 1.0)
    reqs = sample_requests(60, 2, prof, default_catalog(), rng)
    assert len(reqs) == 1
    assert reqs[0].appliance_index == 7 and reqs[0].power_kw == pytest.approx(0.242)
    assert not reqs[0].immediate


def test_emission_frequency(rng):
    prof = EmissionProfile.zeros().with_probability(7, 0.3)
    cat = default_catalog()
    hits = sum(len(sample_requests(60, 2, prof, cat, rng)) for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.3, abs=0.01)


def test_default_profiles_are_probabilities():
    p = default_emission_profiles().probability
    assert p.shape == (13, 144)
    assert np.all((p >= 0) & (p <= 1))
    assert p[1:4].sum() == 0


def test_ev_arrival_rules(rng):
    ev = EvModel()
    assert not any(sample_ev_arrival(9, ev, True, rng) for _ in range(100))
    probs = np.zeros(24)
    probs[9] = 0.12
    ev = EvModel(arrival_prob=probs)
    assert not any(sample_ev_arrival(3, ev, False, rng) for _ in range(100))
    hits = sum(sample_ev_arrival(9, ev, False, rng) for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(0.12, abs=0.01)


def test_ev_required_slots():
    assert ev_required_slots(EvModel()) == 27
    assert ev_required_slots(EvModel(initial_soc=0.999)) == 1
    assert ev_required_slots(EvModel(capacity_kwh=1.0, initial_soc=0.0, charge_rate_kw=6.0, efficiency=1.0)) == 1
    with pytest.raises(ValueError):
        EvModel(initial_soc=1.0)


@given(st.floats(0.0, 0.95), st.floats(5, 80), st.floats(1, 11), st.floats(0.5, 1.0))
def test_ev_session_delivers_exact_energy(soc, cap, rate, eff):
    ev = EvModel(capacity_kwh=cap, initial_soc=soc, charge_rate_kw=rate, efficiency=eff)
    req = new_ev_session(ev, 0, TimeSlot(0, 60), 10_000)
    stored = drawn = 0.0
    pending = [req]
    while pending:
        kw = pending[0].demand_kw()
        before = pending[0].energy_kwh
        pending = advance_delays(pending, [1], 10_000)
        after = pending[0].energy_kwh if pending else 0.0
        stored += before - after
        drawn += kw / 6
    assert stored == pytest.approx(ev.energy_to_store_kwh, abs=1e-9)
    assert drawn == pytest.approx(ev.energy_to_store_kwh / eff, abs=1e-9)


def test_behavior_stream_reproducible():
    def stream(seed):
        r = np.random.default_rng(seed)
        model, prof, cat = MobilityModel(), default_emission_profiles(), default_catalog()
        room, out = 1, []
        for s in range(144):
            room = step_resident(room, model, r)
            out.append((room, [q.appliance_index for q in sample_requests(s, room, prof, cat, r)]))
        return out

    assert stream(3) == stream(3)


def test_load_request_ev_demand():
    req = LoadRequest(EV_INDEX, 0, TimeSlot(0, 0), 2, energy_kwh=0.1, charge_rate_kw=3.0, efficiency=0.5)
    # 0.1 kWh stored needs 0.2 kWh drawn, i.e. 1.2 kW over one slot
    assert req.demand_kw() == pytest.approx(1.2)
