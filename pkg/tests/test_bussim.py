import pytest

from conftest import DST, SRC, fixture_apdu, fixture_frame
from goosesec.bussim import ATTACK, LEGIT, Bus, PublisherActor, SchedulingError, Subscriber, SwitchRule, VirtualClock
from goosesec.codec import EthernetHeader, VlanTag, encode_frame
from goosesec.ids import StreamKey
from goosesec.pipeline import FilterPipeline, Mode
from goosesec.transmission import Publisher


def test_clock_orders_by_time_then_insertion():
    clock = VirtualClock()
    seen = []
    clock.schedule("a", 5, lambda: seen.append("a5"))
    clock.schedule("b", 1, lambda: seen.append("b1"))
    clock.schedule("c", 5, lambda: seen.append("c5"))
    clock.schedule("d", 1, lambda: clock.schedule("e", 1, lambda: seen.append("e1")))
    assert clock.run_until(10) == 5
    assert seen == ["b1", "e1", "a5", "c5"]
    assert clock.now == 10
    with pytest.raises(SchedulingError):
        clock.schedule("late", 3, lambda: None)


def test_taps_subscribers_and_log():
    bus = Bus(hop_delay=0.01)
    tapped, got = [], []
    bus.tap(lambda t, d, r: tapped.append(r["id"]))
    bus.attach("s", lambda t, d, r: got.append((t, d)))
    wire = encode_frame(fixture_frame())
    bus.clock.schedule("x", 1.0, lambda: bus.inject("x", wire))
    bus.run_until(2)
    assert tapped == [0] and got == [(pytest.approx(1.02), wire)]
    assert [r["event"] for r in bus.log] == ["tx", "forward", "arrive"]
    assert bus.log_lines().count("\n") == 3


def test_switch_rule_count_and_window():
    bus = Bus()
    got = []
    bus.attach("s", lambda t, d, r: got.append(t))
    rule = bus.add_rule(SwitchRule("drop", stream=StreamKey(SRC, 0x1000, "IED1_GOOSE1"), start=2, max_count=2))
    wire = encode_frame(fixture_frame())
    for t in range(5):
        bus.clock.schedule("x", t, lambda: bus.inject("x", wire))
    other = encode_frame(fixture_frame(go_id="OTHER"))
    bus.clock.schedule("x", 2.5, lambda: bus.inject("x", other))
    bus.run_until(10)
    assert got == [0, 1, 2.5, 4] and rule.hits == 2


def test_publisher_actor_and_watchdog(keystore):
    bus = Bus()
    eth = EthernetHeader(DST, SRC, VlanTag())
    actor = PublisherActor(bus, Publisher(fixture_apdu(st_num=1, sq_num=0)), eth, 0x1000)
    sub = Subscriber(bus, FilterPipeline(Mode.IDS_ONLY)).attach()
    actor.start()
    actor.schedule_event(1500, (False,))
    bus.add_rule(SwitchRule("drop", start=4000, end=8000))
    bus.run_until(10_000)
    sent = [r for r in bus.log if r["event"] == "tx"]
    assert actor.sent == len(sent)
    assert [round(r["t"]) for r in sent[:4]] == [0, 1000, 1500, 1502]
    assert all(v.delivered for _, v, _ in sub.results[:10])
    assert [f.rule for f in sub.expiry_flags] == ["TTL_EXPIRED"]
    assert all(r["origin"] == LEGIT for r in sent)


def test_undecodable_frames_are_reported():
    bus = Bus()
    sub = Subscriber(bus, FilterPipeline(Mode.IDS_ONLY)).attach()
    bus.clock.schedule("x", 0, lambda: bus.inject("x", b"\x01" * 20, ATTACK))
    bus.run_until(1)
    (rec, verdict, err) = sub.results[0]
    assert verdict is None and err.startswith("decode:")
