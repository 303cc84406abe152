import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from goosesec.codec import EthernetHeader, GooseApdu, GooseFrame, GoosePdu, MacAddress, VlanTag
from goosesec.secure import KeyStore

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

KEY_ID = 0x0000000A
KEY = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
SENDER = 0x00000001
DST = MacAddress.parse("01:0c:cd:01:00:10")
SRC = MacAddress.parse("dc:37:52:0a:cf:c2")


def fixture_apdu(**kw) -> GooseApdu:
    fields = dict(
        gocb_ref="IED1LD0/LLN0$GO$gcbTrip",
        time_allowed_to_live=2000,
        dat_set="IED1LD0/LLN0$TripStatus",
        go_id="IED1_GOOSE1",
        t=1_750_000_002_000,
        st_num=1,
        sq_num=0,
        all_data=(True,),
    )
    fields.update(kw)
    return GooseApdu(**fields)


def fixture_frame(**kw) -> GooseFrame:
    return GooseFrame(EthernetHeader(DST, SRC, VlanTag(4, 0)), GoosePdu(0x1000, fixture_apdu(**kw)))


@pytest.fixture
def keystore() -> KeyStore:
    ks = KeyStore()
    ks.add_key(KEY_ID, KEY)
    ks.set_active(SENDER, KEY_ID)
    return ks


# -- hypothesis strategies ---------------------------------------------------

u32 = st.integers(0, 0xFFFFFFFF)
visible = st.text(st.characters(min_codepoint=0x20, max_codepoint=0x7E), min_size=1, max_size=129)


@st.composite
def macs(draw, multicast=None):
    octets = bytearray(draw(st.binary(min_size=6, max_size=6)))
    if multicast is True:
        octets[0] |= 1
    elif multicast is False:
        octets[0] &= 0xFE
    return MacAddress(bytes(octets))


apdus = st.builds(
    GooseApdu,
    gocb_ref=visible,
    time_allowed_to_live=st.integers(1, 0xFFFFFFFF),
    dat_set=visible,
    go_id=visible,
    t=st.integers(0, (0xFFFFFFFF + 1) * 1000 - 1),
    st_num=u32,
    sq_num=u32,
    test=st.booleans(),
    conf_rev=u32,
    nds_com=st.booleans(),
    all_data=st.lists(st.booleans(), max_size=40).map(tuple),
)

vlans = st.none() | st.builds(VlanTag, priority=st.integers(0, 7), vid=st.integers(0, 4095))


@st.composite
def frames(draw, secured=None):
    eth = EthernetHeader(draw(macs(multicast=True)), draw(macs()), draw(vlans))
    sec = draw(st.booleans()) if secured is None else secured
    reserved1 = draw(st.integers(0, 0x7FFF)) | (0x8000 if sec else 0)
    pdu = GoosePdu(draw(st.integers(0, 0xFFFF)), draw(apdus), reserved1, draw(st.integers(0, 0xFFFF)))
    ext = draw(st.binary(min_size=1, max_size=64)) if sec else None
    return GooseFrame(eth, pdu, ext)


# -- acceptance summary ----------------------------------------------------------

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion exercised by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    ok = report.passed or (report.when != "call" and not report.failed)
    prev_ok = _criteria.get(n, (title, True))[1]
    _criteria[n] = (title, prev_ok and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
