import numpy as np
import pytest

from samplepick.model import FlowKey, Packet, ZipfConfig, generate_zipf_trace


def key(i: int) -> FlowKey:
    return FlowKey(0x0A000000 + i, 0x0A000001, 1000 + i, 80, 6)


def packet(k: FlowKey, seq: int = 0, size: int = 64, checksum: int = 0, time_us: int | None = None):
    return Packet(seq if time_us is None else time_us, k, size, checksum, False, seq)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_trace():
    return generate_zipf_trace(ZipfConfig(flow_count=400, alpha=1.1, packet_count=40_000,
                                          rate=2_000.0, seed=3))


ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Log one checked part of an acceptance criterion."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{d} [{'ok' if ok else 'MISS'}]" for ok, d in parts)
        terminalreporter.write_line(f"criterion {n:2d} {verdict}: {detail}")
