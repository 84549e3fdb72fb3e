import threading
import time

import pytest

from riskprobe.backends import GateClosed, RateGate


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


def test_max_in_flight_is_never_exceeded():
    gate = RateGate(max_in_flight=2)
    peak = 0
    lock = threading.Lock()

    def worker():
        nonlocal peak
        with gate.slot():
            with lock:
                peak = max(peak, gate.in_flight)
            time.sleep(0.01)

    threads = [threading.Thread(target=worker) for _ in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak == 2
    assert gate.in_flight == 0


def test_window_limit_with_fake_clock():
    clock = FakeClock()
    gate = RateGate(requests_per_interval=3, interval_s=10.0, clock=clock)
    for _ in range(3):
        with gate.slot():
            pass
    admitted = threading.Event()

    def fourth():
        with gate.slot():
            admitted.set()

    t = threading.Thread(target=fourth)
    t.start()
    assert not admitted.wait(0.1)
    clock.now = 10.0
    # the waiter re-checks after its computed timeout elapses in real time
    with gate._cond:
        gate._cond.notify_all()
    assert admitted.wait(2)
    t.join()


def test_window_limit_real_time():
    gate = RateGate(requests_per_interval=3, interval_s=0.2)
    start = time.monotonic()
    for _ in range(6):
        with gate.slot():
            pass
    # the second batch of three has to wait for the first window to pass
    assert time.monotonic() - start >= 0.19


def test_unlimited_gate():
    gate = RateGate()
    assert gate.unlimited
    for _ in range(1000):
        with gate.slot():
            pass


def test_close_wakes_waiters():
    gate = RateGate(max_in_flight=1)
    gate.acquire()
    errors = []

    def waiter():
        try:
            gate.acquire()
        except GateClosed as exc:
            errors.append(exc)

    t = threading.Thread(target=waiter)
    t.start()
    time.sleep(0.05)
    gate.close()
    t.join(2)
    assert not t.is_alive() and len(errors) == 1
    with pytest.raises(GateClosed):
        gate.acquire()


@pytest.mark.parametrize("kw", [{"requests_per_interval": 0}, {"max_in_flight": 0}, {"interval_s": 0}])
def test_invalid_limits(kw):
    with pytest.raises(ValueError):
        RateGate(**kw)


def test_to_dict():
    assert RateGate(5, 1.0, 2).to_dict() == {"requests_per_interval": 5, "interval_s": 1.0, "max_in_flight": 2}
