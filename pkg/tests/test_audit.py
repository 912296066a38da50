import json
import random
import re

import pytest

from mcp_guardian import audit


def test_trace_id_format_and_uniqueness():
    ids = {audit.new_trace_id() for _ in range(1000)}
    assert len(ids) == 1000
    for trace_id in list(ids)[:10]:
        assert re.fullmatch(r"[0-9a-f]{32}", trace_id)


def test_trace_id_seeded_reproducible():
    a = [audit.new_trace_id(random.Random(42)) for _ in range(3)]
    b = [audit.new_trace_id(random.Random(42)) for _ in range(3)]
    # fresh seeded rng per draw gives the same first id
    assert audit.new_trace_id(random.Random(1)) == audit.new_trace_id(random.Random(1))
    rng = random.Random(42)
    c = [audit.new_trace_id(rng) for _ in range(3)]
    assert len(set(c)) == 3


def make_record(**kw):
    base = dict(ts=1, trace_id="a" * 32, session_id="s")
    base.update(kw)
    return audit.AuditRecord(**base)


def test_record_appends_one_json_line(tmp_path):
    path = str(tmp_path / "audit.log")
    log = audit.AuditLog(path)
    log.record(make_record(verdict="waf_blocked", rule_id="destructive-shell"))
    log.record(make_record(verdict="allowed", downstream_ms=3))
    lines = open(path).read().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["verdict"] == "waf_blocked"
    assert first["rule_id"] == "destructive-shell"
    assert json.loads(lines[1])["downstream_ms"] == 3


def test_record_is_flushed_immediately(tmp_path):
    path = str(tmp_path / "audit.log")
    log = audit.AuditLog(path)
    log.record(make_record())
    # visible to an independent reader before close (write-ahead contract)
    assert len(open(path).read().splitlines()) == 1
    log.close()


def test_closed_sink_raises(tmp_path):
    log = audit.AuditLog(str(tmp_path / "audit.log"))
    log.close()
    with pytest.raises(audit.SinkIoError):
        log.record(make_record())


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(audit.SinkIoError):
        audit.AuditLog(str(tmp_path / "missing-dir" / "audit.log"))


def test_detail_capped_at_256():
    rec = make_record(detail="x" * 1000)
    assert len(rec.to_dict()["detail"]) == 256


def test_flood_record_count(tmp_path):
    path = str(tmp_path / "audit.log")
    log = audit.AuditLog(path)
    for i in range(100):
        log.record(make_record(ts=i))
    assert len(open(path).read().splitlines()) == 100


# -- remote shipping ----------------------------------------------------------


class FakeTransport:
    def __init__(self, fail_times=0):
        self.fail_times = fail_times
        self.posts = []

    def __call__(self, endpoint, body):
        if self.fail_times > 0:
            self.fail_times -= 1
            raise ConnectionError("unreachable")
        self.posts.append((endpoint, body))
        return True


def test_ship_remote_posts_json_array():
    transport = FakeTransport()
    ok = audit.ship_remote([make_record(), make_record()], "http://collector",
                           transport=transport)
    assert ok
    assert len(transport.posts) == 1
    endpoint, body = transport.posts[0]
    assert endpoint == "http://collector"
    assert isinstance(body, list) and len(body) == 2


def test_ship_remote_empty_batch_no_post():
    transport = FakeTransport()
    assert audit.ship_remote([], "http://collector", transport=transport)
    assert transport.posts == []


def test_ship_remote_retries_then_succeeds():
    transport = FakeTransport(fail_times=2)
    ok = audit.ship_remote([make_record()], "http://collector",
                           transport=transport, backoff_base_s=0.001)
    assert ok
    assert len(transport.posts) == 1


def test_ship_remote_gives_up_after_retries():
    transport = FakeTransport(fail_times=100)
    ok = audit.ship_remote([make_record()], "http://collector",
                           transport=transport, backoff_base_s=0.001)
    assert not ok


def test_shipper_unreachable_endpoint_counts_drops():
    transport = FakeTransport(fail_times=10**6)
    shipper = audit.RemoteShipper("http://collector", transport=transport,
                                  backoff_base_s=0.001)
    for _ in range(5):
        shipper.enqueue(make_record())
    shipper.close()
    assert shipper.dropped_records >= 1


def test_shipper_delivers_when_reachable():
    transport = FakeTransport()
    shipper = audit.RemoteShipper("http://collector", transport=transport)
    for _ in range(3):
        shipper.enqueue(make_record())
    shipper.close()
    shipped = sum(len(body) for _, body in transport.posts)
    assert shipped == 3
    assert shipper.dropped_records == 0


def test_bounded_queue_drops_oldest():
    transport = FakeTransport(fail_times=10**6)
    shipper = audit.RemoteShipper("http://collector", queue_size=4,
                                  transport=transport, backoff_base_s=0.001)
    shipper._stop.set()  # freeze the worker so the queue actually fills
    shipper._thread.join(timeout=2)
    for i in range(10):
        shipper.enqueue(make_record(ts=i))
    assert shipper.dropped_records == 6
    remaining = [shipper._queue.get_nowait().ts for _ in range(4)]
    assert remaining == [6, 7, 8, 9]


def test_params_digest_canonical():
    a = audit.params_digest({"b": 1, "a": [1, 2]})
    b = audit.params_digest({"a": [1, 2], "b": 1})
    assert a == b
    assert re.fullmatch(r"[0-9a-f]{64}", a)
