from __future__ import annotations

from corrugator.infrastructure.system import workers


def test_map_chunks_keeps_slice_order():
    out = workers.map_chunks(lambda a, b: list(range(a, b)), 1000, chunk=64, max_workers=4)
    assert len(out) == 16
    assert [x for part in out for x in part] == list(range(1000))


def test_single_slice_runs_inline():
    assert workers.map_chunks(lambda a, b: (a, b), 10, chunk=100) == [(0, 10)]
    assert workers.map_chunks(lambda a, b: (a, b), 0) == []


def test_chunk_size_bounds():
    for total in (1, 1000, 10 ** 7):
        size = workers.chunk_size(total)
        assert workers.MIN_CHUNK <= size <= workers.MAX_CHUNK
    assert workers.chunk_size(10) == workers.MIN_CHUNK


def test_process_probes():
    assert workers.worker_count() >= 1
    assert workers.peak_rss_bytes() > 0
