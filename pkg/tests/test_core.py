import struct
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtmpl.core import (MAGIC, DegenerateInputError, LogRecord, SnapshotFormatError,
                          Template, catalog, insert_template, new_library, restore, snapshot)
from logtmpl.entropy_lcs import WILDCARD
from logtmpl.keywords import NOKEY
from logtmpl.vecindex import DIM, embed


def test_log_record_rejects_newline():
    with pytest.raises(ValueError):
        LogRecord(0, "a\nb")


def test_template_string_and_counts():
    t = Template(3, ["open", WILDCARD, "done"], [Counter({"open": 2}), Counter({"a": 1, "b": 1}),
                                                  Counter({"done": 2})], 2)
    assert t.template_string == "open <*> done"
    assert t.n_constants == 2
    assert t.position_total(1) == 2


def test_variable_positions_use_strict_entropy():
    uniform = Counter({f"v{i}": 1 for i in range(32)})
    t = Template(0, ["x", WILDCARD], [Counter({"x": 32}), uniform], 32)
    assert t.variable_positions(4.5) == [1]
    assert t.variable_positions(5.0) == []


class TestInsert:
    def test_ids_and_buckets(self):
        lib = new_library()
        a = insert_template(lib, "open", ["open", "file"])
        b = insert_template(lib, "close", ["close", "file"])
        assert (a.id, b.id) == (0, 1)
        assert set(lib.buckets) == {"open", "close"}
        assert lib.get(1) is b and lib.locate(1) == ("close", 0)

    def test_joins_existing_bucket_only(self):
        lib = new_library()
        insert_template(lib, "k", ["a"])
        insert_template(lib, "other", ["z"])
        before = {key: [t.id for t in b.templates] for key, b in lib.buckets.items()}
        insert_template(lib, "k", ["b"])
        assert [t.id for t in lib.buckets["k"].templates] == before["k"] + [2]
        assert [t.id for t in lib.buckets["other"].templates] == before["other"]
        assert len(lib.buckets["k"].index) == 2

    def test_empty_rejected(self):
        with pytest.raises(DegenerateInputError):
            insert_template(new_library(), NOKEY, [])

    def test_fresh_template_shape(self):
        t = insert_template(new_library(), NOKEY, ["x", "y"])
        assert t.match_count == 1 and t.keyword_key == NOKEY
        assert [dict(c) for c in t.position_stats] == [{"x": 1}, {"y": 1}]


def test_catalog_sorted_by_id():
    lib = new_library()
    insert_template(lib, "b", ["two"])
    insert_template(lib, "a", ["one"])
    entries = catalog(lib, 4.5)
    assert [e["id"] for e in entries] == [0, 1]
    assert entries[0] == {"id": 0, "template": "two", "match_count": 1, "keyword_key": "b",
                          "variable_positions": []}


def _sample_library():
    lib = new_library()
    insert_template(lib, "open", ["open", "file", "a"], embed("open file a"))
    t = insert_template(lib, NOKEY, ["数据", WILDCARD], embed("数据 x,y"))
    t.position_stats[1].update({"x": 4, "y": 2})
    t.match_count = 7
    insert_template(lib, "open", ["open", "dir"], embed("open: dir"))
    return lib


class TestSnapshot:
    def test_round_trip(self):
        lib = _sample_library()
        back = restore(snapshot(lib))
        assert back == lib
        assert snapshot(back) == snapshot(lib)
        assert back.next_id == 3
        for key in lib.buckets:
            assert np.array_equal(back.buckets[key].index.vectors, lib.buckets[key].index.vectors)

    def test_empty_library(self):
        assert restore(snapshot(new_library())) == new_library()

    def test_bad_magic(self):
        with pytest.raises(SnapshotFormatError) as err:
            restore(b"XXXX" + snapshot(new_library())[4:])
        assert err.value.offset == 0

    def test_bad_version(self):
        data = bytearray(snapshot(new_library()))
        data[len(MAGIC)] = 9
        with pytest.raises(SnapshotFormatError) as err:
            restore(bytes(data))
        assert err.value.offset == len(MAGIC)

    def test_trailing_bytes(self):
        data = snapshot(_sample_library())
        with pytest.raises(SnapshotFormatError) as err:
            restore(data + b"\x00")
        assert err.value.offset == len(data)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_truncation_always_detected(self, data):
        blob = snapshot(_sample_library())
        cut = data.draw(st.integers(0, len(blob) - 1))
        with pytest.raises(SnapshotFormatError) as err:
            restore(blob[:cut])
        assert 0 <= err.value.offset <= cut

    def test_next_id_must_exceed_ids(self):
        blob = bytearray(snapshot(_sample_library()))
        struct.pack_into("<Q", blob, len(MAGIC) + 1, 1)
        with pytest.raises(SnapshotFormatError):
            restore(bytes(blob))

    def test_vector_width(self):
        blob = snapshot(_sample_library())
        restored = restore(blob)
        assert all(b.index.vectors.shape[1] == DIM for b in restored.buckets.values())
