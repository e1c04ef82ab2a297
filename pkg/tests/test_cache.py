import numpy as np
import pytest

from deltavar.cache import ENV_VAR, default_cache_dir, load_or_build, read_table, table_path, write_table
from deltavar.errors import CacheIntegrityError
from deltavar.sieve import build_table


def test_round_trip(tmp_path):
    t = build_table(3, 5000)
    p = write_table(t, tmp_path / "t.dkt")
    back = read_table(p)
    assert (back.k, back.start, back.end) == (t.k, t.start, t.end)
    np.testing.assert_array_equal(back.values, t.values)


def test_corruption_detected(tmp_path):
    p = write_table(build_table(2, 100), tmp_path / "t.dkt")
    raw = bytearray(p.read_bytes())
    raw[40] ^= 1
    p.write_bytes(bytes(raw))
    with pytest.raises(CacheIntegrityError):
        read_table(p)
    p.write_bytes(b"DKT1")
    with pytest.raises(CacheIntegrityError):
        read_table(p)
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(CacheIntegrityError):
        read_table(p)


def test_load_or_build_reuses(tmp_path):
    t = load_or_build(2, 1000, tmp_path)
    path = table_path(tmp_path, 2, 1000)
    assert path.exists()
    stamp = path.stat().st_mtime_ns
    again = load_or_build(2, 1000, tmp_path)
    assert path.stat().st_mtime_ns == stamp
    np.testing.assert_array_equal(again.values, t.values)


def test_env_cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path))
    assert default_cache_dir() == tmp_path
