import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from radseg.errors import (CorruptShard, EmptySplit, IndexGap, LengthMismatch, MissingNormalizer, OutOfRange,
                           WindowTooLong)
from radseg.store import (
    MAGIC, Dataset, DatasetManifest, Normalizer, NormalizerAccumulator, compute_normalizer, iterate_batches,
    pack_mask, read_example, reconstruct_mask, record_nbytes, sample_windows, unpack_mask, write_dataset,
)
from radseg.synthesis import GenerationConfig, generate


def test_pack_mask_lsb_first():
    assert pack_mask(np.array([[1, 0, 1, 1, 0, 0, 0, 0, 1]])) == bytes([0x0D, 0x01])


@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 5), st.integers(1, 70)), elements=st.integers(0, 1)))
def test_pack_unpack_round_trip(bits):
    c, n = bits.shape
    np.testing.assert_array_equal(unpack_mask(pack_mask(bits), n, c), bits)


def test_mask_length_errors():
    with pytest.raises(LengthMismatch):
        pack_mask(np.zeros(8))
    with pytest.raises(LengthMismatch):
        unpack_mask(b"\x00" * 4, 9, 5)


def test_shard_size_for_two_full_length_examples(tmp_path):
    cfg = GenerationConfig()
    write_dataset(generate(cfg, 2), tmp_path, cfg, "train")
    size = (tmp_path / "shard-00000.rsgd").stat().st_size
    assert record_nbytes(32768) == 12 + 32768 * 8 + 5 * 4096
    assert size == 6 + 2 * (12 + 32768 * 8 + 5 * 4096)


def test_round_trip_lossless(tmp_path, small_config):
    exs = list(generate(small_config, 7))
    m = write_dataset(exs, tmp_path, small_config, "val", shard_size=3)
    assert m.count == 7 and [s["count"] for s in m.shards] == [3, 3, 1]
    ds = Dataset(tmp_path)
    assert len(ds) == 7
    for a, b in zip(exs, ds):
        assert a.equals(b)
    assert read_example(tmp_path, 4).equals(exs[4])


def test_shard_hashes_in_manifest(tmp_path, small_config):
    m = write_dataset(generate(small_config, 4), tmp_path, small_config, "train", shard_size=2)
    for s in m.shards:
        assert hashlib.sha256((tmp_path / s["file"]).read_bytes()).hexdigest() == s["sha256"]


def test_same_seed_byte_identical(tmp_path, small_config):
    for d in ("a", "b"):
        write_dataset(generate(small_config, 5), tmp_path / d, small_config, "train", compute_stats=True)
    for name in ("shard-00000.rsgd", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_index_gap(tmp_path, small_config):
    exs = list(generate(small_config, 3))
    with pytest.raises(IndexGap):
        write_dataset([exs[0], exs[2]], tmp_path, small_config, "train")


def test_length_mismatch(tmp_path, small_config):
    ex = next(generate(small_config, 1))
    with pytest.raises(LengthMismatch):
        write_dataset([ex], tmp_path, small_config.replace(n_samples=1024), "train")


def test_out_of_range(small_dataset):
    with pytest.raises(OutOfRange):
        small_dataset[len(small_dataset)]
    with pytest.raises(IndexError):
        small_dataset[-1]


def test_truncated_shard_detected(tmp_path, small_config):
    write_dataset(generate(small_config, 2), tmp_path, small_config, "train")
    path = tmp_path / "shard-00000.rsgd"
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(CorruptShard):
        Dataset(tmp_path)[0]


def test_bad_magic_detected(tmp_path, small_config):
    write_dataset(generate(small_config, 1), tmp_path, small_config, "train")
    path = tmp_path / "shard-00000.rsgd"
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptShard):
        Dataset(tmp_path)[0]


def test_empty_stream_writes_magic_only_shard(tmp_path, small_config):
    m = write_dataset([], tmp_path, small_config, "test")
    assert m.count == 0 and len(m.shards) == 1
    assert (tmp_path / m.shards[0]["file"]).read_bytes() == MAGIC
    assert len(Dataset(tmp_path)) == 0
    with pytest.raises(EmptySplit):
        NormalizerAccumulator().result()


def test_manifest_json_round_trip(tmp_path, small_config):
    m = write_dataset(generate(small_config, 3), tmp_path, small_config, "train", compute_stats=True)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["format_version"] == "1" and doc["count"] == 3
    back = DatasetManifest.from_json(m.to_json())
    assert back == m
    assert GenerationConfig.from_dict(back.generation) == small_config


def test_masks_rederived_from_manifest(small_dataset):
    for ex in small_dataset:
        m = reconstruct_mask(small_dataset.manifest.emitters(ex.index), small_dataset.n_samples,
                             small_dataset.manifest.sample_rate_hz)
        np.testing.assert_array_equal(m, ex.mask)


def test_normalizer_matches_two_pass(small_config):
    exs = list(generate(small_config, 5))
    z = np.concatenate([e.iq for e in exs]).astype(np.complex128)
    norm = compute_normalizer(exs)
    assert norm.mean_i == pytest.approx(z.real.mean(), rel=1e-12, abs=1e-15)
    assert norm.mean_q == pytest.approx(z.imag.mean(), rel=1e-12, abs=1e-15)
    assert norm.var_i == pytest.approx(z.real.var(), rel=1e-10)
    assert norm.var_q == pytest.approx(z.imag.var(), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(sizes=st.lists(st.integers(1, 50), min_size=1, max_size=6), seed=st.integers(0, 1000))
def test_chan_merge_is_split_invariant(sizes, seed):
    r = np.random.default_rng(seed)
    chunks = [r.normal(3, 2, n) + 1j * r.normal(-1, 0.5, n) for n in sizes]
    acc = NormalizerAccumulator()
    for c in chunks:
        acc.update(c)
    z = np.concatenate(chunks)
    got = acc.result()
    assert got.mean_i == pytest.approx(z.real.mean(), rel=1e-9, abs=1e-12)
    assert got.var_q == pytest.approx(max(z.imag.var(), 1e-12), rel=1e-9, abs=1e-12)


def test_variance_floor():
    acc = NormalizerAccumulator()
    acc.update(np.zeros(10, dtype=np.complex64))
    assert acc.result().var_i == 1e-12


def test_normalizer_apply():
    norm = Normalizer(1.0, -1.0, 4.0, 0.25)
    out = norm.apply(np.array([3 + 0j, 1 - 1.5j], dtype=np.complex64))
    assert out.dtype == np.float32 and out.shape == (2, 2)
    np.testing.assert_allclose(out, [[1.0, 0.0], [2.0, -1.0]])


def test_sample_windows(small_dataset):
    ex = small_dataset[0]
    ws = sample_windows(ex, np.random.default_rng(0), 512, 3, small_dataset.normalizer)
    assert len(ws) == 3
    for w in ws:
        assert w.iq_window.shape == (2, 512) and w.mask_window.shape == (5, 512)
        np.testing.assert_array_equal(w.mask_window, ex.mask[:, w.start:w.start + 512])
    with pytest.raises(WindowTooLong):
        sample_windows(ex, np.random.default_rng(0), 4096, 1, small_dataset.normalizer)
    with pytest.raises(WindowTooLong):
        sample_windows(ex, np.random.default_rng(0), 100, 1, small_dataset.normalizer)


def test_iterate_batches_deterministic(small_dataset):
    a = list(iterate_batches(small_dataset, 4, 99, 256, 2))
    b = list(iterate_batches(small_dataset, 4, 99, 256, 2))
    assert [x.indices for x in a] == [x.indices for x in b]
    assert all(np.array_equal(x.iq, y.iq) for x, y in zip(a, b))
    assert [len(x.indices) for x in a] == [8, 4]
    assert sorted(set(i for x in a for i in x.indices)) == list(range(6))
    assert a[0].iq.shape == (8, 2, 256) and a[0].mask.dtype == np.float32


def test_iterate_batches_needs_normalizer(tmp_path, small_config):
    write_dataset(generate(small_config, 2), tmp_path, small_config, "test")
    with pytest.raises(MissingNormalizer):
        next(iterate_batches(Dataset(tmp_path), 2, 0, 256))
