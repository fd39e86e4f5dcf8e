import numpy as np
import pytest

from nilwalk.rng import (
    CHUNK_SIZE,
    DEFAULT_SEED,
    chunk_generators,
    chunk_plan,
    chunk_seeds,
    make_generator,
    resolve_seed,
    tag_key,
)


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("NILWALK_SEED", raising=False)
    assert resolve_seed() == DEFAULT_SEED
    assert resolve_seed(5) == 5
    monkeypatch.setenv("NILWALK_SEED", "777")
    assert resolve_seed() == 777
    assert resolve_seed(5) == 777


def test_chunk_plan_covers_count():
    assert chunk_plan(0) == []
    assert chunk_plan(-3) == []
    assert chunk_plan(10, chunk_size=4) == [4, 4, 2]
    assert chunk_plan(8, chunk_size=4) == [4, 4]
    assert sum(chunk_plan(CHUNK_SIZE * 2 + 1)) == CHUNK_SIZE * 2 + 1


def test_chunk_seeds_are_tag_and_index_specific():
    a = chunk_seeds(1, "alpha", 10, chunk_size=4)
    b = chunk_seeds(1, "alpha", 10, chunk_size=4)
    assert [n for _, n in a] == [4, 4, 2]
    for (sa, _), (sb, _) in zip(a, b):
        assert make_generator(sa).random() == make_generator(sb).random()
    other_tag = chunk_seeds(1, "beta", 10, chunk_size=4)
    assert make_generator(a[0][0]).random() != make_generator(other_tag[0][0]).random()
    assert make_generator(a[0][0]).random() != make_generator(a[1][0]).random()


def test_chunk_generators_stream_is_reproducible():
    def draw():
        out = []
        for gen, n in chunk_generators(9, "stream", 10_000, chunk_size=1024):
            out.append(gen.standard_normal(n))
        return np.concatenate(out)

    x, y = draw(), draw()
    np.testing.assert_array_equal(x, y)
    assert x.shape == (10_000,)


def test_tag_key_is_stable_and_spread():
    assert tag_key("walk:heisenberg3:8:1") == tag_key("walk:heisenberg3:8:1")
    keys = {tag_key(f"t{i}") for i in range(200)}
    assert len(keys) == 200
    assert all(0 <= k < 2 ** 64 for k in keys)


def test_make_generator_uses_counter_based_bits():
    seq = np.random.SeedSequence(3, spawn_key=(tag_key("x"), 0))
    gen = make_generator(seq)
    assert isinstance(gen.bit_generator, np.random.Philox)
    with pytest.raises(TypeError):
        make_generator("not a seed sequence")
