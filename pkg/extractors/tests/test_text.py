import numpy as np
import pytest
import torch

from extract_adapters.errors import EmptyCaption, ModelLoadFailure, PoolingUnsupported
from extract_adapters.extract import extract_text_features
from extract_adapters.manifest import ExtractionManifest, Pooling
from extract_adapters.pooling import pool_hidden_states
from extract_adapters.storefmt import read_store
from extract_adapters.textmodel import build_tiny_decoder, resolve_text_backend

CAPTIONS = [
    "a crow perched on a fence",
    "two dogs running across wet sand",
    "red tram passing a stone bridge",
    "a bowl of ripe oranges on a table",
    "climber resting below the summit ridge",
    "an old typewriter covered in dust",
    "children flying kites at dusk",
    "a lighthouse above breaking waves",
    "fresh snow on a pine forest",
    "a violinist playing in the subway",
    "rows of tulips under grey skies",
    "a rusty bicycle leaning on a wall",
    "the market stall sells green peppers",
    "fog rolling over the harbor at dawn",
    "a cat asleep inside a cardboard box",
    "workers repairing the mountain road",
    "sunlight through a cracked window",
    "a kayak gliding past river reeds",
    "street murals behind the old depot",
    "library shelves stacked with atlases",
    "a horse grazing beside the runway",
    "lanterns floating down the dark river",
]


@pytest.fixture(scope="module")
def backend():
    return build_tiny_decoder(seed=0)


def test_identical_captions_identical_vectors(backend):
    pooled = backend.pooled(["a crow on a wire", "a crow on a wire"], Pooling.LAST_TOKEN)
    assert torch.equal(pooled[0], pooled[1])


def test_single_token_caption_equals_its_hidden_state(backend):
    # one character = one token for the built-in tokenizer
    hidden, mask = backend.hidden_states(["x"])
    assert int(mask.sum()) == 1
    pooled = pool_hidden_states(hidden, mask, Pooling.LAST_TOKEN)
    assert torch.equal(pooled[0], hidden[0, 0])


def test_last_token_pooling_picks_last_real_token(backend):
    texts = ["ab", "abcdef"]
    hidden, mask = backend.hidden_states(texts)
    pooled = pool_hidden_states(hidden, mask, Pooling.LAST_TOKEN)
    assert torch.equal(pooled[0], hidden[0, 1])   # not the padded tail
    assert torch.equal(pooled[1], hidden[1, 5])


def test_batching_invariance_last_token(backend):
    # padding must not leak into pooled features: batch-of-1 vs batch-of-22
    singles = torch.cat([backend.pooled([t], Pooling.LAST_TOKEN) for t in CAPTIONS])
    batched = backend.pooled(CAPTIONS, Pooling.LAST_TOKEN)
    drift = float((singles - batched).abs().max())
    assert drift <= 1e-4


def test_batching_invariance_mean_token(backend):
    singles = torch.cat([backend.pooled([t], Pooling.MEAN_TOKEN) for t in CAPTIONS])
    batched = backend.pooled(CAPTIONS, Pooling.MEAN_TOKEN)
    assert float((singles - batched).abs().max()) <= 1e-4


def test_empty_caption_rejected(backend):
    with pytest.raises(EmptyCaption):
        backend.hidden_states(["fine", "   "])


def test_extract_writes_store(tmp_path):
    manifest = ExtractionManifest(
        entries=[(f"cap{i}", t) for i, t in enumerate(CAPTIONS[:6])],
        model="tiny-test-decoder", pooling=Pooling.LAST_TOKEN,
        output=tmp_path / "caps.fstore", batch_size=4,
    )
    extract_text_features(manifest)
    header, ids, payload = read_store(manifest.output)
    assert header["modality"] == "text"
    assert header["count"] == 6
    assert header["dim"] == build_tiny_decoder(seed=0).hidden_size
    assert ids == [f"cap{i}" for i in range(6)]
    assert np.all(np.isfinite(payload))
    assert (tmp_path / "caps.fstore.meta.json").exists()


def test_extract_deterministic(tmp_path):
    def run(name):
        manifest = ExtractionManifest(
            entries=[("a", CAPTIONS[0]), ("b", CAPTIONS[1])],
            model="tiny-test-decoder", pooling=Pooling.LAST_TOKEN,
            output=tmp_path / name, batch_size=2,
        )
        extract_text_features(manifest)
        return read_store(manifest.output)[2]

    assert run("one.fstore").tobytes() == run("two.fstore").tobytes()


def test_cls_pooling_rejected_for_decoder(tmp_path):
    manifest = ExtractionManifest(
        entries=[("a", "text")], model="tiny-test-decoder",
        pooling=Pooling.CLS_TOKEN, output=tmp_path / "x.fstore",
    )
    with pytest.raises(PoolingUnsupported):
        extract_text_features(manifest)


def test_unknown_model_load_failure():
    with pytest.raises(ModelLoadFailure):
        resolve_text_backend("nonexistent/model-that-is-not-cached")
