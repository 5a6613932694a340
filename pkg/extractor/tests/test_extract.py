import numpy as np
import pytest
import torch
from transformers import AutoModel, AutoTokenizer

from conftest import events_of
from encextract.errors import InputError
from encextract.extract import (
    context_length,
    extract,
    layer_filename,
    model_hidden_states,
    window_plan,
    write_features,
)

SHORT_TEXT = "The tide came in before dawn, and the keeper counted boats twice."


class TestWindowPlan:
    def test_single_window_when_text_fits(self):
        assert window_plan(10, 16) == [(0, 0, 10)]
        assert window_plan(16, 16) == [(0, 0, 16)]

    def test_two_windows(self):
        assert window_plan(17, 16) == [(0, 0, 16), (8, 16, 17)]

    @pytest.mark.parametrize("n,window", [(17, 16), (100, 16), (301, 16), (100, 15), (99, 7), (5, 2)])
    def test_tiling_and_context(self, n, window):
        plan = window_plan(n, window)
        covered = []
        for start, resp_start, resp_end in plan:
            assert 0 <= start <= resp_start < resp_end <= min(start + window, n)
            covered.extend(range(resp_start, resp_end))
        assert covered == list(range(n))
        # past the first window, every owned token sees at least half a
        # window of history
        for start, resp_start, _ in plan[1:]:
            assert resp_start - start >= window - window // 2

    def test_bad_window(self):
        with pytest.raises(InputError, match="window"):
            window_plan(10, 1)

    def test_no_tokens(self):
        with pytest.raises(InputError, match="tokens"):
            window_plan(0, 16)


@pytest.fixture(scope="module")
def model_a(model_a_dir):
    tokenizer = AutoTokenizer.from_pretrained(model_a_dir)
    model = AutoModel.from_pretrained(model_a_dir)
    model.eval()
    return tokenizer, model


class TestModelHiddenStates:
    def test_matches_plain_forward_when_unwindowed(self, model_a):
        tokenizer, model = model_a
        ids = tokenizer(SHORT_TEXT, add_special_tokens=False)["input_ids"]
        ids = ids[:12]
        states = model_hidden_states(model, ids, window=16)
        with torch.no_grad():
            direct = model(
                torch.tensor([ids]), output_hidden_states=True
            ).hidden_states
        assert states.shape == (3, len(ids), 16)
        for layer, h in enumerate(direct):
            assert np.array_equal(states[layer], h[0].numpy())

    def test_windowed_tokens_come_from_their_own_window(self, model_a):
        tokenizer, model = model_a
        ids = tokenizer(SHORT_TEXT, add_special_tokens=False)["input_ids"]
        assert len(ids) > 16
        states = model_hidden_states(model, ids, window=16)
        # second window covers tokens [8, 24) and owns [16, 24)
        with torch.no_grad():
            piece = model(
                torch.tensor([ids[8:24]]), output_hidden_states=True
            ).hidden_states
        for layer, h in enumerate(piece):
            for g in range(16, min(24, len(ids))):
                assert np.array_equal(states[layer, g], h[0, g - 8].numpy())


class TestExtract:
    def test_shapes_layers_and_dtype(self, model_a_dir, toy_text, toy_events):
        layers, alignments, manifest = extract(model_a_dir, toy_text, toy_events)
        assert len(layers) == 3  # two blocks plus the embedding output
        for matrix in layers:
            assert matrix.shape == (len(toy_events), 16)
            assert matrix.dtype == np.float32
            assert np.isfinite(matrix).all()
        assert len(alignments) == len(toy_events)
        assert manifest["n_layers"] == 2
        assert manifest["n_words"] == len(toy_events)
        assert manifest["window"]["length"] == 16
        assert manifest["window"]["n_windows"] > 1

    def test_embedding_layer_matches_wte_plus_wpe(self, model_a, model_a_dir):
        # layer 0 must be the embedding output, reproducible from the
        # embedding tables alone when everything fits in one window
        tokenizer, model = model_a
        text = "The tide came in."
        events = events_of(text)
        ids = tokenizer(text, add_special_tokens=False)["input_ids"]
        assert len(ids) <= 16
        layers, alignments, _ = extract(model_a_dir, text, events)
        wte = model.get_input_embeddings().weight.detach().numpy()
        wpe = model.wpe.weight.detach().numpy()
        token_embeddings = wte[np.asarray(ids)] + wpe[: len(ids)]
        for row, al in enumerate(alignments):
            chunk = token_embeddings[al.span[0] : al.punct_span[1]]
            expected = chunk.astype(np.float64).mean(axis=0).astype(np.float32)
            assert np.array_equal(layers[0][row], expected)

    def test_deterministic_across_calls(self, model_a_dir, toy_text, toy_events):
        first, _, manifest_a = extract(model_a_dir, toy_text, toy_events)
        second, _, manifest_b = extract(model_a_dir, toy_text, toy_events)
        assert manifest_a == manifest_b
        for a, b in zip(first, second):
            assert np.array_equal(a, b)

    def test_manifest_contents(self, model_a_dir, toy_text, toy_events):
        _, _, manifest = extract(model_a_dir, toy_text, toy_events)
        assert manifest["model"] == model_a_dir
        assert len(manifest["revision"]) == 16
        assert manifest["dtype"] == "float32"
        assert manifest["window"]["stride"] == 8
        assert manifest["hidden_size"] == 16

    def test_revision_tracks_weights(self, tmp_path, toy_text, toy_events, model_a_dir):
        from conftest import TOY_TEXT, build_checkpoint

        other = build_checkpoint(tmp_path / "other", TOY_TEXT, vocab_size=80, seed=4321)
        _, _, manifest_a = extract(model_a_dir, toy_text, toy_events)
        _, _, manifest_other = extract(other, toy_text, toy_events)
        assert manifest_a["revision"] != manifest_other["revision"]

    def test_window_override_bounds(self, model_a_dir, toy_text, toy_events):
        with pytest.raises(InputError, match="window"):
            extract(model_a_dir, toy_text, toy_events, window=1)
        with pytest.raises(InputError, match="window"):
            extract(model_a_dir, toy_text, toy_events, window=17)

    def test_missing_model(self, toy_text, toy_events, tmp_path):
        with pytest.raises(InputError, match="cannot load model"):
            extract(str(tmp_path / "nothing"), toy_text, toy_events)

    def test_misaligned_events_fail(self, model_a_dir, toy_text):
        from encextract.errors import AlignmentError
        from encextract.io import Events

        events = Events(("The", "zebra"), (0.0, 1.0))
        with pytest.raises(AlignmentError, match="zebra"):
            extract(model_a_dir, toy_text, events)


class TestWriteFeatures:
    def test_layout(self, tmp_path, model_a_dir, toy_text, toy_events):
        layers, _, manifest = extract(model_a_dir, toy_text, toy_events)
        out = tmp_path / "features"
        write_features(out, layers, manifest)
        names = sorted(p.name for p in out.iterdir())
        assert names == ["extraction.json", "layer_00.npy", "layer_01.npy", "layer_02.npy"]
        for i, matrix in enumerate(layers):
            back = np.load(out / layer_filename(i))
            assert back.dtype == np.float32
            assert np.array_equal(back, matrix)

    def test_filename_padding(self):
        assert layer_filename(0) == "layer_00.npy"
        assert layer_filename(12) == "layer_12.npy"


def test_context_length_reads_config(model_a):
    _, model = model_a
    assert context_length(model) == 16
