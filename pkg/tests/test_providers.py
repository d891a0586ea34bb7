import json

import pytest

from btplanner.providers import (
    ChatRequest,
    HashedBagOfWordsEmbedder,
    RecordingChatProvider,
    RecordingEmbeddingProvider,
    RecordingVlmProvider,
    ReplayChatProvider,
    ReplayEmbeddingProvider,
    ReplayVlmProvider,
    ReplayMiss,
    ScriptedChatProvider,
    ScriptedVlmProvider,
    Transcript,
    VerdictUnparseable,
    parse_verdict,
)
from btplanner.similarity import cosine


class TestFallbackEmbedder:
    def test_deterministic(self):
        embedder = HashedBagOfWordsEmbedder()
        a = embedder.embed_texts(["Action node: wait"])[0]
        b = embedder.embed_texts(["Action node: wait"])[0]
        assert a == b

    def test_self_cosine_one(self):
        embedder = HashedBagOfWordsEmbedder()
        v = embedder.embed_texts(["Action node: wait"])[0]
        assert cosine(v, v) == pytest.approx(1.0)

    def test_disjoint_tokens_orthogonal(self):
        embedder = HashedBagOfWordsEmbedder()
        u, v = embedder.embed_texts(["alpha bravo", "charlie delta"])
        assert cosine(u, v) == pytest.approx(0.0)

    def test_unit_norm_and_fixed_dim(self):
        embedder = HashedBagOfWordsEmbedder()
        import numpy as np

        for text in ["one", "two words here", "Action node: close lid"]:
            v = embedder.embed_texts([text])[0]
            assert v.dim == 256
            assert np.linalg.norm(v.values) == pytest.approx(1.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            HashedBagOfWordsEmbedder().embed_texts([])


class TestRecordReplayChat:
    def test_round_trip(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        scripted = ScriptedChatProvider(lambda req: f"echo:{req.prompt}")
        recorder = RecordingChatProvider(scripted, transcript)
        request = ChatRequest(prompt="hello", temperature=1.0)
        live = recorder.complete(request)

        replay = ReplayChatProvider(transcript)
        assert replay.complete(request).text == live.text

    def test_replay_miss_names_hash(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        RecordingChatProvider(
            ScriptedChatProvider(lambda req: "x"), transcript
        ).complete(ChatRequest(prompt="a"))
        replay = ReplayChatProvider(transcript)
        with pytest.raises(ReplayMiss, match="[0-9a-f]{16}"):
            replay.complete(ChatRequest(prompt="mutated"))

    def test_temperature_part_of_key(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        recorder = RecordingChatProvider(ScriptedChatProvider(lambda req: "x"), transcript)
        recorder.complete(ChatRequest(prompt="a", temperature=0.0))
        replay = ReplayChatProvider(transcript)
        with pytest.raises(ReplayMiss):
            replay.complete(ChatRequest(prompt="a", temperature=1.0))

    def test_transcript_is_jsonl(self, tmp_path):
        path = tmp_path / "t.jsonl"
        RecordingChatProvider(
            ScriptedChatProvider(lambda req: "x"), Transcript(path)
        ).complete(ChatRequest(prompt="a"))
        lines = path.read_text().strip().splitlines()
        record = json.loads(lines[0])
        assert record["kind"] == "chat"
        assert "request_hash" in record and "timestamp" in record


class TestRecordReplayEmbed:
    def test_round_trip(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        recorder = RecordingEmbeddingProvider(HashedBagOfWordsEmbedder(), transcript)
        live = recorder.embed_texts(["a", "b"])
        replay = ReplayEmbeddingProvider(transcript)
        assert replay.embed_texts(["a", "b"]) == live


class TestVlm:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Yes, the lid is closed.", True),
            ("no", False),
            ("YES.", True),
            ("No - the lid remains open", False),
        ],
    )
    def test_parse_verdict(self, raw, expected):
        assert parse_verdict(raw) is expected

    @pytest.mark.parametrize("raw", ["It is unclear.", "", "maybe yes"])
    def test_unparseable(self, raw):
        with pytest.raises(VerdictUnparseable):
            parse_verdict(raw)

    def test_record_replay(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        recorder = RecordingVlmProvider(ScriptedVlmProvider({"lid closed": True}), transcript)
        verdict, raw = recorder.judge("lid closed", "img1", "img2")
        assert verdict is True

        replay = ReplayVlmProvider(transcript)
        assert replay.judge("lid closed", "img1", "img2") == (verdict, raw)
        with pytest.raises(ReplayMiss):
            replay.judge("lid closed", None, None)
