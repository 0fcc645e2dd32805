from __future__ import annotations

import numpy as np
import pytest

from framewise_shim.models import (
    EMBED_DIM,
    LexicalJudgeModel,
    ModelLoadError,
    PaletteEmbedder,
    load_models,
)


class TestPaletteEmbedder:
    def setup_method(self):
        self.embedder = PaletteEmbedder("builtin/palette")

    def test_text_deterministic(self):
        a = self.embedder.embed_text("a red coat")
        b = self.embedder.embed_text("a red coat")
        assert np.array_equal(a, b)

    def test_unit_norm_and_dim(self, fixture_images):
        for vec in (
            self.embedder.embed_text("hello there"),
            self.embedder.embed_text(""),
            self.embedder.embed_image(fixture_images["red_coat"]),
        ):
            assert vec.shape == (EMBED_DIM,)
            assert np.linalg.norm(vec) == pytest.approx(1.0)

    def test_color_prompt_orders_fixtures(self, fixture_images):
        text = self.embedder.embed_text("a red coat")
        scores = {
            name: float(np.dot(text, self.embedder.embed_image(payload)))
            for name, payload in fixture_images.items()
        }
        assert scores["red_coat"] > scores["green_field"]
        assert scores["red_coat"] > scores["blue_door"]

    def test_different_prompts_differ(self):
        assert not np.array_equal(
            self.embedder.embed_text("a red coat"),
            self.embedder.embed_text("a blue door"),
        )

    def test_bad_image_payload(self):
        with pytest.raises(ValueError, match="undecodable"):
            self.embedder.embed_image(b"not a png")


class TestLoadModels:
    def test_defaults(self):
        models = load_models("builtin/palette")
        assert models.chat is None
        assert models.judge is None
        assert models.embedder.dim == EMBED_DIM

    def test_unknown_ids_refused(self):
        with pytest.raises(ModelLoadError, match="unknown embed model"):
            load_models("org/some-checkpoint")
        with pytest.raises(ModelLoadError, match="unknown chat model"):
            load_models("builtin/palette", chat_model_id="org/vlm")
        with pytest.raises(ModelLoadError, match="unknown judge model"):
            load_models("builtin/palette", judge_model_id="org/judge")

    def test_chat_like_dispatch(self):
        models = load_models(
            "builtin/palette",
            chat_model_id="builtin/caption",
            judge_model_id="builtin/lexical-judge",
        )
        assert models.chat_like("builtin/lexical-judge") is models.judge
        assert models.chat_like("builtin/caption") is models.chat
        assert models.chat_like(None) is models.chat
        assert models.chat_like("builtin/other") is None

    def test_chat_like_without_chat(self):
        models = load_models("builtin/palette")
        assert models.chat_like(None) is None


class TestLexicalJudge:
    def setup_method(self):
        self.judge = LexicalJudgeModel("builtin/lexical-judge")

    def grade(self, text: str) -> str:
        return self.judge.complete([{"role": "user", "content": text}])

    def test_mc_hit_and_miss(self):
        assert self.grade("Correct option: B\nModel answer: B. the door") == "1"
        assert self.grade("Correct option: B\nModel answer: A") == "0"

    def test_oe_containment(self):
        verdict = self.grade("Reference answer: opening a box\nModel answer: opening a box slowly")
        assert verdict == "1.0"
        assert self.grade("Reference answer: a dog\nModel answer: a cat") == "0.0"

    def test_no_labels_at_all(self):
        assert self.grade("unrelated text") == "0"
