"""Decoder language-model backend for caption feature extraction.

Captions are embedded as last-layer hidden states of a frozen causal LM.
Padding side is forced to "right": with causal attention, real tokens then
never see padding and keep their positions, so pooled features are invariant
to batch composition. Left padding would silently shift absolute positions,
which is the most common extraction bug.
"""

from __future__ import annotations

import torch

from .errors import EmptyCaption, ModelLoadFailure
from .manifest import Pooling
from .pooling import pool_hidden_states

TINY_DECODER = "tiny-test-decoder"


class DecoderTextBackend:
    supported_poolings = (Pooling.LAST_TOKEN, Pooling.MEAN_TOKEN)

    def __init__(self, tokenizer, model, device: str = "cpu"):
        tokenizer.padding_side = "right"
        if tokenizer.pad_token is None:
            tokenizer.pad_token = tokenizer.eos_token
        self.tokenizer = tokenizer
        self.device = device
        self.model = model.eval().to(device)

    @classmethod
    def from_pretrained(cls, model_id: str, device: str = "cpu") -> "DecoderTextBackend":
        try:
            from transformers import AutoModel, AutoTokenizer

            tokenizer = AutoTokenizer.from_pretrained(model_id)
            model = AutoModel.from_pretrained(model_id, torch_dtype=torch.float32)
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load text model {model_id!r}: {exc}") from exc
        return cls(tokenizer, model, device)

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    @torch.no_grad()
    def hidden_states(self, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        """Last-layer hidden states and the attention mask for a batch."""
        for i, t in enumerate(texts):
            if not t.strip():
                raise EmptyCaption(f"caption {i} in batch is empty")
        enc = self.tokenizer(texts, return_tensors="pt", padding=True,
                             truncation=True).to(self.device)
        out = self.model(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"])
        return out.last_hidden_state, enc["attention_mask"]

    @torch.no_grad()
    def pooled(self, texts: list[str], pooling: Pooling) -> torch.Tensor:
        hidden, mask = self.hidden_states(texts)
        return pool_hidden_states(hidden, mask, pooling)


def _char_tokenizer(max_len: int):
    """Printable-ASCII character tokenizer wrapped as a regular fast tokenizer."""
    from tokenizers import Regex, Tokenizer, models, pre_tokenizers
    from transformers import PreTrainedTokenizerFast

    vocab = {"[PAD]": 0, "[UNK]": 1}
    for code in range(32, 127):
        vocab[chr(code)] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Split(Regex("."), behavior="isolated")
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="[PAD]", unk_token="[UNK]",
        model_max_length=max_len,
    )


def build_tiny_decoder(seed: int = 0, hidden: int = 32, layers: int = 2,
                       heads: int = 2, max_len: int = 256,
                       device: str = "cpu") -> DecoderTextBackend:
    """Self-contained causal decoder (GPT-2 architecture, seeded random
    weights) for offline runs and the batching-invariance oracle."""
    from transformers import GPT2Config, GPT2Model

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=128, n_positions=max_len, n_embd=hidden, n_layer=layers,
        n_head=heads, bos_token_id=None, eos_token_id=None,
    )
    return DecoderTextBackend(_char_tokenizer(max_len), GPT2Model(config), device)


def resolve_text_backend(model_id: str, device: str = "cpu") -> DecoderTextBackend:
    if model_id == TINY_DECODER:
        return build_tiny_decoder(device=device)
    return DecoderTextBackend.from_pretrained(model_id, device)
