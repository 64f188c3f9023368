"""
Closed-vocabulary text conditioning for the synthetic caption grammar
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import torch
import torch.nn as nn

from easyctrl.exceptions import ValidationError
from easyctrl.io.archive import tensor_to_text, text_to_tensor
from easyctrl.models.layers import Attention

PAD_ID = 0
MAX_LENGTH = 8

# Published vocabulary table (docs/formats.md); the index is the token id.
VOCAB = (
    "<pad>",
    "a",
    "red", "green", "blue", "yellow",
    "square", "circle", "triangle",
    "moving", "left", "right", "up", "down",
    "staying", "still",
)
WORD_TO_ID: Dict[str, int] = {word: idx for idx, word in enumerate(VOCAB)}


@dataclass
class TextContext:
    """
    Token ids and their embedded cross-attention context.

    Attributes:
        tokens: (L,) or (N, L) token ids
        embedded: (L, text_dim) or (N, L, text_dim)
    """
    tokens: torch.Tensor
    embedded: torch.Tensor


def tokenize(caption: str, max_length: int = MAX_LENGTH) -> List[int]:
    """
    Map a caption to a fixed-length list of token ids.

    Args:
        caption: Whitespace-separated grammar words, or the empty string
        max_length: Output length L; longer captions are truncated, shorter ones right-padded

    Returns:
        List[int]: L token ids
    """
    words = caption.split()
    unknown = [word for word in words if word not in WORD_TO_ID or word == VOCAB[PAD_ID]]
    if unknown:
        raise ValidationError(f"words outside the caption vocabulary: {', '.join(unknown)}")
    ids = [WORD_TO_ID[word] for word in words][:max_length]
    return ids + [PAD_ID] * (max_length - len(ids))


def tokenize_batch(captions: Sequence[str], max_length: int = MAX_LENGTH) -> torch.Tensor:
    """Tokenize several captions into an (N, L) int64 tensor."""
    return torch.tensor([tokenize(c, max_length) for c in captions], dtype=torch.int64)


class TextEncoder(nn.Module):
    """
    Token embedding + learned positional embedding + one self-attention layer.
    """

    def __init__(self, dim: int = 32, heads: int = 2, max_length: int = MAX_LENGTH,
                 vocab_size: int = len(VOCAB)):
        super().__init__()
        self.max_length = max_length
        self.vocab_size = vocab_size
        self.token_embedding = nn.Embedding(vocab_size, dim)
        self.position_embedding = nn.Parameter(torch.randn(max_length, dim) * 0.02)
        self.norm = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        single = tokens.ndim == 1
        if single:
            tokens = tokens.unsqueeze(0)
        if tokens.shape[-1] != self.max_length:
            raise ValidationError(f"expected {self.max_length} tokens, got {tokens.shape[-1]}")
        if tokens.numel() and (int(tokens.min()) < 0 or int(tokens.max()) >= self.vocab_size):
            raise ValidationError(f"token ids must lie in [0, {self.vocab_size})")
        x = self.token_embedding(tokens) + self.position_embedding
        x = x + self.attn(self.norm(x))
        return x[0] if single else x


def encode_text(tokens: Union[torch.Tensor, Sequence[int]], encoder: TextEncoder) -> TextContext:
    """
    Embed token ids into a cross-attention context.

    Args:
        tokens: (L,) or (N, L) token ids
        encoder: Text encoder parameters

    Returns:
        TextContext: The ids together with their embedding
    """
    tokens = torch.as_tensor(tokens, dtype=torch.int64)
    return TextContext(tokens=tokens, embedded=encoder(tokens))


def vocab_to_tensor() -> torch.Tensor:
    """Serialize VOCAB (newline-separated) for the archive entry `textenc.vocab`."""
    return text_to_tensor("\n".join(VOCAB))


def vocab_from_tensor(tensor: torch.Tensor) -> List[str]:
    return tensor_to_text(tensor).split("\n")
