"""
Tests for the caption tokenizer and text encoder.
"""
import pytest
import torch

from easyctrl.exceptions import ValidationError
from easyctrl.models.textenc import (
    MAX_LENGTH,
    PAD_ID,
    VOCAB,
    TextEncoder,
    encode_text,
    tokenize,
    tokenize_batch,
    vocab_from_tensor,
    vocab_to_tensor,
)


def test_vocabulary_table():
    """Test the fixed vocabulary layout."""
    assert len(VOCAB) == 16
    assert VOCAB[PAD_ID] == "<pad>"
    assert VOCAB.index("staying") == 14


def test_tokenize_pads_and_truncates():
    """Test right padding to L and truncation of long captions."""
    assert tokenize("a red square") == [1, 2, 6, 0, 0, 0, 0, 0]
    assert tokenize("") == [PAD_ID] * MAX_LENGTH
    long = "a red square moving left a red square moving left"
    assert tokenize(long) == tokenize("a red square moving left a red square")
    assert len(tokenize("a blue circle", max_length=3)) == 3


def test_tokenize_rejects_unknown_words():
    """Test that words outside the vocabulary raise ValidationError."""
    with pytest.raises(ValidationError):
        tokenize("a purple square")
    with pytest.raises(ValidationError):
        tokenize("a <pad>")


def test_tokenize_batch():
    """Test that captions are stacked into an int64 matrix."""
    tokens = tokenize_batch(["a red square", ""])
    assert tokens.dtype == torch.int64
    assert tokens.shape == (2, MAX_LENGTH)


def test_encoder_shapes():
    """Test single and batched context shapes."""
    encoder = TextEncoder(dim=8, heads=2)
    single = encode_text(tokenize("a red square"), encoder)
    assert single.embedded.shape == (MAX_LENGTH, 8)
    batch = encode_text(tokenize_batch(["a red square", "a blue circle"]), encoder)
    assert batch.embedded.shape == (2, MAX_LENGTH, 8)
    with torch.no_grad():
        assert torch.allclose(batch.embedded[0], single.embedded, atol=1e-6)


def test_encoder_distinguishes_captions():
    """Test that different captions embed differently."""
    encoder = TextEncoder(dim=8, heads=2)
    a = encode_text(tokenize("a red square"), encoder).embedded
    b = encode_text(tokenize("a blue square"), encoder).embedded
    assert not torch.allclose(a, b)


def test_encoder_input_errors():
    """Test that wrong lengths and ids outside the vocabulary raise ValidationError."""
    encoder = TextEncoder(dim=8, heads=2)
    with pytest.raises(ValidationError):
        encoder(torch.zeros(5, dtype=torch.int64))
    with pytest.raises(ValidationError):
        encoder(torch.full((MAX_LENGTH,), 16, dtype=torch.int64))


def test_vocab_tensor_roundtrip():
    """Test that the vocabulary survives its archive encoding."""
    assert vocab_from_tensor(vocab_to_tensor()) == list(VOCAB)
