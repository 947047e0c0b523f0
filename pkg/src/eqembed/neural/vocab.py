from __future__ import annotations

from dataclasses import dataclass

from ..expr.nodes import BINARY_OPERATORS, NAMED_CONSTANTS, UNARY_OPERATORS
from ..expr.prefix import DIGITS, INT_NEG, INT_POS, UnknownToken

PAD, SOE, EOE = 0, 1, 2
SPECIALS = ("PAD", "SOE", "EOE")


class EmptyDataset(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[:3] != SPECIALS:
            raise ValueError("the first three tokens must be PAD, SOE, EOE")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownToken(f"token {token!r} is not in the vocabulary") from None

    def encode(self, tokens, wrap: bool = True) -> list[int]:
        ids = [self.id(t) for t in tokens]
        return [SOE, *ids, EOE] if wrap else ids

    def decode(self, ids) -> list[str]:
        """Tokens for ``ids``, dropping specials and stopping at the first EOE."""
        out = []
        for i in ids:
            i = int(i)
            if i == EOE:
                break
            if i in (PAD, SOE):
                continue
            out.append(self.tokens[i])
        return out


def expression_alphabet() -> frozenset[str]:
    """Every token a valid prefix expression can contain."""
    return frozenset((*UNARY_OPERATORS, *BINARY_OPERATORS, *NAMED_CONSTANTS, "x", INT_POS, INT_NEG, *DIGITS))


def build_vocab(dataset, full_alphabet: bool = False) -> Vocabulary:
    """Specials first, then tokens in sorted order.

    With ``full_alphabet`` the whole expression alphabet is added, so a
    trained model can encode expressions using tokens absent from training.
    """
    tokens = set()
    for pair in dataset:
        for text in pair:
            tokens.update(text.split())
    if not tokens:
        raise EmptyDataset("cannot build a vocabulary from an empty dataset")
    if full_alphabet:
        tokens |= expression_alphabet()
    clash = tokens & set(SPECIALS)
    if clash:
        raise ValueError(f"dataset uses reserved tokens {sorted(clash)}")
    return Vocabulary(SPECIALS + tuple(sorted(tokens)))
