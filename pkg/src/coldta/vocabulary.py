"""Character vocabularies for SMILES strings and protein sequences."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np
from sortedcontainers import SortedSet

from coldta.errors import DataError
from coldta.helpers import coldta_logger

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping
    from pathlib import Path

    from numpy.typing import NDArray


class UnknownPolicy(Enum):
    """What encoding does with a character the vocabulary has never seen."""

    REJECT = "reject"
    MAP_TO_UNKNOWN = "unknown"


class Vocabulary:
    """
    A character -> index map with index 0 reserved for padding.

    Under MAP_TO_UNKNOWN, index 1 is the shared unknown index and the real
    characters take 2..V. Under REJECT the real characters take 1..V and an
    unseen character is an error naming the character and its position.
    Characters are numbered in sorted order so the same corpus always gives
    the same vocabulary.
    """

    PADDING_INDEX = 0
    UNKNOWN_INDEX = 1
    UNKNOWN_TOKEN = "<unk>"  # noqa: S105

    def __init__(
        self: Vocabulary,
        tokens: Iterable[str],
        policy: UnknownPolicy = UnknownPolicy.MAP_TO_UNKNOWN,
    ) -> None:
        """
        Initialize the vocabulary from its characters.

        Parameters
        ----------
        tokens:
            The single character tokens, duplicates are ignored.
        policy:
            How encode treats characters outside the vocabulary.

        Exceptions
        ----------
        ValueError:
            A token is not a single character.

        """
        ordered: SortedSet[str] = SortedSet(tokens)
        if any(len(t) != 1 for t in ordered):
            msg = "vocabulary tokens must be single characters"
            raise ValueError(msg)
        self.policy = policy
        first = 2 if policy == UnknownPolicy.MAP_TO_UNKNOWN else 1
        self._index: dict[str, int] = {t: i for i, t in enumerate(ordered, first)}
        self._token: dict[int, str] = {i: t for t, i in self._index.items()}
        if policy == UnknownPolicy.MAP_TO_UNKNOWN:
            self._token[self.UNKNOWN_INDEX] = self.UNKNOWN_TOKEN

    @classmethod
    def build(
        cls: type[Vocabulary],
        corpus: Iterable[str],
        policy: UnknownPolicy = UnknownPolicy.MAP_TO_UNKNOWN,
    ) -> Vocabulary:
        """Collect every character appearing in the corpus."""
        characters: SortedSet[str] = SortedSet()
        for text in corpus:
            characters.update(text)
        coldta_logger().debug("Built a vocabulary of %d characters.", len(characters))
        return cls(characters, policy)

    @classmethod
    def from_token_file(
        cls: type[Vocabulary],
        path: Path,
        policy: UnknownPolicy = UnknownPolicy.REJECT,
    ) -> Vocabulary:
        """Load a fixed token list, one character per line."""
        lines = path.read_text(encoding="utf-8").splitlines()
        return cls((line for line in lines if line), policy)

    @property
    def size(self: Vocabulary) -> int:
        """Return V, the largest index in use."""
        return len(self._token)

    @property
    def tokens(self: Vocabulary) -> list[str]:
        """Return the real characters in index order."""
        return list(self._index)

    def __len__(self: Vocabulary) -> int:
        """Return the number of real characters."""
        return len(self._index)

    def __contains__(self: Vocabulary, token: object) -> bool:
        """Return True if the character has its own index."""
        return token in self._index

    def index(self: Vocabulary, token: str, position: int = -1) -> int:
        """Return the index of one character according to the policy."""
        if (found := self._index.get(token)) is not None:
            return found
        if self.policy == UnknownPolicy.MAP_TO_UNKNOWN:
            return self.UNKNOWN_INDEX
        msg = f"unseen token '{token}'"
        raise DataError(msg, position=position)

    def encode(self: Vocabulary, text: str, length: int) -> NDArray[np.int64]:
        """
        Encode text into exactly `length` indices.

        Text longer than `length` is truncated on the right, shorter text is
        padded on the right with the padding index.
        """
        kept = text[:length]
        result = np.full(length, self.PADDING_INDEX, dtype=np.int64)
        result[: len(kept)] = [self.index(ch, pos) for pos, ch in enumerate(kept)]
        return result

    def decode(self: Vocabulary, indices: Iterable[int]) -> str:
        """Turn indices back into text, dropping padding."""
        return "".join(
            self._token[int(i)] for i in indices if int(i) != self.PADDING_INDEX
        )

    def to_dict(self: Vocabulary) -> dict[str, Any]:
        """Return a JSON friendly form of the vocabulary."""
        return {"policy": self.policy.value, "tokens": self.tokens}

    @classmethod
    def from_dict(cls: type[Vocabulary], values: Mapping[str, Any]) -> Vocabulary:
        """Rebuild a vocabulary from to_dict output."""
        return cls(values["tokens"], UnknownPolicy(values["policy"]))
