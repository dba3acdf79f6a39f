"""
Token vocabulary shared by patient codes and criterion text.

Code tokens such as "dx004" appear both in patient visits and in criterion
text, so one table embeds them for both encoders.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from corpus.corpus_models import Corpus

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1


@dataclass(frozen=True)
class Vocabulary:
    """Token to id map with dense ids; <pad> is 0 and <unk> is 1."""
    tokens: tuple[str, ...] = (PAD_TOKEN, UNK_TOKEN)
    _ids: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValueError("vocabulary must start with <pad>, <unk>")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(
            self, "_ids", {token: index for index, token in enumerate(self.tokens)}
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def token_id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def vocabulary_hash(self) -> str:
        """sha256 over the ordered tokens; identifies compatible checkpoints."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def split_text(text: str) -> list[str]:
    return text.lower().split()


def build_vocabulary(train_corpus: Corpus) -> Vocabulary:
    """
    Builds the vocabulary from a training split.

    This function should:
    1. Collect every code token seen in patient visits.
    2. Collect every lower-cased criterion text token.
    3. Sort them after the two special tokens so the ids are reproducible.
    """
    seen = set()
    for patient in train_corpus.patients:
        for visit in patient.visits:
            seen.update(code.code for code in visit)
    for criterion in train_corpus.criteria:
        seen.update(split_text(criterion.text))
    seen -= {PAD_TOKEN, UNK_TOKEN}
    return Vocabulary((PAD_TOKEN, UNK_TOKEN) + tuple(sorted(seen)))


def tokenize(text: str, vocabulary: Vocabulary) -> list[int]:
    """Maps text to token ids; unseen tokens become <unk>, empty text [<unk>]."""
    ids = [vocabulary.token_id(token) for token in split_text(text)]
    return ids or [UNK_ID]
