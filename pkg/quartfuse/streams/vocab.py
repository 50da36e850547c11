"""The shared token vocabulary: special tokens, question words, modality words and the closed answer set."""
from ..misc.exceptions import ConfigError, InputError

PAD, BOS, EOS = 0, 1, 2

WORDS = [
    "<pad>", "<bos>", "<eos>", "<describe>",
    "video", "audio", "sensor",
    "what", "which", "seen", "heard", "felt", "happened", "activity", "sound", "motion", "scene",
    "stir", "chop", "wash", "idle",
]

ANSWER_WORDS = ("stir", "chop", "wash", "idle")
MIN_VOCAB_SIZE = 24

class Vocabulary():
    """Integer ids for every word the synthetic task uses; ids past the named words are unused padding."""

    def __init__(self, size : int = 64):
        if size < MIN_VOCAB_SIZE:
            raise ConfigError("vocab_size", f"must be at least {MIN_VOCAB_SIZE}")
        self.size = size
        self._index = {word: i for i, word in enumerate(WORDS)}

    def id(self, word : str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise InputError(f"word {word!r} is not in the vocabulary") from None

    def ids(self, words) -> list[int]:
        return [self.id(word) for word in words]

    def word(self, token : int) -> str:
        if not 0 <= token < self.size:
            raise InputError(f"token id {token} outside vocabulary of {self.size}")
        return WORDS[token] if token < len(WORDS) else f"<unused-{token}>"

    @property
    def answer_ids(self) -> list[int]:
        """Ids of the closed answer set, indexed by answer class."""
        return self.ids(ANSWER_WORDS)

    def answer_tokens(self, answer : int) -> list[int]:
        """Every answer is one activity word followed by <eos>."""
        return [self.answer_ids[answer], EOS]

    def answer_class(self, tokens) -> int | None:
        """The answer class a token sequence spells, or None when it is not a well-formed answer."""
        tokens = list(tokens)
        if len(tokens) == 2 and tokens[1] == EOS and tokens[0] in self.answer_ids:
            return self.answer_ids.index(tokens[0])
        return None

    def caption_query(self, modality : str) -> list[int]:
        """Stage-I caption prompt for one modality."""
        return [self.id("<describe>"), self.id(modality)]
