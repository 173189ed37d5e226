"""Character vocabulary and text tokenization.

The model consumes character ids. The vocabulary has 30 symbols: the 26
uppercase letters, space, apostrophe, period and comma. A small fold table
maps the remaining punctuation that occurs in transcripts onto those symbols
('?' and '!' read as sentence breaks, hyphens as word gaps), so encoding
never silently drops characters: anything outside the folded set is an
error, not a skip.
"""

from .errors import VocabularyError

CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ '.,"

# Input folding applied before charset lookup. Identity for charset members.
FOLD = {"?": ".", "!": ".", "-": " "}

_INDEX = {c: i for i, c in enumerate(CHARSET)}


def encode_text(text, charset=CHARSET):
    """Map text to a list of character ids.

    ``text`` is expected to be canonical transcript text (uppercase, single
    spaces); see :func:`liptraj.openface.parse_transcript`. Raises
    :class:`VocabularyError` naming the character and offset when a symbol
    has no id even after folding. An empty string encodes to an empty list;
    rejecting empty transcripts is the dataset builder's job.
    """
    if charset is CHARSET:
        index = _INDEX
    else:
        index = {c: i for i, c in enumerate(charset)}
    ids = []
    for offset, char in enumerate(text):
        folded = FOLD.get(char, char)
        try:
            ids.append(index[folded])
        except KeyError:
            raise VocabularyError(char, offset) from None
    return ids


def decode_ids(ids, charset=CHARSET):
    """Inverse of :func:`encode_text` for canonical symbols."""
    return "".join(charset[i] for i in ids)
