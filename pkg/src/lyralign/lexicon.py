"""Pronunciation lexicon handling and lyrics text normalization.

Dictionaries use the CMU format: `WORD PH1 PH2 ...`, with `WORD(2)` style
alternate pronunciations and `;;;` comment lines. Stress digits on vowel
phones are stripped; a phone that ever carries one is tagged as a vowel.
Phone sets without stress digits need explicit ` vowel` tags in a phone-set
file. The special phones SIL (silence), MUS (instrumental filler) and SPN
(spoken noise) are always part of the inventory.

Sung vowels stretch far beyond spoken durations, so the lexicon can be
augmented with duration variants: for each pronunciation and each repeat
factor k = 2..max_repeat, a variant with every vowel phone replicated k
times. Replication is uniform per variant, which caps the entry count at
max_repeat times the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SILENCE_PHONE = "SIL"
MUSIC_PHONE = "MUS"
NOISE_PHONE = "SPN"
SPECIAL_PHONES = (SILENCE_PHONE, MUSIC_PHONE, NOISE_PHONE)

_ARPABET_VOWELS = ("AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY",
                   "IH", "IY", "OW", "OY", "UH", "UW")
_ARPABET_CONSONANTS = ("B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L",
                       "M", "N", "NG", "P", "R", "S", "SH", "T", "TH", "V",
                       "W", "Y", "Z", "ZH")


class LexiconError(ValueError):
    pass


class UnknownPhoneError(LexiconError):
    pass


class EmptyPronunciationError(LexiconError):
    pass


class OovError(LexiconError):
    def __init__(self, words):
        self.words = list(words)
        super().__init__(f"out-of-vocabulary words: {', '.join(self.words)}")


@dataclass
class PhoneSet:
    """Phone inventory with vowel/consonant tags; specials always included."""

    vowels: set = field(default_factory=set)
    consonants: set = field(default_factory=set)

    def __post_init__(self):
        self.vowels = set(self.vowels)
        self.consonants = set(self.consonants) | set(SPECIAL_PHONES)

    @classmethod
    def arpabet(cls) -> "PhoneSet":
        return cls(set(_ARPABET_VOWELS), set(_ARPABET_CONSONANTS))

    def __contains__(self, phone: str) -> bool:
        return phone in self.vowels or phone in self.consonants

    def is_vowel(self, phone: str) -> bool:
        return phone in self.vowels

    def all_phones(self) -> tuple[str, ...]:
        return tuple(sorted(self.vowels | self.consonants))


def parse_phone_set(text: str) -> PhoneSet:
    """One phone per line, optional ` vowel` tag; `#` and `;;;` comments."""
    ps = PhoneSet()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";;;"):
            continue
        fields = line.split()
        phone = fields[0].upper()
        if len(fields) > 1 and fields[1].lower() == "vowel":
            ps.vowels.add(phone)
        else:
            ps.consonants.add(phone)
    return ps


@dataclass
class Lexicon:
    """word -> ordered pronunciations; base entries kept for variant generation."""

    entries: dict = field(default_factory=dict)
    base_entries: dict = field(default_factory=dict)
    phone_set: PhoneSet = field(default_factory=PhoneSet.arpabet)

    def __post_init__(self):
        if not self.base_entries:
            self.base_entries = {w: list(ps) for w, ps in self.entries.items()}
        self._validate()

    def _validate(self):
        for word, prons in self.entries.items():
            if word != word.upper():
                raise LexiconError(f"word {word!r} not uppercased")
            for pron in prons:
                if not pron:
                    raise EmptyPronunciationError(f"empty pronunciation for {word!r}")
                for phone in pron:
                    if phone not in self.phone_set:
                        raise UnknownPhoneError(f"unknown phone {phone!r} in {word!r}")

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def pronunciations(self, word: str) -> list:
        return self.entries[word]


def parse_dictionary(text: str, phone_set: PhoneSet | None = None) -> Lexicon:
    """Parse CMU-format dictionary text into a Lexicon.

    Stress digits 0/1/2 are stripped from phones and mark them as vowels.
    """
    ps = phone_set if phone_set is not None else PhoneSet.arpabet()
    entries: dict[str, list] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;;"):
            continue
        fields = line.split()
        word = fields[0].upper()
        if "(" in word and word.endswith(")"):
            word = word[:word.index("(")]
        phones = []
        for token in fields[1:]:
            token = token.upper()
            stressed = token[-1] in "012"
            phone = token[:-1] if stressed else token
            if stressed:
                if phone in ps.consonants and phone not in SPECIAL_PHONES:
                    ps.consonants.discard(phone)
                ps.vowels.add(phone)
            if phone not in ps:
                raise UnknownPhoneError(f"line {lineno}: unknown phone {token!r} in {word!r}")
            phones.append(phone)
        if not phones:
            raise EmptyPronunciationError(f"line {lineno}: no phones for {word!r}")
        pron = tuple(phones)
        if pron not in entries.setdefault(word, []):
            entries[word].append(pron)
    return Lexicon(entries=entries, phone_set=ps)


def read_dictionary(path, phone_set_path=None) -> Lexicon:
    ps = None
    if phone_set_path is not None:
        with open(phone_set_path, "r", encoding="utf-8") as fh:
            ps = parse_phone_set(fh.read())
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dictionary(fh.read(), ps)


@dataclass(frozen=True)
class LyricsLine:
    words: tuple[str, ...]
    line_index: int
    raw: str


def normalize_token(token: str) -> str:
    """Uppercase and strip punctuation, keeping in-word apostrophes only."""
    token = token.upper()
    kept = []
    for i, ch in enumerate(token):
        if ch.isalnum():
            kept.append(ch)
        elif ch == "'" and 0 < i < len(token) - 1 and token[i - 1].isalnum() and token[i + 1].isalnum():
            kept.append(ch)
    return "".join(kept)


def normalize_lyrics(text: str) -> list[LyricsLine]:
    """Uppercased, punctuation-stripped lyric lines; empty lines dropped.

    Digits are kept verbatim and will surface as OOV rather than being
    spelled out.
    """
    lines = []
    for index, raw in enumerate(text.splitlines()):
        words = tuple(w for w in (normalize_token(t) for t in raw.split()) if w)
        if words:
            lines.append(LyricsLine(words, index, raw))
    return lines


def read_lyrics(path) -> list[LyricsLine]:
    with open(path, "r", encoding="utf-8") as fh:
        return normalize_lyrics(fh.read())


def duration_variants(lex: Lexicon, max_repeat: int = 3) -> Lexicon:
    """Add vowel-elongation variants; idempotent for a given max_repeat.

    Variants are always generated from the base pronunciations, so running
    this twice adds nothing.
    """
    if max_repeat < 1:
        raise LexiconError("max_repeat must be >= 1")
    entries: dict[str, list] = {}
    for word, prons in lex.base_entries.items():
        out = list(prons)
        for k in range(2, max_repeat + 1):
            for pron in prons:
                variant = tuple(
                    phone for p in pron
                    for phone in ([p] * k if lex.phone_set.is_vowel(p) else [p])
                )
                if variant not in out:
                    out.append(variant)
        entries[word] = out
    return Lexicon(entries=entries, base_entries={w: list(ps) for w, ps in lex.base_entries.items()},
                   phone_set=lex.phone_set)


def oov_report(lex: Lexicon, lines: list[LyricsLine]) -> list[str]:
    """Unique out-of-vocabulary words in first-occurrence order."""
    seen = []
    for line in lines:
        for word in line.words:
            if word not in lex and word not in seen:
                seen.append(word)
    return seen
