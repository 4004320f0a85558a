"""Implicit language-ID text encodings and CTC vocabulary construction.

Two lossless encodings mark the language of each word without explicit
labels: *casing* renders English words in uppercase and the Bantu language
in lowercase; *tags* wraps each maximal same-language region in atomic
``<lang> ... </lang>`` markers. Both have exact inverses here, so encoded
hypotheses can always be mapped back to labeled plain text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

from .corpus import LANG_PAIRS, LANGUAGES, Utterance, bantu_of
from .errors import CasingError, TagError, VocabError

BLANK = "<blank>"
SPACE = " "
SCHEMES = ("plain", "casing", "tags")

_TAG_RE = re.compile(r"^</?([a-z]+)>$")


class LabeledWord(NamedTuple):
    word: str
    lang: str


LabeledWordSeq = list  # list[LabeledWord]


def labeled_words(utt: Utterance) -> list[LabeledWord]:
    """Flatten an utterance to (word, language) pairs in transcript order."""
    out = []
    for span in utt.spans:
        out.extend(LabeledWord(word, span.lang) for word in span.words)
    return out


def _check_caseable(text: str) -> None:
    for ch in text:
        if ch.isalpha() and ch.upper() == ch.lower():
            raise CasingError(f"character {ch!r} has no case mapping")


def render_casing(seq: Sequence[LabeledWord]) -> str:
    """Render labeled words under the casing scheme (eng upper, Bantu lower)."""
    rendered = []
    for word, lang in seq:
        _check_caseable(word)
        rendered.append(word.upper() if lang == "eng" else word.lower())
    return " ".join(rendered)


def apply_casing(utt: Utterance) -> str:
    """Encode an utterance with language-specific casing."""
    return render_casing(labeled_words(utt))


def invert_casing(text: str, lang_pair: str) -> list[LabeledWord]:
    """Recover (word, language) pairs from a casing-encoded string.

    Uppercase words are English, lowercase words the pair's Bantu language.
    Words with no cased character (digits, punctuation) are scheme-invariant:
    they inherit the preceding word's language, or the Bantu language at the
    start of the utterance.
    """
    bantu = bantu_of(lang_pair)
    out: list[LabeledWord] = []
    prev_lang = bantu
    for word in text.split():
        cased = [ch for ch in word if ch.isalpha() and ch.upper() != ch.lower()]
        if not cased:
            out.append(LabeledWord(word, prev_lang))
            continue
        if all(ch.isupper() for ch in cased):
            lang = "eng"
        elif all(ch.islower() for ch in cased):
            lang = bantu
        else:
            raise CasingError(f"mixed-case word {word!r}")
        out.append(LabeledWord(word.lower(), lang))
        prev_lang = lang
    return out


def render_tags(seq: Sequence[LabeledWord]) -> str:
    """Render labeled words with tags around each maximal same-language run."""
    parts: list[str] = []
    run: list[str] = []
    run_lang: str | None = None

    def close_run() -> None:
        if run:
            parts.append(f"<{run_lang}> {' '.join(run)} </{run_lang}>")
            run.clear()

    for word, lang in seq:
        if lang != run_lang:
            close_run()
            run_lang = lang
        run.append(word)
    close_run()
    return " ".join(parts)


def apply_tags(utt: Utterance) -> str:
    """Encode an utterance with language tags; adjacent same-language spans merge."""
    return render_tags(labeled_words(utt))


def tag_symbols(lang_pair: str) -> tuple[str, str, str, str]:
    """The four atomic tag symbols for a pair: eng open/close, Bantu open/close."""
    bantu = bantu_of(lang_pair)
    return (f"<eng>", f"</eng>", f"<{bantu}>", f"</{bantu}>")


def parse_tags(text: str, lang_pair: str | None = None) -> list[LabeledWord]:
    """Parse a tag-encoded string back to (word, language) pairs.

    Regions must be well nested, non-nested and non-empty; every word must
    sit inside a region. Errors carry the offending token and its position.
    """
    if lang_pair is not None:
        allowed = {"eng", bantu_of(lang_pair)}
    else:
        allowed = set(LANGUAGES)
    out: list[LabeledWord] = []
    open_lang: str | None = None
    region_words = 0
    for pos, token in enumerate(text.split()):
        m = _TAG_RE.match(token)
        if m:
            name = m.group(1)
            if name not in allowed:
                raise TagError(f"unknown tag name {token!r} at token {pos}")
            if token.startswith("</"):
                if open_lang is None:
                    raise TagError(f"unbalanced closing tag {token!r} at token {pos}")
                if name != open_lang:
                    raise TagError(
                        f"unbalanced tag {token!r} at token {pos}: open region is <{open_lang}>"
                    )
                if region_words == 0:
                    raise TagError(f"empty tag region closed at token {pos}")
                open_lang = None
            else:
                if open_lang is not None:
                    raise TagError(f"nested tag {token!r} at token {pos}")
                open_lang = name
                region_words = 0
        elif "<" in token or ">" in token:
            raise TagError(f"malformed tag token {token!r} at token {pos}")
        else:
            if open_lang is None:
                raise TagError(f"word {token!r} outside any tag region at token {pos}")
            out.append(LabeledWord(token, open_lang))
            region_words += 1
    if open_lang is not None:
        raise TagError(f"unclosed tag region <{open_lang}> at end of input")
    return out


def strip_tags(text: str) -> str:
    """Drop tag tokens, keeping the plain words."""
    return " ".join(t for t in text.split() if not _TAG_RE.match(t))


def plain_view(text: str, scheme: str) -> str:
    """Normalize scheme-rendered text to plain lowercase for scoring."""
    if scheme == "plain":
        return text
    if scheme == "casing":
        return text.lower()
    if scheme == "tags":
        return strip_tags(text)
    raise VocabError(f"unknown scheme {scheme!r}")


def render(utt: Utterance, scheme: str) -> str:
    """Render an utterance's transcript under a scheme."""
    if scheme == "plain":
        return " ".join(span.text for span in utt.spans)
    if scheme == "casing":
        return apply_casing(utt)
    if scheme == "tags":
        return apply_tags(utt)
    raise VocabError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class Vocabulary:
    """Ordered CTC symbol inventory; blank at index 0, space separator present."""

    symbols: tuple[str, ...]
    scheme: str
    lang_pair: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.scheme not in SCHEMES:
            raise VocabError(f"unknown scheme {self.scheme!r}")
        if not self.symbols or self.symbols[0] != BLANK:
            raise VocabError(f"symbol 0 must be the blank {BLANK!r}")
        if len(set(self.symbols)) != len(self.symbols):
            raise VocabError("duplicate symbols in vocabulary")
        if SPACE not in self.symbols:
            raise VocabError("word-separator symbol (space) missing")
        if self.scheme == "casing":
            letters = [s for s in self.symbols if len(s) == 1 and s.isalpha()]
            for ch in letters:
                partner = ch.lower() if ch.isupper() else ch.upper()
                if partner not in self.symbols:
                    raise VocabError(f"casing vocabulary lacks counterpart of {ch!r}")
        if self.scheme == "tags":
            if self.lang_pair is None:
                raise VocabError("tags vocabulary requires a lang_pair")
            for tag in tag_symbols(self.lang_pair):
                if tag not in self.symbols:
                    raise VocabError(f"tags vocabulary lacks atomic symbol {tag!r}")

    def __len__(self) -> int:
        return len(self.symbols)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise VocabError(f"symbol {symbol!r} not in vocabulary") from None

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def encode_text(self, text: str) -> list[str]:
        """Split text into vocabulary symbols (tags are atomic under tags scheme)."""
        if self.scheme != "tags":
            symbols = list(text)
        else:
            symbols = []
            for i, token in enumerate(text.split(" ")):
                if i > 0:
                    symbols.append(SPACE)
                if _TAG_RE.match(token):
                    symbols.append(token)
                else:
                    symbols.extend(token)
        for s in symbols:
            if s not in self._index:
                raise VocabError(f"symbol {s!r} not in vocabulary")
        return symbols


def build_vocab(transcripts: Iterable[str], scheme: str, lang_pair: str | None = None) -> Vocabulary:
    """Collect the symbol inventory of scheme-rendered transcripts.

    Symbols are blank, space, then all distinct characters in code-point
    order; under casing both cases of every seen letter are included; under
    tags the pair's four tag markers are appended as atomic symbols.
    """
    if scheme not in SCHEMES:
        raise VocabError(f"unknown scheme {scheme!r}")
    if scheme == "tags" and lang_pair is None:
        raise VocabError("tags scheme requires a lang_pair")
    tags = set(tag_symbols(lang_pair)) if scheme == "tags" else set()
    chars: set[str] = set()
    for line in transcripts:
        if scheme == "tags":
            for token in line.split():
                if token in tags:
                    continue
                if "<" in token or ">" in token:
                    raise VocabError(f"tag delimiter outside a complete tag token: {token!r}")
                chars.update(token)
        else:
            if "<" in line or ">" in line:
                raise VocabError("tag delimiter in non-tags transcript")
            chars.update(ch for ch in line if ch != SPACE)
    if scheme == "casing":
        for ch in list(chars):
            if ch.isalpha() and ch.upper() != ch.lower():
                chars.add(ch.upper())
                chars.add(ch.lower())
    symbols = [BLANK, SPACE] + sorted(chars)
    if scheme == "tags":
        symbols.extend(tag_symbols(lang_pair))
    return Vocabulary(symbols=tuple(symbols), scheme=scheme, lang_pair=lang_pair)


def write_vocab(vocab: Vocabulary, path) -> None:
    import json

    payload = {
        "scheme": vocab.scheme,
        "lang_pair": vocab.lang_pair,
        "symbols": list(vocab.symbols),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=0)
        handle.write("\n")


def read_vocab(path) -> Vocabulary:
    import json

    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise VocabError(f"vocab file {path}: not valid JSON ({exc.msg})") from exc
    for key in ("scheme", "symbols"):
        if key not in payload:
            raise VocabError(f"vocab file {path}: missing field {key!r}")
    return Vocabulary(
        symbols=tuple(payload["symbols"]),
        scheme=payload["scheme"],
        lang_pair=payload.get("lang_pair"),
    )
