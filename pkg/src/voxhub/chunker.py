"""Punctuation-based reply chunking with token-length rebalancing.

An agent reply is split after every run of terminator punctuation, then
rebalanced so chunk token counts stay within a configured band: overlong
chunks are divided at word boundaries into near-equal pieces (a break mark
is appended to each non-final piece so the synthesized prosody pauses
there), and undersized chunks are merged into their neighbours. The result
feeds the sequential synthesis pipeline, where similar chunk lengths keep
synthesis hidden under playback.

Tokens are maximal whitespace-delimited runs; punctuation stays attached
to its word, so ``"hi, there."`` counts two tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

DEFAULT_TERMINATORS = frozenset(".!?;:")
DEFAULT_SOFT_BREAKS = frozenset(",")


def token_count(text: str) -> int:
    """Number of whitespace-delimited tokens in ``text``."""
    return len(text.split())


@dataclass(frozen=True)
class ChunkingConfig:
    """Tunables for segmentation and rebalancing.

    ``terminators`` end a chunk during segmentation; ``soft_breaks`` never
    split on their own but count as existing break punctuation when the
    rebalancer decides whether to append ``insert_mark``.
    """

    terminators: frozenset = DEFAULT_TERMINATORS
    soft_breaks: frozenset = DEFAULT_SOFT_BREAKS
    max_tokens: int = 12
    min_tokens: int = 3
    insert_mark: str = ","
    merge_short: bool = True

    def __post_init__(self):
        if self.max_tokens < max(1, self.min_tokens):
            raise ConfigError(
                f"max_tokens={self.max_tokens} must be >= max(1, min_tokens={self.min_tokens})"
            )
        if self.min_tokens < 0:
            raise ConfigError("min_tokens must be >= 0")
        overlap = set(self.terminators) & set(self.soft_breaks)
        if overlap:
            raise ConfigError(f"terminators and soft_breaks overlap: {sorted(overlap)}")
        if len(self.insert_mark) != 1:
            raise ConfigError("insert_mark must be a single character")

    def is_break_char(self, ch: str) -> bool:
        return ch in self.terminators or ch in self.soft_breaks


@dataclass(frozen=True)
class Chunk:
    """A piece of reply text destined for one synthesis call.

    ``inserted_token_indices`` records which tokens had ``insert_mark``
    appended by the rebalancer (never punctuation present in the source),
    which is what makes the original text recoverable.
    """

    text: str
    token_count: int
    inserted_break_count: int = 0
    inserted_token_indices: tuple = ()

    @classmethod
    def from_text(cls, text: str) -> "Chunk":
        stripped = text.strip()
        if not stripped:
            raise ConfigError("chunk text must be non-empty")
        return cls(text=stripped, token_count=token_count(stripped))


# Working representation inside rebalance: token list plus the set of token
# positions that carry an inserted mark.
@dataclass
class _Piece:
    tokens: list
    inserted: set = field(default_factory=set)

    @classmethod
    def from_chunk(cls, chunk: Chunk) -> "_Piece":
        return cls(tokens=chunk.text.split(), inserted=set(chunk.inserted_token_indices))

    def to_chunk(self) -> Chunk:
        return Chunk(
            text=" ".join(self.tokens),
            token_count=len(self.tokens),
            inserted_break_count=len(self.inserted),
            inserted_token_indices=tuple(sorted(self.inserted)),
        )


def segment(text: str, cfg: ChunkingConfig | None = None) -> list:
    """Split ``text`` after each run of terminator characters.

    The terminator run stays attached to the preceding chunk, chunks are
    trimmed of surrounding whitespace, and trailing text without a
    terminator becomes a final chunk. Abbreviations get no special
    treatment. Empty or whitespace-only input yields an empty list.
    """
    cfg = cfg or ChunkingConfig()
    chunks: list = []
    current: list = []
    n = len(text)
    for i, ch in enumerate(text):
        current.append(ch)
        if ch in cfg.terminators and (i + 1 == n or text[i + 1] not in cfg.terminators):
            piece = "".join(current).strip()
            if piece:
                chunks.append(Chunk.from_text(piece))
            current = []
    tail = "".join(current).strip()
    if tail:
        chunks.append(Chunk.from_text(tail))
    return chunks


def _partition_sizes(total: int, max_tokens: int) -> list:
    """Near-equal piece sizes for ``total`` tokens, largest first.

    Uses the smallest piece count that satisfies the cap; sizes differ by
    at most one and the remainder goes to the earliest pieces, so the
    first chunk of a split is never the shortest.
    """
    k = math.ceil(total / max_tokens)
    base, rem = divmod(total, k)
    return [base + 1] * rem + [base] * (k - rem)


def _split_piece(piece: _Piece, cfg: ChunkingConfig) -> list:
    if len(piece.tokens) <= cfg.max_tokens:
        return [piece]
    sizes = _partition_sizes(len(piece.tokens), cfg.max_tokens)
    out = []
    offset = 0
    for size in sizes:
        tokens = piece.tokens[offset : offset + size]
        inserted = {j - offset for j in piece.inserted if offset <= j < offset + size}
        out.append(_Piece(tokens=tokens, inserted=inserted))
        offset += size
    for sub in out[:-1]:
        last = sub.tokens[-1]
        if not cfg.is_break_char(last[-1]):
            sub.tokens[-1] = last + cfg.insert_mark
            sub.inserted.add(len(sub.tokens) - 1)
    return out


def _merge_into(left: _Piece, right: _Piece) -> _Piece:
    shift = len(left.tokens)
    return _Piece(
        tokens=left.tokens + right.tokens,
        inserted=left.inserted | {j + shift for j in right.inserted},
    )


def _merge_short(pieces: list, cfg: ChunkingConfig) -> list:
    """Merge undersized pieces until no further merge fits under the cap.

    A short piece joins the piece after it; a short final piece joins the
    piece before it. Merges never exceed ``max_tokens``, so an isolated
    short chunk with oversized neighbours legitimately survives.
    """
    pieces = list(pieces)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(pieces):
            cur = pieces[i]
            if (
                len(cur.tokens) < cfg.min_tokens
                and i + 1 < len(pieces)
                and len(cur.tokens) + len(pieces[i + 1].tokens) <= cfg.max_tokens
            ):
                pieces[i : i + 2] = [_merge_into(cur, pieces[i + 1])]
                changed = True
            else:
                i += 1
        if (
            len(pieces) >= 2
            and len(pieces[-1].tokens) < cfg.min_tokens
            and len(pieces[-2].tokens) + len(pieces[-1].tokens) <= cfg.max_tokens
        ):
            pieces[-2:] = [_merge_into(pieces[-2], pieces[-1])]
            changed = True
    return pieces


def rebalance(chunks: list, cfg: ChunkingConfig | None = None) -> list:
    """Split overlong chunks and merge undersized ones.

    Splits land on word boundaries with token counts differing by at most
    one inside a split group; each non-final piece that does not already
    end in break punctuation gets ``insert_mark`` appended. Stripping the
    inserted marks and rejoining recovers the original token sequence.
    Idempotent: rebalancing an already-balanced list is the identity.
    """
    cfg = cfg or ChunkingConfig()
    pieces = []
    for chunk in chunks:
        pieces.extend(_split_piece(_Piece.from_chunk(chunk), cfg))
    if cfg.merge_short:
        pieces = _merge_short(pieces, cfg)
    return [p.to_chunk() for p in pieces]


def chunk_response(text: str, cfg: ChunkingConfig | None = None) -> list:
    """Full production path: segment at punctuation, then rebalance."""
    cfg = cfg or ChunkingConfig()
    return rebalance(segment(text, cfg), cfg)


def reconstruct_text(chunks: list, cfg: ChunkingConfig | None = None) -> str:
    """Undo chunking: drop rebalancer-inserted marks and rejoin with spaces.

    For any input, ``reconstruct_text(chunk_response(text))`` equals the
    whitespace-normalized ``text``.
    """
    cfg = cfg or ChunkingConfig()
    tokens: list = []
    for chunk in chunks:
        inserted = set(chunk.inserted_token_indices)
        for idx, token in enumerate(chunk.text.split()):
            if idx in inserted:
                if not token.endswith(cfg.insert_mark):
                    raise ConfigError(
                        f"chunk metadata marks token {idx!r} as inserted but "
                        f"{token!r} does not end with {cfg.insert_mark!r}"
                    )
                token = token[: -len(cfg.insert_mark)]
            tokens.append(token)
    return " ".join(tokens)
