"""Corpus ingestion: dialogs, ontologies, embeddings, dictionaries, mappings.

File formats
------------
- dialogs: JSON list of ``{"dialogue_idx": int, "turns": [...]}``; each turn
  carries ``system_acts`` (request / confirm_slot / confirm_value, nullable),
  ``system_text``, ``transcript``, a cumulative ``belief_state`` object and a
  per-turn ``requests`` list.
- ontology: JSON ``{"informable": {slot: [values]}, "requestable": [slots]}``.
- embeddings: text, one ``word v1 ... vH`` per line.
- dictionary: TSV, ``source<TAB>cand1|cand2|...``.
- parallel corpus: two line-aligned text files.
- ontology mapping: TSV, ``concept<TAB>lang<TAB>surface``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

MAX_UTTERANCE_TOKENS = 40

_TOKEN_RE = re.compile(r"'\w+|\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class Utterance:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.tokens) <= MAX_UTTERANCE_TOKENS:
            raise ValueError(
                f"utterance must have 1..{MAX_UTTERANCE_TOKENS} tokens, got {len(self.tokens)}"
            )

    @property
    def n(self):
        return len(self.tokens)

    def text(self):
        return " ".join(self.tokens)


def tokenize(text, max_tokens=MAX_UTTERANCE_TOKENS, overflow="error"):
    """Lowercase, split punctuation into separate tokens, keep contractions.

    ``overflow`` controls utterances longer than ``max_tokens``:
    "error" raises, "drop" returns None so the caller can skip the input.
    """
    if not text or not text.strip():
        raise ValueError("cannot tokenize empty text")
    tokens = _TOKEN_RE.findall(text.lower())
    if len(tokens) > max_tokens:
        if overflow == "drop":
            return None
        raise ValueError(f"utterance of {len(tokens)} tokens exceeds {max_tokens}")
    return Utterance(tuple(tokens))


@dataclass(frozen=True)
class SystemActs:
    request: str | None = None
    confirm_slot: str | None = None
    confirm_value: str | None = None

    def __post_init__(self):
        if (self.confirm_slot is None) != (self.confirm_value is None):
            raise ValueError("confirm_slot and confirm_value must appear together")

    def is_empty(self):
        return self.request is None and self.confirm_slot is None


@dataclass
class BeliefState:
    """Tracked goals (one optional value per informable slot) plus requests."""

    goals: dict[str, str | None]
    requests: set[str] = field(default_factory=set)

    @classmethod
    def empty(cls, ontology):
        return cls({slot: None for slot in ontology.informable}, set())

    def copy(self):
        return BeliefState(dict(self.goals), set(self.requests))

    def __eq__(self, other):
        return (
            isinstance(other, BeliefState)
            and self.goals == other.goals
            and self.requests == other.requests
        )


@dataclass
class DialogTurn:
    system_acts: SystemActs
    system_text: str
    utterance: Utterance
    transcript: str
    gold_state: BeliefState

    @property
    def gold_requests(self):
        return self.gold_state.requests


@dataclass
class Ontology:
    informable: dict[str, list[str]]
    requestable: list[str]

    def __post_init__(self):
        if not self.informable and not self.requestable:
            raise ValueError("ontology is empty")
        for slot, values in self.informable.items():
            if not values:
                raise ValueError(f"slot {slot!r} has no values")
            if len(set(values)) != len(values):
                raise ValueError(f"slot {slot!r} has duplicate values")

    def pairs(self):
        """Every (slot, value) pair in file order."""
        return [(s, v) for s, values in self.informable.items() for v in values]

    def fingerprint(self):
        blob = json.dumps(
            {"informable": self.informable, "requestable": self.requestable},
            sort_keys=True,
        ).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def load_ontology(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return Ontology(dict(raw["informable"]), list(raw["requestable"]))


def save_ontology(ontology, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"informable": ontology.informable, "requestable": ontology.requestable},
            fh,
            indent=1,
        )
        fh.write("\n")


# -- embeddings ------------------------------------------------------------


class EmbeddingTable:
    """word -> R^H lookup with a configurable out-of-vocabulary policy.

    OOV words map to the zero vector by default; ``oov_mode="random"``
    gives each unknown word a fixed word-hash-seeded random vector
    instead. Lookups of unknown words are counted in ``oov_count``.
    """

    def __init__(self, dim, vectors=None, oov_mode="zero"):
        if oov_mode not in ("zero", "random"):
            raise ValueError(f"unknown oov_mode {oov_mode!r}")
        self.dim = dim
        self.vectors = vectors or {}
        self.oov_mode = oov_mode
        self.oov_count = 0
        self.skipped_lines = 0
        self._oov_cache = {}

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)

    def add(self, word, vector):
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"vector for {word!r} has wrong dimension")
        self.vectors[word] = vec

    def lookup(self, word):
        vec = self.vectors.get(word)
        if vec is not None:
            return vec
        self.oov_count += 1
        if self.oov_mode == "zero":
            return np.zeros(self.dim)
        cached = self._oov_cache.get(word)
        if cached is None:
            seed = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
            cached = np.random.default_rng(seed).normal(size=self.dim) / np.sqrt(self.dim)
            self._oov_cache[word] = cached
        return cached

    def embed_term(self, term):
        """Sum of the token vectors of a (possibly multi-word) term."""
        return embed_term(term, self)

    def is_term_oov(self, term):
        return all(tok not in self.vectors for tok in tokenize(term).tokens)

    def merged_with(self, other):
        """New table containing both vocabularies (other wins on clashes)."""
        if other.dim != self.dim:
            raise ValueError("cannot merge tables of different dimension")
        merged = dict(self.vectors)
        merged.update(other.vectors)
        return EmbeddingTable(self.dim, merged, oov_mode=self.oov_mode)

    def state_bytes(self):
        return b"".join(
            np.ascontiguousarray(self.vectors[w]).tobytes() for w in sorted(self.vectors)
        )


def embed_term(term, table):
    vecs = [table.lookup(tok) for tok in tokenize(term).tokens]
    return np.sum(vecs, axis=0)


def load_embeddings(path, dim=None, oov_mode="zero"):
    """Parse a text embedding file; malformed lines are skipped and counted."""
    table = None
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                skipped += 1
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                skipped += 1
                continue
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                skipped += 1
                continue
            if table is None:
                table = EmbeddingTable(dim, oov_mode=oov_mode)
            table.vectors[word] = vec
    if table is None:
        raise ValueError(f"no valid embedding lines in {path}")
    table.skipped_lines = skipped
    return table


def save_embeddings(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        for word in table.vectors:
            vals = " ".join(repr(float(v)) for v in table.vectors[word])
            fh.write(f"{word} {vals}\n")


# -- dialogs ----------------------------------------------------------------


def load_dialogs(path, ontology):
    """Load dialogs and validate every gold label against the ontology."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    dialogs = []
    for d_i, dialog in enumerate(raw):
        turns = []
        for t_i, turn in enumerate(dialog["turns"]):
            where = f"dialog {dialog.get('dialogue_idx', d_i)} turn {t_i}"
            acts_raw = turn["system_acts"]
            acts = SystemActs(
                request=acts_raw.get("request"),
                confirm_slot=acts_raw.get("confirm_slot"),
                confirm_value=acts_raw.get("confirm_value"),
            )
            goals = {slot: None for slot in ontology.informable}
            for slot, value in turn["belief_state"].items():
                if slot not in ontology.informable:
                    raise ValueError(f"unknown slot {slot!r} at {where}")
                if value is not None and value not in ontology.informable[slot]:
                    raise ValueError(f"unknown value {value!r} for slot {slot!r} at {where}")
                goals[slot] = value
            requests = set(turn.get("requests", []))
            for req in requests:
                if req not in ontology.requestable:
                    raise ValueError(f"unknown requestable slot {req!r} at {where}")
            turns.append(
                DialogTurn(
                    system_acts=acts,
                    system_text=turn.get("system_text", ""),
                    utterance=tokenize(turn["transcript"]),
                    transcript=turn["transcript"],
                    gold_state=BeliefState(goals, requests),
                )
            )
        dialogs.append(turns)
    return dialogs


def save_dialogs(dialogs, path):
    raw = []
    for idx, dialog in enumerate(dialogs):
        turns = []
        for turn in dialog:
            turns.append(
                {
                    "system_acts": {
                        "request": turn.system_acts.request,
                        "confirm_slot": turn.system_acts.confirm_slot,
                        "confirm_value": turn.system_acts.confirm_value,
                    },
                    "system_text": turn.system_text,
                    "transcript": turn.transcript,
                    "belief_state": {
                        s: v for s, v in turn.gold_state.goals.items() if v is not None
                    },
                    "requests": sorted(turn.gold_state.requests),
                }
            )
        raw.append({"dialogue_idx": idx, "turns": turns})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")


# -- bilingual resources ------------------------------------------------------


@dataclass
class BilingualDictionary:
    """Ordered one-to-many word translation lists."""

    entries: dict[str, list[str]]

    def __post_init__(self):
        for word, cands in self.entries.items():
            if not cands:
                raise ValueError(f"empty candidate list for {word!r}")
            if len(set(cands)) != len(cands):
                raise ValueError(f"duplicate candidates for {word!r}")

    def __contains__(self, word):
        return word in self.entries

    def candidates(self, word):
        return self.entries[word]


def load_dictionary(path):
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                source, cands = line.split("\t")
            except ValueError:
                raise ValueError(f"malformed dictionary line {line_no}: {line!r}") from None
            entries[source] = cands.split("|")
    return BilingualDictionary(entries)


def save_dictionary(dictionary, path):
    with open(path, "w", encoding="utf-8") as fh:
        for word, cands in dictionary.entries.items():
            fh.write(f"{word}\t{'|'.join(cands)}\n")


@dataclass
class ParallelCorpus:
    pairs: list[tuple[Utterance, Utterance]]


def load_parallel(path_e, path_f, min_tokens=4, max_tokens=MAX_UTTERANCE_TOKENS):
    """Line-aligned sentence pairs, filtered to the length window on both sides."""
    with open(path_e, encoding="utf-8") as fh:
        lines_e = fh.read().splitlines()
    with open(path_f, encoding="utf-8") as fh:
        lines_f = fh.read().splitlines()
    if len(lines_e) != len(lines_f):
        raise ValueError(
            f"parallel files differ in length: {len(lines_e)} vs {len(lines_f)}"
        )
    pairs = []
    for raw_e, raw_f in zip(lines_e, lines_f):
        if not raw_e.strip() or not raw_f.strip():
            continue
        ue = tokenize(raw_e, overflow="drop")
        uf = tokenize(raw_f, overflow="drop")
        if ue is None or uf is None:
            continue
        if min(ue.n, uf.n) < min_tokens:
            continue
        pairs.append((ue, uf))
    return ParallelCorpus(pairs)


def save_parallel(corpus, path_e, path_f):
    with open(path_e, "w", encoding="utf-8") as fe, open(path_f, "w", encoding="utf-8") as ff:
        for ue, uf in corpus.pairs:
            fe.write(ue.text() + "\n")
            ff.write(uf.text() + "\n")


# -- ontology mapping ---------------------------------------------------------


class OntologyMapping:
    """Concept-level bijection tying slot/value surface terms across languages."""

    def __init__(self):
        self._surface = {}  # (concept, lang) -> surface term
        self._concept = {}  # (lang, surface) -> concept

    def add(self, concept, lang, surface):
        if (concept, lang) in self._surface:
            raise ValueError(f"concept {concept!r} already has a {lang!r} surface")
        if (lang, surface) in self._concept:
            raise ValueError(f"surface {surface!r} already mapped in {lang!r}")
        self._surface[(concept, lang)] = surface
        self._concept[(lang, surface)] = concept

    def concept_of(self, term, lang):
        try:
            return self._concept[(lang, term)]
        except KeyError:
            raise KeyError(f"term {term!r} has no concept in language {lang!r}") from None

    def surface_of(self, concept, lang):
        try:
            return self._surface[(concept, lang)]
        except KeyError:
            raise KeyError(f"concept {concept!r} has no surface in language {lang!r}") from None

    def map_term(self, term, src_lang, tgt_lang):
        return self.surface_of(self.concept_of(term, src_lang), tgt_lang)

    def map_ontology(self, ontology, src_lang, tgt_lang):
        informable = {
            self.map_term(slot, src_lang, tgt_lang): [
                self.map_term(v, src_lang, tgt_lang) for v in values
            ]
            for slot, values in ontology.informable.items()
        }
        requestable = [self.map_term(r, src_lang, tgt_lang) for r in ontology.requestable]
        return Ontology(informable, requestable)

    def rows(self):
        return [(c, l, s) for (c, l), s in sorted(self._surface.items())]


def load_mapping(path):
    mapping = OntologyMapping()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"malformed mapping line {line_no}: {line!r}")
            mapping.add(*parts)
    return mapping


def save_mapping(mapping, path):
    with open(path, "w", encoding="utf-8") as fh:
        for concept, lang, surface in mapping.rows():
            fh.write(f"{concept}\t{lang}\t{surface}\n")
