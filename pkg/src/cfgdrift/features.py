"""Instruction normalization, block embedders and whole-sample content features."""
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .cfg import (
    CALL_MNEMONICS,
    DATA_DEFINES,
    RETURN_MNEMONICS,
    parse_listing,
)

log = logging.getLogger(__name__)

STR_TOKEN = "[str]"
ADDR_TOKEN = "[addr]"

_QUOTED = re.compile(r"'[^']*'|\"[^\"]*\"")
# 0x-prefixed, h-suffixed (must start with a digit) or bare digit runs
_NUMBER = re.compile(r"(?<!\w)(?:0x([0-9a-f]+)|([0-9][0-9a-f]*)h|([0-9]+))(?!\w)", re.IGNORECASE)

MIN_ADDR_DIGITS = 5


@dataclass(frozen=True)
class NormalizedInstruction:
    mnemonic: str
    operands: tuple = ()

    def text(self):
        if self.operands:
            return f"{self.mnemonic} {', '.join(self.operands)}"
        return self.mnemonic


def _number_digits(m):
    if m.group(2):
        # the leading 0 of 0ffffh is assembler syntax, not a digit
        d = m.group(2)
        return d[1:] if len(d) > 1 and d[0] == "0" and d[1] in "abcdefABCDEF" else d
    return m.group(1) or m.group(3)


def _normalize_operand(op):
    op = _QUOTED.sub(STR_TOKEN, op).lower()

    def repl(m):
        if len(_number_digits(m)) >= MIN_ADDR_DIGITS:
            return ADDR_TOKEN
        return m.group(0)

    return _NUMBER.sub(repl, op)


def normalize(instr):
    """Replace string literals with [str] and >=5-hex-digit constants with [addr]."""
    return NormalizedInstruction(instr.mnemonic.lower(), tuple(_normalize_operand(op) for op in instr.operands))


def is_numeric_constant(op):
    return bool(_NUMBER.fullmatch(op.strip().lstrip("+-")))


# ---------------------------------------------------------------------------
# embedding table
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingTable:
    dim: int
    entries: dict
    oov_vector: np.ndarray = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        if self.oov_vector is None:
            self.oov_vector = np.zeros(self.dim)
        self.oov_vector = np.asarray(self.oov_vector, dtype=float)
        self.entries = {k: np.asarray(v, dtype=float) for k, v in self.entries.items()}
        for key, vec in [("#oov", self.oov_vector), *self.entries.items()]:
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)")

    def lookup(self, text):
        return self.entries.get(text, self.oov_vector)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    @classmethod
    def parse(cls, text):
        dim = None
        oov = None
        entries = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("#dim"):
                dim = int(line.split()[1])
            elif line.startswith("#oov"):
                oov = [float(t) for t in line.split()[1:]]
            else:
                key, sep, vals = line.partition("\t")
                if not sep:
                    raise ValueError(f"line {lineno}: expected '<text>\\t<values>'")
                entries[key] = [float(t) for t in vals.split()]
        if dim is None:
            raise ValueError("embedding table is missing the '#dim m' header")
        return cls(dim, entries, oov)

    def dump(self):
        lines = [f"#dim {self.dim}", "#oov " + " ".join(repr(float(v)) for v in self.oov_vector)]
        for key, vec in self.entries.items():
            lines.append(key + "\t" + " ".join(repr(float(v)) for v in vec))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# block embedders
# ---------------------------------------------------------------------------

def embed_block_table(block, table):
    if not block.instructions:
        log.warning("empty basic block %s: using zero attributes", block.id)
        return np.zeros(table.dim)
    vecs = [table.lookup(normalize(ins).text()) for ins in block.instructions]
    return np.mean(vecs, axis=0)


MAGIC_FEATURES = (
    "numeric_constants",
    "transfer",
    "call",
    "arithmetic",
    "compare",
    "mov",
    "termination",
    "data_declaration",
    "total_instructions",
    "offspring",
    "instructions_in_block",
)

_ARITHMETIC = frozenset(
    "add sub mul imul div idiv inc dec neg adc sbb and or xor not shl shr sal sar rol ror".split()
)
_COMPARE = frozenset({"cmp", "test", "cmpsb", "cmpsw", "cmpsd"})
_MOV = frozenset({"mov", "movzx", "movsx", "movsb", "movsw", "movsd", "lea", "xchg"})
_TERMINATION = RETURN_MNEMONICS | {"int3"}


def embed_block_magic(block, cfg):
    counts = np.zeros(len(MAGIC_FEATURES))
    for ins in block.instructions:
        mn = ins.mnemonic
        counts[0] += sum(is_numeric_constant(op) for op in ins.operands)
        if mn.startswith("j"):
            counts[1] += 1
        if mn in CALL_MNEMONICS:
            counts[2] += 1
        if mn in _ARITHMETIC:
            counts[3] += 1
        if mn in _COMPARE:
            counts[4] += 1
        if mn in _MOV:
            counts[5] += 1
        if mn in _TERMINATION:
            counts[6] += 1
        if mn in DATA_DEFINES:
            counts[7] += 1
        counts[8] += 1
    counts[9] = sum(1 for s, _ in cfg.edges if s == block.id)
    counts[10] = counts[8] - counts[7]
    return counts


def _token_hash(token, seed):
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=str(seed).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def instruction_tokens(norm):
    """Position-tagged tokens of a normalized instruction."""
    return [f"0:{norm.mnemonic}"] + [f"{k + 1}:{op}" for k, op in enumerate(norm.operands)]


def embed_block_hash(block, dim, seed=0):
    if dim <= 0:
        raise ValueError("hash embedding dimension must be positive")
    vec = np.zeros(dim)
    if not block.instructions:
        log.warning("empty basic block %s: using zero attributes", block.id)
        return vec
    for ins in block.instructions:
        for tok in instruction_tokens(normalize(ins)):
            h = _token_hash(tok, seed)
            vec[h % dim] += 1.0 if (h >> 63) & 1 == 0 else -1.0
    return vec / len(block.instructions)


class TableEmbedder:
    def __init__(self, table):
        self.table = table
        self.dim = table.dim

    def __call__(self, block, cfg):
        return embed_block_table(block, self.table)


class MagicEmbedder:
    dim = len(MAGIC_FEATURES)

    def __call__(self, block, cfg):
        return embed_block_magic(block, cfg)


class HashEmbedder:
    def __init__(self, dim=64, seed=0):
        if dim <= 0:
            raise ValueError("hash embedding dimension must be positive")
        self.dim = dim
        self.seed = seed

    def __call__(self, block, cfg):
        return embed_block_hash(block, self.dim, self.seed)


def make_embedder(kind, table=None, dim=64, seed=0):
    if kind == "table":
        if table is None:
            raise ValueError("the table embedder needs --table")
        if not isinstance(table, EmbeddingTable):
            table = EmbeddingTable.load(table)
        return TableEmbedder(table)
    if kind == "magic":
        return MagicEmbedder()
    if kind == "hash":
        return HashEmbedder(dim, seed)
    raise ValueError(f"unknown embedder {kind!r}")


# ---------------------------------------------------------------------------
# attributed graphs
# ---------------------------------------------------------------------------

@dataclass
class AttributedGraph:
    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    d: int = 0
    sample_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.X.shape[0]

    @property
    def label(self):
        return int(np.argmax(self.Y))

    def to_dict(self):
        rows, cols = np.nonzero(self.A)
        return {
            "sample_id": self.sample_id,
            "X": self.X.tolist(),
            "n_nodes": int(self.X.shape[0]),
            "edges": [[int(r), int(c), int(self.A[r, c])] for r, c in zip(rows, cols)],
            "Y": self.Y.tolist(),
            "d": int(self.d),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, obj):
        n = int(obj["n_nodes"])
        X = np.asarray(obj["X"], dtype=float).reshape(n, -1)
        A = np.zeros((n, n), dtype=np.int64)
        for r, c, k in obj["edges"]:
            A[r, c] = k
        return cls(X, A, np.asarray(obj["Y"], dtype=float), int(obj["d"]), obj.get("sample_id", ""),
                   obj.get("meta", {}))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def one_hot(label, n_classes):
    y = np.zeros(n_classes)
    y[label] = 1.0
    return y


def featurize_cfg(cfg, embedder, label=0, domain=0, n_classes=2):
    """Node attribute matrix from per-block embeddings plus the edge-count adjacency."""
    if len(cfg.blocks):
        X = np.stack([np.asarray(embedder(b, cfg), dtype=float) for b in cfg.blocks])
    else:
        X = np.zeros((0, embedder.dim))
    Y = label if np.ndim(label) else one_hot(int(label), n_classes)
    return AttributedGraph(X, cfg.adjacency(), np.asarray(Y, dtype=float), int(domain), cfg.sample_id)


# ---------------------------------------------------------------------------
# content features
# ---------------------------------------------------------------------------

FAMILIES = ("symbol", "opcode", "register", "api", "section", "data_define", "size", "line_count", "misc")


@dataclass
class ContentFeatureVector:
    values: np.ndarray
    names: list
    offsets: dict

    def family(self, name):
        lo, hi = self.offsets[name]
        return self.values[lo:hi]

    def __getitem__(self, name):
        return self.values[self.names.index(name)]


def load_vocab(path=None):
    if path is None:
        text = resources.files("cfgdrift").joinpath("data/default_vocab.json").read_text()
        return json.loads(text)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _zero_operand(ins):
    return bool(ins.operands) and all(op.strip() in ("0", "0h", "0x0", "?") for op in ins.operands)


def extract_content_features(text, vocab=None):
    if vocab is None:
        vocab = load_vocab()
    instrs = parse_listing(text)
    raw_lines = text.splitlines()
    n_instr = len(instrs)
    names = []
    values = []
    offsets = {}

    def add(family, pairs):
        start = len(values)
        for name, val in pairs:
            names.append(f"{family}:{name}")
            values.append(float(val))
        offsets[family] = (start, len(values))

    body = [" ".join(ins.operands) for ins in instrs]
    add("symbol", [(s, sum(line.count(s) for line in body)) for s in vocab["symbols"]])

    mnem_counts = {}
    for ins in instrs:
        mnem_counts[ins.mnemonic] = mnem_counts.get(ins.mnemonic, 0) + 1
    add("opcode", [(op, mnem_counts.get(op, 0)) for op in vocab["opcodes"]])

    lowered = [b.lower() for b in body]
    reg_res = {r: re.compile(rf"\b{re.escape(r)}\b") for r in vocab["registers"]}
    add("register", [(r, sum(len(rx.findall(b)) for b in lowered)) for r, rx in reg_res.items()])

    api_res = {a: re.compile(rf"(?<![\w]){re.escape(a)}(?![\w])") for a in vocab["apis"]}
    add("api", [(a, sum(len(rx.findall(b)) for b in body)) for a, rx in api_res.items()])

    sect_counts = {}
    for ins in instrs:
        sect_counts[ins.section] = sect_counts.get(ins.section, 0) + 1
    denom = max(n_instr, 1)
    known = list(vocab["sections"])
    other = sum(c for s, c in sect_counts.items() if s not in known)
    add(
        "section",
        [(s, sect_counts.get(s, 0) / denom) for s in known]
        + [
            ("other", other / denom),
            ("n_sections", len([s for s in sect_counts if s is not None])),
            ("n_unknown_sections", len([s for s in sect_counts if s is not None and s not in known])),
        ],
    )

    dd_names = list(vocab["data_defines"])
    is_dd = [ins.mnemonic in DATA_DEFINES for ins in instrs]
    pairs = []
    for d in dd_names:
        sel = [ins for ins in instrs if ins.mnemonic == d]
        pairs += [
            (f"{d}_count", len(sel)),
            (f"{d}_fraction", len(sel) / denom),
            (f"{d}_zero", sum(_zero_operand(ins) for ins in sel)),
            (f"{d}_in_text", sum(ins.section == ".text" for ins in sel)),
        ]
    total_dd = sum(is_dd)
    run = longest = 0
    for flag in is_dd:
        run = run + 1 if flag else 0
        longest = max(longest, run)
    dd_instrs = [ins for ins in instrs if ins.mnemonic in DATA_DEFINES]
    pairs += [
        ("total", total_dd),
        ("total_fraction", total_dd / denom),
        ("distinct", len({ins.mnemonic for ins in dd_instrs})),
        ("longest_run", longest),
        ("mean_operands", np.mean([len(i.operands) for i in dd_instrs]) if dd_instrs else 0.0),
        ("outside_text_fraction",
         sum(i.section != ".text" for i in dd_instrs) / total_dd if total_dd else 0.0),
    ]
    add("data_define", pairs)

    add("size", [("bytes", len(text.encode("utf-8")))])
    add("line_count", [("lines", len(raw_lines))])
    n_labels = sum(1 for ln in raw_lines if ln.strip().endswith(":") and " " not in ln.strip())
    n_comments = sum(1 for ln in raw_lines if ln.strip().startswith(";"))
    add("misc", [("labels", n_labels), ("comment_lines", n_comments)])
    return ContentFeatureVector(np.asarray(values), names, offsets)
