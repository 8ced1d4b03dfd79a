"""Parse textual disassembly listings and build intraprocedural CFGs.

Listing grammar (one item per line)::

    ; comment                        skipped
    L1:                              label, bound to the next instruction
    section .text                    switches the current section
    1000 mov eax, 1                  <hex-address> <mnemonic> [operands]
    .text:00401000 jz short L1       IDA-style section-prefixed address

Blocks are built with the two-pass tagging scheme: pass one visits every
instruction and adds ``start``/``branchTo``/``fallThrough``/``return`` tags,
pass two cuts blocks at ``start`` tags and wires edges from the terminator of
each block.
"""
import json
import re
from dataclasses import dataclass, field

START = "start"
BRANCH_TO = "branchTo"
FALL_THROUGH = "fallThrough"
RETURN = "return"

RETURN_MNEMONICS = frozenset({"ret", "retn", "retf", "iret", "iretd", "hlt"})
CALL_MNEMONICS = frozenset({"call", "callq"})
UNCONDITIONAL_JUMPS = frozenset({"jmp", "jmpq", "ljmp"})
DATA_DEFINES = frozenset({"db", "dw", "dd", "dq", "dt"})

_HEX_LITERAL = re.compile(r"^(?:0x([0-9a-f]+)|([0-9][0-9a-f]*)h)$", re.IGNORECASE)
_ADDRESS = re.compile(r"^(?:0x)?([0-9a-f]+)$", re.IGNORECASE)
_JUMP_PREFIXES = ("short ", "near ", "far ", "near ptr ", "far ptr ")


class ListingParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class Instruction:
    address: int
    mnemonic: str
    operands: tuple = ()
    tags: set = field(default_factory=set, compare=False)
    section: str = field(default=None, compare=False)
    # resolved branch/call target: int address, symbolic str, or None
    target: object = field(default=None, compare=False)

    def text(self):
        if self.operands:
            return f"{self.mnemonic} {', '.join(self.operands)}"
        return self.mnemonic


@dataclass
class BasicBlock:
    id: int
    instructions: list
    successor_ids: list = field(default_factory=list)

    @property
    def start_address(self):
        return self.instructions[0].address if self.instructions else None


@dataclass
class RawCfg:
    blocks: list
    edges: list
    sample_id: str = ""

    def adjacency(self):
        import numpy as np

        A = np.zeros((len(self.blocks), len(self.blocks)), dtype=np.int64)
        for src, dst in self.edges:
            A[src, dst] += 1
        return A

    def to_dict(self):
        return {
            "sample_id": self.sample_id,
            "blocks": [
                {
                    "id": b.id,
                    "instrs": [
                        {"addr": ins.address, "mnemonic": ins.mnemonic, "operands": list(ins.operands)}
                        for ins in b.instructions
                    ],
                }
                for b in self.blocks
            ],
            "edges": [[s, d] for s, d in self.edges],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj):
        blocks = []
        for b in obj["blocks"]:
            instrs = [
                Instruction(int(i["addr"]), i["mnemonic"], tuple(i.get("operands", ())))
                for i in b["instrs"]
            ]
            blocks.append(BasicBlock(int(b["id"]), instrs))
        edges = [(int(s), int(d)) for s, d in obj["edges"]]
        for s, d in edges:
            if not (0 <= s < len(blocks) and 0 <= d < len(blocks)):
                raise ValueError(f"edge ({s}, {d}) references a missing block")
            blocks[s].successor_ids.append(d)
        return cls(blocks, edges, obj.get("sample_id", ""))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def split_operands(text):
    """Split an operand string on top-level commas (brackets/quotes respected)."""
    ops = []
    buf = []
    depth = 0
    quote = None
    for ch in text:
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "'\"":
            quote = ch
        elif ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        elif ch == "," and depth == 0:
            ops.append("".join(buf).strip())
            buf = []
            continue
        buf.append(ch)
    tail = "".join(buf).strip()
    if tail:
        ops.append(tail)
    return tuple(ops)


def _strip_comment(line):
    quote = None
    for k, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == ";":
            return line[:k]
    return line


def parse_hex_literal(token):
    m = _HEX_LITERAL.match(token.strip())
    if not m:
        return None
    return int(m.group(1) or m.group(2), 16)


def _branch_operand(op):
    low = op.lower()
    for prefix in _JUMP_PREFIXES:
        if low.startswith(prefix):
            return op[len(prefix):].strip()
    return op.strip()


def is_conditional_jump(mnemonic):
    return mnemonic.startswith("j") and mnemonic not in UNCONDITIONAL_JUMPS


def is_control_transfer(mnemonic):
    return (
        mnemonic.startswith("j")
        or mnemonic in CALL_MNEMONICS
        or mnemonic in RETURN_MNEMONICS
    )


def parse_listing(text):
    """Parse a listing into instructions in listing order, tags empty."""
    instrs = []
    pending_labels = []
    labels = {}
    seen = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.endswith(":") and " " not in line:
            pending_labels.append(line[:-1])
            continue
        head, _, rest = line.partition(" ")
        if head.lower() in ("section", ".section"):
            section = rest.strip() or None
            continue
        if ":" in head:
            sect, _, addr_tok = head.rpartition(":")
            section = sect
        else:
            addr_tok = head
        m = _ADDRESS.match(addr_tok)
        if not m:
            raise ListingParseError(lineno, f"malformed address {addr_tok!r}")
        address = int(m.group(1), 16)
        if address in seen:
            raise ListingParseError(lineno, f"duplicate address {address:#x}")
        if instrs and address < instrs[-1].address:
            raise ListingParseError(lineno, f"address {address:#x} is not increasing")
        seen.add(address)
        rest = rest.strip()
        if not rest:
            raise ListingParseError(lineno, "missing mnemonic")
        mnemonic, _, op_text = rest.partition(" ")
        ins = Instruction(address, mnemonic.lower(), split_operands(op_text), section=section)
        for name in pending_labels:
            labels[name] = address
        pending_labels = []
        instrs.append(ins)

    for ins in instrs:
        if (ins.mnemonic.startswith("j") or ins.mnemonic in CALL_MNEMONICS) and ins.operands:
            op = _branch_operand(ins.operands[0])
            if op in labels:
                ins.target = labels[op]
            else:
                lit = parse_hex_literal(op)
                ins.target = lit if lit is not None else op
    return instrs


def tag_pass(instrs):
    """Pass one: add control-flow tags in place; returns the same list."""
    if not instrs:
        return instrs
    index = {ins.address: k for k, ins in enumerate(instrs)}
    instrs[0].tags.add(START)
    for k, ins in enumerate(instrs):
        mn = ins.mnemonic
        nxt = instrs[k + 1] if k + 1 < len(instrs) else None
        if mn in RETURN_MNEMONICS:
            ins.tags.add(RETURN)
            if nxt is not None:
                nxt.tags.add(START)
        elif mn in CALL_MNEMONICS:
            if nxt is not None:
                nxt.tags.update((START, FALL_THROUGH))
        elif mn.startswith("j"):
            if isinstance(ins.target, int) and ins.target in index:
                instrs[index[ins.target]].tags.update((START, BRANCH_TO))
            if nxt is not None:
                nxt.tags.add(START)
                if is_conditional_jump(mn):
                    nxt.tags.add(FALL_THROUGH)
    return instrs


def build_blocks(tagged, sample_id=""):
    """Pass two: cut blocks at start tags and connect them."""
    blocks = []
    for ins in tagged:
        if START in ins.tags or not blocks:
            blocks.append(BasicBlock(len(blocks), []))
        blocks[-1].instructions.append(ins)
    block_at = {b.start_address: b.id for b in blocks}

    edges = []
    for b in blocks:
        last = b.instructions[-1]
        mn = last.mnemonic
        has_next = b.id + 1 < len(blocks)
        if mn in RETURN_MNEMONICS:
            continue
        if mn.startswith("j"):
            if isinstance(last.target, int) and last.target in block_at:
                edges.append((b.id, block_at[last.target]))
            if is_conditional_jump(mn) and has_next:
                edges.append((b.id, b.id + 1))
        elif has_next:
            # calls and ordinary instructions fall into the next block
            edges.append((b.id, b.id + 1))
    for s, d in edges:
        blocks[s].successor_ids.append(d)
    return RawCfg(blocks, edges, sample_id)


def extract_cfg(text, sample_id=""):
    return build_blocks(tag_pass(parse_listing(text)), sample_id)
