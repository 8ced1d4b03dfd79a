import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfgdrift.cfg import BasicBlock, Instruction, extract_cfg
from cfgdrift.features import (
    MAGIC_FEATURES,
    AttributedGraph,
    EmbeddingTable,
    HashEmbedder,
    MagicEmbedder,
    TableEmbedder,
    embed_block_hash,
    embed_block_magic,
    embed_block_table,
    extract_content_features,
    featurize_cfg,
    load_vocab,
    make_embedder,
    normalize,
)

COND = "1000 mov eax, 1\n1005 cmp eax, 2\n1006 jz L1\n1008 add eax, 1\nL1:\n100b ret\n"


def ins(text, addr=0x1000):
    mn, _, ops = text.partition(" ")
    return Instruction(addr, mn, tuple(o.strip() for o in ops.split(",")) if ops else ())


def block(*texts, bid=0):
    return BasicBlock(bid, [ins(t, 0x1000 + k) for k, t in enumerate(texts)])


@pytest.mark.parametrize(
    "src, expected",
    [
        ("push 0x401000", "push [addr]"),
        ("mov eax, 4", "mov eax, 4"),
        ('push "hello"', "push [str]"),
        ("push 401000h", "push [addr]"),
        ("mov eax, 0ffffh", "mov eax, 0ffffh"),
        ("mov eax, [ebp+0x12345]", "mov eax, [ebp+[addr]]"),
        ("push 'it''s'", "push [str][str]"),
    ],
)
def test_normalize(src, expected):
    assert normalize(ins(src)).text() == expected


OPERANDS = st.one_of(
    st.sampled_from(["eax", "ebx", "[esp+4]", "4", "0x10", "0x401000", "12345h", "'s'", '"x y"', "offset s"]),
    st.text(alphabet="abcdefx0123456789[]+'\" ", max_size=12),
)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["mov", "push", "call", "lea"]), st.lists(OPERANDS, max_size=3))
def test_normalize_idempotent(mn, ops):
    once = normalize(Instruction(0, mn, tuple(ops)))
    twice = normalize(Instruction(0, once.mnemonic, once.operands))
    assert once == twice


def _table():
    return EmbeddingTable(2, {"mov eax, 1": [1.0, 0.0], "ret": [0.0, 1.0]}, [9.0, 9.0])


def test_table_embedding_mean_and_oov():
    t = _table()
    assert np.array_equal(embed_block_table(block("ret"), t), [0.0, 1.0])
    assert np.allclose(embed_block_table(block("mov eax, 1", "ret"), t), [0.5, 0.5])
    out = embed_block_table(block("mov eax, 1", "ret", "nop"), t)
    assert np.allclose(out, (np.array([1, 0]) + [0, 1] + [9, 9]) / 3)
    assert np.array_equal(embed_block_table(BasicBlock(0, []), t), [0.0, 0.0])


def test_table_embedding_order_invariant():
    t = _table()
    a = embed_block_table(block("mov eax, 1", "ret", "nop"), t)
    b = embed_block_table(block("nop", "mov eax, 1", "ret"), t)
    assert np.allclose(a, b)


def test_table_file_roundtrip(tmp_path):
    t = _table()
    path = tmp_path / "t.tsv"
    path.write_text(t.dump())
    u = EmbeddingTable.load(path)
    assert u.dim == 2 and np.array_equal(u.oov_vector, t.oov_vector)
    assert all(np.array_equal(u.entries[k], v) for k, v in t.entries.items())


def test_table_rejects_bad_dimension():
    with pytest.raises(ValueError):
        EmbeddingTable(2, {"ret": [1.0, 2.0, 3.0]})
    with pytest.raises(ValueError):
        EmbeddingTable.parse("ret\t1 2\n")


def test_magic_counts():
    cfg = extract_cfg("1000 mov eax, 1\n1005 ret\n")
    v = dict(zip(MAGIC_FEATURES, embed_block_magic(cfg.blocks[0], cfg)))
    assert v["mov"] == 1 and v["termination"] == 1
    assert v["total_instructions"] == 2 and v["instructions_in_block"] == 2
    assert v["numeric_constants"] == 1 and v["offspring"] == 0

    cfg = extract_cfg("1000 dd 1\n1004 dd 2\n1008 dd 3\n100c ret\n")
    v = dict(zip(MAGIC_FEATURES, embed_block_magic(cfg.blocks[0], cfg)))
    assert v["data_declaration"] == 3

    cfg = extract_cfg(COND)
    degrees = [embed_block_magic(b, cfg)[MAGIC_FEATURES.index("offspring")] for b in cfg.blocks]
    assert degrees == [2, 1, 0]


def _oracle_sign_count(blk, seed):
    total = 0.0
    for i in blk.instructions:
        n = normalize(i)
        toks = [f"0:{n.mnemonic}"] + [f"{k + 1}:{op}" for k, op in enumerate(n.operands)]
        for t in toks:
            h = hashlib.blake2b(t.encode(), digest_size=8, key=str(seed).encode()).digest()
            total += -1.0 if h[7] & 0x80 else 1.0
    return total


def test_hash_embedding_dim_one_is_signed_count():
    blk = block("mov eax, 1", "push 0x401000", "ret")
    out = embed_block_hash(blk, 1, seed=3)
    assert out.shape == (1,)
    assert out[0] == pytest.approx(_oracle_sign_count(blk, 3) / 3)


def test_hash_embedding_deterministic_and_seeded():
    blk = block("mov eax, 1", "ret")
    assert np.array_equal(embed_block_hash(blk, 32, 0), embed_block_hash(blk, 32, 0))
    assert not np.array_equal(embed_block_hash(blk, 32, 0), embed_block_hash(blk, 32, 1))
    with pytest.raises(ValueError):
        embed_block_hash(blk, 0)


def test_hash_embedding_operand_order_matters_only_through_hashes():
    a = embed_block_hash(block("mov eax, ebx"), 1024, 0)
    b = embed_block_hash(block("mov ebx, eax"), 1024, 0)
    # positions are part of the token, so swapping operands changes buckets
    assert not np.array_equal(a, b)
    assert a.sum() == pytest.approx(_oracle_sign_count(block("mov eax, ebx"), 0))


def test_featurize_traced_cfg():
    cfg = extract_cfg(COND, "s")
    g = featurize_cfg(cfg, HashEmbedder(16), label=1, domain=1)
    assert g.X.shape == (3, 16)
    assert np.count_nonzero(g.A) == 3
    assert g.Y.tolist() == [0.0, 1.0] and g.d == 1 and g.sample_id == "s"


def test_featurize_single_block_and_multi_edge():
    g = featurize_cfg(extract_cfg("1000 ret\n"), MagicEmbedder())
    assert g.A.tolist() == [[0]]
    g = featurize_cfg(extract_cfg("1000 cmp eax, 1\n1003 je L1\nL1:\n1005 ret\n"), MagicEmbedder())
    assert g.A[0, 1] == 2
    assert not np.array_equal(g.A, g.A.T)


def test_graph_json_roundtrip(tmp_path):
    g = featurize_cfg(extract_cfg(COND, "s"), HashEmbedder(8), label=1, domain=1)
    g.save(tmp_path / "g.json")
    h = AttributedGraph.load(tmp_path / "g.json")
    assert np.array_equal(g.X, h.X) and np.array_equal(g.A, h.A) and np.array_equal(g.Y, h.Y)


def test_make_embedder():
    assert isinstance(make_embedder("magic"), MagicEmbedder)
    assert make_embedder("hash", dim=7).dim == 7
    assert isinstance(make_embedder("table", table=_table()), TableEmbedder)
    with pytest.raises(ValueError):
        make_embedder("table")
    with pytest.raises(ValueError):
        make_embedder("palm")


def test_content_opcodes_and_symbols():
    text = "1000 mov eax, 1\n1005 mov ebx, 2\n100a lea eax, [ebx+4]\n100d mov ecx, 3\n1012 ret\n"
    v = extract_content_features(text)
    assert v["opcode:mov"] == 3 and v["opcode:ret"] == 1
    v = extract_content_features("1000 lea eax, [ebx+4]\n")
    assert v["symbol:["] == 1 and v["symbol:]"] == 1 and v["symbol:+"] == 1 and v["symbol:-"] == 0


def test_content_section_proportion():
    lines = [f".text:{0x1000 + k:08x} nop" for k in range(4)]
    lines += [f".data:{0x2000 + k:08x} db 0" for k in range(6)]
    v = extract_content_features("\n".join(lines) + "\n")
    assert v["section:.text"] == pytest.approx(0.4)
    assert v["section:.data"] == pytest.approx(0.6)


def test_content_families_fixed_and_nonnegative():
    vocab = load_vocab()
    a = extract_content_features(COND, vocab)
    b = extract_content_features("", vocab)
    assert a.names == b.names and a.offsets == b.offsets
    assert len(a.offsets) == 9
    assert np.all(a.values >= 0)
    lo, hi = a.offsets["opcode"]
    assert np.all(a.values[lo:hi] == np.round(a.values[lo:hi]))
