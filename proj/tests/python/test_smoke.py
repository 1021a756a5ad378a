import numpy as np
import pytest

import mathrec


def test_tokenize_join_roundtrip():
    toks = mathrec.tokenize("x^{2}")
    assert toks == ["x", "^", "{", "2", "}"]
    assert mathrec.join(toks) == "x ^ { 2 }"
    assert mathrec.tokenize(mathrec.join(toks)) == toks


def test_position_labels():
    depths, rel = mathrec.position_labels(mathrec.tokenize("x^{2}"))
    assert depths == [0, 1, 1, 1, 1]
    assert rel == ["middle", "upper", "upper", "upper", "upper"]


def test_vocab_roundtrip(tmp_path):
    vocab = mathrec.Vocab.build([["a", "b"], ["b", "+"]])
    assert vocab.classes == ["+", "a", "b"]
    assert vocab.num_classes == 3
    ids = vocab.encode_ids(["b", "+", "a"])
    assert vocab.decode_ids(ids) == ["b", "+", "a"]
    path = tmp_path / "vocab.txt"
    vocab.save(str(path))
    assert mathrec.Vocab.load(str(path)).classes == vocab.classes


def test_counting():
    vocab = mathrec.Vocab.build([["a", "b", "+"]])
    counts = mathrec.count_vector(["a", "+", "a"], vocab)
    assert counts == [1.0, 2.0, 0.0]  # classes sort to [+, a, b]
    assert mathrec.smooth_l1([0.5], [0.0]) == pytest.approx(0.125)
    assert mathrec.smooth_l1([2.0], [0.0]) == pytest.approx(1.5)


def test_metrics():
    assert mathrec.edit_distance(["a", "b"], ["a", "c"]) == 1
    report = mathrec.evaluate([["a"], ["b"]], [["a"], ["c"]])
    assert report["n"] == 2
    assert report["exprate"] == pytest.approx(50.0)
    assert report["distances"] == [0, 1]
    assert report["exprate"] <= report["le1"] <= report["le2"] <= report["le3"]


def test_synth_deterministic():
    a = mathrec.synth_expression(7, 2)
    b = mathrec.synth_expression(7, 2)
    assert a == b
    depths, _ = mathrec.position_labels(a)  # every sample parses
    assert len(depths) == len(a)
    assert a != mathrec.synth_expression(8, 2)


def test_grammar_terminals():
    terms = mathrec.grammar_terminals()
    assert terms == sorted(terms)
    assert len(terms) == len(set(terms))
    assert "\\frac" in terms


def test_render():
    img = mathrec.render(mathrec.tokenize("a + b"))
    assert isinstance(img, np.ndarray)
    assert img.dtype == np.float32
    assert img.shape[0] == 64
    assert img.max() == pytest.approx(1.0)
    assert img.min() == 0.0


def test_rasterize():
    img = mathrec.rasterize([[[0.0, 0.0], [10.0, 10.0]]], height=32)
    assert img.shape[0] == 32
    assert img.max() > 0


def test_parse_inkml(tmp_path):
    doc = (
        '<ink xmlns="http://www.w3.org/2003/InkML">'
        '<annotation type="truth">a + b</annotation>'
        "<trace>1 2, 3 4</trace>"
        "<trace>5 6, 7 8, 9 10</trace>"
        "</ink>"
    )
    path = tmp_path / "sample.inkml"
    path.write_text(doc)
    traces, truth = mathrec.parse_inkml(str(path))
    assert truth == "a + b"
    assert len(traces) == 2
    assert traces[0][0] == [1.0, 2.0]


def test_corpus_and_pgm(tmp_path):
    out = tmp_path / "corpus"
    n = mathrec.build_synthetic_corpus(str(out), seed=1, n=3, max_depth=2)
    assert n == 3
    img = mathrec.read_pgm(str(out / "images" / "00000.pgm"))
    assert img.dtype == np.float32
    assert img.shape[0] == 64
    assert 0.0 <= img.min() <= img.max() <= 1.0


def test_errors_surface():
    with pytest.raises(mathrec.MathrecError):
        mathrec.tokenize("\\nosuchcommand")
    with pytest.raises(mathrec.MathrecError):
        mathrec.tokenize("{a")
    with pytest.raises(mathrec.MathrecError):
        mathrec.Vocab.build([])
