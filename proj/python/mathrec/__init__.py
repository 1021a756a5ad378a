"""Math expression recognition: tokenization, position labels, synthesis, inference."""

from ._core import (
    MathrecError,
    Predictor,
    Vocab,
    build_synthetic_corpus,
    count_vector,
    edit_distance,
    evaluate,
    grammar_terminals,
    join,
    parse_inkml,
    position_labels,
    rasterize,
    read_pgm,
    render,
    smooth_l1,
    synth_expression,
    tokenize,
)

__all__ = [
    "MathrecError",
    "Predictor",
    "Vocab",
    "build_synthetic_corpus",
    "count_vector",
    "edit_distance",
    "evaluate",
    "grammar_terminals",
    "join",
    "parse_inkml",
    "position_labels",
    "rasterize",
    "read_pgm",
    "render",
    "smooth_l1",
    "synth_expression",
    "tokenize",
]
