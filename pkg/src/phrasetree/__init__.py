"""phrasetree: rank paraphrase candidates for joint lexical diversity and
semantic faithfulness with a metric-split tree, assemble ordered synthetic
schema variants, serialize DST prompts and evaluate schema-robustness
metrics."""

__version__ = "0.1.0"
