"""Python access to the EmpGAN core library."""

from ._empgan import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DivergenceError,
    bleu,
    distinct_n,
    evaluate,
    evaluate_files,
    extract_emotion_words,
    generate,
    gradcheck,
    prepare,
    read_artifact_lines,
    rouge_l,
    rouge_n,
    split_dataset,
    tokenize,
    train,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "DivergenceError",
    "bleu",
    "distinct_n",
    "evaluate",
    "evaluate_files",
    "extract_emotion_words",
    "generate",
    "gradcheck",
    "prepare",
    "read_artifact_lines",
    "rouge_l",
    "rouge_n",
    "split_dataset",
    "tokenize",
    "train",
]
