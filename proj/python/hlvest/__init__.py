"""Judgment-distribution metrics, score transforms and the hlvest command line."""

import json
import math
import sys

from ._core import (
    HlvError,
    check_finetune_metrics,
    distance_correlation,
    entropy,
    jsd,
    kl,
    normalize_scores,
    option_mappings,
    run,
    soft_cross_entropy,
    softmax_scores,
    ternary_coords,
    tvd,
    zoom,
)

__all__ = [
    "HlvError",
    "check_finetune_metrics",
    "distance_correlation",
    "entropy",
    "jsd",
    "kl",
    "main",
    "normalize_scores",
    "option_mappings",
    "read_softlabels",
    "run",
    "soft_cross_entropy",
    "softmax_scores",
    "ternary_coords",
    "tvd",
    "write_finetune_metrics",
    "zoom",
]

SOFTLABEL_FIELDS = ("id", "premise", "hypothesis", "soft_label", "source_digest", "items_digest")


def read_softlabels(path):
    """Records written by `hlvest export-softlabels`, checked for shape."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = [k for k in SOFTLABEL_FIELDS if k not in rec]
            if missing:
                raise ValueError(f"{path}:{lineno}: missing {', '.join(missing)}")
            label = rec["soft_label"]
            if len(label) != 3 or any(v < 0 for v in label) or not math.isclose(sum(label), 1.0, abs_tol=1e-9):
                raise ValueError(f"{path}:{lineno}: soft_label is not a distribution over E, N, C")
            records.append(rec)
    return records


def write_finetune_metrics(path, metrics):
    """Validates `metrics` (a dict in the layout `hlvest report` reads) and writes it."""
    text = check_finetune_metrics(json.dumps(metrics))
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")


def main():
    code, out, err = run(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
