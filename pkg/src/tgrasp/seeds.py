"""Deterministic seed fan-out: one global seed, per-stage derived streams."""

import hashlib

import numpy as np


def _label_entropy(label):
    digest = hashlib.sha256(str(label).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_sequence(root, *labels):
    """SeedSequence for (root seed, stage labels); stable across runs."""
    return np.random.SeedSequence(
        [int(root) & 0xFFFFFFFFFFFFFFFF] + [_label_entropy(l) for l in labels])


def derive_rng(root, *labels):
    return np.random.default_rng(derive_sequence(root, *labels))


def derive_int(root, *labels):
    """Stable u64 from (root, labels), e.g. for provenance fields."""
    return int(derive_sequence(root, *labels).generate_state(1, np.uint64)[0])
