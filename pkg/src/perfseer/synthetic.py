"""Synthetic commit/file datasets with a known labeling rule."""

from __future__ import annotations

import numpy as np

from .dataset import CLEAN, DEFECTIVE, CommitFileRecord, Dataset


def threshold_dataset(
    n: int = 2000,
    seed: int = 0,
    threshold: float = 50,
    noise: float = 0.05,
    owners: int = 13,
    files: int = 40,
    max_lines_added: int = 100,
) -> Dataset:
    """Records labeled defective iff ``lines_added > threshold``, then labels flipped
    with probability ``noise``.

    All other attributes are independent of the label, except that
    ``comment_lines = round(0.3 * sloc)``.
    """
    rng = np.random.default_rng(seed)
    lines_added = rng.integers(0, max_lines_added + 1, size=n)
    lines_removed = rng.integers(0, 60, size=n)
    file_age = rng.uniform(0, 800, size=n)
    sloc = rng.integers(1, 1100, size=n)
    maturity = rng.uniform(0, 1000, size=n)
    since_last = rng.exponential(10.0, size=n)
    owner = rng.integers(0, owners, size=n)
    file_idx = rng.integers(0, files, size=n)
    flip = rng.random(n) < noise
    records = []
    for i in range(n):
        defective = bool(lines_added[i] > threshold) != bool(flip[i])
        records.append(
            CommitFileRecord(
                commit_id=f"{i:040x}",
                file_name=f"src/module_{file_idx[i]:03d}.py",
                owner=f"dev{owner[i]:02d}",
                lines_added=int(lines_added[i]),
                lines_removed=int(lines_removed[i]),
                file_age_days=float(file_age[i]),
                sloc=int(sloc[i]),
                comment_lines=int(round(0.3 * sloc[i])),
                maturity_days=float(maturity[i]),
                time_since_last_commit_hours=float(since_last[i]),
                label=DEFECTIVE if defective else CLEAN,
            )
        )
    provenance = {
        "source": {"synthetic": "threshold", "n": n, "seed": seed, "threshold": threshold, "noise": noise},
        "steps": ["synthesize"],
    }
    return Dataset(records, provenance=provenance)


def imbalanced_dataset(defective: int = 197, clean: int = 4426, seed: int = 0) -> Dataset:
    """Dataset with exactly the given class counts; attributes are random."""
    rng = np.random.default_rng(seed)
    n = defective + clean
    labels = [DEFECTIVE] * defective + [CLEAN] * clean
    order = rng.permutation(n)
    records = []
    for k, i in enumerate(order):
        records.append(
            CommitFileRecord(
                commit_id=f"{k:040x}",
                file_name=f"pkg/file_{k % 338:03d}.py",
                owner=f"dev{k % 13:02d}",
                lines_added=int(rng.integers(0, 643)),
                lines_removed=int(rng.integers(0, 996)),
                file_age_days=float(rng.uniform(0, 803)),
                sloc=int(rng.integers(0, 1110)),
                comment_lines=int(rng.integers(0, 420)),
                maturity_days=float(rng.uniform(0, 997)),
                time_since_last_commit_hours=float(rng.uniform(0, 266.7)),
                label=labels[i],
            )
        )
    return Dataset(records, provenance={"source": {"synthetic": "imbalanced", "seed": seed}})
