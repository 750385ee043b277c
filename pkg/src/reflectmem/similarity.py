"""Pairwise task-key similarity and a same-site clustering score."""

from __future__ import annotations

import csv
import io
import json
from typing import NamedTuple, Sequence

import numpy as np

from .core import Task
from .embedding import EmbeddingProvider
from .errors import SingleCategory


class Separation(NamedTuple):
    mean_intra: float
    mean_inter: float
    margin: float


def pairwise_matrix(tasks: Sequence[Task], embedder: EmbeddingProvider) -> np.ndarray:
    """Cosine similarity between the key texts of every pair of tasks."""
    if len(tasks) < 2:
        raise ValueError("pairwise_matrix needs at least 2 tasks")
    emb = np.stack(embedder.embed([t.key_text for t in tasks])).astype(np.float64)
    unit = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    sim = unit @ unit.T
    sim = (sim + sim.T) / 2
    # self-similarity is 1 by definition; avoid last-ulp drift from normalization
    np.fill_diagonal(sim, 1.0)
    return np.clip(sim, -1.0, 1.0)


def category_separation(matrix: np.ndarray, labels: Sequence[str]) -> Separation:
    """Mean off-diagonal similarity within sites vs across sites."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or len(labels) != n:
        raise ValueError("labels must match the matrix order")
    if len(set(labels)) < 2:
        raise SingleCategory("category separation needs at least two categories")
    lab = np.asarray(labels, dtype=object)
    same = lab[:, None] == lab[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    intra = matrix[same & off_diag]
    inter = matrix[~same]
    if intra.size == 0:
        raise ValueError("no category has two or more members")
    mean_intra, mean_inter = float(intra.mean()), float(inter.mean())
    return Separation(mean_intra, mean_inter, mean_intra - mean_inter)


def matrix_to_csv(matrix: np.ndarray, ids: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task_id", *ids])
    for tid, row in zip(ids, np.asarray(matrix)):
        writer.writerow([tid, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def separation_stats(sep: Separation, labels: Sequence[str]) -> dict:
    return {
        "mean_intra": sep.mean_intra,
        "mean_inter": sep.mean_inter,
        "margin": sep.margin,
        "n_tasks": len(labels),
        "n_categories": len(set(labels)),
    }


def stats_json(sep: Separation, labels: Sequence[str]) -> str:
    return json.dumps(separation_stats(sep, labels), sort_keys=True)
