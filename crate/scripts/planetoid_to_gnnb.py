#!/usr/bin/env python3
"""Convert a Planetoid archive (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into a GNNB v1 file with the standard public split.

    python3 scripts/planetoid_to_gnnb.py data/planetoid cora data/cora.gnnb

Needs numpy and scipy. Test indices missing from the graph (Citeseer) become
zero-feature, unlabeled nodes. Undirected edges are written once; duplicates
and self-loops in the source adjacency lists are dropped.
"""

import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(root: Path, name: str, part: str):
    with open(root / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(root: Path, name: str):
    x, y, tx, ty, allx, ally, graph = (load(root, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = [int(line) for line in (root / f"ind.{name}.test.index").read_text().split()]
    lo, hi = min(test_idx), max(test_idx)

    tx, ty = dense(tx), dense(ty)
    if hi - lo + 1 != len(test_idx):
        full_tx = np.zeros((hi - lo + 1, tx.shape[1]))
        full_ty = np.zeros((hi - lo + 1, ty.shape[1]))
        full_tx[np.array(test_idx) - lo] = tx
        full_ty[np.array(test_idx) - lo] = ty
        tx, ty = full_tx, full_ty

    features = np.vstack([dense(allx), tx])
    onehot = np.vstack([dense(ally), ty])
    order = sorted(test_idx)
    features[test_idx] = features[order]
    onehot[test_idx] = onehot[order]
    labels = np.where(onehot.sum(1) > 0, onehot.argmax(1), -1)

    n = features.shape[0]
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    split = {
        "train": list(range(len(dense(y)))),
        "val": list(range(len(dense(y)), len(dense(y)) + 500)),
        "test": sorted(test_idx),
    }
    return features, labels, sorted(edges), onehot.shape[1], split


def write(path: Path, features, labels, edges, classes, split):
    n, d = features.shape
    with open(path, "w") as f:
        f.write(f"# gnnb 1 {n} {len(edges)} {d} {classes}\n# features\n")
        for row in features:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")
        f.write("# labels\n" + "\n".join(str(int(c)) for c in labels) + "\n# edges\n")
        f.writelines(f"{u} {v}\n" for u, v in edges)
        for part in ("train", "val", "test"):
            f.write(f"# split {part}\n" + " ".join(map(str, split[part])) + "\n")


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    root, name, out = Path(sys.argv[1]), sys.argv[2], Path(sys.argv[3])
    features, labels, edges, classes, split = convert(root, name)
    write(out, features, labels, edges, classes, split)
    print(f"{out}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features, {classes} classes")


if __name__ == "__main__":
    main()
