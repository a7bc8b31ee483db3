#!/usr/bin/env python3
"""Convert raw Planetoid files into a graphmix bundle directory.

The citation graphs (Cora, CiteSeer, PubMed) are distributed as pickled
scipy matrices — the `ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`
files from https://github.com/kimiyoung/planetoid (also vendored by most
GNN frameworks under `data/<Name>/raw/`). This sandbox has no network
access, so fetch those eight files on a machine that does, then run:

    python scripts/convert_planetoid.py --raw /path/to/raw --name cora --out data/cora

The output directory is a graphmix bundle (features.tsv, labels.tsv,
edges.tsv, meta.json, splits.json) whose "public" split is the standard
Planetoid split: train = the labeled training instances, val = the next
500 nodes, test = the held-out test index file. The experiment protocol
here regenerates ratio splits on top of the loaded graph, so only the
graph content must match, not the split.

Index reordering follows the reference loader (Kipf & Welling's GCN
repo): test instances arrive shuffled in `tx`/`ty` and are put back at
the positions named by `test.index`. CiteSeer has isolated test nodes
missing from `tx`; they get zero feature rows and an unlabeled marker
("-") instead of a silently wrong class 0.

Requires numpy and scipy.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

NAMES = ("cora", "citeseer", "pubmed")
PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def load_part(raw: Path, name: str, part: str):
    path = raw / f"ind.{name}.{part}"
    if not path.is_file():
        sys.exit(f"missing {path} — copy all eight ind.{name}.* files into --raw")
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def load_test_index(raw: Path, name: str) -> np.ndarray:
    path = raw / f"ind.{name}.test.index"
    if not path.is_file():
        sys.exit(f"missing {path}")
    return np.array([int(line) for line in path.read_text().split()], dtype=np.int64)


def convert(raw: Path, name: str, out: Path) -> None:
    parts = {part: load_part(raw, name, part) for part in PARTS}
    test_idx_reorder = load_test_index(raw, name)
    test_idx_range = np.sort(test_idx_reorder)

    x, tx, allx = parts["x"], parts["tx"], parts["allx"]
    y, ty, ally = parts["y"], parts["ty"], parts["ally"]

    labeled_test = set(int(i) for i in test_idx_reorder)
    if name == "citeseer":
        # CiteSeer's test block has gaps (isolated, unlabeled documents).
        # Extend tx/ty with zero rows over the full index range, exactly as
        # the reference loader does; the zero label rows become "-" below.
        full = range(test_idx_range.min(), test_idx_range.max() + 1)
        tx_extended = sp.lil_matrix((len(full), x.shape[1]), dtype=np.float64)
        tx_extended[test_idx_range - test_idx_range.min(), :] = tx.tolil()
        tx = tx_extended
        ty_extended = np.zeros((len(full), y.shape[1]))
        ty_extended[test_idx_range - test_idx_range.min(), :] = ty
        ty = ty_extended

    # The stacked matrix holds test rows in file order at the tail; put each
    # row back at the node index named by test.index (reference reorder).
    features = sp.vstack((allx, tx)).tolil()
    features[test_idx_reorder, :] = features[test_idx_range, :]
    features = features.tocsr()

    labels = np.vstack((ally, ty))
    labels[test_idx_reorder, :] = labels[test_idx_range, :]

    num_nodes = features.shape[0]
    num_classes = labels.shape[1]
    graph = parts["graph"]

    out.mkdir(parents=True, exist_ok=True)

    dense = features.toarray()
    with (out / "features.tsv").open("w") as fh:
        for row in dense:
            fh.write("\t".join(repr(float(v)) if v else "0" for v in row))
            fh.write("\n")

    with (out / "labels.tsv").open("w") as fh:
        for i in range(num_nodes):
            row = labels[i]
            if row.sum() == 0:
                fh.write("-\n")  # isolated citeseer test nodes
            else:
                fh.write(f"{int(np.argmax(row))}\n")

    edges = set()
    for u, neighbors in graph.items():
        for v in neighbors:
            if u == v or u >= num_nodes or v >= num_nodes:
                continue
            edges.add((min(u, v), max(u, v)))
    with (out / "edges.tsv").open("w") as fh:
        for u, v in sorted(edges):
            fh.write(f"{u}\t{v}\n")

    meta = {
        "num_nodes": int(num_nodes),
        "num_classes": int(num_classes),
        "feature_dim": int(features.shape[1]),
        "dataset": name,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    train = list(range(x.shape[0]))
    # The standard 500-node validation block sits inside the allx region on
    # all three datasets; the min() is a guard, not a behavior change.
    val = list(range(x.shape[0], min(x.shape[0] + 500, allx.shape[0])))
    test = [int(i) for i in test_idx_range if int(i) in labeled_test]
    splits = {"public": {"train": train, "val": val, "test": test}}
    (out / "splits.json").write_text(json.dumps(splits, indent=2) + "\n")

    print(
        f"{name}: {num_nodes} nodes, {len(edges)} edges, "
        f"{features.shape[1]} features, {num_classes} classes → {out}"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--raw", type=Path, required=True, help="directory with ind.<name>.* files")
    parser.add_argument("--name", choices=NAMES, required=True)
    parser.add_argument("--out", type=Path, required=True, help="bundle output directory")
    args = parser.parse_args()
    convert(args.raw, args.name, args.out)


if __name__ == "__main__":
    main()
