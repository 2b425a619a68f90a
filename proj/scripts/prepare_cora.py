#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content / cora.cites) into the
edge-list / CSV / label formats read by `lpsl`.

Nodes are numbered in cora.content row order. Class names are sorted
alphabetically and numbered from 0. Citation direction is dropped and
duplicate or reciprocal citations collapse to one undirected edge.

The LINQS files ship inside several PyPI wheels, e.g.:

    pip download --no-deps pgl==2.2.6
    python3 -c "import zipfile,glob; z=zipfile.ZipFile(glob.glob('pgl-*.whl')[0]); \
        [open(n.split('/')[-1],'wb').write(z.read(n)) for n in \
        ('pgl/data/cora/cora.content','pgl/data/cora/cora.cites')]"
    scripts/prepare_cora.py cora.content cora.cites data/cora
"""
import argparse
import pathlib


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("content")
    ap.add_argument("cites")
    ap.add_argument("outdir")
    args = ap.parse_args()

    rows = [line.split() for line in open(args.content) if line.strip()]
    ids = {r[0]: i for i, r in enumerate(rows)}
    classes = sorted({r[-1] for r in rows})
    class_id = {c: k for k, c in enumerate(classes)}

    edges = set()
    for line in open(args.cites):
        if not line.strip():
            continue
        a, b = line.split()
        u, v = ids[a], ids[b]
        if u != v:
            edges.add((min(u, v), max(u, v)))

    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "cora.edges", "w") as f:
        f.write(f"# cora citation graph: {len(rows)} nodes, {len(edges)} undirected edges\n")
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")
    with open(out / "cora.features.csv", "w") as f:
        for r in rows:
            f.write(",".join(r[1:-1]) + "\n")
    with open(out / "cora.labels", "w") as f:
        for i, r in enumerate(rows):
            f.write(f"{i} {class_id[r[-1]]}\n")
    with open(out / "classes.txt", "w") as f:
        for k, c in enumerate(classes):
            f.write(f"{k} {c}\n")


if __name__ == "__main__":
    main()
