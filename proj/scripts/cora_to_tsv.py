#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content, cora.cites) to the
edges.tsv / features.tsv / labels.tsv layout read by `dataset = files`.

    python3 scripts/cora_to_tsv.py path/to/cora out/cora
    GRAFENNE_CORA_DIR=out/cora ctest --test-dir build -R cora
"""

import argparse
import pathlib
import sys


def convert(src: pathlib.Path, dst: pathlib.Path) -> None:
    dst.mkdir(parents=True, exist_ok=True)
    papers = set()
    with open(src / "cora.content") as content, open(dst / "features.tsv", "w") as feats, open(
        dst / "labels.tsv", "w"
    ) as labels:
        for line in content:
            fields = line.split()
            if not fields:
                continue
            paper, words, label = fields[0], fields[1:-1], fields[-1]
            papers.add(paper)
            labels.write(f"{paper}\t{label}\n")
            for j, x in enumerate(words):
                if x != "0":
                    feats.write(f"{paper}\tw{j}\t{x}\n")
    dropped = 0
    with open(src / "cora.cites") as cites, open(dst / "edges.tsv", "w") as edges:
        for line in cites:
            fields = line.split()
            if len(fields) != 2:
                continue
            cited, citing = fields
            if cited not in papers or citing not in papers:
                dropped += 1
                continue
            edges.write(f"{citing}\t{cited}\n")
    print(f"{len(papers)} papers written to {dst}; {dropped} citations to unknown papers dropped", file=sys.stderr)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("source", type=pathlib.Path, help="directory with cora.content and cora.cites")
    parser.add_argument("out", type=pathlib.Path, help="output directory")
    args = parser.parse_args()
    convert(args.source, args.out)


if __name__ == "__main__":
    main()
