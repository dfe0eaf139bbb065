"""Generate the synthetic desk-scale corpora as JSON-lines files.

Writes a detection corpus (with train/validation/test splits), a matching
synonym lexicon for the substitution attack, and a segmentation corpus.

Usage:
    python scripts/make_synthetic_data.py --out-dir data/ [--n-detection 2000]
        [--n-segmentation 500] [--seed 42] [--generators]
"""

import argparse
import os
import sys

from mgtd import synthetic
from mgtd.cli import dispatch
from mgtd.corpus import save_documents


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", dest="out_dir", required=True)
    parser.add_argument("--n-detection", type=int, default=2000)
    parser.add_argument("--n-segmentation", type=int, default=500)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--generators", action="store_true",
                        help="attach generator labels for the multiclass task")
    args = parser.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    docs = synthetic.make_detection_corpus(args.n_detection, seed=args.seed,
                                           generators=args.generators)
    detection = os.path.join(args.out_dir, "detection.jsonl")
    save_documents(docs, detection)

    lexicon = synthetic.make_fixture_lexicon(docs)
    lexicon_path = os.path.join(args.out_dir, "lexicon.txt")
    with open(lexicon_path, "w", encoding="utf-8") as fh:
        for word in sorted(lexicon):
            fh.write(f"{word}: {', '.join(lexicon[word])}\n")

    seg = synthetic.make_segmentation_corpus(args.n_segmentation, seed=args.seed)
    segmentation = os.path.join(args.out_dir, "segmentation.jsonl")
    save_documents(seg, segmentation)

    split_path = os.path.join(args.out_dir, "splits.json")
    code = dispatch(["split", "--in", detection, "--out", split_path,
                     "--seed", str(args.seed)])
    if code != 0:
        return code
    print(f"wrote {detection}, {lexicon_path}, {segmentation}, {split_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
