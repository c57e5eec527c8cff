#!/usr/bin/env python3
"""Convert the public-domain 1769 King James Bible (npm package `kjv`,
json/verses-1769.json) into a pre-tokenized corpus: one verse per line,
lowercased, punctuation split into separate tokens.

    npm pack kjv && tar xzf kjv-1.0.0.tgz
    python3 tools/prepare_kjv.py package/json/verses-1769.json > data/kjv.txt
"""
import json
import re
import sys

TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)?|[^\sa-z]")


def main(path):
    with open(path, encoding="utf-8") as f:
        verses = json.load(f)
    for text in verses.values():
        text = text.replace("#", "").replace("[", "").replace("]", "").lower()
        tokens = TOKEN.findall(text)
        if tokens:
            print(" ".join(tokens))


if __name__ == "__main__":
    main(sys.argv[1])
