#!/usr/bin/env python3
"""Writes hi_bins.ssf: chain-shaped sentences covering every SentLen and
TreeDepth bin twice."""

import pathlib

# (word count, tree depth) per sentence.
SHAPES = [
    (3, 1), (5, 2), (6, 3), (8, 5), (10, 6), (12, 8), (14, 9), (16, 11),
    (18, 12), (20, 20), (22, 2), (25, 4), (26, 7), (28, 10), (30, 13), (32, 15),
]
GENDERS = ["m", "f", "any", "n"]
NUMBERS = ["sg", "pl", "any"]
PERSONS = ["3", "1", "2", "3h", "1h", "2h", "any"]
NOUNS = ["Gara", "peda", "nagara", "xaraKwa", "pahAda", "naxI", "rAswA", "bagIcA"]


def sentence(idx, length, depth):
    lines = [f"<Sentence id='b{idx}'>"]
    extra = length - depth
    words = [1] * depth
    targets = list(range(depth - 1)) or [0]
    for k in range(extra):
        words[targets[k % len(targets)]] += 1
    for c in range(1, depth + 1):
        n = words[c - 1]
        if c == depth:
            head = f"cala{idx}"
            lines.append(f"{c}\t((\tVGF\t<fs name='VGF' head='{head}'>")
            g = GENDERS[idx % len(GENDERS)]
            num = NUMBERS[idx % len(NUMBERS)]
            per = PERSONS[idx % len(PERSONS)]
            lines.append(f"{c}.1\t{head}\tVM\t<fs af='cala,v,{g},{num},{per},,wA,wA' name='{head}'>")
            for j in range(2, n + 1):
                lines.append(f"{c}.{j}\thE\tVAUX\t<fs af='hE,v,any,{num},any,,hE,hE'>")
        else:
            name = "NP" if c == 1 else f"NP{c}"
            drel = "k1:VGF" if c == depth - 1 else f"r6:NP{c + 1}"
            noun = NOUNS[(idx + c) % len(NOUNS)]
            num = "pl" if (idx + c) % 2 else "sg"
            lines.append(f"{c}\t((\tNP\t<fs name='{name}' drel='{drel}' head='{noun}'>")
            for j in range(1, n):
                lines.append(f"{c}.{j}\tbadZA\tJJ\t<fs af='badZA,adj,m,{num},,d,,'>")
            tag = "NNS" if num == "pl" else "NN"
            lines.append(f"{c}.{n}\t{noun}\t{tag}\t<fs af='{noun},n,m,{num},3,d,0,0' name='{noun}'>")
        lines.append("\t))\t\t")
    lines.append("</Sentence>")
    return "\n".join(lines)


def main():
    body = "\n\n".join(sentence(i + 1, l, d) for i, (l, d) in enumerate(SHAPES))
    out = pathlib.Path(__file__).with_name("hi_bins.ssf")
    out.write_text("<document>\n" + body + "\n</document>\n", encoding="utf-8")


if __name__ == "__main__":
    main()
