"""Brute-force NPMI / C_v on a tiny corpus.

Standalone on purpose: enumerates windows explicitly and evaluates the
coherence formulas with plain floats, sharing no code with the package.
"""
import itertools
import math

EPS = 1e-12


def windows(doc, size):
    if len(doc) <= size:
        return [set(doc)]
    return [set(doc[i:i + size]) for i in range(len(doc) - size + 1)]


def probabilities(docs, size):
    wins = [w for d in docs for w in windows(d, size)]
    total = len(wins)

    def p(*words):
        return sum(all(x in w for x in words) for w in wins) / total

    return p


def npmi(p, a, b):
    joint = p(a) if a == b else p(a, b)
    return math.log((joint + EPS) / (p(a) * p(b) + EPS)) / -math.log(joint + EPS)


def cosine(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0 or nv == 0:
        return 0.0
    return sum(x * y for x, y in zip(u, v)) / (nu * nv)


def cv(topics, docs, size):
    p = probabilities(docs, size)
    scores = []
    for topic in topics:
        rows = [[npmi(p, a, b) for b in topic] for a in topic]
        agg = [sum(rows[i][j] for i in range(len(topic))) for j in range(len(topic))]
        scores.append(sum(cosine(r, agg) for r in rows) / len(topic))
    return sum(scores) / len(scores)


if __name__ == "__main__":
    mini = [["a", "b", "c"]]
    p = probabilities(mini, 2)
    print("P(a)", p("a"), "P(b)", p("b"), "P(a,b)", p("a", "b"))
    print("npmi(a,b)", repr(npmi(p, "a", "b")))
    print("cv{a,b}", repr(cv([["a", "b"]], mini, 2)))
    print("cv{a,c}", repr(cv([["a", "c"]], mini, 2)))
    print("cv{a,b,c}", repr(cv([["a", "b", "c"]], mini, 2)))
    corp = [["x", "y", "q"], ["z", "w", "r"], ["x", "y", "s"], ["w", "z", "t"]]
    print("cv paired", repr(cv([["x", "y"], ["z", "w"]], corp, 3)))
    for combo in itertools.combinations(["a", "b", "c"], 2):
        print(combo, repr(npmi(p, *combo)))
