"""Brute-force TU / TR / TD.

#(x) is found by scanning every topic list for every word, with no
Counter or shared helper from the package. Arithmetic is exact
(Fraction) and rounded to float once at the end.
"""
from fractions import Fraction


def occurrences(topics, word):
    n = 0
    for topic in topics:
        for w in topic:
            if w == word:
                n += 1
                break
    return n


def tu_tr_td(topics):
    K = len(topics)
    N = len(topics[0])
    tu = tr = td = Fraction(0)
    for topic in topics:
        for word in topic:
            c = occurrences(topics, word)
            tu += Fraction(1, c * N * K)
            if K > 1:
                tr += Fraction(c - 1, (K - 1) * N * K)
            if c == 1:
                td += Fraction(1, N * K)
    return float(tu), float(tr), float(td)
