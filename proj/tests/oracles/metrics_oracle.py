"""Independent metric values for tests/data/metrics_fixture.tsv.

Prints C++ initializers for tests/test_metrics.cpp and tests/acceptance.cpp:
per-item BLEU-2, BLEU-3, ROUGE-L, METEOR; corpus Distinct-2/3 over the
candidates; Porter stems for a word list (nltk, original algorithm); and a
hash-embedding greedy-matching score for one fixed pair.
"""
import math
import sys
import unicodedata
from collections import Counter
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
MASK = (1 << 64) - 1


def tokenize(text):
    text = unicodedata.normalize("NFC", text).lower()
    tokens, cur = [], ""
    for ch in text:
        if ch.isspace():
            if cur:
                tokens.append(cur)
            cur = ""
        elif unicodedata.category(ch).startswith("P"):
            if cur:
                tokens.append(cur)
            cur = ""
            tokens.append(ch)
        else:
            cur += ch
    if cur:
        tokens.append(cur)
    return tokens


def grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def bleu(cand, ref, n):
    if not cand:
        return 0.0
    logs = []
    for k in range(1, n + 1):
        c, r = Counter(grams(cand, k)), Counter(grams(ref, k))
        clipped = sum(min(v, r[g]) for g, v in c.items())
        total = sum(c.values())
        if k == 1:
            if clipped == 0:
                return 0.0
            logs.append(math.log(clipped / total))
        else:
            logs.append(math.log((clipped + 1) / (total + 1)))
    bp = 1.0 if len(cand) > len(ref) else math.exp(1 - len(ref) / len(cand))
    return 100 * bp * math.exp(sum(logs) / n)


def lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


def rouge(cand, ref):
    if not cand or not ref:
        return 0.0
    l = lcs(tuple(cand), tuple(ref))
    if l == 0:
        return 0.0
    p, r = l / len(cand), l / len(ref)
    return 100 * 2 * p * r / (p + r)


def meteor(cand, ref):
    if not cand or not ref:
        return 0.0
    used_c, used_r, links = set(), set(), []
    for key in (lambda t: t, STEMMER.stem):
        for i, t in enumerate(cand):
            if i in used_c:
                continue
            for j, u in enumerate(ref):
                if j not in used_r and key(u) == key(t):
                    used_c.add(i)
                    used_r.add(j)
                    links.append((i, j))
                    break
    if not links:
        return 0.0
    links.sort()
    chunks = 1 + sum(1 for a, b in zip(links, links[1:]) if not (b[0] == a[0] + 1 and b[1] == a[1] + 1))
    m = len(links)
    p, r = m / len(cand), m / len(ref)
    fmean = 10 * p * r / (r + 9 * p)
    return 100 * fmean * (1 - 0.5 * (chunks / m) ** 3)


def distinct(responses, n):
    all_grams = [g for r in responses for g in grams(r, n)]
    if not all_grams:
        return 0.0
    return 100 * len(set(all_grams)) / len(all_grams)


def fnv1a(s):
    h = 0xcbf29ce484222325
    for b in s.encode("utf-8"):
        h = ((h ^ b) * 0x100000001b3) & MASK
    return h


def hash_vector(token, dim, seed=0):
    state = fnv1a(token) ^ seed
    out = []
    for _ in range(dim):
        state = (state + 0x9e3779b97f4a7c15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xbf58476d1ce4e5b9) & MASK
        z = ((z ^ (z >> 27)) * 0x94d049bb133111eb) & MASK
        z ^= z >> 31
        out.append((z >> 11) * 2.0 ** -53 * 2.0 - 1.0)
    norm = math.sqrt(sum(x * x for x in out))
    return [x / norm for x in out]


def greedy_f1(cand, ref, dim):
    ec = [hash_vector(t, dim) for t in cand]
    er = [hash_vector(t, dim) for t in ref]
    sim = [[sum(x * y for x, y in zip(a, b)) for b in er] for a in ec]
    p = sum(max(row) for row in sim) / len(ec)
    r = sum(max(sim[i][j] for i in range(len(ec))) for j in range(len(er))) / len(er)
    return max(0.0, 100 * 2 * p * r / (p + r)) if p + r > 0 else 0.0


STEM_WORDS = (
    "caresses ponies ties caress cats feed agreed plastered bled motoring sing conflated troubled sized hopping "
    "tanned falling hissing fizzed failing filing happy sky relational conditional rational valenci hesitanci "
    "digitizer conformabli radicalli differentli vileli analogousli vietnamization predication operator feudalism "
    "decisiveness hopefulness callousness formaliti sensitiviti sensibiliti triplicate formative formalize "
    "electriciti electrical hopeful goodness revival allowance inference airliner gyroscopic adjustable defensible "
    "irritant replacement adjustment dependent adoption homologou communism activate angulariti homologous "
    "effective bowdlerize probate rate cease controll roll generalization oscillators running quickly"
).split()


def main(path):
    items = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            cand, ref = line.rstrip("\n").split("\t")
            items.append((tokenize(cand), tokenize(ref)))
    print("// candidate-row values: bleu2, bleu3, rouge_l, meteor")
    for c, r in items:
        print("    {%.17g, %.17g, %.17g, %.17g}," % (bleu(c, r, 2), bleu(c, r, 3), rouge(c, r), meteor(c, r)))
    cands = [c for c, _ in items]
    print("// distinct2 = %.17g" % distinct(cands, 2))
    print("// distinct3 = %.17g" % distinct(cands, 3))
    print("// stems")
    for w in STEM_WORDS:
        print('    {"%s", "%s"},' % (w, STEMMER.stem(w)))
    c, r = tokenize("cats are running quickly"), tokenize("the cat runs quick")
    print("// hash embed_score dim 16 = %.17g" % greedy_f1(c, r, 16))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/metrics_fixture.tsv")
