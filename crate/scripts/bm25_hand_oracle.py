"""Hand evaluation of BM25 on the two-document fixture.

d1 = "cash flow cash", d2 = "revenue growth", query "cash", k1 = 1.5, b = 0.75.
Prints the score of d1; the Rust implementation must agree to 1e-4.
"""

import math

docs = {"d1": "cash flow cash".split(), "d2": "revenue growth".split()}
k1, b = 1.5, 0.75
n = len(docs)
avgdl = sum(len(d) for d in docs.values()) / n
term = "cash"
df = sum(term in d for d in docs.values())
idf = math.log((n - df + 0.5) / (df + 0.5) + 1)
d = docs["d1"]
f = d.count(term)
score = idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(d) / avgdl))
print(f"{score:.7f}")
assert abs(score - 0.9303) < 1e-4
