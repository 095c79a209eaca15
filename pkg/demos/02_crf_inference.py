"""Linear-chain CRF on a 3-tag toy problem, checked against brute-force
enumeration of every path.

Run: python3 demos/02_crf_inference.py
"""

import itertools

import numpy as np

from slu import autodiff as ad
from slu.decoders import CrfHead

rng = np.random.default_rng(1)
n_tags, n_steps, d = 3, 4, 6

crf = CrfHead(d, n_tags, rng)
# Randomize the transition table so the demo exercises real structure.
crf.T.data[:n_tags, :n_tags] = rng.normal(size=(n_tags, n_tags))
crf.T.data[crf.begin, :n_tags] = rng.normal(size=n_tags)
crf.T.data[:n_tags, crf.end] = rng.normal(size=n_tags)

emissions = rng.normal(size=(1, n_steps, n_tags))
mask = np.ones((1, n_steps), dtype=bool)

log_z = crf.log_partition(ad.Tensor(emissions), mask).item()

# Brute force: score every one of 3^4 = 81 paths directly.
T = crf.T.data
scores = {}
for path in itertools.product(range(n_tags), repeat=n_steps):
    s = T[crf.begin, path[0]] + emissions[0, 0, path[0]]
    for t in range(1, n_steps):
        s += T[path[t - 1], path[t]] + emissions[0, t, path[t]]
    s += T[path[-1], crf.end]
    scores[path] = s

brute_log_z = np.logaddexp.reduce(sorted(scores.values()))
print(f"forward algorithm log Z = {log_z:.8f}")
print(f"enumerated       log Z = {brute_log_z:.8f}")

best_path = max(scores, key=scores.get)
viterbi_path = crf.viterbi(emissions, mask)[0]
print(f"best enumerated path = {list(best_path)}")
print(f"viterbi path         = {viterbi_path}")

# Path probabilities from the CRF sum to one.
total = sum(np.exp(s - log_z) for s in scores.values())
print(f"sum of path probabilities = {total:.6f}")

# The negative log likelihood of the best path is the smallest possible.
gold = np.array([list(best_path)])
nll_best = crf.nll(ad.Tensor(emissions), gold, mask).item()
worst = min(scores, key=scores.get)
nll_worst = crf.nll(ad.Tensor(emissions), np.array([list(worst)]), mask).item()
print(f"NLL(best path) = {nll_best:.4f}  NLL(worst path) = {nll_worst:.4f}")
