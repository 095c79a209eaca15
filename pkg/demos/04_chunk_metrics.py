"""How BIO tags become chunks and how the evaluator scores them.

Run: python3 demos/04_chunk_metrics.py
"""

from slu.metrics import evaluate, extract_chunks

tags = ["O", "B-city", "I-city", "O", "B-airline", "B-city"]
print(f"tags   = {tags}")
print(f"chunks = {sorted(extract_chunks(tags))}")

# A bare I- tag with no B- before it still opens a chunk. The reference
# scorer is lenient here, so this library is too.
lenient = ["I-city", "I-city", "O", "I-date"]
print(f"\ntags   = {lenient}")
print(f"chunks = {sorted(extract_chunks(lenient))}")

# Score two sentences. Sentence 1 is perfect. Sentence 2 gets the
# intent right but misses one chunk boundary, which costs the slot F1
# and the whole-frame accuracy.
gold = [
    ("book_flight", ["O", "B-from", "O", "B-to"]),
    ("get_weather", ["B-city", "I-city", "O"]),
]
pred = [
    ("book_flight", ["O", "B-from", "O", "B-to"]),
    ("get_weather", ["B-city", "O", "O"]),
]
report = evaluate(pred, gold)
for key, value in report.to_pairs():
    print(f"{key:20s} {value}")

# Whole-frame ("overall") accuracy only credits a sentence when the
# intent and every slot tag are simultaneously right, so it is at most
# the intent accuracy.
assert report.overall_accuracy <= report.intent_accuracy
