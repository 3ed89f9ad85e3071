"""Scoring reconstructions against originals with all four measures."""

from structsent import OfflineHashEmbedder, score_pair, summarize, tokenize
from structsent.metrics import bleu, meteor, rouge1_f1

original = (
    "The study investigates the electronic properties of complex materials "
    "using advanced computational methods."
)
reconstruction = (
    "The study investigates the electronic properties of materials using "
    "advanced computational methods."
)

# One shared tokenizer feeds every lexical metric.
print("tokens:", tokenize(reconstruction))

reference = tokenize(original)
candidate = tokenize(reconstruction)
print(f"BLEU       {bleu(candidate, reference):.4f}")
print(f"ROUGE-1 F1 {rouge1_f1(candidate, reference):.4f}")
print(f"METEOR     {meteor(candidate, reference):.4f}")

# The offline embedder is a deterministic hashed term-frequency encoder,
# so cosine works with no model server; a remote provider can serve real
# sentence embeddings through the same interface.
embedder = OfflineHashEmbedder()
scores = score_pair(original, reconstruction, embedder)
print(f"cosine     {scores.cosine:.4f} (offline hashed-TF provider)")

# Aggregate a small batch the way the run report does.
batch = [
    score_pair(original, reconstruction, embedder),
    score_pair(original, original, embedder),
]
stats = summarize(batch)
for name in ("cosine", "bleu", "rouge1_f1", "meteor"):
    stat = getattr(stats, name)
    print(f"{name:<10} mean={stat.mean:.4f} std={stat.std_dev:.4f}")
