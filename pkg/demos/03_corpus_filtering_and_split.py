"""Corpus exclusion rules, the per-article cap, and the seeded split."""

from collections import Counter

from structsent import SentenceRecord, filter_sentences, split_corpus

samples = [
    ("The reaction completes within two hours.", None),
    ("The energy satisfies E = mc^2.", "equation"),
    ("Prior work [12] showed improvement.", "citation marker"),
    ("The ratio \\frac{a}{b} grows with temperature.", "latex escape"),
    ("Smith et al. reported similar values.", "citation marker"),
    ("Results were consistent across laboratories.", None),
]

records = [
    SentenceRecord(id=f"s{i}", text=text, domain="physics", repository="arxiv",
                   article_id=f"article-{i % 2}")
    for i, (text, _) in enumerate(samples)
]

retained, report = filter_sentences(records)
print("retained:", [r.id for r in retained])
for record_id, reason in report.excluded:
    print(f"excluded {record_id}: {reason}")

# A seeded, domain-stratified split is reproducible run to run.
big = [
    SentenceRecord(id=f"r{i}", text="The measured value stays within the expected band.",
                   domain=["physics", "biology", "medicine"][i % 3],
                   repository=["arxiv", "biorxiv", "pubmed"][i % 3],
                   article_id=f"a{i // 5}")
    for i in range(200)
]
manifest = split_corpus(big, seed=1370, ratios=(0.7, 0.1, 0.2))
print("\nsplit counts:", manifest.counts)
assert manifest == split_corpus(big, seed=1370, ratios=(0.7, 0.1, 0.2))

by_domain = Counter(r.domain for r in big)
train_ids = set(manifest.train_ids)
for domain, total in sorted(by_domain.items()):
    in_train = sum(1 for r in big if r.domain == domain and r.id in train_ids)
    print(f"{domain}: {in_train}/{total} in train (target {0.7 * total:.1f})")
