"""From bracketed trees to a polar-word lexicon.

Sentiment trees are S-expressions with a 0-4 label on every node.  We keep
only clearly negative (0, 1) or positive (3, 4) root sentences, then fit a
small logistic regression on word presence and read the most strongly
weighted words off either end.
"""
from personabench import polarity, synthetic, treebank
from personabench.rng import Rng

text = "(3 (2 The) (4 (3 (2 film) (3 shines)) (2 .)))\n(1 (2 A) (0 (0 dull) (2 mess)))"
trees = treebank.parse_trees(text)
for tree in trees:
    print(tree.label, " ".join(tree.leaves()), "->", tree.serialize())

try:
    treebank.parse_trees("(2 A)\n(3 (")
except treebank.ParseError as err:
    print("parse error:", err)

# A synthetic corpus whose polar words are literally named pos*/neg*.
sentences = treebank.sentences_from_trees(synthetic.make_trees(800, Rng(1)))
print(f"\n{len(sentences)} binary sentences, e.g. {' '.join(sentences[0].tokens)!r}")

lexicon = polarity.build_lexicon(sentences, k=20)
print("positive:", sorted(lexicon.positive_words))
print("negative:", sorted(lexicon.negative_words))
hits = sum(w.startswith("pos") for w in lexicon.positive_words) + \
    sum(w.startswith("neg") for w in lexicon.negative_words)
print(f"{hits}/{len(lexicon.words)} lexicon words have the planted polarity")
