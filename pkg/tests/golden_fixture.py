"""Frozen five-sentence metric fixture shared by the metric and acceptance tests."""


def S(text):
    return tuple(text.split())


# Five-sentence golden fixture; the frozen numbers below were produced by the
# rational-arithmetic oracle in metric_oracle.py and cross-checked by hand for
# the single-sentence cases.
SOURCES = [
    S("the committee approved the proposal after a lengthy debate ."),
    S("she resides in a small village near the river ."),
    S("the cat sat on the mat ."),
    S("he purchased three apples and two oranges yesterday ."),
    S("scientists discovered a new species of frog in the forest ."),
]
OUTPUTS = [
    S("the committee approved the plan after a long debate ."),
    S("she lives in a small village near the river ."),
    S("the cat sat on the mat ."),
    S("he bought three apples and oranges ."),
    S("scientists found a new frog in the forest ."),
]
REF_A = [
    S("the group approved the plan after a long debate ."),
    S("she lives in a small village by the river ."),
    S("the cat sat on the mat ."),
    S("he bought three apples and two oranges yesterday ."),
    S("scientists found a new kind of frog in the forest ."),
]
REF_B = [
    S("the committee agreed to the plan after a long talk ."),
    S("she lives in a village near the river ."),
    S("a cat sat on the mat ."),
    S("yesterday he bought three apples and two oranges ."),
    S("scientists discovered a new frog species in the forest ."),
]

GOLDEN_BLEU_ONE_REF = 69.75429213592471
GOLDEN_BLEU_TWO_REFS = 79.42211708659104
GOLDEN_FKGL = 3.5213684210526317
GOLDEN_SARI_ONE_REF = 74.41339542810131
GOLDEN_SARI_TWO_REFS = 63.673614958239924
