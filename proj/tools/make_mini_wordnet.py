"""Writes data/mini_wordnet.tsv: 500 distinct WordNet-style triples.

Deterministic (fixed seed). Relation mix: 200 _hypernym, 100 _similar_to and
200 spread over five other WordNet relations.
"""

import random
import sys
from pathlib import Path

NOUNS = """dog cat wolf fox horse cow sheep goat pig deer bear lion tiger whale dolphin
shark trout salmon eagle hawk owl crow sparrow robin oak pine maple birch willow
rose tulip daisy lily fern moss car truck bus train bicycle boat ship plane rocket
house barn castle tower bridge road river lake ocean mountain hill valley forest
desert island city village hammer saw drill knife spoon fork cup bowl plate chair
table bed sofa lamp clock violin piano guitar drum flute trumpet bread cheese apple
pear plum grape lemon onion carrot potato rice wheat corn milk wine beer coffee tea
doctor nurse teacher farmer baker sailor soldier pilot judge poet""".split()
CATEGORIES = """animal mammal carnivore bird fish tree flower plant vehicle vessel aircraft
building structure waterway landform tool utensil container furniture instrument
food fruit vegetable grain beverage worker professional artifact organism""".split()
ADJECTIVES = """big large huge small tiny little quick fast rapid slow sluggish bright
shiny dim dark happy glad sad gloomy hot warm cold cool wet damp dry arid hard firm
soft tender loud noisy quiet silent old ancient new fresh young rich wealthy poor
needy strong sturdy weak frail clean tidy dirty filthy calm serene angry furious
brave bold timid shy wise clever foolish silly""".split()
VERBS = """run sprint walk stroll eat dine drink sip speak talk shout yell build make
break smash cut slice see watch hear listen think ponder give donate take grab""".split()

OTHER = ["_derivationally_related_form", "_member_meronym", "_has_part", "_also_see", "_verb_group"]


def synset(word, pos, sense=1):
    return f"{word}.{pos}.{sense:02d}"


def main(out_path):
    rng = random.Random(20241016)
    triples = []
    seen = set()

    def add(h, r, t):
        if h != t and (h, r, t) not in seen:
            seen.add((h, r, t))
            triples.append((h, r, t))
            return True
        return False

    nouns = [synset(w, "n") for w in NOUNS]
    cats = [synset(w, "n") for w in CATEGORIES]
    adjs = [synset(w, "a") for w in ADJECTIVES]
    verbs = [synset(w, "v") for w in VERBS]

    while sum(r == "_hypernym" for _, r, _ in triples) < 200:
        pool = nouns + cats
        add(rng.choice(pool), "_hypernym", rng.choice(cats))
    while sum(r == "_similar_to" for _, r, _ in triples) < 100:
        add(rng.choice(adjs), "_similar_to", rng.choice(adjs))
    while len(triples) < 500:
        rel = rng.choice(OTHER)
        if rel == "_verb_group":
            add(rng.choice(verbs), rel, rng.choice(verbs))
        elif rel == "_derivationally_related_form":
            add(rng.choice(verbs), rel, rng.choice(nouns))
        elif rel == "_also_see":
            add(rng.choice(adjs), rel, rng.choice(adjs))
        else:
            add(rng.choice(cats + nouns), rel, rng.choice(nouns))

    rng.shuffle(triples)
    Path(out_path).write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in triples))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mini_wordnet.tsv")
