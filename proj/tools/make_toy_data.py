#!/usr/bin/env python3
"""Writes the toy fixture under data/toy: triples, word vectors, parses and
train/test question files. Deterministic (numpy seed 7)."""

import argparse
import os

import numpy as np

DIM = 50

ACTORS = ["Diana", "Marco", "Lena", "Tobias", "Ingrid", "Rafael", "Selma", "Hugo", "Nadia",
          "Oskar", "Priya", "Emil", "Carla", "Viktor", "Maren", "Jonas", "Alina", "Teo"]
DIRECTORS = ["Bruno", "Greta", "Anselm", "Lucia", "Dario", "Henrike", "Casimir", "Ylva"]
FILMS = ["Moonrise", "Ironwood", "Silverlake", "Nightjar", "Quarryman", "Driftwood", "Emberfall",
         "Halcyon", "Lanterns", "Outpost", "Pinegrove", "Riverbend", "Stormglass", "Thornfield"]
SHOWS = ["Brightside", "Cloudline", "Northstar", "Wavelength"]
COUNTRIES = {
    "united_states": ["united states", "america", "american"],
    "freedonia": ["freedonia", "freedonian"],
    "sylvania": ["sylvania", "sylvanian"],
    "latveria": ["latveria", "latverian"],
}
ADJECTIVE = {"united_states": "american", "freedonia": "freedonian", "sylvania": "sylvanian",
             "latveria": "latverian"}
CITIES = {"arden": "united_states", "belmont": "united_states", "corvale": "freedonia",
          "dunmore": "freedonia", "elsmere": "sylvania", "fairhaven": "sylvania",
          "glenrock": "latveria", "harwick": "latveria"}

CLUSTERS = [
    ["film", "films", "movie", "movies"],
    ["tv", "show", "shows", "series"],
    ["actor", "actors", "performer"],
    ["director", "directors", "filmmaker"],
    ["play", "played", "acted", "starred", "star", "make"],
    ["directed", "direct", "directs", "by"],
    ["born", "birth"],
    ["where", "place"],
    ["when", "released", "release"],
    ["country", "nationality", "nation"],
    ["capital"],
    ["largest", "population", "biggest"],
    ["popular", "popularity"],
    ["located"],
    ["city", "town"],
    ["person", "people"],
    ["year", "years"],
]
EXTRA_WORDS = ["what", "who", "which", "did", "in", "is", "was", "the", "of", "after", "with",
               "most", "?", "cmp", "eq", "lt", "gt", "ord", "asc", "desc", "united", "states",
               "america", "american", "freedonian", "sylvanian", "latverian"]


class Toy:
    def __init__(self, rng):
        self.rng = rng
        self.triples = []
        self.types = {}
        self.aliases = []
        self.acted = {a: [] for a in ACTORS}
        self.director_of = {}
        self.release = {}
        self.birth_year = {}
        self.birth_place = {}
        self.nationality = {}
        self.popularity = {}
        self.population = {}
        works = FILMS + SHOWS
        for w in FILMS:
            self.types[w.lower()] = ["film"]
        for w in SHOWS:
            self.types[w.lower()] = ["tv_show"]
        for i, w in enumerate(works):
            d = DIRECTORS[i % len(DIRECTORS)]
            self.director_of[w] = d
            self.release[w] = int(rng.integers(1985, 2016))
        for i, a in enumerate(ACTORS):
            films = list(rng.choice(FILMS, size=3, replace=False))
            shows = [SHOWS[i % len(SHOWS)]] if i % 3 != 2 else []
            self.acted[a] = films + shows
        # Diana mirrors the worked example: films only.
        self.acted["Diana"] = ["Moonrise", "Ironwood", "Halcyon"]
        pops = rng.permutation(np.arange(10, 100))[: len(ACTORS)]
        city_list = sorted(CITIES)
        for i, a in enumerate(ACTORS):
            self.birth_year[a] = [1970, 1980, 1990, 2000][i % 4]
            self.birth_place[a] = city_list[(i * 3) % len(city_list)]
            self.popularity[a] = int(pops[i])
            self.types[a.lower()] = ["actor", "person"]
        for i, d in enumerate(DIRECTORS):
            self.birth_year[d] = int(rng.integers(1940, 1976))
            self.birth_place[d] = city_list[(i * 5 + 1) % len(city_list)]
            self.types[d.lower()] = ["director", "person"]
        for p in ACTORS + DIRECTORS:
            home = CITIES[self.birth_place[p]]
            if rng.random() < 0.3:
                others = [c for c in sorted(COUNTRIES) if c != home]
                home = others[int(rng.integers(len(others)))]
            self.nationality[p] = home
        for c in city_list:
            self.population[c] = int(rng.integers(50, 5000)) * 1000
            self.types[c] = ["city"]
        for k in COUNTRIES:
            self.types[k] = ["country"]
        self.capital = {k: sorted(c for c in CITIES if CITIES[c] == k)[0] for k in COUNTRIES}

    def write_triples(self, path):
        lines = []
        for a, works in self.acted.items():
            for w in works:
                lines.append((a.lower(), "acted_in", w.lower(), "entity"))
        for w, d in self.director_of.items():
            lines.append((w.lower(), "directed_by", d.lower(), "entity"))
            lines.append((w.lower(), "release_year", str(self.release[w]), "year"))
        for p in ACTORS + DIRECTORS:
            lines.append((p.lower(), "birth_year", str(self.birth_year[p]), "year"))
            lines.append((p.lower(), "birth_place", self.birth_place[p], "entity"))
            lines.append((p.lower(), "nationality", self.nationality[p], "entity"))
        for a in ACTORS:
            lines.append((a.lower(), "popularity", str(self.popularity[a]), "int"))
        for c, k in CITIES.items():
            lines.append((c, "located_in", k, "entity"))
            lines.append((c, "population", str(self.population[c]), "int"))
        for k, c in self.capital.items():
            lines.append((k, "capital", c, "entity"))
        with open(path, "w") as f:
            f.write("# toy knowledge base\n")
            for t in lines:
                f.write("\t".join(t) + "\n")
            for name in ACTORS + DIRECTORS + FILMS + SHOWS:
                f.write(f"@alias\t{name.lower()}\t{name}\n")
            for k, aliases in COUNTRIES.items():
                for a in aliases:
                    f.write(f"@alias\t{k}\t{a}\n")
            for e in sorted(self.types):
                for t in self.types[e]:
                    f.write(f"@type\t{e}\t{t}\n")
        return len(lines)


# Parse templates: (form, head, deprel); heads are 1-based positions in the
# template. A slot form such as "{A}" is replaced by the name tokens; extra
# name tokens attach to the last one as compounds.
TEMPLATES = {
    "films_of": [("what", 2, "det"), ("movies", 5, "dobj"), ("did", 5, "aux"), ("{A}", 5, "nsubj"),
                 ("play", 0, "root"), ("in", 5, "prep"), ("?", 5, "punct")],
    "director_of": [("who", 2, "nsubj"), ("directed", 0, "root"), ("{F}", 2, "dobj"), ("?", 2, "punct")],
    "birthplace": [("where", 4, "advmod"), ("was", 4, "auxpass"), ("{P}", 4, "nsubjpass"),
                   ("born", 0, "root"), ("?", 4, "punct")],
    "city_country": [("what", 2, "det"), ("country", 5, "pobj"), ("is", 0, "root"), ("{C}", 3, "nsubj"),
                     ("in", 3, "prep"), ("?", 3, "punct")],
    "capital": [("what", 2, "nsubj"), ("is", 0, "root"), ("the", 4, "det"), ("capital", 2, "attr"),
                ("of", 4, "prep"), ("{K}", 5, "pobj"), ("?", 2, "punct")],
    "release": [("when", 4, "advmod"), ("was", 4, "auxpass"), ("{F}", 4, "nsubjpass"),
                ("released", 0, "root"), ("?", 4, "punct")],
    "cast": [("who", 2, "nsubj"), ("starred", 0, "root"), ("in", 2, "prep"), ("{F}", 3, "pobj"),
             ("?", 2, "punct")],
    "shows_of": [("what", 3, "det"), ("tv", 3, "nn"), ("shows", 6, "dobj"), ("did", 6, "aux"),
                 ("{A}", 6, "nsubj"), ("play", 0, "root"), ("in", 6, "prep"), ("?", 6, "punct")],
    "most_popular": [("who", 7, "nsubj"), ("is", 7, "cop"), ("the", 7, "det"), ("most", 5, "advmod"),
                     ("popular", 7, "amod"), ("{ADJ}", 7, "amod"), ("actor", 0, "root"),
                     ("born", 7, "vmod"), ("in", 8, "prep"), ("{Y}", 9, "pobj"), ("?", 7, "punct")],
    "directed_after": [("which", 2, "det"), ("films", 5, "dobj"), ("did", 5, "aux"), ("{D}", 5, "nsubj"),
                       ("direct", 0, "root"), ("after", 5, "prep"), ("{Y}", 6, "pobj"), ("?", 5, "punct")],
    "largest_city": [("what", 2, "nsubj"), ("is", 0, "root"), ("the", 5, "det"), ("largest", 5, "amod"),
                     ("city", 2, "attr"), ("in", 5, "prep"), ("{K}", 6, "pobj"), ("?", 2, "punct")],
    "films_with": [("what", 2, "det"), ("films", 5, "dobj"), ("did", 5, "aux"), ("{A}", 5, "nsubj"),
                   ("make", 0, "root"), ("with", 5, "prep"), ("{D}", 6, "pobj"), ("?", 5, "punct")],
    "birth_country": [("what", 2, "det"), ("country", 6, "pobj"), ("was", 5, "auxpass"),
                      ("{P}", 5, "nsubjpass"), ("born", 0, "root"), ("in", 5, "prep"), ("?", 5, "punct")],
}


def render(template, slots):
    """Expands slots; returns (forms, heads, deprels) with 1-based heads."""
    expanded = []  # (form, template head, deprel, slot head position or None)
    last = []  # template position -> final 1-based index
    for form, head, rel in template:
        names = slots[form[1:-1]].split() if form.startswith("{") else [form]
        slot_head = len(expanded) + len(names)
        for extra in names[:-1]:
            expanded.append((extra, None, "compound", slot_head))
        expanded.append((names[-1], head, rel, None))
        last.append(slot_head)
    forms, heads, rels = [], [], []
    for form, head, rel, compound_head in expanded:
        forms.append(form)
        if compound_head is not None:
            heads.append(compound_head)
        else:
            heads.append(0 if head == 0 else last[head - 1])
        rels.append(rel)
    return forms, heads, rels


def conllu_block(sid, forms, heads, rels):
    lines = [f"# sent_id = {sid}", "# text = " + " ".join(forms)]
    for i, (f, h, r) in enumerate(zip(forms, heads, rels), start=1):
        lines.append(f"{i}\t{f}\t{f.lower()}\t_\t_\t_\t{h}\t{r}\t_\t_")
    return "\n".join(lines) + "\n\n"


def instances(toy, rng):
    """Yields (template, slots, gold) for every answerable instantiation."""
    out = {k: [] for k in TEMPLATES}
    for a in ACTORS:
        films = [w for w in toy.acted[a] if w in FILMS]
        out["films_of"].append(({"A": a}, [w.lower() for w in films]))
        shows = [w for w in toy.acted[a] if w in SHOWS]
        if shows:
            out["shows_of"].append(({"A": a}, [w.lower() for w in shows]))
    for w in FILMS + SHOWS:
        out["director_of"].append(({"F": w}, [toy.director_of[w].lower()]))
        out["release"].append(({"F": w}, [str(toy.release[w])]))
        cast = [a.lower() for a in ACTORS if w in toy.acted[a]]
        if cast:
            out["cast"].append(({"F": w}, cast))
    for p in ACTORS + DIRECTORS:
        out["birthplace"].append(({"P": p}, [toy.birth_place[p]]))
        out["birth_country"].append(({"P": p}, [CITIES[toy.birth_place[p]]]))
    for c, k in CITIES.items():
        out["city_country"].append(({"C": c.capitalize()}, [k]))
    for k in COUNTRIES:
        name = COUNTRIES[k][0]
        out["capital"].append(({"K": name}, [toy.capital[k]]))
        cities = [c for c in CITIES if CITIES[c] == k]
        best = max(cities, key=lambda c: toy.population[c])
        out["largest_city"].append(({"K": name}, [best]))
        for y in [1970, 1980, 1990, 2000]:
            group = [a for a in ACTORS if toy.nationality[a] == k and toy.birth_year[a] == y]
            if group:
                top = max(group, key=lambda a: toy.popularity[a])
                out["most_popular"].append(({"ADJ": ADJECTIVE[k], "Y": str(y)}, [top.lower()]))
    for d in DIRECTORS:
        made = sorted(w for w in FILMS + SHOWS if toy.director_of[w] == d)
        years = sorted(toy.release[w] for w in made)
        if len(years) >= 2:
            y = years[0]
            gold = [w.lower() for w in made if toy.release[w] > y]
            if gold:
                out["directed_after"].append(({"D": d, "Y": str(y)}, gold))
    for a in ACTORS:
        for d in DIRECTORS:
            both = [w.lower() for w in toy.acted[a] if toy.director_of[w] == d]
            if both:
                out["films_with"].append(({"A": a, "D": d}, both))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "toy"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(7)
    toy = Toy(rng)
    n_triples = toy.write_triples(os.path.join(args.out, "triples.tsv"))

    per_template = {"films_of": 9, "cast": 8, "birthplace": 7, "capital": 4, "largest_city": 4}
    two_held_out = {"films_of", "cast", "birthplace", "director_of", "release", "birth_country",
                    "films_with"}
    pool = instances(toy, rng)
    chosen = []
    for name in TEMPLATES:
        items = pool[name]
        want = per_template.get(name, 6)
        if name == "films_of":
            items = sorted(items, key=lambda it: it[0]["A"] != "Diana")
        else:
            order = rng.permutation(len(items))
            items = [items[i] for i in order]
        picked = items[:want]
        if len(picked) < want:
            raise SystemExit(f"template {name}: only {len(picked)} instances")
        chosen.append((name, picked))

    train, test, conllu = [], [], []
    words = set()
    qid = 0
    for name, picked in chosen:
        for k, (slots, gold) in enumerate(picked):
            qid += 1
            sid = f"q{qid:03d}"
            forms, heads, rels = render(TEMPLATES[name], slots)
            words.update(f.lower() for f in forms)
            conllu.append(conllu_block(sid, forms, heads, rels))
            row = f"{sid}\t{' '.join(forms)}\t{sid}\t{'|'.join(gold)}\n"
            held_out = k == len(picked) - 1 or (name in two_held_out and k == len(picked) - 2)
            (test if held_out else train).append(row)
    with open(os.path.join(args.out, "questions.conllu"), "w") as f:
        f.writelines(conllu)
    with open(os.path.join(args.out, "train.tsv"), "w") as f:
        f.write("# id\tquestion\tparse\tanswers\n")
        f.writelines(train)
    with open(os.path.join(args.out, "test.tsv"), "w") as f:
        f.write("# id\tquestion\tparse\tanswers\n")
        f.writelines(test)

    vectors = {}
    for cluster in CLUSTERS:
        base = rng.normal(size=DIM)
        for w in cluster:
            vectors[w] = base + 0.35 * rng.normal(size=DIM)
    for w in sorted(words | set(EXTRA_WORDS)):
        if w not in vectors:
            vectors[w] = rng.normal(size=DIM)
    with open(os.path.join(args.out, "words.txt"), "w") as f:
        f.write(f"{len(vectors)} {DIM}\n")
        for w in sorted(vectors):
            v = vectors[w] * 0.4 / np.sqrt(DIM) * 5
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")
    print(f"triples={n_triples} entities~{len(toy.types)} train={len(train)} test={len(test)} "
          f"words={len(vectors)}")


if __name__ == "__main__":
    main()
