"""Hand-built inputs with exact expected values for the scoring formulas."""

import numpy as np

from authordisamb.algorithms import SchulzParams

from factories import mention, paper


# --- rule scores ---------------------------------------------------------------

def _coauthor(mid, pid, surname="Smith", first="John"):
    return mention(mid, pid, surname=surname, first_name=first)


RULE_FIXTURES = {
    "nothing shared": (dict(), 0),
    "email only": (dict(m1={"email": "rk@x.org"}, m2={"email": "RK@x.org"}), 100),
    "email, journal, one co-author": (dict(
        m1={"email": "a@b"}, m2={"email": "a@b"},
        p1={"journal": "Isis"}, p2={"journal": "ISIS"},
        extra_mentions=[_coauthor("C1", "P1"), _coauthor("C2", "P2")]), 110),
    "all initials, more than two": (dict(m1={"initials": ["r", "k", "s"]},
                                         m2={"initials": ["R", "K", "S"]}), 10),
    "exactly two initials": (dict(m1={"initials": ["r", "k"]}, m2={"initials": ["r", "k", "s"]}), 5),
    "conflicting initials": (dict(m1={"initials": ["r", "k"]}, m2={"initials": ["r", "s"]}), -10),
    "one side single initial": (dict(m1={"initials": ["r"]}, m2={"initials": ["r", "s"]}), 0),
    "non-general first name": (dict(m1={"first_name": "Robert"}, m2={"first_name": "robert"}), 6),
    "author address": (dict(m1={"author_addresses": [{"country": "NL", "city": "Leiden"}]},
                            m2={"author_addresses": [{"country": "nl", "city": "leiden"}]}), 4),
    "two shared co-authors": (dict(extra_mentions=[
        _coauthor("C1", "P1"), _coauthor("C2", "P2"),
        _coauthor("C3", "P1", "Doe"), _coauthor("C4", "P2", "Doe")]), 7),
    "three shared co-authors": (dict(extra_mentions=[
        _coauthor("C1", "P1"), _coauthor("C2", "P2"), _coauthor("C3", "P1", "Doe"),
        _coauthor("C4", "P2", "Doe"), _coauthor("C5", "P1", "Roe"), _coauthor("C6", "P2", "Roe")]), 10),
    "grant": (dict(p1={"grant_numbers": ["G-1"]}, p2={"grant_numbers": ["G-1", "G-2"]}), 10),
    "publication address": (dict(p1={"pub_addresses": [{"country": "de", "city": "bonn"}]},
                                 p2={"pub_addresses": [{"country": "de", "city": "bonn"}]}), 2),
    "subject category": (dict(p1={"subject_categories": ["History"]},
                              p2={"subject_categories": ["history", "Physics"]}), 3),
    "self-citation": (dict(p2={"references": ["P1"]}), 10),
    "coupling, three refs": (dict(p1={"references": ["X1", "X2", "X3"]},
                                  p2={"references": ["X1", "X2", "X3", "X9"]}), 6),
    "coupling, five refs": (dict(p1={"references": [f"X{i}" for i in range(5)]},
                                 p2={"references": [f"X{i}" for i in range(6)]}), 10),
    "co-citation, two citers": (dict(extra_papers=[
        paper("P3", references=["P1", "P2"]), paper("P4", references=["P1", "P2"])]), 3),
}


# --- Schulz ----------------------------------------------------------------------

def _co(mid, pid, surname):
    return mention(mid, pid, surname=surname, first_name="A")


P0 = dict(alpha_A=0.0, alpha_S=0.0, alpha_R=0.0, alpha_C=0.0)

SCHULZ_MENTION_FIXTURES = {
    "no overlap": (dict(), SchulzParams(), 0.0),
    "mutual citation": (dict(p1={"references": ["P2"]}, p2={"references": ["P1"]}),
                        SchulzParams(**{**P0, "alpha_S": 1.0}), 2.0),
    "one-way citation": (dict(p2={"references": ["P1"]}), SchulzParams(**{**P0, "alpha_S": 1.0}), 1.0),
    "identical co-authors": (dict(extra_mentions=[_co("C1", "P1", "Smith"), _co("C2", "P2", "Smith")]),
                             SchulzParams(**{**P0, "alpha_A": 1.0}), 1.0),
    "half co-author overlap": (dict(extra_mentions=[
        _co("C1", "P1", "Smith"), _co("C2", "P1", "Doe"),
        _co("C3", "P2", "Smith"), _co("C4", "P2", "Roe"), _co("C5", "P2", "Poe")]),
        SchulzParams(**{**P0, "alpha_A": 1.0}), 0.5),
    "co-authors only on one side": (dict(extra_mentions=[_co("C1", "P1", "Smith")]),
                                    SchulzParams(**{**P0, "alpha_A": 1.0}), 0.0),
    "doubled co-author weight": (dict(extra_mentions=[_co("C1", "P1", "Smith"), _co("C2", "P2", "Smith")]),
                                 SchulzParams(**{**P0, "alpha_A": 2.0}), 2.0),
    "three shared references": (dict(p1={"references": ["X1", "X2", "X3"]},
                                     p2={"references": ["X1", "X2", "X3", "X4"]}),
                                SchulzParams(**{**P0, "alpha_R": 0.5}), 1.5),
    "co-citation overlap": (dict(extra_papers=[paper("P3", references=["P1", "P2"]),
                                               paper("P4", references=["P1"])]),
                            SchulzParams(**{**P0, "alpha_C": 0.25}), 0.25),
    "all terms": (dict(p1={"references": ["X1", "X2"]}, p2={"references": ["X1", "X2", "P1"]},
                       extra_papers=[paper("P3", references=["P1", "P2"])],
                       extra_mentions=[_co("C1", "P1", "Smith"), _co("C2", "P2", "Smith")]),
                  SchulzParams(alpha_A=1.0, alpha_S=1.0, alpha_R=0.25, alpha_C=0.5),
                  1.0 + 1.0 + 0.5 + 0.5),
    "default weights, refs only": (dict(p1={"references": ["X1"]}, p2={"references": ["X1"]}),
                                   SchulzParams(), 0.2),
}


# symmetric mention similarities for cluster-level fixtures
SCHULZ_SIMILARITY = np.zeros((5, 5))
for (_i, _j), _v in {(0, 2): 0.5, (0, 3): 0.25, (0, 4): 1.0, (1, 2): 0.75, (1, 3): 0.0, (1, 4): 0.125}.items():
    SCHULZ_SIMILARITY[_i, _j] = SCHULZ_SIMILARITY[_j, _i] = _v

SCHULZ_CLUSTER_FIXTURES = [
    ([0], [2], 0.1, 0.5),
    ([0], [2], 0.5, 0.0),
    ([0], [3], 0.1, 0.25),
    ([0, 1], [2], 0.1, 0.625),
    ([0, 1], [2, 3, 4], 0.1, 0.4375),
    ([0, 1], [2, 3, 4], 0.3, 0.375),
    ([0, 1], [2, 3, 4], 1.0, 0.0),
    ([1], [3], -1.0, 0.0),
    ([0, 1], [4], 0.0, 0.5625),
    ([0], [2, 3, 4], 0.2, 1.75 / 3),
    ([1], [2, 3, 4], 0.5, 0.25),
]
