"""Regenerate fixture200.jsonl and fixture_dictionary.tsv.

The fixture is fully formula-driven so every statistic over it can be
tallied by hand: 200 papers, 20 per year over 2000-2009, with journals,
categories, authors, references, topic phrases, and retractions all
assigned by fixed residue rules on the paper index.  Tests re-derive the
expected numbers from these same rules without going through the package.

Run from this directory: python3 make_fixture200.py
"""

import json
from pathlib import Path

JOURNALS = ["Ann Rev", "Bull Soc", "Chron Data", "Dig Methods"]
ESI = ["Biology", "Chemistry", "Physics"]

# index -> (retraction_year, reason, requester); two more papers (55, 155)
# are retracted by title only and carry no notice.
NOTICES = {
    23: (2003, "falsification_fabrication", "editor"),
    45: (2003, "plagiarism", "author"),
    67: (2007, "error", "editor"),
    89: (2005, "violation_of_rules", "author"),
    111: (2008, "other", "not_found"),
    133: (2008, "falsification_fabrication", "editor"),
}
TITLE_ONLY = {55, 155}


def title_for(i: int) -> str:
    if i % 10 == 3:
        base = f"Field notes on gene therapy trials {i:03d}"
    elif i % 10 == 7:
        base = f"Measurements of quantum dots efficiency {i:03d}"
    else:
        base = f"Routine observations in series {i:03d}"
    if i in TITLE_ONLY:
        return f"Retracted Article: {base[0].lower()}{base[1:]}"
    return base


def refs_for(i: int) -> list[str]:
    out = {i - 20}
    if i % 2 == 0:
        out.add(i - 40)
    if i % 5 == 0:
        out.add(i - 47)
    return [f"f{j:03d}" for j in sorted(j for j in out if j >= 0)]


def authors_for(i: int) -> list[str]:
    names = [f"Author {i % 37:02d}"]
    if i % 5 == 0:
        second = f"Author {(i * 3) % 37:02d}"
        if second != names[0]:
            names.append(second)
    return names


def record_for(i: int) -> dict:
    obj = {
        "paper_id": f"f{i:03d}",
        "title": title_for(i),
        "pub_year": 2000 + i // 20,
        "pub_month": None if i % 7 == 0 else (i % 12) + 1,
        "journal": JOURNALS[i % 4],
        "esi_category": ESI[i % 3],
        "author_names": authors_for(i),
        "institution_names": [f"Inst {i % 11:02d}"],
        "references": refs_for(i),
    }
    if i in NOTICES:
        year, reason, requester = NOTICES[i]
        obj["retraction"] = {
            "retraction_year": year,
            "reason": reason,
            "requester": requester,
        }
    return obj


def main() -> None:
    here = Path(__file__).parent
    with (here / "fixture200.jsonl").open("w", encoding="utf-8") as fh:
        for i in range(200):
            fh.write(json.dumps(record_for(i), sort_keys=True) + "\n")
    (here / "fixture_dictionary.tsv").write_text(
        "gene therapy\tgene_therapy\nquantum dots\tquantum_dots\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    main()
