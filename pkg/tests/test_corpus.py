import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citewake.corpus import (
    CorpusError,
    annual_retraction_rate,
    build_corpus,
    citation_distribution,
    esi_retraction_rates,
    ingest_corpus,
    normalize_name,
    record_to_obj,
    retraction_delay,
)

import oracles
from conftest import notice, record


def write_jsonl(path, objs):
    path.write_text("\n".join(json.dumps(o) for o in objs) + "\n", encoding="utf-8")


class TestNormalizeName:
    def test_examples(self):
        assert normalize_name("  Van der BERG,  J. ") == "van der berg j"
        assert normalize_name("O'Neill") == "oneill"
        assert normalize_name("Smith-Jones") == "smith-jones"
        assert normalize_name("...") == ""

    @given(st.text(max_size=60))
    def test_idempotent(self, raw):
        once = normalize_name(raw)
        assert normalize_name(once) == once


class TestIngest:
    def test_jsonl_round_trip(self, tmp_path, basic_corpus):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [record_to_obj(r) for r in basic_corpus.papers.values()])
        again = ingest_corpus(path)
        assert list(again.papers) == list(basic_corpus.papers)
        assert again.papers["p1"].retraction == basic_corpus.papers["p1"].retraction
        assert again.retracted == basic_corpus.retracted

    def test_csv_semicolon_lists(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "paper_id,title,pub_year,pub_month,journal,esi_category,"
            "author_names,institution_names,references,"
            "retraction_year,retraction_reason,retraction_requester\n"
            "a1,First study,2001,2,J One,Biology,Ann Ode;Bo Peep,Inst X,,,,\n"
            "a2,Second study,2003,,J One,Biology,Cy Borg,Inst X;Inst Y,a1,2005,error,author\n",
            encoding="utf-8",
        )
        corpus = ingest_corpus(path, format="csv")
        assert corpus.papers["a1"].author_names == ("Ann Ode", "Bo Peep")
        assert corpus.papers["a2"].institution_names == ("Inst X", "Inst Y")
        assert corpus.papers["a2"].references == ("a1",)
        assert corpus.papers["a1"].pub_month == 2
        assert corpus.papers["a2"].pub_month is None
        assert corpus.papers["a2"].retraction.retraction_year == 2005
        assert corpus.papers["a2"].retraction.requester == "author"

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "c.xml"
        path.write_text("<nope/>", encoding="utf-8")
        with pytest.raises(CorpusError, match="unknown format"):
            ingest_corpus(path, format="xml")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            ingest_corpus(tmp_path / "nope.jsonl")

    @pytest.mark.parametrize(
        "obj, message",
        [
            ({"title": "x", "pub_year": 2000, "journal": "J", "esi_category": "E"}, "missing field 'paper_id'"),
            ({"paper_id": "a", "title": "x", "pub_year": "yr", "journal": "J", "esi_category": "E"}, "not an integer"),
            ({"paper_id": "a", "title": "x", "pub_year": 2000, "pub_month": 13, "journal": "J", "esi_category": "E"}, "pub_month"),
            ({"paper_id": "a", "title": "x", "pub_year": 1800, "journal": "J", "esi_category": "E"}, "outside corpus window"),
            ({"paper_id": "a", "title": "x", "pub_year": 2000, "journal": "J", "esi_category": "E", "references": ["a"]}, "self-citation"),
            ({"paper_id": "a", "title": "x", "pub_year": 2000, "journal": "J", "esi_category": "E", "references": ["b", "b"]}, "duplicate reference"),
            ({"paper_id": "a", "title": "x", "pub_year": 2000, "journal": "J", "esi_category": "E", "retraction": {"retraction_year": 1999}}, "precedes"),
            ({"paper_id": "a", "title": "x", "pub_year": 2000, "journal": "J", "esi_category": "E", "retraction": {"retraction_year": 2001, "reason": "gremlins"}}, "unknown retraction reason"),
        ],
    )
    def test_rejects_bad_records(self, tmp_path, obj, message):
        path = tmp_path / "bad.jsonl"
        write_jsonl(path, [obj])
        with pytest.raises(CorpusError, match=message):
            ingest_corpus(path)

    def test_error_names_the_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = record_to_obj(record("ok1", 2000))
        path.write_text(json.dumps(good) + "\n" + "{broken\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            ingest_corpus(path)

    def test_duplicate_paper_id(self, make_corpus):
        with pytest.raises(CorpusError, match="duplicate paper_id"):
            make_corpus([record("a", 2000), record("a", 2001)])


class TestIndexes:
    def test_cited_by_is_the_reference_transpose(self, basic_corpus):
        assert basic_corpus.cited_by["p1"] == ["p2", "p3", "p4"]
        assert basic_corpus.cited_by["p2"] == ["p4", "p5"]
        assert basic_corpus.cited_by["p6"] == []
        # Dangling references stay on the record but index nowhere.
        assert "x_outside" in basic_corpus.papers["p3"].references
        assert "x_outside" not in basic_corpus.cited_by

    def test_entity_indexes(self, basic_corpus):
        assert basic_corpus.by_author["alice smith"] == ["p1", "p4"]
        assert basic_corpus.by_institution["univ b"] == ["p2", "p5"]
        assert basic_corpus.by_year[2005] == ["p2", "p3"]
        assert basic_corpus.year_range() == (2004, 2008)

    @given(
        st.lists(
            st.tuples(st.integers(0, 14), st.sets(st.integers(0, 14), max_size=5)),
            min_size=1,
            max_size=15,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_transpose_matches_oracle(self, layout):
        records = []
        seen = set()
        for i, (yoff, refs) in enumerate(layout):
            pid = f"p{i}"
            seen.add(pid)
            records.append(
                record(
                    pid,
                    2000 + yoff,
                    refs=tuple(sorted(f"p{j}" for j in refs if f"p{j}" != pid)),
                )
            )
        corpus = build_corpus(records)
        objs = [record_to_obj(r) for r in records]
        expected = oracles.oracle_cited_by(objs)
        for pid in corpus.papers:
            assert corpus.cited_by[pid] == expected.get(pid, [])


class TestRetractionStats:
    def test_detection_by_notice_and_title(self, basic_corpus):
        assert basic_corpus.retracted == {"p1", "p6"}
        assert basic_corpus.is_retracted("p1")
        assert not basic_corpus.is_retracted("p2")
        assert basic_corpus.retraction_year("p1") == 2006
        assert basic_corpus.retraction_year("p6") is None  # title only

    def test_title_pattern_is_case_insensitive(self, make_corpus):
        corpus = make_corpus(
            [record("a", 2001, title="Results (RETRACTED ARTICLE. See vol 3)")]
        )
        assert corpus.retracted == {"a"}

    def test_annual_rate_counts_title_only(self, basic_corpus):
        rates = annual_retraction_rate(basic_corpus)
        assert rates == {2004: 1.0, 2005: 0.0, 2006: 0.0, 2007: 0.0, 2008: 1.0}

    def test_delay_excludes_title_only(self, basic_corpus):
        stats = retraction_delay(basic_corpus)
        assert stats.per_paper == {"p1": 2}
        assert stats.median_by_year == {2006: 2.0}
        assert stats.median_overall == 2.0

    def test_delay_median_is_textbook(self, make_corpus):
        corpus = make_corpus(
            [
                record("a", 2000, notice=notice(2001)),
                record("b", 2000, notice=notice(2004)),
                record("c", 2001, notice=notice(2004)),
                record("d", 2002, notice=notice(2004)),
            ]
        )
        stats = retraction_delay(corpus)
        assert stats.median_by_year == {2001: 1.0, 2004: 3.0}
        assert stats.median_overall == oracles.median([1, 4, 3, 2])

    def test_esi_rates_sorted_by_rate_then_name(self, basic_corpus):
        rows = esi_retraction_rates(basic_corpus)
        assert [(r.esi_category, r.retracted, r.total) for r in rows] == [
            ("Biology", 2, 4),
            ("Chemistry", 0, 2),
        ]
        assert rows[0].rate == 0.5

    def test_esi_rate_ties_break_by_name(self, make_corpus):
        corpus = make_corpus(
            [
                record("a", 2000, esi="Zoology", notice=notice(2001)),
                record("b", 2000, esi="Botany", notice=notice(2001)),
            ]
        )
        rows = esi_retraction_rates(corpus)
        assert [r.esi_category for r in rows] == ["Botany", "Zoology"]


class TestCitationDistribution:
    def test_log_bins(self, basic_corpus):
        dist = citation_distribution(basic_corpus)
        # counts: p1=3, p2=2, others 0
        assert dist.counts["p1"] == 3
        assert dist.histogram == [(0, 1, 4), (1, 2, 0), (2, 4, 2)]
        assert dist.median == 0.0

    def test_retracted_subset(self, basic_corpus):
        dist = citation_distribution(basic_corpus, "retracted")
        assert set(dist.counts) == {"p1", "p6"}
        assert dist.median == 1.5

    def test_empty_subset_has_no_median(self, make_corpus):
        corpus = make_corpus([record("a", 2000)])
        dist = citation_distribution(corpus, "retracted")
        assert dist.median is None
        assert dist.histogram == []

    def test_unknown_subset(self, basic_corpus):
        with pytest.raises(CorpusError, match="unknown subset"):
            citation_distribution(basic_corpus, "everything")
