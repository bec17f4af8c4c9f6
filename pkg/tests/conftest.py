import pytest

from citewake.annotation import ReasonCode
from citewake.corpus import PaperRecord, RetractionNotice, build_corpus


def record(
    pid,
    year,
    *,
    title=None,
    journal="J Test",
    esi="Clinical Medicine",
    month=None,
    authors=(),
    institutions=(),
    refs=(),
    notice=None,
):
    """One paper record with sensible defaults for handmade fixtures."""
    return PaperRecord(
        paper_id=pid,
        title=title if title is not None else f"Observations on {pid}",
        pub_year=year,
        pub_month=month,
        journal=journal,
        esi_category=esi,
        author_names=tuple(authors),
        institution_names=tuple(institutions),
        references=tuple(refs),
        retraction=notice,
    )


def notice(year, reason=None, requester="not_found"):
    return RetractionNotice(retraction_year=year, reason=reason, requester=requester)


@pytest.fixture
def make_corpus():
    def _make(records, window=(1980, 2014)):
        return build_corpus(records, year_window=window)

    return _make


@pytest.fixture
def basic_corpus(make_corpus):
    """Six papers, one retracted with a notice, one by title only.

    Citation edges: p2 and p3 cite p1; p4 cites p1 and p2; p5 cites p2;
    p6 cites nothing.  p1 retracted 2006 (falsification, editor); p6 title
    marks it retracted with no notice.
    """
    return make_corpus(
        [
            record(
                "p1",
                2004,
                month=3,
                authors=("Alice Smith", "Bob Jones"),
                institutions=("Univ A",),
                esi="Biology",
                notice=notice(2006, ReasonCode.FALSIFICATION_FABRICATION, "editor"),
            ),
            record(
                "p2",
                2005,
                month=1,
                authors=("Carol White",),
                institutions=("Univ B",),
                esi="Biology",
                refs=("p1",),
            ),
            record(
                "p3",
                2005,
                month=6,
                authors=("Dan Brown",),
                institutions=("Univ A",),
                esi="Chemistry",
                refs=("p1", "x_outside"),
            ),
            record(
                "p4",
                2006,
                authors=("Alice Smith",),
                institutions=("Univ C",),
                esi="Biology",
                refs=("p1", "p2"),
            ),
            record(
                "p5",
                2007,
                authors=("Eve Black",),
                institutions=("Univ B",),
                esi="Chemistry",
                refs=("p2",),
            ),
            record(
                "p6",
                2008,
                title="Retracted Article: measurements revisited",
                authors=("Frank Green",),
                institutions=("Univ C",),
                esi="Biology",
            ),
        ]
    )
