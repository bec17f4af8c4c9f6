"""Citation-corpus analytics for the aftermath of publication retractions.

The package ingests bibliographic records, detects retracted papers, builds
matched treatment/control cohorts of papers, authors and institutions, and
runs the comparative statistics (Mann-Whitney tests, segmentation by
retraction reason, Granger screens of topic popularity) on them.  A synthetic
corpus generator with planted effects serves as the ground truth for
end-to-end validation, and a FastAPI service plus a thin CLI client expose
the whole pipeline.
"""

__version__ = "0.1.0"


class CitewakeError(Exception):
    """Base class for all data and contract errors raised by this package.

    ``module`` names the subsystem at fault so callers (the service, the CLI)
    can attribute the failure without parsing the message.
    """

    module = "citewake"

    def __str__(self) -> str:  # pragma: no cover - trivial
        return f"{self.module}: {super().__str__()}"
