"""Command line client for the retraction analysis service.

Every verb posts to the HTTP service and prints the JSON response.  By
default the service app runs in-process, so no server is needed; --server
posts to a remote instance instead (input paths are then read on the server).
Usage mistakes exit 2; data and service errors exit 1 with the failing
module named in the message.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Optional

import click
import httpx

from . import CitewakeError, __version__
from .cohort import TreatmentKind
from .report import write_report_dir

KINDS = [k.value for k in TreatmentKind]
RESOLUTIONS = ["majority", "first_rater"]


class ServiceClient:
    def __init__(self, server: Optional[str] = None):
        self._server = server.rstrip("/") if server else None
        self._app = None
        if self._server is None:
            from .service import create_app

            self._app = create_app()

    def post(self, path: str, payload: dict) -> dict:
        if self._server is None:
            response = asyncio.run(self._post_in_process(path, payload))
        else:
            try:
                response = httpx.post(
                    self._server + path, json=payload, timeout=600.0
                )
            except httpx.HTTPError as exc:
                raise click.ClickException(
                    f"request to {self._server} failed: {exc}"
                )
        return self._unwrap(response)

    async def _post_in_process(self, path: str, payload: dict) -> httpx.Response:
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _unwrap(response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail")
            except (ValueError, AttributeError):
                detail = None
            if isinstance(detail, list):  # request validation errors
                detail = "; ".join(
                    str(item.get("msg", item)) if isinstance(item, dict) else str(item)
                    for item in detail
                )
            raise click.ClickException(str(detail) if detail else response.text)
        return response.json()


def _emit(data: dict) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


def _apply(fn, decorators):
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _corpus_options(fn):
    return _apply(
        fn,
        [
            click.argument("input_arg", required=False, metavar="[INPUT]"),
            click.option(
                "--input", "input_opt", metavar="PATH",
                help="Corpus file (alternative to the positional INPUT)",
            ),
            click.option(
                "--format", "format_", type=click.Choice(["jsonl", "csv"]),
                default="jsonl", show_default=True, help="Corpus file format",
            ),
            click.option(
                "--timestamp/--no-timestamp", default=True, show_default=True,
                help="Stamp the run manifest with the current time",
            ),
        ],
    )


def _cohort_options(fn):
    return _apply(
        fn,
        [
            click.option(
                "--kind", type=click.Choice(KINDS), default="P_t",
                show_default=True, help="Treatment group to build",
            ),
            click.option(
                "--horizon-year", type=int, default=2014, show_default=True,
                help="Last year of the impact window",
            ),
            click.option(
                "--yr-in-pre/--no-yr-in-pre", "yr_in_pre", default=True,
                show_default=True,
                help="Count the retraction year in the pre window",
            ),
        ],
    )


def _corpus_payload(input_arg, input_opt, format_, timestamp) -> dict:
    path = input_opt or input_arg
    if not path:
        raise click.UsageError("missing corpus input: pass a path or --input PATH")
    return {"input": path, "format": format_, "timestamp": timestamp}


def _parse_lags(ctx, param, value):
    try:
        lags = [int(tok) for tok in value.split(",") if tok.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers")
    if not lags:
        raise click.BadParameter("at least one lag is required")
    return lags


def _write_dir(bundle: dict, out_dir: str) -> list[str]:
    try:
        return write_report_dir(bundle, out_dir)
    except (CitewakeError, OSError) as exc:
        raise click.ClickException(str(exc))


@click.group()
@click.version_option(__version__)
@click.option(
    "--server", metavar="URL", envvar="CITEWAKE_SERVER",
    help="Post to a running service instead of the in-process app",
)
@click.pass_context
def main(ctx, server):
    """Quantify how retractions change scholarly impact."""
    ctx.obj = ServiceClient(server)


@main.command()
@_corpus_options
@click.pass_obj
def ingest(client, input_arg, input_opt, format_, timestamp):
    """Parse and index a corpus file, reporting its shape."""
    _emit(client.post("/ingest", _corpus_payload(input_arg, input_opt, format_, timestamp)))


@main.command()
@_corpus_options
@click.option(
    "--out-dir", metavar="DIR", default=None,
    help="Also write the descriptive tables as CSV files",
)
@click.pass_obj
def describe(client, input_arg, input_opt, format_, timestamp, out_dir):
    """Corpus-wide retraction statistics: rates, delays, ESI table, citations."""
    data = client.post(
        "/describe", _corpus_payload(input_arg, input_opt, format_, timestamp)
    )
    if out_dir:
        body = {k: v for k, v in data.items() if k != "manifest"}
        _write_dir({"manifest": data["manifest"], "describe": body}, out_dir)
    _emit(data)


@main.command("annotate-stats")
@_corpus_options
@click.option(
    "--annotations", required=True, metavar="CSV",
    help="Rater table with columns paper_id, rater_id, reason, requester",
)
@click.option(
    "--resolution", type=click.Choice(RESOLUTIONS), default="majority",
    show_default=True, help="How multi-rater codes merge into one reason",
)
@click.option(
    "--from-year", type=int, default=2000, show_default=True,
    help="First retraction year in the reason trend",
)
@click.pass_obj
def annotate_stats(client, input_arg, input_opt, format_, timestamp, annotations,
                   resolution, from_year):
    """Inter-rater agreement and the mix of retraction reasons."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "annotations": annotations,
        "resolution": resolution,
        "from_year": from_year,
    }
    _emit(client.post("/annotate-stats", payload))


@main.command()
@_corpus_options
@_cohort_options
@click.option(
    "--out-dir", metavar="DIR", default=None,
    help="Also write the pair table as a CSV file",
)
@click.pass_obj
def cohort(client, input_arg, input_opt, format_, timestamp, kind, horizon_year,
           yr_in_pre, out_dir):
    """Build matched treatment/control pairs for one treatment kind."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "kind": kind,
        "horizon_year": horizon_year,
        "yr_in_pre": yr_in_pre,
    }
    data = client.post("/cohort", payload)
    if out_dir:
        body = {k: v for k, v in data.items() if k != "manifest"}
        _write_dir(
            {"manifest": data["manifest"], "cohorts": {data["kind"]: body}}, out_dir
        )
    _emit(data)


@main.command()
@_corpus_options
@_cohort_options
@click.pass_obj
def compare(client, input_arg, input_opt, format_, timestamp, kind, horizon_year,
            yr_in_pre):
    """Treatment-vs-control impact comparison with significance stars."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "kind": kind,
        "horizon_year": horizon_year,
        "yr_in_pre": yr_in_pre,
    }
    _emit(client.post("/compare", payload))


@main.command()
@_corpus_options
@_cohort_options
@click.option(
    "--annotations", default=None, metavar="CSV",
    help="Rater table; defaults to reasons from retraction notices",
)
@click.option(
    "--media-list", default=None, metavar="FILE",
    help="Scholar names (one per line) whose retractions drew media coverage",
)
@click.option(
    "--resolution", type=click.Choice(RESOLUTIONS), default="majority",
    show_default=True, help="How multi-rater codes merge into one reason",
)
@click.pass_obj
def segment(client, input_arg, input_opt, format_, timestamp, kind, horizon_year,
            yr_in_pre, annotations, media_list, resolution):
    """Median impact change split by retraction reason and media coverage."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "kind": kind,
        "horizon_year": horizon_year,
        "yr_in_pre": yr_in_pre,
        "annotations": annotations,
        "media_list": media_list,
        "resolution": resolution,
    }
    _emit(client.post("/segment", payload))


@main.command()
@_corpus_options
@click.option(
    "--dictionary", required=True, metavar="TSV",
    help="Topic dictionary, one phrase<TAB>topic_key per line",
)
@click.option(
    "--limit", type=int, default=10, show_default=True,
    help="How many topics to rank",
)
@click.pass_obj
def topics(client, input_arg, input_opt, format_, timestamp, dictionary, limit):
    """Rank topics among retracted papers and emit popularity series."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "dictionary": dictionary,
        "limit": limit,
    }
    _emit(client.post("/topics", payload))


@main.command()
@_corpus_options
@click.option(
    "--dictionary", required=True, metavar="TSV",
    help="Topic dictionary, one phrase<TAB>topic_key per line",
)
@click.option(
    "--lags", default="1,2,3", show_default=True, callback=_parse_lags,
    help="Comma-separated lag depths to screen",
)
@click.option(
    "--limit", type=int, default=10, show_default=True,
    help="How many topics to screen",
)
@click.pass_obj
def granger(client, input_arg, input_opt, format_, timestamp, dictionary, lags, limit):
    """Test whether topic retraction rates lead topic popularity."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "dictionary": dictionary,
        "lags": lags,
        "limit": limit,
    }
    _emit(client.post("/granger", payload))


@main.command()
@click.option("--out-dir", metavar="DIR", default=None, help="Directory for the corpus and sidecar files")
@click.option("--out", "out_file", metavar="PATH", default=None, help="Exact path for the corpus file itself")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option(
    "--config", "config_path", metavar="JSON", default=None,
    help="Generator settings as a JSON file",
)
@click.option("--timestamp/--no-timestamp", default=True, show_default=True)
@click.pass_obj
def synth(client, out_dir, out_file, seed, config_path, timestamp):
    """Generate a synthetic corpus with planted, measurable ground truth."""
    if bool(out_dir) == bool(out_file):
        raise click.UsageError("pass exactly one of --out-dir or --out")
    config = {}
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise click.ClickException(f"cannot read config {config_path}: {exc}")
    payload = {
        "out_dir": out_dir or str(Path(out_file).parent),
        "seed": seed,
        "config": config,
        "timestamp": timestamp,
    }
    if out_file:
        payload["corpus_name"] = Path(out_file).name
    _emit(client.post("/synth", payload))


@main.command()
@_corpus_options
@click.option(
    "--kind", "kinds", type=click.Choice(KINDS), multiple=True,
    default=("P_t",), show_default=True, help="Treatment kinds (repeatable)",
)
@click.option("--dictionary", default=None, metavar="TSV", help="Topic dictionary; enables the topic sections")
@click.option("--annotations", default=None, metavar="CSV", help="Rater table; enables the agreement section")
@click.option("--media-list", default=None, metavar="FILE", help="Scholar names with media coverage")
@click.option(
    "--resolution", type=click.Choice(RESOLUTIONS), default="majority",
    show_default=True,
)
@click.option("--horizon-year", type=int, default=2014, show_default=True)
@click.option(
    "--yr-in-pre/--no-yr-in-pre", "yr_in_pre", default=True, show_default=True,
    help="Count the retraction year in the pre window",
)
@click.option("--limit", type=int, default=10, show_default=True)
@click.option("--lags", default="1,2,3", show_default=True, callback=_parse_lags)
@click.option("--out-dir", metavar="DIR", required=True, help="Directory for report.json and the CSV tables")
@click.pass_obj
def report(client, input_arg, input_opt, format_, timestamp, kinds, dictionary,
           annotations, media_list, resolution, horizon_year, yr_in_pre, limit,
           lags, out_dir):
    """Run the full pipeline and write one report.json plus CSV tables."""
    payload = _corpus_payload(input_arg, input_opt, format_, timestamp) | {
        "kinds": list(kinds),
        "dictionary": dictionary,
        "annotations": annotations,
        "media_list": media_list,
        "resolution": resolution,
        "horizon_year": horizon_year,
        "yr_in_pre": yr_in_pre,
        "limit": limit,
        "lags": lags,
    }
    data = client.post("/report", payload)
    for path in _write_dir(data, out_dir):
        click.echo(path)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8037, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
