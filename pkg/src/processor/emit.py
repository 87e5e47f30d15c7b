import json
import logging
import shutil
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import pandas as pd

from constants import RECORD_COLUMNS, SUMMARY_COLUMNS
from src.errors import PriorSimError
from src.model import RegretRecord
from src.processor.report import RegretReport, RunningSummary, aggregate

logger = logging.getLogger(__name__)

RECORDS_FILE = "records"
SUMMARY_FILE = "summary"
PARTS_DIR = ".parts"


class BaseReportWriter(ABC):
    """Abstract base class for report writers."""

    suffix: str = ""

    @abstractmethod
    def write(self, report: RegretReport, out_dir: Path, group_by: str) -> List[Path]:
        """Write the report under `out_dir`.

        Args:
            report (RegretReport): Report to write.
            out_dir (Path): Existing output directory.
            group_by (str): Grouping of the summary table.

        Returns:
            List[Path]: Files written.
        """
        pass


class CsvReportWriter(BaseReportWriter):
    """Per-episode records plus the plot-ready summary, as CSV."""

    suffix = ".csv"

    def write(self, report: RegretReport, out_dir: Path, group_by: str) -> List[Path]:
        records_path = out_dir / f"{RECORDS_FILE}{self.suffix}"
        report.to_frame().to_csv(records_path, index=False, lineterminator="\n")
        summary_path = out_dir / f"{SUMMARY_FILE}{self.suffix}"
        if report.records:
            summary = aggregate(report, group_by)
        else:
            summary = pd.DataFrame(columns=list(SUMMARY_COLUMNS))
        summary.to_csv(summary_path, index=False, lineterminator="\n")
        return [records_path, summary_path]


class JsonReportWriter(BaseReportWriter):
    """Records and metadata in one JSON document."""

    suffix = ".json"

    def write(self, report: RegretReport, out_dir: Path, group_by: str) -> List[Path]:
        path = out_dir / f"{RECORDS_FILE}{self.suffix}"
        document = {
            "metadata": report.metadata,
            "columns": list(RECORD_COLUMNS),
            "records": report.to_frame().to_dict(orient="records"),
        }
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return [path]


WRITERS: Dict[str, type] = {"csv": CsvReportWriter, "json": JsonReportWriter}


def writer_for(fmt: str) -> BaseReportWriter:
    """Create the writer of an output format."""
    try:
        return WRITERS[fmt]()
    except KeyError:
        raise PriorSimError(f"unknown output format {fmt!r}, expected one of {sorted(WRITERS)}")


def emit(
    report: RegretReport,
    out_dir: Union[str, Path],
    formats: Iterable[str] = ("csv", "json"),
    group_by: str = "all",
) -> List[Path]:
    """Write a report in the requested formats.

    Args:
        report (RegretReport): Report to write.
        out_dir (Union[str, Path]): Output directory, created if missing.
        formats (Iterable[str]): Any of ``csv`` and ``json``.
        group_by (str): Grouping of the summary table.

    Returns:
        List[Path]: Files written.

    Raises:
        PriorSimError: On an unknown format or when the directory is not writable.
    """
    out_dir = Path(out_dir)
    writers = [writer_for(fmt) for fmt in formats]
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [path for writer in writers for path in writer.write(report, out_dir, group_by)]
    except OSError as e:
        raise PriorSimError(f"cannot write report to {out_dir}: {e}") from e
    for path in paths:
        logger.info("Wrote %s", path)
    return paths


class RecordSpool:
    """Writes each finished run to a part file and keeps only running sums in memory.

    Every run is one (algo, distribution, task, seed) key, so concatenating the
    parts in key order gives the same records file `emit` writes.
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.parts_dir = self.out_dir / PARTS_DIR
        try:
            self.parts_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise PriorSimError(f"cannot spool records to {self.out_dir}: {e}") from e
        self.summary = RunningSummary()
        self._parts: Dict[tuple, Path] = {}
        self._records = 0

    def __len__(self) -> int:
        return self._records

    def add(self, run: List[RegretRecord]) -> None:
        """Spool the records of one run."""
        if not run:
            return
        key = run[0].key()[:4]
        path = self.parts_dir / f"part-{len(self._parts):08d}.csv"
        RegretReport(run).to_frame().to_csv(path, index=False, header=False, lineterminator="\n")
        self._parts[key] = path
        self._records += len(run)
        self.summary.add(run)

    def merge(self) -> Path:
        """Concatenate the parts in key order into the records CSV and remove them."""
        path = self.out_dir / f"{RECORDS_FILE}.csv"
        with path.open("w", encoding="utf-8", newline="") as out:
            out.write(",".join(RECORD_COLUMNS) + "\n")
            for key in sorted(self._parts):
                part = self._parts[key]
                with part.open("r", encoding="utf-8", newline="") as source:
                    shutil.copyfileobj(source, out)
                part.unlink()
        self._parts.clear()
        self.parts_dir.rmdir()
        return path


def emit_spooled(spool: RecordSpool, metadata: Dict, group_by: str = "all") -> List[Path]:
    """Finish a spooled run: merged records CSV, summary CSV and a metadata-only JSON.

    Raises:
        PriorSimError: When the directory is not writable.
    """
    out_dir = spool.out_dir
    try:
        records_path = spool.merge()
        summary_path = out_dir / f"{SUMMARY_FILE}.csv"
        spool.summary.aggregate(metadata, group_by).to_csv(
            summary_path, index=False, lineterminator="\n"
        )
        json_path = out_dir / f"{RECORDS_FILE}.json"
        document = {
            "metadata": metadata,
            "columns": list(RECORD_COLUMNS),
            "records_file": records_path.name,
        }
        json_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise PriorSimError(f"cannot write report to {out_dir}: {e}") from e
    paths = [records_path, summary_path, json_path]
    for path in paths:
        logger.info("Wrote %s", path)
    return paths


def read_records(path: Union[str, Path]) -> RegretReport:
    """Parse a records CSV or JSON file written by `emit`.

    Raises:
        PriorSimError: If the file is missing or malformed.
    """
    path = Path(path)
    if not path.is_file():
        raise PriorSimError(f"records file {str(path)!r} does not exist")
    try:
        if path.suffix == ".json":
            document = json.loads(path.read_text(encoding="utf-8"))
            if "records" not in document and "records_file" in document:
                source = path.parent / document["records_file"]
                frame = pd.read_csv(source, float_precision="round_trip")
                return RegretReport.from_frame(frame, document.get("metadata"))
            frame = pd.DataFrame(document["records"], columns=document["columns"])
            return RegretReport.from_frame(frame, document.get("metadata"))
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError, KeyError, pd.errors.ParserError) as e:
        raise PriorSimError(f"{path}: {e}") from e
    metadata_path = path.with_suffix(".json")
    metadata = {}
    if metadata_path.is_file():
        metadata = json.loads(metadata_path.read_text(encoding="utf-8")).get("metadata", {})
    return RegretReport.from_frame(frame, metadata)


def summary_paths(out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    return out_dir / f"{RECORDS_FILE}.csv", out_dir / f"{SUMMARY_FILE}.csv"
