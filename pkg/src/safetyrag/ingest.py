"""Corpus ingestion: page-structured safety documents -> traceable retrieval chunks.

Input is pre-extracted text (one string per page, optional table of contents).
Documents with a TOC are split at section boundaries; documents without one
are packed greedily into chunks of at most `threshold_words` words. Every
chunk keeps (doc_id, page_start, page_end) so answers can cite the exact
span of the source document.

Text normalization convention: a paragraph is a maximal run of non-blank
lines within one page; paragraphs are joined with a single blank line.
Page breaks are treated as paragraph boundaries. Under this convention the
concatenation of a document's chunk texts reproduces the normalized
document text exactly, in both segmentation modes.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)

PARAGRAPH_SEP = "\n\n"

# Boilerplate rule: a non-blank line repeated verbatim on >= 80% of a
# document's pages (and on at least 2 pages) is treated as a running
# header/footer and stripped before segmentation.
BOILERPLATE_PAGE_FRACTION = 0.8


class IngestError(ValueError):
    """Invalid document or manifest content."""


class MissingTocError(IngestError):
    """Document has no usable table of contents; use segment_by_length."""


class SourceType(str, Enum):
    OSHA_REG = "OSHA_REG"
    OSHA_TECH = "OSHA_TECH"
    NIOSH = "NIOSH"
    OEM = "OEM"


@dataclass
class Page:
    number: int
    text: str


@dataclass
class TocEntry:
    title: str
    start_page: int


@dataclass
class SourceDocument:
    doc_id: str
    source_type: SourceType
    title: str
    pages: list[Page]
    toc: list[TocEntry] | None = None

    def validate(self) -> None:
        if not self.doc_id:
            raise IngestError("doc_id must be non-empty")
        if not self.pages:
            raise IngestError(f"{self.doc_id}: document has no pages")
        numbers = [p.number for p in self.pages]
        if any(n < 1 for n in numbers):
            raise IngestError(f"{self.doc_id}: page numbers must be >= 1")
        if any(b <= a for a, b in zip(numbers, numbers[1:])):
            raise IngestError(f"{self.doc_id}: page numbers must be strictly increasing")
        if self.toc is not None:
            known = set(numbers)
            for entry in self.toc:
                if entry.start_page not in known:
                    raise IngestError(
                        f"{self.doc_id}: toc entry {entry.title!r} starts on page "
                        f"{entry.start_page}, which is not in the document"
                    )
            starts = [e.start_page for e in self.toc]
            if any(b <= a for a, b in zip(starts, starts[1:])):
                raise IngestError(f"{self.doc_id}: toc start pages must be strictly increasing")


@dataclass
class Chunk:
    """One retrieval unit, traceable to a contiguous page span of its source."""

    chunk_id: str
    doc_id: str
    source_type: SourceType
    section_title: str
    page_start: int
    page_end: int
    text: str
    word_count: int
    oversized: bool = False  # single paragraph longer than the packing threshold


@dataclass
class ManifestEntry:
    chunk_id: str
    doc_id: str
    source_type: str
    section_title: str
    page_start: int
    page_end: int
    word_count: int


@dataclass
class CorpusManifest:
    corpus_id: str
    chunks: list[ManifestEntry]
    created_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())


def paragraphs_of(text: str) -> list[str]:
    """Split text into paragraphs: maximal runs of non-blank lines.

    Lines inside a paragraph are kept verbatim; blank lines (whitespace-only)
    separate paragraphs and are discarded.
    """
    blocks: list[str] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append("\n".join(current))
            current = []
    if current:
        blocks.append("\n".join(current))
    return blocks


def normalize_page_text(text: str) -> str:
    return PARAGRAPH_SEP.join(paragraphs_of(text))


def document_text(doc: SourceDocument) -> str:
    """Normalized full text of a document (page breaks become paragraph breaks)."""
    parts = [normalize_page_text(p.text) for p in doc.pages]
    return PARAGRAPH_SEP.join(t for t in parts if t)


def strip_boilerplate(doc: SourceDocument) -> SourceDocument:
    """Remove lines repeated verbatim on >= 80% of pages (headers/footers).

    Requires the line to appear on at least two distinct pages, so
    single-page documents are never emptied.
    """
    n_pages = len(doc.pages)
    page_lines = [set(ln for ln in p.text.splitlines() if ln.strip()) for p in doc.pages]
    counts: Counter[str] = Counter()
    for lines in page_lines:
        counts.update(lines)
    repeated = {
        ln
        for ln, c in counts.items()
        if c >= 2 and c >= BOILERPLATE_PAGE_FRACTION * n_pages
    }
    if not repeated:
        return doc
    logger.debug("%s: stripping %d boilerplate line(s)", doc.doc_id, len(repeated))
    cleaned = [
        Page(p.number, "\n".join(ln for ln in p.text.splitlines() if ln not in repeated))
        for p in doc.pages
    ]
    return SourceDocument(doc.doc_id, doc.source_type, doc.title, cleaned, doc.toc)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def name_for(source_type: SourceType, doc_id: str, section_title: str, page_start: int, page_end: int) -> str:
    return f"{source_type.value}_{doc_id}_{_slug(section_title)}_p{page_start}-{page_end}"


def standardize_name(chunk: Chunk) -> str:
    """Canonical chunk name: `{source_type}_{doc_id}_{section_slug}_p{start}-{end}`.

    The section slug is lowercased with runs of non-alphanumerics collapsed
    to single hyphens, so the name is filesystem-safe and deterministic.
    """
    return name_for(chunk.source_type, chunk.doc_id, chunk.section_title, chunk.page_start, chunk.page_end)


def _make_chunk(
    doc: SourceDocument,
    section_title: str,
    page_start: int,
    page_end: int,
    text: str,
    oversized: bool = False,
) -> Chunk:
    chunk = Chunk(
        chunk_id="",
        doc_id=doc.doc_id,
        source_type=doc.source_type,
        section_title=section_title,
        page_start=page_start,
        page_end=page_end,
        text=text,
        word_count=len(text.split()),
        oversized=oversized,
    )
    chunk.chunk_id = standardize_name(chunk)
    return chunk


def segment_by_toc(doc: SourceDocument) -> list[Chunk]:
    """Split a document at its table-of-contents boundaries.

    Entry i spans pages [start_i, start_{i+1} - 1]; the last entry extends
    to the final page. Pages before the first entry (front matter) are not
    covered; callers wanting full coverage should ensure the TOC starts on
    the first page.
    """
    doc.validate()
    if not doc.toc:
        raise MissingTocError(f"{doc.doc_id}: no table of contents")
    chunks = []
    last_page = doc.pages[-1].number
    for i, entry in enumerate(doc.toc):
        start = entry.start_page
        end = doc.toc[i + 1].start_page - 1 if i + 1 < len(doc.toc) else last_page
        span = [p for p in doc.pages if start <= p.number <= end]
        text = PARAGRAPH_SEP.join(t for t in (normalize_page_text(p.text) for p in span) if t)
        chunks.append(_make_chunk(doc, entry.title, start, end, text))
    return chunks


def segment_by_length(doc: SourceDocument, threshold_words: int = 3000) -> list[Chunk]:
    """Greedily pack paragraphs into chunks of at most `threshold_words` words.

    A document at or below the threshold stays whole. A single paragraph
    longer than the threshold becomes its own chunk, marked oversized.
    Paragraph order is preserved, so joining the chunk texts reproduces the
    normalized document text.
    """
    doc.validate()
    paras: list[tuple[int, str]] = []  # (page_number, paragraph)
    for page in doc.pages:
        for block in paragraphs_of(page.text):
            paras.append((page.number, block))
    total_words = sum(len(t.split()) for _, t in paras)
    if total_words == 0:
        raise IngestError(f"{doc.doc_id}: document has no words")

    if total_words <= threshold_words:
        groups = [paras]
    else:
        groups = []
        current: list[tuple[int, str]] = []
        current_words = 0
        for page_no, block in paras:
            n = len(block.split())
            if n > threshold_words:
                if current:
                    groups.append(current)
                    current, current_words = [], 0
                groups.append([(page_no, block)])
                continue
            if current and current_words + n > threshold_words:
                groups.append(current)
                current, current_words = [], 0
            current.append((page_no, block))
            current_words += n
        if current:
            groups.append(current)

    chunks = []
    for i, group in enumerate(groups, start=1):
        title = doc.title if len(groups) == 1 else f"{doc.title} part {i}"
        text = PARAGRAPH_SEP.join(t for _, t in group)
        oversized = len(group) == 1 and len(group[0][1].split()) > threshold_words
        if oversized:
            logger.warning(
                "%s: paragraph of %d words exceeds threshold %d; kept as one oversized chunk",
                doc.doc_id, len(group[0][1].split()), threshold_words,
            )
        chunks.append(_make_chunk(doc, title, group[0][0], group[-1][0], text, oversized=oversized))
    return chunks


def segment_document(doc: SourceDocument, threshold_words: int = 3000) -> list[Chunk]:
    """TOC segmentation when a TOC is present, length-based packing otherwise."""
    if doc.toc:
        return segment_by_toc(doc)
    return segment_by_length(doc, threshold_words)


def build_manifest(chunks: list[Chunk], corpus_id: str = "corpus") -> CorpusManifest:
    """Summarize chunks into a manifest, rejecting duplicate chunk ids."""
    if not chunks:
        raise IngestError("cannot build a manifest from zero chunks")
    seen: set[str] = set()
    entries = []
    for c in chunks:
        if c.chunk_id in seen:
            raise IngestError(f"duplicate chunk_id {c.chunk_id!r}")
        seen.add(c.chunk_id)
        entries.append(
            ManifestEntry(
                chunk_id=c.chunk_id,
                doc_id=c.doc_id,
                source_type=c.source_type.value,
                section_title=c.section_title,
                page_start=c.page_start,
                page_end=c.page_end,
                word_count=c.word_count,
            )
        )
    return CorpusManifest(corpus_id=corpus_id, chunks=entries)


# ---------------------------------------------------------------------------
# Input manifest (documents with pages) and corpus directory I/O
# ---------------------------------------------------------------------------

def parse_source_documents(data: dict) -> tuple[str, list[SourceDocument]]:
    """Parse the input corpus manifest: {"corpus_id", "documents": [...]}."""
    corpus_id = data.get("corpus_id", "corpus")
    docs = []
    seen_ids: set[str] = set()
    for raw in data.get("documents", []):
        try:
            source_type = SourceType(raw["source_type"])
        except (KeyError, ValueError) as exc:
            raise IngestError(f"document {raw.get('doc_id')!r}: bad source_type") from exc
        pages = [Page(int(p["number"]), p["text"]) for p in raw.get("pages", [])]
        toc_raw = raw.get("toc")
        toc = [TocEntry(e["title"], int(e["start_page"])) for e in toc_raw] if toc_raw else None
        doc = SourceDocument(raw["doc_id"], source_type, raw.get("title", raw["doc_id"]), pages, toc)
        doc.validate()
        if doc.doc_id in seen_ids:
            raise IngestError(f"duplicate doc_id {doc.doc_id!r}")
        seen_ids.add(doc.doc_id)
        docs.append(doc)
    if not docs:
        raise IngestError("input manifest lists no documents")
    return corpus_id, docs


def ingest_documents(docs: list[SourceDocument], threshold_words: int = 3000) -> list[Chunk]:
    """Strip boilerplate and segment each document; chunks in document order."""
    chunks: list[Chunk] = []
    for doc in docs:
        chunks.extend(segment_document(strip_boilerplate(doc), threshold_words))
    return chunks


def manifest_to_json(manifest: CorpusManifest) -> str:
    payload = {
        "corpus_id": manifest.corpus_id,
        "created_at": manifest.created_at,
        "chunks": [vars(e) for e in manifest.chunks],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> CorpusManifest:
    data = json.loads(text)
    entries = [ManifestEntry(**e) for e in data["chunks"]]
    return CorpusManifest(corpus_id=data["corpus_id"], chunks=entries, created_at=data["created_at"])


def write_corpus(chunks: list[Chunk], out_dir: Path, corpus_id: str = "corpus") -> CorpusManifest:
    """Write one text file per chunk (named by its chunk id) plus manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(chunks, corpus_id)
    for chunk in chunks:
        (out_dir / f"{chunk.chunk_id}.txt").write_text(chunk.text, encoding="utf-8")
    (out_dir / "manifest.json").write_text(manifest_to_json(manifest), encoding="utf-8")
    return manifest


def load_corpus(corpus_dir: Path) -> tuple[CorpusManifest, list[Chunk]]:
    """Load a corpus directory written by `write_corpus` back into chunks."""
    corpus_dir = Path(corpus_dir)
    manifest = manifest_from_json((corpus_dir / "manifest.json").read_text(encoding="utf-8"))
    chunks = []
    for entry in manifest.chunks:
        text = (corpus_dir / f"{entry.chunk_id}.txt").read_text(encoding="utf-8")
        chunks.append(
            Chunk(
                chunk_id=entry.chunk_id,
                doc_id=entry.doc_id,
                source_type=SourceType(entry.source_type),
                section_title=entry.section_title,
                page_start=entry.page_start,
                page_end=entry.page_end,
                text=text,
                word_count=entry.word_count,
            )
        )
    return manifest, chunks
