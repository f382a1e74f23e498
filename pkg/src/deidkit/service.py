"""HTTP backend for the annotation UI and the learning loop.

Every endpoint is a thin adapter over the library: responses carry a
schema_version field, bodies are JSON, and write conflicts surface as
409 so clients can reload and merge. Static UI assets are served from a
configurable directory.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import AnnotationStore, EmptyDomain, RevisionConflict, \
    UnknownDocument, iaa_report
from .ensemble import EnsembleModel, apply_ensemble
from .textcore import CATEGORIES, Document, OverlapError, PiiSpan

SCHEMA_VERSION = 1


class SpanBody(BaseModel):
    start: int = Field(ge=0)
    end: int = Field(ge=1)
    category: str
    source: str = "human"


class SaveBody(BaseModel):
    revision: int = Field(ge=0)
    spans: list[SpanBody]
    annotator: str = "default"
    status: str = "in_progress"


class PretagBody(BaseModel):
    ensemble_id: str
    annotator: str = "machine"


class UploadBody(BaseModel):
    doc_id: str
    text: str
    set: str = "default"


def _to_spans(body_spans: list[SpanBody], annotator: str) -> list[PiiSpan]:
    try:
        return [PiiSpan(s.start, s.end, s.category, s.source, annotator)
                for s in body_spans]
    except ValueError as e:
        raise HTTPException(422, detail=str(e)) from None


def _span_json(s: PiiSpan) -> dict:
    return {"start": s.start, "end": s.end, "category": s.category,
            "source": s.source}


def create_app(
    store: AnnotationStore,
    ensembles: Mapping[str, EnsembleModel] | None = None,
    doc_sets: dict[str, list[str]] | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="deidkit annotation service")
    ensembles = dict(ensembles or {})
    doc_sets = dict(doc_sets or {})

    def resolve_set(name: str) -> list[str]:
        if name == "default":
            return store.doc_ids()
        if name not in doc_sets:
            raise HTTPException(404, detail=f"unknown set {name!r}")
        return sorted(doc_sets[name])

    @app.get("/api/docs")
    def list_docs(annotator: str = "default"):
        out = []
        for doc_id in store.doc_ids():
            rec = store.get(doc_id, annotator)
            out.append({
                "doc_id": doc_id,
                "status": rec.status if rec else "in_progress",
                "revision": rec.revision if rec else 0,
                "span_count": len(rec.spans) if rec else 0,
                "pretag_available": bool(ensembles),
            })
        return {"schema_version": SCHEMA_VERSION, "docs": out}

    @app.post("/api/docs", status_code=201)
    def upload_doc(body: UploadBody):
        if body.doc_id in store.doc_ids():
            raise HTTPException(409, detail=f"{body.doc_id} already exists")
        store.add_document(Document.make(body.doc_id, body.text))
        doc_sets.setdefault(body.set, []).append(body.doc_id)
        return {"schema_version": SCHEMA_VERSION, "doc_id": body.doc_id}

    @app.get("/api/docs/{doc_id}")
    def get_doc(doc_id: str, annotator: str = "default"):
        try:
            doc = store.document(doc_id)
        except UnknownDocument:
            raise HTTPException(404, detail=f"unknown doc {doc_id!r}") from None
        rec = store.get(doc_id, annotator)
        spans = sorted(rec.spans, key=lambda s: s.start) if rec else []
        return {
            "schema_version": SCHEMA_VERSION,
            "doc_id": doc_id,
            "text": doc.text,
            "revision": rec.revision if rec else 0,
            "status": rec.status if rec else "in_progress",
            "spans": [_span_json(s) for s in spans],
            "tokens": [[t.start, t.end] for line in doc.tokens for t in line],
            "categories": list(CATEGORIES),
        }

    @app.put("/api/docs/{doc_id}/spans")
    def put_spans(doc_id: str, body: SaveBody):
        spans = _to_spans(body.spans, body.annotator)
        try:
            revision = store.save_annotation(
                doc_id, body.annotator, spans, body.revision, body.status)
        except UnknownDocument:
            raise HTTPException(404, detail=f"unknown doc {doc_id!r}") from None
        except RevisionConflict as e:
            raise HTTPException(409, detail=str(e)) from None
        except (OverlapError, ValueError) as e:
            raise HTTPException(422, detail=str(e)) from None
        return {"schema_version": SCHEMA_VERSION, "revision": revision}

    @app.post("/api/docs/{doc_id}/pretag")
    def pretag(doc_id: str, body: PretagBody):
        try:
            doc = store.document(doc_id)
        except UnknownDocument:
            raise HTTPException(404, detail=f"unknown doc {doc_id!r}") from None
        if body.ensemble_id not in ensembles:
            raise HTTPException(
                404, detail=f"unknown ensemble {body.ensemble_id!r}")
        try:
            spans = apply_ensemble(ensembles[body.ensemble_id], doc)
        except Exception as e:
            raise HTTPException(
                422, detail=f"ensemble cannot tag {doc_id!r}: {e}") from None
        rec = store.ingest_pretag(doc_id, spans, body.annotator)
        return {
            "schema_version": SCHEMA_VERSION,
            "doc_id": doc_id,
            "revision": rec.revision,
            "status": rec.status,
            "spans": [_span_json(s)
                      for s in sorted(rec.spans, key=lambda s: s.start)],
        }

    @app.get("/api/export/bio")
    def export_bio(set_name: str = Query("default", alias="set"),
                   annotator: str | None = None, all: bool = False):
        ids = resolve_set(set_name)
        text = store.export_bio(ids, annotator_id=annotator,
                                only_confirmed=not all)
        return PlainTextResponse(text, media_type="text/plain; charset=utf-8")

    @app.get("/api/iaa")
    def iaa(a1: str, a2: str,
            set_name: str = Query("default", alias="set")):
        for a in (a1, a2):
            if a not in store.annotator_ids():
                raise HTTPException(404, detail=f"unknown annotator {a!r}")
        ids = resolve_set(set_name)
        recs_a = {r.doc_id: r for r in store.records_for(a1)
                  if r.doc_id in ids}
        recs_b = {r.doc_id: r for r in store.records_for(a2)
                  if r.doc_id in ids}
        common = sorted(set(recs_a) & set(recs_b))
        if not common:
            raise HTTPException(422, detail="no commonly annotated documents")
        docs = [store.document(d) for d in common]
        try:
            rep = iaa_report(docs,
                             {d: recs_a[d] for d in common},
                             {d: recs_b[d] for d in common})
        except EmptyDomain as e:
            raise HTTPException(422, detail=str(e)) from None
        return {"schema_version": SCHEMA_VERSION, **rep.to_json_dict()}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app
