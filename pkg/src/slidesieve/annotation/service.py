"""REST API for the annotation queue; serves the browser UI as static files."""
from __future__ import annotations

import mimetypes
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..labels import N_CATEGORIES
from .store import AnnotationStore, UnknownImage


class AnnotationIn(BaseModel):
    image_id: str
    flags: list[bool] = Field(min_length=N_CATEGORIES, max_length=N_CATEGORIES)
    annotator: str = "anonymous"


class AnnotationOut(BaseModel):
    image_id: str
    flags: list[bool]
    annotator: str
    timestamp: str
    revision: int


class NextTask(BaseModel):
    image_id: str
    image_url: str


class Progress(BaseModel):
    done: int
    total: int


def create_app(store: AnnotationStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="slidesieve annotation service")

    @app.get("/api/tasks/next", response_model=NextTask, responses={204: {"description": "queue drained"}})
    def next_task():
        task = store.next_task()
        if task is None:
            return Response(status_code=204)
        image_id, _ = task
        return NextTask(image_id=image_id, image_url=f"/api/images/{image_id}")

    @app.post("/api/annotations", response_model=AnnotationOut, status_code=201)
    def post_annotation(body: AnnotationIn):
        try:
            rec = store.record_annotation(body.image_id, body.flags, body.annotator)
        except UnknownImage:
            raise HTTPException(status_code=404, detail=f"unknown image_id {body.image_id!r}")
        return AnnotationOut(
            image_id=rec.image_id,
            flags=list(rec.flags),
            annotator=rec.annotator,
            timestamp=rec.timestamp,
            revision=rec.revision,
        )

    @app.get("/api/progress", response_model=Progress)
    def progress():
        done, total = store.progress()
        return Progress(done=done, total=total)

    @app.get("/api/images/{image_id}")
    def image(image_id: str):
        try:
            path = Path(store.image_path(image_id))
        except UnknownImage:
            raise HTTPException(status_code=404, detail=f"unknown image_id {image_id!r}")
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"file missing for {image_id!r}")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.get("/api/annotations/current")
    def current_annotations():
        return [
            {"image_id": r.image_id, "flags": list(r.flags), "annotator": r.annotator, "revision": r.revision}
            for r in store.current_records()
        ]

    @app.get("/api/labels/export", response_class=PlainTextResponse)
    def export_labels():
        return PlainTextResponse(store.export_labels(), media_type="application/jsonl")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
