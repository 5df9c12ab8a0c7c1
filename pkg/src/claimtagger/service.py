"""HTTP service for claim prediction and expert annotation.

Endpoints (JSON over HTTP, schemas in docs/http_api.md):

    POST /predict              per-sentence claim and discourse predictions
    GET  /tasks/next           next unannotated task for an annotator
    POST /annotations          submit selected sentence indices for a task
    GET  /annotations/export   the accumulated claim corpus, JSON lines

Submissions go to an append-only log that is replayed on startup, so a
restart loses nothing that was acknowledged.  Prediction uses one
immutable model shared across requests; writes are serialized by a lock
(resubmission replaces the active record, the log keeps the history).
"""

from __future__ import annotations

import datetime as _dt
import json
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .corpus import AnnotationRecord, ClaimDocument, majority_vote, serialize_claim_corpus
from .errors import ClaimTaggerError
from .tagger import TaggerModel, predict
from .text import split_sentences
from . import corpus as corpus_mod

DEFAULT_BODY_LIMIT = 1_000_000
GOLD_MIN_ANNOTATORS = 3
INSTRUCTIONS_VERSION = 1


@dataclass
class Task:
    task_id: str
    title: str
    sentences: list[str]


@dataclass
class Submission:
    task_id: str
    annotator: str
    indices: list[int]
    timestamp: str
    seq: int


def _task_sort_key(task):
    tid = task.task_id
    return (0, int(tid)) if tid.isdigit() else (1, tid)


def load_tasks(path):
    """Task file: JSON lines with id, title, and sentences or raw text.

    Raw text is split into sentences exactly once here; the deterministic
    splitter guarantees every load of the same file yields the same
    splits.
    """
    tasks = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            task_id = str(record["id"])
            if task_id in seen:
                raise ClaimTaggerError(f"duplicate task id {task_id!r}")
            seen.add(task_id)
            if "sentences" in record:
                sentences = [str(s) for s in record["sentences"]]
            else:
                sentences = [span.text for span in split_sentences(str(record["text"]))]
            tasks.append(Task(task_id=task_id, title=str(record.get("title", "")),
                              sentences=sentences))
    return sorted(tasks, key=_task_sort_key)


class AnnotationStore:
    """Append-only submission log with startup replay.

    The latest record per (task, annotator) wins; earlier lines remain in
    the log as the audit trail.
    """

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()
        self._active = {}
        self._seq = 0
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            self._apply(json.loads(line))
            except FileNotFoundError:
                pass

    def _apply(self, record):
        sub = Submission(task_id=str(record["task_id"]),
                         annotator=str(record["annotator"]),
                         indices=[int(i) for i in record["indices"]],
                         timestamp=str(record.get("ts", "")),
                         seq=int(record.get("seq", self._seq + 1)))
        self._active[(sub.task_id, sub.annotator)] = sub
        self._seq = max(self._seq, sub.seq)
        return sub

    def submit(self, task_id, annotator, indices):
        with self._lock:
            record = {
                "v": 1,
                "seq": self._seq + 1,
                "task_id": task_id,
                "annotator": annotator,
                "indices": list(indices),
                "ts": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            }
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
            return self._apply(record)

    def has_submission(self, task_id, annotator):
        return (task_id, annotator) in self._active

    def submissions_for(self, task_id):
        subs = [s for (tid, _), s in self._active.items() if tid == task_id]
        return sorted(subs, key=lambda s: (s.annotator, s.seq))


def _error(status, message):
    return JSONResponse({"error": message}, status_code=status)


def create_app(model_path=None, task_path=None, store_path=None,
               discourse_model_path=None, body_limit=DEFAULT_BODY_LIMIT):
    app = FastAPI(title="claimtagger service")
    model = TaggerModel.load(model_path) if model_path else None
    discourse_model = TaggerModel.load(discourse_model_path) if discourse_model_path else None
    tasks = load_tasks(task_path) if task_path else []
    tasks_by_id = {t.task_id: t for t in tasks}
    store = AnnotationStore(store_path)

    async def read_json(request):
        body = await request.body()
        if len(body) > body_limit:
            return None, _error(413, f"body exceeds {body_limit} bytes")
        try:
            return json.loads(body), None
        except json.JSONDecodeError:
            return None, _error(400, "body is not valid JSON")

    @app.post("/predict")
    async def predict_endpoint(request: Request):
        if model is None:
            return _error(503, "model not loaded")
        payload, err = await read_json(request)
        if err is not None:
            return err
        abstract_text = str(payload.get("abstract_text", "") or "")
        title = str(payload.get("title", "") or "")
        spans = split_sentences(abstract_text)
        if not spans:
            return _error(400, "empty abstract")
        abstract = corpus_mod.Abstract(id="request", title=title,
                                       sentences=[s.text for s in spans])
        claim_preds = predict(model, abstract)
        discourse_rows = None
        if discourse_model is not None:
            discourse_rows = [
                {label: float(p) for label, p in zip(discourse_model.labels, row.probabilities)}
                for row in predict(discourse_model, abstract)
            ]
        sentences = []
        for i, pred in enumerate(claim_preds):
            sentences.append({
                "index": pred.index,
                "text": pred.text,
                "claim_prob": pred.claim_prob,
                "claim": pred.claim,
                "discourse_dist": discourse_rows[i] if discourse_rows else None,
            })
        return {"v": 1, "title": title, "sentences": sentences}

    @app.get("/tasks/next")
    def next_task(request: Request):
        annotator = request.query_params.get("annotator", "").strip()
        if not annotator:
            return _error(400, "missing annotator parameter")
        for task in tasks:
            if not store.has_submission(task.task_id, annotator):
                return {"v": 1, "task_id": task.task_id, "title": task.title,
                        "sentences": task.sentences,
                        "instructions_version": INSTRUCTIONS_VERSION}
        return Response(status_code=204)

    @app.post("/annotations")
    async def submit_annotation(request: Request):
        payload, err = await read_json(request)
        if err is not None:
            return err
        task_id = str(payload.get("task_id", ""))
        annotator = str(payload.get("annotator", "")).strip()
        if not annotator:
            return _error(400, "missing annotator")
        task = tasks_by_id.get(task_id)
        if task is None:
            return _error(404, f"unknown task {task_id!r}")
        raw_indices = payload.get("indices", [])
        if not isinstance(raw_indices, list):
            return _error(422, "indices must be a list")
        try:
            indices = sorted({int(i) for i in raw_indices})
        except (TypeError, ValueError):
            return _error(422, "indices must be integers")
        n = len(task.sentences)
        bad = [i for i in indices if not 0 <= i < n]
        if bad:
            return _error(422, f"sentence index {bad[0]} out of range [0, {n})")
        sub = store.submit(task_id, annotator, indices)
        return JSONResponse({"v": 1, "task_id": task_id, "annotator": annotator,
                             "seq": sub.seq}, status_code=201)

    @app.get("/annotations/export")
    def export_annotations():
        docs = []
        for task in tasks:
            subs = store.submissions_for(task.task_id)
            if not subs:
                continue
            records = [
                AnnotationRecord(
                    abstract_id=task.task_id,
                    annotator_id=s.annotator,
                    labels=[i in set(s.indices) for i in range(len(task.sentences))],
                    timestamp=s.timestamp,
                )
                for s in subs
            ]
            gold = majority_vote(records) if len(records) >= GOLD_MIN_ANNOTATORS else None
            abstract = corpus_mod.Abstract(id=task.task_id, title=task.title,
                                           sentences=task.sentences)
            docs.append(ClaimDocument(abstract=abstract, annotations=records,
                                      gold_labels=gold))
        return PlainTextResponse(serialize_claim_corpus(docs),
                                 media_type="application/x-ndjson")

    return app


def serve(app, host="127.0.0.1", port=8000):
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")
