// DOM wiring: two routes (annotate, predict) plus the instructions page.
// All rendering and flow logic lives in render.ts / flow.ts.

import { ApiError, Client } from "./api.js";
import { AnnotateFlow } from "./flow.js";
import {
  renderCompletion,
  renderError,
  renderInstructions,
  renderPrediction,
  renderTask,
} from "./render.js";

const client = new Client("");
const main = () => document.getElementById("main")!;

function annotatorToken(): string {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get("annotator");
  if (fromUrl) {
    localStorage.setItem("annotator", fromUrl);
    return fromUrl;
  }
  let token = localStorage.getItem("annotator");
  if (!token) {
    token = window.prompt("Enter your annotator token:") || "anonymous";
    localStorage.setItem("annotator", token);
  }
  return token;
}

function renderAnnotatePage(flow: AnnotateFlow): void {
  const s = flow.state;
  let body = "";
  if (s.error) {
    body += renderError(null, s.error) +
      `<button id="retry" class="primary">Retry</button>`;
  }
  if (s.toast) {
    body += `<div class="toast" role="status">${s.toast}</div>`;
  }
  if (s.done) {
    body += renderCompletion(s.submissions);
  } else if (s.task) {
    body += renderTask(s.task, s.selected);
    body += `<button id="submit" class="primary">Submit selections</button>`;
  }
  main().innerHTML = body || "<p>Loading task&hellip;</p>";

  main().querySelectorAll<HTMLElement>(".selectable").forEach((el) => {
    el.addEventListener("click", () => {
      flow.toggleSentence(Number(el.dataset.index));
      renderAnnotatePage(flow);
    });
  });
  main().querySelector("#submit")?.addEventListener("click", async () => {
    await flow.submit();
    renderAnnotatePage(flow);
  });
  main().querySelector("#retry")?.addEventListener("click", async () => {
    await flow.retry();
    renderAnnotatePage(flow);
  });
}

async function startAnnotate(): Promise<void> {
  const flow = new AnnotateFlow(client, annotatorToken());
  main().innerHTML = "<p>Loading task&hellip;</p>";
  await flow.loadNext();
  renderAnnotatePage(flow);
}

function startPredict(): void {
  main().innerHTML = `
    <section class="predict-form">
      <h2>Discourse and claim prediction</h2>
      <label>Title <input id="title" type="text" placeholder="optional title"></label>
      <label>Abstract <textarea id="abstract" rows="10"
        placeholder="Paste the abstract text"></textarea></label>
      <button id="go" class="primary">Predict</button>
      <div id="result"></div>
    </section>`;
  const result = () => document.getElementById("result")!;
  document.getElementById("go")!.addEventListener("click", async () => {
    const title = (document.getElementById("title") as HTMLInputElement).value;
    const abstract = (document.getElementById("abstract") as HTMLTextAreaElement).value;
    if (!abstract.trim()) {
      result().innerHTML = renderError(null, "enter an abstract first");
      return;
    }
    result().innerHTML = "<p>Predicting&hellip;</p>";
    try {
      const response = await client.predict(title, abstract);
      result().innerHTML = renderPrediction(response.title, response.sentences);
    } catch (err) {
      if (err instanceof ApiError) {
        result().innerHTML = renderError(err.status, err.message);
      } else {
        result().innerHTML = renderError(null, String(err));
      }
    }
  });
}

function route(): void {
  const hash = window.location.hash || "#/";
  if (hash.startsWith("#/annotate")) {
    void startAnnotate();
  } else if (hash.startsWith("#/predict")) {
    startPredict();
  } else {
    main().innerHTML = renderInstructions();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
