// Typed client for the claimtagger HTTP service.

export interface SentencePrediction {
  index: number;
  text: string;
  claim_prob: number | null;
  claim: boolean | null;
  discourse_dist: Record<string, number> | null;
}

export interface PredictResponse {
  v: number;
  title: string;
  sentences: SentencePrediction[];
}

export interface Task {
  v: number;
  task_id: string;
  title: string;
  sentences: string[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // keep the generic message for non-JSON error bodies
  }
  throw new ApiError(response.status, message);
}

export class Client {
  constructor(private baseUrl: string = "") {}

  async predict(title: string, abstractText: string): Promise<PredictResponse> {
    const response = await fetch(`${this.baseUrl}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ title, abstract_text: abstractText }),
    });
    await raiseForStatus(response);
    return (await response.json()) as PredictResponse;
  }

  /** Next unannotated task for this annotator, or null when none remain. */
  async nextTask(annotator: string): Promise<Task | null> {
    const params = new URLSearchParams({ annotator });
    const response = await fetch(`${this.baseUrl}/tasks/next?${params}`);
    if (response.status === 204) return null;
    await raiseForStatus(response);
    return (await response.json()) as Task;
  }

  async submitAnnotation(taskId: string, annotator: string, indices: number[]): Promise<void> {
    const response = await fetch(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ task_id: taskId, annotator, indices }),
    });
    await raiseForStatus(response);
  }
}
