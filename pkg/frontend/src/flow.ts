// Annotation-session controller: state transitions around the HTTP client,
// kept free of DOM access so the whole flow is testable headlessly.

import { ApiError, Client, Task } from "./api.js";
import { initSelection, selectedIndices, toggle } from "./state.js";

export interface AnnotateState {
  task: Task | null;
  selected: boolean[];
  submissions: number;
  done: boolean;
  /** Retry banner text after a network failure; toggles are preserved. */
  error: string | null;
  /** Transient message after a rejected submission; toggles are preserved. */
  toast: string | null;
}

export class AnnotateFlow {
  state: AnnotateState = {
    task: null,
    selected: [],
    submissions: 0,
    done: false,
    error: null,
    toast: null,
  };

  constructor(private client: Client, private annotator: string) {}

  async loadNext(): Promise<void> {
    this.state.error = null;
    this.state.toast = null;
    try {
      const task = await this.client.nextTask(this.annotator);
      if (task === null) {
        this.state.task = null;
        this.state.done = true;
        this.state.selected = [];
      } else {
        this.state.task = task;
        this.state.selected = initSelection(task.sentences.length);
      }
    } catch (err) {
      this.state.error = describeError(err);
    }
  }

  toggleSentence(index: number): void {
    this.state.selected = toggle(this.state.selected, index);
  }

  /** Submit exactly the toggled indices; on success advance to the next task. */
  async submit(): Promise<void> {
    if (!this.state.task) return;
    const indices = selectedIndices(this.state.selected);
    try {
      await this.client.submitAnnotation(this.state.task.task_id, this.annotator, indices);
      this.state.submissions += 1;
      await this.loadNext();
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.toast = `submission rejected (${err.status}): ${err.message}`;
      } else {
        this.state.error = describeError(err);
      }
    }
  }

  /** After a network failure, retry whatever was pending. */
  async retry(): Promise<void> {
    if (this.state.task === null && !this.state.done) {
      await this.loadNext();
    } else {
      await this.submit();
    }
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}
