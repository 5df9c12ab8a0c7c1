// Pure selection-state helpers for the annotation page.

export function initSelection(sentenceCount: number): boolean[] {
  return new Array(sentenceCount).fill(false);
}

/** Flip one sentence; toggling twice restores the original array. */
export function toggle(selected: readonly boolean[], index: number): boolean[] {
  if (index < 0 || index >= selected.length) {
    throw new RangeError(`sentence index ${index} out of range`);
  }
  const next = [...selected];
  next[index] = !next[index];
  return next;
}

/** The indices actually submitted: exactly the toggled-on sentences, in order. */
export function selectedIndices(selected: readonly boolean[]): number[] {
  const indices: number[] = [];
  selected.forEach((on, i) => {
    if (on) indices.push(i);
  });
  return indices;
}
