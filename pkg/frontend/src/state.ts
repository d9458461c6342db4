// Local view state. Pending feedback is staged here until the analyst
// hits "update model"; nothing analytical is ever computed client-side.

export type Pair = [string, string];

export interface ViewState {
  sessionId: string | null;
  selectedEdge: Pair | null;
  selectedPath: string[];
  strengthMin: number;
  coverageMin: number;
  window: number | null;
  pendingConfirmed: Pair[];
  pendingRemoved: Pair[];
  highlighted: string[];
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    selectedEdge: null,
    selectedPath: [],
    strengthMin: 0,
    coverageMin: 0,
    window: null,
    pendingConfirmed: [],
    pendingRemoved: [],
    highlighted: [],
  };
}

const samePair = (a: Pair, b: Pair) => a[0] === b[0] && a[1] === b[1];
const hasPair = (list: Pair[], p: Pair) => list.some((q) => samePair(q, p));

/** Stage a confirmation; refused (returns false) when the pair is
 * already staged for removal — contradictory feedback never leaves the
 * client. */
export function stageConfirm(state: ViewState, pair: Pair): boolean {
  if (hasPair(state.pendingRemoved, pair)) return false;
  if (!hasPair(state.pendingConfirmed, pair)) state.pendingConfirmed.push(pair);
  return true;
}

export function stageRemove(state: ViewState, pair: Pair): boolean {
  if (hasPair(state.pendingConfirmed, pair)) return false;
  if (!hasPair(state.pendingRemoved, pair)) state.pendingRemoved.push(pair);
  return true;
}

export function unstage(state: ViewState, pair: Pair): void {
  state.pendingConfirmed = state.pendingConfirmed.filter((q) => !samePair(q, pair));
  state.pendingRemoved = state.pendingRemoved.filter((q) => !samePair(q, pair));
}

export function clearPending(state: ViewState): void {
  state.pendingConfirmed = [];
  state.pendingRemoved = [];
}

export function hasPending(state: ViewState): boolean {
  return state.pendingConfirmed.length > 0 || state.pendingRemoved.length > 0;
}
