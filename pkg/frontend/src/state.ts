import type { GroupBy, Method } from "./types"

// Everything the four views depend on, serializable to the URL query so
// a session can be shared by copying the address bar.
export interface ViewState {
  patient: string | null
  method: Method
  k: number
  delta: number
  sigma: number
  groupby: GroupBy
  cluster: string | null
}

export const DEFAULT_STATE: ViewState = {
  patient: null,
  method: "ward",
  k: 4,
  delta: 0.5,
  sigma: 0.1,
  groupby: "cluster",
  cluster: null,
}

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x))

function num(raw: string | null, fallback: number): number {
  if (raw === null) return fallback
  const x = Number(raw)
  return Number.isFinite(x) ? x : fallback
}

/** Query string for `state`, omitting anything still at its default. */
export function serializeState(state: ViewState): string {
  const params = new URLSearchParams()
  if (state.patient) params.set("patient", state.patient)
  if (state.method !== DEFAULT_STATE.method) params.set("method", state.method)
  if (state.k !== DEFAULT_STATE.k) params.set("k", String(state.k))
  if (state.delta !== DEFAULT_STATE.delta) params.set("delta", String(state.delta))
  if (state.sigma !== DEFAULT_STATE.sigma) params.set("sigma", String(state.sigma))
  if (state.groupby !== DEFAULT_STATE.groupby) params.set("groupby", state.groupby)
  if (state.cluster) params.set("cluster", state.cluster)
  return params.toString()
}

/** Inverse of serializeState; junk values fall back to defaults. */
export function parseState(query: string): ViewState {
  const params = new URLSearchParams(query)
  const method = params.get("method")
  const groupby = params.get("groupby")
  return {
    patient: params.get("patient"),
    method: method === "graph" ? "graph" : "ward",
    k: clamp(Math.round(num(params.get("k"), DEFAULT_STATE.k)), 1, 99),
    delta: clamp(num(params.get("delta"), DEFAULT_STATE.delta), 0, 1),
    sigma: clamp(num(params.get("sigma"), DEFAULT_STATE.sigma), 0, 1),
    groupby: groupby === "arm" ? "arm" : "cluster",
    cluster: params.get("cluster"),
  }
}

export type StateKey = keyof ViewState

/** Keys whose values differ between two states. */
export function changedKeys(a: ViewState, b: ViewState): StateKey[] {
  const keys: StateKey[] = ["patient", "method", "k", "delta", "sigma", "groupby", "cluster"]
  return keys.filter(key => a[key] !== b[key])
}
