// Payload shapes, field for field as the engine serves them.
// All numbers displayed in the UI come from these; nothing is recomputed.

export type Method = "ward" | "graph"
export type GroupBy = "cluster" | "arm"

export interface StatusInfo {
  name: string
  rank: number
  severity_code: number
}

export interface FeatureInfo {
  name: string
  kind: "numeric" | "categorical"
  units: string
  categories: string[] | null
  reference_range: [number, number] | null
}

export interface MetaPayload {
  n_patients: number
  horizon_days: number
  arms: string[]
  methods: Method[]
  statuses: StatusInfo[]
  features: FeatureInfo[]
  defaults: { k: number; delta: number; sigma: number; knn_k: number; seed: number }
  imputed: string[]
}

export interface RosterEntry {
  id: string
  arm: string
}

export interface PatientsPayload {
  patients: RosterEntry[]
}

export interface BaselineEntry {
  name: string
  kind: "numeric" | "categorical"
  value: number | string
  units: string
  abnormal: boolean | null
  reference_range: [number, number] | null
}

export interface TimelineSegment {
  status: string
  start: number
  end: number
}

export interface RawEvent {
  kind: string
  start_day: number
  end_day: number
}

export interface PatientPayload {
  id: string
  arm: string
  baseline: BaselineEntry[]
  timeline: { days: string[]; segments: TimelineSegment[] }
  raw_events: RawEvent[]
  survival: { time: number; event: boolean }
}

export interface ClusterEntry {
  index: number
  name: string
  size: number
  patients: string[]
  // rows follow `patients` order, columns are days, values are status
  // indexes into MetaPayload.statuses (rank order)
  status_matrix: number[][]
}

export interface ClustersPayload {
  method: Method
  k: number
  cluster_names: string[]
  labels: Record<string, number>
  clusters: ClusterEntry[]
}

export interface ImportancePayload {
  method: Method
  k: number
  cluster: { index: number; name: string }
  features: string[]
  scores: number[]
  members: { id: string; scores: number[] }[]
}

export interface ProgressionBlock {
  id: number
  status: string
  first_day: number
  last_day: number
  num: number
}

export interface ProgressionTransition {
  source: number
  target: number
  flow: number
  strength: number
}

export interface ProgressionPayload {
  method: Method
  k: number
  cluster: { index: number; name: string }
  delta: number
  sigma: number
  blocks: ProgressionBlock[]
  transitions: ProgressionTransition[]
}

export interface KmPoint {
  time: number
  survival: number
  lower: number
  upper: number
  at_risk: number
  events: number
}

export interface KmCurve {
  group: string
  n: number
  points: KmPoint[]
}

export interface BoxEntry {
  feature: string
  group: string
  n: number
  median: number
  q1: number
  q3: number
  whisker_low: number
  whisker_high: number
  outliers: number[]
}

export interface IncidenceEntry {
  mean_days: number | null
  median_days: number | null
  percent: number
}

export interface ClusterStatsPayload {
  method: Method
  k: number
  cluster: { index: number; name: string }
  survival: KmCurve
  boxes: BoxEntry[]
  incidence: {
    group: string
    n: number
    adverse: { aki: IncidenceEntry; infection: IncidenceEntry; oae: IncidenceEntry }
    death_or_dropoff: { mean_day: number | null; median_day: number | null; percent: number }
  }
}

export interface SurvivalPayload {
  groupby: GroupBy
  curves: KmCurve[]
}

export interface ApiErrorBody {
  error: { code: string; message: string }
}
