import type {
  ClustersPayload, ClusterStatsPayload, ImportancePayload, MetaPayload,
  PatientPayload, PatientsPayload, ProgressionPayload, SurvivalPayload,
} from "../src/types"
import metaJson from "./fixtures/meta.json"
import patientsJson from "./fixtures/patients.json"
import patientDetailJson from "./fixtures/patient_detail.json"
import clustersWardJson from "./fixtures/clusters_ward.json"
import clustersGraphJson from "./fixtures/clusters_graph.json"
import importanceJson from "./fixtures/importance_A.json"
import progressionJson from "./fixtures/progression_A.json"
import progressionDelta1Json from "./fixtures/progression_A_delta1.json"
import statsJson from "./fixtures/stats_A.json"
import survivalArmJson from "./fixtures/survival_arm.json"
import survivalClusterJson from "./fixtures/survival_cluster.json"

export const fixtures = {
  meta: metaJson as unknown as MetaPayload,
  patients: patientsJson as unknown as PatientsPayload,
  patientDetail: patientDetailJson as unknown as PatientPayload,
  clustersWard: clustersWardJson as unknown as ClustersPayload,
  clustersGraph: clustersGraphJson as unknown as ClustersPayload,
  importance: importanceJson as unknown as ImportancePayload,
  progression: progressionJson as unknown as ProgressionPayload,
  progressionDelta1: progressionDelta1Json as unknown as ProgressionPayload,
  stats: statsJson as unknown as ClusterStatsPayload,
  survivalArm: survivalArmJson as unknown as SurvivalPayload,
  survivalCluster: survivalClusterJson as unknown as SurvivalPayload,
}

export function clone<T>(value: T): T {
  return structuredClone(value)
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  })
}

export function errorResponse(status: number, code: string, message: string): Response {
  return jsonResponse({ error: { code, message } }, status)
}

/**
 * Fetch stand-in that answers every engine route from the captured
 * fixtures and records each URL it was asked for.
 */
export function makeEngineFetch(log: string[]) {
  return async (url: string): Promise<Response> => {
    log.push(url)
    const parsed = new URL(url, "http://engine.test")
    const path = parsed.pathname
    const params = parsed.searchParams

    if (path === "/api/meta") return jsonResponse(fixtures.meta)
    if (path === "/api/patients") return jsonResponse(fixtures.patients)

    let match = path.match(/^\/api\/patients\/([^/]+)$/)
    if (match) {
      const id = match[1] as string
      const entry = fixtures.patients.patients.find(p => p.id === id)
      if (!entry) {
        return errorResponse(404, "PATIENT_NOT_FOUND", `no patient with id '${id}'`)
      }
      if (id === fixtures.patientDetail.id) return jsonResponse(fixtures.patientDetail)
      const payload = clone(fixtures.patientDetail)
      payload.id = entry.id
      payload.arm = entry.arm
      return jsonResponse(payload)
    }

    if (path === "/api/clusters") {
      return jsonResponse(
        params.get("method") === "graph" ? fixtures.clustersGraph : fixtures.clustersWard)
    }

    match = path.match(/^\/api\/clusters\/([^/]+)\/importance$/)
    if (match) {
      const payload = clone(fixtures.importance)
      payload.cluster = { ...payload.cluster, name: match[1] as string }
      return jsonResponse(payload)
    }

    match = path.match(/^\/api\/clusters\/([^/]+)\/progression$/)
    if (match) {
      const base = params.get("delta") === "1"
        ? fixtures.progressionDelta1 : fixtures.progression
      const payload = clone(base)
      payload.cluster = { ...payload.cluster, name: match[1] as string }
      payload.delta = Number(params.get("delta") ?? payload.delta)
      payload.sigma = Number(params.get("sigma") ?? payload.sigma)
      return jsonResponse(payload)
    }

    match = path.match(/^\/api\/clusters\/([^/]+)\/stats$/)
    if (match) {
      const payload = clone(fixtures.stats)
      payload.cluster = { ...payload.cluster, name: match[1] as string }
      return jsonResponse(payload)
    }

    if (path === "/api/survival") {
      return jsonResponse(
        params.get("groupby") === "arm" ? fixtures.survivalArm : fixtures.survivalCluster)
    }

    return errorResponse(404, "NOT_FOUND", `no route for ${path}`)
  }
}

export function flush(): Promise<void> {
  return new Promise(resolve => setTimeout(resolve, 0))
}
