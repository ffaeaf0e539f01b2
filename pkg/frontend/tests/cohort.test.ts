// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest"
import { divergingColor } from "../src/palette"
import { CohortView } from "../src/views/cohort"
import type { ClusterEntry, ImportancePayload } from "../src/types"
import { clone, fixtures } from "./helpers"

let view: CohortView
let root: HTMLElement

function importanceRows(): ImportancePayload[] {
  return [...fixtures.clustersWard.cluster_names].sort().map(name => {
    const payload = clone(fixtures.importance)
    payload.cluster = { ...payload.cluster, name }
    return payload
  })
}

beforeEach(() => {
  root = document.createElement("div")
  view = new CohortView(root)
})

describe("cohort view", () => {
  it("draws one band per cluster and one row per patient", () => {
    view.render(fixtures.clustersWard, importanceRows(), fixtures.meta, null, "A")
    const bands = root.querySelectorAll(".cluster-band")
    expect(bands).toHaveLength(fixtures.clustersWard.k)
    const rows = root.querySelectorAll(".patient-row")
    const total = fixtures.clustersWard.clusters.reduce((acc, c) => acc + c.size, 0)
    expect(rows).toHaveLength(total)
    expect(total).toBe(fixtures.meta.n_patients)
  })

  it("outlines exactly the selected patient's row", () => {
    const target = fixtures.clustersWard.clusters[0]!.patients[0]!
    view.render(fixtures.clustersWard, importanceRows(), fixtures.meta, target, "A")
    const selected = root.querySelectorAll(".patient-row.selected")
    expect(selected).toHaveLength(1)
    expect(selected[0]!.getAttribute("data-patient")).toBe(target)
    expect(selected[0]!.querySelector(".row-outline")).not.toBeNull()
  })

  it("renders a heatmap cell for every cluster-feature pair", () => {
    const rows = importanceRows()
    view.render(fixtures.clustersWard, rows, fixtures.meta, null, "A")
    const cells = root.querySelectorAll(".heatmap-cell")
    expect(cells).toHaveLength(rows.length * rows[0]!.features.length)
  })

  it("maps the diverging scale ends to the two extreme colors", () => {
    expect(divergingColor(-1)).toBe("#0072b2")
    expect(divergingColor(1)).toBe("#d55e00")
    expect(divergingColor(0)).toBe("#ffffff")
    // clamped outside the documented domain
    expect(divergingColor(-5)).toBe(divergingColor(-1))
    expect(divergingColor(5)).toBe(divergingColor(1))
  })

  it("sorts bands by terminal outcome when asked", () => {
    const statusNames = fixtures.meta.statuses.map(s => s.name)
    const death = statusNames.indexOf("DeathOrTransplant")
    const quiet = statusNames.indexOf("NoEvent")
    const mk = (name: string, lastDay: number): ClusterEntry => ({
      index: 0, name, size: 2, patients: [`${name}1`, `${name}2`],
      status_matrix: [
        Array(10).fill(quiet).map((v, i) => (i === 9 ? lastDay : v)),
        Array(10).fill(quiet),
      ],
    })
    const clusters = {
      ...clone(fixtures.clustersWard),
      k: 2,
      cluster_names: ["Calm", "Grim"],
      clusters: [mk("Calm", quiet), mk("Grim", death)],
    }
    const importance = importanceRows().slice(0, 2)

    view.sortByOutcome = false
    view.render(clusters, importance, fixtures.meta, null, null)
    let order = [...root.querySelectorAll(".cluster-band")]
      .map(b => b.getAttribute("data-cluster"))
    expect(order).toEqual(["Calm", "Grim"])

    view.sortByOutcome = true
    view.render(clusters, importance, fixtures.meta, null, null)
    order = [...root.querySelectorAll(".cluster-band")]
      .map(b => b.getAttribute("data-cluster"))
    expect(order).toEqual(["Grim", "Calm"])
  })

  it("shows an error panel when clustering is unavailable", () => {
    view.renderError("graph clustering needs a trained checkpoint")
    expect(root.querySelector(".view-error")!.textContent)
      .toContain("checkpoint")
  })
})
