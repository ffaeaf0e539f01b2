import { clearChildren, el, linearScale, svg, withTitle } from "../dom"
import { divergingColor, statusColor } from "../palette"
import type { ClustersPayload, ImportancePayload, MetaPayload } from "../types"

const BAND_W = 420
const ROW_H = 4
const CELL_W = 22
const CELL_H = 20

interface RleRun {
  start: number
  end: number // exclusive
  value: number
}

function runLengths(row: number[]): RleRun[] {
  const runs: RleRun[] = []
  let start = 0
  for (let day = 1; day <= row.length; day++) {
    if (day === row.length || row[day] !== row[start]) {
      runs.push({ start, end: day, value: row[start] as number })
      start = day
    }
  }
  return runs
}

/** Share of a cluster's patients whose final day is death or transplant. */
function deathFraction(matrix: number[][], deathIndex: number): number {
  if (matrix.length === 0) return 0
  const hits = matrix.filter(row => row[row.length - 1] === deathIndex).length
  return hits / matrix.length
}

/**
 * Per-cluster timeline bands (one row per patient) plus the
 * cluster-by-feature importance heatmap on a diverging scale.
 */
export class CohortView {
  root: HTMLElement
  onSelectPatient: (id: string) => void = () => {}
  onSelectCluster: (name: string) => void = () => {}
  sortByOutcome = false

  constructor(root: HTMLElement) {
    this.root = root
  }

  renderError(message: string): void {
    clearChildren(this.root)
    this.root.append(el("p", { class: "view-error" }, message))
  }

  render(
    clusters: ClustersPayload,
    importance: ImportancePayload[],
    meta: MetaPayload,
    selectedPatient: string | null,
    selectedCluster: string | null,
  ): void {
    clearChildren(this.root)
    const statusNames = meta.statuses.map(s => s.name)
    const deathIndex = statusNames.indexOf("DeathOrTransplant")

    const ordered = [...clusters.clusters]
    if (this.sortByOutcome) {
      ordered.sort((a, b) =>
        deathFraction(b.status_matrix, deathIndex) - deathFraction(a.status_matrix, deathIndex))
    } else {
      ordered.sort((a, b) => a.name.localeCompare(b.name))
    }

    const bands = el("div", { class: "cluster-bands" })
    const x = linearScale([0, meta.horizon_days], [0, BAND_W])
    for (const cluster of ordered) {
      const label = el("div", {
        class: "cluster-label" + (cluster.name === selectedCluster ? " selected" : ""),
        "data-cluster": cluster.name,
      }, `${cluster.name} (${cluster.size})`)
      label.addEventListener("click", () => this.onSelectCluster(cluster.name))
      bands.append(label)

      const height = cluster.status_matrix.length * ROW_H
      const band = svg("svg", {
        class: "cluster-band", width: BAND_W, height,
        viewBox: `0 0 ${BAND_W} ${height}`,
        "data-cluster": cluster.name,
      })
      cluster.status_matrix.forEach((row, i) => {
        const patientId = cluster.patients[i] as string
        const g = svg("g", {
          class: "patient-row" + (patientId === selectedPatient ? " selected" : ""),
          "data-patient": patientId,
        })
        for (const run of runLengths(row)) {
          g.append(svg("rect", {
            x: x(run.start),
            y: i * ROW_H,
            width: Math.max(0.5, x(run.end) - x(run.start)),
            height: ROW_H - 1,
            fill: statusColor(statusNames[run.value] ?? ""),
          }))
        }
        if (patientId === selectedPatient) {
          g.append(svg("rect", {
            class: "row-outline",
            x: 0, y: i * ROW_H - 0.5, width: BAND_W, height: ROW_H,
            fill: "none", stroke: "#000000", "stroke-width": 1.5,
          }))
        }
        withTitle(g, `${patientId} (${cluster.name})`)
        g.addEventListener("click", () => this.onSelectPatient(patientId))
        band.append(g)
      })
      bands.append(band)
    }
    this.root.append(bands)

    this.root.append(el("h4", {}, "Baseline importance by cluster"))
    this.root.append(this.heatmap(importance, selectedCluster))
  }

  private heatmap(importance: ImportancePayload[], selectedCluster: string | null): SVGElement {
    const rows = [...importance].sort((a, b) => a.cluster.name.localeCompare(b.cluster.name))
    const features = rows[0]?.features ?? []
    const left = 36
    const top = 72
    const width = left + features.length * CELL_W
    const height = top + rows.length * CELL_H
    const map = svg("svg", {
      class: "importance-heatmap", width, height, viewBox: `0 0 ${width} ${height}`,
    })
    features.forEach((feature, j) => {
      const label = svg("text", {
        x: left + j * CELL_W + CELL_W / 2, y: top - 6,
        "text-anchor": "start", "font-size": 9,
        transform: `rotate(-55 ${left + j * CELL_W + CELL_W / 2} ${top - 6})`,
      })
      label.textContent = feature
      map.append(label)
    })
    rows.forEach((payload, i) => {
      const y = top + i * CELL_H
      const rowLabel = svg("text", {
        x: left - 6, y: y + CELL_H / 2 + 3, "text-anchor": "end", "font-size": 11,
        "font-weight": payload.cluster.name === selectedCluster ? "bold" : "normal",
      })
      rowLabel.textContent = payload.cluster.name
      map.append(rowLabel)
      payload.scores.forEach((score, j) => {
        const cell = svg("rect", {
          class: "heatmap-cell",
          "data-cluster": payload.cluster.name,
          "data-feature": features[j] ?? "",
          x: left + j * CELL_W, y, width: CELL_W - 1, height: CELL_H - 1,
          fill: divergingColor(score),
        })
        withTitle(cell, `${payload.cluster.name} / ${features[j]}: ${score}`)
        map.append(cell)
      })
    })
    return map
  }
}
