import { clearChildren, el, linearScale, stepBandPath, stepPath, svg, withTitle } from "../dom"
import { groupColor } from "../palette"
import type { BoxEntry, ClusterStatsPayload, KmCurve, PatientPayload, SurvivalPayload } from "../types"

const KM_W = 460
const KM_H = 220
const KM_ML = 40
const KM_MB = 24
const BOX_W = 300
const BOX_ROW_H = 26
const BAR_MAX_W = 200

export interface SelectedPatientStats {
  payload: PatientPayload
  group: string
}

/** Value of a served step curve at time t (last point at or before t). */
export function curveValueAt(curve: KmCurve, t: number): number {
  let value = 1
  for (const p of curve.points) {
    if (p.time > t) break
    value = p.survival
  }
  return value
}

/**
 * Kaplan-Meier chart with confidence bands, box plots over baseline
 * features, and incidence bars, all from served numbers. The selected
 * patient appears as a grey marker on its group's curve and as a dot
 * in each box plot row.
 */
export class StatisticsView {
  root: HTMLElement

  constructor(root: HTMLElement) {
    this.root = root
  }

  render(
    survival: SurvivalPayload,
    clusterStats: ClusterStatsPayload | null,
    selected: SelectedPatientStats | null,
  ): void {
    clearChildren(this.root)
    this.root.append(el("h4", {}, `Survival by ${survival.groupby}`))
    this.root.append(this.kmChart(survival, selected))
    if (clusterStats) {
      this.root.append(el("h4", {},
        `Cluster ${clusterStats.cluster.name} baseline features`))
      this.root.append(this.boxes(clusterStats.boxes, selected))
      this.root.append(el("h4", {}, `Cluster ${clusterStats.cluster.name} incidence`))
      this.root.append(this.incidence(clusterStats))
    }
  }

  private kmChart(survival: SurvivalPayload, selected: SelectedPatientStats | null): SVGElement {
    const maxTime = Math.max(
      1,
      ...survival.curves.flatMap(c => c.points.map(p => p.time)),
      selected ? selected.payload.survival.time : 0,
    )
    const x = linearScale([0, maxTime], [KM_ML, KM_W - 8])
    const y = linearScale([0, 1], [KM_H - KM_MB, 8])
    const chart = svg("svg", {
      class: "km-chart", width: KM_W, height: KM_H, viewBox: `0 0 ${KM_W} ${KM_H}`,
    })

    chart.append(svg("line", {
      x1: KM_ML, y1: y(0), x2: KM_W - 8, y2: y(0), stroke: "#cccccc",
    }))
    chart.append(svg("line", {
      x1: KM_ML, y1: y(0), x2: KM_ML, y2: y(1), stroke: "#cccccc",
    }))
    for (const tick of [0, 0.5, 1]) {
      const label = svg("text", {
        x: KM_ML - 4, y: y(tick) + 3, "text-anchor": "end", "font-size": 9,
      })
      label.textContent = String(tick)
      chart.append(label)
    }

    survival.curves.forEach((curve, i) => {
      const color = groupColor(i)
      const extend = (pts: { x: number; y: number }[]) => {
        const last = pts[pts.length - 1]
        if (last && last.x < x(maxTime)) pts.push({ x: x(maxTime), y: last.y })
        return pts
      }
      const upper = extend(curve.points.map(p => ({ x: x(p.time), y: y(p.upper) })))
      const lower = extend(curve.points.map(p => ({ x: x(p.time), y: y(p.lower) })))
      const band = svg("path", {
        class: "km-band", "data-group": curve.group,
        d: stepBandPath(upper, lower), fill: color, "fill-opacity": 0.12, stroke: "none",
      })
      chart.append(band)
      const steps = extend(curve.points.map(p => ({ x: x(p.time), y: y(p.survival) })))
      const line = svg("path", {
        class: "km-curve", "data-group": curve.group,
        d: stepPath(steps), fill: "none", stroke: color, "stroke-width": 1.6,
      })
      withTitle(line, `${curve.group} (n=${curve.n})`)
      chart.append(line)
      const tag = svg("text", {
        x: KM_ML + 6, y: 16 + i * 12, "font-size": 10, fill: color,
      })
      tag.textContent = `${curve.group} (n=${curve.n})`
      chart.append(tag)
    })

    if (selected) {
      const curve = survival.curves.find(c => c.group === selected.group)
      if (curve) {
        const t = selected.payload.survival.time
        const marker = svg("circle", {
          class: "patient-marker km-marker",
          "data-patient": selected.payload.id,
          cx: x(t), cy: y(curveValueAt(curve, t)), r: 4,
          fill: "#888888", stroke: "#333333", "stroke-width": 1,
        })
        const kind = selected.payload.survival.event ? "event" : "censored"
        withTitle(marker, `${selected.payload.id}: ${kind} at day ${t}`)
        chart.append(marker)
      }
    }
    return chart
  }

  private boxes(entries: BoxEntry[], selected: SelectedPatientStats | null): SVGElement {
    const height = entries.length * BOX_ROW_H + 8
    const chart = svg("svg", {
      class: "box-plots", width: BOX_W + 170, height,
      viewBox: `0 0 ${BOX_W + 170} ${height}`,
    })
    entries.forEach((entry, i) => {
      const baseline = selected?.payload.baseline.find(b => b.name === entry.feature)
      const ownValue = typeof baseline?.value === "number" ? baseline.value : null
      const lo = Math.min(entry.whisker_low, ...entry.outliers,
        ownValue ?? entry.whisker_low)
      const hi = Math.max(entry.whisker_high, ...entry.outliers,
        ownValue ?? entry.whisker_high)
      const pad = (hi - lo || 1) * 0.05
      const x = linearScale([lo - pad, hi + pad], [120, 120 + BOX_W])
      const mid = i * BOX_ROW_H + BOX_ROW_H / 2

      const label = svg("text", {
        x: 114, y: mid + 3, "text-anchor": "end", "font-size": 10,
      })
      label.textContent = entry.feature
      chart.append(label)

      const row = svg("g", { class: "box-row", "data-feature": entry.feature })
      row.append(svg("line", {
        x1: x(entry.whisker_low), y1: mid, x2: x(entry.q1), y2: mid, stroke: "#555555",
      }))
      row.append(svg("line", {
        x1: x(entry.q3), y1: mid, x2: x(entry.whisker_high), y2: mid, stroke: "#555555",
      }))
      const box = svg("rect", {
        class: "box-iqr",
        x: x(entry.q1), y: mid - 7, width: Math.max(1, x(entry.q3) - x(entry.q1)),
        height: 14, fill: "#9ecae9", stroke: "#555555",
      })
      withTitle(box,
        `${entry.feature}: q1 ${entry.q1}, median ${entry.median}, q3 ${entry.q3} (n=${entry.n})`)
      row.append(box)
      row.append(svg("line", {
        x1: x(entry.median), y1: mid - 7, x2: x(entry.median), y2: mid + 7,
        stroke: "#333333", "stroke-width": 1.5,
      }))
      for (const value of entry.outliers) {
        row.append(svg("circle", {
          class: "outlier", cx: x(value), cy: mid, r: 2.5,
          fill: "none", stroke: "#555555",
        }))
      }
      if (ownValue !== null) {
        const outside = ownValue < entry.whisker_low || ownValue > entry.whisker_high
        const marker = svg("circle", {
          class: "patient-marker box-marker" + (outside ? " highlighted" : ""),
          "data-patient": selected!.payload.id,
          cx: x(ownValue), cy: mid, r: outside ? 4.5 : 3.5,
          fill: "#888888", stroke: outside ? "#d55e00" : "#333333",
          "stroke-width": outside ? 2 : 1,
        })
        withTitle(marker, `${selected!.payload.id}: ${ownValue}`)
        row.append(marker)
      }
      chart.append(row)
    })
    return chart
  }

  private incidence(stats: ClusterStatsPayload): HTMLElement {
    const wrap = el("div", { class: "incidence" })
    const scale = linearScale([0, 100], [0, BAR_MAX_W])
    const rows: [string, number, number | null][] = [
      ["aki", stats.incidence.adverse.aki.percent, stats.incidence.adverse.aki.mean_days],
      ["infection", stats.incidence.adverse.infection.percent,
        stats.incidence.adverse.infection.mean_days],
      ["oae", stats.incidence.adverse.oae.percent, stats.incidence.adverse.oae.mean_days],
      ["death or drop-off", stats.incidence.death_or_dropoff.percent,
        stats.incidence.death_or_dropoff.mean_day],
    ]
    for (const [kind, percent, meanDays] of rows) {
      const row = el("div", { class: "incidence-row" })
      row.append(el("span", { class: "incidence-label" }, kind))
      const track = el("span", { class: "incidence-track" })
      const bar = el("span", { class: "incidence-bar", "data-kind": kind })
      bar.style.width = `${scale(percent)}px`
      track.append(bar)
      row.append(track)
      const days = meanDays === null ? "" :
        kind === "death or drop-off" ? `, mean day ${meanDays}` : `, mean ${meanDays} days`
      row.append(el("span", { class: "incidence-value" }, `${percent}%${days}`))
      wrap.append(row)
    }
    return wrap
  }
}
