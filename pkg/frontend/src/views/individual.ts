import { clearChildren, el, linearScale, svg, withTitle } from "../dom"
import { statusColor } from "../palette"
import type { PatientPayload } from "../types"

const TIMELINE_W = 720
const TIMELINE_H = 46
const BAND_Y = 4
const BAND_H = 22
const EVENT_Y = 32

function fmtValue(value: number | string): string {
  return typeof value === "number" ? String(Math.round(value * 100) / 100) : value
}

/**
 * One patient: day-by-day status timeline, raw event spans beneath it,
 * and the baseline table with red markers on out-of-range labs.
 */
export class IndividualView {
  root: HTMLElement

  constructor(root: HTMLElement) {
    this.root = root
  }

  renderEmpty(): void {
    clearChildren(this.root)
    this.root.append(el("p", { class: "hint" }, "Select a patient in the cohort view."))
  }

  renderNotFound(patientId: string): void {
    clearChildren(this.root)
    const panel = el("div", { class: "not-found" })
    panel.append(
      el("h3", {}, "Patient not found"),
      el("p", {}, `No patient with id "${patientId}" in this cohort.`),
    )
    this.root.append(panel)
  }

  render(payload: PatientPayload, horizonDays: number): void {
    clearChildren(this.root)
    const survival = payload.survival.event
      ? `event day ${payload.survival.time}`
      : `censored day ${payload.survival.time}`
    this.root.append(el("h3", {}, `${payload.id} (${payload.arm} arm, ${survival})`))

    const x = linearScale([0, horizonDays], [0, TIMELINE_W])
    const chart = svg("svg", {
      class: "timeline", width: TIMELINE_W, height: TIMELINE_H,
      viewBox: `0 0 ${TIMELINE_W} ${TIMELINE_H}`,
    })
    for (const seg of payload.timeline.segments) {
      const rect = svg("rect", {
        class: "timeline-segment",
        "data-status": seg.status,
        x: x(seg.start),
        y: BAND_Y,
        width: Math.max(1, x(seg.end + 1) - x(seg.start)),
        height: BAND_H,
        fill: statusColor(seg.status),
      })
      withTitle(rect, `${seg.status}: days ${seg.start}-${seg.end}`)
      chart.append(rect)
    }
    for (const ev of payload.raw_events) {
      const tick = svg("rect", {
        class: "raw-event",
        x: x(ev.start_day),
        y: EVENT_Y,
        width: Math.max(1, x(ev.end_day + 1) - x(ev.start_day)),
        height: 6,
        fill: "#555555",
      })
      withTitle(tick, `${ev.kind}: days ${ev.start_day}-${ev.end_day}`)
      chart.append(tick)
    }
    this.root.append(chart)

    const table = el("table", { class: "baseline" })
    const head = el("tr")
    head.append(el("th", {}, "feature"), el("th", {}, "value"), el("th", {}, ""))
    table.append(head)
    for (const entry of payload.baseline) {
      const row = el("tr")
      const units = entry.units ? ` ${entry.units}` : ""
      row.append(
        el("td", {}, entry.name),
        el("td", {}, fmtValue(entry.value) + units),
      )
      const flagCell = el("td")
      if (entry.abnormal === true) {
        const range = entry.reference_range
        const hint = range ? `outside ${range[0]}-${range[1]}${units}` : "out of range"
        const dot = el("span", { class: "abnormal-flag", title: hint })
        flagCell.append(dot)
      }
      row.append(flagCell)
      table.append(row)
    }
    this.root.append(table)
  }
}
