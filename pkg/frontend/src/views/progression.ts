import { clearChildren, el, linearScale, svg, withTitle } from "../dom"
import { STATUS_RANK_ORDER, statusColor } from "../palette"
import type { ProgressionBlock, ProgressionPayload } from "../types"

const CHART_W = 720
const LANE_H = 30
const BLOCK_H = 18
const MAX_RIBBON = 14
const MIN_RIBBON = 1

interface Anchor {
  x0: number
  x1: number
  y: number
}

/**
 * Blocks laid out on the day axis, one lane per status in priority
 * order, with ribbons whose width scales with patient flow.
 */
export class ProgressionView {
  root: HTMLElement

  constructor(root: HTMLElement) {
    this.root = root
  }

  renderEmpty(clusterName: string): void {
    clearChildren(this.root)
    this.root.append(el("p", { class: "placeholder" },
      `Cluster ${clusterName} has no occupied days to display.`))
  }

  render(payload: ProgressionPayload): void {
    clearChildren(this.root)
    if (payload.blocks.length === 0) {
      this.renderEmpty(payload.cluster.name)
      return
    }
    this.root.append(el("h4", {}, `Cluster ${payload.cluster.name} progression ` +
      `(delta ${payload.delta}, sigma ${payload.sigma})`))

    const lanes = STATUS_RANK_ORDER.filter(
      status => payload.blocks.some(b => b.status === status))
    const laneOf = new Map(lanes.map((status, i) => [status, i]))
    const lastDay = Math.max(...payload.blocks.map(b => b.last_day))
    const x = linearScale([0, lastDay + 1], [70, CHART_W - 10])
    const height = lanes.length * LANE_H + 20

    const chart = svg("svg", {
      class: "progression", width: CHART_W, height,
      viewBox: `0 0 ${CHART_W} ${height}`,
    })

    lanes.forEach((status, i) => {
      const label = svg("text", {
        x: 64, y: i * LANE_H + LANE_H / 2 + 4,
        "text-anchor": "end", "font-size": 10,
      })
      label.textContent = status
      chart.append(label)
    })

    const anchors = new Map<number, Anchor>()
    for (const block of payload.blocks) {
      const lane = laneOf.get(block.status) ?? 0
      const x0 = x(block.first_day)
      const x1 = x(block.last_day + 1)
      const y = lane * LANE_H + (LANE_H - BLOCK_H) / 2
      anchors.set(block.id, { x0, x1, y: y + BLOCK_H / 2 })
      const rect = svg("rect", {
        class: "progression-block",
        "data-block": block.id,
        "data-status": block.status,
        x: x0, y, width: Math.max(1.5, x1 - x0), height: BLOCK_H,
        fill: statusColor(block.status),
        stroke: "#ffffff", "stroke-width": 0.5,
      })
      withTitle(rect, blockTitle(block))
      chart.append(rect)
    }

    const maxFlow = Math.max(1, ...payload.transitions.map(t => t.flow))
    for (const transition of payload.transitions) {
      const from = anchors.get(transition.source)
      const to = anchors.get(transition.target)
      if (!from || !to) continue
      const width = MIN_RIBBON + (transition.flow / maxFlow) * (MAX_RIBBON - MIN_RIBBON)
      const midX = (from.x1 + to.x0) / 2
      const ribbon = svg("path", {
        class: "transition-ribbon",
        "data-flow": transition.flow,
        d: `M${from.x1},${from.y} C${midX},${from.y} ${midX},${to.y} ${to.x0},${to.y}`,
        fill: "none",
        stroke: "#666666",
        "stroke-opacity": 0.55,
        "stroke-width": width,
      })
      withTitle(ribbon,
        `${transition.flow} patient${transition.flow === 1 ? "" : "s"}, ` +
        `strength ${transition.strength}`)
      chart.append(ribbon)
    }

    this.root.append(chart)
  }
}

function blockTitle(block: ProgressionBlock): string {
  const span = block.first_day === block.last_day
    ? `day ${block.first_day}`
    : `days ${block.first_day}-${block.last_day}`
  return `${block.status}, ${span}, ${block.num} patient${block.num === 1 ? "" : "s"}`
}
