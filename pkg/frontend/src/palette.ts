// One fixed, colorblind-safe palette (Okabe-Ito) shared by every view.
// Keyed by status name; ordering below matches the engine's priority ranks.

export const STATUS_COLORS: Record<string, string> = {
  DeathOrTransplant: "#000000",
  OffStudy: "#999999",
  AkiPlusInfection: "#d55e00",
  Aki: "#e69f00",
  Infection: "#cc79a7",
  Oae: "#f0e442",
  TreatmentPlusOae: "#56b4e9",
  Treatment: "#0072b2",
  NoEvent: "#009e73",
}

export const STATUS_RANK_ORDER = Object.keys(STATUS_COLORS)

export function statusColor(status: string): string {
  return STATUS_COLORS[status] ?? "#dddddd"
}

// Group colors for KM curves and cluster chips; distinct from each other,
// readable on white, reused cyclically past eight groups.
const GROUP_COLORS = [
  "#0072b2", "#d55e00", "#009e73", "#cc79a7",
  "#e69f00", "#56b4e9", "#f0e442", "#999999",
]

export function groupColor(index: number): string {
  return GROUP_COLORS[index % GROUP_COLORS.length] as string
}

const hex = (x: number) => Math.round(x).toString(16).padStart(2, "0")

function mix(from: [number, number, number], to: [number, number, number], t: number): string {
  const c = from.map((f, i) => f + ((to[i] as number) - f) * t)
  return "#" + hex(c[0] as number) + hex(c[1] as number) + hex(c[2] as number)
}

const NEG: [number, number, number] = [0, 114, 178] // blue
const MID: [number, number, number] = [255, 255, 255]
const POS: [number, number, number] = [213, 94, 0] // vermillion

/** Diverging blue-white-vermillion scale over [-1, 1] for importance cells. */
export function divergingColor(value: number): string {
  const v = Math.min(1, Math.max(-1, value))
  return v < 0 ? mix(MID, NEG, -v) : mix(MID, POS, v)
}

/** The single legend element; every view shares this one. */
export function renderLegend(target: HTMLElement): void {
  target.replaceChildren()
  target.classList.add("legend")
  for (const status of STATUS_RANK_ORDER) {
    const item = document.createElement("span")
    item.className = "legend-item"
    const swatch = document.createElement("span")
    swatch.className = "legend-swatch"
    swatch.style.background = statusColor(status)
    const label = document.createElement("span")
    label.textContent = status
    item.append(swatch, label)
    target.append(item)
  }
}
