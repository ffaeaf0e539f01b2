const SVG_NS = "http://www.w3.org/2000/svg"

type Attrs = Record<string, string | number>

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Attrs = {}, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value))
  if (text !== undefined) node.textContent = text
  return node
}

export function svg(tag: string, attrs: Attrs = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag)
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value))
  return node
}

/** Native tooltip on an SVG node. */
export function withTitle(node: SVGElement, text: string): SVGElement {
  const title = document.createElementNS(SVG_NS, "title")
  title.textContent = text
  node.append(title)
  return node
}

export interface Scale {
  (x: number): number
  domain: [number, number]
  range: [number, number]
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain
  const [r0, r1] = range
  const span = d1 - d0
  const fn = ((x: number) => (span === 0 ? r0 : r0 + ((x - d0) / span) * (r1 - r0))) as Scale
  fn.domain = domain
  fn.range = range
  return fn
}

/**
 * Path for a right-continuous step function: horizontal to each next x,
 * then vertical to its y. Exactly how survival estimates drop at events.
 */
export function stepPath(points: { x: number; y: number }[]): string {
  if (points.length === 0) return ""
  const first = points[0]!
  let d = `M${first.x},${first.y}`
  for (let i = 1; i < points.length; i++) {
    const p = points[i]!
    d += `H${p.x}V${p.y}`
  }
  return d
}

/** Step path extended with the reversed lower edge, for CI band polygons. */
export function stepBandPath(
  upper: { x: number; y: number }[], lower: { x: number; y: number }[],
): string {
  if (upper.length === 0) return ""
  let d = stepPath(upper)
  const rev = [...lower].reverse()
  const last = rev[0]!
  d += `L${last.x},${last.y}`
  for (let i = 1; i < rev.length; i++) {
    const p = rev[i]!
    d += `V${p.y}H${p.x}`
  }
  return d + "Z"
}

export function clearChildren(node: Element): void {
  node.replaceChildren()
}
