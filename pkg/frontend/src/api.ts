import type { ApiErrorBody } from "./types"

export class ApiError extends Error {
  status: number
  code: string
  constructor(status: number, code: string, message: string) {
    super(message)
    this.status = status
    this.code = code
  }
}

declare global {
  interface Window {
    __TRIALFLOW_API__?: string
  }
}

/** Engine location: runtime global beats build-time env beats same-origin. */
export function resolveBaseUrl(): string {
  if (typeof window !== "undefined" && window.__TRIALFLOW_API__) {
    return window.__TRIALFLOW_API__.replace(/\/$/, "")
  }
  const fromEnv = import.meta.env?.VITE_API_BASE as string | undefined
  return fromEnv ? fromEnv.replace(/\/$/, "") : ""
}

type FetchLike = (url: string) => Promise<Response>

export class ApiClient {
  private base: string
  private fetchFn: FetchLike
  private inflight = new Map<string, Promise<unknown>>()
  private versions = new Map<string, number>()

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/$/, "")
    this.fetchFn = fetchFn ?? ((url: string) => fetch(url))
  }

  /** GET a payload; identical in-flight requests share one fetch. */
  get<T>(path: string): Promise<T> {
    const pending = this.inflight.get(path)
    if (pending) return pending as Promise<T>
    const promise = this.fetchJson<T>(path).finally(() => {
      this.inflight.delete(path)
    })
    this.inflight.set(path, promise)
    return promise
  }

  /**
   * GET on a named channel where only the most recent request matters
   * (sliders, toggles). A response superseded by a newer request on the
   * same channel resolves to null and must be discarded by the caller.
   */
  async latest<T>(channel: string, path: string): Promise<T | null> {
    const version = (this.versions.get(channel) ?? 0) + 1
    this.versions.set(channel, version)
    const data = await this.get<T>(path)
    return this.versions.get(channel) === version ? data : null
  }

  private async fetchJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.base + path)
    if (!response.ok) {
      let code = "HTTP_" + response.status
      let message = response.statusText
      try {
        const body = (await response.json()) as ApiErrorBody
        code = body.error.code
        message = body.error.message
      } catch {
        // non-JSON error body; keep the status fallback
      }
      throw new ApiError(response.status, code, message)
    }
    return (await response.json()) as T
  }
}
