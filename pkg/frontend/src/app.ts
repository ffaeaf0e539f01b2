import { ApiClient, ApiError } from "./api"
import { clearChildren, el } from "./dom"
import { renderLegend } from "./palette"
import { changedKeys, DEFAULT_STATE, parseState, serializeState, ViewState } from "./state"
import type {
  ClustersPayload, ClusterStatsPayload, ImportancePayload, MetaPayload,
  PatientPayload, PatientsPayload, ProgressionPayload, SurvivalPayload,
} from "./types"
import { CohortView } from "./views/cohort"
import { IndividualView } from "./views/individual"
import { ProgressionView } from "./views/progression"
import { StatisticsView, SelectedPatientStats } from "./views/statistics"

interface Controls {
  methodWard: HTMLInputElement
  methodGraph: HTMLInputElement
  kInput: HTMLInputElement
  clusterSelect: HTMLSelectElement
  groupCluster: HTMLInputElement
  groupArm: HTMLInputElement
  sortToggle: HTMLInputElement
  deltaSlider: HTMLInputElement
  deltaLabel: HTMLElement
  sigmaSlider: HTMLInputElement
  sigmaLabel: HTMLElement
}

/**
 * Owns the ViewState, keeps it mirrored in the URL query, fetches what
 * each state change invalidates, and re-renders the four views from
 * cached payloads. Stale fetches are dropped by channel versioning in
 * the ApiClient, so a slower earlier response never overwrites a newer
 * one.
 */
export class App {
  state: ViewState = { ...DEFAULT_STATE }

  private meta!: MetaPayload
  private clusters: ClustersPayload | null = null
  private importances: ImportancePayload[] = []
  private progression: ProgressionPayload | null = null
  private clusterStats: ClusterStatsPayload | null = null
  private survival: SurvivalPayload | null = null
  private patientDetail: PatientPayload | null = null
  private patientMissing: string | null = null
  private cohortError: string | null = null

  private individualView!: IndividualView
  private cohortView!: CohortView
  private progressionView!: ProgressionView
  private statisticsView!: StatisticsView
  private controls!: Controls

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private win: Window = window,
  ) {}

  async start(): Promise<void> {
    this.state = parseState(this.win.location.search)
    this.meta = await this.api.get<MetaPayload>("/api/meta")
    await this.api.get<PatientsPayload>("/api/patients")
    this.buildLayout()
    this.win.addEventListener("popstate", () => {
      this.state = parseState(this.win.location.search)
      void this.reloadAll()
    })
    await this.reloadAll()
  }

  /** State transition; fetches only what the changed keys invalidate. */
  async update(patch: Partial<ViewState>): Promise<void> {
    const next = { ...this.state, ...patch }
    const changed = changedKeys(this.state, next)
    if (changed.length === 0) return
    this.state = next
    this.syncUrl()

    const jobs: Promise<void>[] = []
    if (changed.includes("method") || changed.includes("k")) {
      jobs.push(this.loadClusterData(), this.loadSurvival())
    } else {
      if (changed.includes("delta") || changed.includes("sigma") ||
          changed.includes("cluster")) {
        jobs.push(this.loadProgression())
      }
      if (changed.includes("cluster")) jobs.push(this.loadClusterStats())
      if (changed.includes("groupby")) jobs.push(this.loadSurvival())
    }
    if (changed.includes("patient")) jobs.push(this.loadPatient())
    await Promise.all(jobs)
    this.renderAll()
  }

  activeCluster(): string | null {
    if (this.state.cluster) return this.state.cluster
    const names = this.clusters ? [...this.clusters.cluster_names].sort() : []
    return names[0] ?? null
  }

  private async reloadAll(): Promise<void> {
    await Promise.all([
      this.loadClusterData(),
      this.loadSurvival(),
      this.loadPatient(),
    ])
    this.renderAll()
  }

  private clusterQuery(): string {
    return `method=${this.state.method}&k=${this.state.k}`
  }

  private async loadClusterData(): Promise<void> {
    let data: ClustersPayload | null
    try {
      data = await this.api.latest<ClustersPayload>(
        "clusters", `/api/clusters?${this.clusterQuery()}`)
    } catch (err) {
      this.cohortError = err instanceof ApiError ? err.message : String(err)
      this.clusters = null
      this.importances = []
      return
    }
    if (data === null) return // superseded
    this.cohortError = null
    this.clusters = data
    const names = [...data.cluster_names].sort()
    this.importances = await Promise.all(names.map(name =>
      this.api.get<ImportancePayload>(
        `/api/clusters/${name}/importance?${this.clusterQuery()}`)))
    await Promise.all([this.loadProgression(), this.loadClusterStats()])
  }

  private async loadProgression(): Promise<void> {
    const cluster = this.activeCluster()
    if (!cluster) return
    const path = `/api/clusters/${cluster}/progression?${this.clusterQuery()}` +
      `&delta=${this.state.delta}&sigma=${this.state.sigma}`
    try {
      const data = await this.api.latest<ProgressionPayload>("progression", path)
      if (data !== null) this.progression = data
    } catch {
      this.progression = null
    }
  }

  private async loadClusterStats(): Promise<void> {
    const cluster = this.activeCluster()
    if (!cluster) return
    try {
      const data = await this.api.latest<ClusterStatsPayload>(
        "cluster-stats", `/api/clusters/${cluster}/stats?${this.clusterQuery()}`)
      if (data !== null) this.clusterStats = data
    } catch {
      this.clusterStats = null
    }
  }

  private async loadSurvival(): Promise<void> {
    const path = `/api/survival?groupby=${this.state.groupby}&${this.clusterQuery()}`
    try {
      const data = await this.api.latest<SurvivalPayload>("survival", path)
      if (data !== null) this.survival = data
    } catch {
      this.survival = null
    }
  }

  private async loadPatient(): Promise<void> {
    if (!this.state.patient) {
      this.patientDetail = null
      this.patientMissing = null
      return
    }
    try {
      const data = await this.api.latest<PatientPayload>(
        "patient", `/api/patients/${this.state.patient}`)
      if (data === null) return
      this.patientDetail = data
      this.patientMissing = null
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.patientDetail = null
        this.patientMissing = this.state.patient
      } else {
        throw err
      }
    }
  }

  private syncUrl(): void {
    const query = serializeState(this.state)
    const path = this.win.location.pathname + (query ? `?${query}` : "")
    this.win.history.replaceState(null, "", path)
  }

  private clusterNameOf(patientId: string): string | null {
    if (!this.clusters) return null
    const index = this.clusters.labels[patientId]
    if (index === undefined) return null
    return this.clusters.cluster_names[index] ?? null
  }

  private selectedForStats(): SelectedPatientStats | null {
    if (!this.patientDetail || !this.survival) return null
    const group = this.survival.groupby === "arm"
      ? this.patientDetail.arm
      : this.clusterNameOf(this.patientDetail.id)
    return group === null ? null : { payload: this.patientDetail, group }
  }

  renderAll(): void {
    this.syncControls()
    if (this.patientMissing) {
      this.individualView.renderNotFound(this.patientMissing)
    } else if (this.patientDetail) {
      this.individualView.render(this.patientDetail, this.meta.horizon_days)
    } else {
      this.individualView.renderEmpty()
    }

    if (this.cohortError) {
      this.cohortView.renderError(this.cohortError)
    } else if (this.clusters) {
      this.cohortView.render(this.clusters, this.importances, this.meta,
        this.state.patient, this.activeCluster())
    }

    if (this.progression) {
      this.progressionView.render(this.progression)
    } else {
      this.progressionView.renderEmpty(this.activeCluster() ?? "?")
    }

    if (this.survival) {
      this.statisticsView.render(this.survival, this.clusterStats,
        this.selectedForStats())
    }
  }

  private buildLayout(): void {
    clearChildren(this.root)
    const header = el("header", { class: "topbar" })
    header.append(el("strong", {}, "trialflow"))

    const methodWrap = el("span", { class: "control" })
    const methodWard = el("input", {
      type: "radio", name: "method", id: "method-ward", value: "ward",
    })
    const methodGraph = el("input", {
      type: "radio", name: "method", id: "method-graph", value: "graph",
    })
    methodWrap.append(
      methodWard, el("label", { for: "method-ward" }, "ward"),
      methodGraph, el("label", { for: "method-graph" }, "graph"),
    )
    const onMethod = () => {
      void this.update({ method: methodGraph.checked ? "graph" : "ward" })
    }
    methodWard.addEventListener("change", onMethod)
    methodGraph.addEventListener("change", onMethod)

    const kInput = el("input", {
      type: "number", id: "k-input", min: 1, max: this.meta.n_patients, value: this.state.k,
    })
    kInput.addEventListener("change", () => {
      void this.update({ k: Math.max(1, Math.round(Number(kInput.value) || this.state.k)) })
    })

    const clusterSelect = el("select", { id: "cluster-select" })
    clusterSelect.addEventListener("change", () => {
      void this.update({ cluster: clusterSelect.value })
    })

    const groupWrap = el("span", { class: "control" })
    const groupCluster = el("input", {
      type: "radio", name: "groupby", id: "group-cluster", value: "cluster",
    })
    const groupArm = el("input", {
      type: "radio", name: "groupby", id: "group-arm", value: "arm",
    })
    groupWrap.append(
      groupCluster, el("label", { for: "group-cluster" }, "by cluster"),
      groupArm, el("label", { for: "group-arm" }, "by arm"),
    )
    const onGroup = () => {
      void this.update({ groupby: groupArm.checked ? "arm" : "cluster" })
    }
    groupCluster.addEventListener("change", onGroup)
    groupArm.addEventListener("change", onGroup)

    const sortToggle = el("input", { type: "checkbox", id: "sort-outcome" })
    sortToggle.addEventListener("change", () => {
      this.cohortView.sortByOutcome = sortToggle.checked
      this.renderAll()
    })

    header.append(
      el("label", {}, "method"), methodWrap,
      el("label", { for: "k-input" }, "k"), kInput,
      el("label", { for: "cluster-select" }, "cluster"), clusterSelect,
      el("label", {}, "survival"), groupWrap,
      sortToggle, el("label", { for: "sort-outcome" }, "sort bands by outcome"),
    )
    this.root.append(header)

    const grid = el("main", { class: "grid" })
    const panel = (id: string, title: string) => {
      const section = el("section", { id: `${id}-panel`, class: "panel" })
      section.append(el("h2", {}, title))
      const body = el("div", { id, class: "panel-body" })
      section.append(body)
      grid.append(section)
      return body
    }

    const individualBody = panel("individual", "Individual")
    const cohortBody = panel("cohort", "Cohort")

    const progressionSection = el("section", { id: "progression-panel", class: "panel" })
    progressionSection.append(el("h2", {}, "Progression"))
    const sliders = el("div", { class: "slider-row" })
    const deltaSlider = el("input", {
      type: "range", id: "delta-slider", min: 0, max: 1, step: 0.05,
      value: this.state.delta,
    })
    const deltaLabel = el("span", { class: "slider-value" }, String(this.state.delta))
    const sigmaSlider = el("input", {
      type: "range", id: "sigma-slider", min: 0, max: 1, step: 0.01,
      value: this.state.sigma,
    })
    const sigmaLabel = el("span", { class: "slider-value" }, String(this.state.sigma))
    // live label while dragging; the engine is only asked on release
    deltaSlider.addEventListener("input", () => { deltaLabel.textContent = deltaSlider.value })
    deltaSlider.addEventListener("change", () => {
      void this.update({ delta: Number(deltaSlider.value) })
    })
    sigmaSlider.addEventListener("input", () => { sigmaLabel.textContent = sigmaSlider.value })
    sigmaSlider.addEventListener("change", () => {
      void this.update({ sigma: Number(sigmaSlider.value) })
    })
    sliders.append(
      el("label", { for: "delta-slider" }, "delta"), deltaSlider, deltaLabel,
      el("label", { for: "sigma-slider" }, "sigma"), sigmaSlider, sigmaLabel,
    )
    progressionSection.append(sliders)
    const progressionBody = el("div", { id: "progression", class: "panel-body" })
    progressionSection.append(progressionBody)
    grid.append(progressionSection)

    const statisticsBody = panel("statistics", "Statistics")
    this.root.append(grid)

    const legend = el("footer", { id: "legend" })
    this.root.append(legend)
    renderLegend(legend)

    this.individualView = new IndividualView(individualBody)
    this.cohortView = new CohortView(cohortBody)
    this.cohortView.onSelectPatient = id => { void this.update({ patient: id }) }
    this.cohortView.onSelectCluster = name => { void this.update({ cluster: name }) }
    this.progressionView = new ProgressionView(progressionBody)
    this.statisticsView = new StatisticsView(statisticsBody)

    this.controls = {
      methodWard, methodGraph, kInput, clusterSelect,
      groupCluster, groupArm, sortToggle,
      deltaSlider, deltaLabel, sigmaSlider, sigmaLabel,
    }
    this.syncControls()
  }

  private syncControls(): void {
    const c = this.controls
    c.methodWard.checked = this.state.method === "ward"
    c.methodGraph.checked = this.state.method === "graph"
    c.kInput.value = String(this.state.k)
    c.groupCluster.checked = this.state.groupby === "cluster"
    c.groupArm.checked = this.state.groupby === "arm"
    c.deltaSlider.value = String(this.state.delta)
    c.deltaLabel.textContent = String(this.state.delta)
    c.sigmaSlider.value = String(this.state.sigma)
    c.sigmaLabel.textContent = String(this.state.sigma)

    const names = this.clusters ? [...this.clusters.cluster_names].sort() : []
    const active = this.activeCluster()
    c.clusterSelect.replaceChildren()
    for (const name of names) {
      const option = el("option", { value: name }, name)
      if (name === active) option.setAttribute("selected", "selected")
      c.clusterSelect.append(option)
    }
    if (active) c.clusterSelect.value = active
  }
}
