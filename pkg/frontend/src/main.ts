import { ApiClient, resolveBaseUrl } from "./api"
import { App } from "./app"

const root = document.getElementById("app")
if (root) {
  const app = new App(root, new ApiClient(resolveBaseUrl()))
  app.start().catch(err => {
    root.textContent = `Failed to reach the engine: ${err}`
  })
}
