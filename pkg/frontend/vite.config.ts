import { defineConfig } from "vitest/config"

// The bundle is static; API calls go to the same origin by default.
// For `vite dev` against a locally running engine, proxy /api through.
export default defineConfig({
  base: "./",
  server: {
    proxy: {
      "/api": {
        target: process.env.TRIALFLOW_API ?? "http://127.0.0.1:8000",
        changeOrigin: true,
      },
    },
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
  },
})
