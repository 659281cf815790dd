import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the service suite spawns the backend once per file
    fileParallelism: false,
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
